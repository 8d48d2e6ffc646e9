"""Interactive audit sessions.

A session owns a population, a sampling strategy, a confidence-sequence
state, and a counter-based RNG. It alternates draw -> observe steps:

    indices = session.next_draw()          # one batch of item indices
    result = session.record_observation(f) # audited fractions, same order

After every observed batch the session recomputes its probabilistic interval,
intersects it with the logical bounds and the previous combined interval
(unless configured for the raw sequence), appends a trace row, and records
the first step at which the combined width reached the target epsilon.

Sessions serialize to a single JSON document and replay bit-identically:
history is re-applied through the same update code and the RNG state is
restored from its serialized counter.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, replace

import numpy as np

from .confseq import (
    ClosedFormState,
    FULL_INTERVAL,
    Interval,
    betting_interval,
    canonical_family,
    intersect_running,
    logical_bounds,
)
from .errors import (
    ConfigurationError,
    FormatError,
    SequencingError,
    ValidationError,
)
from .martingale import (
    DEFAULT_GRID_SIZE,
    NullGrid,
    Observation,
    StepContext,
    compute_payoff,
    control_variate_values,
)
from .population import Population, population_from_arrays
from .rng import fresh_seed, master_stream, restore_stream, stream_state
from .sampling import Distribution, SamplingStrategy, draw_index, make_distribution

STATUS_RUNNING = "running"
STATUS_STOPPED = "stopped"
STATUS_EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class SessionConfig:
    """Immutable audit configuration.

    epsilon: stop once the combined interval width is <= epsilon.
    delta: confidence level 1 - delta for the probabilistic sequence.
    use_logical: intersect with logical bounds and enforce monotone
    shrinkage (the default pipeline); False reports the raw probabilistic
    sequence alone.
    """

    epsilon: float
    delta: float
    strategy: SamplingStrategy
    cs_family: str = "betting"
    control_variates: bool = False
    batch_size: int = 1
    grid_size: int = DEFAULT_GRID_SIZE
    seed: int | None = None
    use_logical: bool = True

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ConfigurationError("epsilon must lie in (0, 1]")
        if not (0.0 < self.delta < 1.0):
            raise ConfigurationError("delta must lie in (0, 1)")
        object.__setattr__(self, "cs_family", canonical_family(self.cs_family))
        if self.batch_size < 1:
            raise ConfigurationError("batch size must be at least 1")
        if self.grid_size < 2:
            raise ConfigurationError("grid size must be at least 2")

    def validate_against(self, population: Population) -> None:
        self.strategy.validate_against(population)

    def to_dict(self) -> dict:
        doc = {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "strategy": self.strategy.kind,
            "cs_family": self.cs_family,
            "control_variates": self.control_variates,
            "batch_size": self.batch_size,
            "grid_size": self.grid_size,
            "seed": self.seed,
            "use_logical": self.use_logical,
        }
        if self.strategy.rel_accuracy is not None:
            doc["rel_accuracy"] = self.strategy.rel_accuracy
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionConfig":
        try:
            strategy = SamplingStrategy(
                kind=doc["strategy"],
                rel_accuracy=doc.get("rel_accuracy"),
            )
            return cls(
                epsilon=float(doc["epsilon"]),
                delta=float(doc["delta"]),
                strategy=strategy,
                cs_family=doc.get("cs_family", "betting"),
                control_variates=bool(doc.get("control_variates", False)),
                batch_size=int(doc.get("batch_size", 1)),
                grid_size=int(doc.get("grid_size", DEFAULT_GRID_SIZE)),
                seed=doc.get("seed"),
                use_logical=bool(doc.get("use_logical", True)),
            )
        except KeyError as exc:
            raise FormatError(f"config is missing key {exc}") from exc


class AuditHistory:
    """Record of audited draws plus derived masses."""

    def __init__(self, population: Population):
        self.population = population
        self.observations: list[Observation] = []
        self._audited = np.zeros(population.n, dtype=bool)
        self.audited_mass = 0.0
        self.audited_weight = 0.0

    @property
    def steps(self) -> int:
        return len(self.observations)

    def is_audited(self, index: int) -> bool:
        return bool(self._audited[index])

    def remaining_indices(self) -> np.ndarray:
        return np.flatnonzero(~self._audited)

    def remaining_weight(self) -> float:
        return float(self.population.weights[~self._audited].sum())

    def record(self, obs: Observation) -> None:
        if self._audited[obs.index]:
            raise SequencingError(f"item {obs.index} was already audited")
        self.observations.append(obs)
        self._audited[obs.index] = True
        self.audited_mass += obs.weight * obs.f_obs
        self.audited_weight += obs.weight


@dataclass(frozen=True)
class IntervalState:
    """Interval snapshot after one audit step."""

    t: int
    prob: Interval
    logical: Interval
    combined: Interval

    @property
    def width(self) -> float:
        return self.combined.width

    @property
    def empty(self) -> bool:
        return self.combined.empty


@dataclass(frozen=True)
class PendingDraw:
    """A drawn-but-not-yet-observed item with its step context."""

    index: int
    q_prob: float
    weight: float
    ctx: StepContext
    ratio_max: float
    u_value: float
    fallback: bool


@dataclass(frozen=True)
class StepResult:
    """What record_observation reports back."""

    t: int
    interval: tuple
    width: float
    empty: bool
    stopped_at: int | None
    status: str


class AuditSession:
    """One audit in progress. Use create_session / restore_session.

    grid_points optionally replaces the uniform betting grid (e.g. to place
    a known mean exactly on the grid for diagnostics); it is serialized with
    the session so replay stays faithful.
    """

    def __init__(
        self,
        population: Population,
        config: SessionConfig,
        session_id: str,
        grid_points=None,
    ):
        config.validate_against(population)
        if config.seed is None:
            raise ConfigurationError("session construction requires a resolved seed")
        self.id = session_id
        self.population = population
        self.config = config
        self.history = AuditHistory(population)
        self.rng = master_stream(config.seed)
        self.grid: NullGrid | None = None
        self.cf_state: ClosedFormState | None = None
        self.custom_grid_points = None
        if config.cs_family == "betting":
            if grid_points is not None:
                self.custom_grid_points = np.asarray(grid_points, dtype=float)
                self.grid = NullGrid(
                    self.custom_grid_points, use_cv=config.control_variates
                )
            else:
                self.grid = NullGrid.uniform(
                    config.grid_size, use_cv=config.control_variates
                )
        else:
            self.cf_state = ClosedFormState(
                family=config.cs_family,
                n_items=population.n,
                delta=config.delta,
            )
        self.intervals = IntervalState(
            t=0, prob=FULL_INTERVAL, logical=FULL_INTERVAL, combined=FULL_INTERVAL
        )
        self.trace: list[dict] = []
        self.status = STATUS_RUNNING
        self.stopped_at: int | None = None
        self._pending: list[PendingDraw] | None = None

    # -- draw / observe ----------------------------------------------------

    @property
    def t(self) -> int:
        return self.history.steps

    def has_pending(self) -> bool:
        return self._pending is not None

    def pending_indices(self) -> list[int]:
        if self._pending is None:
            raise SequencingError("no draw is pending")
        return [p.index for p in self._pending]

    def next_draw(self) -> list[int]:
        """Draw the next batch of item indices (without replacement)."""
        if self._pending is not None:
            raise SequencingError("a draw is already pending observation")
        remaining = self.history.remaining_indices()
        if remaining.size == 0:
            raise SequencingError("population is exhausted; nothing left to draw")
        batch = min(self.config.batch_size, int(remaining.size))
        pending: list[PendingDraw] = []
        rem = remaining
        for _ in range(batch):
            pending.append(self._draw_one(rem))
            rem = rem[rem != pending[-1].index]
        self._pending = pending
        return [p.index for p in pending]

    def _draw_one(self, remaining: np.ndarray) -> PendingDraw:
        dist = make_distribution(self.config.strategy, self.population, remaining)
        index = draw_index(dist, self.rng)
        return self._pending_for(dist, remaining, index)

    def _pending_for(
        self, dist: Distribution, remaining: np.ndarray, index: int
    ) -> PendingDraw:
        weights = self.population.weights
        ratio_max = float(np.max(weights[dist.support] / dist.probs))
        rem_weight = float(weights[remaining].sum())
        u_value = 0.0
        u_lo = 0.0
        u_hi = 0.0
        if self.config.control_variates and self.population.scores is not None:
            u_vec = control_variate_values(dist, self.population.scores)
            pos = int(np.searchsorted(dist.support, index))
            u_value = float(u_vec[pos])
            u_lo = float(u_vec.min())
            u_hi = float(u_vec.max())
        ctx = StepContext(
            z_lo=dist.z_lo,
            z_hi=dist.z_hi,
            remaining_weight=rem_weight,
            u_lo=u_lo,
            u_hi=u_hi,
        )
        return PendingDraw(
            index=int(index),
            q_prob=dist.prob_of(index),
            weight=float(weights[index]),
            ctx=ctx,
            ratio_max=ratio_max,
            u_value=u_value,
            fallback=dist.fallback,
        )

    def record_observation(self, f_values) -> StepResult:
        """Report audited fractions for the pending batch, in draw order."""
        if self._pending is None:
            raise SequencingError("no draw is pending; call next_draw first")
        fs = np.atleast_1d(np.asarray(f_values, dtype=float))
        if fs.shape != (len(self._pending),):
            raise ValidationError(
                f"expected {len(self._pending)} observed fraction(s), got {fs.shape}"
            )
        observations = []
        for pd, f in zip(self._pending, fs):
            obs = compute_payoff(
                step=self.history.steps + len(observations) + 1,
                index=pd.index,
                f_obs=float(f),
                q_prob=pd.q_prob,
                weight=pd.weight,
                u=pd.u_value,
            )
            observations.append((pd, obs))
        if self.grid is not None:
            for pd, obs in observations:
                self.grid.begin_step(pd.ctx)
                self.grid.accumulate(obs)
            self.grid.finish_step()
        else:
            for pd, obs in observations:
                self.cf_state.update(
                    z=obs.z,
                    ratio=obs.weight / obs.q_prob,
                    weight=obs.weight,
                    f_obs=obs.f_obs,
                    c_bound=pd.ratio_max,
                )
        for _, obs in observations:
            self.history.record(obs)
        self._pending = None
        return self._after_step()

    def _after_step(self) -> StepResult:
        if self.grid is not None:
            prob = betting_interval(self.grid, self.config.delta)
        else:
            prob = self.cf_state.interval()
        logical = logical_bounds(self.history.audited_mass, self.history.remaining_weight())
        if self.config.use_logical:
            combined = intersect_running(prob, logical, self.intervals.combined)
        else:
            combined = prob
        t = self.history.steps
        self.intervals = IntervalState(t=t, prob=prob, logical=logical, combined=combined)
        self.trace.append(
            {
                "t": t,
                "lo": combined.lo,
                "hi": combined.hi,
                "width": combined.width,
                "empty": combined.empty,
                "prob_lo": prob.lo,
                "prob_hi": prob.hi,
                "prob_empty": prob.empty,
                "logical_lo": logical.lo,
                "logical_hi": logical.hi,
            }
        )
        if self.stopped_at is None and (combined.empty or combined.width <= self.config.epsilon):
            self.stopped_at = t
        if self.history.remaining_indices().size == 0:
            self.status = STATUS_EXHAUSTED
        elif self.stopped_at is not None:
            self.status = STATUS_STOPPED
        return StepResult(
            t=t,
            interval=combined.as_tuple(),
            width=combined.width,
            empty=combined.empty,
            stopped_at=self.stopped_at,
            status=self.status,
        )

    # -- queries -----------------------------------------------------------

    def test_assertion(self, epsilon: float) -> str:
        """Tri-state audit answer at threshold epsilon.

        reject: every surviving mean exceeds epsilon. confirm: none does.
        An empty interval (a miscoverage event) rejects: an inconsistent
        audit must not certify compliance.
        """
        if not (0.0 < epsilon < 1.0):
            raise ValidationError("test threshold must lie in (0, 1)")
        combined = self.intervals.combined
        if combined.empty:
            return "reject"
        if combined.lo > epsilon:
            return "reject"
        if combined.hi <= epsilon:
            return "confirm"
        return "continue"

    def remaining_fraction_interval(self) -> tuple:
        """Interval for the unaudited part of the mean (floored at zero)."""
        combined = self.intervals.combined
        if combined.empty:
            return (0.0, 0.0)
        mass = self.history.audited_mass
        return (max(0.0, combined.lo - mass), max(0.0, combined.hi - mass))


def create_session(
    population: Population,
    config: SessionConfig,
    session_id: str | None = None,
    grid_points=None,
) -> AuditSession:
    """Create a fresh session; draws a random seed if none was configured."""
    if config.seed is None:
        config = replace(config, seed=fresh_seed())
    if session_id is None:
        session_id = uuid.uuid4().hex
    return AuditSession(population, config, session_id, grid_points=grid_points)


# -- persistence -------------------------------------------------------------


def _population_to_dict(population: Population) -> dict:
    doc = {
        "ids": list(population.ids),
        "reported": [float(x) for x in population.reported],
    }
    if population.scores is not None:
        doc["scores"] = [float(x) for x in population.scores]
    if population.truth is not None:
        doc["truth"] = [float(x) for x in population.truth]
    return doc


def _population_from_dict(doc: dict) -> Population:
    try:
        return population_from_arrays(
            reported=np.array(doc["reported"], dtype=float),
            scores=np.array(doc["scores"], dtype=float) if "scores" in doc else None,
            truth=np.array(doc["truth"], dtype=float) if "truth" in doc else None,
            ids=doc["ids"],
        )
    except KeyError as exc:
        raise FormatError(f"embedded population is missing key {exc}") from exc


def save_session(session: AuditSession, include_population: bool = True) -> dict:
    """Serialize a session to a self-contained JSON-ready document."""
    doc = {
        "id": session.id,
        "config": session.config.to_dict(),
        "history": [
            {
                "step": obs.step,
                "index": obs.index,
                "q_prob": obs.q_prob,
                "f_obs": obs.f_obs,
            }
            for obs in session.history.observations
        ],
        "rng_state": stream_state(session.rng),
        "status": session.status,
        "stopped_at": session.stopped_at,
    }
    if session._pending is not None:
        doc["pending"] = [
            {"index": p.index, "q_prob": p.q_prob} for p in session._pending
        ]
    if session.custom_grid_points is not None:
        doc["grid_points"] = [float(x) for x in session.custom_grid_points]
    if include_population:
        doc["population"] = _population_to_dict(session.population)
    return doc


def restore_session(doc: dict, population: Population | None = None) -> AuditSession:
    """Rebuild a session from save_session output.

    The confidence-sequence state is recomputed by replaying the recorded
    history through the same update path (the grid is never serialized); the
    RNG continues from its stored counter, so the continuation is
    bit-identical to the original session.
    """
    try:
        session_id = doc["id"]
        config = SessionConfig.from_dict(doc["config"])
        history_rows = doc["history"]
        rng_state = doc["rng_state"]
    except KeyError as exc:
        raise FormatError(f"session document is missing key {exc}") from exc
    if population is None:
        if "population" not in doc:
            raise FormatError("session document has no population; pass one explicitly")
        population = _population_from_dict(doc["population"])
    if config.seed is None:
        raise FormatError("session config has no seed")
    session = AuditSession(
        population, config, session_id, grid_points=doc.get("grid_points")
    )

    batch: list[tuple] = []
    rows = sorted(history_rows, key=lambda r: r["step"])
    for pos, row in enumerate(rows):
        try:
            step, index, q_rec, f_obs = (
                int(row["step"]),
                int(row["index"]),
                float(row["q_prob"]),
                float(row["f_obs"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed history row {row!r}") from exc
        if step != pos + 1:
            raise FormatError(f"history steps must be contiguous from 1, got {step}")
        batch.append((index, q_rec, f_obs))
        is_last = pos == len(rows) - 1
        if len(batch) == config.batch_size or is_last:
            _replay_batch(session, batch)
            batch = []

    if "pending" in doc and doc["pending"]:
        _replay_pending(session, doc["pending"])
    session.rng = restore_stream(rng_state)
    return session


def _replay_batch(session: AuditSession, batch: list) -> None:
    pending: list[PendingDraw] = []
    rem = session.history.remaining_indices()
    for index, q_rec, _ in batch:
        dist = make_distribution(session.config.strategy, session.population, rem)
        pd = session._pending_for(dist, rem, index)
        if abs(pd.q_prob - q_rec) > 1e-9:
            raise FormatError(
                f"recorded draw probability {q_rec!r} for item {index} does not "
                "match the population and strategy"
            )
        pending.append(pd)
        rem = rem[rem != index]
    session._pending = pending
    session.record_observation([f for _, _, f in batch])


def _replay_pending(session: AuditSession, rows: list) -> None:
    pending: list[PendingDraw] = []
    rem = session.history.remaining_indices()
    for row in rows:
        try:
            index, q_rec = int(row["index"]), float(row["q_prob"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed pending row {row!r}") from exc
        dist = make_distribution(session.config.strategy, session.population, rem)
        pd = session._pending_for(dist, rem, index)
        if abs(pd.q_prob - q_rec) > 1e-9:
            raise FormatError("pending draw does not match the population and strategy")
        pending.append(pd)
        rem = rem[rem != index]
    session._pending = pending
