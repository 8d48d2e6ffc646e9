"""Simulation harness: synthetic populations, trial runners, experiments.

Populations follow the two-group design used throughout the evaluation: a
fraction n1_frac of items carry large reported values (uniform on
[large_low, large_high]) and the rest small ones (uniform on
[small_low, small_high]). True misstatement fractions are tied to item size:

  f_mode = "prop_weight":     large items draw f from f_big_range,
                              small items from f_small_range
  f_mode = "inv_prop_weight": the assignment is swapped

Optional scores model side information:

  score_mode = "relative": S = f * u with u uniform on [1-a, 1+a], a = score_param
  score_mode = "mixture":  S = c*f + (1-c)*R with R uniform on [0,1], c = score_param

All randomness is derived from the scenario seed through counter-based
streams keyed by (trial, channel), so trials are reproducible independently
of execution order and populations are shared across compared arms.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .confseq import canonical_family
from .engine import (
    STATUS_EXHAUSTED,
    SessionConfig,
    create_session,
)
from .errors import ConfigurationError, FormatError
from .martingale import DEFAULT_GRID_SIZE
from .population import Population, population_from_arrays
from .rng import child_seed, split_stream
from .sampling import SamplingStrategy

F_MODES = ("prop_weight", "inv_prop_weight")
SCORE_MODES = ("none", "relative", "mixture")

# Slack for the coverage check: the session accumulates audited mass in draw
# order while the trial's reference mean comes from one dot product, so the
# two ends of a collapsed interval differ from the reference by summation
# noise. Genuine exclusions move bounds by at least a grid cell.
COVER_TOL = 1e-9

# Channel tags for per-trial stream derivation.
_CH_POPULATION = 0
_CH_SESSION = 1


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulation experiment."""

    n: int = 200
    n1_frac: float = 0.2
    large_low: float = 100.0
    large_high: float = 1000.0
    small_low: float = 1.0
    small_high: float = 10.0
    f_mode: str = "prop_weight"
    f_big_range: tuple = (0.4, 0.5)
    f_small_range: tuple = (0.001, 0.01)
    score_mode: str = "none"
    score_param: float = 0.1
    trials: int = 200
    seed: int = 0
    epsilon: float = 0.05
    delta: float = 0.05
    strategy: str = "propM"
    cs_family: str = "betting"
    control_variates: bool = False
    batch_size: int = 1
    grid_size: int = DEFAULT_GRID_SIZE
    use_logical: bool = True
    run_to_exhaustion: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("population size must be positive")
        if not (0.0 <= self.n1_frac <= 1.0):
            raise ConfigurationError("n1_frac must lie in [0, 1]")
        if self.f_mode not in F_MODES:
            raise ConfigurationError(f"f_mode must be one of {F_MODES}")
        if self.score_mode not in SCORE_MODES:
            raise ConfigurationError(f"score_mode must be one of {SCORE_MODES}")
        if self.trials < 1:
            raise ConfigurationError("trials must be positive")
        object.__setattr__(self, "cs_family", canonical_family(self.cs_family))
        object.__setattr__(self, "f_big_range", tuple(self.f_big_range))
        object.__setattr__(self, "f_small_range", tuple(self.f_small_range))

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["f_big_range"] = list(self.f_big_range)
        doc["f_small_range"] = list(self.f_small_range)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(doc) - known
        if unknown:
            raise FormatError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json_file(cls, path) -> "ScenarioConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise FormatError(f"{path}: scenario must be a JSON object")
        return cls.from_dict(doc)


def generate_population(scenario: ScenarioConfig, rng: np.random.Generator) -> Population:
    """Draw one synthetic population (reported values, truth, scores)."""
    n = scenario.n
    n1 = int(round(scenario.n1_frac * n))
    reported = np.empty(n)
    reported[:n1] = rng.uniform(scenario.large_low, scenario.large_high, size=n1)
    reported[n1:] = rng.uniform(scenario.small_low, scenario.small_high, size=n - n1)
    is_large = np.zeros(n, dtype=bool)
    is_large[:n1] = True
    perm = rng.permutation(n)
    reported = reported[perm]
    is_large = is_large[perm]

    big_group = is_large if scenario.f_mode == "prop_weight" else ~is_large
    truth = np.empty(n)
    lo, hi = scenario.f_big_range
    truth[big_group] = rng.uniform(lo, hi, size=int(big_group.sum()))
    lo, hi = scenario.f_small_range
    truth[~big_group] = rng.uniform(lo, hi, size=int((~big_group).sum()))

    scores = generate_scores(truth, scenario.score_mode, scenario.score_param, rng)
    return population_from_arrays(reported=reported, scores=scores, truth=truth)


def generate_scores(
    truth: np.ndarray,
    score_mode: str,
    score_param: float,
    rng: np.random.Generator,
) -> np.ndarray | None:
    """Side-information scores for the given true fractions, or None."""
    if score_mode == "none":
        return None
    if score_mode == "relative":
        a = score_param
        if not (0.0 <= a < 1.0):
            raise ConfigurationError("relative score accuracy must lie in [0, 1)")
        noise = rng.uniform(1.0 - a, 1.0 + a, size=truth.size)
        return np.clip(truth * noise, 0.0, 1.0)
    if score_mode == "mixture":
        c = score_param
        if not (0.0 <= c <= 1.0):
            raise ConfigurationError("mixture coefficient must lie in [0, 1]")
        blend = rng.uniform(0.0, 1.0, size=truth.size)
        return np.clip(c * truth + (1.0 - c) * blend, 0.0, 1.0)
    raise ConfigurationError(f"unknown score mode {score_mode!r}")


def _strategy_for(scenario: ScenarioConfig) -> SamplingStrategy:
    # A propMS audit with factor-accurate scores declares the accuracy band,
    # which tightens the attainable payoff range used for bet clipping.
    if scenario.strategy == "propMS" and scenario.score_mode == "relative":
        return SamplingStrategy(scenario.strategy, rel_accuracy=scenario.score_param)
    return SamplingStrategy(scenario.strategy)


def session_config_for(scenario: ScenarioConfig, session_seed: int) -> SessionConfig:
    return SessionConfig(
        epsilon=scenario.epsilon,
        delta=scenario.delta,
        strategy=_strategy_for(scenario),
        cs_family=scenario.cs_family,
        control_variates=scenario.control_variates,
        batch_size=scenario.batch_size,
        grid_size=scenario.grid_size,
        seed=session_seed,
        use_logical=scenario.use_logical,
    )


@dataclass
class TrialResult:
    tau: int
    m_star: float
    miscovered: bool
    widths: np.ndarray  # width after each draw t = 1..t_final
    final_lo: float
    final_hi: float
    max_wealth_dev: float | None = None


def run_single_trial(
    population: Population,
    config: SessionConfig,
    run_to_exhaustion: bool = False,
    track_null: float | None = None,
) -> TrialResult:
    """Run one auto-answered audit (observations come from stored truth)."""
    if population.truth is None:
        raise ConfigurationError("auto-answered trials need a truth-bearing population")
    grid_points = None
    if track_null is not None and config.cs_family == "betting":
        base = np.arange(config.grid_size, dtype=float) / (config.grid_size - 1)
        grid_points = np.unique(np.concatenate([base, [track_null]]))
    session = create_session(population, config, grid_points=grid_points)
    m_star = population.true_weighted_mean()
    truth = population.truth
    miscovered = False
    max_dev = 0.0 if track_null is not None else None
    widths = []
    while True:
        if session.status == STATUS_EXHAUSTED:
            break
        if not run_to_exhaustion and session.stopped_at is not None:
            break
        indices = session.next_draw()
        result = session.record_observation([float(truth[i]) for i in indices])
        combined = session.intervals.combined
        if combined.empty or not (
            combined.lo - COVER_TOL <= m_star <= combined.hi + COVER_TOL
        ):
            miscovered = True
        # One interval per batch; attribute it to every draw it covers.
        widths.extend([result.width] * len(indices))
        if track_null is not None and session.grid is not None:
            wealth = math.exp(
                float(session.grid.log_wealth[session.grid.index_of(track_null)])
            )
            max_dev = max(max_dev, abs(wealth - 1.0))
    tau = session.stopped_at if session.stopped_at is not None else session.t
    combined = session.intervals.combined
    return TrialResult(
        tau=int(tau),
        m_star=m_star,
        miscovered=miscovered,
        widths=np.asarray(widths, dtype=float),
        final_lo=combined.lo,
        final_hi=combined.hi,
        max_wealth_dev=max_dev,
    )


@dataclass
class ExperimentResult:
    scenario: ScenarioConfig
    taus: np.ndarray
    m_stars: np.ndarray
    miscovered: np.ndarray
    final_los: np.ndarray
    final_his: np.ndarray
    width_matrix: np.ndarray  # trials x max_t, padded with each trial's last width
    max_wealth_devs: np.ndarray | None = None

    @property
    def mean_tau(self) -> float:
        return float(self.taus.mean())

    @property
    def miscoverage_rate(self) -> float:
        return float(self.miscovered.mean())

    def width_quantiles(self, qs=(0.1, 0.5, 0.9)) -> dict:
        out = {"t": np.arange(1, self.width_matrix.shape[1] + 1)}
        for q in qs:
            out[f"q{int(round(q * 100)):02d}"] = np.quantile(self.width_matrix, q, axis=0)
        out["mean"] = self.width_matrix.mean(axis=0)
        return out

    def summary(self) -> dict:
        doc = {
            "scenario": self.scenario.to_dict(),
            "trials": int(self.taus.size),
            "mean_tau": self.mean_tau,
            "median_tau": float(np.median(self.taus)),
            "tau_q10": float(np.quantile(self.taus, 0.1)),
            "tau_q90": float(np.quantile(self.taus, 0.9)),
            "miscoverage_count": int(self.miscovered.sum()),
            "miscoverage_rate": self.miscoverage_rate,
            "mean_m_star": float(self.m_stars.mean()),
            "mean_final_width": float((self.final_his - self.final_los).mean()),
        }
        if self.max_wealth_devs is not None:
            doc["max_wealth_dev"] = float(self.max_wealth_devs.max())
        return doc

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")
        with open(out / "trials.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial", "tau", "m_star", "miscovered", "final_lo", "final_hi"])
            for i in range(self.taus.size):
                writer.writerow(
                    [
                        i,
                        int(self.taus[i]),
                        repr(float(self.m_stars[i])),
                        int(self.miscovered[i]),
                        repr(float(self.final_los[i])),
                        repr(float(self.final_his[i])),
                    ]
                )
        quants = self.width_quantiles()
        keys = [k for k in quants if k != "t"]
        with open(out / "widths.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + keys)
            for row in range(quants["t"].size):
                writer.writerow(
                    [int(quants["t"][row])] + [repr(float(quants[k][row])) for k in keys]
                )


def _pad_widths(width_lists) -> np.ndarray:
    max_t = max(w.size for w in width_lists)
    mat = np.empty((len(width_lists), max_t))
    for i, w in enumerate(width_lists):
        if w.size == 0:
            mat[i] = 1.0
            continue
        mat[i, : w.size] = w
        mat[i, w.size :] = w[-1]
    return mat


def run_trials(
    scenario: ScenarioConfig,
    track_null_wealth: bool = False,
) -> ExperimentResult:
    """Run the scenario's independent trials; populations are re-drawn per
    trial from the (seed, trial, channel) stream."""
    taus, m_stars, miss, los, his, width_lists, devs = [], [], [], [], [], [], []
    for i in range(scenario.trials):
        pop_rng = split_stream(scenario.seed, i, _CH_POPULATION)
        population = generate_population(scenario, pop_rng)
        config = session_config_for(scenario, child_seed(scenario.seed, i, _CH_SESSION))
        track = population.true_weighted_mean() if track_null_wealth else None
        trial = run_single_trial(
            population,
            config,
            run_to_exhaustion=scenario.run_to_exhaustion,
            track_null=track,
        )
        taus.append(trial.tau)
        m_stars.append(trial.m_star)
        miss.append(trial.miscovered)
        los.append(trial.final_lo)
        his.append(trial.final_hi)
        width_lists.append(trial.widths)
        if track_null_wealth:
            devs.append(trial.max_wealth_dev)
    return ExperimentResult(
        scenario=scenario,
        taus=np.asarray(taus, dtype=int),
        m_stars=np.asarray(m_stars),
        miscovered=np.asarray(miss, dtype=bool),
        final_los=np.asarray(los),
        final_his=np.asarray(his),
        width_matrix=_pad_widths(width_lists),
        max_wealth_devs=np.asarray(devs) if track_null_wealth else None,
    )


@dataclass
class CvSweepResult:
    scenario: ScenarioConfig
    c_values: list
    ratios: dict  # c -> np.ndarray of per-trial tau ratios
    taus_cv: dict
    taus_plain: dict

    def mean_ratio(self, c: float) -> float:
        return float(self.ratios[c].mean())

    def summary(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "c_values": list(self.c_values),
            "mean_ratio": {repr(c): self.mean_ratio(c) for c in self.c_values},
            "std_ratio": {repr(c): float(self.ratios[c].std()) for c in self.c_values},
            "mean_tau_cv": {repr(c): float(self.taus_cv[c].mean()) for c in self.c_values},
            "mean_tau_plain": {
                repr(c): float(self.taus_plain[c].mean()) for c in self.c_values
            },
        }

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")
        with open(out / "ratios.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["c", "trial", "tau_cv", "tau_plain", "ratio"])
            for c in self.c_values:
                for i in range(self.ratios[c].size):
                    writer.writerow(
                        [
                            repr(float(c)),
                            i,
                            int(self.taus_cv[c][i]),
                            int(self.taus_plain[c][i]),
                            repr(float(self.ratios[c][i])),
                        ]
                    )


def cv_gain_sweep(scenario: ScenarioConfig, c_values) -> CvSweepResult:
    """Paired control-variate gain experiment over mixture coefficients.

    For each c, every trial draws one population with mixture-c scores and
    runs two sessions from identical seeds — control variates on and off —
    on the raw probabilistic sequence (the logical intersection would mask
    the comparison: paired arms share draws, so a binding logical bound
    stops both at the same step). Reports per-trial stopping-time ratios.
    """
    ratios: dict = {}
    taus_cv: dict = {}
    taus_plain: dict = {}
    for c in c_values:
        base = replace(
            scenario,
            score_mode="mixture",
            score_param=float(c),
            use_logical=False,
            cs_family="betting",
        )
        r, tc, tp = [], [], []
        for i in range(base.trials):
            pop_rng = split_stream(base.seed, i, _CH_POPULATION)
            population = generate_population(base, pop_rng)
            seed_i = child_seed(base.seed, i, _CH_SESSION)
            with_cv = run_single_trial(
                population,
                session_config_for(replace(base, control_variates=True), seed_i),
            )
            without_cv = run_single_trial(
                population,
                session_config_for(replace(base, control_variates=False), seed_i),
            )
            tc.append(with_cv.tau)
            tp.append(without_cv.tau)
            r.append(with_cv.tau / without_cv.tau)
        ratios[c] = np.asarray(r)
        taus_cv[c] = np.asarray(tc, dtype=int)
        taus_plain[c] = np.asarray(tp, dtype=int)
    return CvSweepResult(
        scenario=scenario,
        c_values=list(c_values),
        ratios=ratios,
        taus_cv=taus_cv,
        taus_plain=taus_plain,
    )
