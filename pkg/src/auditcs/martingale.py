"""Wealth martingales over a grid of candidate misstatement means.

For each candidate mean m on a grid over [0, 1], we track the wealth of a
gambler betting against the hypothesis "the weighted misstatement mean is m".
At audit step t the gambler stakes a signed fraction lambda_t(m) on the payoff

    g_t(m) = Z_t + beta_t(m) * U_t - mu_t(m)

where Z_t = f(I_t) * weight(I_t) / q_t(I_t) is the importance-weighted
observation, U_t is an optional mean-zero control variate built from scores,
and mu_t(m) = m - (audited mass so far) is the conditional mean of Z_t under
the hypothesis. Wealth evolves multiplicatively,

    W_t(m) = W_{t-1}(m) * (1 + lambda_t(m) * g_t(m)),    W_0(m) = 1,

and is stored in log space. Under the true mean the process is a nonnegative
martingale, so wealth above 1/delta eliminates m at confidence 1 - delta.

Bets are chosen by the approximate-Kelly rule clip(A/V) where A and V are the
running sum and sum of squares of past payoffs, clipped to keep every
attainable wealth multiplier at or above EPS_WEALTH.

Minibatch audits apply one wealth update per batch of B draws,
1 + (1/B) * sum_i lambda^(i) g^(i), while bet statistics, control variates,
and the residual null update draw-by-draw inside the batch; with B = 1 this
is exactly the single-draw update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation, SequencingError, ValidationError

# Every attainable wealth multiplier is kept >= EPS_WEALTH by bet clipping.
EPS_WEALTH = 0.01
# Floor for clip denominators when a payoff bound degenerates to ~0.
EPS_DENOM = 1e-12
# Slack when marking nulls as logically excluded; protects the true mean from
# being dropped by float accumulation error on exact-hit paths.
EXCLUDE_TOL = 1e-12

DEFAULT_GRID_SIZE = 1001


@dataclass(frozen=True)
class Observation:
    """One audited draw, importance-weighted.

    z = f_obs * weight / q_prob; u is the realized control variate
    (0.0 when control variates are off or no scores exist).
    """

    step: int
    index: int
    f_obs: float
    q_prob: float
    weight: float
    z: float
    u: float = 0.0


def compute_payoff(
    step: int,
    index: int,
    f_obs: float,
    q_prob: float,
    weight: float,
    u: float = 0.0,
) -> Observation:
    """Validate one draw's outcome and package it as an Observation."""
    if not (0.0 <= f_obs <= 1.0):
        raise ValidationError(f"observed fraction must lie in [0, 1], got {f_obs!r}")
    if not (0.0 < q_prob <= 1.0):
        raise ValidationError(f"draw probability must lie in (0, 1], got {q_prob!r}")
    if not (0.0 < weight <= 1.0):
        raise ValidationError(f"item weight must lie in (0, 1], got {weight!r}")
    if not (-1.0 - 1e-9 <= u <= 1.0 + 1e-9):
        raise ValidationError(f"control variate must lie in [-1, 1], got {u!r}")
    z = f_obs * (weight / q_prob)
    return Observation(
        step=int(step),
        index=int(index),
        f_obs=float(f_obs),
        q_prob=float(q_prob),
        weight=float(weight),
        z=float(z),
        u=float(min(1.0, max(-1.0, u))),
    )


def residual_null(m, history) -> float:
    """Conditional mean of Z under the null m, given the audited history.

    Accepts anything exposing .audited_mass (or a bare float mass).
    """
    mass = history if isinstance(history, (int, float)) else history.audited_mass
    return float(m) - float(mass)


def control_variate_values(dist, scores: np.ndarray) -> np.ndarray:
    """Mean-zero control variate over a step's drawable items.

    U(i) = S(i) - E_q[S], computed on score differences so that constant
    scores produce exact zeros (and hence bit-identical wealth to a run
    without control variates).
    """
    s = np.asarray(scores, dtype=float)[dist.support]
    d = s - s[0]
    mean_d = float(np.dot(dist.probs, d))
    u = d - mean_d
    return np.clip(u, -1.0, 1.0)


def bet_bounds(mu, z_lo, z_hi, cv_lo=0.0, cv_hi=0.0):
    """Admissible signed bet range for payoff support [g_lo, g_hi].

    g_lo = z_lo + cv_lo - mu and g_hi = z_hi + cv_hi - mu. The bounds keep
    1 + lambda * g >= EPS_WEALTH over the whole support:
      positive bets risk the low end:  lambda <= (1-eps)/max(-g_lo, eps_d)
      negative bets risk the high end: lambda >= -(1-eps)/max(g_hi, eps_d)
    """
    mu = np.asarray(mu, dtype=float)
    g_lo = z_lo + cv_lo - mu
    g_hi = z_hi + cv_hi - mu
    hi = (1.0 - EPS_WEALTH) / np.maximum(-g_lo, EPS_DENOM)
    lo = -(1.0 - EPS_WEALTH) / np.maximum(g_hi, EPS_DENOM)
    return lo, hi


def approx_kelly_bet(sum_payoff, sum_sq_payoff, bet_lo, bet_hi):
    """Clipped empirical-Kelly bet A/V.

    First step (A = V = 0) bets 0. Degenerate V = 0 with A != 0 bets the
    admissible extreme on the side of the drift.
    """
    A = np.asarray(sum_payoff, dtype=float)
    V = np.asarray(sum_sq_payoff, dtype=float)
    lo = np.asarray(bet_lo, dtype=float)
    hi = np.asarray(bet_hi, dtype=float)
    safe_v = np.where(V > 0.0, V, 1.0)
    ratio = np.where(V > 0.0, A / safe_v, 0.0)
    bets = np.clip(ratio, lo, hi)
    deg = (V <= 0.0) & (A != 0.0)
    if np.any(deg):
        bets = np.where(deg & (A > 0.0), hi, bets)
        bets = np.where(deg & (A < 0.0), lo, bets)
    return bets


def beta_update(cv_num, cv_den):
    """Control-variate coefficient clip(-cv_num/cv_den, -1, 1); 0 when no data."""
    num = np.asarray(cv_num, dtype=float)
    if cv_den <= 0.0:
        return np.zeros_like(num)
    return np.clip(-num / cv_den, -1.0, 1.0)


@dataclass(frozen=True)
class StepContext:
    """Pre-draw information the wealth update needs for one sub-draw."""

    z_lo: float
    z_hi: float
    remaining_weight: float
    u_lo: float = 0.0
    u_hi: float = 0.0


class NullGrid:
    """Per-null wealth state over a fixed grid of candidate means.

    Nulls that become logically impossible (mu_t(m) < 0 or mu_t(m) larger
    than the total remaining weight) are marked excluded: they keep their
    last log-wealth, stop updating, and leave interval construction up to
    a one-cell guard band (see betting_interval). Exclusion is monotone.
    """

    def __init__(self, points, use_cv: bool = False):
        points = np.asarray(points, dtype=float)
        if points.ndim != 1 or points.size == 0:
            raise ValidationError("grid needs at least one point")
        if np.any(points < 0.0) or np.any(points > 1.0):
            raise ValidationError("grid points must lie in [0, 1]")
        if np.any(np.diff(points) <= 0.0):
            raise ValidationError("grid points must be strictly increasing")
        self.points = points
        self.use_cv = bool(use_cv)
        g = points.size
        self.log_wealth = np.zeros(g)
        self.sum_payoff = np.zeros(g)
        self.sum_sq_payoff = np.zeros(g)
        self.cv_num = np.zeros(g)
        self.cv_den = 0.0
        self.excluded = np.zeros(g, dtype=bool)
        self.audited_mass = 0.0
        self.steps_applied = 0
        self.bets = np.zeros(g)
        self.betas = np.zeros(g)
        self.bet_lo = np.zeros(g)
        self.bet_hi = np.zeros(g)
        self.last_growth = np.zeros(g)
        self._mu = np.zeros(g)
        self._batch_sum = np.zeros(g)
        self._batch_count = 0
        self._awaiting_observation = False

    @classmethod
    def uniform(cls, grid_size: int = DEFAULT_GRID_SIZE, use_cv: bool = False):
        if grid_size < 2:
            raise ValidationError("grid size must be at least 2")
        points = np.arange(grid_size, dtype=float) / (grid_size - 1)
        return cls(points, use_cv=use_cv)

    def index_of(self, m: float) -> int:
        pos = int(np.searchsorted(self.points, m))
        if pos >= self.points.size or self.points[pos] != m:
            raise ValidationError(f"{m!r} is not a grid point")
        return pos

    def wealth_at(self, m: float) -> float:
        return float(np.exp(self.log_wealth[self.index_of(m)]))

    def begin_step(self, ctx: StepContext) -> None:
        """Prepare bets for the next sub-draw (predictable: before its f)."""
        if self._awaiting_observation:
            raise SequencingError("previous sub-draw has no observation yet")
        mu = self.points - self.audited_mass
        newly_impossible = (mu < -EXCLUDE_TOL) | (
            mu > ctx.remaining_weight + EXCLUDE_TOL
        )
        self.excluded |= newly_impossible
        self._mu = mu
        if self.use_cv:
            self.betas = beta_update(self.cv_num, self.cv_den)
            cv_lo = np.minimum(self.betas * ctx.u_lo, self.betas * ctx.u_hi)
            cv_hi = np.maximum(self.betas * ctx.u_lo, self.betas * ctx.u_hi)
        else:
            self.betas = np.zeros_like(self.points)
            cv_lo = 0.0
            cv_hi = 0.0
        self.bet_lo, self.bet_hi = bet_bounds(mu, ctx.z_lo, ctx.z_hi, cv_lo, cv_hi)
        self.bets = approx_kelly_bet(
            self.sum_payoff, self.sum_sq_payoff, self.bet_lo, self.bet_hi
        )
        self._awaiting_observation = True

    def accumulate(self, obs: Observation) -> None:
        """Fold one sub-draw's outcome into bet stats and the batch sum."""
        if not self._awaiting_observation:
            raise SequencingError("begin_step must precede each observation")
        u = obs.u if self.use_cv else 0.0
        g = obs.z + self.betas * u - self._mu
        self._batch_sum += self.bets * g
        self._batch_count += 1
        self.sum_payoff += g
        self.sum_sq_payoff += g * g
        if self.use_cv:
            self.cv_num += (obs.z - self._mu) * u
            self.cv_den += u * u
        self.audited_mass += obs.weight * obs.f_obs
        self._awaiting_observation = False

    def finish_step(self) -> None:
        """Apply the batched wealth multiplier 1 + mean(lambda_i * g_i)."""
        if self._awaiting_observation:
            raise SequencingError("last sub-draw has no observation yet")
        if self._batch_count == 0:
            raise SequencingError("no observations accumulated for this step")
        y = self._batch_sum / self._batch_count
        active = ~self.excluded
        if np.any(y[active] <= -1.0):
            worst = int(np.argmin(np.where(active, y, np.inf)))
            raise InvariantViolation(
                "wealth multiplier 1 + lambda*g <= 0 at null "
                f"m={self.points[worst]!r}; an observation fell outside the "
                "declared payoff support"
            )
        self.log_wealth[active] += np.log1p(y[active])
        self.last_growth = np.where(active, y, 0.0)
        self.steps_applied += 1
        self._batch_sum = np.zeros_like(self.points)
        self._batch_count = 0


def update_wealth(grid: NullGrid, ctx: StepContext, obs: Observation) -> None:
    """Single-draw wealth update (batch of one)."""
    grid.begin_step(ctx)
    grid.accumulate(obs)
    grid.finish_step()


def update_wealth_batch(grid: NullGrid, pairs) -> None:
    """One wealth update for a minibatch of (StepContext, Observation)."""
    pairs = list(pairs)
    if not pairs:
        raise SequencingError("batch must contain at least one draw")
    for ctx, obs in pairs:
        grid.begin_step(ctx)
        grid.accumulate(obs)
    grid.finish_step()


def growth_bound(y):
    """Quadratic lower bound y - y^2 on the realized log-increment."""
    y = np.asarray(y, dtype=float)
    return y - y * y


def log_growth(y):
    """Realized log wealth increment log(1 + y)."""
    return np.log1p(np.asarray(y, dtype=float))


@dataclass
class GrowthDiagnostics:
    """Per-step growth accounting for one designated null m.

    Records the realized log increment D_t and its quadratic lower bound B_t;
    D_t >= B_t whenever |lambda * g| <= 1/2.
    """

    m: float
    steps: list = field(default_factory=list)
    bounds: list = field(default_factory=list)
    log_increments: list = field(default_factory=list)

    def record_from(self, grid: NullGrid) -> None:
        y = float(grid.last_growth[grid.index_of(self.m)])
        self.steps.append(grid.steps_applied)
        self.bounds.append(float(growth_bound(y)))
        self.log_increments.append(float(log_growth(y)))

    def bound_holds(self) -> bool:
        ok = True
        for b, d in zip(self.bounds, self.log_increments):
            # The quadratic bound is only claimed on |y| <= 1/2; recover y
            # from d = log(1+y).
            y = np.expm1(d)
            if abs(y) <= 0.5:
                ok = ok and (d >= b - 1e-12)
        return ok
