"""Confidence sequences for the weighted misstatement mean.

Three probabilistic constructions share one audit pipeline:

  betting   convex hull of grid nulls whose wealth stays below 1/delta
  hoeffding closed-form supermartingale interval with psi(lambda) = lambda^2 c^2/8
  eb        closed-form empirical-Bernstein interval; the upper end comes from
            mirroring (a lower interval for the complement mean)

Each probabilistic interval is intersected with the logical interval implied
by audited items ([audited mass, audited mass + remaining weight]) and with
the previous combined interval, so the reported sequence only ever shrinks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ValidationError
from .martingale import NullGrid

CS_FAMILIES = ("betting", "hoeffding", "empirical_bernstein")

# Accepted shorthand on input surfaces (configs, CLI, API).
_FAMILY_ALIASES = {"eb": "empirical_bernstein"}


def canonical_family(name: str) -> str:
    """Resolve a family name or alias to its canonical form."""
    resolved = _FAMILY_ALIASES.get(name, name)
    if resolved not in CS_FAMILIES:
        raise ConfigurationError(
            f"unknown cs family {name!r}; expected one of {CS_FAMILIES}"
        )
    return resolved


@dataclass(frozen=True)
class Interval:
    """Closed interval within [0, 1]; empty=True means no value survives."""

    lo: float
    hi: float
    empty: bool = False

    def __post_init__(self):
        if not self.empty and self.lo > self.hi:
            raise ValidationError("interval lower end exceeds upper end")

    @property
    def width(self) -> float:
        return 0.0 if self.empty else self.hi - self.lo

    def contains(self, x: float) -> bool:
        return (not self.empty) and self.lo <= x <= self.hi

    def as_tuple(self):
        return (self.lo, self.hi)


FULL_INTERVAL = Interval(0.0, 1.0)
EMPTY_INTERVAL = Interval(0.0, 0.0, empty=True)


def betting_interval(grid: NullGrid, delta: float) -> Interval:
    """Convex hull of non-excluded grid nulls with wealth below 1/delta.

    Each hull end is extended by one guard cell when the adjacent grid
    point is excluded but was never wealth-rejected. Exclusion tracks the
    audited mass, which moves between grid points; without the guard cell
    the hull end would round up to the next grid point and can land past a
    true mean sitting inside the crossed cell. The guard keeps the interval
    conservative at grid resolution; the exact logical interval then trims
    the excluded mass precisely.

    If exclusion has consumed every unrejected point (late audit: the
    feasible window is narrower than the grid spacing), the hull falls
    back to all unrejected points; the logical intersection reduces it to
    the feasible window. Empty is returned only when every grid point has
    been wealth-rejected, the genuine (probability <= delta) error event.
    """
    if not (0.0 < delta < 1.0):
        raise ValidationError("delta must lie in (0, 1)")
    threshold = -math.log(delta)  # log(1/delta)
    unrejected = grid.log_wealth < threshold
    if not np.any(unrejected):
        return EMPTY_INTERVAL
    candidates = unrejected & ~grid.excluded
    if not np.any(candidates):
        pts = grid.points[unrejected]
        return Interval(float(pts[0]), float(pts[-1]))
    idx = np.flatnonzero(candidates)
    lo_i = int(idx[0])
    hi_i = int(idx[-1])
    if lo_i > 0 and grid.excluded[lo_i - 1] and unrejected[lo_i - 1]:
        lo_i -= 1
    last = grid.points.size - 1
    if hi_i < last and grid.excluded[hi_i + 1] and unrejected[hi_i + 1]:
        hi_i += 1
    return Interval(float(grid.points[lo_i]), float(grid.points[hi_i]))


def logical_bounds(history, remaining_weight: float) -> Interval:
    """Deterministic bounds: audited mass plus [0, remaining weight]."""
    mass = history if isinstance(history, (int, float)) else history.audited_mass
    lo = float(mass)
    hi = lo + float(remaining_weight)
    return Interval(max(0.0, min(1.0, lo)), max(0.0, min(1.0, hi)))


def intersect_running(prob: Interval, logical: Interval, previous: Interval) -> Interval:
    """Intersect this step's probabilistic and logical intervals with the
    previous combined interval; empty propagates."""
    pieces = [prob, logical, previous]
    if any(p.empty for p in pieces):
        return EMPTY_INTERVAL
    lo = max(p.lo for p in pieces)
    hi = min(p.hi for p in pieces)
    if lo > hi:
        return EMPTY_INTERVAL
    return Interval(lo, hi)


def psi_hoeffding(c: float, lam: float) -> float:
    return (lam * c) ** 2 / 8.0


def psi_eb(c: float, lam: float) -> float:
    """(-log(1 - c*lam) - c*lam)/c^2, series-expanded for tiny c*lam."""
    x = c * lam
    if x < 0.0 or x >= 1.0:
        raise ValidationError("empirical-Bernstein requires 0 <= c*lambda < 1")
    if x < 1e-3:
        # (x^2/2 + x^3/3 + x^4/4 + x^5/5)/c^2 without cancellation.
        return lam * lam * (0.5 + x * (1.0 / 3.0 + x * (0.25 + x * 0.2)))
    return (-math.log1p(-x) - x) / (c * c)


def default_hoeffding_lambda(c: float, t0: float, delta: float) -> float:
    """min(sqrt(8 log(2/delta) / (c^2 t0)), 1/(2c))."""
    c = max(c, 1e-300)
    return min(math.sqrt(8.0 * math.log(2.0 / delta) / (c * c * t0)), 0.5 / c)


def default_eb_lambda(sigma2: float, c: float, t0: float, delta: float) -> float:
    """min(sqrt(2 log(2/delta) / (sigma2 t0)), 0.5/c)."""
    sigma2 = max(sigma2, 1e-300)
    c = max(c, 1e-300)
    return min(math.sqrt(2.0 * math.log(2.0 / delta) / (sigma2 * t0)), 0.5 / c)


@dataclass
class _SideState:
    """Accumulators for one empirical-Bernstein side (direct or mirrored)."""

    mu_prev: float = 1.0  # predictable center, starts at 1
    mean_sum: float = 0.0  # running sum of per-step estimates m-hat
    count: int = 0
    sum_lambda: float = 0.0
    sum_lambda_mhat: float = 0.0
    sum_penalty: float = 0.0
    # WSR-style running variance of the raw observations.
    z_sum: float = 0.0
    z_sq_acc: float = 0.25
    sigma2_prev: float = 0.25

    def step(self, z: float, mhat: float, t0: float, delta: float, lam=None):
        c = max(self.mu_prev, 1e-12)
        if lam is None:
            lam = default_eb_lambda(self.sigma2_prev, c, t0, delta)
        lam = float(lam)
        if not (0.0 <= lam < 1.0 / c):
            raise ValidationError("eb lambda must lie in [0, 1/c)")
        self.sum_lambda += lam
        self.sum_lambda_mhat += lam * mhat
        self.sum_penalty += (z - self.mu_prev) ** 2 * psi_eb(c, lam)
        # Advance the predictable statistics for the next step.
        self.count += 1
        self.mean_sum += mhat
        self.mu_prev = self.mean_sum / self.count
        self.z_sum += z
        z_mean = self.z_sum / self.count
        self.z_sq_acc += (z - z_mean) ** 2
        self.sigma2_prev = self.z_sq_acc / (self.count + 1)

    def lower_bound(self, delta: float) -> float:
        if self.sum_lambda <= 0.0:
            return 0.0
        center = self.sum_lambda_mhat / self.sum_lambda
        radius = (math.log(2.0 / delta) + self.sum_penalty) / self.sum_lambda
        return center - radius


@dataclass
class ClosedFormState:
    """Per-step accumulators for the closed-form confidence sequences.

    family: "hoeffding" or "empirical_bernstein" (alias "eb").
    n_items: population size (anchors the default bet schedules at t0 = N/2).
    lambda_schedule: optional callable (t, state) -> lambda_t overriding the
    default; for empirical-Bernstein it applies to the direct (lower) side
    and mirror_lambda_schedule to the mirrored side.
    """

    family: str
    n_items: int
    delta: float
    lambda_schedule: object = None
    mirror_lambda_schedule: object = None
    t: int = 0
    audited_mass: float = 0.0
    audited_weight: float = 0.0
    # Hoeffding accumulators.
    sum_lambda: float = 0.0
    sum_lambda_mhat: float = 0.0
    sum_psi: float = 0.0
    last_c: float = 0.0
    # Empirical-Bernstein sides.
    direct: _SideState = field(default_factory=_SideState)
    mirror: _SideState = field(default_factory=_SideState)

    def __post_init__(self):
        self.family = canonical_family(self.family)
        if self.family == "betting":
            raise ConfigurationError("betting is grid-based, not closed-form")
        if not (0.0 < self.delta < 1.0):
            raise ValidationError("delta must lie in (0, 1)")
        if self.n_items < 1:
            raise ValidationError("population size must be positive")

    @property
    def t0(self) -> float:
        return max(self.n_items / 2.0, 1.0)

    def update(self, z: float, ratio: float, weight: float, f_obs: float, c_bound: float):
        """Fold in one draw.

        z = f * weight/q, ratio = weight/q, c_bound = max over remaining of
        weight/q (the minimal admissible Hoeffding range bound this step).
        """
        self.t += 1
        mhat = z + self.audited_mass
        if self.family == "hoeffding":
            c = float(c_bound)
            if c <= 0.0:
                raise ValidationError("hoeffding range bound must be positive")
            if self.lambda_schedule is not None:
                lam = float(self.lambda_schedule(self.t, self))
            else:
                lam = default_hoeffding_lambda(c, self.t0, self.delta)
            if lam < 0.0:
                raise ValidationError("hoeffding lambda must be nonnegative")
            self.sum_lambda += lam
            self.sum_lambda_mhat += lam * mhat
            self.sum_psi += psi_hoeffding(c, lam)
            self.last_c = c
        else:
            z_mirror = ratio - z  # (weight/q) * (1 - f)
            mhat_mirror = z_mirror + (self.audited_weight - self.audited_mass)
            lam_d = None
            lam_m = None
            if self.lambda_schedule is not None:
                lam_d = float(self.lambda_schedule(self.t, self))
            if self.mirror_lambda_schedule is not None:
                lam_m = float(self.mirror_lambda_schedule(self.t, self))
            self.direct.step(z, mhat, self.t0, self.delta, lam_d)
            self.mirror.step(z_mirror, mhat_mirror, self.t0, self.delta, lam_m)
        self.audited_mass += weight * f_obs
        self.audited_weight += weight

    def interval(self) -> Interval:
        if self.family == "hoeffding":
            return hoeffding_interval(self, self.delta)
        return empirical_bernstein_interval(self, self.delta)


def hoeffding_interval(state: ClosedFormState, delta: float) -> Interval:
    """Closed-form two-sided interval; [0, 1] before any bet is placed."""
    if state.sum_lambda <= 0.0:
        return FULL_INTERVAL
    center = state.sum_lambda_mhat / state.sum_lambda
    radius = (math.log(2.0 / delta) + state.sum_psi) / state.sum_lambda
    return Interval(max(0.0, center - radius), min(1.0, center + radius))


def empirical_bernstein_interval(state: ClosedFormState, delta: float) -> Interval:
    """Lower end from the direct side; upper end mirrors the complement mean."""
    lo = max(0.0, state.direct.lower_bound(delta))
    hi = min(1.0, 1.0 - state.mirror.lower_bound(delta))
    if lo > hi:
        # Both sides hold with probability 1 - delta each; a crossing is a
        # reportable (miscoverage) event, not an internal error.
        return EMPTY_INTERVAL
    return Interval(lo, hi)


def nsm_log_value(state: ClosedFormState, m: float, side: str = "direct") -> float:
    """Log value of the underlying supermartingale at null m (diagnostics).

    For "hoeffding": sum lambda_i (mhat_i - m) - sum psi. For
    "empirical_bernstein" the same shape with the empirical penalty; side
    selects direct vs mirrored (the mirrored null is 1 - m).
    """
    if state.family == "hoeffding":
        return state.sum_lambda_mhat - state.sum_lambda * m - state.sum_psi
    s = state.direct if side == "direct" else state.mirror
    null = m if side == "direct" else 1.0 - m
    return s.sum_lambda_mhat - s.sum_lambda * null - s.sum_penalty
