"""Adaptive without-replacement sampling strategies.

Each audit step draws one item from the set not yet audited. A strategy maps
the current remaining set to a distribution q_t over exactly that set:

  uniform  q_t(i) = 1/|remaining|
  propM    q_t(i) proportional to weights[i]
  propMS   q_t(i) proportional to weights[i] * scores[i]
  oracle   q_t(i) proportional to weights[i] * truth[i]  (analysis only)

propMS (and oracle) fall back to propM on a step where every numerator over
the remaining set is zero, so the audit can always proceed.

Along with probabilities, a Distribution carries the attainable range
[z_lo, z_hi] of the importance-weighted observation
Z = f(I) * weights[I] / q(I); bet sizing downstream relies on it. The default
range is [0, max_{q>0} weights/q] (f can be anywhere in [0, 1]). A propMS
strategy declaring a relative accuracy a (every score within a factor (1±a)
of the true fraction) supports the tighter range
[S_w/(1+a), S_w/(1-a)] with S_w = sum over remaining of weights*scores,
because Z = (f/S)(I) * S_w under q proportional to weights*scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateDistributionError,
    ValidationError,
)
from .population import Population

STRATEGY_KINDS = ("uniform", "propM", "propMS", "oracle")


@dataclass(frozen=True)
class SamplingStrategy:
    """Strategy kind plus optional side-information accuracy declaration.

    rel_accuracy is only meaningful for propMS: it asserts
    scores[i]/(1+a) <= truth[i] <= scores[i]/(1-a) wherever truth is nonzero,
    and tightens the attainable payoff range used for bet clipping.
    """

    kind: str
    rel_accuracy: float | None = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigurationError(
                f"unknown strategy {self.kind!r}; expected one of {STRATEGY_KINDS}"
            )
        if self.rel_accuracy is not None:
            if self.kind != "propMS":
                raise ConfigurationError("rel_accuracy only applies to propMS")
            if not (0.0 <= self.rel_accuracy < 1.0):
                raise ConfigurationError("rel_accuracy must lie in [0, 1)")

    def validate_against(self, population: Population) -> None:
        if self.kind == "propMS" and population.scores is None:
            raise ConfigurationError("propMS requires a population with scores")
        if self.kind == "oracle" and population.truth is None:
            raise ConfigurationError("oracle requires a population with true_f")


@dataclass(frozen=True)
class Distribution:
    """One step's sampling distribution over the remaining items.

    support: population indices with q > 0 (always the full remaining set).
    probs: matching probabilities, sum to 1 within 1e-12.
    z_lo, z_hi: attainable range of the importance-weighted observation.
    fallback: True when propMS/oracle degenerated to propM this step.
    """

    support: np.ndarray
    probs: np.ndarray
    z_lo: float
    z_hi: float
    fallback: bool = False

    def __post_init__(self):
        if self.support.size == 0:
            raise DegenerateDistributionError("no remaining items to sample")
        if self.probs.shape != self.support.shape:
            raise ValidationError("support and probs must have equal length")
        if np.any(self.probs <= 0.0):
            raise ValidationError("distribution support must match remaining set")
        if abs(float(self.probs.sum()) - 1.0) > 1e-12:
            raise ValidationError("sampling probabilities must sum to 1")
        if not (0.0 <= self.z_lo <= self.z_hi):
            raise ValidationError("payoff range must satisfy 0 <= z_lo <= z_hi")
        self.support.setflags(write=False)
        self.probs.setflags(write=False)

    def prob_of(self, index: int) -> float:
        pos = np.searchsorted(self.support, index)
        if pos >= self.support.size or self.support[pos] != index:
            raise ValidationError(f"index {index} is not drawable this step")
        return float(self.probs[pos])


def _normalized(raw: np.ndarray) -> np.ndarray:
    probs = raw / float(raw.sum())
    return probs / float(probs.sum())


def make_distribution(
    strategy: SamplingStrategy,
    population: Population,
    remaining: np.ndarray,
) -> Distribution:
    """Build the step distribution over `remaining` (sorted index array)."""
    remaining = np.asarray(remaining, dtype=int)
    if remaining.size == 0:
        raise DegenerateDistributionError("no remaining items to sample")
    weights = population.weights[remaining]
    kind = strategy.kind
    fallback = False

    if kind == "uniform":
        probs = np.full(remaining.size, 1.0 / remaining.size)
        probs = _normalized(probs)
    elif kind == "propM":
        probs = _normalized(weights)
    elif kind in ("propMS", "oracle"):
        side = population.scores if kind == "propMS" else population.truth
        if side is None:
            raise ConfigurationError(f"{kind} requires side data on the population")
        raw = weights * side[remaining]
        if float(raw.sum()) <= 0.0:
            # Every numerator vanished; sample proportional to weight instead.
            probs = _normalized(weights)
            fallback = True
        else:
            if np.any(raw <= 0.0):
                # Zero-score items would be unreachable, breaking the
                # support-equals-remaining invariant; mix in a weight floor.
                floor = weights * (float(raw[raw > 0.0].min()) / float(weights.sum()))
                raw = raw + floor * 1e-9
            probs = _normalized(raw)
    else:  # pragma: no cover - guarded by SamplingStrategy
        raise ConfigurationError(f"unknown strategy {kind!r}")

    z_hi = float(np.max(weights / probs))
    z_lo = 0.0
    if kind == "propMS" and not fallback and strategy.rel_accuracy is not None:
        a = strategy.rel_accuracy
        rem_scores = population.scores[remaining]
        s_w = float(np.dot(weights, rem_scores))
        # Accuracy band: truth in [score/(1+a), score/(1-a)], so the realized
        # observation (f/S)(I) * S_w stays within S_w/(1+-a). A zero score
        # pins its item's observation to 0, so the lower end opens to 0 then.
        z_lo = s_w / (1.0 + a) if float(rem_scores.min()) > 0.0 else 0.0
        z_hi = min(z_hi, s_w / (1.0 - a))
        z_lo = min(z_lo, z_hi)
    return Distribution(
        support=remaining.copy(),
        probs=probs,
        z_lo=z_lo,
        z_hi=z_hi,
        fallback=fallback,
    )


def draw_index(dist: Distribution, rng: np.random.Generator) -> int:
    """Sample one population index from the distribution.

    Consumes exactly one uniform variate, so replay from a serialized rng
    state is bit-identical.
    """
    u = float(rng.random())
    cum = np.cumsum(dist.probs)
    pos = int(np.searchsorted(cum, u, side="right"))
    if pos >= dist.support.size:  # u landed in the float gap above the last cum
        pos = dist.support.size - 1
    return int(dist.support[pos])
