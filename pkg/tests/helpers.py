"""Shared test utilities: small populations, exhaustive path enumeration,
and independently coded closed-form oracles."""

from __future__ import annotations

import copy
import math

import numpy as np

from auditcs.martingale import (
    NullGrid,
    StepContext,
    compute_payoff,
    control_variate_values,
    update_wealth,
)
from auditcs.population import Population, population_from_arrays
from auditcs.sampling import SamplingStrategy, make_distribution


def pop3() -> Population:
    """The 3-item population with weights (0.5, 0.3, 0.2) and mean 0.22."""
    return population_from_arrays(
        reported=np.array([5.0, 3.0, 2.0]),
        truth=np.array([0.2, 0.4, 0.0]),
        scores=np.array([0.3, 0.8, 0.5]),
    )


def step_context_for(population, dist, remaining, use_cv):
    """Mirror of the engine's per-draw context construction."""
    if use_cv and population.scores is not None:
        u_vec = control_variate_values(dist, population.scores)
        u_lo, u_hi = float(u_vec.min()), float(u_vec.max())
    else:
        u_vec = np.zeros(dist.support.size)
        u_lo = u_hi = 0.0
    ctx = StepContext(
        z_lo=dist.z_lo,
        z_hi=dist.z_hi,
        remaining_weight=float(population.weights[remaining].sum()),
        u_lo=u_lo,
        u_hi=u_hi,
    )
    return ctx, u_vec


def enumerate_wealth_expectations(
    population: Population,
    strategy: SamplingStrategy,
    use_cv: bool,
    m_null: float,
) -> dict:
    """E[W_t(m_null)] for every t, by exhaustive path enumeration.

    Wealth updates run through the production grid code; the probability
    bookkeeping here is independent of it.
    """
    expectations: dict = {}

    def recurse(remaining: np.ndarray, grid: NullGrid, prob: float, t: int):
        if remaining.size == 0:
            return
        dist = make_distribution(strategy, population, remaining)
        ctx, u_vec = step_context_for(population, dist, remaining, use_cv)
        for pos, idx in enumerate(dist.support):
            branch = copy.deepcopy(grid)
            obs = compute_payoff(
                step=t,
                index=int(idx),
                f_obs=float(population.truth[idx]),
                q_prob=float(dist.probs[pos]),
                weight=float(population.weights[idx]),
                u=float(u_vec[pos]),
            )
            update_wealth(branch, ctx, obs)
            p_path = prob * float(dist.probs[pos])
            wealth = math.exp(float(branch.log_wealth[0]))
            expectations[t] = expectations.get(t, 0.0) + p_path * wealth
            recurse(remaining[remaining != idx], branch, p_path, t + 1)

    grid0 = NullGrid(np.array([m_null]), use_cv=use_cv)
    recurse(np.arange(population.n), grid0, 1.0, 1)
    return expectations


def wsr_interval(xs, lambdas, n_items: int, delta: float):
    """Uniform-sampling without-replacement interval, coded directly from the
    classical formulas: center sum(lam_i*(X_i + prefix/(N-i+1))) over
    sum(lam_i*N/(N-i+1)), radius (log(2/delta) + sum(lam_i^2/8)) over the
    same denominator. Clipped to [0, 1]."""
    num = 0.0
    den = 0.0
    psi_sum = 0.0
    prefix = 0.0
    for i, (x, lam) in enumerate(zip(xs, lambdas), start=1):
        num += lam * (x + prefix / (n_items - i + 1))
        den += lam * n_items / (n_items - i + 1)
        psi_sum += lam * lam / 8.0
        prefix += x
    if den <= 0.0:
        return 0.0, 1.0
    center = num / den
    radius = (math.log(2.0 / delta) + psi_sum) / den
    return max(0.0, center - radius), min(1.0, center + radius)
