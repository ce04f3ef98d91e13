"""Brute-force and closed-form references used as ground truth in tests.

These are deliberately simple and independent of the LP machinery; the
enumeration guard keeps them honest about their intended scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Allocation,
    FairnessParams,
    GroupPartition,
    InputError,
    ObjectiveKind,
    ProducerValues,
    RelevanceMatrix,
    objective_value_of,
)

ENUMERATION_GUARD = 10**7


def producer_fairness_baseline(m: int, n: int, k: int) -> int:
    """Maximum achievable minimum producer exposure: floor(m*k / n).

    Total exposure is exactly m*k, so no allocation can push the minimum
    column sum above floor(m*k/n); a cyclic assignment (consumer i takes
    producers (i*k + t) mod n for t < k, all distinct because k <= n)
    achieves column sums differing by at most one, which meets the bound.
    """
    if not 1 <= k <= n:
        raise InputError(f"need 1 <= k <= n, got k={k}, n={n}")
    if m < 1:
        raise InputError(f"need m >= 1, got {m}")
    return (m * k) // n


def gmv_max(values: ProducerValues, m: int, k: int) -> float:
    """Maximum value-weighted exposure over allocations with row sums k.

    Every consumer puts all k units on the k most valuable producers, so the
    maximum is m times the sum of the k largest values.
    """
    if k > values.n:
        raise InputError(f"k={k} exceeds producer count {values.n}")
    top = np.sort(values.values)[-k:]
    return float(m * top.sum())


@dataclass(frozen=True)
class OracleResult:
    best_allocation: Allocation | None
    best_objective: float
    enumerated_count: int
    feasible: bool
    infeasible_families: tuple[str, ...] = ()


def brute_force_solve(
    rho: RelevanceMatrix,
    params: FairnessParams,
    groups: GroupPartition | None = None,
    values: ProducerValues | None = None,
) -> OracleResult:
    """Exhaustive search over all per-consumer k-subsets.

    Feasibility applies the same constraint set as the solvers: exposure
    floor ceil(gamma * U*) per producer when gamma > 0, and value-weighted
    exposure >= theta * gmv_max when theta > 0.  For CVaR the threshold is
    optimized exactly over its breakpoints.  First optimum in lexicographic
    enumeration order wins ties.
    """
    m, n, k = rho.m, rho.n, params.k
    total = math.comb(n, k) ** m
    if total > ENUMERATION_GUARD:
        raise InputError(
            f"instance too large for enumeration: C({n},{k})^{m} = {total}"
        )
    if params.objective is ObjectiveKind.CVAR and groups is None:
        raise InputError("CVaR objective requires a group partition")

    floor = 0
    if params.gamma > 0.0:
        floor = math.ceil(params.gamma * producer_fairness_baseline(m, n, k) - 1e-12)
    gmv_floor = 0.0
    if params.theta > 0.0:
        if values is None:
            raise InputError("theta > 0 requires producer values")
        gmv_floor = params.theta * gmv_max(values, m, k)

    subsets = list(itertools.combinations(range(n), k))
    maximize = params.objective is not ObjectiveKind.CVAR
    best_obj = -np.inf if maximize else np.inf
    best_w = None
    count = 0
    floor_failed = gmv_failed = False

    weights = np.zeros((m, n))
    for choice in itertools.product(range(len(subsets)), repeat=m):
        count += 1
        weights[:] = 0.0
        for i, s in enumerate(choice):
            weights[i, subsets[s]] = 1.0
        if floor > 0 and weights.sum(axis=0).min() < floor:
            floor_failed = True
            continue
        if gmv_floor > 0.0 and values.values @ weights.sum(axis=0) < gmv_floor - 1e-9:
            gmv_failed = True
            continue
        obj = objective_value_of(rho.scores, weights, params, groups)
        if (maximize and obj > best_obj) or (not maximize and obj < best_obj):
            best_obj = obj
            best_w = weights.copy()

    if best_w is None:
        families = []
        if floor_failed:
            families.append("producer_floor")
        if gmv_failed:
            families.append("gmv")
        return OracleResult(None, np.nan, count, False, tuple(families))
    return OracleResult(Allocation(best_w), float(best_obj), count, True)
