"""Domain types and the utility / loss / constraint metrics shared by every
solver and by the market simulator.

All operations here are pure functions on immutable inputs, so they are safe
to call from concurrent sweep workers.

Conventions fixed across the package:

* Consumer utility is the allocated relevance divided by the best achievable
  relevance.  The default denominator is the sum of the k largest relevance
  entries of the row ("top-k" normalization); "single-max" normalization
  (divide by the row maximum) is kept as a mode because the max-min objective
  is defined with it.  A consumer whose relevance row is all zeros cannot be
  served better or worse, so its utility is defined as 1.0.
* Group utility variance is the population variance (groups are the whole
  population, not a sample).
* Violation counting rounds fractional row/column sums to the nearest
  integer first (tolerance 1e-6) and then compares against the integer
  targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

BINARY_TOL = 1e-9


class InputError(ValueError):
    """Invalid argument shapes, ranges, or combinations."""


class Infeasible(Exception):
    """No allocation satisfies the configured hard constraints."""

    def __init__(self, families: list[str], message: str | None = None):
        self.families = list(families)
        super().__init__(message or f"infeasible: {', '.join(self.families) or 'unknown'}")


class NumericalError(Exception):
    """A solver failed numerically; diagnostics attached where available."""

    def __init__(self, message: str, trace=None):
        self.trace = trace
        super().__init__(message)


class ObjectiveKind(str, Enum):
    MAX_MIN = "maxmin"
    MEAN = "mean"
    CVAR = "cvar"


class UtilityNorm(str, Enum):
    TOP_K = "topk"
    SINGLE_MAX = "singlemax"


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise InputError(f"{name} must be a nonempty 2-d array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class RelevanceMatrix:
    """Dense consumer x producer relevance scores in [0, 1]."""

    scores: np.ndarray

    def __post_init__(self):
        scores = _as_matrix(self.scores, "relevance")
        if np.min(scores) < 0.0 or np.max(scores) > 1.0:
            i, j = np.unravel_index(
                int(np.argmax((scores < 0) | (scores > 1))), scores.shape
            )
            raise InputError(
                f"relevance entry out of [0, 1] at ({i}, {j}): {scores[i, j]!r}"
            )
        object.__setattr__(self, "scores", scores)

    @property
    def m(self) -> int:
        return self.scores.shape[0]

    @property
    def n(self) -> int:
        return self.scores.shape[1]


@dataclass(frozen=True)
class Allocation:
    """Consumer x producer allocation weights in [0, 1].

    Fractional while solving, binary after rounding; ``binary_flag`` is
    derived (every entry within 1e-9 of 0 or 1).
    """

    weights: np.ndarray
    binary_flag: bool = field(init=False)

    def __post_init__(self):
        w = _as_matrix(self.weights, "allocation")
        if np.min(w) < -BINARY_TOL or np.max(w) > 1.0 + BINARY_TOL:
            raise InputError("allocation weights must lie in [0, 1]")
        w = np.clip(w, 0.0, 1.0)
        object.__setattr__(self, "weights", w)
        binary = bool(np.all(np.minimum(w, 1.0 - w) <= BINARY_TOL))
        object.__setattr__(self, "binary_flag", binary)

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return self.weights.shape[1]

    @staticmethod
    def from_selection(selected: np.ndarray, n: int) -> "Allocation":
        """Build a binary allocation from per-consumer producer index lists."""
        sel = np.asarray(selected, dtype=np.int64)
        w = np.zeros((sel.shape[0], n))
        for i in range(sel.shape[0]):
            w[i, sel[i]] = 1.0
        return Allocation(w)


@dataclass(frozen=True)
class GroupPartition:
    """Partition of the m consumers into contiguous integer-labelled groups."""

    labels: np.ndarray
    group_count: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise InputError("group labels must be a nonempty 1-d array")
        if labels.min() < 0 or labels.max() >= self.group_count:
            raise InputError("group labels must lie in [0, group_count)")
        sizes = np.bincount(labels, minlength=self.group_count)
        if np.any(sizes == 0):
            raise InputError(f"empty group(s): {np.flatnonzero(sizes == 0).tolist()}")
        object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return self.labels.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.group_count)

    @staticmethod
    def single(m: int) -> "GroupPartition":
        return GroupPartition(np.zeros(m, dtype=np.int64), 1)

    @staticmethod
    def identity(m: int) -> "GroupPartition":
        return GroupPartition(np.arange(m, dtype=np.int64), m)


@dataclass(frozen=True)
class ProducerValues:
    """Per-producer value v_j >= 0 (price/margin units); not all zero."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise InputError("producer values must be a nonempty 1-d array")
        if np.min(v) < 0:
            raise InputError(f"negative producer value at {int(np.argmin(v))}")
        if not np.any(v > 0):
            raise InputError("at least one producer value must be positive")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class FairnessParams:
    """Problem knobs: list length k, producer fairness level gamma in [0, 1],
    CVaR level alpha in [0, 1), GMV threshold theta in [0, 1], and the
    objective to optimize."""

    k: int
    gamma: float = 0.0
    alpha: float = 0.0
    theta: float = 0.0
    objective: ObjectiveKind = ObjectiveKind.MEAN

    def __post_init__(self):
        if self.k < 1:
            raise InputError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.gamma <= 1.0:
            raise InputError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 <= self.alpha < 1.0:
            raise InputError(f"alpha must be in [0, 1), got {self.alpha}")
        if not 0.0 <= self.theta <= 1.0:
            raise InputError(f"theta must be in [0, 1], got {self.theta}")
        object.__setattr__(self, "objective", ObjectiveKind(self.objective))


@dataclass(frozen=True)
class ViolationReport:
    under_alloc_pct: float
    over_alloc_pct: float
    producer_violation_pct: float
    gmv_violation: bool
    gmv_shortfall: float

    def all_zero(self) -> bool:
        return (
            self.under_alloc_pct == 0.0
            and self.over_alloc_pct == 0.0
            and self.producer_violation_pct == 0.0
            and not self.gmv_violation
        )


@dataclass(frozen=True)
class SolveResult:
    allocation: Allocation
    objective_value: float
    consumer_utilities: np.ndarray
    group_utilities: np.ndarray
    group_variance: float
    violations: ViolationReport
    stats: dict


# ---------------------------------------------------------------------------
# metrics


def topk_denominators(scores: np.ndarray, k: int) -> np.ndarray:
    """Per-row sum of the k largest relevance entries."""
    m, n = scores.shape
    if k > n:
        raise InputError(f"k={k} exceeds producer count {n}")
    if k == n:
        return scores.sum(axis=1)
    part = np.partition(scores, n - k, axis=1)[:, n - k :]
    return part.sum(axis=1)


def consumer_utility(
    rho_row: np.ndarray,
    w_row: np.ndarray,
    k: int,
    norm: UtilityNorm = UtilityNorm.TOP_K,
) -> float:
    """Allocated relevance of one consumer over its best achievable relevance."""
    rho_row = np.asarray(rho_row, dtype=np.float64)
    w_row = np.asarray(w_row, dtype=np.float64)
    if rho_row.shape != w_row.shape or rho_row.ndim != 1:
        raise InputError("relevance row and weight row must be 1-d and equal length")
    if k > rho_row.size:
        raise InputError(f"k={k} exceeds producer count {rho_row.size}")
    if UtilityNorm(norm) is UtilityNorm.TOP_K:
        denom = float(np.sort(rho_row)[-k:].sum())
    else:
        denom = float(rho_row.max())
    if denom == 0.0:
        return 1.0
    return float(rho_row @ w_row) / denom


def consumer_utilities(
    rho: np.ndarray,
    weights: np.ndarray,
    k: int,
    norm: UtilityNorm = UtilityNorm.TOP_K,
) -> np.ndarray:
    """Vectorized :func:`consumer_utility` over all consumers."""
    rho = np.asarray(rho, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if rho.shape != weights.shape:
        raise InputError(
            f"shape mismatch: relevance {rho.shape} vs allocation {weights.shape}"
        )
    if UtilityNorm(norm) is UtilityNorm.TOP_K:
        denom = topk_denominators(rho, k)
    else:
        denom = rho.max(axis=1)
    num = np.einsum("ij,ij->i", rho, weights)
    out = np.ones(rho.shape[0])
    nz = denom > 0
    out[nz] = num[nz] / denom[nz]
    return out


def producer_exposures(weights: np.ndarray) -> np.ndarray:
    """Column sums: total exposure each producer receives."""
    return np.asarray(weights, dtype=np.float64).sum(axis=0)


def group_losses(
    rho: np.ndarray, weights: np.ndarray, groups: GroupPartition, k: int
) -> np.ndarray:
    """Mean relevance loss (1 - utility, top-k normalization) per group."""
    utils = consumer_utilities(rho, weights, k, UtilityNorm.TOP_K)
    if groups.m != utils.size:
        raise InputError("group partition does not match consumer count")
    sums = np.bincount(groups.labels, weights=1.0 - utils, minlength=groups.group_count)
    return sums / groups.sizes


def group_mean_utilities(
    rho: np.ndarray, weights: np.ndarray, groups: GroupPartition, k: int
) -> np.ndarray:
    utils = consumer_utilities(rho, weights, k, UtilityNorm.TOP_K)
    sums = np.bincount(groups.labels, weights=utils, minlength=groups.group_count)
    return sums / groups.sizes


def cvar_value(losses: np.ndarray, tau: float, alpha: float) -> float:
    """tau + mean excess over tau rescaled by 1/(1 - alpha).

    This is the superquantile objective evaluated at a fixed threshold tau;
    minimizing it over tau >= 0 yields the CVaR of the loss distribution.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if not np.all(np.isfinite(losses)):
        raise InputError("losses must be finite")
    if alpha >= 1.0:
        raise InputError(f"alpha must be < 1, got {alpha}")
    excess = np.maximum(losses - tau, 0.0)
    return float(tau + excess.sum() / ((1.0 - alpha) * losses.size))


def cvar_minimized(losses: np.ndarray, alpha: float) -> tuple[float, float]:
    """Exact min over tau >= 0 of :func:`cvar_value` and the minimizing tau.

    The objective is convex piecewise-linear in tau, so the minimum is
    attained at a breakpoint: tau = 0 or one of the loss values.
    """
    losses = np.asarray(losses, dtype=np.float64)
    candidates = np.concatenate(([0.0], np.maximum(losses, 0.0)))
    best_tau, best = 0.0, np.inf
    for tau in candidates:
        v = cvar_value(losses, float(tau), alpha)
        if v < best - 1e-15:
            best, best_tau = v, float(tau)
    return best, best_tau


def gmv_of_allocation(weights: np.ndarray, values: ProducerValues) -> float:
    """Value-weighted total exposure of the allocation."""
    exposures = producer_exposures(weights)
    if exposures.size != values.n:
        raise InputError("producer values do not match allocation width")
    return float(values.values @ exposures)


def group_utility_variance(group_utilities: np.ndarray) -> float:
    """Population variance of the per-group mean utilities."""
    gu = np.asarray(group_utilities, dtype=np.float64)
    if gu.size == 0:
        raise InputError("need at least one group")
    return float(np.mean((gu - gu.mean()) ** 2))


def violation_report(
    weights: np.ndarray,
    k: int,
    producer_floor: int = 0,
    gmv_floor: float = 0.0,
    values: ProducerValues | None = None,
) -> ViolationReport:
    """Count allocation-constraint violations (Table-style reporting).

    Fractional inputs are rounded to nearest-integer row/column sums before
    counting so that e.g. a row summing to k - 1e-9 is not flagged.
    """
    w = np.asarray(weights, dtype=np.float64)
    m, n = w.shape
    row_sums = np.floor(w.sum(axis=1) + 0.5)
    under = float(np.count_nonzero(row_sums < k)) / m * 100.0
    over = float(np.count_nonzero(row_sums > k)) / m * 100.0
    col_sums = np.floor(w.sum(axis=0) + 0.5)
    prod = float(np.count_nonzero(col_sums < producer_floor)) / n * 100.0
    gmv_violation, shortfall = False, 0.0
    if gmv_floor > 0.0:
        if values is None:
            raise InputError("gmv_floor requires producer values")
        gmv = gmv_of_allocation(w, values)
        if gmv < gmv_floor - 1e-9:
            gmv_violation, shortfall = True, float(gmv_floor - gmv)
    return ViolationReport(under, over, prod, gmv_violation, shortfall)


def objective_value_of(
    rho: np.ndarray,
    weights: np.ndarray,
    params: FairnessParams,
    groups: GroupPartition | None = None,
    norm_override: UtilityNorm | None = None,
) -> float:
    """Value of the configured objective for a given allocation.

    Shared by the brute-force oracle, the branch-and-bound incumbent check,
    and the reporting layer so that every code path scores allocations
    identically.  Max-min uses single-max normalization, mean and CVaR use
    top-k, unless overridden.
    """
    kind = params.objective
    if kind is ObjectiveKind.MEAN:
        norm = norm_override or UtilityNorm.TOP_K
        return float(consumer_utilities(rho, weights, params.k, norm).mean())
    if kind is ObjectiveKind.MAX_MIN:
        norm = norm_override or UtilityNorm.SINGLE_MAX
        return float(consumer_utilities(rho, weights, params.k, norm).min())
    if groups is None:
        raise InputError("CVaR objective requires a group partition")
    losses = group_losses(rho, weights, groups, params.k)
    value, _ = cvar_minimized(losses, params.alpha)
    return value


def build_solve_result(
    rho: np.ndarray,
    allocation: Allocation,
    params: FairnessParams,
    groups: GroupPartition | None,
    values: ProducerValues | None,
    producer_floor: int,
    gmv_floor: float,
    objective_value: float,
    stats: dict,
) -> SolveResult:
    """Assemble the standard result record from a final allocation."""
    groups = groups or GroupPartition.single(rho.shape[0])
    utils = consumer_utilities(rho, allocation.weights, params.k, UtilityNorm.TOP_K)
    gu = group_mean_utilities(rho, allocation.weights, groups, params.k)
    return SolveResult(
        allocation=allocation,
        objective_value=objective_value,
        consumer_utilities=utils,
        group_utilities=gu,
        group_variance=group_utility_variance(gu),
        violations=violation_report(
            allocation.weights, params.k, producer_floor, gmv_floor, values
        ),
        stats=stats,
    )
