"""Translate an allocation instance into a standard-form linear /
mixed-integer program shared by the exact and relaxed solvers.

Variable layout (column order):

* ``w[i, j]`` at index ``i * n + j`` -- the allocation weights, bounds
  [0, 1], binary when built with ``integrality="binary"``.
* objective auxiliaries after the weights:
  - max-min: one scalar ``t`` (the utility floor being maximized),
  - CVaR: threshold ``tau`` followed by one excess slack per group.

Row families (in build order):

* ``k_allocation``: one equality per consumer, row sum = k.
* ``maxmin_link`` / ``cvar_link``: objective linking inequalities.
* ``producer_floor``: column sum >= ceil(gamma * U*), included only when
  gamma > 0 and the floor is at least 1 (exposures of binary allocations
  are integers, so tightening to the ceiling loses no binary solutions and
  strengthens the relaxation; floor-0 rows are vacuous and omitted).
* ``gmv``: value-weighted exposure >= theta * max achievable, included only
  when theta > 0.

Consumers with an all-zero relevance row have utility pinned at 1.0; their
weight coefficients vanish and the constant moves into the objective offset
or the constraint right-hand side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .core import (
    FairnessParams,
    GroupPartition,
    InputError,
    ObjectiveKind,
    ProducerValues,
    RelevanceMatrix,
    UtilityNorm,
    topk_denominators,
)
from .oracle import gmv_max, producer_fairness_baseline

FAMILY_K = "k_allocation"
FAMILY_FLOOR = "producer_floor"
FAMILY_GMV = "gmv"
FAMILY_CVAR = "cvar_link"
FAMILY_MAXMIN = "maxmin_link"

# Order in which infeasibility is attributed when several families fail.
FAMILY_PRECEDENCE = (FAMILY_K, FAMILY_FLOOR, FAMILY_GMV, FAMILY_CVAR, FAMILY_MAXMIN)


@dataclass(frozen=True)
class ProblemInstance:
    """Everything a solver needs to set up and score an allocation problem."""

    rho: RelevanceMatrix
    params: FairnessParams
    groups: GroupPartition | None = None
    values: ProducerValues | None = None

    def __post_init__(self):
        if self.params.k > self.rho.n:
            raise InputError(f"k={self.params.k} exceeds producer count {self.rho.n}")
        if self.groups is not None and self.groups.m != self.rho.m:
            raise InputError("group partition does not match consumer count")
        if self.values is not None and self.values.n != self.rho.n:
            raise InputError("producer values do not match producer count")
        if self.params.theta > 0.0 and self.values is None:
            raise InputError("theta > 0 requires producer values")


@dataclass
class StandardProgram:
    """Sparse standard-form program: optimize c@x + offset subject to
    A x (=, >=, <=) rhs and lower <= x <= upper, with an integrality mask."""

    c: np.ndarray
    sense: str  # "min" | "max"
    offset: float
    A: sparse.csr_matrix
    row_ops: np.ndarray  # "E", "G", "L" per row
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integrality: np.ndarray
    families: list[str]
    instance: ProblemInstance
    producer_floor: int
    gmv_floor: float
    aux_names: list[str] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    @property
    def n_struct(self) -> int:
        return self.instance.rho.m * self.instance.rho.n

    def weights_of(self, x: np.ndarray) -> np.ndarray:
        return x[: self.n_struct].reshape(self.instance.rho.m, self.instance.rho.n)

    def var_name(self, idx: int) -> str:
        n = self.instance.rho.n
        if idx < self.n_struct:
            return f"w_{idx // n}_{idx % n}"
        return self.aux_names[idx - self.n_struct]

    def to_lp_text(self) -> str:
        """Dump in CPLEX LP interchange format (debugging aid)."""
        lines = ["Maximize" if self.sense == "max" else "Minimize"]
        lines.append(" obj: " + _lincomb(self.c, np.arange(self.n_vars), self.var_name))
        lines.append("Subject To")
        acsr = self.A.tocsr()
        op_text = {"E": "=", "G": ">=", "L": "<="}
        for r in range(self.n_rows):
            lo, hi = acsr.indptr[r], acsr.indptr[r + 1]
            expr = _lincomb(acsr.data[lo:hi], acsr.indices[lo:hi], self.var_name)
            lines.append(
                f" {self.families[r]}_{r}: {expr} {op_text[self.row_ops[r]]} {self.rhs[r]:.17g}"
            )
        lines.append("Bounds")
        for v in range(self.n_vars):
            up = "+inf" if np.isinf(self.upper[v]) else f"{self.upper[v]:.17g}"
            lines.append(f" {self.lower[v]:.17g} <= {self.var_name(v)} <= {up}")
        binaries = [self.var_name(v) for v in np.flatnonzero(self.integrality)]
        if binaries:
            lines.append("Binaries")
            lines.append(" " + " ".join(binaries))
        lines.append("End")
        return "\n".join(lines) + "\n"


def _lincomb(coefs, idxs, name) -> str:
    terms = []
    for c, v in zip(coefs, idxs):
        if c == 0.0:
            continue
        sign = "- " if c < 0 else ("+ " if terms else "")
        terms.append(f"{sign}{abs(c):.17g} {name(int(v))}")
    return " ".join(terms) if terms else "0 " + name(0)


def build(instance: ProblemInstance, integrality: str = "binary") -> StandardProgram:
    """Build the program for the configured objective and constraints.

    ``integrality`` is "binary" or "relaxed"; the two builds differ only in
    the integrality mask.
    """
    if integrality not in ("binary", "relaxed"):
        raise InputError(f"unknown integrality {integrality!r}")
    rho = instance.rho.scores
    m, n = rho.shape
    params = instance.params
    k = params.k
    kind = params.objective
    if kind is ObjectiveKind.CVAR and instance.groups is None:
        raise InputError("CVaR objective requires a group partition")

    n_struct = m * n
    aux_names: list[str] = []
    if kind is ObjectiveKind.MAX_MIN:
        aux_names = ["t"]
    elif kind is ObjectiveKind.CVAR:
        aux_names = ["tau"] + [f"s_{g}" for g in range(instance.groups.group_count)]
    n_vars = n_struct + len(aux_names)

    # Per-consumer normalized relevance; zero rows contribute constants.
    if kind is ObjectiveKind.MAX_MIN:
        denom = rho.max(axis=1)
    else:
        denom = topk_denominators(rho, k)
    nz = denom > 0.0
    ratio = np.zeros_like(rho)
    ratio[nz] = rho[nz] / denom[nz, None]

    rows_i: list[np.ndarray] = []
    rows_j: list[np.ndarray] = []
    rows_v: list[np.ndarray] = []
    row_ops: list[str] = []
    rhs: list[float] = []
    families: list[str] = []
    struct_cols = np.arange(n_struct).reshape(m, n)

    def add_row(cols, vals, op, b, family):
        r = len(rhs)
        rows_i.append(np.full(len(cols), r))
        rows_j.append(np.asarray(cols, dtype=np.int64))
        rows_v.append(np.asarray(vals, dtype=np.float64))
        row_ops.append(op)
        rhs.append(float(b))
        families.append(family)

    for i in range(m):
        add_row(struct_cols[i], np.ones(n), "E", k, FAMILY_K)

    c = np.zeros(n_vars)
    offset = 0.0
    sense = "max"
    if kind is ObjectiveKind.MEAN:
        c[:n_struct] = (ratio / m).ravel()
        offset = float(np.count_nonzero(~nz)) / m
    elif kind is ObjectiveKind.MAX_MIN:
        t_col = n_struct
        c[t_col] = 1.0
        for i in range(m):
            if nz[i]:
                add_row(
                    np.append(struct_cols[i], t_col),
                    np.append(ratio[i], -1.0),
                    "G",
                    0.0,
                    FAMILY_MAXMIN,
                )
            else:
                add_row([t_col], [-1.0], "G", -1.0, FAMILY_MAXMIN)
    else:  # CVaR
        sense = "min"
        groups = instance.groups
        G = groups.group_count
        tau_col = n_struct
        coef = 1.0 / ((1.0 - params.alpha) * G)
        c[tau_col] = 1.0
        c[tau_col + 1 : tau_col + 1 + G] = coef
        sizes = groups.sizes
        for g in range(G):
            members = np.flatnonzero(groups.labels == g)
            live = members[nz[members]]
            cols = struct_cols[live].ravel()
            vals = (ratio[live] / sizes[g]).ravel()
            cols = np.concatenate([cols, [tau_col, tau_col + 1 + g]])
            vals = np.concatenate([vals, [1.0, 1.0]])
            b = float(live.size) / sizes[g]  # zero-relevance members lose nothing
            add_row(cols, vals, "G", b, FAMILY_CVAR)

    producer_floor = 0
    if params.gamma > 0.0:
        baseline = producer_fairness_baseline(m, n, k)
        producer_floor = math.ceil(params.gamma * baseline - 1e-12)
        if producer_floor >= 1:
            for j in range(n):
                add_row(struct_cols[:, j], np.ones(m), "G", producer_floor, FAMILY_FLOOR)

    gmv_floor = 0.0
    if params.theta > 0.0:
        gmv_floor = params.theta * gmv_max(instance.values, m, k)
        vals = np.repeat(instance.values.values[None, :], m, axis=0).ravel()
        add_row(struct_cols.ravel(), vals, "G", gmv_floor, FAMILY_GMV)

    A = sparse.coo_matrix(
        (
            np.concatenate(rows_v),
            (np.concatenate(rows_i), np.concatenate(rows_j)),
        ),
        shape=(len(rhs), n_vars),
    ).tocsr()

    lower = np.zeros(n_vars)
    upper = np.ones(n_vars)
    if kind is ObjectiveKind.MAX_MIN:
        upper[n_struct] = float(k)  # single-max utility of a k-list is at most k
    elif kind is ObjectiveKind.CVAR:
        upper[n_struct:] = 1.0  # losses lie in [0, 1], so tau and slacks do too
    mask = np.zeros(n_vars, dtype=bool)
    if integrality == "binary":
        mask[:n_struct] = True

    return StandardProgram(
        c=c,
        sense=sense,
        offset=offset,
        A=A,
        row_ops=np.array(row_ops, dtype="<U1"),
        rhs=np.array(rhs),
        lower=lower,
        upper=upper,
        integrality=mask,
        families=families,
        instance=instance,
        producer_floor=producer_floor,
        gmv_floor=gmv_floor,
        aux_names=aux_names,
    )
