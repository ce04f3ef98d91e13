"""Pure-numpy implementation of the simplex pivot kernel.

This is the import-time fallback for the compiled extension in
``_kernels.pyx``; both expose ``run_pivots`` with identical semantics
(same pivot rules, same deterministic tie-breaks).  The driver in
``simplex.py`` owns everything around the loop: phase setup,
refactorization, and termination handling.

State arrays (modified in place):

* ``vstat``  int8 per column: 0 nonbasic at lower, 1 nonbasic at upper,
  2 basic.
* ``basis``  int32 per row: which column is basic in that row.
* ``xB``     float per row: value of the basic variable.
* ``Binv``   dense basis inverse, row-major.

Pivot rules (minimization): Dantzig pricing (most negative reduced cost at
lower / most positive at upper, ties to lowest column index), switching to
Bland's rule (lowest eligible index) while the run of consecutive
degenerate steps exceeds ``bland_threshold``.  Ratio ties within 1e-12 go
to the candidate whose basic variable has the lowest index.  A bound flip
is taken when strictly cheaper than every basic ratio.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

STATUS_OPTIMAL = 0
STATUS_BUDGET = 1
STATUS_UNBOUNDED = 2

_RATIO_TIE = 1e-12
_DEGEN_STEP = 1e-12


def run_pivots(
    indptr: np.ndarray,
    indices: np.ndarray,
    data: np.ndarray,
    cvec: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    vstat: np.ndarray,
    basis: np.ndarray,
    xB: np.ndarray,
    Binv: np.ndarray,
    max_pivots: int,
    tol: float,
    pivot_tol: float,
    degen_count: int,
    bland_threshold: int,
) -> tuple[int, int, int]:
    """Run up to ``max_pivots`` simplex pivots; returns (status, pivots, degen)."""
    n_rows = basis.size
    n_cols = cvec.size
    A = sparse.csc_matrix((data, indices, indptr), shape=(n_rows, n_cols))
    fixed = lower == upper
    lower_b = np.where(np.isfinite(lower), lower, 0.0)  # finite lowers required

    pivots = 0
    while pivots < max_pivots:
        y = cvec[basis] @ Binv
        d = cvec - (y @ A)
        at_lower = (vstat == 0) & ~fixed
        at_upper = (vstat == 1) & ~fixed
        eligible = (at_lower & (d < -tol)) | (at_upper & (d > tol))
        if not eligible.any():
            return STATUS_OPTIMAL, pivots, degen_count

        if degen_count > bland_threshold:
            q = int(np.argmax(eligible))  # first eligible index
        else:
            score = np.where(eligible, np.abs(d), -1.0)
            q = int(np.argmax(score))  # ties resolve to lowest index

        lo, hi = indptr[q], indptr[q + 1]
        u = Binv[:, indices[lo:hi]] @ data[lo:hi]
        dirn = 1.0 if vstat[q] == 0 else -1.0
        du = dirn * u

        caps = np.full(n_rows, np.inf)
        pos = du > pivot_tol
        if pos.any():
            caps[pos] = (xB[pos] - lower_b[basis[pos]]) / du[pos]
        neg = du < -pivot_tol
        if neg.any():
            caps[neg] = (xB[neg] - upper[basis[neg]]) / du[neg]
        np.maximum(caps, 0.0, out=caps)
        t_row = caps.min() if n_rows else np.inf
        t_flip = upper[q] - lower[q]

        if t_flip < t_row - _RATIO_TIE:
            # entering variable reaches its opposite bound first: bound flip
            xB -= t_flip * du
            vstat[q] = 1 - vstat[q]
            degen_count = 0
            pivots += 1
            continue
        if not np.isfinite(t_row):
            return STATUS_UNBOUNDED, pivots, degen_count

        cand = np.flatnonzero(caps <= t_row + _RATIO_TIE)
        leave = int(cand[np.argmin(basis[cand])])
        t = t_row
        leaving_var = int(basis[leave])
        xB -= t * du
        if lower[leaving_var] == upper[leaving_var] or du[leave] > 0:
            vstat[leaving_var] = 0
        else:
            vstat[leaving_var] = 1
        vstat[q] = 2
        basis[leave] = q
        xB[leave] = (lower[q] + t) if dirn > 0 else (upper[q] - t)

        piv = u[leave]
        r = Binv[leave] / piv
        Binv -= np.outer(u, r)
        Binv[leave] = r

        degen_count = degen_count + 1 if t <= _DEGEN_STEP else 0
        pivots += 1

    return STATUS_BUDGET, pivots, degen_count
