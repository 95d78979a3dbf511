"""Quadratic-form matrices behind the discrete energy laws.

The time-stepping inequalities reduce to positive definiteness of a few
structured matrices assembled from L1 weights.  This module builds them,
checks the sufficient sign/monotonicity conditions (P1-P3) that guarantee a
positive lower-triangular Cholesky factor (Q1-Q2), and cross-checks
positive definiteness with a dense eigenvalue oracle.

Condition glossary for a symmetric matrix S with positive entries:

* P1: columns decrease downward, S[i-1, j] >= S[i, j] for j < i;
* P2: rows increase up to the diagonal, S[i, j-1] < S[i, j] for j <= i
  (strict);
* P3: cross differences are monotone,
  S[i-1, j-1] - S[i, j-1] <= S[i-1, j] - S[i, j] for 1 < j < i.

If P1-P3 hold, S = L L^T exists with L entrywise positive (Q1) and
column-decreasing (Q2).  All indices in reports are 1-based.

Uniform-mesh matrices are assembled with dt = 1: the conjugated forms are
step-size independent, and the remaining families only pick up a positive
overall scale, which none of the checks are sensitive to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    TimeMesh,
    l1_half_weights_nonuniform,
    l1_half_weights_uniform,
    l1_weights_nonuniform,
    l1_weights_uniform,
)

MAX_DENSE_N = 2000


def _check_size(n: int) -> None:
    if n < 1:
        raise ValueError(f"matrix order must be at least 1, got {n}")
    if n > MAX_DENSE_N:
        raise ValueError(f"matrix order {n} exceeds dense cap {MAX_DENSE_N}")


def _require_symmetric(mat: np.ndarray, rel: float = 1e-13) -> np.ndarray:
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    scale = float(np.abs(m).max()) or 1.0
    if float(np.abs(m - m.T).max()) > rel * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def pd_oracle(mat, rel_tol: float = 1e-12) -> tuple[bool, float]:
    """Smallest eigenvalue of a symmetric matrix and a PD verdict.

    The verdict is ``min_eig > rel_tol * ||M||_2``, with the spectral norm
    taken from the same eigendecomposition.
    """
    m = _require_symmetric(mat)
    eigs = np.linalg.eigvalsh(m)
    min_eig = float(eigs[0])
    norm = float(np.abs(eigs).max())
    return min_eig > rel_tol * norm, min_eig


@dataclass
class CholeskyReport:
    """Outcome of the structured positive-definiteness check."""

    p1: bool
    p2: bool
    p3: bool
    p1_violation: tuple[int, int] | None
    p2_violation: tuple[int, int] | None
    p3_violation: tuple[int, int] | None
    p2_equalities: list[tuple[int, int]] = field(default_factory=list)
    factor: np.ndarray | None = None
    q1: bool | None = None
    q2: bool | None = None
    q1_violation: tuple[int, int] | None = None
    q2_violation: tuple[int, int] | None = None
    min_eig: float = math.nan

    @property
    def conditions_hold(self) -> bool:
        return self.p1 and self.p2 and self.p3

    @property
    def passed(self) -> bool:
        return bool(self.conditions_hold and self.q1 and self.q2)


def _first_violation(bad: np.ndarray) -> tuple[int, int] | None:
    idx = np.argwhere(bad)
    if idx.size == 0:
        return None
    i, j = idx[0]
    return int(i) + 1, int(j) + 1


def check_special_cholesky(mat, rel_tol: float = 0.0) -> CholeskyReport:
    """Check P1-P3 on a symmetric positive matrix; factor and check Q1-Q2.

    ``rel_tol`` adds a slack of ``rel_tol * max|S|`` to every comparison so
    that entries computed in floating point do not produce false negatives;
    pass 0 for exact data.  Rows where the strict condition P2 holds only
    with equality (within the slack) are reported in ``p2_equalities``
    rather than silently resolved either way.
    """
    s = _require_symmetric(mat)
    if not np.all(s > 0.0):
        raise ValueError("matrix entries must be strictly positive")
    n = s.shape[0]
    slack = rel_tol * float(np.abs(s).max())
    i_idx, j_idx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")

    below = j_idx < i_idx
    drop = s[np.maximum(i_idx - 1, 0), j_idx] - s  # S[i-1,j] - S[i,j]
    p1_bad = below & (drop < -slack)

    row_region = (j_idx >= 1) & (j_idx <= i_idx)
    rise = s - s[i_idx, np.maximum(j_idx - 1, 0)]  # S[i,j] - S[i,j-1]
    p2_bad = row_region & (rise < -slack)
    p2_eq = row_region & ~p2_bad & (rise <= slack)

    p3_region = (j_idx >= 1) & (j_idx < i_idx)
    left = s[np.maximum(i_idx - 1, 0), np.maximum(j_idx - 1, 0)] - s[i_idx, np.maximum(j_idx - 1, 0)]
    right = s[np.maximum(i_idx - 1, 0), j_idx] - s
    p3_bad = p3_region & (left - right > slack)

    report = CholeskyReport(
        p1=not p1_bad.any(),
        p2=not p2_bad.any(),
        p3=not p3_bad.any(),
        p1_violation=_first_violation(p1_bad),
        p2_violation=_first_violation(p2_bad),
        p3_violation=_first_violation(p3_bad),
        p2_equalities=[(int(i) + 1, int(j) + 1) for i, j in np.argwhere(p2_eq)],
        min_eig=float(np.linalg.eigvalsh(s)[0]),
    )
    if not report.conditions_hold:
        return report

    try:
        factor = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        # P1-P3 guarantee positive definiteness; reaching this branch means
        # the input is numerically degenerate and callers should treat the
        # report as a failure.
        report.q1 = report.q2 = False
        return report

    report.factor = factor
    lower = j_idx <= i_idx
    q1_bad = lower & (factor <= 0.0)
    q2_bad = below & (factor[np.maximum(i_idx - 1, 0), j_idx] - factor < -slack)
    report.q1 = not q1_bad.any()
    report.q2 = not q2_bad.any()
    report.q1_violation = _first_violation(q1_bad)
    report.q2_violation = _first_violation(q2_bad)
    return report


def _lower_toeplitz(col: np.ndarray) -> np.ndarray:
    n = col.size
    idx = np.subtract.outer(np.arange(n), np.arange(n))
    return np.where(idx >= 0, col[np.clip(idx, 0, n - 1)], 0.0)


def conjugate_by_antidiagonal(mat: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Return P M P^T for the anti-diagonal P with P[i, n-1-i] = 1/scale[i]."""
    m = np.asarray(mat, dtype=float)
    w = np.asarray(scale, dtype=float)
    if w.ndim != 1 or w.size != m.shape[0]:
        raise ValueError("scale vector must match the matrix order")
    return m[::-1, ::-1] / np.outer(w, w)


def frac_law_raw_matrix(n: int, alpha: float) -> np.ndarray:
    """Lag-weighted product matrix whose symmetric part drives the
    fractional energy law: diag(b_{n-1}..b_0) times the lower-triangular
    Toeplitz matrix of b."""
    _check_size(n)
    b = l1_weights_uniform(alpha, 1.0, n).values
    return b[::-1, None] * _lower_toeplitz(b)


def build_frac_law_matrix(n: int, alpha: float) -> np.ndarray:
    """Anti-diagonal conjugation of the symmetrized fractional-law matrix.

    Entries take the explicit ratio form 2 b_0 / b_i on the diagonal and
    b_|i-j| / b_max(i,j) off it, which is what the P1-P3 checks certify.
    """
    _check_size(n)
    b = l1_weights_uniform(alpha, 1.0, n).values
    ar = np.arange(n)
    s = b[np.abs(np.subtract.outer(ar, ar))] / b[np.maximum.outer(ar, ar)]
    np.fill_diagonal(s, 2.0 * b[0] / b)
    return s


def weighted_law_raw_matrix(n: int, alpha: float) -> np.ndarray:
    """As ``frac_law_raw_matrix`` with an extra k^alpha diagonal weighting."""
    _check_size(n)
    b = l1_weights_uniform(alpha, 1.0, n).values
    k = np.arange(1, n + 1, dtype=float)
    return (k**alpha * b[::-1])[:, None] * _lower_toeplitz(b)


def build_weighted_law_matrix(n: int, alpha: float) -> np.ndarray:
    """Conjugated symmetric form of the weighted-law matrix."""
    _check_size(n)
    b = l1_weights_uniform(alpha, 1.0, n).values
    ar = np.arange(n)
    s = b[np.abs(np.subtract.outer(ar, ar))] / b[np.maximum.outer(ar, ar)]
    s *= (n - np.minimum.outer(ar, ar)).astype(float) ** alpha
    np.fill_diagonal(s, 2.0 * (n - ar).astype(float) ** alpha * b[0] / b)
    return s


def sav_raw_matrices(n: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Half-point Toeplitz matrix and its lag-weighted product."""
    _check_size(n)
    bt = l1_half_weights_uniform(alpha, 1.0, n).values
    a = _lower_toeplitz(bt)
    return a, bt[::-1, None] * a


def build_sav_matrices(n: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric matrices certifying the half-point scheme's energy laws.

    Returns ``(A + A^T, S)`` where A is the lower-triangular Toeplitz matrix
    of half-point weights (energy boundedness) and S is the anti-diagonal
    conjugation of the lag-weighted symmetrized product (fractional law).
    """
    _check_size(n)
    bt = l1_half_weights_uniform(alpha, 1.0, n).values
    a, braw = sav_raw_matrices(n, alpha)
    ar = np.arange(n)
    s = bt[np.abs(np.subtract.outer(ar, ar))] / bt[np.maximum.outer(ar, ar)]
    np.fill_diagonal(s, 2.0 * bt[0] / bt)
    return a + a.T, s


def nonuniform_raw_matrices(mesh: TimeMesh, alpha: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower-triangular weight matrices on an arbitrary mesh.

    Row i of the first matrix holds the integer-point weights for t_i; row
    i of the second holds the half-point weights for (t_i + t_{i+1})/2.
    Both are n x n and need mesh points t_0..t_n.
    """
    _check_size(n)
    if n > mesh.num_steps:
        raise IndexError(f"mesh has {mesh.num_steps} steps, requested order {n}")
    d = np.zeros((n, n))
    dbar = np.zeros((n, n))
    for i in range(1, n + 1):
        d[i - 1, :i] = l1_weights_nonuniform(alpha, mesh, i).values
    for i in range(n):
        dbar[i, : i + 1] = l1_half_weights_nonuniform(alpha, mesh, i).values
    return d, dbar


def build_nonuniform_matrices(mesh: TimeMesh, alpha: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetrized nonuniform weight matrices, scaled by Gamma(2 - alpha).

    With that scaling the integer-point matrix has the explicit diagonal
    2 tau_i^(-alpha), matching the form the monotonicity conditions are
    stated for.  On a uniform mesh both reduce to the uniform families
    divided by the step size.
    """
    d, dbar = nonuniform_raw_matrices(mesh, alpha, n)
    scale = math.gamma(2.0 - alpha)
    return scale * (d + d.T), scale * (dbar + dbar.T)
