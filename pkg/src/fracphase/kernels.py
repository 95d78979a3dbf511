"""L1 convolution weights for the Caputo derivative of order alpha in (0, 1).

Four weight families are provided:

* integer-point weights on a uniform mesh (``b_j``-type),
* half-point weights on a uniform mesh (``(2-alpha)``-order variant),
* integer-point weights on an arbitrary increasing mesh,
* half-point weights on an arbitrary increasing mesh.

``apply_frac_derivative`` convolves backward differences of a scalar or
field history with any of these families.  Uniform-mesh weights are cached
per ``(alpha, dt)`` and extended incrementally, so repeated requests with a
growing step count cost O(1) amortized.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

UNIFORM_L1 = "uniform_l1"
HALF_L1 = "half_l1"
NONUNIFORM_L1 = "nonuniform_l1"
NONUNIFORM_HALF_L1 = "nonuniform_half_l1"

_UNIFORM_KINDS = (UNIFORM_L1, HALF_L1)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")


def _pow_diff(hi, lo, beta, gap=None):
    """Compute hi**beta - lo**beta without cancellation for hi > lo >= 0.

    ``gap`` may supply hi - lo when it is known exactly (e.g. a mesh step);
    otherwise it is formed by subtraction.
    """
    hi = np.asarray(hi, dtype=float)
    lo = np.asarray(lo, dtype=float)
    gap = hi - lo if gap is None else np.asarray(gap, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = lo**beta * np.expm1(beta * np.log1p(gap / lo))
    out = np.where(lo > 0.0, stable, hi**beta)
    return out if out.ndim else float(out)


class TimeMesh:
    """Ordered time points t_0 = 0 < t_1 < ... < t_N."""

    __slots__ = ("points", "steps")

    def __init__(self, points):
        pts = np.ascontiguousarray(points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a time mesh needs at least two points")
        if pts[0] != 0.0:
            raise ValueError("time mesh must start at t_0 = 0")
        steps = np.diff(pts)
        if np.any(steps <= 0.0):
            raise ValueError("time mesh points must be strictly increasing")
        pts.setflags(write=False)
        steps.setflags(write=False)
        self.points = pts
        self.steps = steps

    @classmethod
    def uniform(cls, dt: float, n: int) -> "TimeMesh":
        if dt <= 0.0:
            raise ValueError(f"step size must be positive, got {dt}")
        if n < 1:
            raise ValueError(f"need at least one step, got {n}")
        return cls(dt * np.arange(n + 1))

    @property
    def num_steps(self) -> int:
        return self.points.size - 1

    @property
    def horizon(self) -> float:
        return float(self.points[-1])

    @property
    def is_uniform(self) -> bool:
        tau = self.steps
        return float(np.max(tau) - np.min(tau)) <= 1e-14 * float(np.max(tau))

    def uniform_dt(self) -> float:
        if not self.is_uniform:
            raise ValueError("mesh is not uniform")
        return float(self.steps[0])

    def __len__(self) -> int:
        return self.points.size

    def __repr__(self) -> str:
        return f"TimeMesh(N={self.num_steps}, T={self.horizon:g})"


@dataclass(frozen=True)
class WeightSequence:
    """Convolution weights together with the parameters that generated them.

    ``values`` are ordered as produced by the generating rule: index j holds
    the lag-j weight for uniform kinds, and the in-row weight for nonuniform
    kinds.  ``dt`` is set for uniform kinds only; ``mesh``/``index`` for
    nonuniform kinds only.
    """

    alpha: float
    kind: str
    values: np.ndarray
    dt: float | None = None
    mesh: TimeMesh | None = None
    index: int | None = None

    def __post_init__(self):
        if not np.all(self.values > 0.0):
            raise ValueError("all weights must be strictly positive")
        if self.kind == UNIFORM_L1 and np.any(np.diff(self.values) >= 0.0):
            raise ValueError("integer-point uniform weights must decrease")

    def __len__(self) -> int:
        return self.values.size


# Uniform-kind weights keyed by (kind, alpha, dt); buffers only ever grow and
# are swapped atomically, so readers holding views of an old buffer are safe.
_cache_lock = threading.Lock()
_cache: dict[tuple[str, float, float], np.ndarray] = {}


def _fresh_entries(kind: str, alpha: float, dt: float, lo: int, hi: int) -> np.ndarray:
    beta = 1.0 - alpha
    scale = dt**beta / math.gamma(2.0 - alpha)
    j = np.arange(lo, hi, dtype=float)
    if kind == UNIFORM_L1:
        return scale * _pow_diff(j + 1.0, j, beta, gap=np.ones_like(j))
    vals = scale * _pow_diff(j + 0.5, j - 0.5, beta, gap=np.ones_like(j))
    if lo == 0:
        vals[0] = scale * 2.0 ** (alpha - 1.0)
    return vals


def _uniform_values(kind: str, alpha: float, dt: float, n: int) -> np.ndarray:
    key = (kind, alpha, dt)
    with _cache_lock:
        buf = _cache.get(key)
        if buf is None or buf.size < n:
            size = max(n, 16, 0 if buf is None else 2 * buf.size)
            new = np.empty(size)
            have = 0
            if buf is not None:
                have = buf.size
                new[:have] = buf
            new[have:] = _fresh_entries(kind, alpha, dt, have, size)
            new.setflags(write=False)
            _cache[key] = new
            buf = new
    return buf[:n]


def l1_weights_uniform(alpha: float, dt: float, n: int) -> WeightSequence:
    """Integer-point weights b_0..b_{n-1} on a uniform mesh of step dt.

    b_j = dt^(1-alpha) [(j+1)^(1-alpha) - j^(1-alpha)] / Gamma(2-alpha);
    the sequence is strictly positive and strictly decreasing.
    """
    _check_alpha(alpha)
    if dt <= 0.0:
        raise ValueError(f"step size must be positive, got {dt}")
    if n < 1:
        raise ValueError(f"need at least one weight, got n={n}")
    return WeightSequence(alpha, UNIFORM_L1, _uniform_values(UNIFORM_L1, alpha, dt, n), dt=dt)


def l1_half_weights_uniform(alpha: float, dt: float, n: int) -> WeightSequence:
    """Half-point weights on a uniform mesh of step dt.

    The leading weight is dt^(1-alpha) 2^(alpha-1) / Gamma(2-alpha); for
    j >= 1 the weight is dt^(1-alpha) [(j+1/2)^(1-alpha) - (j-1/2)^(1-alpha)]
    / Gamma(2-alpha).
    """
    _check_alpha(alpha)
    if dt <= 0.0:
        raise ValueError(f"step size must be positive, got {dt}")
    if n < 1:
        raise ValueError(f"need at least one weight, got n={n}")
    return WeightSequence(alpha, HALF_L1, _uniform_values(HALF_L1, alpha, dt, n), dt=dt)


def l1_weights_nonuniform(alpha: float, mesh: TimeMesh, n: int) -> WeightSequence:
    """Integer-point weights for the derivative at t_n on an arbitrary mesh.

    Entry j-1 (0-based) holds the coefficient of the j-th backward
    difference, j = 1..n.
    """
    _check_alpha(alpha)
    if not 1 <= n <= mesh.num_steps:
        raise IndexError(f"target index {n} outside 1..{mesh.num_steps}")
    beta = 1.0 - alpha
    t = mesh.points
    tau = mesh.steps[:n]
    hi = t[n] - t[0:n]
    lo = t[n] - t[1 : n + 1]
    vals = _pow_diff(hi, lo, beta, gap=tau) / (math.gamma(2.0 - alpha) * tau)
    vals = np.atleast_1d(vals)
    vals.setflags(write=False)
    return WeightSequence(alpha, NONUNIFORM_L1, vals, mesh=mesh, index=n)


def l1_half_weights_nonuniform(alpha: float, mesh: TimeMesh, n: int) -> WeightSequence:
    """Half-point weights for the derivative at (t_n + t_{n+1})/2.

    Entry j (0-based) holds the coefficient of the (j+1)-th backward
    difference, j = 0..n; requires 0 <= n <= N-1.
    """
    _check_alpha(alpha)
    if not 0 <= n <= mesh.num_steps - 1:
        raise IndexError(f"target index {n} outside 0..{mesh.num_steps - 1}")
    beta = 1.0 - alpha
    t = mesh.points
    tau = mesh.steps
    denom = math.gamma(2.0 - alpha) * 2.0**beta
    vals = np.empty(n + 1)
    if n > 0:
        j = np.arange(n)
        hi = t[n + 1] + t[n] - 2.0 * t[j]
        lo = t[n + 1] + t[n] - 2.0 * t[j + 1]
        vals[:n] = _pow_diff(hi, lo, beta, gap=2.0 * tau[j]) / (denom * tau[j + 1])
    vals[n] = tau[n] ** beta / (denom * tau[n])
    vals.setflags(write=False)
    return WeightSequence(alpha, NONUNIFORM_HALF_L1, vals, mesh=mesh, index=n)


def _history_array(history, weights: WeightSequence) -> np.ndarray:
    h = np.asarray(history, dtype=float)
    if h.shape[0] != len(weights) + 1:
        raise ValueError(
            f"history of length {h.shape[0]} does not match "
            f"{len(weights)} weights (need weight count + 1 entries)"
        )
    return h


def apply_frac_derivative(history, weights: WeightSequence):
    """Discrete Caputo derivative of a history of scalars or fields.

    ``history`` stacks phi^0..phi^m along axis 0 and must hold exactly one
    more entry than there are weights.  Fields are treated pointwise.  The
    result is the derivative at the final integer point (integer-point
    kinds) or at the final half point (half-point kinds).
    """
    h = _history_array(history, weights)
    d = np.diff(h, axis=0)
    w = weights.values
    if weights.kind in _UNIFORM_KINDS:
        out = np.tensordot(w[::-1], d, axes=(0, 0)) / weights.dt
    else:
        out = np.tensordot(w, d, axes=(0, 0))
    return float(out) if h.ndim == 1 else out


def apply_frac_derivative_history_form(history, weights: WeightSequence):
    """Same value as ``apply_frac_derivative`` via the rearranged sum.

    The convolution of differences is regrouped into one coefficient per
    history entry (telescoping form).  Kept as an independent evaluation
    route; both routes must agree to roundoff.
    """
    h = _history_array(history, weights)
    m = len(weights)
    if weights.kind in _UNIFORM_KINDS:
        w = weights.values[::-1]
        scale = weights.dt
    else:
        w = weights.values
        scale = 1.0
    # Leading entry w[m-1] multiplies the newest state; each older state picks
    # up the (negative) increment of the reordered weights; the oldest state
    # closes the telescope.
    c = np.empty(m + 1)
    c[0] = -w[0]
    c[1:m] = w[: m - 1] - w[1:m]
    c[m] = w[m - 1]
    out = np.tensordot(c, h, axes=(0, 0)) / scale
    return float(out) if h.ndim == 1 else out
