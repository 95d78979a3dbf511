"""Time-stepping engines for time-fractional phase-field models.

All steppers advance a :class:`SchemeState` by one step with a single
diagonal spectral solve (two solves for auxiliary-variable schemes, which
reduce the scalar coupling to rank one).  The full field history is
retained because the fractional derivative convolves every past state; the
history sum is evaluated as one matrix-vector product against the stored
history block.

Steppers:

* ``step_stabilized_l1`` / ``step_stabilized_l1_nonuniform`` - first-order
  semi-implicit scheme with an added linear stabilization operator;
* ``step_sav_first_order`` - first-order auxiliary-variable scheme
  (uniform mesh);
* ``step_l1_sav`` / ``step_l1_sav_nonuniform`` - half-point scheme,
  Crank-Nicolson in the leading operator, extrapolated nonlinearity,
  order 2 - alpha on uniform meshes.

``alpha = 1`` is accepted everywhere and runs the classical limit (only
the newest backward difference carries weight).
"""

from __future__ import annotations

import math
import tempfile

import numpy as np

from . import models
from .kernels import TimeMesh, l1_half_weights_nonuniform, l1_half_weights_uniform, l1_weights_nonuniform, l1_weights_uniform
from .models import ModelKind, ModelSpec
from .spectral import Grid2D

DEFAULT_HISTORY_MEM = 2 << 30  # bytes of history kept in RAM before spilling

_STABILIZED_KINDS = (ModelKind.AC, ModelKind.CH, ModelKind.MBE_NOSLOPE)


def graded_mesh(n: int, r: float, horizon: float) -> TimeMesh:
    """Mesh t_j = (j/N)^r * T, clustering steps near t = 0 for r > 1."""
    if n < 1:
        raise ValueError(f"need at least one step, got {n}")
    if r < 1.0:
        raise ValueError(f"grading exponent must be at least 1, got {r}")
    if horizon <= 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    pts = (np.arange(n + 1) / n) ** r * horizon
    pts[-1] = horizon
    return TimeMesh(pts)


class SchemeState:
    """History of fields (and auxiliary scalars) owned by one driver.

    The history block has shape ``(N+1, nx*ny)`` and is preallocated for
    the whole mesh; it spills to a memory-mapped scratch file when the
    estimated footprint exceeds ``mem_limit`` bytes.
    """

    def __init__(self, grid: Grid2D, mesh: TimeMesh, alpha: float, history, r_history, n: int):
        self.grid = grid
        self.mesh = mesh
        self.alpha = alpha
        self.history = history
        self.r_history = r_history
        self.n = n

    @classmethod
    def initialize(
        cls,
        grid: Grid2D,
        mesh: TimeMesh,
        alpha: float,
        phi0: np.ndarray,
        model: ModelSpec | None = None,
        sav: bool = False,
        mem_limit: int | None = None,
    ) -> "SchemeState":
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"fractional order must lie in (0, 1], got {alpha}")
        phi0 = np.ascontiguousarray(phi0, dtype=float)
        if phi0.shape != grid.shape:
            raise ValueError(f"initial field shape {phi0.shape} does not match grid {grid.shape}")
        cap = mesh.num_steps + 1
        nfield = grid.nx * grid.ny
        limit = DEFAULT_HISTORY_MEM if mem_limit is None else mem_limit
        if cap * nfield * 8 > limit:
            scratch = tempfile.TemporaryFile(prefix="fracphase-history-")
            history = np.memmap(scratch, dtype=float, mode="w+", shape=(cap, nfield))
        else:
            history = np.empty((cap, nfield))
        history[0] = phi0.ravel()
        r_history = None
        if sav:
            if model is None:
                raise ValueError("auxiliary-variable state needs the model for its initial scalar")
            e1 = models.nonquadratic_energy_values(model, grid, phi0)
            if e1 + model.c0 <= 0.0:
                raise ValueError("nonquadratic energy plus shift must be positive")
            r_history = np.empty(cap)
            r_history[0] = math.sqrt(e1 + model.c0)
        return cls(grid, mesh, alpha, history, r_history, 0)

    @property
    def has_sav(self) -> bool:
        return self.r_history is not None

    @property
    def t(self) -> float:
        return float(self.mesh.points[self.n])

    def phi(self, j: int) -> np.ndarray:
        if not 0 <= j <= self.n:
            raise IndexError(f"state index {j} outside 0..{self.n}")
        return self.history[j].reshape(self.grid.shape)

    @property
    def current(self) -> np.ndarray:
        return self.phi(self.n)

    @property
    def r(self) -> float:
        if not self.has_sav:
            raise ValueError("state carries no auxiliary scalar")
        return float(self.r_history[self.n])

    def _append(self, phi_new: np.ndarray, r_new: float | None = None) -> None:
        if self.n + 1 > self.mesh.num_steps:
            raise IndexError("history capacity exhausted; mesh fully consumed")
        self.history[self.n + 1] = phi_new.ravel()
        if self.has_sav:
            if r_new is None:
                raise ValueError("auxiliary scalar missing")
            self.r_history[self.n + 1] = r_new
        self.n += 1


def _integer_weights(alpha: float, dt: float, n: int) -> np.ndarray:
    if alpha == 1.0:
        w = np.zeros(n)
        w[0] = 1.0
        return w
    return l1_weights_uniform(alpha, dt, n).values


def _half_weights(alpha: float, dt: float, n: int) -> np.ndarray:
    if alpha == 1.0:
        w = np.zeros(n)
        w[0] = 1.0
        return w
    return l1_half_weights_uniform(alpha, dt, n).values


def _integer_weights_nonuniform(alpha: float, mesh: TimeMesh, n: int) -> np.ndarray:
    if alpha == 1.0:
        w = np.zeros(n)
        w[-1] = 1.0 / mesh.steps[n - 1]
        return w
    return l1_weights_nonuniform(alpha, mesh, n).values


def _half_weights_nonuniform(alpha: float, mesh: TimeMesh, n: int) -> np.ndarray:
    if alpha == 1.0:
        w = np.zeros(n + 1)
        w[-1] = 1.0 / mesh.steps[n]
        return w
    return l1_half_weights_nonuniform(alpha, mesh, n).values


def _require_uniform(state: SchemeState) -> float:
    if not state.mesh.is_uniform:
        raise ValueError("this stepper requires a uniform mesh")
    return float(state.mesh.steps[0])


def _implicit_history_integer(state: SchemeState, dt: float) -> tuple[float, np.ndarray]:
    """Split the integer-point derivative at the next step into
    a0 * phi_new - H, with H a combination of stored states."""
    n1 = state.n + 1
    b = _integer_weights(state.alpha, dt, n1)
    c = np.empty(n1)
    c[0] = b[n1 - 1]
    if n1 > 1:
        c[1:] = b[n1 - 2 :: -1] - b[n1 - 1 : 0 : -1]
    h = c @ state.history[:n1]
    return b[0] / dt, h.reshape(state.grid.shape) / dt


def _implicit_history_integer_nonuniform(state: SchemeState) -> tuple[float, np.ndarray]:
    n1 = state.n + 1
    d = _integer_weights_nonuniform(state.alpha, state.mesh, n1)
    c = np.empty(n1)
    c[0] = d[0]
    if n1 > 1:
        c[1:] = d[1:] - d[: n1 - 1]
    h = c @ state.history[:n1]
    return d[n1 - 1], h.reshape(state.grid.shape)


def _implicit_history_half(state: SchemeState, dt: float) -> tuple[float, np.ndarray]:
    """Split the half-point derivative into
    a0 * (phi_new - phi_n) + H, with H over stored states."""
    n = state.n
    bt = _half_weights(state.alpha, dt, n + 1)
    if n == 0:
        return bt[0] / dt, np.zeros(state.grid.shape)
    c = np.empty(n + 1)
    c[0] = -bt[n]
    if n > 1:
        c[1:n] = bt[n:1:-1] - bt[n - 1 : 0 : -1]
    c[n] = bt[1]
    h = c @ state.history[: n + 1]
    return bt[0] / dt, h.reshape(state.grid.shape) / dt


def _implicit_history_half_nonuniform(state: SchemeState) -> tuple[float, np.ndarray]:
    n = state.n
    d = _half_weights_nonuniform(state.alpha, state.mesh, n)
    if n == 0:
        return d[0], np.zeros(state.grid.shape)
    c = np.empty(n + 1)
    c[0] = -d[0]
    if n > 1:
        c[1:n] = d[: n - 1] - d[1:n]
    c[n] = d[n - 1]
    h = c @ state.history[: n + 1]
    return d[n], h.reshape(state.grid.shape)


def _stabilized_update(state: SchemeState, model: ModelSpec, a0: float, hist: np.ndarray) -> None:
    if model.kind not in _STABILIZED_KINDS:
        raise ValueError(f"stabilized stepper does not support model kind {model.kind.value}")
    if state.has_sav:
        raise ValueError("stabilized stepper expects a state without auxiliary scalar")
    grid = state.grid
    gm = models.g_multiplier(model, grid)
    lm = models.quad_multiplier(model, grid)
    sm = models.stabilization_multiplier(model, grid)
    sigma = a0 - model.gamma * gm * (lm + sm)
    phin = state.current
    nl = models.nonquadratic_variation_values(model, grid, phin)
    rhs_hat = grid.fft(hist) + model.gamma * gm * (grid.fft(nl) - sm * grid.fft(phin))
    state._append(grid.ifft(rhs_hat / sigma))


def step_stabilized_l1(state: SchemeState, model: ModelSpec) -> SchemeState:
    """One step of the first-order stabilized scheme on a uniform mesh."""
    dt = _require_uniform(state)
    a0, hist = _implicit_history_integer(state, dt)
    _stabilized_update(state, model, a0, hist)
    return state


def step_stabilized_l1_nonuniform(state: SchemeState, model: ModelSpec) -> SchemeState:
    """One step of the first-order stabilized scheme on an arbitrary mesh."""
    a0, hist = _implicit_history_integer_nonuniform(state)
    _stabilized_update(state, model, a0, hist)
    return state


def _sav_direction(state: SchemeState, model: ModelSpec, ref: np.ndarray) -> np.ndarray:
    e1 = models.nonquadratic_energy_values(model, state.grid, ref)
    shifted = e1 + model.c0
    if shifted <= 0.0:
        raise ValueError("nonquadratic energy plus shift must stay positive")
    return models.nonquadratic_variation_values(model, state.grid, ref) / math.sqrt(shifted)


def _rank_one_solve(
    state: SchemeState,
    model: ModelSpec,
    sigma: np.ndarray,
    c_field: np.ndarray,
    bvec: np.ndarray,
    coupling: float,
) -> tuple[np.ndarray, float, np.ndarray]:
    """Solve sigma * phi = c + theta * w with theta = coupling * <b, phi>
    and w the mobility image of the direction b."""
    grid = state.grid
    gm = models.g_multiplier(model, grid)
    w = grid.ifft(model.gamma * gm * grid.fft(bvec))
    eta = grid.solve_diagonal(sigma, c_field)
    chi = grid.solve_diagonal(sigma, w)
    denom = 1.0 - coupling * grid.inner(bvec, chi)
    if denom < 1.0 - 1e-9:
        # <b, chi> <= 0 because the mobility is nonpositive; a denominator
        # below one signals a broken operator, not a data problem.
        raise ValueError(f"rank-one denominator {denom} fell below one")
    theta = coupling * grid.inner(bvec, eta) / denom
    return eta + theta * chi, theta, w


def step_sav_first_order(state: SchemeState, model: ModelSpec) -> SchemeState:
    """One step of the first-order auxiliary-variable scheme (uniform mesh)."""
    dt = _require_uniform(state)
    if not state.has_sav:
        raise ValueError("auxiliary-variable stepper expects a state with scalar history")
    grid = state.grid
    a0, hist = _implicit_history_integer(state, dt)
    phin = state.current
    bvec = _sav_direction(state, model, phin)
    gm = models.g_multiplier(model, grid)
    lm = models.quad_multiplier(model, grid)
    sigma = a0 - model.gamma * gm * lm
    w = grid.ifft(model.gamma * gm * grid.fft(bvec))
    rn = state.r
    c_field = hist + (rn - 0.5 * grid.inner(bvec, phin)) * w
    phi_new, _, _ = _rank_one_solve(state, model, sigma, c_field, bvec, 0.5)
    r_new = rn + 0.5 * grid.inner(bvec, phi_new - phin)
    state._append(phi_new, r_new)
    return state


def _extrapolant(state: SchemeState) -> np.ndarray:
    """3/2 phi^n - 1/2 phi^{n-1}; the first step reuses phi^0."""
    phin = state.current
    if state.n == 0:
        return phin.copy()
    return 1.5 * phin - 0.5 * state.phi(state.n - 1)


def _l1_sav_update(state: SchemeState, model: ModelSpec, a0: float, hist: np.ndarray) -> None:
    if not state.has_sav:
        raise ValueError("auxiliary-variable stepper expects a state with scalar history")
    grid = state.grid
    phin = state.current
    bvec = _sav_direction(state, model, _extrapolant(state))
    gm = models.g_multiplier(model, grid)
    lm = models.quad_multiplier(model, grid)
    sigma = a0 - 0.5 * model.gamma * gm * lm
    w = grid.ifft(model.gamma * gm * grid.fft(bvec))
    rn = state.r
    c_field = (
        a0 * phin
        - hist
        + grid.ifft(0.5 * model.gamma * gm * lm * grid.fft(phin))
        + (rn - 0.25 * grid.inner(bvec, phin)) * w
    )
    phi_new, _, _ = _rank_one_solve(state, model, sigma, c_field, bvec, 0.25)
    r_new = rn + 0.5 * grid.inner(bvec, phi_new - phin)
    state._append(phi_new, r_new)


def step_l1_sav(state: SchemeState, model: ModelSpec) -> SchemeState:
    """One step of the half-point auxiliary-variable scheme, order
    2 - alpha on a uniform mesh."""
    dt = _require_uniform(state)
    a0, hist = _implicit_history_half(state, dt)
    _l1_sav_update(state, model, a0, hist)
    return state


def step_l1_sav_nonuniform(state: SchemeState, model: ModelSpec) -> SchemeState:
    """Half-point auxiliary-variable step on an arbitrary mesh."""
    a0, hist = _implicit_history_half_nonuniform(state)
    _l1_sav_update(state, model, a0, hist)
    return state


STEPPERS = {
    ("stabilized_l1", True): step_stabilized_l1,
    ("stabilized_l1", False): step_stabilized_l1_nonuniform,
    ("sav1", True): step_sav_first_order,
    ("l1sav", True): step_l1_sav,
    ("l1sav", False): step_l1_sav_nonuniform,
}


def stepper_for(scheme: str, uniform: bool):
    try:
        return STEPPERS[(scheme, uniform)]
    except KeyError:
        raise ValueError(f"scheme {scheme!r} is not available on a "
                         f"{'uniform' if uniform else 'nonuniform'} mesh") from None
