"""Phase-field model definitions: energies, splittings, and operators.

Four gradient-flow models on periodic domains are supported:

* ``AC``   - double-well potential, mobility operator G = -1;
* ``CH``   - conserved variant, G = Laplacian, with a truncated potential
  whose derivative has a global Lipschitz bound;
* ``MBE_SLOPE``    - thin-film energy with slope selection, G = -1;
* ``MBE_NOSLOPE``  - thin-film energy without slope selection, G = -1
  (experimental: its potential is unbounded below, so auxiliary-variable
  runs must keep the energy shift large enough).

Each energy splits as E = 1/2 <phi, L phi> + E1 with L the leading
symmetric nonnegative operator (-eps^2 Lap for AC/CH, eps^2 Lap^2 for MBE)
and E1 the remaining nonquadratic part.  ``nonquadratic_variation`` is the
variational derivative of E1; its sign convention is pinned down by the
finite-difference check in the test suite rather than by transcription.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .spectral import Field2D, Grid2D, _same_grid


class ModelKind(str, Enum):
    AC = "ac"
    CH = "ch"
    MBE_SLOPE = "mbe_slope"
    MBE_NOSLOPE = "mbe_noslope"


_SECOND_ORDER = (ModelKind.AC, ModelKind.CH)
_MBE = (ModelKind.MBE_SLOPE, ModelKind.MBE_NOSLOPE)


def stabilization_threshold(kind: ModelKind, l_cap: float) -> float:
    """Smallest admissible stabilization constant for the semi-implicit
    integer-point scheme; zero where that scheme does not apply."""
    if kind is ModelKind.AC:
        return 2.0
    if kind is ModelKind.CH:
        return 0.5 * l_cap
    if kind is ModelKind.MBE_NOSLOPE:
        return 1.0 / 16.0
    return 0.0


@dataclass(frozen=True)
class ModelSpec:
    """Model kind plus physical and numerical parameters.

    ``stab`` defaults to the kind's admissible threshold and may not be set
    below it.  ``l_cap`` bounds the truncated potential derivative (CH
    only); ``c0`` is the positive shift under the auxiliary-variable square
    root.
    """

    kind: ModelKind
    epsilon: float
    gamma: float
    stab: float | None = None
    l_cap: float = 8.0
    c0: float = 1.0

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.epsilon <= 0.0:
            raise ValueError(f"interface width must be positive, got {self.epsilon}")
        if self.gamma <= 0.0:
            raise ValueError(f"mobility must be positive, got {self.gamma}")
        if self.l_cap <= 0.0:
            raise ValueError(f"Lipschitz cap must be positive, got {self.l_cap}")
        if self.c0 <= 0.0:
            raise ValueError(f"auxiliary-variable shift must be positive, got {self.c0}")
        floor = stabilization_threshold(kind, self.l_cap)
        if self.stab is None:
            object.__setattr__(self, "stab", floor)
        elif self.stab < floor:
            raise ValueError(
                f"stabilization constant {self.stab} below admissible "
                f"threshold {floor} for {kind.value}"
            )


# potentials ---------------------------------------------------------------
def double_well(phi: np.ndarray) -> np.ndarray:
    return 0.25 * (1.0 - phi**2) ** 2


def double_well_deriv(phi: np.ndarray) -> np.ndarray:
    return phi**3 - phi


def truncation_bound(l_cap: float) -> float:
    """Matching point of the truncated potential: 3 M^2 - 1 = l_cap."""
    return math.sqrt((l_cap + 1.0) / 3.0)


def truncated_potential(phi: np.ndarray, l_cap: float) -> np.ndarray:
    """Double well inside |phi| <= M, C^1 quadratic continuation outside."""
    m = truncation_bound(l_cap)
    a = np.abs(phi)
    fm = m**3 - m
    em = 0.25 * (1.0 - m * m) ** 2
    outside = em + fm * (a - m) + 0.5 * l_cap * (a - m) ** 2
    return np.where(a <= m, double_well(phi), outside)


def truncated_potential_deriv(phi: np.ndarray, l_cap: float) -> np.ndarray:
    m = truncation_bound(l_cap)
    a = np.abs(phi)
    fm = m**3 - m
    outside = np.sign(phi) * (fm + l_cap * (a - m))
    return np.where(a <= m, double_well_deriv(phi), outside)


# spectral multipliers -----------------------------------------------------
def quad_multiplier(model: ModelSpec, grid: Grid2D) -> np.ndarray:
    """Multiplier of the leading symmetric nonnegative operator L."""
    if model.kind in _SECOND_ORDER:
        return model.epsilon**2 * grid.k2
    return model.epsilon**2 * grid.k4


def g_multiplier(model: ModelSpec, grid: Grid2D):
    """Multiplier of the mobility operator G (nonpositive)."""
    if model.kind is ModelKind.CH:
        return -grid.k2
    return -1.0


def stabilization_multiplier(model: ModelSpec, grid: Grid2D):
    """Multiplier of the stabilization operator added to the implicit part."""
    if model.kind in _SECOND_ORDER:
        return model.stab
    if model.kind is ModelKind.MBE_NOSLOPE:
        return model.stab * grid.k2
    raise ValueError("no admissible stabilization for the slope-selection model")


# energies ------------------------------------------------------------------
def _grad_sq(grid: Grid2D, vals: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    gx, gy = grid.gradient(vals)
    return gx, gy, gx**2 + gy**2


def classical_energy_values(model: ModelSpec, grid: Grid2D, vals: np.ndarray) -> float:
    w = grid.quad_weight
    if model.kind in _SECOND_ORDER:
        _, _, g2 = _grad_sq(grid, vals)
        if model.kind is ModelKind.AC:
            pot = double_well(vals)
        else:
            pot = truncated_potential(vals, model.l_cap)
        return w * float((0.5 * model.epsilon**2 * g2 + pot).sum())
    lap = grid.laplacian(vals)
    _, _, g2 = _grad_sq(grid, vals)
    if model.kind is ModelKind.MBE_SLOPE:
        pot = 0.25 * (1.0 - g2) ** 2
    else:
        pot = -0.5 * np.log1p(g2)
    return w * float((0.5 * model.epsilon**2 * lap**2 + pot).sum())


def quadratic_energy_values(model: ModelSpec, grid: Grid2D, vals: np.ndarray) -> float:
    lv = grid.ifft(quad_multiplier(model, grid) * grid.fft(vals))
    return 0.5 * grid.inner(vals, lv)


def nonquadratic_energy_values(model: ModelSpec, grid: Grid2D, vals: np.ndarray) -> float:
    w = grid.quad_weight
    if model.kind is ModelKind.AC:
        return w * float(double_well(vals).sum())
    if model.kind is ModelKind.CH:
        return w * float(truncated_potential(vals, model.l_cap).sum())
    _, _, g2 = _grad_sq(grid, vals)
    if model.kind is ModelKind.MBE_SLOPE:
        return w * float((0.25 * (1.0 - g2) ** 2).sum())
    return w * float((-0.5 * np.log1p(g2)).sum())


def nonquadratic_variation_values(model: ModelSpec, grid: Grid2D, vals: np.ndarray) -> np.ndarray:
    if model.kind is ModelKind.AC:
        out = double_well_deriv(vals)
    elif model.kind is ModelKind.CH:
        out = truncated_potential_deriv(vals, model.l_cap)
    else:
        gx, gy, g2 = _grad_sq(grid, vals)
        if model.kind is ModelKind.MBE_SLOPE:
            fac = 1.0 - g2
        else:
            fac = 1.0 / (1.0 + g2)
        out = grid.divergence(fac * gx, fac * gy)
    return grid.maybe_dealias(out)


def classical_energy(model: ModelSpec, f: Field2D) -> float:
    return classical_energy_values(model, f.grid, f.values)


def quadratic_energy(model: ModelSpec, f: Field2D) -> float:
    return quadratic_energy_values(model, f.grid, f.values)


def nonquadratic_energy(model: ModelSpec, f: Field2D) -> float:
    return nonquadratic_energy_values(model, f.grid, f.values)


def nonquadratic_variation(model: ModelSpec, f: Field2D) -> Field2D:
    return Field2D(f.grid, nonquadratic_variation_values(model, f.grid, f.values))


# mobility operator ---------------------------------------------------------
def apply_G(model: ModelSpec, f: Field2D) -> Field2D:
    if model.kind is ModelKind.CH:
        return Field2D(f.grid, f.grid.laplacian(f.values))
    return Field2D(f.grid, -f.values)


def apply_G_inverse_inner(model: ModelSpec, f: Field2D, g: Field2D) -> float:
    """Inner product <G^{-1} f, g>; for the conserved model f must have
    zero mean and the zero mode is excluded from the inversion."""
    grid = _same_grid(f, g)
    if model.kind is not ModelKind.CH:
        return -grid.inner(f.values, g.values)
    scale = grid.max_abs(f.values)
    if abs(grid.mean(f.values)) > 1e-9 * max(1.0, scale):
        raise ValueError("operator inverse needs a zero-mean field")
    spec = grid.fft(f.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        spec = np.where(grid.k2 > 0.0, spec / (-grid.k2), 0.0)
    return grid.inner(grid.ifft(spec), g.values)
