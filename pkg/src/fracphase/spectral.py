"""Periodic 2D scalar fields and Fourier pseudo-spectral operators.

Fields live on the collocation nodes (i Lx/nx, j Ly/ny), stored row-major
with x along axis 0.  Real-to-complex transforms are used throughout;
diagonal-in-frequency operators are plain real multiplier arrays of shape
``grid.spectral_shape``.

Odd-order derivative operators zero the Nyquist wavenumber in their
direction so that gradients of real fields stay real; even powers of |k|
keep the full wavenumber range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class Grid2D:
    """Geometry plus precomputed wavenumber arrays for a periodic box."""

    def __init__(self, nx: int, ny: int, lx: float, ly: float, dealias: bool = False):
        for name, n in (("nx", nx), ("ny", ny)):
            if n < 4 or n % 2:
                raise ValueError(f"{name} must be even and at least 4, got {n}")
        if lx <= 0 or ly <= 0:
            raise ValueError("domain lengths must be positive")
        self.nx, self.ny = int(nx), int(ny)
        self.lx, self.ly = float(lx), float(ly)
        self.dealias = bool(dealias)
        self.x = np.arange(nx) * (lx / nx)
        self.y = np.arange(ny) * (ly / ny)

        kx = 2.0 * np.pi * np.fft.fftfreq(nx, d=lx / nx)
        ky = 2.0 * np.pi * np.fft.rfftfreq(ny, d=ly / ny)
        self.kx = kx
        self.ky = ky
        self.k2 = kx[:, None] ** 2 + ky[None, :] ** 2
        self.k4 = self.k2**2
        kx_odd = kx.copy()
        kx_odd[nx // 2] = 0.0
        ky_odd = ky.copy()
        ky_odd[-1] = 0.0
        self._ikx = 1j * kx_odd[:, None]
        self._iky = 1j * ky_odd[None, :]
        self.quad_weight = lx * ly / (nx * ny)

        keep_x = np.abs(np.fft.fftfreq(nx) * nx) < nx / 3.0
        keep_y = np.abs(np.fft.rfftfreq(ny) * ny) < ny / 3.0
        self._dealias_mask = keep_x[:, None] & keep_y[None, :]

    @property
    def shape(self) -> tuple[int, int]:
        return self.nx, self.ny

    @property
    def spectral_shape(self) -> tuple[int, int]:
        return self.nx, self.ny // 2 + 1

    def compatible(self, other: "Grid2D") -> bool:
        return (self.nx, self.ny, self.lx, self.ly) == (other.nx, other.ny, other.lx, other.ly)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    # transforms -----------------------------------------------------------
    def fft(self, a: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(a)

    def ifft(self, spec: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(spec, s=self.shape)

    def maybe_dealias(self, a: np.ndarray) -> np.ndarray:
        if not self.dealias:
            return a
        return self.ifft(np.where(self._dealias_mask, self.fft(a), 0.0))

    # differential operators ------------------------------------------------
    def laplacian(self, a: np.ndarray) -> np.ndarray:
        return self.ifft(-self.k2 * self.fft(a))

    def bilaplacian(self, a: np.ndarray) -> np.ndarray:
        return self.ifft(self.k4 * self.fft(a))

    def gradient(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        spec = self.fft(a)
        return self.ifft(self._ikx * spec), self.ifft(self._iky * spec)

    def divergence(self, ax: np.ndarray, ay: np.ndarray) -> np.ndarray:
        return self.ifft(self._ikx * self.fft(ax) + self._iky * self.fft(ay))

    def solve_diagonal(self, sigma: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        sig = np.broadcast_to(np.asarray(sigma, dtype=float), self.spectral_shape)
        low = float(sig.min())
        if low <= 0.0:
            raise ValueError(f"diagonal operator is singular: min multiplier {low}")
        return self.ifft(self.fft(rhs) / sig)

    # reductions -------------------------------------------------------------
    def mean(self, a: np.ndarray) -> float:
        return float(a.mean())

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return self.quad_weight * float(np.dot(a.ravel(), b.ravel()))

    def norm(self, a: np.ndarray) -> float:
        return float(np.sqrt(self.inner(a, a)))

    def max_abs(self, a: np.ndarray) -> float:
        return float(np.abs(a).max())

    def __repr__(self) -> str:
        return f"Grid2D({self.nx}x{self.ny}, [0,{self.lx:g}]x[0,{self.ly:g}])"


@dataclass
class Field2D:
    """Real scalar samples on a grid's collocation nodes."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        self.values = vals

    def copy(self) -> "Field2D":
        return Field2D(self.grid, self.values.copy())


def _same_grid(*fields: Field2D) -> Grid2D:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid is not g and not g.compatible(f.grid):
            raise ValueError("fields live on incompatible grids")
    return g


def laplacian(f: Field2D) -> Field2D:
    return Field2D(f.grid, f.grid.laplacian(f.values))


def bilaplacian(f: Field2D) -> Field2D:
    return Field2D(f.grid, f.grid.bilaplacian(f.values))


def gradient(f: Field2D) -> tuple[Field2D, Field2D]:
    gx, gy = f.grid.gradient(f.values)
    return Field2D(f.grid, gx), Field2D(f.grid, gy)


def divergence(fx: Field2D, fy: Field2D) -> Field2D:
    g = _same_grid(fx, fy)
    return Field2D(g, g.divergence(fx.values, fy.values))


def solve_diagonal(sigma: np.ndarray, rhs: Field2D) -> Field2D:
    return Field2D(rhs.grid, rhs.grid.solve_diagonal(sigma, rhs.values))


def mean(f: Field2D) -> float:
    return f.grid.mean(f.values)


def inner(f: Field2D, g: Field2D) -> float:
    grid = _same_grid(f, g)
    return grid.inner(f.values, g.values)


def max_abs(f: Field2D) -> float:
    return f.grid.max_abs(f.values)


# snapshot I/O: one ASCII header line "nx ny Lx Ly t", then nx*ny
# little-endian float64 values, row-major.
def save_snapshot(path, field: Field2D, t: float) -> None:
    g = field.grid
    header = f"{g.nx} {g.ny} {g.lx!r} {g.ly!r} {float(t)!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_snapshot(path, grid: Grid2D | None = None) -> tuple[Field2D, float]:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 5:
            raise ValueError(f"malformed snapshot header in {path}")
        nx, ny = int(header[0]), int(header[1])
        lx, ly, t = float(header[2]), float(header[3]), float(header[4])
        raw = fh.read(nx * ny * 8)
    if len(raw) != nx * ny * 8:
        raise ValueError(f"snapshot {path} truncated")
    values = np.frombuffer(raw, dtype="<f8").reshape(nx, ny).astype(float)
    if grid is None:
        grid = Grid2D(nx, ny, lx, ly)
    elif (grid.nx, grid.ny, grid.lx, grid.ly) != (nx, ny, lx, ly):
        raise ValueError("snapshot geometry does not match the supplied grid")
    return Field2D(grid, values), t
