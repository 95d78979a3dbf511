"""Energy traces and the discrete energy-law diagnostics.

Three laws are evaluated on a per-run energy sequence:

* boundedness: E^n <= E^0 up to a relative tolerance;
* fractional law: the discrete Caputo derivative of the energy sequence is
  nonpositive (integer-point form for first-order schemes, half-point form
  for the Crank-Nicolson-type scheme);
* weighted law: the rate D^m of the time-weighted energy is nonpositive
  and the accumulated weighted energy is nonincreasing (uniform meshes,
  integer-point schemes only).

Tolerances are relative to max(1, |E^0|): the laws are exact inequalities
up to solver residuals and roundoff in O(n)-term sums, and 1e-10 leaves a
wide margin over both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import TimeMesh, WeightSequence, apply_frac_derivative

LAW_TOL_FACTOR = 1e-10
EVENT_TOL_FACTOR = 1e-12
CSV_COLUMNS = ("step", "t", "E", "E_modified", "fracDE", "D_m", "E_weighted", "max_abs", "mean")

_INTEGER_SCHEMES = ("stabilized_l1", "sav1")
_HALF_SCHEMES = ("l1sav",)


def _limit_integer_weights(n: int) -> np.ndarray:
    w = np.zeros(n)
    w[0] = 1.0
    return w


def frac_derivative_of_energy(energy_history, weights: WeightSequence) -> float:
    """Discrete Caputo derivative of a scalar energy history."""
    return apply_frac_derivative(np.asarray(energy_history, dtype=float), weights)


def weighted_energy_rate(energy_history, alpha: float, mesh: TimeMesh) -> float:
    """Rate D^m of the discrete weighted energy at the final index.

    D^m = (1 / (Gamma(alpha) t_m)) sum_k t_k^alpha b_{m-k} (E^k - E^{k-1})/dt.
    Only defined on uniform meshes.
    """
    if not mesh.is_uniform:
        raise ValueError("the weighted energy rate is defined on uniform meshes only")
    e = np.asarray(energy_history, dtype=float)
    m = e.size - 1
    if m < 1:
        raise ValueError("need at least two energy values")
    if m > mesh.num_steps:
        raise ValueError("energy history longer than the mesh")
    dt = mesh.uniform_dt()
    if alpha == 1.0:
        b = _limit_integer_weights(m)
    else:
        from .kernels import l1_weights_uniform

        b = l1_weights_uniform(alpha, dt, m).values
    t = mesh.points[1 : m + 1]
    rates = np.diff(e) / dt
    return float(np.dot(t**alpha * b[::-1], rates) / (math.gamma(alpha) * t[-1]))


@dataclass
class EnergyTrace:
    """Per-step record of energies and derived diagnostics.

    ``energy`` is the classical energy; ``energy_modified`` is present for
    auxiliary-variable runs and is the sequence the laws are asserted on
    there.  Columns that are not defined for a run (weighted law on a
    nonuniform mesh, for instance) hold NaN.
    """

    t: np.ndarray
    energy: np.ndarray
    energy_modified: np.ndarray | None
    frac_rate: np.ndarray
    weighted_rate: np.ndarray
    weighted_energy: np.ndarray
    max_abs: np.ndarray
    mean: np.ndarray
    alpha: float
    scheme: str
    uniform: bool
    dt: float

    @property
    def half_point(self) -> bool:
        return self.scheme in _HALF_SCHEMES

    @property
    def law_energy(self) -> np.ndarray:
        return self.energy if self.energy_modified is None else self.energy_modified

    @property
    def law_tol(self) -> float:
        return LAW_TOL_FACTOR * max(1.0, abs(float(self.law_energy[0])))

    def __len__(self) -> int:
        return self.t.size


def _frac_rate_column(e: np.ndarray, alpha: float, dt: float, half: bool) -> np.ndarray:
    from .kernels import l1_half_weights_uniform, l1_weights_uniform

    n = e.size - 1
    out = np.full(n + 1, np.nan)
    de = np.diff(e) / dt
    if alpha == 1.0:
        out[1:] = de
        return out
    if half:
        bt = l1_half_weights_uniform(alpha, dt, n).values if n else np.empty(0)
        for m in range(1, n + 1):
            out[m] = float(np.dot(bt[:m][::-1], de[:m]))
    else:
        b = l1_weights_uniform(alpha, dt, n).values if n else np.empty(0)
        for m in range(1, n + 1):
            out[m] = float(np.dot(b[:m][::-1], de[:m]))
    return out


def _weighted_columns(e: np.ndarray, alpha: float, t: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    from .kernels import l1_weights_uniform

    n = e.size - 1
    rate = np.full(n + 1, np.nan)
    acc = np.full(n + 1, np.nan)
    acc[0] = e[0]
    if n == 0:
        return rate, acc
    if alpha == 1.0:
        b = _limit_integer_weights(n)
    else:
        b = l1_weights_uniform(alpha, dt, n).values
    de = np.diff(e) / dt
    talpha = t[1:] ** alpha
    ginv = 1.0 / math.gamma(alpha)
    for m in range(1, n + 1):
        rate[m] = ginv / t[m] * float(np.dot(talpha[:m] * b[:m][::-1], de[:m]))
    acc[1:] = e[0] + dt * np.cumsum(rate[1:])
    return rate, acc


def build_trace(
    mesh: TimeMesh,
    energy,
    max_abs,
    mean,
    alpha: float,
    scheme: str,
    energy_modified=None,
) -> EnergyTrace:
    """Assemble an :class:`EnergyTrace` with all law columns filled in.

    ``energy`` etc. cover steps 0..n of the mesh.  On nonuniform meshes
    the rate columns are left NaN (only boundedness applies there).
    """
    e = np.asarray(energy, dtype=float)
    npts = e.size
    t = mesh.points[:npts].copy()
    emod = None if energy_modified is None else np.asarray(energy_modified, dtype=float)
    law_e = e if emod is None else emod
    uniform = mesh.is_uniform
    if uniform:
        dt = mesh.uniform_dt()
        frac = _frac_rate_column(law_e, alpha, dt, half=scheme in _HALF_SCHEMES)
        wrate, wacc = _weighted_columns(law_e, alpha, t, dt)
    else:
        dt = math.nan
        frac = np.full(npts, np.nan)
        wrate = np.full(npts, np.nan)
        wacc = np.full(npts, np.nan)
    return EnergyTrace(
        t=t,
        energy=e,
        energy_modified=emod,
        frac_rate=frac,
        weighted_rate=wrate,
        weighted_energy=wacc,
        max_abs=np.asarray(max_abs, dtype=float),
        mean=np.asarray(mean, dtype=float),
        alpha=alpha,
        scheme=scheme,
        uniform=uniform,
        dt=dt,
    )


@dataclass
class BoundednessReport:
    ok: bool
    tol: float
    max_excess: float
    worst_step: int


def boundedness_check(trace: EnergyTrace) -> BoundednessReport:
    """Assert E^n <= E^0 within the run tolerance on the law energy."""
    e = trace.law_energy
    excess = e - e[0]
    worst = int(np.argmax(excess))
    tol = trace.law_tol
    return BoundednessReport(bool(excess[worst] <= tol), tol, float(excess[worst]), worst)


def monotonicity_events(trace: EnergyTrace, tol: float | None = None) -> list[int]:
    """Steps n where the law energy increased, E^{n+1} > E^n.

    Informational: local increases can coexist with boundedness.  ``tol``
    suppresses pure roundoff; it defaults to a tiny multiple of |E^0|.
    """
    e = trace.law_energy
    if tol is None:
        tol = EVENT_TOL_FACTOR * max(1.0, abs(float(e[0])))
    return [int(n) for n in np.nonzero(np.diff(e) > tol)[0]]


@dataclass
class LawSummary:
    """Pass/fail of every law that applies to a run; None means not
    applicable for this scheme/mesh combination."""

    boundedness: bool
    fractional_law: bool | None
    weighted_law: bool | None
    weighted_energy_monotone: bool | None
    events: list[int] = field(default_factory=list)
    tol: float = math.nan

    @property
    def passed(self) -> bool:
        checks = (self.boundedness, self.fractional_law, self.weighted_law, self.weighted_energy_monotone)
        return all(c for c in checks if c is not None)


def evaluate_energy_laws(trace: EnergyTrace) -> LawSummary:
    tol = trace.law_tol
    bounded = boundedness_check(trace).ok
    frac_ok = None
    weighted_ok = None
    weighted_monotone = None
    if trace.uniform:
        frac_ok = bool(np.all(trace.frac_rate[1:] <= tol))
        if trace.scheme in _INTEGER_SCHEMES:
            weighted_ok = bool(np.all(trace.weighted_rate[1:] <= tol / trace.dt))
            weighted_monotone = bool(np.all(np.diff(trace.weighted_energy) <= tol))
    return LawSummary(
        boundedness=bounded,
        fractional_law=frac_ok,
        weighted_law=weighted_ok,
        weighted_energy_monotone=weighted_monotone,
        events=monotonicity_events(trace),
        tol=tol,
    )


def write_csv(trace: EnergyTrace, path) -> None:
    emod = trace.energy_modified
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for n in range(len(trace)):
            row = (
                str(n),
                repr(float(trace.t[n])),
                repr(float(trace.energy[n])),
                "nan" if emod is None else repr(float(emod[n])),
                repr(float(trace.frac_rate[n])),
                repr(float(trace.weighted_rate[n])),
                repr(float(trace.weighted_energy[n])),
                repr(float(trace.max_abs[n])),
                repr(float(trace.mean[n])),
            )
            fh.write(",".join(row) + "\n")


def read_csv(path) -> dict[str, np.ndarray]:
    """Columns of an energy-trace CSV, keyed by header name."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected energy CSV columns {header}")
    return {name: data[:, k] for k, name in enumerate(header)}
