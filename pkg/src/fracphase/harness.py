"""Configuration-driven experiment runner and analysis sweeps.

A run is described by a flat key=value config (file and/or keyword
overrides), executed deterministically for a given seed, and emits an
energy-trace CSV, field snapshots, and a JSON summary whose pass/fail
entries mirror the diagnostics-module law checks exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics, models, schemes
from .kernels import TimeMesh, apply_frac_derivative, l1_weights_uniform
from .kernel_matrices import (
    MAX_DENSE_N,
    build_frac_law_matrix,
    build_nonuniform_matrices,
    build_sav_matrices,
    build_weighted_law_matrix,
    check_special_cholesky,
    pd_oracle,
)
from .models import ModelKind, ModelSpec
from .schemes import SchemeState, graded_mesh, stepper_for
from .spectral import Field2D, Grid2D, load_snapshot, save_snapshot

SCHEMES = ("stabilized_l1", "sav1", "l1sav")
MESH_KINDS = ("uniform", "graded", "file")
WEIGHT_MATRIX_REL_TOL = 1e-13

PRESETS: dict[str, dict] = {
    # Shrinking flower interface, maximum-bound regime.
    "ac_flower": dict(
        model="ac", scheme="stabilized_l1", epsilon=0.1, gamma=1.0, stab=2.0,
        nx=128, ny=128, lx=2.0, ly=2.0, dt=0.01, nsteps=1000, ic="flower",
    ),
    # Spinodal decomposition from seeded uniform noise.
    "ch_random": dict(
        model="ch", scheme="stabilized_l1", epsilon=0.1, gamma=0.1, stab=4.0,
        l_cap=8.0, nx=128, ny=128, lx=2.0, ly=2.0, dt=0.01, nsteps=1000,
        ic="random", seed=0,
    ),
    # Thin-film coarsening, half-point auxiliary-variable scheme.
    "mbe_slope": dict(
        model="mbe_slope", scheme="l1sav", epsilon=math.sqrt(0.1), gamma=1.0,
        c0=1.0, nx=128, ny=128, lx=2.0 * math.pi, ly=2.0 * math.pi,
        dt=0.01, nsteps=1000, ic="mbe_sines",
    ),
    # Same model on a graded mesh clustering steps near t = 0.
    "mbe_slope_graded": dict(
        model="mbe_slope", scheme="l1sav", epsilon=math.sqrt(0.1), gamma=1.0,
        c0=1.0, nx=128, ny=128, lx=2.0 * math.pi, ly=2.0 * math.pi,
        mesh="graded", mesh_n=500, mesh_r=1.2, mesh_t=10.0, ic="mbe_sines",
    ),
}


@dataclass
class RunConfig:
    model: str = "ac"
    scheme: str = "stabilized_l1"
    alpha: float = 0.5
    mesh: str = "uniform"
    dt: float = 0.01
    nsteps: int = 100
    mesh_n: int = 100
    mesh_r: float = 1.2
    mesh_t: float = 1.0
    mesh_file: str | None = None
    nx: int = 128
    ny: int = 128
    lx: float = 2.0
    ly: float = 2.0
    epsilon: float = 0.1
    gamma: float = 1.0
    stab: float | None = None
    l_cap: float = 8.0
    c0: float = 1.0
    ic: str = "flower"
    seed: int = 0
    out: str | None = None
    snapshots: int = 10
    dealias: bool = False
    history_mem_limit: int | None = None

    def validate(self) -> "RunConfig":
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.mesh not in MESH_KINDS:
            raise ValueError(f"unknown mesh kind {self.mesh!r}; choose from {MESH_KINDS}")
        ModelKind(self.model)
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.scheme == "sav1" and self.mesh != "uniform":
            raise ValueError("the first-order auxiliary-variable scheme needs a uniform mesh")
        if self.scheme == "stabilized_l1" and self.model == "mbe_slope":
            raise ValueError("the slope-selection model is integrated by auxiliary-variable schemes only")
        if self.snapshots < 0:
            raise ValueError("snapshot count must be nonnegative")
        return self


_BOOL_KEYS = {"dealias"}
_INT_KEYS = {"nsteps", "mesh_n", "nx", "ny", "seed", "snapshots", "history_mem_limit"}
_FLOAT_KEYS = {"alpha", "dt", "mesh_r", "mesh_t", "lx", "ly", "epsilon", "gamma", "stab", "l_cap", "c0"}


def _coerce(key: str, value):
    if value is None or not isinstance(value, str):
        return value
    if key in _BOOL_KEYS:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean config value {value!r} for {key}")
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    return value


def load_config_file(path) -> dict:
    """Flat key=value file; blank lines and '#' comments are ignored."""
    out: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def make_config(preset: str | None = None, **overrides) -> RunConfig:
    base: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        base.update(PRESETS[preset])
    for key, value in overrides.items():
        if value is None:
            continue
        base[key] = value
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(base) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    coerced = {k: _coerce(k, v) for k, v in base.items()}
    return RunConfig(**coerced).validate()


def build_grid(config: RunConfig) -> Grid2D:
    return Grid2D(config.nx, config.ny, config.lx, config.ly, dealias=config.dealias)


def build_mesh(config: RunConfig) -> TimeMesh:
    if config.mesh == "uniform":
        return TimeMesh.uniform(config.dt, config.nsteps)
    if config.mesh == "graded":
        return graded_mesh(config.mesh_n, config.mesh_r, config.mesh_t)
    if config.mesh_file is None:
        raise ValueError("mesh=file needs mesh_file")
    return TimeMesh(np.loadtxt(config.mesh_file))


def build_model(config: RunConfig) -> ModelSpec:
    return ModelSpec(
        kind=ModelKind(config.model),
        epsilon=config.epsilon,
        gamma=config.gamma,
        stab=config.stab,
        l_cap=config.l_cap,
        c0=config.c0,
    )


# initial conditions ---------------------------------------------------------
def ic_flower(grid: Grid2D, epsilon: float) -> np.ndarray:
    """tanh profile of a six-petal interface in polar coordinates about the
    origin; values stay strictly inside (-1, 1).

    The displacement from the origin uses the minimum periodic image, so
    the profile is continuous across the periodic boundaries while being
    pointwise identical to the plain polar form everywhere the petal
    structure lives.
    """
    xx, yy = grid.meshgrid()
    dx = xx - grid.lx * np.round(xx / grid.lx)
    dy = yy - grid.ly * np.round(yy / grid.ly)
    r = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    arg = (2.0 * r / 3.0 - 0.25 - (1.0 + np.cos(6.0 * theta)) / 16.0) / (2.0 * epsilon)
    return np.tanh(arg)


def ic_random_uniform(grid: Grid2D, seed: int) -> np.ndarray:
    """i.i.d. uniform values on [-1, 1] from a seeded PCG64 generator."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=grid.shape)


def ic_mbe_sines(grid: Grid2D) -> np.ndarray:
    xx, yy = grid.meshgrid()
    return 0.1 * (np.sin(3.0 * xx) * np.sin(2.0 * yy) + np.sin(5.0 * xx) * np.sin(5.0 * yy))


def initial_field(config: RunConfig, grid: Grid2D) -> np.ndarray:
    ic = config.ic
    if ic == "flower":
        return ic_flower(grid, config.epsilon)
    if ic == "random":
        return ic_random_uniform(grid, config.seed)
    if ic == "mbe_sines":
        return ic_mbe_sines(grid)
    if ic.startswith("constant:"):
        return np.full(grid.shape, float(ic.split(":", 1)[1]))
    if ic.startswith("snapshot:"):
        f, _ = load_snapshot(ic.split(":", 1)[1], grid)
        return f.values
    raise ValueError(f"unknown initial condition {ic!r}")


# simulation ------------------------------------------------------------------
@dataclass
class RunResult:
    config: RunConfig
    state: SchemeState
    trace: diagnostics.EnergyTrace
    laws: diagnostics.LawSummary
    artifacts: dict[str, str] = field(default_factory=dict)


def simulate(config: RunConfig) -> RunResult:
    """Advance the configured scheme over the whole mesh, recording the
    energy trace and evaluating every applicable energy law."""
    config.validate()
    grid = build_grid(config)
    mesh = build_mesh(config)
    model = build_model(config)
    phi0 = initial_field(config, grid)
    sav = config.scheme in ("sav1", "l1sav")
    state = SchemeState.initialize(
        grid, mesh, config.alpha, phi0, model=model, sav=sav,
        mem_limit=config.history_mem_limit,
    )
    step = stepper_for(config.scheme, mesh.is_uniform)

    nsteps = mesh.num_steps
    energy = np.empty(nsteps + 1)
    emod = np.empty(nsteps + 1) if sav else None
    maxabs = np.empty(nsteps + 1)
    meanvals = np.empty(nsteps + 1)

    def record(idx: int) -> None:
        vals = state.phi(idx)
        energy[idx] = models.classical_energy_values(model, grid, vals)
        if sav:
            emod[idx] = models.quadratic_energy_values(model, grid, vals) + state.r_history[idx] ** 2
        maxabs[idx] = grid.max_abs(vals)
        meanvals[idx] = grid.mean(vals)

    record(0)
    for n in range(nsteps):
        step(state, model)
        record(n + 1)

    trace = diagnostics.build_trace(
        mesh, energy, maxabs, meanvals, config.alpha, config.scheme, energy_modified=emod
    )
    laws = diagnostics.evaluate_energy_laws(trace)
    return RunResult(config=config, state=state, trace=trace, laws=laws)


def _snapshot_indices(nsteps: int, count: int) -> list[int]:
    if count <= 0:
        return []
    marks = np.round(np.linspace(0, nsteps, min(count, nsteps) + 1)).astype(int)
    return sorted(set(int(m) for m in marks))


def run(config: RunConfig) -> RunResult:
    """Simulate and write artifacts (energy CSV, snapshots, JSON summary)."""
    if config.out is None:
        raise ValueError("run needs an output directory (config key 'out')")
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    result = simulate(config)
    state, trace, laws = result.state, result.trace, result.laws

    csv_path = outdir / "energy.csv"
    diagnostics.write_csv(trace, csv_path)
    result.artifacts["energy_csv"] = str(csv_path)

    snaps = []
    for idx in _snapshot_indices(state.mesh.num_steps, config.snapshots):
        path = outdir / f"snap_{idx:06d}.dat"
        save_snapshot(path, Field2D(state.grid, state.phi(idx)), float(state.mesh.points[idx]))
        snaps.append(str(path))
    result.artifacts["snapshots"] = snaps

    summary = {
        "config": {k: v for k, v in asdict(config).items() if k != "out"},
        "alpha": config.alpha,
        "E0": float(trace.law_energy[0]),
        "E_final": float(trace.law_energy[-1]),
        "assertions": {
            "boundedness": laws.boundedness,
            "fractional_law": laws.fractional_law,
            "weighted_law": laws.weighted_law,
            "weighted_energy_monotone": laws.weighted_energy_monotone,
        },
        "tolerance": laws.tol,
        "monotonicity_events": laws.events[:200],
        "event_times": [float(trace.t[n + 1]) for n in laws.events[:200]],
        "passed": laws.passed,
    }
    summary_path = outdir / "summary.json"
    summary_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    result.artifacts["summary"] = str(summary_path)
    return result


# kernel-matrix sweep ---------------------------------------------------------
def _sweep_mesh(spec: str, nmax: int, rng: np.random.Generator) -> tuple[str, TimeMesh | None]:
    if spec == "uniform":
        return "uniform", None
    if spec.startswith("graded:"):
        r = float(spec.split(":", 1)[1])
        return f"graded_r{r:g}", graded_mesh(nmax, r, 1.0)
    if spec.startswith("random:"):
        tag = spec.split(":", 1)[1]
        steps = np.exp(rng.uniform(np.log(1e-3), np.log(1.0), size=nmax))
        return f"random_{tag}", TimeMesh(np.concatenate(([0.0], np.cumsum(steps))))
    raise ValueError(f"unknown mesh spec {spec!r}")


def _check_family(mat: np.ndarray) -> tuple[tuple[bool, bool, bool, bool, bool], float]:
    rep = check_special_cholesky(mat, rel_tol=WEIGHT_MATRIX_REL_TOL)
    _, min_eig = pd_oracle(mat)
    return (rep.p1, rep.p2, rep.p3, bool(rep.q1), bool(rep.q2)), min_eig


def sweep_matrices(nmax: int, alphas, mesh_specs=("uniform",), out_path=None, seed: int = 0) -> list[dict]:
    """Condition/PD report, one row per (n, alpha, mesh).

    For the uniform mesh every weight-matrix family is checked and the row
    aggregates them (booleans AND-ed, smallest eigenvalue over families);
    for explicit meshes the two nonuniform families are checked.
    """
    if nmax > MAX_DENSE_N:
        raise ValueError(f"nmax {nmax} exceeds cap {MAX_DENSE_N}")
    rng = np.random.default_rng(seed)
    rows: list[dict] = []
    for spec in mesh_specs:
        kind, mesh = _sweep_mesh(spec, nmax, rng)
        for alpha in alphas:
            for n in range(1, nmax + 1):
                if mesh is None:
                    a_sym, s_conj = build_sav_matrices(n, alpha)
                    family_mats = (
                        build_frac_law_matrix(n, alpha),
                        build_weighted_law_matrix(n, alpha),
                        a_sym,
                        s_conj,
                    )
                else:
                    family_mats = build_nonuniform_matrices(mesh, alpha, n)
                checked = [_check_family(m) for m in family_mats]
                flags = np.array([c[0] for c in checked], dtype=bool)
                rows.append(
                    dict(
                        n=n,
                        alpha=alpha,
                        mesh_kind=kind,
                        P1=bool(flags[:, 0].all()),
                        P2=bool(flags[:, 1].all()),
                        P3=bool(flags[:, 2].all()),
                        Q1=bool(flags[:, 3].all()),
                        Q2=bool(flags[:, 4].all()),
                        min_eig=float(min(c[1] for c in checked)),
                    )
                )
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            fh.write("n,alpha,mesh_kind,P1,P2,P3,Q1,Q2,min_eig\n")
            for row in rows:
                fh.write(
                    f"{row['n']},{row['alpha']!r},{row['mesh_kind']},"
                    f"{int(row['P1'])},{int(row['P2'])},{int(row['P3'])},"
                    f"{int(row['Q1'])},{int(row['Q2'])},{row['min_eig']!r}\n"
                )
    return rows


# convergence studies ----------------------------------------------------------
@dataclass
class ConvergenceResult:
    dts: list[float]
    errors: list[float]
    slope: float


def _fit_slope(dts, errors) -> float:
    return float(np.polyfit(np.log(np.asarray(dts)), np.log(np.asarray(errors)), 1)[0])


def kernel_convergence(alpha: float, dt_list=None, horizon: float = 1.0) -> ConvergenceResult:
    """Truncation order of the integer-point derivative on phi(t) = t^3.

    Errors are measured at t = horizon against the closed-form Caputo
    derivative Gamma(4)/Gamma(4-alpha) t^(3-alpha); the observed slope is
    2 - alpha.
    """
    if dt_list is None:
        dt_list = [0.1 / 2**k for k in range(5)]
    if len(dt_list) < 3:
        raise ValueError("need at least three step sizes")
    exact = math.gamma(4.0) / math.gamma(4.0 - alpha) * horizon ** (3.0 - alpha)
    errors = []
    for dt in dt_list:
        n = round(horizon / dt)
        ts = np.arange(n + 1) * dt
        approx = apply_frac_derivative(ts**3, l1_weights_uniform(alpha, dt, n))
        errors.append(abs(approx - exact))
    return ConvergenceResult(list(dt_list), errors, _fit_slope(dt_list, errors))


def scheme_self_convergence(
    scheme: str,
    model_kind: str,
    alpha: float,
    dt_list,
    horizon: float = 0.4,
    grid_size: int = 32,
    refine: int = 16,
) -> ConvergenceResult:
    """Observed temporal order of a stepper on a smooth small-grid run.

    Each coarse solution is compared at t = horizon against the same
    scheme run with the finest step divided by ``refine``.
    """
    if len(dt_list) < 3:
        raise ValueError("need at least three step sizes")
    dt_list = sorted(dt_list, reverse=True)
    grid = Grid2D(grid_size, grid_size, 2.0, 2.0)
    model = ModelSpec(kind=ModelKind(model_kind), epsilon=0.5, gamma=1.0)
    phi0 = _smooth_modes(grid)
    sav = scheme in ("sav1", "l1sav")
    step = stepper_for(scheme, True)

    def final_field(dt: float) -> np.ndarray:
        nsteps = round(horizon / dt)
        mesh = TimeMesh.uniform(dt, nsteps)
        state = SchemeState.initialize(grid, mesh, alpha, phi0, model=model, sav=sav)
        for _ in range(nsteps):
            step(state, model)
        return state.current.copy()

    ref = final_field(min(dt_list) / refine)
    scale = float(np.sqrt(np.mean(ref**2)))
    errors = []
    for dt in dt_list:
        diff = final_field(dt) - ref
        errors.append(float(np.sqrt(np.mean(diff**2))) / scale)
    return ConvergenceResult(list(dt_list), errors, _fit_slope(dt_list, errors))


def _smooth_modes(grid: Grid2D) -> np.ndarray:
    xx, yy = grid.meshgrid()
    kx = 2.0 * math.pi / grid.lx
    ky = 2.0 * math.pi / grid.ly
    return 0.3 * np.cos(kx * xx) * np.sin(ky * yy) + 0.2 * np.sin(2.0 * kx * xx + ky * yy)
