"""Command-line interface: run experiments, sweep matrices, study orders.

Exit status is 0 only when every assertion the invocation makes passes.
"""

from __future__ import annotations

import argparse
import sys

from . import harness


def _add_run_parser(sub) -> None:
    p = sub.add_parser("run", help="run one configured simulation and write artifacts")
    p.add_argument("--preset", choices=sorted(harness.PRESETS), help="named experiment preset")
    p.add_argument("--config", help="key=value config file; command-line flags override it")
    p.add_argument("--model", choices=("ac", "ch", "mbe_slope", "mbe_noslope"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--scheme", choices=harness.SCHEMES)
    p.add_argument("--dt", type=float)
    p.add_argument("--nsteps", type=int)
    p.add_argument("--mesh", choices=harness.MESH_KINDS)
    p.add_argument("--mesh-n", type=int, dest="mesh_n")
    p.add_argument("--mesh-r", type=float, dest="mesh_r")
    p.add_argument("--mesh-t", type=float, dest="mesh_t")
    p.add_argument("--mesh-file", dest="mesh_file")
    p.add_argument("--grid", help="spatial resolution as NXxNY, e.g. 128x128")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--stab", type=float, help="stabilization constant")
    p.add_argument("--l-cap", type=float, dest="l_cap")
    p.add_argument("--c0", type=float)
    p.add_argument("--ic", help="initial condition: flower | random | mbe_sines | constant:<v> | snapshot:<path>")
    p.add_argument("--seed", type=int)
    p.add_argument("--snapshots", type=int)
    p.add_argument("--dealias", action="store_true", default=None)
    p.add_argument("--out", required=True, help="output directory")


def _run(args) -> int:
    overrides = {}
    if args.config:
        overrides.update(harness.load_config_file(args.config))
    for key in (
        "model", "alpha", "scheme", "dt", "nsteps", "mesh", "mesh_n", "mesh_r",
        "mesh_t", "mesh_file", "epsilon", "gamma", "stab", "l_cap", "c0", "ic",
        "seed", "snapshots", "dealias", "out",
    ):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    if args.grid:
        nx, _, ny = args.grid.partition("x")
        overrides["nx"], overrides["ny"] = int(nx), int(ny)
    config = harness.make_config(preset=args.preset, **overrides)
    result = harness.run(config)
    laws = result.laws
    print(f"wrote {result.artifacts['energy_csv']}")
    for name, ok in (
        ("boundedness", laws.boundedness),
        ("fractional_law", laws.fractional_law),
        ("weighted_law", laws.weighted_law),
        ("weighted_energy_monotone", laws.weighted_energy_monotone),
    ):
        status = "skipped" if ok is None else ("PASS" if ok else "FAIL")
        print(f"{name}: {status}")
    if laws.events:
        print(f"energy increase events at steps {laws.events[:10]}"
              + (" ..." if len(laws.events) > 10 else ""))
    return 0 if laws.passed else 1


def _sweep(args) -> int:
    rows = harness.sweep_matrices(
        args.nmax,
        [float(a) for a in args.alphas.split(",")],
        mesh_specs=args.meshes.split(","),
        out_path=args.out,
        seed=args.seed,
    )
    bad = [r for r in rows if not (r["P1"] and r["P2"] and r["P3"] and r["Q1"] and r["Q2"] and r["min_eig"] > 0)]
    print(f"{len(rows)} rows, {len(bad)} failing" + (f", report in {args.out}" if args.out else ""))
    return 1 if bad else 0


def _convergence(args) -> int:
    dts = [float(d) for d in args.dts.split(",")] if args.dts else None
    if args.target == "kernel":
        res = harness.kernel_convergence(args.alpha, dts, horizon=args.horizon)
    else:
        if dts is None:
            raise SystemExit("scheme studies need --dts")
        res = harness.scheme_self_convergence(
            args.scheme, args.model, args.alpha, dts, horizon=args.horizon,
            grid_size=args.grid_size,
        )
    for dt, err in zip(res.dts, res.errors):
        print(f"dt={dt:<12g} error={err:.6e}")
    print(f"observed order: {res.slope:.4f}")
    if args.expect_order is not None:
        ok = abs(res.slope - args.expect_order) <= args.order_tol
        print(f"expected {args.expect_order} +/- {args.order_tol}: {'PASS' if ok else 'FAIL'}")
        return 0 if ok else 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fracphase",
                                     description="time-fractional phase-field experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_parser(sub)

    p = sub.add_parser("sweep-matrices", help="certify the energy-law matrices over (n, alpha, mesh)")
    p.add_argument("--nmax", type=int, default=50)
    p.add_argument("--alphas", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--meshes", default="uniform",
                   help="comma list: uniform | graded:<r> | random:<tag>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV report path")

    p = sub.add_parser("convergence", help="empirical temporal order studies")
    p.add_argument("--target", choices=("kernel", "scheme"), default="kernel")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--dts", help="comma list of step sizes, largest first")
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--scheme", choices=harness.SCHEMES, default="stabilized_l1")
    p.add_argument("--model", default="ac")
    p.add_argument("--grid-size", type=int, default=32, dest="grid_size")
    p.add_argument("--expect-order", type=float, dest="expect_order")
    p.add_argument("--order-tol", type=float, default=0.2, dest="order_tol")

    args = parser.parse_args(argv)
    if args.command == "run":
        return _run(args)
    if args.command == "sweep-matrices":
        return _sweep(args)
    return _convergence(args)


if __name__ == "__main__":
    sys.exit(main())
