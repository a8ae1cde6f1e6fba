"""Command-line interface.

Subcommands: ``run-kinetic``, ``run-limit``, ``sweep``, ``check`` (invariant
battery) and ``diag`` (recompute diagnostics from a checkpoint).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np


def _load(args):
    from .config import ScenarioConfig, load_config, validate_config
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = validate_config(ScenarioConfig())
    if getattr(args, "out", None):
        cfg.output.directory = args.out
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "mode", None):
        cfg.solver.mode = args.mode
    return cfg


def cmd_run_kinetic(args):
    from .harness import run_kinetic
    cfg = _load(args)
    eps = args.eps if args.eps is not None else None
    records, _ = run_kinetic(cfg, eps=eps, out_dir=cfg.output.directory)
    last = records[-1]
    print(f"kinetic run complete: t={last.t:g} mass={last.mass:.12g} "
          f"free_energy={last.free_energy:.12g} gauss={last.gauss_residual:.3e}")
    return 0


def cmd_run_limit(args):
    from .harness import run_limit
    cfg = _load(args)
    records, _ = run_limit(cfg, out_dir=cfg.output.directory)
    last = records[-1]
    print(f"limit run complete: t={last.t:g} mass={last.mass:.12g} "
          f"free_energy={last.free_energy:.12g}")
    return 0


def cmd_sweep(args):
    from .harness import run_epsilon_sweep
    cfg = _load(args)
    manifest = run_epsilon_sweep(cfg, out_dir=cfg.output.directory)
    for entry in manifest["per_eps"]:
        print(f"eps={entry['eps']:g}: sup ME={entry['sup_modulated_energy']:.6e} "
              f"sup KRE={entry['sup_kinetic_relative_entropy']:.6e}")
    print(f"fitted slope: {manifest.get('fit_slope', float('nan')):.3f}")
    return 0 if manifest["complete"] else 1


def cmd_diag(args):
    from .checkpoint import load_kinetic, load_limit
    from .core import RECORD_COLUMNS, SpectralCalculus
    from .harness import kinetic_record
    import json
    with open(args.checkpoint + ".json") as fh:
        kind = json.load(fh)["kind"]
    if kind == "kinetic":
        from .kinetic import KineticStepper, StepperOptions
        f, em, params = load_kinetic(args.checkpoint)
        stepper = KineticStepper(f, em, params, StepperOptions())
        rec = kinetic_record(stepper, params, None, stepper.calc, f.vgrid)
    else:
        from .harness import limit_record
        state, params = load_limit(args.checkpoint)
        rec = limit_record(state, params, SpectralCalculus(state.grid))
    print(",".join(RECORD_COLUMNS))
    print(",".join(format(v, ".17g") for v in rec.as_row()))
    return 0


def cmd_check(args):
    """Fast invariant battery; prints one PASS/FAIL line per check."""
    from .core import (DistributionField, PerpGrid, PlasmaParams,
                       SpectralCalculus, VelGrid, rotate_velocity)
    from .diagnostics import ConvexGauge, csiszar_kullback_check
    from .fieldsolve import gauss_project, gauss_residual, solve_poisson
    from .core import EMState
    from .kinetic import step_collision, step_larmor

    rng = np.random.default_rng(args.seed if args.seed is not None else 1234)
    failures = 0

    def check(name, ok):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    vg = VelGrid(6.0, 32)
    check("maxwellian normalization",
          abs(vg.maxwellian(1.0).sum() * vg.cell_volume - 1.0) < 1e-6)
    v = rng.standard_normal(3)
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    check("rotation preserves the norm",
          abs(np.linalg.norm(rotate_velocity(v, 1.3, axis)) - np.linalg.norm(v)) < 1e-12)

    grid = PerpGrid(1.0, 32, 32)
    calc = SpectralCalculus(grid)
    a = calc.resolve(rng.standard_normal((32, 32)))
    u = np.stack([calc.resolve(rng.standard_normal((32, 32))) for _ in range(3)])
    check("div(curl) vanishes", float(np.abs(calc.div(calc.curl(u))).max()) < 1e-10)
    check("curl(grad) vanishes", float(np.abs(calc.curl_z(calc.grad(a))).max()) < 1e-10)

    ones = np.ones((32, 32))
    params = PlasmaParams(q=1, m=1, sigma=1, tau=1, eps0=1, mu0=1, eps=0.5,
                          grid=grid, b_ext=5 * ones, d_background=ones)
    rho = a - a.mean()
    sol = solve_poisson(rho, params, calc)
    em = EMState(grid, sol.E, np.zeros((3, 32, 32)))
    check("poisson satisfies the gauss law",
          gauss_residual(em, rho, params, calc) < 1e-10)
    em2 = gauss_project(EMState.zeros(grid), rho, params, calc)
    check("gauss projection closes", gauss_residual(em2, rho, params, calc) < 1e-10)

    vg16 = VelGrid(6.0, 16)
    M = vg16.maxwellian_discrete(1.0)
    f = DistributionField(grid, vg16, np.broadcast_to(M, (32, 32, 16, 16, 16)).copy())
    fc = step_collision(f.copy(), 1e-2, params)
    check("collision fixes the maxwellian",
          float(np.abs(fc.values - f.values).max()) / float(f.values.max()) < 1e-12)
    dt_rev = 2 * np.pi * params.eps ** 2 / 5.0
    fr = step_larmor(f.copy(), dt_rev, params)
    check("full gyro-revolution is the identity",
          float(np.abs(fr.values - f.values).max()) / float(f.values.max()) < 1e-10)

    ok = True
    for _ in range(20):
        g = rng.random((16, 16)) + 1e-3
        g0 = rng.random((16, 16)) + 1e-3
        lhs, rhs = csiszar_kullback_check(g, g0, 1.0 / 256)
        ok = ok and lhs <= rhs + 1e-12
    check("csiszar-kullback inequality on random pairs", ok)
    check("convex gauge is convex with h(1)=0", ConvexGauge.convexity_check())

    print(f"{'ALL CHECKS PASSED' if failures == 0 else f'{failures} CHECKS FAILED'}")
    return 0 if failures == 0 else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="vmfplab",
        description="Kinetic and drift-limit solvers for a strongly "
                    "magnetized collisional plasma in 2d x 3d phase space")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, eps=False):
        p.add_argument("--config", default=None, help="scenario TOML file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--mode", choices=("strang", "picard"), default=None)
        if eps:
            p.add_argument("--eps", type=float, default=None,
                           help="override the scaling parameter")

    p = sub.add_parser("run-kinetic", help="run the kinetic solver")
    common(p, eps=True)
    p.set_defaults(func=cmd_run_kinetic)

    p = sub.add_parser("run-limit", help="run the drift-limit solver")
    common(p)
    p.set_defaults(func=cmd_run_limit)

    p = sub.add_parser("sweep", help="run the epsilon convergence sweep")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="run the fast invariant battery")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("diag", help="recompute diagnostics from a checkpoint")
    p.add_argument("checkpoint", help="checkpoint base path (without extension)")
    p.set_defaults(func=cmd_diag)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
