"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one PASS line when its criterion holds (visible with
``pytest -s`` or in the captured output).  The expensive trajectories (the
conservation run and the epsilon sweep) are computed once per session and
shared by the criteria that read them.
"""

import numpy as np
import pytest

from vmfplab.config import ScenarioConfig, validate_config
from vmfplab.core import (DistributionField, PerpGrid, PlasmaParams,
                          VelGrid, current_density)
from vmfplab.diagnostics import (csiszar_kullback_check, energy_balance_residual,
                                 kinetic_energy_bound_check)
from vmfplab.harness import (build_grids, build_kinetic_initial, build_params,
                             kinetic_record, run_epsilon_sweep, run_kinetic,
                             run_limit, stepper_options)
from vmfplab.kinetic import KineticStepper, StepperOptions, step_collision
from vmfplab.limit import flux_equivalence_residual

TOL = {
    "mass_drift": 1e-9,
    "div_b": 1e-10,
    "gauss": 1e-8,
    "free_energy_rate": 1e-4,
    "equilibrium_l1": 1e-6,
    "collision_decay": 1e-3,
    "limit_mass": 1e-12,
    "limit_free_energy": 1e-4,
    "flux_order": 2.0,
    "sweep_slope": 0.4,
    "picard_identity": 1e-6,
}


def report(name, ok, detail=""):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# shared expensive runs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def conservation_run():
    """32^2 x 16^3 kinetic run to T = 0.5 at eps = 0.5, dt = 1e-3, with the
    quasi-monotone fitted-cubic interpolation.  Collects per-record probes
    that the record rows do not carry (min f, div B)."""
    cfg = validate_config(ScenarioConfig())
    assert (cfg.grid.n1, cfg.grid.n2, cfg.grid.nv) == (32, 32, 16)
    cfg.params.eps = 0.5
    cfg.time.t_final = 0.5
    cfg.time.dt = 1e-3
    cfg.time.cadence = 50

    grid, vgrid = build_grids(cfg)
    params = build_params(cfg, grid)
    f0, em0 = build_kinetic_initial(cfg, params, vgrid)
    stepper = KineticStepper(f0, em0, params, stepper_options(cfg))
    calc = stepper.calc

    n_steps = 500
    stride = 10
    records = [kinetic_record(stepper, params, None, calc, vgrid)]
    min_f = [float(stepper.f.values.min())]
    div_b = [float(np.abs(calc.div(stepper.em.B)).max())]
    gauss = [records[0].gauss_residual]
    for step in range(1, n_steps + 1):
        stepper.strang_step(cfg.time.dt)
        gauss.append(stepper.last_gauss_residual)
        if step % stride == 0:
            records.append(kinetic_record(stepper, params, None, calc, vgrid))
            min_f.append(float(stepper.f.values.min()))
            div_b.append(float(np.abs(calc.div(stepper.em.B)).max()))
    return {"cfg": cfg, "params": params, "records": records,
            "min_f": min_f, "div_b": div_b, "gauss": gauss}


@pytest.fixture(scope="module")
def sweep_run(tmp_path_factory):
    """Scaling sweep demonstrating convergence toward the drift limit."""
    cfg = validate_config(ScenarioConfig())
    cfg.time.t_final = 0.5
    cfg.time.dt = 2e-3
    cfg.time.cadence = 50
    cfg.solver.interpolation = "spectral"
    cfg.solver.monotone = False
    cfg.sweep.epsilons = (0.4, 0.2, 0.1)
    out = str(tmp_path_factory.mktemp("sweep"))
    cfg.output.directory = out
    manifest = run_epsilon_sweep(cfg, out)
    return {"cfg": cfg, "manifest": manifest, "out": out}


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_conservation_suite(conservation_run):
    records = conservation_run["records"]
    m0 = records[0].mass
    mass_drift = max(abs(r.mass - m0) for r in records) / m0
    worst_min_f = min(conservation_run["min_f"])
    worst_div_b = max(conservation_run["div_b"])
    b_scale = max(max(abs(r.field_energy) for r in records), 1.0)
    worst_gauss = max(conservation_run["gauss"][1:])
    ok = (mass_drift < TOL["mass_drift"] and worst_min_f >= 0.0
          and worst_div_b < TOL["div_b"] * b_scale
          and worst_gauss < TOL["gauss"])
    report("conservation-suite", ok,
           f"mass drift {mass_drift:.2e}, min f {worst_min_f:.2e}, "
           f"div B {worst_div_b:.2e}, gauss {worst_gauss:.2e}")


def test_free_energy_estimate(conservation_run):
    records = conservation_run["records"]
    params = conservation_run["params"]
    acc = 0.0
    prev_v = records[0].free_energy
    worst_rate = -np.inf
    for a, b in zip(records, records[1:]):
        dt = b.t - a.t
        acc += 0.5 * (a.entropy_dissipation + b.entropy_dissipation) * dt \
            / (params.eps * params.tau)
        v = b.free_energy + acc
        worst_rate = max(worst_rate, (v - prev_v) / dt)
        prev_v = v
    ok = worst_rate < TOL["free_energy_rate"]
    report("free-energy-estimate", ok, f"worst dV/dt {worst_rate:+.3e}")


def test_kinetic_energy_bound(conservation_run):
    records = conservation_run["records"]
    params = conservation_run["params"]
    M0 = records[0].mass
    U0 = records[0].kinetic_energy + records[0].field_energy
    ok, margin = kinetic_energy_bound_check(records, params, M0, U0)
    report("kinetic-energy-bound", ok, f"worst margin {margin:+.3e}")


def test_equilibrium_fixed_point():
    cfg = validate_config(ScenarioConfig())
    cfg.initial.family = "equilibrium"
    cfg.grid.n1 = cfg.grid.n2 = 8
    cfg.grid.nv = 32
    cfg.solver.interpolation = "spectral"
    cfg.solver.transport = "spectral"
    cfg.solver.monotone = False
    cfg.time.t_final = 1.0
    cfg.time.dt = 2.5e-3
    cfg.time.cadence = 4
    records, stepper = run_kinetic(cfg)
    grid, vgrid = build_grids(cfg)
    params = build_params(cfg, grid)
    f0, _ = build_kinetic_initial(cfg, params, vgrid)
    l1 = float(np.abs(stepper.f.values - f0.values).sum()) * stepper.f.phase_volume
    ok = l1 < TOL["equilibrium_l1"]
    report("equilibrium-fixed-point", ok, f"L1 drift {l1:.2e} over T=1")

    M0 = records[0].mass
    U0 = records[0].kinetic_energy + records[0].field_energy
    bound_ok, margin = kinetic_energy_bound_check(records, params, M0, U0)
    report("kinetic-energy-bound(equilibrium-run)", bound_ok, f"margin {margin:+.3e}")


def test_collision_oracle():
    # independent oracle: the first moment of the velocity relaxation obeys
    # j(t) = j(0) exp(-t / (eps tau)) exactly; one e-folding
    grid = PerpGrid(1.0, 4, 4)
    vgrid = VelGrid(4.9, 144)
    ones = np.ones((4, 4))
    params = PlasmaParams(q=1, m=1, sigma=1, tau=1, eps0=1, mu0=1, eps=1.0,
                          grid=grid, b_ext=ones, d_background=ones)
    v = vgrid.nodes
    u = 0.3
    M = np.exp(-(((v[:, None, None] - u) ** 2) + v[None, :, None] ** 2
                 + v[None, None, :] ** 2) / 2)
    M /= M.sum() * vgrid.cell_volume
    f = DistributionField(grid, vgrid, np.broadcast_to(M, (4, 4, 144, 144, 144)).copy())
    j0 = current_density(f)[0].mean()
    steps, dt = 50, 0.02
    for _ in range(steps):
        f = step_collision(f, dt, params)
    j1 = current_density(f)[0].mean()
    rel = abs(j1 / j0 / np.exp(-steps * dt) - 1.0)
    ok = rel < TOL["collision_decay"]
    report("collision-oracle", ok, f"decay mismatch {rel:.2e} over one e-folding")


def test_limit_model_conservation():
    cfg = validate_config(ScenarioConfig())
    cfg.grid.n1 = cfg.grid.n2 = 64
    cfg.time.t_final = 1.0
    cfg.time.dt = 1e-3
    cfg.time.cadence = 20
    records, _ = run_limit(cfg)
    m0 = records[0].mass
    fe0 = records[0].free_energy
    mass_drift = max(abs(r.mass - m0) for r in records) / m0
    fe_drift = max(abs(r.free_energy - fe0) for r in records)
    ok = mass_drift < TOL["limit_mass"] and fe_drift < TOL["limit_free_energy"]
    report("limit-model-conservation", ok,
           f"mass {mass_drift:.2e}, free-energy drift {fe_drift:.2e}")


def test_flux_equivalence_refinement():
    rng = np.random.default_rng(11)
    amp_n = 0.2 + 0.3 * rng.random(2)
    amp_e = 0.1 + 0.1 * rng.random(3)
    amp_b = 0.2 + 0.1 * rng.random(2)
    residuals = []
    for n in (32, 64, 128):
        grid = PerpGrid(1.0, n, n)
        x1, x2 = grid.nodes()
        w = 0.025

        def bump(cx, cy):
            d1 = np.minimum(np.abs(x1 - cx), 1 - np.abs(x1 - cx))
            d2 = np.minimum(np.abs(x2 - cy), 1 - np.abs(x2 - cy))
            return np.exp(-(d1 ** 2 + d2 ** 2) / (2 * w ** 2))

        nf = 1.0 + amp_n[0] * bump(0.4, 0.55) + amp_n[1] * bump(0.7, 0.2)
        E = np.zeros((3, n, n))
        E[0] = amp_e[0] * np.sin(2 * np.pi * x1) * np.cos(4 * np.pi * x2) \
            + amp_e[1] * bump(0.2, 0.8)
        E[1] = amp_e[2] * np.cos(4 * np.pi * x1) * np.sin(2 * np.pi * x2)
        b_ext = 4.0 * (1 + amp_b[0] * np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2)
                       + amp_b[1] * bump(0.6, 0.6))
        params = PlasmaParams(q=1.3, m=0.8, sigma=1.1, tau=1, eps0=1, mu0=1,
                              eps=0.5, grid=grid, b_ext=b_ext,
                              d_background=np.ones((n, n)))
        residuals.append(flux_equivalence_residual(nf, E, params))
    o1 = np.log2(residuals[0] / residuals[1])
    o2 = np.log2(residuals[1] / max(residuals[2], 1e-300))
    ok = o1 >= TOL["flux_order"] and o2 >= TOL["flux_order"]
    report("flux-equivalence-refinement", ok,
           f"residuals {[f'{r:.2e}' for r in residuals]}, orders {o1:.1f}, {o2:.1f}")


def test_convergence_sweep(sweep_run):
    manifest = sweep_run["manifest"]
    assert manifest["complete"]
    sup_me = [e["sup_modulated_energy"] for e in manifest["per_eps"]]
    decreasing = all(b < a for a, b in zip(sup_me, sup_me[1:]))
    slope = manifest["fit_slope"]
    ok = decreasing and slope >= TOL["sweep_slope"]
    report("convergence-sweep", ok,
           f"sup ME {[f'{v:.3e}' for v in sup_me]}, slope {slope:.2f}")


def test_kinetic_energy_bound_on_sweep(sweep_run):
    import csv
    import os
    cfg = sweep_run["cfg"]
    grid, _ = build_grids(cfg)
    from vmfplab.core import RECORD_COLUMNS, DiagnosticsRecord
    for entry in sweep_run["manifest"]["per_eps"]:
        params = build_params(cfg, grid, entry["eps"])
        path = os.path.join(sweep_run["out"], entry["records_csv"])
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        records = [DiagnosticsRecord(**{k: float(r[k]) for k in RECORD_COLUMNS})
                   for r in rows]
        M0 = records[0].mass
        U0 = records[0].kinetic_energy + records[0].field_energy
        ok, margin = kinetic_energy_bound_check(records, params, M0, U0)
        report(f"kinetic-energy-bound(eps={entry['eps']})", ok, f"margin {margin:+.3e}")


def test_csiszar_kullback(sweep_run):
    rng = np.random.default_rng(99)
    worst = -np.inf
    for _ in range(100):
        g = rng.random((24, 24)) + 1e-9
        g0 = rng.random((24, 24)) + 1e-9
        lhs, rhs = csiszar_kullback_check(g, g0, 1.0 / 576)
        worst = max(worst, lhs - rhs)
    ok_random = worst <= 1e-12
    sweep_worst = max(e["ck_max_violation"] for e in sweep_run["manifest"]["per_eps"])
    ok_sweep = sweep_worst <= 1e-12
    report("csiszar-kullback", ok_random and ok_sweep,
           f"random worst {worst:+.2e}, sweep worst {sweep_worst:+.2e}")


def test_picard_cross_validation():
    # agreement with the production step at 16^2 x 8^3
    cfg = validate_config(ScenarioConfig())
    cfg.grid.n1 = cfg.grid.n2 = 16
    cfg.grid.nv = 8
    cfg.params.eps = 1.0
    cfg.initial.amplitude = 0.05
    grid, vgrid = build_grids(cfg)
    params = build_params(cfg, grid)
    for dt in (1e-2, 5e-3):
        f0, em0 = build_kinetic_initial(cfg, params, vgrid)
        opts = StepperOptions(interpolation="cubic", monotone=True,
                              picard_tol=1e-12, picard_max_iter=40)
        stA = KineticStepper(f0.copy(), em0.copy(), params, opts)
        stA.strang_step(dt)
        stA.realize()
        stB = KineticStepper(f0.copy(), em0.copy(), params, opts)
        stB.picard_cycle(dt, 0.05)
        l1 = float(np.abs(stA.f.values - stB.f.values).sum()) * stA.f.phase_volume
        ok = l1 < 10 * dt * dt
        report(f"picard-agreement(dt={dt})", ok, f"L1 {l1:.2e} vs {10 * dt * dt:.1e}")

    # the energy identity needs a velocity grid that resolves the moments
    cfg.grid.nv = 32
    grid, vgrid = build_grids(cfg)
    params = build_params(cfg, grid)
    for dt in (1e-2, 5e-3):
        f0, em0 = build_kinetic_initial(cfg, params, vgrid)
        opts = StepperOptions(interpolation="spectral", transport="spectral",
                              monotone=False, picard_tol=1e-12, picard_max_iter=40)
        st = KineticStepper(f0.copy(), em0.copy(), params, opts)
        st.picard_cycle(dt, 0.05)
        res = abs(energy_balance_residual(f0, em0, st.f, st.em, dt, params))
        ok = res < TOL["picard_identity"]
        report(f"picard-energy-identity(dt={dt})", ok, f"residual {res:.2e}")
