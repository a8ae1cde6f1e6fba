"""Scenario execution: initial data, runs, records and the epsilon sweep.

Every run is deterministic: the same configuration produces bit-identical
``records.csv`` and checkpoints.  Scalar records are written with 17
significant digits (lossless for doubles).

The sweep computes one limit trajectory first and evaluates every kinetic
run against the same stored snapshots, then writes ``manifest.json`` with
the per-epsilon summaries and the fitted slope of ``log sup-ME`` versus
``log eps``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint as ckpt
from .config import ScenarioConfig, default_dt, write_resolved
from .core import (RECORD_COLUMNS, DiagnosticsRecord, DistributionField,
                   EMState, LimitState, PerpGrid, PlasmaParams,
                   SpectralCalculus, VelGrid, kinetic_energy, number_density)
from .diagnostics import (csiszar_kullback_check, dissipation, free_energy,
                          kinetic_relative_entropy, modulated_energy)
from .errors import ParameterError, PositivityError
from .fieldsolve import gauss_residual, reconstruct_b1, solve_poisson
from .kinetic import KineticStepper, StepperOptions
from .limit import drift_velocity, flux_equivalence_residual, limit_step


# ---------------------------------------------------------------------------
# construction of parameters and well-prepared data
# ---------------------------------------------------------------------------

def build_grids(cfg: ScenarioConfig):
    g = cfg.grid
    return PerpGrid(g.length, g.n1, g.n2), VelGrid(g.vmax, g.nv)


def build_params(cfg: ScenarioConfig, grid: PerpGrid, eps: float | None = None) -> PlasmaParams:
    p = cfg.params
    x1, x2 = grid.nodes()
    wave = np.cos(2.0 * np.pi * x1 / grid.length) * np.ones_like(x2)
    b_ext = p.b0 * (1.0 + p.b_ripple * wave)
    if cfg.initial.family == "equilibrium":
        d_bg = p.d0 * np.ones((grid.n1, grid.n2))
    else:
        d_bg = p.d0 * (1.0 + p.d_ripple * wave)
    return PlasmaParams(q=p.q, m=p.m, sigma=p.sigma, tau=p.tau, eps0=p.eps0,
                        mu0=p.mu0, eps=eps if eps is not None else p.eps,
                        grid=grid, b_ext=b_ext, d_background=d_bg)


def initial_concentration(cfg: ScenarioConfig, params: PlasmaParams) -> np.ndarray:
    """Concentration of the well-prepared family; exactly neutral discretely."""
    grid = params.grid
    x1, x2 = grid.nodes()
    if cfg.initial.family == "equilibrium":
        return params.d_background.copy()
    a = cfg.initial.amplitude
    mode = (np.cos(2.0 * np.pi * x1 / grid.length)
            * np.cos(2.0 * np.pi * x2 / grid.length))
    return params.d_background * (1.0 + a * mode)


def build_kinetic_initial(cfg: ScenarioConfig, params: PlasmaParams, vgrid: VelGrid):
    """Well-prepared kinetic data: ``f0 = n0(x) M(v)`` with the field from the
    Poisson problem and no initial magnetic perturbation.

    The Maxwellian profile is normalized by its own midpoint quadrature so
    the discrete concentration of ``f0`` equals ``n0`` to round-off, which
    makes the discrete neutrality condition exact.
    """
    grid = params.grid
    n0 = initial_concentration(cfg, params)
    M = vgrid.maxwellian_discrete(params.sigma)
    f0 = DistributionField(grid, vgrid, n0[:, :, None, None, None] * M[None, None])
    rho = params.q * (number_density(f0) - params.d_background)
    calc = SpectralCalculus(grid)
    E0 = solve_poisson(rho, params, calc).E
    em0 = EMState(grid, E0, grid.zeros_vector())
    return f0, em0


def build_limit_initial(cfg: ScenarioConfig, params: PlasmaParams) -> LimitState:
    grid = params.grid
    n0 = initial_concentration(cfg, params)
    calc = SpectralCalculus(grid)
    E0 = solve_poisson(params.q * (n0 - params.d_background), params, calc).E
    return LimitState(grid, n0, E0, grid.zeros(), 0.0)


def stepper_options(cfg: ScenarioConfig) -> StepperOptions:
    s = cfg.solver
    return StepperOptions(interpolation=s.interpolation, transport=s.transport,
                          monotone=s.monotone,
                          collision_theta=s.collision_theta,
                          mollify_delta=s.mollify_delta,
                          picard_tol=s.picard_tol,
                          picard_max_iter=s.picard_max_iter)


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

def format_records_csv(records) -> str:
    lines = [",".join(RECORD_COLUMNS)]
    for rec in records:
        lines.append(",".join(format(v, ".17g") for v in rec.as_row()))
    return "\n".join(lines) + "\n"


def write_records_csv(path: str, records):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(format_records_csv(records))


@dataclass
class LimitReference:
    """Frozen limit trajectory the sweep evaluates every run against."""

    times: list
    states: list          # LimitState snapshots, b1 filled in

    def at(self, t: float) -> LimitState:
        k = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ParameterError(f"no limit snapshot at t={t}")
        return self.states[k]


def kinetic_record(stepper: KineticStepper, params: PlasmaParams,
                   reference: LimitReference | None, calc: SpectralCalculus,
                   vgrid: VelGrid) -> DiagnosticsRecord:
    """Assemble one diagnostics row from the realized stepper state."""
    stepper.realize()
    f, em = stepper.f, stepper.em
    n = number_density(f)
    rho = params.q * (n - params.d_background)
    gauss = gauss_residual(em, rho, params, calc)
    M_d = vgrid.maxwellian_discrete(params.sigma)

    ck_margin = None
    if reference is not None:
        lim = reference.at(f.t)
        mod = modulated_energy(n, em.E, em.B, lim, params)
        ref_n = lim.n
        lhs, rhs = csiszar_kullback_check(n, lim.n, params.grid.cell_area)
        ck_margin = float(lhs - rhs)
    else:
        mod = 0.0
        ref_n = n
    l1 = float(np.abs(f.values - ref_n[:, :, None, None, None] * M_d[None, None]).sum()) \
        * f.phase_volume

    try:
        flux_res = flux_equivalence_residual(np.maximum(n, 1e-10), em.E, params, calc)
    except PositivityError:
        flux_res = 0.0

    rec = DiagnosticsRecord(
        t=f.t, eps=params.eps, mass=f.mass(),
        kinetic_energy=kinetic_energy(f),
        field_energy=em.field_energy(params),
        free_energy=free_energy(f, em, params),
        entropy_dissipation=dissipation(f, params),
        modulated_energy=mod,
        kinetic_relative_entropy=kinetic_relative_entropy(f, params),
        l1_distance=l1,
        gauss_residual=gauss,
        flux_equivalence_residual=flux_res,
    )
    rec.validate()
    rec.ck_margin = ck_margin   # side channel for the sweep, not a CSV column
    return rec


def _record_steps(n_steps: int, cadence: int):
    if n_steps == 0:
        return [0]
    stride = max(1, n_steps // cadence)
    marks = list(range(0, n_steps + 1, stride))
    if marks[-1] != n_steps:
        marks.append(n_steps)
    return marks


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

def run_kinetic(cfg: ScenarioConfig, eps: float | None = None,
                out_dir: str | None = None,
                reference: LimitReference | None = None):
    """Run the kinetic solver to the horizon, emitting records at cadence.

    Returns ``(records, stepper)``; when ``out_dir`` is set, writes
    ``records.csv`` and a final checkpoint there.
    """
    grid, vgrid = build_grids(cfg)
    params = build_params(cfg, grid, eps)
    f0, em0 = build_kinetic_initial(cfg, params, vgrid)
    stepper = KineticStepper(f0, em0, params, stepper_options(cfg))
    calc = stepper.calc

    dt = default_dt(cfg)
    n_steps = int(round(cfg.time.t_final / dt)) if cfg.time.t_final > 0 else 0
    marks = set(_record_steps(n_steps, cfg.time.cadence))

    records = [kinetic_record(stepper, params, reference, calc, vgrid)]
    for step in range(1, n_steps + 1):
        if cfg.solver.mode == "picard":
            stepper.picard_cycle(dt, cfg.solver.mollify_delta)
        else:
            stepper.strang_step(dt)
        if step in marks:
            records.append(kinetic_record(stepper, params, reference, calc, vgrid))

    stepper.realize()
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_records_csv(os.path.join(out_dir, "records.csv"), records)
        ckpt.save_kinetic(os.path.join(out_dir, "checkpoint"), stepper.f, stepper.em, params)
    return records, stepper


def limit_record(state: LimitState, params: PlasmaParams, calc: SpectralCalculus) -> DiagnosticsRecord:
    p = params
    area = state.grid.cell_area
    n = state.n
    safe_n = np.maximum(n, 1e-30)
    entropy = p.sigma * float((n * np.log(safe_n)).sum()) * area
    e_energy = p.eps0 / (2 * p.m) * float((state.E ** 2).sum()) * area
    rho = p.q * (n - p.d_background)
    rec = DiagnosticsRecord(
        t=state.t, eps=p.eps, mass=state.mass(),
        kinetic_energy=0.0, field_energy=e_energy,
        free_energy=entropy + e_energy,
        entropy_dissipation=0.0, modulated_energy=0.0,
        kinetic_relative_entropy=0.0, l1_distance=0.0,
        gauss_residual=gauss_residual(EMState(state.grid, state.E, state.grid.zeros_vector(),
                                              state.t), rho, p, calc),
        flux_equivalence_residual=flux_equivalence_residual(
            np.maximum(n, 1e-10), state.E, p, calc),
    )
    rec.validate()
    return rec


def run_limit(cfg: ScenarioConfig, out_dir: str | None = None):
    """Run the limit solver; returns ``(records, reference)`` where the
    reference carries the ``(n, E, b1)`` snapshots at record cadence.

    ``b1`` snapshots are reconstructed after the run from a second-order
    finite difference of the stored electric-field series (centered inside,
    one-sided at the ends).
    """
    grid, _ = build_grids(cfg)
    params = build_params(cfg, grid)
    state = build_limit_initial(cfg, params)
    calc = SpectralCalculus(grid)

    dt = default_dt(cfg)
    n_steps = int(round(cfg.time.t_final / dt)) if cfg.time.t_final > 0 else 0

    # honor the drift CFL with the initial field (the drift hardly changes)
    V = drift_velocity(state.n, state.E, params, calc).total
    vmax_drift = max(float(np.max(np.abs(V[0]))) / grid.h1,
                     float(np.max(np.abs(V[1]))) / grid.h2)
    if n_steps > 0 and dt * vmax_drift > 0.9:
        raise ParameterError(
            f"limit dt {dt:.3e} violates the drift CFL; need <= {0.9 / vmax_drift:.3e}")

    marks = set(_record_steps(n_steps, cfg.time.cadence))
    records = [limit_record(state, params, calc)]
    snap_times = [state.t]
    snap_states = [state.copy()]
    for step in range(1, n_steps + 1):
        state = limit_step(state, dt, params, calc, cfg.solver.limiter)
        if step in marks:
            records.append(limit_record(state, params, calc))
            snap_times.append(state.t)
            snap_states.append(state.copy())

    # second pass: reconstruct b1 per snapshot from the E series
    if cfg.solver.b1_refresh and len(snap_states) >= 3:
        E_series = [s.E for s in snap_states]
        for k, s in enumerate(snap_states):
            if k == 0:
                dt_rec = snap_times[1] - snap_times[0]
                dtE = (E_series[1] - E_series[0]) / dt_rec if len(E_series) > 1 else 0 * s.E
                if len(E_series) > 2:
                    dt2 = snap_times[2] - snap_times[0]
                    dtE = (-3 * E_series[0] + 4 * E_series[1] - E_series[2]) / dt2
            elif k == len(snap_states) - 1:
                dt2 = snap_times[k] - snap_times[k - 2]
                dtE = (3 * E_series[k] - 4 * E_series[k - 1] + E_series[k - 2]) / dt2
            else:
                dtE = (E_series[k + 1] - E_series[k - 1]) / (snap_times[k + 1] - snap_times[k - 1])
            s.b1 = reconstruct_b1(np.maximum(s.n, 1e-10), s.E, dtE, params, calc)

    reference = LimitReference(times=snap_times, states=snap_states)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_records_csv(os.path.join(out_dir, "records.csv"), records)
        ckpt.save_limit(os.path.join(out_dir, "checkpoint"), state, params)
        for k, s in enumerate(snap_states):
            ckpt.save_limit(os.path.join(out_dir, f"snapshot_{k:04d}"), s, params)
    return records, reference


def _fit_slope(eps_list, sup_me):
    """Least-squares slope of log(sup ME) against log(eps)."""
    x = np.log(np.asarray(eps_list, dtype=float))
    y = np.log(np.maximum(np.asarray(sup_me, dtype=float), 1e-300))
    if x.size < 2:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


def run_epsilon_sweep(cfg: ScenarioConfig, out_dir: str | None = None):
    """Run the limit reference once, then one kinetic run per epsilon.

    The manifest records, per epsilon, the sup over time of the modulated
    energy and of the kinetic relative entropy, the time-integrated velocity
    dissipation divided by ``eps tau``, and the worst Csiszar-Kullback
    margin; plus the fitted slope of the modulated-energy envelope.
    """
    if not cfg.sweep.epsilons:
        raise ParameterError("sweep: epsilon list is empty")
    out_dir = out_dir or cfg.output.directory
    os.makedirs(out_dir, exist_ok=True)
    write_resolved(cfg, os.path.join(out_dir, "resolved-config.toml"))

    manifest = {"epsilons": list(cfg.sweep.epsilons), "complete": False,
                "per_eps": [], "limit_dir": "limit"}
    path = os.path.join(out_dir, "manifest.json")
    try:
        _, reference = run_limit(cfg, os.path.join(out_dir, "limit"))
        for eps in cfg.sweep.epsilons:
            sub = os.path.join(out_dir, f"eps_{eps:g}")
            records, _ = run_kinetic(cfg, eps=eps, out_dir=sub, reference=reference)
            times = [r.t for r in records]
            me = [r.modulated_energy for r in records]
            kre = [r.kinetic_relative_entropy for r in records]
            diss = [r.entropy_dissipation for r in records]
            integrated = float(np.trapezoid(diss, times)) / (eps * cfg.params.tau)
            ck_margin = max(r.ck_margin for r in records)

            manifest["per_eps"].append({
                "eps": eps,
                "sup_modulated_energy": float(np.max(me)),
                "sup_kinetic_relative_entropy": float(np.max(kre)),
                "integrated_dissipation": integrated,
                "ck_max_violation": ck_margin,
                "records_csv": os.path.relpath(os.path.join(sub, "records.csv"), out_dir),
            })
        manifest["fit_slope"] = _fit_slope(
            manifest["epsilons"], [e["sup_modulated_energy"] for e in manifest["per_eps"]])
        manifest["complete"] = True
    finally:
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return manifest
