"""Scalar functionals of the kinetic and limit states.

Entropy-type integrands use the conventions ``0 ln 0 = 0``, ``h(0) = 1`` and
a floor of 1e-30 inside logarithms, so vacuum cells contribute their finite
limits instead of NaNs.  The velocity-gradient flux inside ``dissipation``
reuses the exponential-fitting face coefficients of the collision scheme,
which makes the functional vanish identically on local Maxwellians instead
of leaving an O(h^2) stencil residue.

All functions are read-only over their inputs.
"""

from __future__ import annotations

import numpy as np

from .core import (DistributionField, EMState, LimitState, PlasmaParams,
                   SpectralCalculus, current_density, kinetic_energy,
                   number_density)
from .errors import PositivityError, StateError

LOG_FLOOR = 1e-30


class ConvexGauge:
    """The convex weight ``h(s) = s ln s - s + 1`` with its floor policy."""

    floor = LOG_FLOOR

    @staticmethod
    def h(s):
        s = np.asarray(s, dtype=float)
        return s * np.log(np.maximum(s, ConvexGauge.floor)) - s + 1.0

    @staticmethod
    def convexity_check(samples=None) -> bool:
        """Sampled second differences of h must be nonnegative."""
        s = np.linspace(0.0, 6.0, 301) if samples is None else np.asarray(samples)
        h = ConvexGauge.h(s)
        return bool(np.all(h[:-2] - 2 * h[1:-1] + h[2:] > -1e-12)) and \
            abs(ConvexGauge.h(1.0)) < 1e-15


def free_energy(f: DistributionField, em: EMState, params: PlasmaParams) -> float:
    """``int (sigma ln f + |v|^2/2) f + field energy`` over phase space."""
    vals = f.values
    logpart = np.where(vals > LOG_FLOOR, vals * np.log(np.maximum(vals, LOG_FLOOR)), 0.0)
    entropy = params.sigma * float(logpart.sum()) * f.phase_volume
    return entropy + kinetic_energy(f) + em.field_energy(params)


def _face_flux_bands(vgrid, sigma):
    """Exponential-fitting face coefficients of ``sigma d_v f + v f``."""
    v = vgrid.nodes
    hv = vgrid.hv
    vf = 0.5 * (v[:-1] + v[1:])
    w = vf * hv / sigma
    g = np.where(np.abs(w) > 1e-5, w / np.expm1(np.where(np.abs(w) > 1e-5, w, 1.0)),
                 1.0 - w / 2.0 + w * w / 12.0)
    D = (sigma / hv) * g          # coefficient of -f_j
    A = D + vf                    # coefficient of +f_{j+1}
    return A, D


def dissipation(f: DistributionField, params: PlasmaParams) -> float:
    """``int |sigma grad_v f + v f|^2 / f`` by face quadrature.

    Face fluxes use the same exponential fitting as the collision operator,
    so the integrand is exactly zero on ``n(x) M(v)``; faces where the
    average density is below the floor contribute nothing.
    """
    A, D = _face_flux_bands(f.vgrid, params.sigma)
    vals = f.values
    hv = f.vgrid.hv
    total = 0.0
    for axis in (2, 3, 4):
        g = np.moveaxis(vals, axis, -1)
        flux = A * g[..., 1:] - D * g[..., :-1]
        fbar = 0.5 * (g[..., 1:] + g[..., :-1])
        contrib = np.where(fbar > LOG_FLOOR, flux * flux / np.maximum(fbar, LOG_FLOOR), 0.0)
        total += float(contrib.sum())
    return total * f.phase_volume


def modulated_energy(kin_n, kin_E, kin_B, lim: LimitState, params: PlasmaParams) -> float:
    """Relative entropy of the concentrations plus quadratic field mismatch.

    ``sigma int n h(n_eps/n) + (eps0/2m) int |E_eps - E|^2 +
    (1/2 mu0 m) int |B_eps - eps B1|^2`` with ``B1 = (0, 0, b1)``.
    """
    if float(np.min(lim.n)) < 1e-12:
        raise PositivityError("limit concentration fell below the positivity floor")
    area = lim.grid.cell_area
    ratio = np.asarray(kin_n, dtype=float) / lim.n
    ent = params.sigma * float((lim.n * ConvexGauge.h(ratio)).sum()) * area

    dE = np.asarray(kin_E, dtype=float) - lim.E
    e_term = params.eps0 / (2 * params.m) * float((dE * dE).sum()) * area

    dB = np.array(kin_B, dtype=float, copy=True)
    dB[2] -= params.eps * lim.b1
    b_term = 1.0 / (2 * params.mu0 * params.m) * float((dB * dB).sum()) * area
    return max(ent + e_term + b_term, 0.0)


def kinetic_relative_entropy(f: DistributionField, params: PlasmaParams) -> float:
    """``sigma int n M h(f / (n M))`` with ``n`` the concentration of ``f``.

    Columns with vanishing concentration contribute nothing; vacuum cells
    inside a populated column contribute their limit ``sigma n M``.
    """
    n = number_density(f)
    M = f.vgrid.maxwellian(params.sigma)
    ref = n[:, :, None, None, None] * M[None, None, :, :, :]
    vals = f.values
    # n M h(f/(n M)) = f ln(f/(n M)) - f + n M, with the floor conventions
    safe_ref = np.maximum(ref, LOG_FLOOR)
    integrand = np.where(
        ref > LOG_FLOOR,
        np.where(vals > LOG_FLOOR,
                 vals * (np.log(np.maximum(vals, LOG_FLOOR)) - np.log(safe_ref)) - vals + ref,
                 ref),
        0.0)
    total = params.sigma * float(integrand.sum()) * f.phase_volume
    # the functional is nonnegative; round-off can leave a tiny negative
    return max(total, 0.0)


def csiszar_kullback_check(g, g0, volume_element: float):
    """Both sides of the Csiszar-Kullback inequality for nonnegative fields.

    Returns ``(lhs, rhs)`` with ``lhs = ||g - g0||_1`` and
    ``rhs = 2 max(sqrt(int g0), sqrt(int g)) sqrt(int g0 h(g/g0))``; callers
    assert ``lhs <= rhs``.  The inequality holds for the discrete measure as
    it does for Lebesgue measure.
    """
    g = np.asarray(g, dtype=float)
    g0 = np.asarray(g0, dtype=float)
    lhs = float(np.abs(g - g0).sum()) * volume_element
    mass0 = float(g0.sum()) * volume_element
    mass1 = float(g.sum()) * volume_element
    safe0 = np.maximum(g0, LOG_FLOOR)
    rel = np.where(g0 > LOG_FLOOR, g0 * ConvexGauge.h(g / safe0),
                   np.where(g > LOG_FLOOR,
                            g * (np.log(np.maximum(g, LOG_FLOOR)) - np.log(LOG_FLOOR)), 0.0))
    ent = float(rel.sum()) * volume_element
    rhs = 2.0 * max(np.sqrt(max(mass0, 0.0)), np.sqrt(max(mass1, 0.0))) * np.sqrt(max(ent, 0.0))
    return lhs, rhs


def _quad_field_tension(u, calc: SpectralCalculus):
    """``A(u, u) = u div u - u x curl u`` (divergence of the stress)."""
    divu = calc.div(u)
    curlu = calc.curl(u)
    return u * divu - np.cross(u, curlu, axis=0)


def moment_residual(f_history, em_history, params: PlasmaParams,
                    calc: SpectralCalculus | None = None) -> np.ndarray:
    """Residual vector field of the local momentum law with zero defects.

    Expects three stored time levels ``(t - dt, t, t + dt)`` of both the
    distribution and the field; time derivatives are second-order central.
    A residual at the discretization level is expected on coarse grids; it
    must decay under refinement, not vanish.
    """
    if len(f_history) < 3 or len(em_history) < 3:
        raise StateError("need three stored time levels for the centered derivative")
    f_prev, f_mid, f_next = f_history[-3], f_history[-2], f_history[-1]
    em_prev, em_mid, em_next = em_history[-3], em_history[-2], em_history[-1]
    dt_prev = f_mid.t - f_prev.t
    dt_next = f_next.t - f_mid.t
    if dt_prev <= 0 or dt_next <= 0 or abs(dt_prev - dt_next) > 1e-12 * dt_next:
        raise StateError("history must be equispaced in time")
    dt = dt_next
    calc = calc or SpectralCalculus(params.grid)
    p = params

    n = number_density(f_mid)
    j = current_density(f_mid)
    dj = (current_density(f_next) - current_density(f_prev)) / (2 * dt)

    # div of the kinetic stress including the friction-diffusion part:
    # int (sigma grad_v f + v f) (x) v dv = int v (x) v f dv - sigma n I
    from .core import moments
    _, _, stress, _ = moments(f_mid)
    div_stress = np.zeros((3, p.grid.n1, p.grid.n2))
    for i in range(3):
        div_stress[i] = calc.dx1(stress[0, i]) + calc.dx2(stress[1, i])
    grad_n = calc.grad(n)

    e_mid, b_mid = em_mid.E, em_mid.B
    poynting = np.cross(em_next.E, em_next.B, axis=0) - np.cross(em_prev.E, em_prev.B, axis=0)
    d_poynting = poynting / (2 * dt)

    omega_term = np.zeros_like(j)
    # j x (B_ext e) = (j2 B, -j1 B, 0)
    omega_term[0] = j[1] * p.b_ext
    omega_term[1] = -j[0] * p.b_ext

    residual = (p.eps * dj
                + div_stress - p.sigma * grad_n
                - p.eps0 / p.m * _quad_field_tension(e_mid, calc)
                - p.q / p.m * p.d_background * e_mid
                - 1.0 / (p.m * p.mu0) * _quad_field_tension(b_mid, calc)
                + p.eps0 * p.eps / p.m * d_poynting
                - p.q / (p.m * p.eps) * omega_term
                + 1.0 / p.tau * j)
    return residual


def kinetic_energy_bound_check(record_history, params: PlasmaParams,
                               M0: float, U0: float):
    """Check ``eps (kinetic + field energy)(t) <= eps U0 + (3 sigma/tau) t M0``
    at every stored record; returns ``(holds, worst_margin)``.
    """
    worst = np.inf
    for rec in record_history:
        lhs = params.eps * (rec.kinetic_energy + rec.field_energy)
        rhs = params.eps * U0 + 3.0 * params.sigma / params.tau * rec.t * M0
        worst = min(worst, rhs - lhs)
    if not record_history:
        worst = 0.0
    return bool(worst >= 0.0), float(worst)


def energy_balance_residual(f0: DistributionField, em0: EMState,
                            f1: DistributionField, em1: EMState,
                            dt: float, params: PlasmaParams) -> float:
    """Per-step defect of the kinetic-plus-field energy balance

    ``eps d/dt [int |v|^2/2 f + field] = (3 sigma/tau) M - (1/tau) int |v|^2 f``

    with the trapezoid rule on the right-hand side.  The self-adjointness of
    the mollifier makes the work terms cancel in mollified mode, so the
    residual measures only splitting and quadrature defects.
    """
    ke0, ke1 = kinetic_energy(f0), kinetic_energy(f1)
    u0 = ke0 + em0.field_energy(params)
    u1 = ke1 + em1.field_energy(params)
    mass = f0.mass()
    v2_mid = ke0 + ke1  # trapezoid of int |v|^2 f = 2 * KE
    rhs = (3.0 * params.sigma / params.tau * mass - v2_mid / params.tau) * dt
    return float(params.eps * (u1 - u0) - rhs)
