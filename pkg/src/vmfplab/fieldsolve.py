"""Electromagnetic field solvers on the periodic plane.

Contains the electrostatic Poisson solve, the scaled Maxwell stepper (wave
speed ``1/(eps sqrt(mu0 eps0))``), the Gauss-law projection that keeps the
electric field divergence-consistent with the charge density, and the
elliptic reconstruction of the first-order magnetic correction of the drift
limit.

All functions are pure: they never mutate their arguments.  FFT work spaces
are local to each call, so concurrent use is safe.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import EMState, PerpGrid, PlasmaParams, SpectralCalculus
from .errors import ConsistencyError, NeutralityViolation, StabilityError

#: Relative tolerance on the spatial mean of a charge density.
NEUTRALITY_RTOL = 1e-8


@dataclass
class PoissonSolution:
    """Zero-mean potential and its electrostatic field ``E = -grad phi``."""

    phi: np.ndarray
    E: np.ndarray


def _require_neutral(rho, grid: PerpGrid):
    mean = float(np.mean(rho))
    norm = float(np.sqrt(np.mean(rho * rho)))
    # the absolute floor keeps an identically vanishing source (round-off
    # noise only) from tripping the relative test
    if abs(mean) > max(NEUTRALITY_RTOL * norm, 1e-13):
        raise NeutralityViolation(mean, norm)
    return mean


def solve_poisson(rho, params: PlasmaParams, calc: SpectralCalculus | None = None) -> PoissonSolution:
    """Solve ``-eps0 lap(phi) = rho`` on the torus and return ``E = -grad phi``.

    ``rho`` must be mean-free up to ``NEUTRALITY_RTOL`` (torus solvability);
    the mean that is present is discarded by the inversion.
    """
    calc = calc or SpectralCalculus(params.grid)
    params.grid.check_scalar(rho)
    _require_neutral(rho, params.grid)
    phi = calc.inverse_laplacian(np.asarray(rho, dtype=float) / params.eps0)
    E = -calc.grad(phi)
    return PoissonSolution(phi=phi, E=E)


def maxwell_cfl_limit(params: PlasmaParams, c_safety: float = 0.9) -> float:
    """Explicit-mode step limit for the scaled light speed."""
    h = min(params.grid.h1, params.grid.h2)
    return c_safety * params.eps * np.sqrt(params.mu0 * params.eps0) * h / np.pi


def maxwell_step(em: EMState, current, params: PlasmaParams, dt: float,
                 scheme: str = "semi_implicit", c_safety: float = 0.9,
                 calc: SpectralCalculus | None = None) -> EMState:
    """Advance the scaled Maxwell system by one step.

    Solves ``mu0 eps0 eps dE/dt = curl B - mu0 J`` and ``eps dB/dt = -curl E``
    with ``J = current`` held fixed over the step (callers pass a
    time-centered value).  The default scheme is a Crank-Nicolson average of
    the curl terms: unconditionally stable, exactly energy-balanced against
    the ``J . (E_old + E_new)/2`` work term and it keeps ``div B`` constant.
    ``scheme="explicit"`` uses classical RK4 and enforces the CFL limit.
    """
    calc = calc or SpectralCalculus(params.grid)
    params.grid.check_vector(current)
    dt_max = maxwell_cfl_limit(params, c_safety)
    if dt > dt_max:
        if scheme == "explicit":
            raise StabilityError(
                f"dt={dt:.3e} exceeds the explicit light-wave limit {dt_max:.3e}")
        warnings.warn(
            f"dt={dt:.3e} above the light-wave CFL {dt_max:.3e}; the "
            "semi-implicit update stays stable but underresolves the waves")

    ce = 1.0 / (params.mu0 * params.eps0 * params.eps)  # dE/dt = ce curl B + source
    cb = 1.0 / params.eps                               # dB/dt = -cb curl E
    source = -(params.mu0 * ce) * np.asarray(current, dtype=float)

    if scheme == "explicit":
        def rhs(E, B):
            return ce * calc.curl(B) + source, -cb * calc.curl(E)
        k1e, k1b = rhs(em.E, em.B)
        k2e, k2b = rhs(em.E + 0.5 * dt * k1e, em.B + 0.5 * dt * k1b)
        k3e, k3b = rhs(em.E + 0.5 * dt * k2e, em.B + 0.5 * dt * k2b)
        k4e, k4b = rhs(em.E + dt * k3e, em.B + dt * k3b)
        Enew = em.E + dt / 6.0 * (k1e + 2 * k2e + 2 * k3e + k4e)
        Bnew = em.B + dt / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b)
        return EMState(em.grid, Enew, Bnew, em.t + dt)

    if scheme != "semi_implicit":
        raise ValueError(f"unknown maxwell scheme {scheme!r}")

    # Crank-Nicolson in Fourier space.  Eliminating B_new gives, per mode,
    #   (I + a b curlcurl) E_new = E + 2 a curl(B) - a b curlcurl(E) + dt S
    # with curlcurl v = |k|^2 v - k (k.v); the matrix inverts in closed form
    # because the longitudinal part passes through with eigenvalue 1.
    a = 0.5 * dt * ce
    b = 0.5 * dt * cb
    Eh = np.fft.fft2(em.E, axes=(1, 2))
    Bh = np.fft.fft2(em.B, axes=(1, 2))
    Sh = np.fft.fft2(source, axes=(1, 2))
    kvec = np.zeros((3,) + calc.k_sq.shape)
    kvec[0] = calc.k1
    kvec[1] = calc.k2

    def curl_h(u):
        out = np.empty_like(u)
        out[0] = 1j * calc.k2 * u[2]
        out[1] = -1j * calc.k1 * u[2]
        out[2] = 1j * calc.k1 * u[1] - 1j * calc.k2 * u[0]
        return out

    def curlcurl_h(u):
        kdotu = kvec[0] * u[0] + kvec[1] * u[1]
        return calc.k_sq * u - kvec * kdotu

    rhs_h = Eh + 2.0 * a * curl_h(Bh) - a * b * curlcurl_h(Eh) + dt * Sh
    # invert (1 + ab|k|^2) I - ab k k^T : longitudinal eigenvalue is 1
    alpha = 1.0 + a * b * calc.k_sq
    kdotr = kvec[0] * rhs_h[0] + kvec[1] * rhs_h[1]
    long_part = kvec * (kdotr * calc.inv_k_sq)
    Eh_new = long_part + (rhs_h - long_part) / alpha
    Bh_new = Bh - b * curl_h(Eh_new + Eh)

    Enew = np.real(np.fft.ifft2(Eh_new, axes=(1, 2)))
    Bnew = np.real(np.fft.ifft2(Bh_new, axes=(1, 2)))
    return EMState(em.grid, Enew, Bnew, em.t + dt)


def gauss_residual(em: EMState, rho, params: PlasmaParams,
                   calc: SpectralCalculus | None = None) -> float:
    """Relative L2 residual of the Gauss law on the resolved band."""
    calc = calc or SpectralCalculus(params.grid)
    target = calc.resolve(np.asarray(rho, dtype=float)) - float(np.mean(rho))
    r = params.eps0 * calc.div(em.E) - target
    denom = float(np.linalg.norm(target))
    if denom < 1e-14:
        return float(np.linalg.norm(r))
    return float(np.linalg.norm(r)) / denom


def gauss_project(em: EMState, rho, params: PlasmaParams,
                  calc: SpectralCalculus | None = None) -> EMState:
    """Add a gradient to ``E`` so that ``eps0 div E = rho`` discretely.

    Solves ``lap(psi) = rho/eps0 - div E`` and returns the state with
    ``E + grad psi``; the curl of ``E`` is untouched because the correction
    is a pure gradient.
    """
    calc = calc or SpectralCalculus(params.grid)
    params.grid.check_scalar(rho)
    _require_neutral(rho, params.grid)
    defect = np.asarray(rho, dtype=float) / params.eps0 - calc.div(em.E)
    psi = -calc.inverse_laplacian(defect)   # inverse_laplacian solves -lap
    Enew = em.E + calc.grad(psi)
    return EMState(em.grid, Enew, em.B.copy(), em.t)


def reconstruct_b1(n, E, dtE, params: PlasmaParams,
                   calc: SpectralCalculus | None = None,
                   div_rtol: float = 0.05) -> np.ndarray:
    """Reconstruct the third component of the first-order magnetic correction.

    The correction solves ``curl B1 = R`` with ``div B1 = 0`` where
    ``R = mu0 eps0 dtE + mu0 q (n e / omega_c) x k[n]``.  With ``B1 = b1 e``
    this reduces to ``-lap b1 = (curl R) . e`` and the mean of ``b1`` is the
    unobservable gauge, fixed to zero.  The in-plane divergence of ``R``
    vanishes for exact solutions of the limit model; its discrete value is
    checked against ``div_rtol`` and only the divergence-free part of ``R``
    enters the reconstruction.
    """
    calc = calc or SpectralCalculus(params.grid)
    params.grid.check_scalar(n)
    params.grid.check_vector(E)
    params.grid.check_vector(dtE)

    from .limit import compute_k  # local import to avoid a cycle

    k = compute_k(n, E, params, calc)
    omega = params.omega_c()
    flux = np.empty_like(E)
    # (n e / omega_c) x k = (n/omega_c) (e x k) = (n/omega_c) (-k2, k1, 0)
    flux[0] = -n / omega * k[1]
    flux[1] = n / omega * k[0]
    flux[2] = 0.0
    R = params.mu0 * params.eps0 * np.asarray(dtE, dtype=float) + params.mu0 * params.q * flux

    divR = calc.div(R)
    norm = float(np.linalg.norm(R[:2]))
    res = float(np.linalg.norm(divR)) * max(params.grid.h1, params.grid.h2)
    if norm > 1e-14 and res > div_rtol * norm:
        raise ConsistencyError("source of the magnetic correction is not divergence-free",
                               res / norm)

    b1 = calc.inverse_laplacian(calc.curl_z(R))
    return b1 - float(np.mean(b1))
