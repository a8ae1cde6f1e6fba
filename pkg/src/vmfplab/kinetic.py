"""Time integration of the scaled kinetic system in 2d-space x 3d-velocity.

The full step is the palindromic composition

    L(dt/2) T(dt/2) A(dt/2) C(dt) A(dt/2) T(dt/2) L(dt/2)

followed by a Maxwell update with the time-centered current and a Gauss
projection, where

* ``L`` rotates the (v1, v2) plane by the local gyro-angle
  ``omega_c(x) dt / eps^2`` (the stiff external-field term, integrated
  exactly as a rotation),
* ``T`` is free streaming ``x <- x - v_perp dt / eps`` on the torus,
* ``A`` accelerates along ``dv/ds = (q/m eps)(E + v x B)``,
* ``C`` is the Chang-Cooper discretization of the Fokker-Planck operator
  ``(1/ eps tau) div_v(sigma grad_v f + v f)``.

Velocity-space moves default to Maxwellian-fitted cubic shears (exact on
thermal profiles, positivity-friendly), with spectral shears (exact mass,
round-off preservation of resolved equilibria) as the alternative; spatial
transport uses conservative cubic shifts.  The quasi-monotone option clamps
cubic stencils and clips spectral undershoots; every velocity substep then
restores the per-column mass (and, through clipping, the kinetic energy),
so concentrations and the Gauss law never feel the repair.

A stepper owns its state exclusively and mutates it in place; distinct
steppers share nothing and may run concurrently.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .core import (DistributionField, EMState, PlasmaParams, SpectralCalculus,
                   current_density, number_density)
from .errors import IterationError, ParameterError
from .fieldsolve import gauss_project, gauss_residual, maxwell_step
from .interp import (ShearPhases, clip_restore_per_column, restore_mass,
                     restore_mass_per_column, shear_velocity_cubic,
                     shift_spatial, spectral_shear)

_TWO_PI = 2.0 * math.pi

_SPEED_SQ_CACHE: dict = {}


def _speed_squared(vgrid) -> np.ndarray:
    key = (vgrid.vmax, vgrid.nv)
    if key not in _SPEED_SQ_CACHE:
        v = vgrid.nodes
        _SPEED_SQ_CACHE[key] = (v[:, None, None] ** 2 + v[None, :, None] ** 2
                                + v[None, None, :] ** 2)
    return _SPEED_SQ_CACHE[key]


# ---------------------------------------------------------------------------
# free transport
# ---------------------------------------------------------------------------

def step_free_transport(f: DistributionField, dt: float, eps: float,
                        monotone: bool = False,
                        interpolation: str = "cubic") -> DistributionField:
    """Shift ``f`` along the characteristics of ``(v_perp/eps) . grad_x``.

    The displacement is uniform over space for each velocity node, so the
    cubic stencil weights are constant per slab and the total mass is
    conserved exactly.  The spectral option applies exact Fourier shifts
    (useful when the spatial interpolation floor must vanish).
    """
    if dt <= 0:
        raise ParameterError("dt must be positive")
    v = f.vgrid.nodes
    if interpolation == "spectral":
        import scipy.fft as sfft
        out = f.values
        for axis, h, n in ((0, f.grid.h1, f.grid.n1), (1, f.grid.h2, f.grid.n2)):
            k = _TWO_PI * np.fft.rfftfreq(n, d=h)
            shape = [1, 1, 1, 1, 1]
            shape[axis] = k.size
            vshape = [1, 1, 1, 1, 1]
            vshape[2 + axis] = f.vgrid.nv
            phase = np.exp(-1j * k.reshape(shape) * (dt / eps) * v.reshape(vshape))
            out = sfft.irfft(sfft.rfft(out, axis=axis) * phase, n=n, axis=axis)
        if monotone:
            before = f.values.sum()
            np.maximum(out, 0.0, out=out)
            restore_mass(out, before)
        return DistributionField(f.grid, f.vgrid, out, f.t)
    before = f.values.sum() if monotone else None
    out = shift_spatial(f.values, 0, v * dt / (eps * f.grid.h1), monotone)
    out = shift_spatial(out, 1, v * dt / (eps * f.grid.h2), monotone)
    if monotone:
        restore_mass(out, before)
    return DistributionField(f.grid, f.vgrid, out, f.t)


# ---------------------------------------------------------------------------
# gyro-rotation of the velocity plane
# ---------------------------------------------------------------------------

@dataclass
class _RotationPlan:
    """Cached shear decomposition of the per-node gyro-rotation."""

    nsub: int
    phases1: ShearPhases  # shear along v1, coupled to v2
    phases2: ShearPhases  # shear along v2, coupled to v1
    tan_half: np.ndarray
    sin_full: np.ndarray


def _build_rotation_plan(f: DistributionField, params: PlasmaParams, dt: float) -> _RotationPlan:
    alpha = params.omega_c() * dt / params.eps ** 2
    alpha = np.remainder(alpha + np.pi, _TWO_PI) - np.pi
    amax = float(np.max(np.abs(alpha)))
    nsub = max(1, int(math.ceil(amax / (0.5 * math.pi))))
    beta = alpha / nsub
    t = np.tan(0.5 * beta)
    s = np.sin(beta)
    kv = _TWO_PI * np.fft.rfftfreq(f.vgrid.nv, d=f.vgrid.hv)
    v = f.vgrid.nodes
    shape = (f.grid.n1, f.grid.n2)
    p1 = ShearPhases(kv, pa=t, v=v, shape=shape)    # v1-shear, displacement t(x) v2
    p2 = ShearPhases(kv, pa=-s, v=v, shape=shape)   # v2-shear, displacement -s(x) v1
    return _RotationPlan(nsub, p1, p2, t, s)


def step_larmor(f: DistributionField, dt: float, params: PlasmaParams,
                interpolation: str = "cubic", monotone: bool = False,
                plan: _RotationPlan | None = None) -> DistributionField:
    """Rotate the (v1, v2) plane by the exact local angle
    ``omega_c(x) dt / eps^2`` (sense fixed by the force ``(v2, -v1, 0)``).

    The rotation is factored into three shears; angles above pi/2 are split
    into sub-rotations.  Fitted-cubic shears hold Maxwellian profiles fixed
    up to an O(angle^2) defect; spectral shears preserve any resolved
    rotation-invariant profile to round-off.
    """
    if plan is None:
        plan = _build_rotation_plan(f, params, dt)
    vals = f.values
    before = vals.sum(axis=(2, 3, 4))
    if interpolation == "spectral":
        if monotone:
            v_sq = _speed_squared(f.vgrid)
            energy_before = np.einsum("xyijk,ijk->xy", vals, v_sq)
        for _ in range(plan.nsub):
            vals = spectral_shear(vals, 2, f.vgrid.hv, plan.phases1)
            vals = spectral_shear(vals, 3, f.vgrid.hv, plan.phases2)
            vals = spectral_shear(vals, 2, f.vgrid.hv, plan.phases1)
        if monotone:
            clip_restore_per_column(vals, v_sq, before, energy_before)
    elif interpolation == "cubic":
        v = f.vgrid.nodes
        hv = f.vgrid.hv
        sig = params.sigma
        # shear along v1 couples v2 (first complementary axis); along v2, v1
        d1 = plan.tan_half[:, :, None, None] * v[None, None, :, None]
        d2 = -plan.sin_full[:, :, None, None] * v[None, None, :, None]
        for _ in range(plan.nsub):
            vals = shear_velocity_cubic(vals, 2, d1, hv, v[0], sig, monotone)
            vals = shear_velocity_cubic(vals, 3, d2, hv, v[0], sig, monotone)
            vals = shear_velocity_cubic(vals, 2, d1, hv, v[0], sig, monotone)
        restore_mass_per_column(vals, before)
    else:
        raise ParameterError(f"unknown interpolation {interpolation!r}")
    return DistributionField(f.grid, f.vgrid, vals, f.t)


def rotate_vector_field_xy(u: np.ndarray, angle: np.ndarray) -> np.ndarray:
    """Rotate the in-plane components of a vector field by ``angle(x)``."""
    c, s = np.cos(angle), np.sin(angle)
    out = np.empty_like(u)
    out[0] = c * u[0] - s * u[1]
    out[1] = s * u[0] + c * u[1]
    out[2] = u[2]
    return out


# ---------------------------------------------------------------------------
# acceleration by the self-consistent fields
# ---------------------------------------------------------------------------

def _accel_displacements(em: EMState, params: PlasmaParams, dt: float):
    """Forward characteristic displacement coefficients for each v-axis.

    The shear along axis i has displacement ``base_i(x) + sum_j coef_ij(x)
    v_j`` with j ranging over the complementary axes in increasing order.
    """
    c = params.q * dt / (params.m * params.eps)
    E, B = em.E, em.B
    return {
        2: (c * E[0], c * B[2], -c * B[1]),    # d1 = c (E1 + v2 B3 - v3 B2)
        3: (c * E[1], -c * B[2], c * B[0]),    # d2 = c (E2 + v3 B1 - v1 B3)
        4: (c * E[2], c * B[1], -c * B[0]),    # d3 = c (E3 + v1 B2 - v2 B1)
    }


def step_acceleration(f: DistributionField, em: EMState, dt: float,
                      params: PlasmaParams, interpolation: str = "cubic",
                      monotone: bool = False, reverse: bool = False,
                      c_safety: float = 0.9) -> DistributionField:
    """Advance the velocity advection ``dv/ds = (q/m eps)(E + v x B)``.

    The generator splits into three shears (the speed along each axis does
    not depend on that axis), applied in order v1, v2, v3 or reversed; a
    caller composing two half steps in mirrored order obtains a second-order
    symmetric update.  The electric part is a uniform translation per
    spatial node and the magnetic part is norm-preserving, so each shear
    conserves mass exactly.
    """
    disp = _accel_displacements(em, params, dt)
    vmax = f.vgrid.vmax
    max_disp = max(float(np.max(np.abs(b))) + vmax * (float(np.max(np.abs(p)))
                   + float(np.max(np.abs(q)))) for b, p, q in disp.values())
    if max_disp > c_safety * f.vgrid.hv:
        warnings.warn(
            f"acceleration displacement {max_disp:.3e} exceeds {c_safety:.2f} "
            f"cells ({f.vgrid.hv:.3e}); accuracy of the shear splitting degrades")

    kv = _TWO_PI * np.fft.rfftfreq(f.vgrid.nv, d=f.vgrid.hv)
    v = f.vgrid.nodes
    shape = (f.grid.n1, f.grid.n2)
    vals = f.values
    before = vals.sum(axis=(2, 3, 4)) if (monotone or interpolation == "cubic") else None
    axes = (4, 3, 2) if reverse else (2, 3, 4)
    skip_tol = 1e-16 * f.vgrid.hv
    for axis in axes:
        base, plo, phi = disp[axis]
        b_amp = float(np.max(np.abs(plo))) + float(np.max(np.abs(phi)))
        if float(np.max(np.abs(base))) + vmax * b_amp < skip_tol:
            continue    # displacement is an exact no-op at this precision
        if interpolation == "spectral":
            lo = plo if float(np.max(np.abs(plo))) > 0.0 else None
            hi = phi if float(np.max(np.abs(phi))) > 0.0 else None
            phases = ShearPhases(kv, base=base, pa=lo, pb=hi, v=v, shape=shape)
            vals = spectral_shear(vals, axis, f.vgrid.hv, phases)
        elif interpolation == "cubic":
            d = (base[:, :, None, None]
                 + plo[:, :, None, None] * v[None, None, :, None]
                 + phi[:, :, None, None] * v[None, None, None, :])
            vals = shear_velocity_cubic(vals, axis, d, f.vgrid.hv, v[0],
                                        params.sigma, monotone)
        else:
            raise ParameterError(f"unknown interpolation {interpolation!r}")
    if vals is f.values:
        vals = vals.copy()
    if interpolation == "spectral" and monotone:
        # the field does work during the shear, so the clip repair targets
        # the post-shear energy, not the pre-shear one
        v_sq = _speed_squared(f.vgrid)
        energy_mid = np.einsum("xyijk,ijk->xy", vals, v_sq)
        clip_restore_per_column(vals, v_sq, before, energy_mid)
    elif before is not None:
        restore_mass_per_column(vals, before)
    return DistributionField(f.grid, f.vgrid, vals, f.t)


# ---------------------------------------------------------------------------
# Chang-Cooper collision step
# ---------------------------------------------------------------------------

@dataclass
class _CollisionPlan:
    """Cached Chang-Cooper bands and Thomas factorizations for one dt."""

    lam: float
    up: np.ndarray      # coefficient of f_{j+1} in row j of D
    lo: np.ndarray      # coefficient of f_{j-1} in row j of D
    diag: np.ndarray
    factors: dict = field(default_factory=dict)

    def thomas_factors(self, theta: float):
        key = round(theta, 12)
        if key not in self.factors:
            nv = self.diag.size
            b = 1.0 - theta * self.lam * self.diag
            a = -theta * self.lam * self.lo     # subdiagonal, a[0] unused
            c = -theta * self.lam * self.up     # superdiagonal, c[-1] unused
            cp = np.zeros(nv)
            inv_m = np.zeros(nv)
            inv_m[0] = 1.0 / b[0]
            cp[0] = c[0] * inv_m[0]
            for i in range(1, nv):
                m = b[i] - a[i] * cp[i - 1]
                inv_m[i] = 1.0 / m
                cp[i] = c[i] * inv_m[i] if i < nv - 1 else 0.0
            self.factors[key] = (a, cp, inv_m)
        return self.factors[key]


def _build_collision_plan(vgrid, params: PlasmaParams, dt: float) -> _CollisionPlan:
    v = vgrid.nodes
    hv = vgrid.hv
    sigma = params.sigma
    vf = 0.5 * (v[:-1] + v[1:])                  # interior faces
    w = vf * hv / sigma
    # g(w) = w / (e^w - 1), the exponential fitting factor
    g = np.where(np.abs(w) > 1e-5, w / np.expm1(np.where(np.abs(w) > 1e-5, w, 1.0)),
                 1.0 - w / 2.0 + w * w / 12.0)
    D_face = (sigma / hv) * g                    # flux coef of -f_j at face j+1/2
    A_face = D_face + vf                         # flux coef of +f_{j+1}
    nv = vgrid.nv
    up = np.zeros(nv)
    lo = np.zeros(nv)
    diag = np.zeros(nv)
    up[:-1] = A_face / hv
    lo[1:] = D_face / hv
    diag[:-1] -= D_face / hv
    diag[1:] -= A_face / hv
    lam = dt / (params.eps * params.tau)
    return _CollisionPlan(lam, up, lo, diag)


@njit(parallel=True, cache=True)
def _cc_sweep_axis2(vals, diag, up, lo, cm, a_t, cp_t, im_t, a_1, cp_1, im_1):
    n1, n2, nv, nb, nc = vals.shape
    for i1 in prange(n1):
        line = np.empty(nv)
        rhs = np.empty(nv)
        for i2 in range(n2):
            for b in range(nb):
                for c in range(nc):
                    for j in range(nv):
                        line[j] = vals[i1, i2, j, b, c]
                    neg = cm == 0.0
                    if not neg:
                        rhs[0] = line[0] * (1.0 + cm * diag[0]) + cm * up[0] * line[1]
                        for j in range(1, nv - 1):
                            rhs[j] = (line[j] * (1.0 + cm * diag[j])
                                      + cm * (up[j] * line[j + 1] + lo[j] * line[j - 1]))
                        rhs[nv - 1] = (line[nv - 1] * (1.0 + cm * diag[nv - 1])
                                       + cm * lo[nv - 1] * line[nv - 2])
                        for j in range(nv):
                            if rhs[j] < 0.0:
                                neg = True
                                break
                    if neg:
                        for j in range(nv):
                            rhs[j] = line[j]
                        a, cp, im = a_1, cp_1, im_1
                    else:
                        a, cp, im = a_t, cp_t, im_t
                    rhs[0] = rhs[0] * im[0]
                    for j in range(1, nv):
                        rhs[j] = (rhs[j] - a[j] * rhs[j - 1]) * im[j]
                    for j in range(nv - 2, -1, -1):
                        rhs[j] = rhs[j] - cp[j] * rhs[j + 1]
                    for j in range(nv):
                        vals[i1, i2, j, b, c] = rhs[j]


@njit(parallel=True, cache=True)
def _cc_sweep_axis3(vals, diag, up, lo, cm, a_t, cp_t, im_t, a_1, cp_1, im_1):
    n1, n2, na, nv, nc = vals.shape
    for i1 in prange(n1):
        line = np.empty(nv)
        rhs = np.empty(nv)
        for i2 in range(n2):
            for arow in range(na):
                for c in range(nc):
                    for j in range(nv):
                        line[j] = vals[i1, i2, arow, j, c]
                    neg = cm == 0.0
                    if not neg:
                        rhs[0] = line[0] * (1.0 + cm * diag[0]) + cm * up[0] * line[1]
                        for j in range(1, nv - 1):
                            rhs[j] = (line[j] * (1.0 + cm * diag[j])
                                      + cm * (up[j] * line[j + 1] + lo[j] * line[j - 1]))
                        rhs[nv - 1] = (line[nv - 1] * (1.0 + cm * diag[nv - 1])
                                       + cm * lo[nv - 1] * line[nv - 2])
                        for j in range(nv):
                            if rhs[j] < 0.0:
                                neg = True
                                break
                    if neg:
                        for j in range(nv):
                            rhs[j] = line[j]
                        a, cp, im = a_1, cp_1, im_1
                    else:
                        a, cp, im = a_t, cp_t, im_t
                    rhs[0] = rhs[0] * im[0]
                    for j in range(1, nv):
                        rhs[j] = (rhs[j] - a[j] * rhs[j - 1]) * im[j]
                    for j in range(nv - 2, -1, -1):
                        rhs[j] = rhs[j] - cp[j] * rhs[j + 1]
                    for j in range(nv):
                        vals[i1, i2, arow, j, c] = rhs[j]


@njit(parallel=True, cache=True)
def _cc_sweep_axis4(vals, diag, up, lo, cm, a_t, cp_t, im_t, a_1, cp_1, im_1):
    n1, n2, na, nb, nv = vals.shape
    for i1 in prange(n1):
        line = np.empty(nv)
        rhs = np.empty(nv)
        for i2 in range(n2):
            for arow in range(na):
                for b in range(nb):
                    for j in range(nv):
                        line[j] = vals[i1, i2, arow, b, j]
                    neg = cm == 0.0
                    if not neg:
                        rhs[0] = line[0] * (1.0 + cm * diag[0]) + cm * up[0] * line[1]
                        for j in range(1, nv - 1):
                            rhs[j] = (line[j] * (1.0 + cm * diag[j])
                                      + cm * (up[j] * line[j + 1] + lo[j] * line[j - 1]))
                        rhs[nv - 1] = (line[nv - 1] * (1.0 + cm * diag[nv - 1])
                                       + cm * lo[nv - 1] * line[nv - 2])
                        for j in range(nv):
                            if rhs[j] < 0.0:
                                neg = True
                                break
                    if neg:
                        for j in range(nv):
                            rhs[j] = line[j]
                        a, cp, im = a_1, cp_1, im_1
                    else:
                        a, cp, im = a_t, cp_t, im_t
                    rhs[0] = rhs[0] * im[0]
                    for j in range(1, nv):
                        rhs[j] = (rhs[j] - a[j] * rhs[j - 1]) * im[j]
                    for j in range(nv - 2, -1, -1):
                        rhs[j] = rhs[j] - cp[j] * rhs[j + 1]
                    for j in range(nv):
                        vals[i1, i2, arow, b, j] = rhs[j]


_CC_SWEEP = {2: _cc_sweep_axis2, 3: _cc_sweep_axis3, 4: _cc_sweep_axis4}


def step_collision(f: DistributionField, dt: float, params: PlasmaParams,
                   theta: float = 0.5, plan: _CollisionPlan | None = None) -> DistributionField:
    """Implicit Chang-Cooper step of the Fokker-Planck operator.

    Dimensional splitting over the three velocity axes; each 1-d operator is
    in conservative flux form with zero-flux ends (mass exact to round-off)
    and exponential fitting, so the grid Maxwellian is its exact kernel and
    the implicit matrix is an M-matrix (nonnegativity preserved).  The
    theta-weighted update is second order at theta = 1/2; any line whose
    explicit half would turn negative falls back to the fully implicit
    weighting for that sweep.
    """
    if dt <= 0:
        raise ParameterError("dt must be positive")
    if plan is None:
        plan = _build_collision_plan(f.vgrid, params, dt)
    a_t, cp_t, im_t = plan.thomas_factors(theta)
    a_1, cp_1, im_1 = plan.thomas_factors(1.0)
    cm = (1.0 - theta) * plan.lam if theta < 1.0 else 0.0
    vals = f.values.copy()
    for axis in (2, 3, 4):
        _CC_SWEEP[axis](vals, plan.diag, plan.up, plan.lo, cm,
                        a_t, cp_t, im_t, a_1, cp_1, im_1)
    return DistributionField(f.grid, f.vgrid, vals, f.t)


# ---------------------------------------------------------------------------
# mollifier
# ---------------------------------------------------------------------------

def mollifier_kernel(grid, delta: float) -> np.ndarray:
    """Compactly supported symmetric bump of radius ``delta`` on the torus,
    normalized to unit discrete mass."""
    if delta < 0:
        raise ParameterError("mollification radius must be nonnegative")
    if delta > grid.length / 2:
        raise ParameterError("mollification radius exceeds half the domain")
    x1, x2 = grid.nodes()
    d1 = np.minimum(x1, grid.length - x1)
    d2 = np.minimum(x2, grid.length - x2)
    r2 = (d1 ** 2 + d2 ** 2) / max(delta, 1e-300) ** 2
    K = np.zeros((grid.n1, grid.n2))
    inside = r2 < 1.0
    K[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    total = K.sum() * grid.cell_area
    if total == 0.0:
        K[0, 0] = 1.0 / grid.cell_area
        return K
    return K / total


def mollify(field_values: np.ndarray, delta: float, grid,
            kernel_hat: np.ndarray | None = None) -> np.ndarray:
    """Periodic convolution with the unit-mass bump of radius ``delta``.

    Accepts a scalar field or a stack of them (leading axes); ``delta = 0``
    is the identity.  The kernel is even, so the discrete operator is
    self-adjoint for the grid inner product.
    """
    if delta == 0.0:
        return np.array(field_values, copy=True)
    if kernel_hat is None:
        kernel_hat = np.fft.fft2(mollifier_kernel(grid, delta)) * grid.cell_area
    out = np.fft.ifft2(np.fft.fft2(field_values, axes=(-2, -1)) * kernel_hat, axes=(-2, -1))
    return np.real(out)


# ---------------------------------------------------------------------------
# the stepper
# ---------------------------------------------------------------------------

@dataclass
class StepperOptions:
    interpolation: str = "cubic"        # velocity-space moves (or "spectral")
    transport: str = "cubic"            # spatial shifts (or "spectral")
    monotone: bool = False
    collision_theta: float = 0.5
    maxwell_scheme: str = "semi_implicit"
    c_safety: float = 0.9
    mollify_delta: float = 0.0
    picard_tol: float = 1e-10
    picard_max_iter: int = 25


class KineticStepper:
    """Owns one kinetic trajectory ``(f, EM)`` and advances it in place."""

    def __init__(self, f: DistributionField, em: EMState, params: PlasmaParams,
                 options: StepperOptions | None = None):
        if f.grid is not em.grid and (f.grid.n1, f.grid.n2, f.grid.length) != \
                (em.grid.n1, em.grid.n2, em.grid.length):
            raise ParameterError("distribution and field live on different grids")
        if f.t != em.t:
            raise ParameterError("distribution and field carry different time stamps")
        self.f = f
        self.em = em
        self.params = params
        self.options = options or StepperOptions()
        self.calc = SpectralCalculus(f.grid)
        self._rotation_plans: dict = {}
        self._collision_plans: dict = {}
        self._pending_half_larmor: float | None = None
        self.last_gauss_residual = float("nan")
        self.steps_taken = 0

    # -- caches ------------------------------------------------------------

    def _rotation_plan(self, dt: float) -> _RotationPlan:
        key = round(dt, 15)
        if key not in self._rotation_plans:
            self._rotation_plans[key] = _build_rotation_plan(self.f, self.params, dt)
        return self._rotation_plans[key]

    def _collision_plan(self, dt: float) -> _CollisionPlan:
        key = round(dt, 15)
        if key not in self._collision_plans:
            self._collision_plans[key] = _build_collision_plan(self.f.vgrid, self.params, dt)
        return self._collision_plans[key]

    # -- pending trailing rotation (first-same-as-last fusion) -------------

    def realize(self):
        """Apply any deferred trailing half-rotation so ``self.f`` is the
        true state at its time stamp."""
        if self._pending_half_larmor is not None:
            dt_half = self._pending_half_larmor
            self._pending_half_larmor = None
            self.f = step_larmor(self.f, dt_half, self.params,
                                 self.options.interpolation, self.options.monotone,
                                 self._rotation_plan(dt_half))

    def _true_current(self) -> np.ndarray:
        """Physical current q int v f dv of the realized state.

        While a trailing half-rotation is deferred, the stored moments are
        rotated by that half-angle; the rotation acts on the first moment as
        the inverse plane rotation, which is applied directly.
        """
        j = current_density(self.f)
        if self._pending_half_larmor is not None:
            dt_half = self._pending_half_larmor
            alpha = self.params.omega_c() * dt_half / self.params.eps ** 2
            j = rotate_vector_field_xy(j, -alpha)
        return self.params.q * j

    # -- full step ----------------------------------------------------------

    def strang_step(self, dt: float) -> "KineticStepper":
        """Advance ``(f, EM)`` by ``dt``.

        The acceleration substeps see the fields advanced to the half step
        by a Maxwell predictor (keeps the splitting second order); the final
        Maxwell update runs from the original state with the time-centered
        current and is followed by the Gauss projection.
        """
        if dt <= 0:
            raise ParameterError("dt must be positive")
        opts = self.options
        p = self.params
        J_pre = self._true_current()
        em_half = maxwell_step(self.em, J_pre, p, 0.5 * dt,
                               opts.maxwell_scheme, opts.c_safety, self.calc)

        half = 0.5 * dt
        plan_half = self._rotation_plan(half)
        plan_full = self._rotation_plan(dt)

        f = self.f
        if self._pending_half_larmor is not None:
            # trailing half of the previous step fuses with this leading half
            self._pending_half_larmor = None
            f = step_larmor(f, dt, p, opts.interpolation, opts.monotone, plan_full)
        else:
            f = step_larmor(f, half, p, opts.interpolation, opts.monotone, plan_half)
        f = step_free_transport(f, half, p.eps, opts.monotone, opts.transport)
        f = step_acceleration(f, em_half, half, p, opts.interpolation,
                              opts.monotone, reverse=False, c_safety=opts.c_safety)
        f = step_collision(f, dt, p, opts.collision_theta, self._collision_plan(dt))
        f = step_acceleration(f, em_half, half, p, opts.interpolation,
                              opts.monotone, reverse=True, c_safety=opts.c_safety)
        f = step_free_transport(f, half, p.eps, opts.monotone, opts.transport)
        # defer the trailing half rotation; realize() applies it on demand
        self._pending_half_larmor = half
        f.t = self.f.t + dt
        self.f = f

        J_post = self._true_current()
        em_new = maxwell_step(self.em, 0.5 * (J_pre + J_post), p, dt,
                              opts.maxwell_scheme, opts.c_safety, self.calc)
        rho = p.q * (number_density(self.f) - p.d_background)
        em_new = gauss_project(em_new, rho, p, self.calc)
        em_new.t = self.f.t
        self.em = em_new
        self.last_gauss_residual = gauss_residual(em_new, rho, p, self.calc)
        self.steps_taken += 1
        return self

    # -- mollified fixed-point step -----------------------------------------

    def picard_cycle(self, dt: float, delta: float):
        """One time step by fixed-point iteration on the mollified system.

        The kinetic equation is advanced with the fields frozen at the
        mollified time-centered previous iterate, then the Maxwell system is
        advanced with the mollified time-centered current; the cycle repeats
        until successive iterates agree in L2 or the cap is hit.  Returns
        ``(self, residual_history)``.
        """
        if delta <= 0:
            raise ParameterError("picard mode needs a positive mollification radius")
        if self.options.picard_max_iter < 1:
            raise ParameterError("iteration cap must be at least 1")
        self.realize()
        opts = self.options
        p = self.params
        kernel_hat = np.fft.fft2(mollifier_kernel(self.f.grid, delta)) * self.f.grid.cell_area

        f0 = self.f.copy()
        em0 = self.em.copy()
        J0 = p.q * current_density(f0)
        scale = max(float(np.linalg.norm(f0.values)) + float(np.linalg.norm(em0.E))
                    + float(np.linalg.norm(em0.B)), 1e-300)

        plan_half = self._rotation_plan(0.5 * dt)
        plan_coll = self._collision_plan(dt)

        f_prev, E_prev, B_prev = f0, em0.E, em0.B
        residuals = []
        converged = False
        for _ in range(opts.picard_max_iter):
            E_frozen = mollify(0.5 * (em0.E + E_prev), delta, self.f.grid, kernel_hat)
            B_frozen = mollify(0.5 * (em0.B + B_prev), delta, self.f.grid, kernel_hat)
            em_frozen = EMState(self.f.grid, E_frozen, B_frozen, em0.t)

            half = 0.5 * dt
            f = step_larmor(f0.copy(), half, p, opts.interpolation, opts.monotone, plan_half)
            f = step_free_transport(f, half, p.eps, opts.monotone, opts.transport)
            f = step_acceleration(f, em_frozen, half, p, opts.interpolation,
                                  opts.monotone, reverse=False, c_safety=opts.c_safety)
            f = step_collision(f, dt, p, opts.collision_theta, plan_coll)
            f = step_acceleration(f, em_frozen, half, p, opts.interpolation,
                                  opts.monotone, reverse=True, c_safety=opts.c_safety)
            f = step_free_transport(f, half, p.eps, opts.monotone, opts.transport)
            f = step_larmor(f, half, p, opts.interpolation, opts.monotone, plan_half)

            J_bar = mollify(0.5 * (J0 + p.q * current_density(f)), delta,
                            self.f.grid, kernel_hat)
            em_new = maxwell_step(em0, J_bar, p, dt, opts.maxwell_scheme,
                                  opts.c_safety, self.calc)

            res = (float(np.linalg.norm(f.values - f_prev.values))
                   + float(np.linalg.norm(em_new.E - E_prev))
                   + float(np.linalg.norm(em_new.B - B_prev))) / scale
            residuals.append(res)
            f_prev, E_prev, B_prev = f, em_new.E, em_new.B
            if res < opts.picard_tol:
                converged = True
                break
        if not converged:
            raise IterationError(residuals)

        f_prev.t = f0.t + dt
        self.f = f_prev
        self.em = EMState(self.f.grid, E_prev.copy(), B_prev.copy(), f_prev.t)
        rho = p.q * (number_density(self.f) - p.d_background)
        self.last_gauss_residual = gauss_residual(self.em, rho, p, self.calc)
        self.steps_taken += 1
        return self, residuals
