"""Shift, shear and rotation kernels for the phase-space array.

Layout contract: phase-space arrays are C-ordered ``(n1, n2, nv, nv, nv)``
with spatial axes first.  Two interpolation families are provided:

* spectral shears: an FFT phase shift along one velocity axis whose
  displacement is affine in the two other velocity coordinates,
  ``d = base(x) + va * pa(x) + vb * pb(x)``.  These conserve the line sums
  (hence total mass) exactly and are the backbone of the velocity dynamics.
* cubic Lagrange shifts: 4-point stencils with partition-of-unity weights
  for the periodic spatial transport (uniform shift per velocity node), and
  Maxwellian-fitted variants for the velocity axes whose taps are weighted
  by ``exp((v_tap^2 - v_target^2)/2 sigma)``, making them exact on thermal
  profiles under arbitrary displacement.

The quasi-monotone option clamps the cubic result between the two bracketing
taps (no new extrema, no negatives) and clips spectral undershoots; callers
then restore per-column invariants with the helpers at the bottom.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.fft as sfft
from numba import njit, prange

_ONE = np.ones((1, 1, 1, 1), dtype=np.complex128)

# pocketfft releases the GIL, so splitting the leading axis across two
# threads nearly halves the transform wall time on the production shapes
_POOL = ThreadPoolExecutor(max_workers=2)
_THREAD_BYTES = 4 << 20


def cubic_weights(theta):
    """Lagrange cubic weights for interpolation at fraction ``theta`` of the
    cell between stencil nodes -1, 0, 1, 2.  They sum to one identically."""
    th = np.asarray(theta, dtype=float)
    w_m1 = -th * (th - 1.0) * (th - 2.0) / 6.0
    w_0 = (th * th - 1.0) * (th - 2.0) / 2.0
    w_p1 = -th * (th + 1.0) * (th - 2.0) / 2.0
    w_p2 = th * (th * th - 1.0) / 6.0
    return w_m1, w_0, w_p1, w_p2


# ---------------------------------------------------------------------------
# spectral shears along the velocity axes
# ---------------------------------------------------------------------------

@njit(cache=True)
def _phase_mul_axis2(F, f0, fa, fb):
    n1, n2, K, na, nb = F.shape
    use_a = fa.size > 1
    use_b = fb.size > 1
    for i1 in range(n1):
        for i2 in range(n2):
            for kk in range(K):
                w0 = f0[i1, i2, kk]
                for a in range(na):
                    w = w0 * fa[i1, i2, kk, a] if use_a else w0
                    if use_b:
                        for b in range(nb):
                            F[i1, i2, kk, a, b] = F[i1, i2, kk, a, b] * w * fb[i1, i2, kk, b]
                    else:
                        for b in range(nb):
                            F[i1, i2, kk, a, b] = F[i1, i2, kk, a, b] * w


@njit(cache=True)
def _phase_mul_axis3(F, f0, fa, fb):
    # fa couples axis 2 (v1), fb couples axis 4 (v3)
    n1, n2, na, K, nb = F.shape
    use_a = fa.size > 1
    use_b = fb.size > 1
    for i1 in range(n1):
        for i2 in range(n2):
            for a in range(na):
                for kk in range(K):
                    w = f0[i1, i2, kk]
                    if use_a:
                        w = w * fa[i1, i2, kk, a]
                    if use_b:
                        for b in range(nb):
                            F[i1, i2, a, kk, b] = F[i1, i2, a, kk, b] * w * fb[i1, i2, kk, b]
                    else:
                        for b in range(nb):
                            F[i1, i2, a, kk, b] = F[i1, i2, a, kk, b] * w


@njit(cache=True)
def _phase_mul_axis4(F, f0, fa, fb):
    # fa couples axis 2 (v1), fb couples axis 3 (v2)
    n1, n2, na, nb, K = F.shape
    use_a = fa.size > 1
    use_b = fb.size > 1
    for i1 in range(n1):
        for i2 in range(n2):
            for a in range(na):
                for b in range(nb):
                    for kk in range(K):
                        w = f0[i1, i2, kk]
                        if use_a:
                            w = w * fa[i1, i2, kk, a]
                        if use_b:
                            w = w * fb[i1, i2, kk, b]
                        F[i1, i2, a, b, kk] = F[i1, i2, a, b, kk] * w


_PHASE_MUL = {2: _phase_mul_axis2, 3: _phase_mul_axis3, 4: _phase_mul_axis4}


class ShearPhases:
    """Precomputed phase factor tables of one spectral shear.

    ``base`` has shape (n1, n2); ``pa``/``pb`` couple the two complementary
    velocity axes (in increasing axis order) through the node coordinates.
    """

    def __init__(self, k, base=None, pa=None, pb=None, v=None, shape=None):
        n1, n2 = shape
        kr = k.reshape(1, 1, -1)
        if base is None:
            self.f0 = np.ones((n1, n2, k.size), dtype=np.complex128)
        else:
            self.f0 = np.exp(-1j * kr * base[:, :, None])
        self.fa = (_ONE if pa is None else
                   np.exp(-1j * kr[..., None] * pa[:, :, None, None] * v[None, None, None, :]))
        self.fb = (_ONE if pb is None else
                   np.exp(-1j * kr[..., None] * pb[:, :, None, None] * v[None, None, None, :]))


def _shear_chunk(chunk, out_chunk, axis, n, f0, fa, fb):
    F = sfft.rfft(chunk, axis=axis)
    _PHASE_MUL[axis](F, f0, fa, fb)
    out_chunk[...] = sfft.irfft(F, n=n, axis=axis)


def spectral_shear(values, axis, hv, phases: ShearPhases, out=None):
    """Apply one spectral shear along velocity ``axis`` (2, 3 or 4)."""
    n = values.shape[axis]
    if out is None:
        out = np.empty_like(values)
    f0, fa, fb = phases.f0, phases.fa, phases.fb
    if values.nbytes >= _THREAD_BYTES and values.shape[0] >= 2:
        h = values.shape[0] // 2
        fut = _POOL.submit(_shear_chunk, values[:h], out[:h], axis, n,
                           f0[:h], fa[:h] if fa.size > 1 else fa,
                           fb[:h] if fb.size > 1 else fb)
        _shear_chunk(values[h:], out[h:], axis, n, f0[h:],
                     fa[h:] if fa.size > 1 else fa,
                     fb[h:] if fb.size > 1 else fb)
        fut.result()
    else:
        _shear_chunk(values, out, axis, n, f0, fa, fb)
    return out


# ---------------------------------------------------------------------------
# cubic periodic shifts along the spatial axes (transport)
# ---------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def _shift_x1(f, out, base, w, monotone):
    n1, n2, nv1, nv2, nv3 = f.shape
    for i1 in prange(n1):
        for a in range(nv1):
            j0 = (i1 + base[a]) % n1
            jm = (j0 - 1) % n1
            j1 = (j0 + 1) % n1
            j2 = (j0 + 2) % n1
            wm, w0, wp, wq = w[a, 0], w[a, 1], w[a, 2], w[a, 3]
            for i2 in range(n2):
                for b in range(nv2):
                    for c in range(nv3):
                        val = (wm * f[jm, i2, a, b, c] + w0 * f[j0, i2, a, b, c]
                               + wp * f[j1, i2, a, b, c] + wq * f[j2, i2, a, b, c])
                        if monotone:
                            lo = min(f[j0, i2, a, b, c], f[j1, i2, a, b, c])
                            hi = max(f[j0, i2, a, b, c], f[j1, i2, a, b, c])
                            val = min(max(val, lo), hi)
                        out[i1, i2, a, b, c] = val


@njit(parallel=True, cache=True)
def _shift_x2(f, out, base, w, monotone):
    n1, n2, nv1, nv2, nv3 = f.shape
    for i1 in prange(n1):
        for i2 in range(n2):
            for b in range(nv2):
                j0 = (i2 + base[b]) % n2
                jm = (j0 - 1) % n2
                j1 = (j0 + 1) % n2
                j2 = (j0 + 2) % n2
                wm, w0, wp, wq = w[b, 0], w[b, 1], w[b, 2], w[b, 3]
                for a in range(nv1):
                    for c in range(nv3):
                        val = (wm * f[i1, jm, a, b, c] + w0 * f[i1, j0, a, b, c]
                               + wp * f[i1, j1, a, b, c] + wq * f[i1, j2, a, b, c])
                        if monotone:
                            lo = min(f[i1, j0, a, b, c], f[i1, j1, a, b, c])
                            hi = max(f[i1, j0, a, b, c], f[i1, j1, a, b, c])
                            val = min(max(val, lo), hi)
                        out[i1, i2, a, b, c] = val


def shift_spatial(values, axis, shift_cells, monotone=False):
    """Periodic cubic shift along spatial ``axis`` (0 or 1).

    ``shift_cells`` gives, per node of the matching velocity axis, the
    displacement of the content in cells; the shift is uniform over the
    remaining axes, so the stencil weights are constant per slab and the
    total is conserved exactly (partition of unity).
    """
    shift_cells = np.asarray(shift_cells, dtype=float)
    t = -shift_cells                       # sampling offset: f(x - d)
    base = np.floor(t).astype(np.int64)
    theta = t - base
    w = np.stack(cubic_weights(theta), axis=-1)
    out = np.empty_like(values)
    if axis == 0:
        _shift_x1(values, out, base, w, monotone)
    elif axis == 1:
        _shift_x2(values, out, base, w, monotone)
    else:
        raise ValueError("spatial axis must be 0 or 1")
    return out


# ---------------------------------------------------------------------------
# cubic velocity shear (alternative to the spectral one)
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _fitted_line(line, out_line, nv, d, hv, v0, inv2sig, monotone):
    """One Maxwellian-fitted cubic shift of a single velocity line.

    Interpolates the ratio of the line to ``exp(-v^2/2 sigma)``: each stencil
    tap carries the factor ``exp((v_tap^2 - v_target^2)/2 sigma)``, evaluated
    by a geometric recurrence along the line.  Exact for Maxwellian profiles
    under arbitrary displacement; the monotone clamp brackets the ratio.
    """
    t = -d / hv
    ib = int(np.floor(t))
    th = t - ib
    w0_ = -th * (th - 1.0) * (th - 2.0) / 6.0
    w1_ = (th * th - 1.0) * (th - 2.0) / 2.0
    w2_ = -th * (th + 1.0) * (th - 2.0) / 2.0
    w3_ = th * (th * th - 1.0) / 6.0
    # fitted factor r_m(j) = exp(delta_m * (v_tap + v_target) / 2 sigma)
    # with delta_m = v_tap - v_target = hv (ib + m) + d, constant per line
    d0_ = hv * (ib - 1) + d
    d1_ = hv * ib + d
    d2_ = hv * (ib + 1) + d
    d3_ = hv * (ib + 2) + d
    r0 = np.exp(d0_ * (2.0 * v0 + hv * (ib - 1) - d) * inv2sig)
    r1 = np.exp(d1_ * (2.0 * v0 + hv * ib - d) * inv2sig)
    r2 = np.exp(d2_ * (2.0 * v0 + hv * (ib + 1) - d) * inv2sig)
    r3 = np.exp(d3_ * (2.0 * v0 + hv * (ib + 2) - d) * inv2sig)
    q0 = np.exp(2.0 * d0_ * hv * inv2sig)
    q1 = np.exp(2.0 * d1_ * hv * inv2sig)
    q2 = np.exp(2.0 * d2_ * hv * inv2sig)
    q3 = np.exp(2.0 * d3_ * hv * inv2sig)
    for j in range(nv):
        p = j + ib
        acc = 0.0
        if 0 <= p - 1 < nv:
            acc += w0_ * line[p - 1] * r0
        f0 = line[p] * r1 if 0 <= p < nv else 0.0
        f1 = line[p + 1] * r2 if 0 <= p + 1 < nv else 0.0
        acc += w1_ * f0 + w2_ * f1
        if 0 <= p + 2 < nv:
            acc += w3_ * line[p + 2] * r3
        if monotone:
            lo = min(f0, f1)
            hi = max(f0, f1)
            acc = min(max(acc, lo), hi)
        out_line[j] = acc
        r0 *= q0
        r1 *= q1
        r2 *= q2
        r3 *= q3


@njit(parallel=True, cache=True)
def _cubic_shear_axis2(f, out, disp, hv, v0, inv2sig, monotone):
    n1, n2, nv, nb, nc = f.shape
    for i1 in prange(n1):
        line = np.empty(nv)
        res = np.empty(nv)
        for i2 in range(n2):
            for b in range(nb):
                for c in range(nc):
                    for j in range(nv):
                        line[j] = f[i1, i2, j, b, c]
                    _fitted_line(line, res, nv, disp[i1, i2, b, c], hv, v0, inv2sig, monotone)
                    for j in range(nv):
                        out[i1, i2, j, b, c] = res[j]


@njit(parallel=True, cache=True)
def _cubic_shear_axis3(f, out, disp, hv, v0, inv2sig, monotone):
    n1, n2, na, nv, nc = f.shape
    for i1 in prange(n1):
        line = np.empty(nv)
        res = np.empty(nv)
        for i2 in range(n2):
            for a in range(na):
                for c in range(nc):
                    for j in range(nv):
                        line[j] = f[i1, i2, a, j, c]
                    _fitted_line(line, res, nv, disp[i1, i2, a, c], hv, v0, inv2sig, monotone)
                    for j in range(nv):
                        out[i1, i2, a, j, c] = res[j]


@njit(parallel=True, cache=True)
def _cubic_shear_axis4(f, out, disp, hv, v0, inv2sig, monotone):
    n1, n2, na, nb, nv = f.shape
    for i1 in prange(n1):
        line = np.empty(nv)
        res = np.empty(nv)
        for i2 in range(n2):
            for a in range(na):
                for b in range(nb):
                    for j in range(nv):
                        line[j] = f[i1, i2, a, b, j]
                    _fitted_line(line, res, nv, disp[i1, i2, a, b], hv, v0, inv2sig, monotone)
                    for j in range(nv):
                        out[i1, i2, a, b, j] = res[j]


_CUBIC_SHEAR = {2: _cubic_shear_axis2, 3: _cubic_shear_axis3, 4: _cubic_shear_axis4}


def shear_velocity_cubic(values, axis, disp, hv, v0, sigma, monotone=False):
    """Maxwellian-fitted cubic shear along a velocity axis.

    ``disp`` is the physical displacement of the content, shaped over
    ``(x1, x2, lo, hi)`` where (lo, hi) are the complementary velocity axes
    in increasing order; ``v0`` is the first node coordinate of the sheared
    axis.  Points sampled outside the truncated box count as zero; the
    quasi-monotone option clamps between the fitted bracketing taps, which
    keeps nonnegative data nonnegative without flattening the thermal tail.
    """
    out = np.empty_like(values)
    disp = np.ascontiguousarray(np.broadcast_to(
        disp, values.shape[:2] + tuple(values.shape[a] for a in (2, 3, 4) if a != axis)))
    _CUBIC_SHEAR[axis](values, out, disp, hv, v0, 0.5 / sigma, monotone)
    return out


def restore_mass(values, target_mass_sum, rtol_warn=1e-4):
    """Rescale ``values`` in place so its raw sum matches the target.

    Used after velocity-space moves to hand back the vanishing amount of
    mass truncated at the velocity boundary (and after monotone clipping).
    Returns the applied factor; a factor far from 1 signals that the
    boundary-mass invariant is broken.
    """
    s = values.sum()
    if target_mass_sum == 0.0 or s == 0.0:
        return 1.0
    factor = target_mass_sum / s
    if abs(factor - 1.0) > rtol_warn:
        import warnings
        warnings.warn(f"mass restoration factor {factor - 1.0:+.3e} exceeds "
                      "the boundary-truncation budget")
    values *= factor
    return factor


def restore_mass_per_column(values, target_column_sums, rtol_warn=1e-4):
    """Rescale each spatial column of ``values`` to its pre-move mass.

    Velocity-space moves leave every spatial column's mass invariant in
    exact arithmetic, so restoring per column keeps both the total mass and
    the concentration (hence the Gauss law) untouched by clipping and
    boundary truncation.
    """
    after = values.sum(axis=(2, 3, 4))
    safe = np.where(after != 0.0, after, 1.0)
    factor = np.where((after != 0.0) & (target_column_sums != 0.0),
                      target_column_sums / safe, 1.0)
    worst = float(np.max(np.abs(factor - 1.0)))
    if worst > rtol_warn:
        import warnings
        warnings.warn(f"mass restoration factor {worst:+.3e} exceeds "
                      "the boundary-truncation budget")
    values *= factor[:, :, None, None, None]
    return factor


def clip_restore_per_column(values, v_sq, mass_cols, energy_cols):
    """Clip negatives, then restore each column's mass and kinetic energy.

    Clipping undershoots to zero adds mass at high speeds; a plain rescale
    would bleed that energy surplus into the thermal core and act as a
    spurious heating.  Reweighting by ``a + b |v|^2`` with the 2x2 moment
    system solved per column keeps both invariants exact.  Falls back to the
    mass-only rescale where the weight would lose positivity.
    """
    np.maximum(values, 0.0, out=values)
    m1 = values.sum(axis=(2, 3, 4))
    k1 = np.einsum("xyijk,ijk->xy", values, v_sq)
    q1 = np.einsum("xyijk,ijk->xy", values, v_sq * v_sq)
    det = m1 * q1 - k1 * k1
    ok = (m1 > 0.0) & (np.abs(det) > 1e-300)
    safe_det = np.where(ok, det, 1.0)
    a = np.where(ok, (mass_cols * q1 - energy_cols * k1) / safe_det, 1.0)
    b = np.where(ok, (energy_cols * m1 - mass_cols * k1) / safe_det, 0.0)
    vmax_sq = float(v_sq.max())
    bad = (a < 0.0) | (a + b * vmax_sq < 0.0)
    if np.any(bad):
        safe_m = np.where(m1 > 0.0, m1, 1.0)
        a = np.where(bad, np.where(m1 > 0.0, mass_cols / safe_m, 1.0), a)
        b = np.where(bad, 0.0, b)
    values *= (a[:, :, None, None, None]
               + b[:, :, None, None, None] * v_sq[None, None, :, :, :])
