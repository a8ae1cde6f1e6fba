"""Grids, plasma parameters, state containers and the basic velocity-space
functions (Maxwellian, rotations, moments) shared by every solver.

Conventions
-----------
* The spatial domain is the periodic square torus ``[0, L)^2``; fields are
  sampled at the FFT collocation nodes ``x_i = i h``.
* The velocity domain is the cube ``[-vmax, vmax]^3`` with cell-centered
  nodes, so the grid is symmetric under ``v -> -v``.
* Phase-space arrays are C-ordered with shape ``(n1, n2, nv, nv, nv)``;
  spatial indices are outermost.  Vector fields on the spatial grid have
  shape ``(3, n1, n2)``.
* All containers are plain value types.  Operations in this module are pure
  functions and never mutate their arguments, so concurrent use from several
  threads is safe as long as callers treat the array payloads as read-only.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError

# Mass fraction allowed in the outermost velocity shell before the
# truncation of the velocity domain is considered unsound.
BOUNDARY_MASS_TOL = 1e-6


@dataclass(frozen=True)
class PerpGrid:
    """Uniform periodic grid for the plane perpendicular to the field axis."""

    length: float
    n1: int
    n2: int

    def __post_init__(self):
        if self.length <= 0:
            raise ParameterError("domain length must be positive")
        for n in (self.n1, self.n2):
            if n < 4 or n % 2 != 0:
                raise ParameterError("cell counts must be even and >= 4")

    @property
    def h1(self) -> float:
        return self.length / self.n1

    @property
    def h2(self) -> float:
        return self.length / self.n2

    @property
    def cell_area(self) -> float:
        return self.h1 * self.h2

    def nodes(self):
        """Node coordinates (x1, x2) as a broadcastable pair."""
        x1 = np.arange(self.n1) * self.h1
        x2 = np.arange(self.n2) * self.h2
        return x1[:, None], x2[None, :]

    def zeros(self):
        return np.zeros((self.n1, self.n2))

    def zeros_vector(self):
        return np.zeros((3, self.n1, self.n2))

    def check_scalar(self, a):
        if np.shape(a) != (self.n1, self.n2):
            raise ShapeError(f"expected scalar field {(self.n1, self.n2)}, got {np.shape(a)}")

    def check_vector(self, a):
        if np.shape(a) != (3, self.n1, self.n2):
            raise ShapeError(f"expected vector field {(3, self.n1, self.n2)}, got {np.shape(a)}")


@dataclass(frozen=True)
class VelGrid:
    """Cell-centered truncation of velocity space to ``[-vmax, vmax]^3``."""

    vmax: float
    nv: int

    def __post_init__(self):
        if self.vmax <= 0:
            raise ParameterError("vmax must be positive")
        if self.nv < 8:
            raise ParameterError("need at least 8 velocity cells per axis")

    @property
    def hv(self) -> float:
        return 2.0 * self.vmax / self.nv

    @property
    def cell_volume(self) -> float:
        return self.hv ** 3

    @property
    def nodes(self) -> np.ndarray:
        """1-d node coordinates, symmetric under v -> -v."""
        return -self.vmax + (np.arange(self.nv) + 0.5) * self.hv

    def mesh(self):
        v = self.nodes
        return np.meshgrid(v, v, v, indexing="ij")

    def maxwellian_1d(self, sigma: float) -> np.ndarray:
        """Nodal samples of ``exp(-v^2/2 sigma)/sqrt(2 pi sigma)`` on one axis."""
        if sigma <= 0:
            raise ParameterError("sigma must be positive")
        v = self.nodes
        return np.exp(-v * v / (2.0 * sigma)) / np.sqrt(2.0 * np.pi * sigma)

    def maxwellian(self, sigma: float) -> np.ndarray:
        """Nodal samples of the 3-d Maxwellian (analytic normalization)."""
        m1 = self.maxwellian_1d(sigma)
        return m1[:, None, None] * m1[None, :, None] * m1[None, None, :]

    def maxwellian_discrete(self, sigma: float) -> np.ndarray:
        """Maxwellian rescaled so the midpoint quadrature gives exactly 1.

        Initial data built from this profile has velocity moments that agree
        with the intended concentration to round-off, which keeps the discrete
        neutrality condition exact.
        """
        m = self.maxwellian(sigma)
        return m / (m.sum() * self.cell_volume)


@dataclass(frozen=True)
class PlasmaParams:
    """Physical constants, scaling parameter and the prescribed backgrounds.

    ``b_ext`` is the scalar amplitude of the external magnetic field (aligned
    with the third axis) and ``d_background`` the neutralizing charge
    background, both sampled on ``grid``.
    """

    q: float
    m: float
    sigma: float
    tau: float
    eps0: float
    mu0: float
    eps: float
    grid: PerpGrid
    b_ext: np.ndarray
    d_background: np.ndarray

    def __post_init__(self):
        for name in ("q", "m", "sigma", "tau", "eps0", "mu0", "eps"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be strictly positive")
        if self.eps > 1.0:
            raise ParameterError("scaling parameter eps must lie in (0, 1]")
        self.grid.check_scalar(self.b_ext)
        self.grid.check_scalar(self.d_background)
        if float(np.min(self.b_ext)) <= 0.0:
            raise ParameterError("external field must satisfy min b_ext > 0")
        if float(np.min(self.d_background)) < 0.0:
            raise ParameterError("background density must be nonnegative")
        object.__setattr__(self, "b_ext", np.asarray(self.b_ext, dtype=float))
        object.__setattr__(self, "d_background", np.asarray(self.d_background, dtype=float))

    @property
    def b0(self) -> float:
        """Lower bound of the external field amplitude."""
        return float(np.min(self.b_ext))

    def omega_c(self) -> np.ndarray:
        """Cyclotron frequency q B_ext / m on the spatial grid."""
        return self.q * self.b_ext / self.m

    def with_eps(self, eps: float) -> "PlasmaParams":
        return PlasmaParams(self.q, self.m, self.sigma, self.tau, self.eps0,
                            self.mu0, eps, self.grid, self.b_ext, self.d_background)


@dataclass
class DistributionField:
    """Phase-space density on the tensor grid, with its time stamp."""

    grid: PerpGrid
    vgrid: VelGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        expected = (self.grid.n1, self.grid.n2, self.vgrid.nv, self.vgrid.nv, self.vgrid.nv)
        if self.values.shape != expected:
            raise ShapeError(f"expected values of shape {expected}, got {self.values.shape}")

    @property
    def phase_volume(self) -> float:
        return self.grid.cell_area * self.vgrid.cell_volume

    def mass(self) -> float:
        return float(self.values.sum()) * self.phase_volume

    def boundary_mass_fraction(self) -> float:
        """Mass fraction carried by the outermost velocity shell."""
        total = self.values.sum()
        if total <= 0:
            return 0.0
        inner = self.values[:, :, 1:-1, 1:-1, 1:-1].sum()
        return float((total - inner) / total)

    def validate(self):
        """Check invariants; warn when the velocity truncation is doubtful."""
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("distribution contains non-finite entries")
        vmin = float(self.values.min())
        if vmin < -1e-12 * max(float(self.values.max()), 1.0):
            warnings.warn(f"distribution has negative values down to {vmin:.3e}")
        if self.mass() <= 0:
            raise ParameterError("total mass must be positive")
        frac = self.boundary_mass_fraction()
        if frac > BOUNDARY_MASS_TOL:
            warnings.warn(
                f"outermost velocity shell carries {frac:.2e} of the mass; "
                "increase vmax for a sound truncation")

    def copy(self) -> "DistributionField":
        return DistributionField(self.grid, self.vgrid, self.values.copy(), self.t)


@dataclass
class EMState:
    """Self-consistent electromagnetic field sampled on the spatial grid."""

    grid: PerpGrid
    E: np.ndarray
    B: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.grid.check_vector(self.E)
        self.grid.check_vector(self.B)

    @classmethod
    def zeros(cls, grid: PerpGrid, t: float = 0.0) -> "EMState":
        return cls(grid, grid.zeros_vector(), grid.zeros_vector(), t)

    def field_energy(self, params: PlasmaParams) -> float:
        """(eps0/2m)|E|^2 + (1/2 mu0 m) |B|^2 integrated over the torus."""
        e2 = float(np.sum(self.E * self.E))
        b2 = float(np.sum(self.B * self.B))
        return (params.eps0 / (2 * params.m) * e2
                + 1.0 / (2 * params.mu0 * params.m) * b2) * self.grid.cell_area

    def copy(self) -> "EMState":
        return EMState(self.grid, self.E.copy(), self.B.copy(), self.t)


@dataclass
class LimitState:
    """State of the drift-limit model: concentration, electric field and the
    reconstructed first-order magnetic correction (third component only)."""

    grid: PerpGrid
    n: np.ndarray
    E: np.ndarray
    b1: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.grid.check_scalar(self.n)
        self.grid.check_vector(self.E)
        self.grid.check_scalar(self.b1)

    def mass(self) -> float:
        return float(self.n.sum()) * self.grid.cell_area

    def copy(self) -> "LimitState":
        return LimitState(self.grid, self.n.copy(), self.E.copy(), self.b1.copy(), self.t)


#: Column order used whenever a diagnostics record is serialized.
RECORD_COLUMNS = (
    "t", "eps", "mass", "kinetic_energy", "field_energy", "free_energy",
    "entropy_dissipation", "modulated_energy", "kinetic_relative_entropy",
    "l1_distance", "gauss_residual", "flux_equivalence_residual",
)


@dataclass
class DiagnosticsRecord:
    """One timestamped row of every scalar functional tracked by the runs."""

    t: float
    eps: float
    mass: float
    kinetic_energy: float
    field_energy: float
    free_energy: float
    entropy_dissipation: float
    modulated_energy: float
    kinetic_relative_entropy: float
    l1_distance: float
    gauss_residual: float
    flux_equivalence_residual: float

    def validate(self):
        vals = [getattr(self, c) for c in RECORD_COLUMNS]
        if not all(np.isfinite(v) for v in vals):
            raise ParameterError("diagnostics record contains non-finite entries")
        if self.mass <= 0:
            raise ParameterError("recorded mass must be positive")
        if self.modulated_energy < 0 or self.kinetic_relative_entropy < 0:
            raise ParameterError("entropy functionals must be nonnegative")

    def as_row(self):
        return [getattr(self, c) for c in RECORD_COLUMNS]


def maxwellian(v, sigma: float):
    """Maxwellian density ``exp(-|v|^2/2 sigma) / (2 pi sigma)^{3/2}``.

    ``v`` is a velocity triple or an array whose last axis has length 3.
    """
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    v = np.asarray(v, dtype=float)
    v2 = np.sum(v * v, axis=-1)
    return np.exp(-v2 / (2.0 * sigma)) / (2.0 * np.pi * sigma) ** 1.5


def rotate_velocity(v, theta: float, b):
    """Rotate ``v`` by angle ``theta`` around the unit axis ``b``.

    Implements ``R(theta, b) v = cos(theta)(I - b b^T)v - sin(theta)(v x b)
    + (v . b) b``; the Euclidean norm is preserved exactly.
    """
    v = np.asarray(v, dtype=float)
    b = np.asarray(b, dtype=float)
    if abs(np.linalg.norm(b) - 1.0) > 1e-12:
        raise ParameterError("rotation axis must be a unit vector")
    vb = np.dot(v, b)
    perp = v - vb * b
    return np.cos(theta) * perp - np.sin(theta) * np.cross(v, b) + vb * b


def moments(f: DistributionField):
    """Velocity moments of ``f`` by midpoint quadrature.

    Returns ``(n, j, stress, ke_density)`` where ``n`` is the concentration,
    ``j`` the current density ``int v f dv``, ``stress`` the second-moment
    tensor ``int v (x) v f dv`` with shape ``(3, 3, n1, n2)`` and
    ``ke_density`` the kinetic energy density ``int |v|^2/2 f dv``.
    """
    dv = f.vgrid.cell_volume
    v = f.vgrid.nodes
    vals = f.values
    n = vals.sum(axis=(2, 3, 4)) * dv

    j = np.empty((3, f.grid.n1, f.grid.n2))
    j[0] = np.einsum("abijk,i->ab", vals, v) * dv
    j[1] = np.einsum("abijk,j->ab", vals, v) * dv
    j[2] = np.einsum("abijk,k->ab", vals, v) * dv

    s11 = np.einsum("abijk,i->ab", vals, v * v) * dv
    s22 = np.einsum("abijk,j->ab", vals, v * v) * dv
    s33 = np.einsum("abijk,k->ab", vals, v * v) * dv
    s12 = np.einsum("abijk,i,j->ab", vals, v, v) * dv
    s13 = np.einsum("abijk,i,k->ab", vals, v, v) * dv
    s23 = np.einsum("abijk,j,k->ab", vals, v, v) * dv
    stress = np.empty((3, 3, f.grid.n1, f.grid.n2))
    stress[0, 0], stress[1, 1], stress[2, 2] = s11, s22, s33
    stress[0, 1] = stress[1, 0] = s12
    stress[0, 2] = stress[2, 0] = s13
    stress[1, 2] = stress[2, 1] = s23

    ke = 0.5 * (s11 + s22 + s33)
    return n, j, stress, ke


def number_density(f: DistributionField) -> np.ndarray:
    """Concentration only; cheap path used inside time loops."""
    return f.values.sum(axis=(2, 3, 4)) * f.vgrid.cell_volume


def current_density(f: DistributionField) -> np.ndarray:
    """First moment only; cheap path used inside time loops."""
    dv = f.vgrid.cell_volume
    v = f.vgrid.nodes
    j = np.empty((3, f.grid.n1, f.grid.n2))
    j[0] = np.einsum("abijk,i->ab", f.values, v) * dv
    j[1] = np.einsum("abijk,j->ab", f.values, v) * dv
    j[2] = np.einsum("abijk,k->ab", f.values, v) * dv
    return j


def kinetic_energy(f: DistributionField) -> float:
    """Total kinetic energy ``int |v|^2/2 f``."""
    v = f.vgrid.nodes
    v2 = (v[:, None, None] ** 2 + v[None, :, None] ** 2 + v[None, None, :] ** 2)
    return 0.5 * float(np.einsum("abijk,ijk->", f.values, v2)) * f.phase_volume


class SpectralCalculus:
    """FFT vector calculus on the periodic grid with the third derivative
    identically zero.

    A real-to-real first derivative annihilates its own Nyquist mode (the
    nodal derivative of the sawtooth pattern is zero), so the two derivative
    multipliers carry a zeroed Nyquist entry.  Consequently the four corner
    modes with ``k1 = k2 = 0`` (the mean and the three pure-Nyquist corners)
    are invisible to every operator here; ``resolve`` removes the Nyquist
    corners.  On the remaining band, div(curl) and curl(grad) vanish to
    round-off and the Poisson inverse composes exactly with the divergence.
    """

    def __init__(self, grid: PerpGrid):
        self.grid = grid
        k1 = 2.0 * np.pi * np.fft.fftfreq(grid.n1, d=grid.h1)
        k2 = 2.0 * np.pi * np.fft.fftfreq(grid.n2, d=grid.h2)
        k1[grid.n1 // 2] = 0.0
        k2[grid.n2 // 2] = 0.0
        self.k1 = k1[:, None]
        self.k2 = k2[None, :]
        self.k_sq = self.k1 ** 2 + self.k2 ** 2
        inv = np.zeros_like(self.k_sq)
        nonzero = self.k_sq > 0
        inv[nonzero] = 1.0 / self.k_sq[nonzero]
        self.inv_k_sq = inv

    def _check(self, a):
        self.grid.check_scalar(a)

    def dx1(self, a):
        self._check(a)
        return np.real(np.fft.ifft2(1j * self.k1 * np.fft.fft2(a)))

    def dx2(self, a):
        self._check(a)
        return np.real(np.fft.ifft2(1j * self.k2 * np.fft.fft2(a)))

    def resolve(self, a):
        """Remove the three Nyquist-corner modes no derivative can see."""
        self._check(a)
        ah = np.fft.fft2(a)
        ah[self.grid.n1 // 2, 0] = 0.0
        ah[0, self.grid.n2 // 2] = 0.0
        ah[self.grid.n1 // 2, self.grid.n2 // 2] = 0.0
        return np.real(np.fft.ifft2(ah))

    def grad(self, a):
        """Gradient of a scalar, returned as a 3-vector field (third comp 0)."""
        ah = np.fft.fft2(a)
        out = np.empty((3, self.grid.n1, self.grid.n2))
        out[0] = np.real(np.fft.ifft2(1j * self.k1 * ah))
        out[1] = np.real(np.fft.ifft2(1j * self.k2 * ah))
        out[2] = 0.0
        return out

    def div(self, u):
        self.grid.check_vector(u)
        return self.dx1(u[0]) + self.dx2(u[1])

    def curl(self, u):
        """Full curl of a 3-vector field with d/dx3 = 0."""
        self.grid.check_vector(u)
        out = np.empty_like(u)
        out[0] = self.dx2(u[2])
        out[1] = -self.dx1(u[2])
        out[2] = self.dx1(u[1]) - self.dx2(u[0])
        return out

    def curl_z(self, u):
        """In-plane scalar curl d1 u2 - d2 u1."""
        self.grid.check_vector(u)
        return self.dx1(u[1]) - self.dx2(u[0])

    def inverse_laplacian(self, a):
        """Zero-mean solution of ``-lap(phi) = a`` on the resolved band."""
        self._check(a)
        ah = np.fft.fft2(a) * self.inv_k_sq
        return np.real(np.fft.ifft2(ah))

    def mean(self, a):
        return float(np.mean(a))
