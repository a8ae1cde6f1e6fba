import numpy as np
import pytest

from vmfplab.core import LimitState, PerpGrid, PlasmaParams, SpectralCalculus
from vmfplab.errors import PositivityError, StabilityError
from vmfplab.fieldsolve import solve_poisson
from vmfplab.limit import (compute_k, drift_velocity, flux_equivalence_residual,
                           limit_step)

from conftest import make_params


class TestComputeK:
    def test_uniform_no_field(self):
        grid, _, params = make_params(n=16)
        k = compute_k(np.ones((16, 16)), np.zeros((3, 16, 16)), params)
        assert np.abs(k).max() < 1e-13

    def test_boltzmann_cancellation(self):
        # choose E = (m sigma / q) grad(n)/n so k[n] vanishes by construction
        grid, _, params = make_params(n=32, sigma=1.3, q=2.0, m=0.7)
        calc = SpectralCalculus(grid)
        x1, x2 = grid.nodes()
        n = 1.0 + 0.4 * np.cos(2 * np.pi * x1) * np.ones_like(x2)
        E = params.m * params.sigma / params.q * calc.grad(n) / n
        k = compute_k(n, E, params, calc)
        assert np.abs(k).max() < 1e-11

    def test_single_mode_formula(self):
        grid, _, params = make_params(n=64, sigma=0.9)
        calc = SpectralCalculus(grid)
        x1, x2 = grid.nodes()
        kw = 2 * np.pi / grid.length
        n = 1.0 + 0.5 * np.cos(kw * x1) * np.ones_like(x2)
        k = compute_k(n, np.zeros((3, 64, 64)), params, calc)
        expected = -params.sigma * 0.5 * kw * np.sin(kw * x1) * np.ones_like(x2) / n
        assert np.abs(k[0] - expected).max() < 1e-10
        assert np.abs(k[2]).max() == 0.0

    def test_axis_component_vanishes(self, rng):
        grid, _, params = make_params(n=16)
        calc = SpectralCalculus(grid)
        n = 1.0 + 0.3 * calc.resolve(rng.random((16, 16)))
        E = np.stack([calc.resolve(rng.standard_normal((16, 16))) for _ in range(2)]
                     + [np.zeros((16, 16))])
        k = compute_k(n, E, params, calc)
        assert not k[2].any()

    def test_positivity_floor(self):
        grid, _, params = make_params(n=16)
        n = np.ones((16, 16))
        n[3, 4] = 0.0
        with pytest.raises(PositivityError):
            compute_k(n, np.zeros((3, 16, 16)), params)


class TestDriftVelocity:
    def test_cross_field_drift_uniform(self):
        grid, _, params = make_params(n=16, b0=2.0)
        E = np.zeros((3, 16, 16))
        E[0] = 0.5
        d = drift_velocity(np.ones((16, 16)), E, params)
        assert np.allclose(d.v_exb[0], 0.0, atol=1e-14)
        assert np.allclose(d.v_exb[1], -0.25, atol=1e-14)
        assert not d.v_gd.any() and not d.v_cd.any()

    def test_no_field_uniform_b_total_zero(self):
        grid, _, params = make_params(n=16, b0=3.0)
        d = drift_velocity(np.ones((16, 16)), np.zeros((3, 16, 16)), params)
        assert np.abs(d.total).max() < 1e-14

    def test_gradient_drift_formula(self):
        # B_ext = B0 (1 + beta x1): v_gd = (0, sigma d1(omega)/omega^2, 0)
        L, n = 1.0, 64
        grid = PerpGrid(L, n, n)
        x1, x2 = grid.nodes()
        beta = 0.3
        b_ext = 2.0 * (1.0 + beta * np.sin(2 * np.pi * x1 / L)) * np.ones_like(x2)
        params = PlasmaParams(q=1.5, m=0.5, sigma=1.1, tau=1, eps0=1, mu0=1,
                              eps=0.5, grid=grid, b_ext=b_ext,
                              d_background=np.ones((n, n)))
        d = drift_velocity(np.ones((n, n)), np.zeros((3, n, n)), params)
        omega = params.omega_c()
        d1_omega = (params.q / params.m) * 2.0 * beta * (2 * np.pi / L) \
            * np.cos(2 * np.pi * x1 / L) * np.ones_like(x2)
        expected = params.sigma * d1_omega / omega ** 2
        assert np.abs(d.v_gd[1] - expected).max() < 1e-10
        assert np.abs(d.v_gd[0]).max() < 1e-10
        assert np.abs(d.total - (d.v_exb + d.v_gd + d.v_cd)).max() == 0.0


class TestLimitStep:
    def _state(self, cfg_amp, n=32, d_ripple=0.1, b_ripple=0.2):
        grid, _, params = make_params(n=n, b0=5.0, b_ripple=b_ripple)
        x1, x2 = grid.nodes()
        wave = np.cos(2 * np.pi * x1 / grid.length) * np.ones_like(x2)
        d_bg = 1.0 + d_ripple * wave
        params = PlasmaParams(q=params.q, m=params.m, sigma=params.sigma,
                              tau=params.tau, eps0=params.eps0, mu0=params.mu0,
                              eps=params.eps, grid=grid, b_ext=params.b_ext,
                              d_background=d_bg)
        n0 = d_bg * (1.0 + cfg_amp * wave * np.cos(2 * np.pi * x2 / grid.length))
        E0 = solve_poisson(params.q * (n0 - d_bg), params).E
        return LimitState(grid, n0, E0, np.zeros((n, n)), 0.0), params

    def test_steady_state(self):
        # n = D with uniform B: E = 0 and the drift vanishes
        grid, _, params = make_params(n=16, b0=2.0, b_ripple=0.0)
        state = LimitState(grid, np.ones((16, 16)), np.zeros((3, 16, 16)),
                           np.zeros((16, 16)), 0.0)
        out = limit_step(state, 1e-3, params)
        assert np.abs(out.n - state.n).max() < 1e-14

    def test_mass_exact(self):
        state, params = self._state(0.1)
        m0 = state.mass()
        for _ in range(20):
            state = limit_step(state, 1e-3, params)
        assert abs(state.mass() - m0) < 1e-12 * m0

    def test_positivity_with_limiter(self):
        state, params = self._state(0.2)
        for _ in range(50):
            state = limit_step(state, 2e-3, params)
            assert state.n.min() >= 0.0

    def test_free_energy_drift_small(self):
        state, params = self._state(0.1, n=32)
        area = state.grid.cell_area

        def free_energy(s):
            ent = params.sigma * float((s.n * np.log(np.maximum(s.n, 1e-30))).sum()) * area
            field = params.eps0 / (2 * params.m) * float((s.E ** 2).sum()) * area
            return ent + field

        fe0 = free_energy(state)
        dt = 1e-3
        for _ in range(100):
            state = limit_step(state, dt, params)
        assert abs(free_energy(state) - fe0) < 1e-5

    def test_cfl_violation_raises(self):
        state, params = self._state(0.2)
        with pytest.raises(StabilityError):
            limit_step(state, 1e3, params)


class TestFluxEquivalence:
    def test_uniform_zero(self):
        grid, _, params = make_params(n=16)
        res = flux_equivalence_residual(np.ones((16, 16)), np.zeros((3, 16, 16)), params)
        assert res < 1e-12

    def test_uniform_omega_identity(self, rng):
        # with constant omega_c and E = 0 both sides are curl-of-gradient
        grid, _, params = make_params(n=32, b0=3.0, b_ripple=0.0)
        calc = SpectralCalculus(grid)
        n = 1.5 + 0.5 * calc.resolve(np.cos(2 * np.pi * grid.nodes()[0])
                                     * np.cos(4 * np.pi * grid.nodes()[1]))
        res = flux_equivalence_residual(n, np.zeros((3, 32, 32)), params, calc)
        assert res < 1e-10

    def test_refinement_order(self):
        # fixed smooth continuum fields sampled on finer and finer grids
        residuals = []
        for n in (32, 64, 128):
            grid = PerpGrid(1.0, n, n)
            x1, x2 = grid.nodes()
            w = 0.025

            def bump(cx, cy):
                d1 = np.minimum(np.abs(x1 - cx), 1 - np.abs(x1 - cx))
                d2 = np.minimum(np.abs(x2 - cy), 1 - np.abs(x2 - cy))
                return np.exp(-(d1 ** 2 + d2 ** 2) / (2 * w ** 2))

            nfield = 1.0 + 0.5 * bump(0.4, 0.55) + 0.3 * bump(0.7, 0.2)
            E = np.zeros((3, n, n))
            E[0] = 0.2 * np.sin(2 * np.pi * x1) * np.cos(4 * np.pi * x2) + 0.1 * bump(0.2, 0.8)
            E[1] = 0.15 * np.cos(4 * np.pi * x1) * np.sin(2 * np.pi * x2)
            b_ext = 4.0 * (1 + 0.3 * np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2)
                           + 0.2 * bump(0.6, 0.6))
            params = PlasmaParams(q=1.3, m=0.8, sigma=1.1, tau=1, eps0=1, mu0=1,
                                  eps=0.5, grid=grid, b_ext=b_ext,
                                  d_background=np.ones((n, n)))
            residuals.append(flux_equivalence_residual(nfield, E, params))
        order1 = np.log2(residuals[0] / residuals[1])
        order2 = np.log2(residuals[1] / max(residuals[2], 1e-300))
        assert order1 >= 2.0 and order2 >= 2.0
