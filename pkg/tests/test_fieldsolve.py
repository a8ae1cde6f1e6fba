import numpy as np
import pytest

from vmfplab.core import EMState, SpectralCalculus
from vmfplab.errors import ConsistencyError, NeutralityViolation, StabilityError
from vmfplab.fieldsolve import (gauss_project, gauss_residual, maxwell_cfl_limit,
                                maxwell_step, reconstruct_b1, solve_poisson)

from conftest import make_params


class TestSolvePoisson:
    def test_zero_source(self):
        grid, _, params = make_params(n=16)
        sol = solve_poisson(np.zeros((16, 16)), params)
        assert not sol.phi.any() and not sol.E.any()

    def test_single_mode_closed_form(self):
        grid, _, params = make_params(n=64, eps0=2.0)
        x1, x2 = grid.nodes()
        k = 2 * np.pi / grid.length
        A = 0.7
        rho = A * np.cos(k * x1) * np.ones_like(x2)
        sol = solve_poisson(rho, params)
        expected = A / (params.eps0 * k) * np.sin(k * x1) * np.ones_like(x2)
        assert np.abs(sol.E[0] - expected).max() < 1e-13
        assert np.abs(sol.E[1]).max() < 1e-13
        assert abs(sol.phi.mean()) < 1e-14

    def test_neutrality_violation(self, rng):
        grid, _, params = make_params(n=16)
        rho = rng.standard_normal((16, 16))
        rho -= rho.mean()
        rho += 0.1 * np.sqrt((rho ** 2).mean())
        with pytest.raises(NeutralityViolation):
            solve_poisson(rho, params)

    def test_linearity(self, rng):
        grid, _, params = make_params(n=16)
        calc = SpectralCalculus(grid)
        rho = rng.standard_normal((16, 16))
        rho -= rho.mean()
        a = solve_poisson(rho, params, calc)
        b = solve_poisson(3.0 * rho, params, calc)
        assert np.allclose(b.E, 3.0 * a.E, rtol=1e-13, atol=1e-15)

    def test_gauss_law_invariant(self, rng):
        grid, _, params = make_params(n=32)
        calc = SpectralCalculus(grid)
        rho = calc.resolve(rng.standard_normal((32, 32)))
        rho -= rho.mean()
        sol = solve_poisson(rho, params, calc)
        res = np.linalg.norm(params.eps0 * calc.div(sol.E) - rho) / np.linalg.norm(rho)
        assert res < 1e-10
        assert np.abs(calc.curl_z(sol.E)).max() < 1e-10 * np.abs(sol.E).max()


class TestMaxwellStep:
    def test_uniform_fields_unchanged(self):
        grid, _, params = make_params(n=16)
        E = np.ones((3, 16, 16)) * np.array([0.3, -0.1, 0.2])[:, None, None]
        B = np.ones((3, 16, 16)) * np.array([0.0, 0.1, 0.5])[:, None, None]
        em = EMState(grid, E.copy(), B.copy())
        out = maxwell_step(em, np.zeros((3, 16, 16)), params, 1e-4)
        assert np.allclose(out.E, E, atol=1e-15)
        assert np.allclose(out.B, B, atol=1e-15)

    def test_plane_wave_one_period(self):
        grid, _, params = make_params(n=64, eps=0.5)
        x1, x2 = grid.nodes()
        k = 2 * np.pi / grid.length
        c = 1.0 / (params.eps * np.sqrt(params.mu0 * params.eps0))
        omega = k * c
        E0 = np.zeros((3, 64, 64))
        E0[1] = np.cos(k * x1) * np.ones_like(x2)
        B0 = np.zeros((3, 64, 64))
        B0[2] = np.sqrt(params.mu0 * params.eps0) * np.cos(k * x1) * np.ones_like(x2)
        em = EMState(grid, E0.copy(), B0.copy())
        steps = 200
        dt = 2 * np.pi / omega / steps
        J = np.zeros((3, 64, 64))
        with pytest.warns(UserWarning):
            for _ in range(steps):
                em = maxwell_step(em, J, params, dt)
        amp_err = abs(np.linalg.norm(em.E) / np.linalg.norm(E0) - 1.0)
        assert amp_err < 1e-3
        assert np.linalg.norm(em.E - E0) / np.linalg.norm(E0) < 1e-3

    def test_energy_balance_matches_work(self, rng):
        grid, _, params = make_params(n=32, m=1.7)
        calc = SpectralCalculus(grid)
        E = np.stack([calc.resolve(rng.standard_normal((32, 32))) for _ in range(3)])
        B = np.stack([calc.resolve(rng.standard_normal((32, 32))) for _ in range(3)])
        J = np.stack([calc.resolve(rng.standard_normal((32, 32))) for _ in range(3)])
        em = EMState(grid, E, B)
        dt = 1e-3
        out = maxwell_step(em, J, params, dt, calc=calc)
        dU = out.field_energy(params) - em.field_energy(params)
        Ebar = 0.5 * (em.E + out.E)
        work = -dt / (params.m * params.eps) * float((Ebar * J).sum()) * grid.cell_area
        assert abs(dU - work) < 1e-12 * max(abs(dU), 1.0)

    def test_div_b_preserved_many_steps(self, rng):
        grid, _, params = make_params(n=16)
        calc = SpectralCalculus(grid)
        E = np.stack([calc.resolve(rng.standard_normal((16, 16))) for _ in range(3)])
        # start from an exactly divergence-free B (curl of a potential)
        B = calc.curl(np.stack([calc.resolve(rng.standard_normal((16, 16))) for _ in range(3)]))
        em = EMState(grid, E, B)
        J = np.zeros((3, 16, 16))
        dt = maxwell_cfl_limit(params) * 0.5
        for _ in range(10000):
            em = maxwell_step(em, J, params, dt, calc=calc)
        assert np.abs(calc.div(em.B)).max() < 1e-10 * max(np.abs(em.B).max(), 1.0)

    def test_explicit_mode_cfl(self):
        grid, _, params = make_params(n=16)
        em = EMState.zeros(grid)
        J = np.zeros((3, 16, 16))
        dt_max = maxwell_cfl_limit(params)
        with pytest.raises(StabilityError):
            maxwell_step(em, J, params, 2 * dt_max, scheme="explicit")
        maxwell_step(em, J, params, 0.5 * dt_max, scheme="explicit")


class TestGaussProject:
    def test_consistent_state_unchanged(self, rng):
        grid, _, params = make_params(n=32)
        calc = SpectralCalculus(grid)
        rho = calc.resolve(rng.standard_normal((32, 32)))
        rho -= rho.mean()
        sol = solve_poisson(rho, params, calc)
        em = EMState(grid, sol.E.copy(), np.zeros((3, 32, 32)))
        out = gauss_project(em, rho, params, calc)
        assert np.abs(out.E - em.E).max() < 1e-13

    def test_from_zero_field_recovers_poisson(self, rng):
        grid, _, params = make_params(n=32)
        calc = SpectralCalculus(grid)
        x1, x2 = grid.nodes()
        rho = 0.8 * np.cos(2 * np.pi * x1) * np.ones_like(x2)
        out = gauss_project(EMState.zeros(grid), rho, params, calc)
        sol = solve_poisson(rho, params, calc)
        assert np.abs(out.E - sol.E).max() < 1e-13

    def test_curl_unchanged(self, rng):
        grid, _, params = make_params(n=32)
        calc = SpectralCalculus(grid)
        E = np.stack([calc.resolve(rng.standard_normal((32, 32))) for _ in range(3)])
        rho = calc.resolve(rng.standard_normal((32, 32)))
        rho -= rho.mean()
        em = EMState(grid, E, np.zeros((3, 32, 32)))
        out = gauss_project(em, rho, params, calc)
        assert np.abs(calc.curl_z(out.E) - calc.curl_z(em.E)).max() < 1e-12
        assert gauss_residual(out, rho, params, calc) < 1e-10


class TestReconstructB1:
    def test_zero_source(self):
        grid, _, params = make_params(n=32)
        b1 = reconstruct_b1(np.ones((32, 32)), np.zeros((3, 32, 32)),
                            np.zeros((3, 32, 32)), params)
        assert np.abs(b1).max() < 1e-14

    def test_manufactured_solution(self):
        grid, _, params = make_params(n=64)
        calc = SpectralCalculus(grid)
        x1, x2 = grid.nodes()
        k = 2 * np.pi / grid.length
        b1_exact = np.sin(k * x1) * np.ones_like(x2)
        field = np.zeros((3, 64, 64))
        field[2] = b1_exact
        R = calc.curl(field)
        dtE = R / (params.mu0 * params.eps0)
        b1 = reconstruct_b1(np.ones((64, 64)), np.zeros((3, 64, 64)), dtE, params, calc)
        assert np.abs(b1 - b1_exact).max() < 1e-10
        assert abs(b1.mean()) < 1e-14

    def test_gradient_source_rejected(self):
        grid, _, params = make_params(n=32)
        calc = SpectralCalculus(grid)
        x1, x2 = grid.nodes()
        g = calc.grad(np.cos(2 * np.pi * x1) * np.ones_like(x2))
        with pytest.raises(ConsistencyError):
            reconstruct_b1(np.ones((32, 32)), np.zeros((3, 32, 32)),
                           g / (params.mu0 * params.eps0), params, calc)
