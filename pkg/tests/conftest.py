import warnings

import numpy as np
import pytest

from vmfplab.core import PerpGrid, PlasmaParams, VelGrid

warnings.filterwarnings("ignore", message="The TBB threading layer")


def make_params(n=16, nv=16, L=1.0, vmax=6.0, b0=5.0, b_ripple=0.0,
                q=1.0, m=1.0, sigma=1.0, tau=1.0, eps0=1.0, mu0=1.0, eps=0.5,
                d0=1.0):
    grid = PerpGrid(L, n, n)
    x1, x2 = grid.nodes()
    wave = np.cos(2 * np.pi * x1 / L) * np.ones_like(x2)
    b_ext = b0 * (1.0 + b_ripple * wave)
    d_bg = d0 * np.ones((n, n))
    params = PlasmaParams(q=q, m=m, sigma=sigma, tau=tau, eps0=eps0, mu0=mu0,
                          eps=eps, grid=grid, b_ext=b_ext, d_background=d_bg)
    return grid, VelGrid(vmax, nv), params


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
