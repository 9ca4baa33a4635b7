import numpy as np
import pytest

from stratawave.config import reference_config
from stratawave.grid import LayerMesh, TorusGrid
from stratawave.linear import LinearSolver
from stratawave.wave import WaveSolver


@pytest.fixture(scope="session")
def cfg():
    return reference_config()


@pytest.fixture(scope="session")
def cfg_zero_st():
    return reference_config(mode="zero_surface_tension")


@pytest.fixture(scope="session")
def grid64():
    return TorusGrid(n=2, L=1.0, N=64)


@pytest.fixture(scope="session")
def mesh32(cfg):
    return LayerMesh(cfg.a, [32, 32])


@pytest.fixture(scope="session")
def lin_solver(cfg, grid64, mesh32):
    # shared across tests so the per-frequency LU caches amortize
    return LinearSolver(cfg, grid64, mesh32, "surface_tension")


@pytest.fixture(scope="session")
def lin_solver_zero_st(cfg_zero_st, grid64, mesh32):
    return LinearSolver(cfg_zero_st, grid64, mesh32, "zero_surface_tension")


@pytest.fixture(scope="session")
def wave_solver(cfg, grid64, mesh32):
    return WaveSolver(cfg, grid64, mesh32)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
