"""Compatibility measurement: the duality oracle (two independent evaluation
routes for the same pairing) and the symbol identity measure(forward) = p eta.
"""

import numpy as np
import pytest

from stratawave.compat import (IncompatibleZeroMode, bilinear_form,
                               lattice_pairing, measure)
from stratawave.grid import (LayerMesh, TorusGrid, random_field,
                             random_interface, vertical_integral)
from stratawave.linear import FlatState
from stratawave.symbols import SymbolCalculator


def random_data(cfg, grid, mesh, seed, band=2):
    rng = np.random.default_rng(seed)
    g = random_field(grid, mesh, rng, ncomp=1, band=band)
    f = random_field(grid, mesh, rng, ncomp=grid.n, band=band)
    k = random_interface(grid, rng, cfg.m, band=band, ncomp=grid.n)
    h = random_interface(grid, rng, cfg.m, band=band)
    for l in range(cfg.m):
        h[l, 0] = vertical_integral(g, mesh.a[l + 1])[0, 0]
    return g, f, k, h


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_duality_oracle(cfg, seed):
    # route A: per-interface dual solves, coefficient-space pairing
    # route B: one combined dual solve per frequency, physical quadrature
    grid = TorusGrid(n=2, L=1.0, N=16)
    mesh = LayerMesh(cfg.a, 16)
    calc = SymbolCalculator(cfg, mesh=mesh)
    g, f, k, h = random_data(cfg, grid, mesh, seed)
    psi = random_interface(grid, np.random.default_rng(100 + seed), cfg.m,
                           band=2)
    cm = measure(g, f, k, h, cfg, calc)
    lhs = lattice_pairing(psi, cm.phi, grid)
    rhs = bilinear_form(g, f, k, h, psi, cfg, calc)
    assert abs(lhs - rhs) <= 1e-11 * max(abs(lhs), abs(rhs))


def test_measure_of_forward_is_symbol_times_eta(lin_solver, grid64, mesh32,
                                                cfg, rng):
    u = random_field(grid64, mesh32, rng, ncomp=2, band=4, zero_bottom=True)
    p = random_field(grid64, mesh32, rng, ncomp=1, band=4)
    eta = 0.01 * random_interface(grid64, rng, 2, band=4, zero_mean=True)
    data = lin_solver.forward(FlatState(p, u, eta))
    cm = measure(data.g, data.f, data.k, data.h, cfg, lin_solver.calc)
    want = np.zeros_like(eta)
    for idx in range(grid64.nlat):
        want[:, idx] = lin_solver.table.p_at(idx) @ eta[:, idx]
    scale = np.max(np.abs(want))
    assert np.max(np.abs(cm.phi - want)) < 1e-9 * scale


def test_measure_is_real_symmetric(cfg, grid64, mesh32, lin_solver, rng):
    g, f, k, h = random_data(cfg, grid64, mesh32, 12, band=3)
    cm = measure(g, f, k, h, cfg, lin_solver.calc)
    assert grid64.is_real(cm.phi, tol=1e-10)


def test_zero_mode_violation_raises(cfg, grid64, mesh32, lin_solver, rng):
    g, f, k, h = random_data(cfg, grid64, mesh32, 13)
    h[0, 0] += 0.5
    with pytest.raises(IncompatibleZeroMode, match="incompatible zero mode"):
        measure(g, f, k, h, cfg, lin_solver.calc)


def test_measure_diagnostics_present(cfg, grid64, mesh32, lin_solver):
    g, f, k, h = random_data(cfg, grid64, mesh32, 14)
    cm = measure(g, f, k, h, cfg, lin_solver.calc)
    for key in ("zero_mode", "data_scale", "Hdot-1", "H3/2"):
        assert key in cm.diagnostics
    assert cm.norm() > 0  # generic data is incompatible
