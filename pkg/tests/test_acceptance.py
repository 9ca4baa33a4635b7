"""End-to-end acceptance criteria for the reference configuration
(n=2, m=2, a=(1,2), rho=(2,1), mu=(1,0.5), gamma=1).

Each test prints a single PASS/FAIL line and enforces a wall-time budget.
"""

import time

import numpy as np
import pytest

from stratawave.config import reference_config
from stratawave.grid import (LayerMesh, SpectralField, TorusGrid, norm_volume,
                             random_field, random_interface, vertical_integral)
from stratawave.linear import FlatState, LinearSolver
from stratawave.symbols import SymbolCalculator, verify_asymptotics
from stratawave.wave import (ForcingSpec, WaveSolver,
                             eulerian_momentum_residual,
                             sample_interior_points, unflatten)


def report(num, ok, detail=""):
    line = f"acceptance {num}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def acc_cfg():
    return reference_config()


def test_acceptance_1_symbol_asymptotics(acc_cfg):
    t0 = time.time()
    rep = verify_asymptotics(acc_cfg)
    elapsed = time.time() - t0
    ok = (abs(rep["slope_low"] - 2.0) <= 0.1
          and abs(rep["slope_high"] + 1.0) <= 0.1
          and rep["coercivity_min"] > 0.0
          and elapsed < 60.0)
    report(1, ok, f"slopes {rep['slope_low']:.3f}/{rep['slope_high']:.3f}, "
                  f"coercivity {rep['coercivity_min']:.2e}, {elapsed:.1f}s")


def test_acceptance_2_adjoint_identity(acc_cfg):
    t0 = time.time()
    calc = SymbolCalculator(acc_cfg)
    radii = np.geomspace(1e-2, 1e2, 50)
    worst = 0.0
    for i, r in enumerate(radii):
        xi = np.array([r if i % 2 == 0 else -r])
        nm = calc.n_matrix(xi, +1)
        defect = np.linalg.norm(nm.conj().T - calc.n_matrix(xi, -1), 2) \
            / np.linalg.norm(nm, 2)
        worst = max(worst, float(defect))
    elapsed = time.time() - t0
    ok = worst <= 1e-8 and elapsed < 30.0
    report(2, ok, f"max defect {worst:.2e} over 50 frequencies, {elapsed:.1f}s")


def _energy_ratios(cfg, N, seeds, band=8):
    grid = TorusGrid(n=2, L=1.0, N=N)
    mesh = LayerMesh(cfg.a, 32)
    calc = SymbolCalculator(cfg, mesh=mesh)
    ratios = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        psi = random_interface(grid, rng, cfg.m, band=band, zero_mean=True)
        u = SpectralField.zeros(grid, mesh, ncomp=grid.n)
        denom = 0.0
        for idx in range(grid.nlat):
            xn = grid.xi_norm[idx]
            if xn == 0.0 or np.max(np.abs(psi[:, idx])) == 0.0:
                continue
            duals = calc.dual_solutions(grid.xi[idx], sign=+1)
            for l in range(cfg.m):
                for lay in range(cfg.m):
                    u.data[lay][:, idx, :] += psi[l, idx] * duals[l].u[lay]
            denom += min(xn**2, 1.0 / xn) * float(
                np.sum(np.abs(psi[:, idx]) ** 2))
        ratios.append(norm_volume(u, order=1) ** 2 / denom)
    return ratios


def test_acceptance_3_energy_equivalence(acc_cfg):
    t0 = time.time()
    seeds = list(range(20))
    r1 = _energy_ratios(acc_cfg, 64, seeds)
    r2 = _energy_ratios(acc_cfg, 128, seeds)
    c1 = max(max(r1), 1.0 / min(r1))
    c2 = max(max(r2), 1.0 / min(r2))
    elapsed = time.time() - t0
    ok = (min(r1) > 0 and abs(c2 - c1) / c1 < 0.2 and elapsed < 60.0)
    report(3, ok, f"c(N=64)={c1:.3f}, c(N=128)={c2:.3f}, {elapsed:.1f}s")


def test_acceptance_4_divergence_toolbox():
    from stratawave.divtools import (compatibility_estimate,
                                     divergence_residual, multi_trace_solve)
    t0 = time.time()
    a = [1.0, 2.0, 3.0]
    grid = TorusGrid(n=2, L=1.0, N=32)
    mesh = LayerMesh(a, 24)
    worst = 0.0
    all_hold = True
    for seed in range(5):
        rng = np.random.default_rng(seed)
        f = random_field(grid, mesh, rng, ncomp=1, band=3)
        g = random_interface(grid, rng, 3, band=3)
        for l in range(3):
            g[l, 0] = vertical_integral(f, mesh.a[l + 1])[0, 0]
        u = multi_trace_solve(f, g)
        worst = max(worst, divergence_residual(u, f))
        for l in range(3):
            worst = max(worst, float(np.max(np.abs(
                u.trace(mesh.a[l + 1])[-1] - g[l]))))
        all_hold = all_hold and compatibility_estimate(u, f, g)["holds"]
    elapsed = time.time() - t0
    ok = worst <= 1e-10 and all_hold and elapsed < 20.0
    report(4, ok, f"max residual {worst:.2e}, estimate holds, {elapsed:.1f}s")


@pytest.fixture(scope="module")
def acc_linear(acc_cfg):
    grid = TorusGrid(n=2, L=1.0, N=64)
    mesh = LayerMesh(acc_cfg.a, 32)
    return LinearSolver(acc_cfg, grid, mesh, "surface_tension"), grid, mesh


def _random_state(grid, mesh, rng, mode):
    u = random_field(grid, mesh, rng, ncomp=grid.n, band=4, zero_bottom=True)
    p = random_field(grid, mesh, rng, ncomp=1, band=4)
    eta = 0.01 * random_interface(grid, rng, mesh.m, band=4, zero_mean=True)
    return FlatState(p, u, eta, mode=mode)


def test_acceptance_5_compatibility_measure(acc_cfg, acc_linear):
    from stratawave.compat import measure
    solver, grid, mesh = acc_linear
    t0 = time.time()
    rng = np.random.default_rng(50)
    state = _random_state(grid, mesh, rng, "surface_tension")
    state.eta[:] = 0.0  # flat surfaces: data lies in the solver's range
    data = solver.forward(state)
    cm = measure(data.g, data.f, data.k, data.h, acc_cfg, solver.calc)
    in_range = cm.norm() / data.scale()
    # generic stress perturbation leaves the range
    d2 = solver.forward(state)
    d2.k += 0.01 * random_interface(grid, rng, mesh.m, band=4, ncomp=grid.n)
    cm2 = measure(d2.g, d2.f, d2.k, d2.h, acc_cfg, solver.calc)
    perturbed = cm2.norm() / d2.scale()
    elapsed = time.time() - t0
    ok = in_range <= 1e-8 and perturbed > 1e-6 and elapsed < 60.0
    report(5, ok, f"in-range {in_range:.2e}, perturbed {perturbed:.2e}, "
                  f"{elapsed:.1f}s")


def test_acceptance_6_linear_round_trips(acc_cfg, acc_linear):
    solver_st, grid, mesh = acc_linear
    cfg_z = reference_config(mode="zero_surface_tension")
    solver_z = LinearSolver(cfg_z, grid, mesh, "zero_surface_tension")
    t0 = time.time()
    worst_state = worst_data = worst_cons = 0.0
    for mode, solver in (("surface_tension", solver_st),
                         ("zero_surface_tension", solver_z)):
        for seed in range(10):
            rng = np.random.default_rng(600 + seed)
            state = _random_state(grid, mesh, rng, mode)
            data = solver.forward(state)
            rec, rep = solver.inverse(data)
            worst_cons = max(worst_cons, rep["consistency_relative"])
            scale = max(np.max(np.abs(state.eta)), 1e-300)
            err = np.max(np.abs(rec.eta - state.eta)) / scale
            for l in range(mesh.m):
                err = max(err, np.max(np.abs(rec.u.data[l] - state.u.data[l]))
                          / np.max(np.abs(state.u.data[l])))
            worst_state = max(worst_state, float(err))
            back = solver.forward(rec)
            derr = max(np.max(np.abs(back.k - data.k)),
                       np.max(np.abs(back.h - data.h)))
            for l in range(mesh.m):
                derr = max(derr,
                           np.max(np.abs(back.f.data[l] - data.f.data[l])),
                           np.max(np.abs(back.g.data[l] - data.g.data[l])))
            worst_data = max(worst_data, float(derr / data.scale()))
    elapsed = time.time() - t0
    ok = (worst_state <= 1e-8 and worst_data <= 1e-8
          and worst_cons <= 1e-8 and elapsed < 120.0)
    report(6, ok, f"state {worst_state:.2e}, data {worst_data:.2e}, "
                  f"consistency {worst_cons:.2e}, {elapsed:.1f}s")


@pytest.fixture(scope="module")
def acc_wave(acc_cfg):
    grid = TorusGrid(n=2, L=1.0, N=64)
    mesh = LayerMesh(acc_cfg.a, 32)
    return WaveSolver(acc_cfg, grid, mesh), grid


def test_acceptance_7_picard_small_data(acc_cfg, acc_wave):
    ws, grid = acc_wave
    t0 = time.time()
    eps_values = (1e-4, 1e-3, 1e-2)
    amps = []
    worst_ratio = 0.0
    min_margin = np.inf
    for eps in eps_values:
        forcing = ForcingSpec.gaussian_bump(grid, acc_cfg.m, center=0.5,
                                            width=0.12, amplitude=eps)
        state, rep = ws.solve(forcing)
        assert rep.converged, rep.message
        worst_ratio = max(worst_ratio, max(rep.contraction_ratios))
        min_margin = min(min_margin, min(rep.quarter_gap_margins))
        amps.append(max(np.max(np.abs(grid.ifft(state.eta[l]).real))
                        for l in range(acc_cfg.m)))
    slope = float(np.polyfit(np.log(eps_values), np.log(amps), 1)[0])
    elapsed = time.time() - t0
    ok = (worst_ratio < 0.9 and abs(slope - 1.0) < 0.05
          and min_margin > 0 and elapsed < 300.0)
    report(7, ok, f"ratio {worst_ratio:.3f}, slope {slope:.4f}, "
                  f"margin {min_margin:.3f}, {elapsed:.1f}s")


def test_acceptance_8_eulerian_validity(acc_cfg, acc_wave):
    ws, grid = acc_wave
    t0 = time.time()
    forcing = ForcingSpec.gaussian_bump(grid, acc_cfg.m, center=0.5,
                                        width=0.12, amplitude=1e-2)
    state, rep = ws.solve(forcing)
    assert rep.converged
    bundle = unflatten(state, acc_cfg)
    pts = sample_interior_points(bundle, np.random.default_rng(8), npts=100,
                                 margin=0.02)
    res = eulerian_momentum_residual(bundle, pts, h=3e-3)
    elapsed = time.time() - t0
    ok = res <= 1e-4 and elapsed < 60.0
    report(8, ok, f"FD momentum residual {res:.2e} at 100 points, "
                  f"{elapsed:.1f}s")
