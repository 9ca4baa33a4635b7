"""Seeded verification suites behind the `verify` subcommand.

Each suite returns {check_name: {"pass": bool, "value": float}} where value is
the measured quantity (residual, defect, ratio). Sizes are kept small so the
full matrix runs in well under a minute; the heavyweight equivalents live in
the test suite.
"""

from __future__ import annotations

import numpy as np


def _rng(rc, salt: int):
    return np.random.default_rng((rc.seed, salt))


def _check(value: float, tol: float, flip: bool = False) -> dict:
    ok = value > tol if flip else value <= tol
    return {"pass": bool(ok), "value": float(value)}


def suite_geometry(rc) -> dict:
    from .geometry import flatten_map, unflatten_map, quarter_gap_margin
    from .grid import TorusGrid, random_interface

    cfg = rc.physical
    grid = TorusGrid(n=cfg.n, L=rc.L, N=32)
    rng = _rng(rc, 1)
    eta = random_interface(grid, rng, cfg.m, band=3)
    sup = max(np.max(np.abs(grid.ifft(eta[l]).real)) for l in range(cfg.m))
    eta *= 0.1 * cfg.min_gap() / sup
    a = list(cfg.a)
    worst = 0.0
    for _ in range(50):
        lay = int(rng.integers(cfg.m))
        lo = 0.0 if lay == 0 else a[lay - 1]
        x = rng.uniform(0, rc.L, size=grid.dim_h)
        y = rng.uniform(lo, a[lay])
        _, yy = flatten_map(a, eta, grid, lay, x, y)
        _, back = unflatten_map(a, eta, grid, lay, x, yy)
        worst = max(worst, abs(back - y))
    out = {"flatten_round_trip": _check(worst, 1e-12)}
    out["quarter_gap_margin"] = _check(
        quarter_gap_margin(a, eta, grid), 0.0, flip=True)
    return out


def suite_divtools(rc) -> dict:
    from .divtools import (compatibility_estimate, divergence_residual,
                           multi_trace_solve)
    from .grid import TorusGrid, LayerMesh, random_field, vertical_integral

    cfg = rc.physical
    grid = TorusGrid(n=cfg.n, L=rc.L, N=32)
    mesh = LayerMesh(cfg.a, 24)
    rng = _rng(rc, 2)
    from .grid import random_interface
    f = random_field(grid, mesh, rng, ncomp=1, band=3)
    g = random_interface(grid, rng, cfg.m, band=3)
    for l in range(cfg.m):
        g[l, 0] = vertical_integral(f, mesh.a[l + 1])[0, 0]
    u = multi_trace_solve(f, g)
    res = divergence_residual(u, f)
    est = compatibility_estimate(u, f, g)
    return {
        "divergence_residual": _check(res, 1e-10),
        "estimate_holds": {"pass": bool(est["holds"]),
                           "value": float(est["lhs"] / est["rhs"])},
    }


def suite_symbols(rc) -> dict:
    from .symbols import verify_asymptotics

    rep = verify_asymptotics(rc.physical, npts=13)
    return {
        "slope_low": _check(abs(rep["slope_low"] - 2.0), 0.1),
        "slope_high": _check(abs(rep["slope_high"] + 1.0), 0.1),
        "adjoint_defect": _check(rep["adjoint_defect"], 1e-8),
        "coercivity": _check(rep["coercivity_min"], 0.0, flip=True),
    }


def suite_compat(rc) -> dict:
    from .compat import bilinear_form, lattice_pairing, measure
    from .grid import (TorusGrid, LayerMesh, random_field, random_interface,
                       vertical_integral)
    from .symbols import SymbolCalculator

    cfg = rc.physical
    grid = TorusGrid(n=cfg.n, L=rc.L, N=16)
    mesh = LayerMesh(cfg.a, 16)
    rng = _rng(rc, 3)
    calc = SymbolCalculator(cfg, mesh=mesh)
    g = random_field(grid, mesh, rng, ncomp=1, band=2)
    f = random_field(grid, mesh, rng, ncomp=grid.n, band=2)
    k = random_interface(grid, rng, cfg.m, band=2, ncomp=grid.n)
    h = random_interface(grid, rng, cfg.m, band=2)
    for l in range(cfg.m):
        h[l, 0] = vertical_integral(g, mesh.a[l + 1])[0, 0]
    psi = random_interface(grid, rng, cfg.m, band=2)
    cm = measure(g, f, k, h, cfg, calc)
    lhs = lattice_pairing(psi, cm.phi, grid)
    rhs = bilinear_form(g, f, k, h, psi, cfg, calc)
    rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    return {"duality_oracle": _check(rel, 1e-10)}


def suite_linear(rc) -> dict:
    from .grid import (TorusGrid, LayerMesh, random_field, random_interface)
    from .linear import FlatState, LinearSolver

    cfg = rc.physical
    grid = TorusGrid(n=cfg.n, L=rc.L, N=32)
    mesh = LayerMesh(cfg.a, 32)
    rng = _rng(rc, 4)
    solver = LinearSolver(cfg, grid, mesh, rc.mode)
    u = random_field(grid, mesh, rng, ncomp=grid.n, band=3, zero_bottom=True)
    p = random_field(grid, mesh, rng, ncomp=1, band=3)
    eta = 0.01 * random_interface(grid, rng, cfg.m, band=3, zero_mean=True)
    state = FlatState(p, u, eta, mode=rc.mode)
    data = solver.forward(state)
    rec, rep = solver.inverse(data)
    scale = max(np.max(np.abs(eta)), 1e-300)
    err = np.max(np.abs(rec.eta - eta)) / scale
    for l in range(cfg.m):
        du = np.max(np.abs(rec.u.data[l] - u.data[l]))
        err = max(err, du / max(np.max(np.abs(u.data[l])), 1e-300))
    return {
        "state_round_trip": _check(float(err), 1e-8),
        "consistency": _check(rep["consistency_relative"], 1e-8),
    }


def suite_wave(rc) -> dict:
    from .grid import TorusGrid, LayerMesh
    from .wave import ForcingSpec, WaveSolver

    cfg = rc.physical
    grid = TorusGrid(n=cfg.n, L=rc.L, N=32)
    mesh = LayerMesh(cfg.a, 32)
    ws = WaveSolver(cfg, grid, mesh, rc.mode, rtol=rc.rtol, atol=rc.atol,
                    max_iter=rc.max_iter)
    forcing = ForcingSpec.gaussian_bump(grid, cfg.m, center=0.5 * rc.L,
                                        width=0.12 * rc.L, amplitude=1e-2)
    state, rep = ws.solve(forcing)
    worst_ratio = max(rep.contraction_ratios) if rep.contraction_ratios else 0.0
    return {
        "converged": {"pass": bool(rep.converged),
                      "value": float(rep.residual_norms[-1])},
        "contraction": _check(worst_ratio, 0.9),
        "quarter_gap": _check(min(rep.quarter_gap_margins), 0.0, flip=True),
    }
