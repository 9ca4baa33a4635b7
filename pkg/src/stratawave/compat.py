"""Compatibility machinery for the overdetermined stress-data problem.

The measurement phi quantifies how far a data tuple (g, f, k, h) sits from the
range of the forward map. Per frequency and interface k it is computed from
the dual normal-stress solves (q_k, v_k) (unit vertical stress at interface k,
+gamma convention) as

    phi_k(xi) = int f_hat . conj(v_k) + sum_l k_l_hat . conj(v_k(a_l))
                - int g_hat conj(q_k) - h_k_hat .

The conjugation convention (no outer conjugate) is the one under which
measure(forward(p, u, eta)) = p_gamma(xi) eta_hat holds exactly; it is locked
in by the duality oracle test against bilinear_form, which evaluates the same
pairing through full-grid quadrature with one combined dual solve per
frequency instead of per-interface solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import PhysicalConfig
from .grid import LayerMesh, SpectralField, TorusGrid, norm_interface
from .symbols import SymbolCalculator

ZERO_MODE_TOL = 1e-9


class IncompatibleZeroMode(ValueError):
    pass


def data_scale(g: SpectralField, f: SpectralField, k: np.ndarray,
               h: np.ndarray) -> float:
    """Crude L2 magnitude of a data tuple, used for relative tolerances."""
    grid, mesh = g.grid, g.mesh
    vol = grid.L ** grid.dim_h
    total = 0.0
    for l in range(mesh.m):
        total += vol * float(np.sum((np.abs(g.data[l]) ** 2) @ mesh.w[l]))
        total += vol * float(np.sum((np.abs(f.data[l]) ** 2) @ mesh.w[l]))
    total += vol * float(np.sum(np.abs(k) ** 2))
    total += vol * float(np.sum(np.abs(h) ** 2))
    return math.sqrt(total)


def check_zero_modes(g: SpectralField, h: np.ndarray, tol: float = ZERO_MODE_TOL,
                     scale: float | None = None):
    """Enforce h_l(0) = int_0^{a_l} g(0, .) for each interface."""
    from .grid import vertical_integral
    mesh = g.mesh
    if scale is None:
        scale = max(float(np.max(np.abs(h))), 1e-300)
    for l in range(mesh.m):
        want = vertical_integral(g, mesh.a[l + 1])[0, 0]
        if abs(h[l, 0] - want) > tol * max(scale, 1e-300):
            raise IncompatibleZeroMode(
                f"incompatible zero mode at interface {l}: "
                f"h(0) - integral = {h[l, 0] - want:.3e}")


@dataclass
class CompatMeasurement:
    phi: np.ndarray  # (m, nlat)
    grid: TorusGrid
    diagnostics: dict = field(default_factory=dict)

    def norm(self) -> float:
        return norm_interface(self.phi, self.grid, which="L2")


def measure(g: SpectralField, f: SpectralField, k: np.ndarray, h: np.ndarray,
            config: PhysicalConfig, calc: SymbolCalculator | None = None,
            skip_tol: float = 1e-14,
            scale: float | None = None) -> CompatMeasurement:
    """Frequency-by-frequency compatibility measurement of a data tuple.

    g: scalar SpectralField, f: vector SpectralField (n comps),
    k: (m, n, nlat) interface stress coefficients, h: (m, nlat) trace data.
    Frequencies whose data magnitude is below skip_tol * scale are skipped.
    `scale` overrides the data's own magnitude in the relative checks.
    """
    grid, mesh = g.grid, g.mesh
    m = mesh.m
    n = grid.n
    if calc is None:
        calc = SymbolCalculator(config, mesh=mesh)
    if scale is None:
        scale = data_scale(g, f, k, h)
    check_zero_modes(g, h, scale=max(scale, 1e-300))

    # per-frequency data magnitude, for skipping dead modes
    mag = np.zeros(grid.nlat)
    for l in range(m):
        mag += np.sum(np.abs(g.data[l]), axis=(0, 2))
        mag += np.sum(np.abs(f.data[l]), axis=(0, 2))
    mag += np.sum(np.abs(k), axis=(0, 1)) + np.sum(np.abs(h), axis=0)

    phi = np.zeros((m, grid.nlat), dtype=complex)
    for idx in range(grid.nlat):
        if mag[idx] <= skip_tol * scale:
            continue
        duals = calc.dual_solutions(grid.xi[idx], sign=+1)
        for kk, sol in enumerate(duals):
            acc = 0.0 + 0.0j
            for l in range(m):
                for j in range(n):
                    acc += mesh.pair(l, f.data[l][j, idx], sol.u[l][j])
                acc -= mesh.pair(l, g.data[l][0, idx], sol.p[l])
                acc += k[l, :, idx] @ np.conj(sol.trace(l, top=True))
            phi[kk, idx] = acc - h[kk, idx]

    diag = {
        "zero_mode": float(np.max(np.abs(phi[:, 0]))),
        "data_scale": scale,
    }
    phi_hom = phi.copy()
    phi_hom[:, 0] = 0.0
    diag["Hdot-1"] = norm_interface(phi_hom, grid, which="Hdot-1")
    diag["H3/2"] = norm_interface(phi, grid, which="Hs", s=1.5)
    return CompatMeasurement(phi, grid, diag)


def bilinear_form(g: SpectralField, f: SpectralField, k: np.ndarray,
                  h: np.ndarray, psi: np.ndarray, config: PhysicalConfig,
                  calc: SymbolCalculator | None = None) -> float:
    """Independent full-grid evaluation of the compatibility pairing.

    psi: (m, nlat) real-symmetric interface coefficients. Returns the real
    pairing <F, v> + <k, v(a)> - <g, q> - <psi, h> where (q, v) is the single
    combined dual solve with stress data psi at each frequency, and the volume
    integrals run over the physical grid (quadrature, not mode-by-mode).
    """
    grid, mesh = g.grid, g.mesh
    m, n = mesh.m, grid.n
    if calc is None or calc.mesh is not mesh:
        calc = SymbolCalculator(config, mesh=mesh)
    sv = calc.solver_for(np.zeros(grid.dim_h))

    # combined dual solve per frequency
    V = SpectralField.zeros(grid, mesh, ncomp=n)
    Q = SpectralField.zeros(grid, mesh, ncomp=1)
    psi_mag = np.sum(np.abs(psi), axis=0)
    psi_scale = float(np.max(psi_mag)) or 1.0
    for idx in range(grid.nlat):
        if psi_mag[idx] <= 1e-16 * psi_scale:
            continue
        kvec = np.zeros((m, n), dtype=complex)
        kvec[:, -1] = psi[:, idx]
        sol = sv.problem(grid.xi[idx], +1).solve(k=kvec)
        for l in range(m):
            V.data[l][:, idx, :] = sol.u[l]
            Q.data[l][0, idx, :] = sol.p[l]

    # physical-space quadrature of the volume terms
    vol_weight = (grid.L / grid.N) ** grid.dim_h
    total = 0.0
    for l in range(m):
        P, wu = mesh._up[l]
        for fld, dual, sgn in ((f, V, +1.0), (g, Q, -1.0)):
            a = fld.data[l] @ P.T          # (ncomp, nlat, up-nodes)
            b = dual.data[l] @ P.T
            sa = grid.ifft(np.moveaxis(a, -1, 1).reshape(-1, grid.nlat))
            sb = grid.ifft(np.moveaxis(b, -1, 1).reshape(-1, grid.nlat))
            prod = np.real(sa * np.conj(sb)).reshape(
                (a.shape[0], a.shape[2]) + grid.shape)
            total += sgn * vol_weight * float(
                np.tensordot(prod.sum(axis=tuple(range(2, prod.ndim))),
                             wu, axes=1).sum())

    # interface terms on the physical grid
    for l in range(m):
        tr = np.zeros((n, grid.nlat), dtype=complex)
        for j in range(n):
            tr[j] = V.data[l][j, :, -1]
        sk = grid.ifft(k[l])
        st = grid.ifft(tr)
        total += (grid.L ** grid.dim_h / grid.nlat) * float(
            np.sum(np.real(sk * np.conj(st))))
        sp = grid.ifft(psi[l])
        sh = grid.ifft(h[l])
        total -= (grid.L ** grid.dim_h / grid.nlat) * float(
            np.sum(np.real(np.conj(sp) * sh)))
    return total


def lattice_pairing(psi: np.ndarray, phi: np.ndarray, grid: TorusGrid) -> float:
    """<psi, phi> = L^(n-1) sum_xi sum_k conj(psi_k) phi_k (real part)."""
    return float(np.real(grid.L ** grid.dim_h * np.sum(np.conj(psi) * phi)))
