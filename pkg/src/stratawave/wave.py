"""Nonlinear traveling-wave solver in flattened coordinates.

Residual rows (state x = (p, u, eta), forcing (f, T)):

  J (A grad) . u
  rho [(u - gamma e1) . A grad] u + (A grad) . S_A(p, u) - f
  [[S_A]]_l N_l - (g [[rho]]_l eta_l + sigma_l H(eta_l)) N_l - T_l N_l
  gamma d1 eta_l + u . N_l

with A, J the flattening geometry, N_l = (-grad eta_l, 1), and
S_A = p I - mu ((A grad) x u + transpose). The J factor on the divergence row
makes the residual satisfy the data-space zero-mode identities exactly
(Piola: J (A grad) . u = div(J A^t u)), so each Picard correction is solvable.

The iteration is the frozen-linearization contraction x <- x - L^{-1} r(x)
with L the linearized solver at the zero state, trust-regioned by the
quarter-gap admissibility bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import PhysicalConfig
from .geometry import geometry_fields, mean_curvature, quarter_gap_margin
from .grid import (LayerMesh, SpectralField, TorusGrid, bary_matrix,
                   vertical_integral)
from .linear import DataTuple, FlatState, LinearSolver, y_norm


class TrustRegionError(RuntimeError):
    pass


@dataclass
class ForcingSpec:
    """Bulk force f (SpectralField with n components, or None) and interface
    stress tensors T: (m, n, n, nlat) symmetric coefficient arrays (or None)."""

    f: SpectralField | None = None
    T: np.ndarray | None = None

    @classmethod
    def gaussian_bump(cls, grid: TorusGrid, m: int, center=0.5, width=0.1,
                      amplitude=1e-2, interface=-1):
        """Localized normal pressure source on one interface:
        T_l = -amplitude * G(x) e_n (x) e_n with G a periodic Gaussian."""
        G = _periodic_gaussian(grid, center, width)
        T = np.zeros((m, grid.n, grid.n, grid.nlat), complex)
        T[interface, grid.n - 1, grid.n - 1] = -amplitude * G
        return cls(T=T)

    @classmethod
    def mode_k(cls, grid: TorusGrid, m: int, k=1, amplitude=1e-2, interface=-1):
        """Single-harmonic normal stress on one interface."""
        prof = np.zeros(grid.nlat, complex)
        hits = np.where((grid.k == np.atleast_1d(k)).all(axis=1))[0]
        if not hits.size:
            raise ValueError(f"mode {k} not on the lattice")
        prof[hits[0]] = 0.5
        prof[grid.conj_index[hits[0]]] += 0.5
        T = np.zeros((m, grid.n, grid.n, grid.nlat), complex)
        T[interface, grid.n - 1, grid.n - 1] = -amplitude * prof
        return cls(T=T)

    def scaled(self, factor: float) -> "ForcingSpec":
        return ForcingSpec(
            f=None if self.f is None else self.f * factor,
            T=None if self.T is None else self.T * factor,
        )

    def shifted(self, dx: float, grid: TorusGrid) -> "ForcingSpec":
        phase = np.exp(-2j * np.pi * grid.xi[:, 0] * dx)
        return ForcingSpec(
            f=None if self.f is None else SpectralField(
                self.f.grid, self.f.mesh,
                [a * phase[None, :, None] for a in self.f.data], self.f.real),
            T=None if self.T is None else self.T * phase,
        )


def _periodic_gaussian(grid: TorusGrid, center, width) -> np.ndarray:
    center = np.atleast_1d(np.asarray(center, float))
    vals = np.zeros(grid.shape)
    axes = [grid.x] * grid.dim_h
    mesh = np.meshgrid(*axes, indexing="ij")
    for img in range(-3, 4):
        if grid.dim_h == 1:
            d2 = (mesh[0] - center[0] - img * grid.L) ** 2
            vals += np.exp(-d2 / (2.0 * width**2))
        else:
            for img2 in range(-3, 4):
                d2 = (mesh[0] - center[0] - img * grid.L) ** 2 \
                    + (mesh[1] - center[min(1, len(center) - 1)]
                       - img2 * grid.L) ** 2
                vals += np.exp(-d2 / (2.0 * width**2))
    return grid.fft(vals.reshape(grid.shape))


@dataclass
class IterationReport:
    converged: bool = False
    iterations: int = 0
    residual_norms: list = field(default_factory=list)
    contraction_ratios: list = field(default_factory=list)
    quarter_gap_margins: list = field(default_factory=list)
    zero_mode_defects: list = field(default_factory=list)
    forcing_scale: float = 0.0
    message: str = ""

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_norms": self.residual_norms,
            "contraction_ratios": self.contraction_ratios,
            "quarter_gap_margins": self.quarter_gap_margins,
            "zero_mode_defects": self.zero_mode_defects,
            "forcing_scale": self.forcing_scale,
            "message": self.message,
        }


class WaveSolver:
    def __init__(self, config: PhysicalConfig, grid: TorusGrid, mesh: LayerMesh,
                 mode: str = "surface_tension", rtol: float = 1e-9,
                 atol: float = 1e-13, max_iter: int = 50):
        self.config = config
        self.grid = grid
        self.mesh = mesh
        self.mode = mode
        self.rtol = rtol
        self.atol = atol
        self.max_iter = max_iter
        self.linear = LinearSolver(config, grid, mesh, mode)

    # ------------------------------------------------------------------
    def residual(self, state: FlatState, forcing: ForcingSpec) -> DataTuple:
        """Xi_sigma(state) - (0, f, 0, 0), assembled pseudo-spectrally."""
        cfg, grid, mesh = self.config, self.grid, self.mesh
        n, m, dh = grid.n, mesh.m, grid.dim_h
        if quarter_gap_margin(list(cfg.a), state.eta, grid) <= 0:
            raise TrustRegionError("left trust region: quarter-gap bound violated")
        hp = grid.dealiased_product
        zeta = 2j * np.pi * grid.xi.T  # (dh, nlat)

        J, Aent, N = geometry_fields(list(cfg.a), state.eta, grid, mesh)
        Jinv = Aent["Jinv"]
        out = DataTuple.zeros(grid, mesh)
        S_faces = []  # per layer: (S_bot, S_top) each (n, n, nlat)

        for lay in range(m):
            D = mesh.D[lay]
            mu, rho = cfg.mu[lay], cfg.rho[lay]
            nodes = mesh.degrees[lay] + 1
            # work in (comp, nodes, nlat) layout for horizontal products
            u = np.moveaxis(state.u.data[lay], -1, 1)
            p = np.moveaxis(state.p.data[lay][0], -1, 0)     # (nodes, nlat)
            uy = np.moveaxis(state.u.data[lay] @ D.T, -1, 1)
            py = np.moveaxis((state.p.data[lay][0]) @ D.T, -1, 0)
            boJ = np.moveaxis(Aent["b"][lay], -1, 1)          # (dh, nodes, nlat)
            boJ = hp(boJ, Jinv[lay])

            gradA_u = np.empty((n, n, nodes, grid.nlat), complex)
            gradA_p = np.empty((n, nodes, grid.nlat), complex)
            for i in range(dh):
                gradA_u[i] = zeta[i] * u - hp(boJ[i], uy)
                gradA_p[i] = zeta[i] * p - hp(boJ[i], py)
            gradA_u[n - 1] = hp(Jinv[lay], uy)
            gradA_p[n - 1] = hp(Jinv[lay], py)

            divA = np.einsum("iinx->nx", gradA_u)
            out.g.data[lay][0] = np.moveaxis(hp(J[lay], divA), 0, -1)

            S = -mu * (gradA_u + np.swapaxes(gradA_u, 0, 1))
            for i in range(n):
                S[i, i] += p
            S_faces.append((S[..., 0, :], S[..., -1, :]))

            # advection: rho sum_j (u_j - gamma delta_j1) (A grad)_j u_i
            u_rel = u.copy()
            u_rel[0, :, 0] -= cfg.gamma
            adv = np.zeros((n, nodes, grid.nlat), complex)
            for i in range(n):
                for j in range(n):
                    adv[i] += hp(u_rel[j], gradA_u[j, i])
            adv *= rho

            # (A grad) . S, row i
            Sy = np.einsum("qk,ijkx->ijqx", D, S)
            divS = np.zeros((n, nodes, grid.nlat), complex)
            for i in range(n):
                for j in range(dh):
                    divS[i] += zeta[j] * S[i, j] - hp(boJ[j], Sy[i, j])
                divS[i] += hp(Jinv[lay], Sy[i, n - 1])
            row2 = adv + divS
            if forcing.f is not None:
                row2 -= np.moveaxis(forcing.f.data[lay], -1, 1)
            out.f.data[lay][:] = np.moveaxis(row2, 1, -1)

        for l in range(m):
            jump = -S_faces[l][1]
            if l < m - 1:
                jump = jump + S_faces[l + 1][0]
            grav = cfg.g * cfg.rho_jump(l) * state.eta[l]
            if cfg.sigma[l] != 0.0:
                grav = grav + cfg.sigma[l] * mean_curvature(state.eta[l], grid)
            for i in range(n):
                row = np.zeros(grid.nlat, complex)
                for j in range(n):
                    Tij = jump[i, j]
                    if forcing.T is not None:
                        Tij = Tij - forcing.T[l, i, j]
                    row += hp(Tij, N[l, j])
                row -= hp(grav, N[l, i])
                out.k[l, i] = row
            # N_j (j < n-1) is -d_j eta; the vertical component is exact
            utr = state.u.data[l][:, :, -1]  # (n, nlat) trace at layer top
            kin = cfg.gamma * zeta[0] * state.eta[l] + utr[n - 1]
            for j in range(dh):
                kin += hp(utr[j], N[l, j])
            out.h[l] = kin

        # products can excite the unpaired Nyquist modes; keep them out
        for lay in range(m):
            out.g.data[lay][:, grid.nyquist_mask, :] = 0.0
            out.f.data[lay][:, grid.nyquist_mask, :] = 0.0
        out.k[:, :, grid.nyquist_mask] = 0.0
        out.h[:, grid.nyquist_mask] = 0.0
        return out

    # ------------------------------------------------------------------
    def solve(self, forcing: ForcingSpec):
        """Frozen-linearization Picard iteration from the zero state."""
        grid, mesh = self.grid, self.mesh
        state = FlatState.zeros(grid, mesh, mode=self.mode)
        report = IterationReport()
        r = self.residual(state, forcing)
        fnorm = y_norm(r, self.config)
        ref_scale = r.scale()
        report.forcing_scale = fnorm
        rnorm = fnorm
        target = self.rtol * fnorm + self.atol
        grow = 0
        for it in range(self.max_iter):
            report.residual_norms.append(rnorm)
            report.quarter_gap_margins.append(
                quarter_gap_margin(list(self.config.a), state.eta, grid))
            if rnorm <= target:
                report.converged = True
                report.iterations = it
                report.message = "converged"
                return state, report
            delta, _ = self.linear.inverse(r, reference_scale=ref_scale)
            new = state.copy()
            new.p = new.p - delta.p
            new.u = new.u - delta.u
            new.eta = new.eta - delta.eta
            if quarter_gap_margin(list(self.config.a), new.eta, grid) <= 0:
                report.iterations = it + 1
                report.message = "left trust region: quarter-gap bound violated"
                return state, report
            state = new
            r = self.residual(state, forcing)
            new_norm = y_norm(r, self.config)
            report.contraction_ratios.append(
                new_norm / rnorm if rnorm > 0 else 0.0)
            zdef = 0.0
            for l in range(mesh.m):
                zdef = max(zdef, abs(r.h[l, 0]
                                     - vertical_integral(r.g, mesh.a[l + 1])[0, 0]))
            report.zero_mode_defects.append(float(zdef))
            grow = grow + 1 if new_norm > rnorm else 0
            rnorm = new_norm
            if grow >= 3:
                report.iterations = it + 1
                report.message = "diverged: residual grew on 3 consecutive iterations"
                return state, report
        report.iterations = self.max_iter
        report.residual_norms.append(rnorm)
        if rnorm <= target:
            report.converged = True
            report.message = "converged"
        else:
            report.message = "maximum iterations reached"
        return state, report


# ----------------------------------------------------------------------------
# Un-flattening to Eulerian coordinates
# ----------------------------------------------------------------------------

class EulerianBundle:
    """Evaluate the solution in physical (Eulerian) coordinates."""

    def __init__(self, state: FlatState, config: PhysicalConfig):
        self.state = state
        self.config = config
        self.grid = state.p.grid
        self.mesh = state.p.mesh

    def surface(self, l: int, x) -> float:
        x = np.atleast_1d(np.asarray(x, float))
        phase = np.exp(2j * np.pi * (self.grid.xi @ x))
        return self.mesh.a[l + 1] + float(np.real(self.state.eta[l] @ phase))

    def locate(self, x, y: float) -> int:
        if y < 0:
            raise ValueError("point below the rigid bottom")
        for l in range(self.mesh.m):
            if y <= self.surface(l, x) + 1e-12:
                return l
        raise ValueError("point above the top free surface")

    def _flat_y(self, x, y: float, layer: int) -> float:
        lo = 0.0 if layer == 0 else self.surface(layer - 1, x)
        hi = self.surface(layer, x)
        alo = self.mesh.a[layer]
        ahi = self.mesh.a[layer + 1]
        return ((hi - y) * alo + (y - lo) * ahi) / (hi - lo)

    def _eval(self, fld: SpectralField, x, y: float):
        layer = self.locate(x, y)
        yy = self._flat_y(x, y, layer)
        yy = min(max(yy, self.mesh.a[layer]), self.mesh.a[layer + 1])
        M = bary_matrix(self.mesh.nodes[layer], [yy])[0]
        prof = fld.data[layer] @ M
        x = np.atleast_1d(np.asarray(x, float))
        phase = np.exp(2j * np.pi * (self.grid.xi @ x))
        return np.real(prof @ phase)

    def velocity(self, x, y: float) -> np.ndarray:
        return self._eval(self.state.u, x, y)

    def pressure(self, x, y: float) -> float:
        return float(self._eval(self.state.p, x, y)[0])


def unflatten(state: FlatState, config: PhysicalConfig) -> EulerianBundle:
    return EulerianBundle(state, config)


def sample_interior_points(bundle: EulerianBundle, rng, npts: int = 100,
                           margin: float = 0.02) -> list:
    """Random Eulerian points at vertical distance > margin from every
    interface and the bottom."""
    pts = []
    grid = bundle.grid
    top_mean = bundle.mesh.a[-1]
    while len(pts) < npts:
        x = rng.uniform(0.0, grid.L, size=grid.dim_h)
        y = rng.uniform(margin, top_mean)
        ok = y > margin
        for l in range(bundle.mesh.m):
            if abs(y - bundle.surface(l, x)) < margin:
                ok = False
        if ok and y < bundle.surface(bundle.mesh.m - 1, x) - margin:
            pts.append((x, y))
    return pts


def eulerian_momentum_residual(bundle: EulerianBundle, points,
                               h: float = 3e-3) -> float:
    """Max finite-difference residual of the traveling Navier-Stokes momentum
    rho (v - gamma e1).grad v + grad q - mu Lap v at the given interior points
    (bulk forcing assumed zero there)."""
    cfg = bundle.config
    n = bundle.grid.n
    worst = 0.0
    e = np.eye(n)
    for x, y in points:
        lay = bundle.locate(x, y)
        rho, mu = cfg.rho[lay], cfg.mu[lay]

        def v(dx):
            return bundle.velocity(x + dx[:n - 1], y + dx[n - 1])

        def q(dx):
            return bundle.pressure(x + dx[:n - 1], y + dx[n - 1])

        v0 = v(np.zeros(n))
        grad_v = np.stack([(v(h * e[i]) - v(-h * e[i])) / (2 * h)
                           for i in range(n)])        # grad_v[i] = d_i v
        lap_v = sum((v(h * e[i]) - 2 * v0 + v(-h * e[i])) / h**2
                    for i in range(n))
        grad_q = np.array([(q(h * e[i]) - q(-h * e[i])) / (2 * h)
                           for i in range(n)])
        vel = v0.copy()
        vel[0] -= cfg.gamma
        res = rho * (vel @ grad_v) + grad_q - mu * lap_v
        worst = max(worst, float(np.max(np.abs(res))))
    return worst
