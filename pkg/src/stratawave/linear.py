"""Forward action and inverse of the linearized gravity-capillary multilayer
system: divergence, momentum, interface stress-jump, and kinematic rows in
flattened coordinates, and the full inverse pipeline

  data -> compatibility measurement -> surfaces eta -> modified data
       -> stress-data Stokes solve -> pressure recovery -> consistency check.

The overdetermined consistency check (computed normal traces against the
modified kinematic data) is mandatory; a failure falsifies the compatibility
formula rather than signalling bad input, so it raises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import compat
from .config import PhysicalConfig
from .geometry import quarter_gap_margin
from .grid import (LayerMesh, SpectralField, TorusGrid, norm_interface,
                   norm_volume, vertical_integral)
from .symbols import LatticeSymbolTable, o_matrix

CONSISTENCY_TOL = 1e-8
MODES = ("surface_tension", "zero_surface_tension")


class ConsistencyError(RuntimeError):
    """Computed traces disagree with the modified kinematic data."""


@dataclass
class DataTuple:
    g: SpectralField          # scalar
    f: SpectralField          # n components
    k: np.ndarray             # (m, n, nlat)
    h: np.ndarray             # (m, nlat)
    s: int = 0

    def scale(self) -> float:
        return compat.data_scale(self.g, self.f, self.k, self.h)

    @classmethod
    def zeros(cls, grid: TorusGrid, mesh: LayerMesh, s: int = 0):
        return cls(
            g=SpectralField.zeros(grid, mesh, 1),
            f=SpectralField.zeros(grid, mesh, grid.n),
            k=np.zeros((mesh.m, grid.n, grid.nlat), complex),
            h=np.zeros((mesh.m, grid.nlat), complex),
            s=s,
        )

    def copy(self):
        return DataTuple(self.g.copy(), self.f.copy(), self.k.copy(),
                         self.h.copy(), self.s)


@dataclass
class FlatState:
    p: SpectralField          # scalar
    u: SpectralField          # n components
    eta: np.ndarray           # (m, nlat)
    mode: str = "surface_tension"

    @classmethod
    def zeros(cls, grid: TorusGrid, mesh: LayerMesh, mode="surface_tension"):
        return cls(
            p=SpectralField.zeros(grid, mesh, 1),
            u=SpectralField.zeros(grid, mesh, grid.n),
            eta=np.zeros((mesh.m, grid.nlat), complex),
            mode=mode,
        )

    def copy(self):
        return FlatState(self.p.copy(), self.u.copy(), self.eta.copy(),
                         self.mode)


def y_norm(data: DataTuple, config: PhysicalConfig) -> float:
    """Data-space norm: volume Sobolev norms of (g, f), interface norms of
    (k, h), and the homogeneous seminorms of h_l - int_0^{a_l} g."""
    s = data.s
    grid, mesh = data.g.grid, data.g.mesh
    total = norm_volume(data.g, order=1 + s) ** 2
    total += norm_volume(data.f, order=s) ** 2
    for l in range(mesh.m):
        total += norm_interface(data.k[l], grid, which="Hs", s=0.5 + s) ** 2
        total += norm_interface(data.h[l], grid, which="Hs", s=1.5 + s) ** 2
        diff = data.h[l] - vertical_integral(data.g, mesh.a[l + 1])[0]
        diff = diff.copy()
        diff[0] = 0.0  # zero-mode identity holds separately to tolerance
        total += norm_interface(diff, grid, which="Hdot-1") ** 2
    return math.sqrt(total)


def x_norm(state: FlatState, config: PhysicalConfig) -> float:
    """Solution-space norm: H^2 velocity, the gravity-shifted pressure norm,
    and interface norms of eta (H^{5/2} with surface tension, the anisotropic
    weight without)."""
    grid, mesh = state.p.grid, state.p.mesh
    total = norm_volume(state.u, order=2) ** 2
    # gravity-shifted pressure: p + g sum_l [[rho]]_l eta_l 1_{(0,a_l)}
    shifted = state.p.copy()
    for lay in range(mesh.m):
        add = np.zeros(grid.nlat, complex)
        for l in range(lay, mesh.m):
            add += config.g * config.rho_jump(l) * state.eta[l]
        shifted.data[lay][0] += add[:, None]
    per_layer = norm_volume(shifted, order=1, per_layer=True)
    total += float(np.sum(per_layer**2))
    total += norm_volume(state.p, order=0) ** 2
    for l in range(mesh.m):
        if state.mode == "surface_tension":
            total += norm_interface(state.eta[l], grid, which="Hs", s=2.5) ** 2
        else:
            total += norm_interface(state.eta[l], grid, which="curlyHs",
                                    s=1.5) ** 2
    return math.sqrt(total)


class LinearSolver:
    """Forward/inverse linearized solver with shared per-frequency caches."""

    def __init__(self, config: PhysicalConfig, grid: TorusGrid, mesh: LayerMesh,
                 mode: str = "surface_tension"):
        config.validate_rt()
        config.validate_mode(mode)
        if mode in MODES and config.gamma == 0:
            raise ValueError("wave speed gamma must be nonzero")
        self.config = config
        self.grid = grid
        self.mesh = mesh
        self.mode = mode
        self.table = LatticeSymbolTable(config, grid, mesh)
        self.calc = self.table.calc
        self.solver = self.calc.solver_for(np.zeros(grid.dim_h))
        self._ovec = np.array(
            [np.real(np.diag(o_matrix(config, grid.xi[i])))
             for i in range(grid.nlat)]).T  # (m, nlat)

    # ------------------------------------------------------------------
    def forward(self, state: FlatState) -> DataTuple:
        """Apply the linear operator rows to (p, u, eta)."""
        cfg, grid, mesh = self.config, self.grid, self.mesh
        n, m = grid.n, mesh.m
        zeta = (2j * np.pi * grid.xi.T)  # (dim_h, nlat)
        kap2 = 4.0 * np.pi**2 * grid.xi_norm**2
        out = DataTuple.zeros(grid, mesh)

        tractions = []
        for lay in range(m):
            D = mesh.D[lay]
            mu, rho = cfg.mu[lay], cfg.rho[lay]
            u = state.u.data[lay]
            p = state.p.data[lay][0]
            div = u[-1] @ D.T
            for j in range(grid.dim_h):
                div = div + zeta[j][:, None] * u[j]
            out.g.data[lay][0] = div
            D2 = D @ D
            for j in range(n):
                zj = zeta[j][:, None] if j < n - 1 else None
                lap = u[j] @ D2.T - kap2[:, None] * u[j]
                graddiv = zj * div if zj is not None else div @ D.T
                gradp = zj * p if zj is not None else p @ D.T
                out.f.data[lay][j] = gradp - mu * (lap + graddiv) \
                    - cfg.gamma * rho * zeta[0][:, None] * u[j]
            # tractions at layer bottom/top nodes: (n, nlat) each
            du = u @ D.T
            tr = {}
            for node, tag in ((0, "bot"), (-1, "top")):
                t = np.empty((n, grid.nlat), complex)
                for j in range(grid.dim_h):
                    t[j] = -mu * (du[j][:, node] + zeta[j] * u[-1][:, node])
                t[-1] = p[:, node] - 2.0 * mu * du[-1][:, node]
                tr[tag] = t
            tractions.append(tr)

        for l in range(m):
            jump = -tractions[l]["top"]
            if l < m - 1:
                jump = jump + tractions[l + 1]["bot"]
            out.k[l] = jump
            out.k[l, -1] += self._ovec[l] * state.eta[l]
            out.h[l] = state.u.data[l][-1, :, -1] \
                + cfg.gamma * zeta[0] * state.eta[l]
        return out

    # ------------------------------------------------------------------
    def modify_data(self, data: DataTuple, eta: np.ndarray) -> DataTuple:
        """Fold the recovered surfaces back into the data (mode-dependent)."""
        cfg, grid, mesh = self.config, self.grid, self.mesh
        out = data.copy()
        kap2 = 4.0 * np.pi**2 * grid.xi_norm**2
        if self.mode == "surface_tension":
            # f += g sum_l [[rho]]_l grad(eta_l) 1_{(0,a_l)} (horizontal grad)
            for lay in range(mesh.m):
                add = np.zeros(grid.nlat, complex)
                for l in range(lay, mesh.m):
                    add += cfg.g * cfg.rho_jump(l) * eta[l]
                for j in range(grid.dim_h):
                    out.f.data[lay][j] += (2j * np.pi * grid.xi[:, j]
                                           * add)[:, None]
            for l in range(mesh.m):
                out.k[l, -1] += -kap2 * cfg.sigma[l] * eta[l]
        else:
            for l in range(mesh.m):
                out.k[l, -1] += cfg.g * cfg.rho_jump(l) * eta[l]
        for l in range(mesh.m):
            out.h[l] -= cfg.gamma * (2j * np.pi * grid.xi1) * eta[l]
        return out

    def _stress_solve(self, data: DataTuple, active: np.ndarray):
        """Per-frequency stress-data Stokes solves (-gamma sign)."""
        grid, mesh = self.grid, self.mesh
        n, m = grid.n, mesh.m
        q = SpectralField.zeros(grid, mesh, 1)
        u = SpectralField.zeros(grid, mesh, n)
        traces = np.zeros((m, grid.nlat), complex)
        for idx in range(grid.nlat):
            if not active[idx]:
                continue
            fp = self.solver.problem(grid.xi[idx], -1)
            g_prof = [data.g.data[l][0, idx] for l in range(m)]
            f_prof = [data.f.data[l][:, idx] for l in range(m)]
            sol = fp.solve(g_prof, f_prof, data.k[:, :, idx])
            for l in range(m):
                u.data[l][:, idx, :] = sol.u[l]
                q.data[l][0, idx, :] = sol.p[l]
            traces[:, idx] = sol.normal_trace()
        return q, u, traces

    def inverse(self, data: DataTuple, zero_mode_tol: float = 1e-8,
                reference_scale: float | None = None):
        """Invert the linearized system; returns (FlatState, report dict).

        reference_scale widens the relative checks when the data is one
        correction inside an outer iteration: near convergence the residual is
        roundoff noise, and measuring it against its own magnitude would
        reject it even though the correction is harmless at the scale of the
        original problem.
        """
        cfg, grid, mesh = self.config, self.grid, self.mesh
        scale = max(data.scale(), reference_scale or 0.0, 1e-300)

        cm = compat.measure(data.g, data.f, data.k, data.h, cfg, self.calc,
                            scale=scale)
        if cm.diagnostics["zero_mode"] > zero_mode_tol * scale:
            raise compat.IncompatibleZeroMode(
                "compatibility zero mode above tolerance: "
                f"{cm.diagnostics['zero_mode']:.3e}")

        phi_mag = np.sum(np.abs(cm.phi), axis=0)
        # data magnitude per frequency decides which solves can be skipped
        mag = phi_mag.copy()
        for l in range(mesh.m):
            mag += np.sum(np.abs(data.g.data[l]), axis=(0, 2))
            mag += np.sum(np.abs(data.f.data[l]), axis=(0, 2))
        mag += np.sum(np.abs(data.k), axis=(0, 1)) + np.sum(np.abs(data.h), axis=0)
        active = mag > 1e-14 * scale

        eta = self.table.apply_p_inverse(cm.phi, active=active)
        eta[:, 0] = 0.0
        if all(grid.is_real(data.h[l], tol=1e-9) for l in range(mesh.m)):
            eta = 0.5 * (eta + np.conj(eta[:, grid.conj_index]))

        mod = self.modify_data(data, eta)
        q, u, traces = self._stress_solve(mod, active)

        p = q.copy()
        if self.mode == "surface_tension":
            for lay in range(mesh.m):
                sub = np.zeros(grid.nlat, complex)
                for l in range(lay, mesh.m):
                    sub += cfg.g * cfg.rho_jump(l) * eta[l]
                p.data[lay][0] -= sub[:, None]

        consistency = float(np.max(np.abs(traces - mod.h) * active))
        report = {
            "consistency_residual": consistency,
            "consistency_relative": consistency / scale,
            "zero_mode": cm.diagnostics["zero_mode"],
            "data_scale": scale,
            "admissible": bool(quarter_gap_margin(list(cfg.a), eta, grid) > 0),
        }
        if consistency > CONSISTENCY_TOL * scale:
            raise ConsistencyError(
                f"overdetermined consistency residual {consistency:.3e} "
                f"exceeds {CONSISTENCY_TOL:.1e} * data scale {scale:.3e}")
        state = FlatState(p, u, eta, mode=self.mode)
        return state, report
