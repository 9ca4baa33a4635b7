"""Interface operator symbols built from per-frequency BVP solves.

For each frequency xi the normal-trace symbol n_gamma(xi) is the m x m matrix
whose k-th column holds the interface vertical velocities of the normal-stress
solve driven by a unit vertical stress jump at interface k. The full interface
symbol is

    p_gamma(xi) = n_{-gamma}(xi) o(xi) - 2*pi*i*gamma*xi_1 * Id,

with o(xi) = diag(-g*[[rho]]_l + 4*pi^2*|xi|^2*sigma_l). Its adjoint identity
n_gamma(xi)^H = n_{-gamma}(xi) follows from the energy form.

Solves at lattice frequencies reuse the field mesh so the discrete inverse
matches the discrete forward map exactly; off-lattice sweeps use a resolution
policy degree. Beyond TRUSTED_XI_MAX a fitted 1/|xi| tail replaces direct
solves (the collocation systems stop being trustworthy there).
"""

from __future__ import annotations

import math

import numpy as np

from .config import PhysicalConfig
from .grid import LayerMesh, TorusGrid
from .vertical_bvp import VerticalSolver, degree_policy

TRUSTED_XI_MAX = 150.0


def o_matrix(config: PhysicalConfig, xi) -> np.ndarray:
    """Gravity-capillary diagonal symbol diag(-g [[rho]]_l + 4 pi^2 |xi|^2 sigma_l)."""
    xi = np.atleast_1d(np.asarray(xi, float))
    k2 = 4.0 * math.pi**2 * float(xi @ xi)
    diag = [-config.g * config.rho_jump(l) + k2 * config.sigma[l]
            for l in range(config.m)]
    return np.diag(diag).astype(complex)


class SymbolCalculator:
    """Computes n/p symbols at arbitrary frequencies.

    With a fixed mesh all solves run on it (lattice use). Without one, each
    frequency gets per-layer degrees from the boundary-layer resolution policy.
    """

    def __init__(self, config: PhysicalConfig, mesh: LayerMesh | None = None):
        self.config = config
        self.mesh = mesh
        self._solvers = {}  # degree tuple -> VerticalSolver
        self._dual_cache = {}

    def solver_for(self, xi) -> VerticalSolver:
        if self.mesh is not None:
            key = "fixed"
            degrees = None
        else:
            xi = np.atleast_1d(np.asarray(xi, float))
            xn = float(np.linalg.norm(xi))
            thick = np.diff([0.0] + list(self.config.a))
            degrees = tuple(degree_policy(xn, t) for t in thick)
            key = degrees
        sv = self._solvers.get(key)
        if sv is None:
            mesh = self.mesh if self.mesh is not None \
                else LayerMesh(self.config.a, list(degrees))
            sv = VerticalSolver(self.config, mesh)
            self._solvers[key] = sv
        return sv

    def dual_solutions(self, xi, sign: int = +1):
        """Normal-stress solves with unit stress at each interface (cached)."""
        xi = np.atleast_1d(np.asarray(xi, float))
        key = (tuple(np.round(xi, 14)), sign)
        sols = self._dual_cache.get(key)
        if sols is None:
            # real unit-stress data: the solve at -xi is the conjugate
            nkey = (tuple(np.round(-xi, 14)), sign)
            partner = self._dual_cache.get(nkey)
            if partner is not None and nkey != key:
                sols = [s.conj() for s in partner]
                self._dual_cache[key] = sols
                return sols
            sv = self.solver_for(xi)
            m = self.config.m
            sols = []
            for k in range(m):
                psi = np.zeros(m)
                psi[k] = 1.0
                kvec = np.zeros((m, self.config.n), dtype=complex)
                kvec[:, -1] = psi
                sols.append(sv.problem(xi, sign).solve(k=kvec))
            self._dual_cache[key] = sols
        return sols

    def n_matrix(self, xi, sign: int = +1) -> np.ndarray:
        """n symbol for +gamma (sign=+1) or -gamma (sign=-1)."""
        xi = np.atleast_1d(np.asarray(xi, float))
        m = self.config.m
        if np.all(xi == 0.0):
            return np.zeros((m, m), dtype=complex)
        xn = float(np.linalg.norm(xi))
        if xn > TRUSTED_XI_MAX:
            base = self.n_matrix(xi * (TRUSTED_XI_MAX / xn), sign)
            return base * (TRUSTED_XI_MAX / xn)
        sols = self.dual_solutions(xi, sign)
        out = np.zeros((m, m), dtype=complex)
        for k, sol in enumerate(sols):
            out[:, k] = sol.normal_trace()
        return out

    def p_matrix(self, xi) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, float))
        m = self.config.m
        if np.all(xi == 0.0):
            return np.zeros((m, m), dtype=complex)
        nm = self.n_matrix(xi, sign=-1)
        return nm @ o_matrix(self.config, xi) \
            - 2j * math.pi * self.config.gamma * xi[0] * np.eye(m)


class LatticeSymbolTable:
    """Lazy per-lattice-frequency symbol store sharing the field mesh."""

    def __init__(self, config: PhysicalConfig, grid: TorusGrid, mesh: LayerMesh):
        self.config = config
        self.grid = grid
        self.mesh = mesh
        self.calc = SymbolCalculator(config, mesh=mesh)
        self._n = {}
        self._p = {}

    def n_at(self, idx: int, sign: int = +1) -> np.ndarray:
        key = (idx, sign)
        val = self._n.get(key)
        if val is None:
            ci = int(self.grid.conj_index[idx])
            partner = self._n.get((ci, sign))
            if partner is not None and ci != idx:
                # real-coefficient problem: n(-xi) = conj(n(xi))
                val = np.conj(partner)
            else:
                val = self.calc.n_matrix(self.grid.xi[idx], sign)
            self._n[key] = val
        return val

    def p_at(self, idx: int) -> np.ndarray:
        val = self._p.get(idx)
        if val is None:
            m = self.config.m
            if self.grid.xi_norm[idx] == 0.0:
                val = np.zeros((m, m), dtype=complex)
            else:
                val = self.n_at(idx, sign=-1) @ o_matrix(self.config, self.grid.xi[idx]) \
                    - 2j * math.pi * self.config.gamma * self.grid.xi1[idx] * np.eye(m)
            self._p[idx] = val
        return val

    def apply_p_inverse(self, phi: np.ndarray, active=None) -> np.ndarray:
        """Solve p_gamma(xi) eta_hat = phi_hat per lattice frequency.

        phi: (m, nlat). The zero frequency has no inverse; its output is zero
        (callers must check the zero mode of phi separately). `active` may
        restrict the solves to a boolean mask of lattice indices.
        """
        m, nlat = phi.shape
        out = np.zeros_like(phi)
        for idx in range(nlat):
            if self.grid.xi_norm[idx] == 0.0:
                continue
            if active is not None and not active[idx]:
                continue
            out[:, idx] = np.linalg.solve(self.p_at(idx), phi[:, idx])
        return out


# ----------------------------------------------------------------------------
# Structural verification of the symbols
# ----------------------------------------------------------------------------

def curly_weight(xi) -> float:
    """Invertibility weight: (xi_1^2 + |xi|^4) for |xi| <= 1, |xi|^2 beyond."""
    xi = np.atleast_1d(np.asarray(xi, float))
    xn = float(np.linalg.norm(xi))
    if xn <= 1.0:
        return float(xi[0] ** 2 + xn**4)
    return xn**2


def verify_asymptotics(config: PhysicalConfig, lo: float = 1e-3, hi: float = 1e2,
                       npts: int = 31, direction=None,
                       low_window=(1e-3, 1e-2), high_window=(1e1, 1e2)) -> dict:
    """Sweep |xi| along a fixed direction and check the symbol structure.

    Returns per-point data plus: fitted low/high log-log slopes of ||n_gamma||
    (expected +2 and -1), the worst adjoint-identity defect
    ||n_gamma^H - n_{-gamma}|| / ||n_gamma||, the minimum eigenvalue of the
    Hermitian part of n_gamma (coercivity), and the supremum of
    ||p_gamma(xi)^{-1}|| * curly_weight(xi) (inverse symbol bound).
    """
    calc = SymbolCalculator(config)
    if direction is None:
        direction = np.zeros(config.n - 1)
        direction[0] = 1.0
    direction = np.asarray(direction, float)
    direction = direction / np.linalg.norm(direction)
    radii = np.geomspace(lo, hi, npts)
    norms = np.empty(npts)
    adjoint_defect = 0.0
    coercivity_min = np.inf
    inverse_bound = 0.0
    for i, r in enumerate(radii):
        xi = r * direction
        nmat = calc.n_matrix(xi, sign=+1)
        nminus = calc.n_matrix(xi, sign=-1)
        norms[i] = np.linalg.norm(nmat, 2)
        adjoint_defect = max(
            adjoint_defect,
            np.linalg.norm(nmat.conj().T - nminus, 2) / norms[i])
        herm = 0.5 * (nmat + nmat.conj().T)
        coercivity_min = min(coercivity_min,
                             float(np.min(np.linalg.eigvalsh(herm))))
        pmat = nminus @ o_matrix(config, xi) \
            - 2j * math.pi * config.gamma * xi[0] * np.eye(config.m)
        pinv_norm = np.linalg.norm(np.linalg.inv(pmat), 2)
        inverse_bound = max(inverse_bound, pinv_norm * curly_weight(xi))

    logs_x = np.log(radii)
    logs_n = np.log(norms)
    lo_mask = (radii >= low_window[0] * (1 - 1e-9)) \
        & (radii <= low_window[1] * (1 + 1e-9))
    hi_mask = (radii >= high_window[0] * (1 - 1e-9)) \
        & (radii <= high_window[1] * (1 + 1e-9))
    if lo_mask.sum() < 2 or hi_mask.sum() < 2:
        raise ValueError("sweep range does not cover the slope-fit windows")
    slope_low = np.polyfit(logs_x[lo_mask], logs_n[lo_mask], 1)[0]
    slope_high = np.polyfit(logs_x[hi_mask], logs_n[hi_mask], 1)[0]
    return {
        "radii": radii,
        "norms": norms,
        "slope_low": float(slope_low),
        "slope_high": float(slope_high),
        "adjoint_defect": float(adjoint_defect),
        "coercivity_min": float(coercivity_min),
        "inverse_bound_sup": float(inverse_bound),
        "direction": direction,
    }
