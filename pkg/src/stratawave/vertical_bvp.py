"""Per-frequency solver for the multilayer traveling Stokes two-point BVPs.

For a horizontal frequency xi the unknowns are per-layer vertical profiles of
the velocity u = (v, w) (horizontal components v, vertical w) and pressure p.
With zeta_j = 2*pi*i*xi_j and kappa^2 = 4*pi^2*|xi|^2 the operator rows are

  divergence:  zeta.v + w' = g                      (all nodes)
  momentum:    grad p - mu*(Lap u + grad(div u)) + sign*gamma*rho*zeta_1*u = f
               (interior nodes; sign=-1 stress-data problem, +1 normal-stress)
  interfaces:  [[u]] = 0, [[S e_n]] = k  (jump = above - below; vacuum on top)
  bottom:      u = 0.

The traction on a horizontal plane is S e_n = (-mu*(v' + zeta*w), p - 2*mu*w').
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .config import PhysicalConfig
from .grid import LayerMesh, SpectralField

COND_THRESHOLD = 1e12
DEGREE_CAP = 200


class IllConditionedSystem(RuntimeError):
    def __init__(self, xi, estimate):
        super().__init__(f"frequency system ill-conditioned at xi={xi}: "
                         f"cond estimate {estimate:.3e}")
        self.xi = xi
        self.estimate = estimate


def degree_policy(xi_norm: float, thickness: float, floor: int = 32,
                  cap: int = DEGREE_CAP) -> int:
    """Collocation degree resolving the |xi|^-1 boundary layers.

    The floor of 32 matters around |xi| ~ 1-3 where the layer is neither thin
    enough for the 1.5 * 2 pi |xi| rule nor smooth enough for fewer nodes.
    """
    return min(cap, max(floor, math.ceil(1.5 * 2.0 * math.pi * xi_norm * thickness)))


@dataclass
class VerticalSolution:
    """Per-layer profiles: u[layer] is (n, nodes), p[layer] is (nodes,)."""

    mesh: LayerMesh
    n: int
    u: list
    p: list

    def normal_trace(self) -> np.ndarray:
        """Vertical velocity at each interface y = a_l (from below)."""
        return np.array([self.u[l][-1, -1] for l in range(self.mesh.m)])

    def trace(self, layer: int, top: bool) -> np.ndarray:
        return self.u[layer][:, -1 if top else 0]

    def conj(self) -> "VerticalSolution":
        return VerticalSolution(self.mesh, self.n,
                                [np.conj(a) for a in self.u],
                                [np.conj(a) for a in self.p])

    def scaled(self, alpha) -> "VerticalSolution":
        return VerticalSolution(self.mesh, self.n,
                                [alpha * a for a in self.u],
                                [alpha * a for a in self.p])

    def add(self, other, beta=1.0) -> "VerticalSolution":
        return VerticalSolution(self.mesh, self.n,
                                [a + beta * b for a, b in zip(self.u, other.u)],
                                [a + beta * b for a, b in zip(self.p, other.p)])


class FrequencyProblem:
    """Assembled block-collocation system for one frequency and sign."""

    def __init__(self, config: PhysicalConfig, mesh: LayerMesh, xi, sign: int):
        self.config = config
        self.mesh = mesh
        self.xi = np.atleast_1d(np.asarray(xi, dtype=float))
        self.sign = int(sign)
        self.n = config.n
        self.dim_h = self.n - 1
        if len(self.xi) != self.dim_h:
            raise ValueError("frequency dimension mismatch")
        self.zeta = 2j * np.pi * self.xi
        self.kappa2 = 4.0 * np.pi**2 * float(self.xi @ self.xi)
        self.is_zero = bool(np.all(self.xi == 0.0))
        self._layout()
        self._assemble()
        self._factor()

    # ----- unknown layout ---------------------------------------------------
    def _layout(self):
        n, mesh = self.n, self.mesh
        self.block = []  # per layer dict of slices
        off = 0
        for d in mesh.degrees:
            nn = d + 1
            blk = {"v": [slice(off + j * nn, off + (j + 1) * nn)
                          for j in range(self.dim_h)]}
            blk["w"] = slice(off + self.dim_h * nn, off + n * nn)
            blk["p"] = slice(off + n * nn, off + (n + 1) * nn)
            self.block.append(blk)
            off += (n + 1) * nn
        self.size = off

    # ----- assembly ---------------------------------------------------------
    def _assemble(self):
        cfg, mesh, n = self.config, self.mesh, self.n
        m = mesh.m
        A = np.zeros((self.size, self.size), dtype=complex)
        # row bookkeeping for RHS construction
        self.div_rows = []    # per layer (rows, nodes)
        self.mom_rows = []    # per layer list per component (rows, nodes)
        self.stress_rows = [None] * m  # per interface: array (n,) of rows
        row = 0

        def I(d):
            return np.eye(d + 1)

        for l in range(m):
            d = mesh.degrees[l]
            nn = d + 1
            D = mesh.D[l]
            D2 = D @ D
            mu = cfg.mu[l]
            rho = cfg.rho[l]
            gterm = self.sign * cfg.gamma * rho * self.zeta[0]
            blk = self.block[l]
            interior = np.arange(1, d)

            mom_layer = []
            if not self.is_zero:
                # horizontal momentum at interior nodes
                for j in range(self.dim_h):
                    rows = np.arange(row, row + d - 1)
                    row += d - 1
                    A[np.ix_(rows, np.arange(*blk["p"].indices(self.size)))] = \
                        self.zeta[j] * I(d)[interior]
                    A[np.ix_(rows, np.arange(*blk["v"][j].indices(self.size)))] += \
                        (-mu * (D2 - self.kappa2 * I(d)) + gterm * I(d))[interior]
                    for kk in range(self.dim_h):
                        A[np.ix_(rows, np.arange(*blk["v"][kk].indices(self.size)))] += \
                            (-mu * self.zeta[j] * self.zeta[kk] * I(d))[interior]
                    A[np.ix_(rows, np.arange(*blk["w"].indices(self.size)))] += \
                        (-mu * self.zeta[j] * D)[interior]
                    mom_layer.append((rows, interior.copy()))
                # vertical momentum at interior nodes
                rows = np.arange(row, row + d - 1)
                row += d - 1
                A[np.ix_(rows, np.arange(*blk["p"].indices(self.size)))] = D[interior]
                A[np.ix_(rows, np.arange(*blk["w"].indices(self.size)))] += \
                    (-mu * (2.0 * D2 - self.kappa2 * I(d)) + gterm * I(d))[interior]
                for kk in range(self.dim_h):
                    A[np.ix_(rows, np.arange(*blk["v"][kk].indices(self.size)))] += \
                        (-mu * self.zeta[kk] * D)[interior]
                mom_layer.append((rows, interior.copy()))
                # divergence at all nodes
                rows = np.arange(row, row + nn)
                row += nn
                for kk in range(self.dim_h):
                    A[np.ix_(rows, np.arange(*blk["v"][kk].indices(self.size)))] = \
                        self.zeta[kk] * I(d)
                A[np.ix_(rows, np.arange(*blk["w"].indices(self.size)))] += D
                self.div_rows.append((rows, np.arange(nn)))
            else:
                # xi = 0: decoupled assembly (see ledger): v_j second-order BVPs,
                # w first-order divergence (dropping the top collocation row),
                # p vertical momentum at nodes 0..d-1 plus jump pinning.
                for j in range(self.dim_h):
                    rows = np.arange(row, row + d - 1)
                    row += d - 1
                    A[np.ix_(rows, np.arange(*blk["v"][j].indices(self.size)))] = \
                        (-mu * D2)[interior]
                    mom_layer.append((rows, interior.copy()))
                # vertical momentum Dp - 2 mu D^2 w = f_n at nodes 0..d-1
                vm_nodes = np.arange(0, d)
                rows = np.arange(row, row + d)
                row += d
                A[np.ix_(rows, np.arange(*blk["p"].indices(self.size)))] = D[vm_nodes]
                A[np.ix_(rows, np.arange(*blk["w"].indices(self.size)))] = \
                    (-2.0 * mu * D2)[vm_nodes]
                mom_layer.append((rows, vm_nodes))
                # divergence Dw = g at nodes 0..d-1
                rows = np.arange(row, row + d)
                row += d
                A[np.ix_(rows, np.arange(*blk["w"].indices(self.size)))] = D[vm_nodes]
                self.div_rows.append((rows, vm_nodes))
            self.mom_rows.append(mom_layer)

            # bottom rows: no-slip (layer 0) or continuity with the layer below
            for j in range(n):
                comp = blk["v"][j] if j < self.dim_h else blk["w"]
                r = row
                row += 1
                A[r, np.arange(*comp.indices(self.size))[0]] = 1.0
                if l > 0:
                    below = self.block[l - 1]
                    compb = below["v"][j] if j < self.dim_h else below["w"]
                    A[r, np.arange(*compb.indices(self.size))[-1]] = -1.0

            # top rows: stress jump at interface l (above - below = k_l)
            rows = np.arange(row, row + n)
            row += n
            self.stress_rows[l] = rows
            self._traction_into(A, rows, l, at_top=True, factor=-1.0)
            if l < m - 1:
                self._traction_into(A, rows, l + 1, at_top=False, factor=+1.0)
        assert row == self.size
        self.A = A

    def _traction_into(self, A, rows, layer, at_top: bool, factor: float):
        """Add factor * (S e_n) evaluated at the layer's top/bottom node."""
        cfg, mesh = self.config, self.mesh
        d = mesh.degrees[layer]
        D = mesh.D[layer]
        mu = cfg.mu[layer]
        blk = self.block[layer]
        node = d if at_top else 0
        for j in range(self.dim_h):
            # T_j = -mu * (D v_j + zeta_j * w)
            cols = np.arange(*blk["v"][j].indices(self.size))
            A[rows[j], cols] += factor * (-mu) * D[node]
            wcols = np.arange(*blk["w"].indices(self.size))
            A[rows[j], wcols[node]] += factor * (-mu) * self.zeta[j]
        # T_n = p - 2 mu D w
        pcols = np.arange(*blk["p"].indices(self.size))
        wcols = np.arange(*blk["w"].indices(self.size))
        A[rows[-1], pcols[node]] += factor
        A[rows[-1], wcols] += factor * (-2.0 * mu) * D[node]

    def _factor(self):
        # row equilibration keeps the high-frequency systems well-conditioned
        rmax = np.max(np.abs(self.A), axis=1)
        self._rowscale = 1.0 / np.where(rmax > 0, rmax, 1.0)
        As = self.A * self._rowscale[:, None]
        self._anorm = np.linalg.norm(As, 1)
        self._lu, self._piv = sla.lu_factor(As, check_finite=False)
        gecon = lapack.zgecon
        rcond, _ = gecon(self._lu, self._anorm)
        self.cond_estimate = 1.0 / max(rcond, 1e-300)
        if self.cond_estimate > COND_THRESHOLD:
            raise IllConditionedSystem(self.xi, self.cond_estimate)

    # ----- right-hand sides & solving ---------------------------------------
    def rhs(self, g=None, f=None, k=None) -> np.ndarray:
        """g: per-layer (nodes,), f: per-layer (n, nodes), k: (m, n)."""
        b = np.zeros(self.size, dtype=complex)
        for l in range(self.mesh.m):
            if g is not None:
                rows, nodes = self.div_rows[l]
                b[rows] = np.asarray(g[l])[nodes]
            if f is not None:
                for j in range(self.n):
                    rows, nodes = self.mom_rows[l][j]
                    b[rows] = np.asarray(f[l])[j][nodes]
            if k is not None:
                b[self.stress_rows[l]] = np.asarray(k[l])
        return b

    def solve_raw(self, b: np.ndarray) -> np.ndarray:
        x = sla.lu_solve((self._lu, self._piv), self._rowscale * b,
                         check_finite=False)
        # one step of iterative refinement keeps nodal residuals near roundoff
        r = b - self.A @ x
        x += sla.lu_solve((self._lu, self._piv), self._rowscale * r,
                          check_finite=False)
        return x

    def unpack(self, x: np.ndarray) -> VerticalSolution:
        u, p = [], []
        for l in range(self.mesh.m):
            blk = self.block[l]
            comps = [x[blk["v"][j]] for j in range(self.dim_h)] + [x[blk["w"]]]
            u.append(np.stack(comps))
            p.append(x[blk["p"]].copy())
        return VerticalSolution(self.mesh, self.n, u, p)

    def solve(self, g=None, f=None, k=None) -> VerticalSolution:
        return self.unpack(self.solve_raw(self.rhs(g, f, k)))

    # ----- independent residual evaluation ----------------------------------
    def residuals(self, sol: VerticalSolution, g=None, f=None, k=None) -> dict:
        """Operator residuals evaluated directly from the profiles."""
        cfg, mesh, n = self.config, self.mesh, self.n
        m = mesh.m
        out = {"divergence": 0.0, "momentum": 0.0, "stress": 0.0,
               "continuity": 0.0, "bottom": 0.0}
        for l in range(m):
            D = mesh.D[l]
            D2 = D @ D
            mu, rho = cfg.mu[l], cfg.rho[l]
            gterm = self.sign * cfg.gamma * rho * self.zeta[0]
            v = sol.u[l][: self.dim_h]
            w = sol.u[l][-1]
            p = sol.p[l]
            div = (self.zeta @ v) + D @ w
            gg = np.asarray(g[l]) if g is not None else np.zeros_like(div)
            nodes = self.div_rows[l][1]  # at xi=0 the top row is not imposed
            out["divergence"] = max(out["divergence"],
                                    float(np.max(np.abs((div - gg)[nodes]))))
            gradp = [self.zeta[j] * p for j in range(self.dim_h)] + [D @ p]
            divu = div
            mom = []
            for j in range(self.dim_h):
                mom.append(gradp[j]
                           - mu * ((D2 @ v[j] - self.kappa2 * v[j])
                                   + self.zeta[j] * divu)
                           + gterm * v[j])
            mom.append(gradp[-1]
                       - mu * ((D2 @ w - self.kappa2 * w) + D @ divu)
                       + gterm * w)
            ff = np.asarray(f[l]) if f is not None else np.zeros((n, 1))
            interior = slice(1, mesh.degrees[l])
            for j in range(n):
                r = mom[j] - (ff[j] if f is not None else 0.0)
                out["momentum"] = max(out["momentum"],
                                      float(np.max(np.abs(r[interior]))))
        # interface and bottom rows
        out["bottom"] = float(np.max(np.abs(sol.u[0][:, 0])))
        for l in range(m):
            t_below = self._traction(sol, l, at_top=True)
            if l < m - 1:
                t_above = self._traction(sol, l + 1, at_top=False)
                cont = sol.u[l + 1][:, 0] - sol.u[l][:, -1]
                out["continuity"] = max(out["continuity"],
                                        float(np.max(np.abs(cont))))
            else:
                t_above = np.zeros(n, dtype=complex)
            kk = np.asarray(k[l]) if k is not None else np.zeros(n)
            out["stress"] = max(out["stress"],
                                float(np.max(np.abs(t_above - t_below - kk))))
        return out

    def _traction(self, sol: VerticalSolution, layer: int, at_top: bool):
        mu = self.config.mu[layer]
        D = self.mesh.D[layer]
        node = -1 if at_top else 0
        v = sol.u[layer][: self.dim_h]
        w = sol.u[layer][-1]
        p = sol.p[layer]
        th = [-mu * ((D @ v[j])[node] + self.zeta[j] * w[node])
              for j in range(self.dim_h)]
        tn = p[node] - 2.0 * mu * (D @ w)[node]
        return np.array(th + [tn])


class VerticalSolver:
    """Cache of factored frequency problems for one (config, mesh)."""

    def __init__(self, config: PhysicalConfig, mesh: LayerMesh):
        self.config = config
        self.mesh = mesh
        self._cache = {}

    def problem(self, xi, sign: int) -> FrequencyProblem:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        key = (tuple(np.round(xi, 14)), sign)
        fp = self._cache.get(key)
        if fp is None:
            fp = FrequencyProblem(self.config, self.mesh, xi, sign)
            self._cache[key] = fp
        return fp

    def solve_stress(self, xi, g=None, f=None, k=None, sign=-1) -> VerticalSolution:
        return self.problem(xi, sign).solve(g, f, k)

    def solve_normal_stress(self, xi, psi) -> VerticalSolution:
        """Normal-stress problem: f = g = 0, stress jumps psi_l e_n, +gamma sign."""
        n = self.config.n
        k = np.zeros((self.mesh.m, n), dtype=complex)
        k[:, -1] = np.asarray(psi)
        return self.problem(xi, +1).solve(k=k)


# ----------------------------------------------------------------------------
# Energy form and symmetric-gradient utilities
# ----------------------------------------------------------------------------

def _sym_grad_profiles(config, mesh, xi, sol: VerticalSolution, layer: int):
    """Entries of D(u) = grad u + (grad u)^t for one layer: (n, n, nodes)."""
    n = config.n
    dim_h = n - 1
    zeta = 2j * np.pi * np.atleast_1d(np.asarray(xi, float))
    D = mesh.D[layer]
    u = sol.u[layer]
    G = np.zeros((n, n, u.shape[1]), dtype=complex)
    for j in range(n):
        for kdir in range(dim_h):
            G[j, kdir] = zeta[kdir] * u[j]
        G[j, n - 1] = D @ u[j]
    return G + np.transpose(G, (1, 0, 2))


def energy_form(config: PhysicalConfig, mesh: LayerMesh, xi, wsol: VerticalSolution,
                vsol: VerticalSolution, gamma=None) -> complex:
    """B_gamma(w, v) = sum_l int (mu_l/2) D(w):conj(D(v)) - gamma rho_l d1(w).conj(v)."""
    if gamma is None:
        gamma = config.gamma
    zeta1 = 2j * np.pi * float(np.atleast_1d(xi)[0])
    total = 0.0 + 0.0j
    for l in range(mesh.m):
        Dw = _sym_grad_profiles(config, mesh, xi, wsol, l)
        Dv = _sym_grad_profiles(config, mesh, xi, vsol, l)
        acc = 0.0 + 0.0j
        for j in range(config.n):
            for kdir in range(config.n):
                acc += mesh.pair(l, Dw[j, kdir], Dv[j, kdir])
        adv = sum(mesh.pair(l, zeta1 * wsol.u[l][j], vsol.u[l][j])
                  for j in range(config.n))
        total += 0.5 * config.mu[l] * acc - gamma * config.rho[l] * adv
    return total


def sym_grad_sq(fld: SpectralField) -> float:
    """int_Omega |D(u)|^2 for a velocity SpectralField (ncomp = n)."""
    grid, mesh = fld.grid, fld.mesh
    n = grid.n
    dim_h = grid.dim_h
    vol = grid.L ** dim_h
    total = 0.0
    for l in range(mesh.m):
        u = fld.data[l]  # (n, nlat, nodes)
        D = mesh.D[l]
        G = np.zeros((n, n) + u.shape[1:], dtype=complex)
        for j in range(n):
            for kdir in range(dim_h):
                G[j, kdir] = (2j * np.pi * grid.xi[:, kdir])[:, None] * u[j]
            G[j, n - 1] = u[j] @ D.T
        S = G + np.transpose(G, (1, 0, 2, 3))
        total += vol * float(np.sum((np.abs(S) ** 2) @ mesh.w[l]))
    return total


# ----------------------------------------------------------------------------
# Exact exponential-basis oracle (single layer, n = 2)
# ----------------------------------------------------------------------------

def oracle_single_layer(mu: float, rho: float, gamma: float, a: float,
                        xi: float, psi: complex = 1.0, sign: int = +1):
    """Closed-form single-layer normal-stress solve via exponential bases.

    Returns (normal_trace, profiles) where profiles maps y -> (v, w, p).
    Characteristic roots are +-2*pi*|xi| and +-lam with
    lam^2 = 4*pi^2*xi^2 + sign*2*pi*i*gamma*rho*xi/mu; the polynomial
    resonance branch y*exp(+-2*pi*|xi| y) is used when gamma*xi = 0.
    Bases are normalized to decay (exp(k(y-a)), exp(-k y)) to avoid overflow.
    """
    if xi == 0:
        raise ValueError("oracle needs xi != 0")
    k = 2.0 * math.pi * abs(xi)
    zeta = 2j * math.pi * xi
    beta = sign * gamma * rho * zeta  # coefficient of u in the momentum rows

    if beta == 0:
        # resonance branch: w = (c1 + c2 y) e^{k(y-a)} + (c3 + c4 y) e^{-k y}
        ea = math.exp(-k * a)

        def basis(y):
            ep = np.exp(k * (y - a))
            em = np.exp(-k * y)
            w = np.array([ep, y * ep, em, y * em])
            wp = np.array([k * ep, (1 + k * y) * ep, -k * em, (1 - k * y) * em])
            wpp = np.array([k * k * ep, k * (2 + k * y) * ep,
                            k * k * em, (k * k * y - 2 * k) * em])
            p = np.array([0.0 * ep, 2.0 * mu * ep, 0.0 * em, 2.0 * mu * em])
            return w, wp, wpp, p

        w0, wp0, _, _ = basis(0.0)
        wa, wpa, wppa, pa = basis(float(a))
        M = np.zeros((4, 4), dtype=complex)
        rhs = np.zeros(4, dtype=complex)
        M[0] = w0                     # w(0) = 0
        M[1] = wp0                    # w'(0) = 0  (v(0) = 0 via divergence)
        M[2] = wppa + k * k * wa      # tangential traction at top = 0
        M[3] = -(pa - 2.0 * mu * wpa)  # -(p - 2 mu w')(a) = psi
        rhs[3] = psi
        c = np.linalg.solve(M, rhs)

        def profiles(y):
            w, wp, _, p = basis(float(y))
            wv = c @ w
            vv = -(c @ wp) / zeta
            pv = c @ p
            return vv, wv, pv

        return c @ wa, profiles

    # homogeneous root: mu*(lam^2 - k^2) - beta = 0, take Re(lam) >= 0
    lam = np.sqrt(complex(k * k + beta / mu))
    if lam.real < 0:
        lam = -lam

    def fields(y):
        ep = math.exp(k * (y - a))
        em = math.exp(-k * y)
        el = np.exp(lam * (y - a))
        eml = np.exp(-lam * y)
        # columns: A, B (pressure amplitudes), C, D (homogeneous velocity)
        w = np.array([-k / beta * ep, k / beta * em, el, eml])
        v = np.array([-zeta / beta * ep, -zeta / beta * em,
                      -(lam / zeta) * el, (lam / zeta) * eml])
        wp = np.array([-k * k / beta * ep, -k * k / beta * em,
                       lam * el, -lam * eml])
        vp = np.array([-zeta * k / beta * ep, zeta * k / beta * em,
                       -(lam * lam / zeta) * el, -(lam * lam / zeta) * eml])
        p = np.array([ep, em, 0.0 * el, 0.0 * eml])
        return v, w, vp, wp, p

    v0, w0, _, _, _ = fields(0.0)
    va, wa, vpa, wpa, pa = fields(float(a))
    M = np.zeros((4, 4), dtype=complex)
    rhs = np.zeros(4, dtype=complex)
    M[0] = v0
    M[1] = w0
    M[2] = -mu * (vpa + zeta * wa)       # tangential traction = 0
    M[3] = -(pa - 2.0 * mu * wpa)        # -(vertical traction) = psi
    rhs[3] = psi
    c = np.linalg.solve(M, rhs)

    def profiles(y):
        v, w, _, _, p = fields(float(y))
        return c @ v, c @ w, c @ p

    return c @ wa, profiles
