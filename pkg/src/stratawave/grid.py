"""Periodic horizontal Fourier representation, per-layer vertical Chebyshev
collocation, transforms, tangential multipliers, and norm evaluators.

Conventions
-----------
Fourier series: f(x) = sum_xi c_xi exp(2*pi*i*xi.x) with xi = k/L and
k in {-N/2+1, ..., N/2} per horizontal direction (numpy fft ordering).
Plancherel: int_torus |f|^2 = L^(n-1) * sum |c_xi|^2.

Homogeneous seminorm weights use |xi| without 2*pi factors; the 2*pi lives
inside operator symbols only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


# ----------------------------------------------------------------------------
# Chebyshev utilities (single closed interval)
# ----------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _cgl_reference(d: int):
    """CGL nodes (ascending on [-1,1]), differentiation matrix, CC weights."""
    if d < 1:
        raise ValueError("degree must be >= 1")
    j = np.arange(d + 1)
    # standard descending nodes cos(pi j / d); flip to ascending
    t = np.cos(np.pi * j / d)[::-1].copy()
    c = np.ones(d + 1)
    c[0] = 2.0
    c[-1] = 2.0
    c = c * (-1.0) ** j
    T = np.tile(t, (d + 1, 1)).T
    dT = T - T.T + np.eye(d + 1)
    D = np.outer(c, 1.0 / c) / dT
    D -= np.diag(D.sum(axis=1))
    # Clenshaw-Curtis weights on [-1,1]
    w = np.zeros(d + 1)
    theta = np.pi * j / d
    for i in range(d + 1):
        s = 0.0
        for k in range(1, d // 2 + 1):
            b = 2.0 if 2 * k < d else 1.0
            s += b / (4.0 * k * k - 1.0) * math.cos(2.0 * k * theta[i])
        w[i] = (2.0 / d) * (1.0 - s)
    w[0] /= 2.0
    w[-1] /= 2.0
    w = w[::-1].copy()
    return t, D, w


def cheb_nodes(d: int, a: float, b: float) -> np.ndarray:
    t, _, _ = _cgl_reference(d)
    return a + (b - a) * (t + 1.0) / 2.0


def cheb_diff(d: int, a: float, b: float) -> np.ndarray:
    _, D, _ = _cgl_reference(d)
    return D * (2.0 / (b - a))


def cheb_weights(d: int, a: float, b: float) -> np.ndarray:
    _, _, w = _cgl_reference(d)
    return w * ((b - a) / 2.0)


def bary_weights(d: int) -> np.ndarray:
    w = np.ones(d + 1)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def bary_matrix(src_nodes: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Interpolation matrix from CGL nodes to arbitrary points (barycentric)."""
    d = len(src_nodes) - 1
    w = bary_weights(d)
    dst = np.atleast_1d(np.asarray(dst, dtype=float))
    M = np.zeros((len(dst), d + 1))
    for i, y in enumerate(dst):
        diff = y - src_nodes
        hit = np.where(np.abs(diff) < 1e-14 * max(1.0, abs(y)))[0]
        if hit.size:
            M[i, hit[0]] = 1.0
        else:
            r = w / diff
            M[i] = r / r.sum()
    return M


# ----------------------------------------------------------------------------
# Horizontal torus grid
# ----------------------------------------------------------------------------

class TorusGrid:
    """Periodic horizontal grid: n-1 directions of N points, period L."""

    def __init__(self, n: int = 2, L: float = 1.0, N: int = 128):
        if n not in (2, 3):
            raise ValueError("dimension n must be 2 or 3")
        if N < 4 or N % 2:
            raise ValueError("N must be even and >= 4")
        self.n = n
        self.L = float(L)
        self.N = int(N)
        self.dim_h = n - 1
        self.shape = (N,) * self.dim_h
        self.nlat = N ** self.dim_h
        k1 = np.rint(np.fft.fftfreq(N) * N).astype(int)
        if self.dim_h == 1:
            self.k = k1.reshape(-1, 1)
        else:
            ka, kb = np.meshgrid(k1, k1, indexing="ij")
            self.k = np.stack([ka.ravel(), kb.ravel()], axis=1)
        self.xi = self.k / self.L
        self.xi_norm = np.linalg.norm(self.xi, axis=1)
        self.xi1 = self.xi[:, 0]
        # index of the conjugate partner (-k mod N)
        negk = (-self.k) % N
        if self.dim_h == 1:
            self.conj_index = negk[:, 0]
        else:
            self.conj_index = negk[:, 0] * N + negk[:, 1]
        self.nyquist_mask = np.any(self.k == N // 2, axis=1)
        self.x = np.arange(N) * self.L / N

    # --- transforms of horizontal fields (last dim_h axes are spatial/freq)
    def fft(self, samples: np.ndarray) -> np.ndarray:
        axes = tuple(range(samples.ndim - self.dim_h, samples.ndim))
        c = np.fft.fftn(samples, axes=axes) / self.nlat
        return c.reshape(samples.shape[: samples.ndim - self.dim_h] + (self.nlat,))

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        lead = coeffs.shape[:-1]
        c = coeffs.reshape(lead + self.shape)
        axes = tuple(range(len(lead), c.ndim))
        return np.fft.ifftn(c * self.nlat, axes=axes)

    def pad_ifft(self, coeffs: np.ndarray, M: int) -> np.ndarray:
        """Inverse transform onto an M-point (per direction) physical grid."""
        lead = coeffs.shape[:-1]
        c = coeffs.reshape(lead + self.shape)
        out_shape = lead + (M,) * self.dim_h
        big = np.zeros(out_shape, dtype=complex)
        half = self.N // 2
        if self.dim_h == 1:
            big[..., :half] = c[..., :half]
            big[..., M - half:] = c[..., half:]
        else:
            sl = [slice(0, half), slice(M - half, M)]
            so = [slice(0, half), slice(half, self.N)]
            for i in range(2):
                for j in range(2):
                    big[..., sl[i], sl[j]] = c[..., so[i], so[j]]
        axes = tuple(range(len(lead), big.ndim))
        return np.fft.ifftn(big * (M ** self.dim_h), axes=axes)

    def fft_unpad(self, samples: np.ndarray) -> np.ndarray:
        """Forward transform from an M-point grid, truncated to the lattice."""
        M = samples.shape[-1]
        axes = tuple(range(samples.ndim - self.dim_h, samples.ndim))
        big = np.fft.fftn(samples, axes=axes) / (M ** self.dim_h)
        half = self.N // 2
        lead = samples.shape[: samples.ndim - self.dim_h]
        c = np.zeros(lead + self.shape, dtype=complex)
        if self.dim_h == 1:
            c[..., :half] = big[..., :half]
            c[..., half:] = big[..., M - half:]
        else:
            sl = [slice(0, half), slice(M - half, M)]
            so = [slice(0, half), slice(half, self.N)]
            for i in range(2):
                for j in range(2):
                    c[..., so[i], so[j]] = big[..., sl[i], sl[j]]
        return c.reshape(lead + (self.nlat,))

    def dealiased_product(self, *coeff_arrays: np.ndarray) -> np.ndarray:
        """Pointwise product of horizontal fields with 3/2-rule dealiasing."""
        M = (3 * self.N) // 2
        phys = self.pad_ifft(coeff_arrays[0], M)
        for c in coeff_arrays[1:]:
            phys = phys * self.pad_ifft(c, M)
        return self.fft_unpad(phys)

    def is_real(self, coeffs: np.ndarray, tol: float = 1e-12) -> bool:
        scale = np.max(np.abs(coeffs)) or 1.0
        return bool(
            np.max(np.abs(coeffs - np.conj(coeffs[..., self.conj_index]))) <= tol * scale
        )


# ----------------------------------------------------------------------------
# Vertical layer mesh
# ----------------------------------------------------------------------------

class LayerMesh:
    """Per-layer CGL collocation on [a_{l-1}, a_l]; optional sub-pieces."""

    def __init__(self, a, degrees=32):
        self.a = [0.0] + [float(v) for v in a]
        self.m = len(self.a) - 1
        if any(self.a[i] >= self.a[i + 1] for i in range(self.m)):
            raise ValueError("depths must be strictly increasing")
        if isinstance(degrees, int):
            degrees = [degrees] * self.m
        self.degrees = list(degrees)
        if any(d < 8 for d in self.degrees):
            raise ValueError("vertical degree must be >= 8")
        self.nodes = [
            cheb_nodes(d, self.a[i], self.a[i + 1]) for i, d in enumerate(self.degrees)
        ]
        self.D = [
            cheb_diff(d, self.a[i], self.a[i + 1]) for i, d in enumerate(self.degrees)
        ]
        self.w = [
            cheb_weights(d, self.a[i], self.a[i + 1])
            for i, d in enumerate(self.degrees)
        ]
        # upsampled quadrature (exact for products of two interpolants)
        self._up = []
        for i, d in enumerate(self.degrees):
            du = 2 * d + 2
            up_nodes = cheb_nodes(du, self.a[i], self.a[i + 1])
            P = bary_matrix(self.nodes[i], up_nodes)
            self._up.append((P, cheb_weights(du, self.a[i], self.a[i + 1])))

    def thickness(self, layer: int) -> float:
        return self.a[layer + 1] - self.a[layer]

    def integrate(self, layer: int, vals: np.ndarray) -> np.ndarray:
        """Plain CC quadrature over the layer (last axis = nodes)."""
        return vals @ self.w[layer]

    def pair(self, layer: int, fvals: np.ndarray, gvals: np.ndarray) -> np.ndarray:
        """int f * conj(g) over the layer with exact product quadrature."""
        P, wu = self._up[layer]
        fu = fvals @ P.T
        gu = gvals @ P.T
        return (fu * np.conj(gu)) @ wu

    def locate(self, y: float) -> int:
        if y < self.a[0] - 1e-12 or y > self.a[-1] + 1e-12:
            raise ValueError(f"y={y} outside the slab")
        for i in range(self.m):
            if y <= self.a[i + 1] + 1e-12:
                return i
        return self.m - 1

    def eval_profile(self, profiles, y: float):
        """Evaluate per-layer node-value profiles at a vertical point y.

        profiles: list over layers of arrays (..., d_l+1).
        """
        lay = self.locate(y)
        M = bary_matrix(self.nodes[lay], [y])[0]
        return profiles[lay] @ M


# ----------------------------------------------------------------------------
# Spectral fields on the slab
# ----------------------------------------------------------------------------

@dataclass
class SpectralField:
    """Function on the periodic slab: per-layer arrays (ncomp, nlat, d_l+1)."""

    grid: TorusGrid
    mesh: LayerMesh
    data: list  # list over layers, complex arrays (ncomp, nlat, nodes)
    real: bool = False

    @property
    def ncomp(self) -> int:
        return self.data[0].shape[0]

    @classmethod
    def zeros(cls, grid, mesh, ncomp=1, real=False):
        data = [
            np.zeros((ncomp, grid.nlat, d + 1), dtype=complex)
            for d in mesh.degrees
        ]
        return cls(grid, mesh, data, real)

    @classmethod
    def from_samples(cls, grid, mesh, samples):
        """samples: list over layers of arrays (ncomp, N[,N], nodes)."""
        data = []
        realish = True
        for s in samples:
            s = np.asarray(s)
            realish = realish and np.isrealobj(s)
            # move nodes axis last already; fft over horizontal axes
            lead = s.shape[0]
            nodes = s.shape[-1]
            arr = np.moveaxis(s, -1, 1)  # (ncomp, nodes, N[,N])
            c = grid.fft(arr.reshape((lead * nodes,) + grid.shape))
            c = c.reshape(lead, nodes, grid.nlat)
            data.append(np.moveaxis(c, 1, -1).astype(complex))
        return cls(grid, mesh, data, real=realish)

    def to_samples(self):
        out = []
        for arr in self.data:
            ncomp, nlat, nodes = arr.shape
            c = np.moveaxis(arr, -1, 1).reshape(ncomp * nodes, nlat)
            s = self.grid.ifft(c).reshape((ncomp, nodes) + self.grid.shape)
            s = np.moveaxis(s, 1, -1)
            out.append(s.real if self.real else s)
        return out

    def copy(self) -> "SpectralField":
        return SpectralField(
            self.grid, self.mesh, [a.copy() for a in self.data], self.real
        )

    def __add__(self, other):
        return SpectralField(
            self.grid,
            self.mesh,
            [a + b for a, b in zip(self.data, other.data)],
            self.real and other.real,
        )

    def __sub__(self, other):
        return SpectralField(
            self.grid,
            self.mesh,
            [a - b for a, b in zip(self.data, other.data)],
            self.real and other.real,
        )

    def __mul__(self, scalar):
        return SpectralField(
            self.grid,
            self.mesh,
            [a * scalar for a in self.data],
            self.real and not isinstance(scalar, complex),
        )

    __rmul__ = __mul__

    def dy(self) -> "SpectralField":
        return SpectralField(
            self.grid,
            self.mesh,
            [a @ D.T for a, D in zip(self.data, self.mesh.D)],
            self.real,
        )

    def dx(self, direction: int) -> "SpectralField":
        mult = 2j * np.pi * self.grid.xi[:, direction]
        return SpectralField(
            self.grid,
            self.mesh,
            [a * mult[None, :, None] for a in self.data],
            self.real,
        )

    def trace(self, y: float) -> np.ndarray:
        """Coefficients at a horizontal plane: (ncomp, nlat)."""
        lay = self.mesh.locate(y)
        M = bary_matrix(self.mesh.nodes[lay], [y])[0]
        return self.data[lay] @ M

    def evaluate(self, x, y) -> np.ndarray:
        """Pointwise value at horizontal point x (array of dim n-1), height y."""
        prof = self.mesh.eval_profile(self.data, y)  # (ncomp, nlat)
        x = np.atleast_1d(np.asarray(x, float))
        phase = np.exp(2j * np.pi * (self.grid.xi @ x))
        vals = prof @ phase
        return vals.real if self.real else vals


def multiplier(omega, coeffs: np.ndarray, grid: TorusGrid, real_flag: bool = False,
               tol: float = 1e-12) -> np.ndarray:
    """Apply a tangential Fourier multiplier to horizontal coefficients.

    omega: callable xi_row -> complex scalar, or precomputed array (nlat,).
    coeffs: (..., nlat). Checks the reality symmetry when real_flag is set.
    """
    if callable(omega):
        om = np.array([omega(grid.xi[i]) for i in range(grid.nlat)], dtype=complex)
    else:
        om = np.asarray(omega, dtype=complex)
    if real_flag:
        sym = np.max(np.abs(om - np.conj(om[grid.conj_index])))
        scale = np.max(np.abs(om)) or 1.0
        if sym > tol * scale:
            raise ValueError("multiplier violates the reality symmetry "
                             "omega(-xi) = conj(omega(xi))")
    return coeffs * om


# ----------------------------------------------------------------------------
# Norms
# ----------------------------------------------------------------------------

def _hweight(grid: TorusGrid, s: float) -> np.ndarray:
    return np.maximum(1.0, grid.xi_norm) ** (2.0 * s)


def norm_interface(coeffs: np.ndarray, grid: TorusGrid, which="L2", s: float = 0.0,
                   zero_mode_tol: float = 1e-9) -> float:
    """Norm of a horizontal field given by lattice coefficients (..., nlat)."""
    c2 = np.abs(coeffs) ** 2
    vol = grid.L ** grid.dim_h
    if which == "L2":
        w = np.ones(grid.nlat)
    elif which == "Hs":
        w = _hweight(grid, s)
    elif which in ("Hdot-1", "Hdot1"):
        scale = math.sqrt(float(np.sum(c2))) or 1.0
        zm = math.sqrt(float(np.sum(np.abs(coeffs[..., 0]) ** 2)))
        if zm > zero_mode_tol * scale:
            raise ValueError("zero mode obstructs homogeneous seminorm")
        p = -2.0 if which == "Hdot-1" else 2.0
        w = np.zeros(grid.nlat)
        nz = grid.xi_norm > 0
        w[nz] = grid.xi_norm[nz] ** p
    elif which == "curlyHs":
        w = np.empty(grid.nlat)
        low = grid.xi_norm <= 1.0
        xn = grid.xi_norm
        with np.errstate(divide="ignore", invalid="ignore"):
            wl = (grid.xi1**2 + xn**4) / xn**2
        wl[xn == 0] = 0.0
        w[low] = wl[low]
        w[~low] = xn[~low] ** (2.0 * s)
    else:
        raise ValueError(f"unknown interface norm tag {which!r}")
    while c2.ndim > 1:
        c2 = c2.sum(axis=0)
    return math.sqrt(vol * float(np.sum(w * c2)))


def norm_volume(fld: SpectralField, order: int = 0, per_layer: bool = False):
    """Discrete H^order norm on the slab (integer order >= 0).

    Sum over all derivative multi-indices |alpha| <= order, with horizontal
    derivatives as 2*pi*i*xi multipliers and vertical via the layer D matrix.
    """
    grid, mesh = fld.grid, fld.mesh
    vol = grid.L ** grid.dim_h
    totals = np.zeros(mesh.m)

    def accumulate(arrs, remaining):
        # arrs: list per layer (ncomp, nlat, nodes)
        for lay in range(mesh.m):
            v2 = np.abs(arrs[lay]) ** 2
            totals[lay] += vol * float(np.sum(v2 @ mesh.w[lay]))
        if remaining == 0:
            return
        # vertical derivative branch
        accumulate([a @ mesh.D[i].T for i, a in enumerate(arrs)], remaining - 1)
        # horizontal derivative branches
        for dirn in range(grid.dim_h):
            mult = 2j * np.pi * grid.xi[:, dirn]
            accumulate([a * mult[None, :, None] for a in arrs], remaining - 1)

    # note: this over-counts mixed derivatives (each permutation counted);
    # still a norm equivalent to H^order, which is all the evaluators need.
    accumulate(fld.data, order)
    if per_layer:
        return np.sqrt(totals)
    return math.sqrt(float(totals.sum()))


def vertical_integral(fld: SpectralField, upto: float) -> np.ndarray:
    """Coefficients of x -> int_0^upto f(x,y) dy, component-wise: (ncomp, nlat)."""
    grid, mesh = fld.grid, fld.mesh
    out = np.zeros((fld.ncomp, grid.nlat), dtype=complex)
    for lay in range(mesh.m):
        lo, hi = mesh.a[lay], mesh.a[lay + 1]
        if upto <= lo + 1e-14:
            break
        if upto >= hi - 1e-14:
            out += fld.data[lay] @ mesh.w[lay]
        else:
            # partial layer: integrate the interpolant on [lo, upto]
            d = mesh.degrees[lay]
            sub = cheb_nodes(2 * d, lo, upto)
            P = bary_matrix(mesh.nodes[lay], sub)
            wsub = cheb_weights(2 * d, lo, upto)
            out += (fld.data[lay] @ P.T) @ wsub
            break
    return out


def korn_constant(grid: TorusGrid, mesh: LayerMesh, rng, nsamples: int = 100,
                  band: int = 6) -> float:
    """Empirical Korn constant ||u||_H1 / ||Du||_L2 over random zero-bottom fields."""
    from .vertical_bvp import sym_grad_sq  # local import, avoids cycle

    n = grid.n
    worst = 0.0
    for _ in range(nsamples):
        fld = random_field(grid, mesh, rng, ncomp=n, band=band, zero_bottom=True)
        h1 = norm_volume(fld, order=1)
        dnorm = math.sqrt(sym_grad_sq(fld))
        if dnorm > 0:
            worst = max(worst, h1 / dnorm)
    return worst


def random_field(grid: TorusGrid, mesh: LayerMesh, rng, ncomp=1, band=6,
                 zero_bottom=False, vdeg=6) -> SpectralField:
    """Random smooth real band-limited field (globally smooth in y)."""
    keep = grid.xi_norm * grid.L <= band
    coeff = (rng.standard_normal((ncomp, vdeg + 1, grid.nlat))
             + 1j * rng.standard_normal((ncomp, vdeg + 1, grid.nlat)))
    coeff[..., ~keep] = 0.0
    coeff[..., grid.nyquist_mask] = 0.0
    # enforce reality
    coeff = 0.5 * (coeff + np.conj(coeff[..., grid.conj_index]))
    a_top = mesh.a[-1]
    data = []
    for lay in range(mesh.m):
        y = mesh.nodes[lay] / a_top  # in [0,1]
        powers = np.stack([y ** (j + (1 if zero_bottom else 0))
                           for j in range(vdeg + 1)])  # (vdeg+1, nodes)
        arr = np.einsum("cvk,vn->ckn", coeff, powers)
        data.append(arr)
    return SpectralField(grid, mesh, data, real=True)


def random_interface(grid: TorusGrid, rng, m=1, band=6, zero_mean=False,
                     ncomp=None) -> np.ndarray:
    """Random real band-limited interface coefficients (m[, ncomp], nlat)."""
    shape = (m, grid.nlat) if ncomp is None else (m, ncomp, grid.nlat)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    keep = grid.xi_norm * grid.L <= band
    c[..., ~keep] = 0.0
    c[..., grid.nyquist_mask] = 0.0
    c = 0.5 * (c + np.conj(c[..., grid.conj_index]))
    if zero_mean:
        c[..., 0] = 0.0
    return c
