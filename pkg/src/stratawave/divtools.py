"""Divergence toolbox: right inverse, solenoidal extension, reflection
extension, and the inductive multi-normal-trace solver.

Fields produced here live on composite vertical meshes (a list of analytic
pieces per horizontal frequency) because each reflection step pulls interior
interface kinks into the new top strip; splitting at the pulled-back
breakpoints keeps every piece analytic so residuals stay at spectral accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import (LayerMesh, SpectralField, TorusGrid, bary_matrix,
                   cheb_diff, cheb_nodes, cheb_weights, norm_interface)

DEFAULT_PIECE_DEGREE = 48


class IncompatibleData(ValueError):
    pass


@lru_cache(maxsize=None)
def _cumulative_matrix(d: int, lo: float, hi: float) -> np.ndarray:
    """C with (C f)_i = int_lo^{y_i} of the degree-d interpolant of f."""
    nodes = cheb_nodes(d, lo, hi)
    C = np.zeros((d + 1, d + 1))
    for i in range(1, d + 1):
        sub = cheb_nodes(d, lo, float(nodes[i]))
        C[i] = cheb_weights(d, lo, float(nodes[i])) @ bary_matrix(nodes, sub)
    return C


@dataclass
class Piece:
    lo: float
    hi: float
    degree: int

    def __post_init__(self):
        self.nodes = cheb_nodes(self.degree, self.lo, self.hi)
        self.D = cheb_diff(self.degree, self.lo, self.hi)
        self.w = cheb_weights(self.degree, self.lo, self.hi)


class PieceField:
    """Vector field on a stack of vertical pieces, horizontal lattice coeffs.

    data[j] has shape (ncomp, nlat, degree_j + 1) matching pieces[j].
    """

    def __init__(self, grid: TorusGrid, pieces, data):
        self.grid = grid
        self.pieces = pieces
        self.data = data

    @property
    def ncomp(self):
        return self.data[0].shape[0]

    @property
    def top(self):
        return self.pieces[-1].hi

    @classmethod
    def zeros(cls, grid, pieces, ncomp):
        return cls(grid, pieces,
                   [np.zeros((ncomp, grid.nlat, p.degree + 1), complex)
                    for p in pieces])

    def copy(self):
        return PieceField(self.grid, self.pieces, [a.copy() for a in self.data])

    def add_in(self, other: "PieceField"):
        """In-place sum over the shared suffix of pieces (same objects)."""
        off = len(self.pieces) - len(other.pieces)
        for j, arr in enumerate(other.data):
            self.data[off + j] += arr
        return self

    def divergence(self) -> "PieceField":
        out = []
        for p, arr in zip(self.pieces, self.data):
            div = arr[-1] @ p.D.T
            for dirn in range(self.grid.dim_h):
                div = div + (2j * np.pi * self.grid.xi[:, dirn])[:, None] * arr[dirn]
            out.append(div[None])
        return PieceField(self.grid, self.pieces, out)

    def trace(self, y: float, from_above: bool = False) -> np.ndarray:
        """Coefficients (ncomp, nlat) at height y."""
        eps = 1e-12 * max(1.0, abs(y))
        for j, p in enumerate(self.pieces):
            inside = (p.lo - eps <= y <= p.hi + eps)
            if inside and not (from_above and abs(y - p.hi) <= eps
                               and j + 1 < len(self.pieces)):
                M = bary_matrix(p.nodes, [y])[0]
                return self.data[j] @ M
        raise ValueError(f"y={y} outside the field support")

    def l2_norm_sq(self) -> float:
        vol = self.grid.L ** self.grid.dim_h
        return sum(vol * float(np.sum((np.abs(arr) ** 2) @ p.w))
                   for p, arr in zip(self.pieces, self.data))

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(arr))) for arr in self.data)

    def resample(self, mesh: LayerMesh) -> SpectralField:
        """Interpolate onto a plain layer mesh (piecewise barycentric)."""
        data = []
        for l in range(mesh.m):
            arr = np.zeros((self.ncomp, self.grid.nlat, mesh.degrees[l] + 1),
                           complex)
            for i, y in enumerate(mesh.nodes[l]):
                arr[..., i] = self.trace(float(y))
            data.append(arr)
        return SpectralField(self.grid, mesh, data)


def _restrict(fld: SpectralField, piece: Piece, comp: int = 0) -> np.ndarray:
    """Sample one component of a SpectralField on a piece's nodes (exact)."""
    mesh = fld.mesh
    out = np.zeros((fld.grid.nlat, piece.degree + 1), complex)
    for i, y in enumerate(piece.nodes):
        lay = mesh.locate(float(y))
        M = bary_matrix(mesh.nodes[lay], [y])[0]
        out[:, i] = fld.data[lay][comp] @ M
    return out


# ----------------------------------------------------------------------------
# The four operators
# ----------------------------------------------------------------------------

def div_right_inverse(f: PieceField) -> PieceField:
    """Pi f = (0, ..., 0, int_bottom^y f): exact vertical antiderivative.

    f: scalar PieceField. The output vanishes at the bottom of the stack and
    satisfies div(Pi f) = f at the nodes.
    """
    grid = f.grid
    n = grid.n
    out = PieceField.zeros(grid, f.pieces, n)
    running = np.zeros(grid.nlat, complex)
    for j, p in enumerate(f.pieces):
        C = _cumulative_matrix(p.degree, p.lo, p.hi)
        out.data[j][n - 1] = running[:, None] + f.data[j][0] @ C.T
        running = out.data[j][n - 1][:, -1].copy()
    return out


def solenoidal_profiles(g: np.ndarray, grid: TorusGrid, piece: Piece,
                        strip_lo: float, strip_hi: float,
                        zero_mode_tol: float = 1e-12) -> np.ndarray:
    """Closed-form divergence-free extension profiles on one piece.

    g: (nlat,) coefficients of the prescribed top normal trace on the strip
    (strip_lo, strip_hi); returns (n, nlat, nodes). With t = y - strip_lo,
    b = strip_hi - strip_lo:

        v(xi, t) = g(xi) i xi sinh(t|xi|) / (2 pi |xi| (cosh(b|xi|) - 1))
        w(xi, t) = g(xi) (cosh(t|xi|) - 1) / (cosh(b|xi|) - 1)

    The zero mode must vanish. cosh(x)-1 is evaluated as 2 sinh^2(x/2); for
    large b|xi| the ratios switch to scaled exponentials to avoid overflow.
    """
    scale = float(np.max(np.abs(g))) or 1.0
    if abs(g[0]) > zero_mode_tol * scale:
        raise IncompatibleData("nonzero zero mode in solenoidal extension data")
    n = grid.n
    b = strip_hi - strip_lo
    t = piece.nodes - strip_lo
    out = np.zeros((n, grid.nlat, piece.degree + 1), complex)
    for idx in range(grid.nlat):
        xn = grid.xi_norm[idx]
        if xn == 0.0 or g[idx] == 0.0:
            continue
        xb = xn * b
        xt = xn * t
        if xb < 30.0:
            denom = 2.0 * np.sinh(0.5 * xb) ** 2
            wprof = 2.0 * np.sinh(0.5 * xt) ** 2 / denom
            sprof = np.sinh(xt) / denom
        else:
            # multiply numerator and denominator by 2 exp(-xb)
            denom = 1.0 + math.exp(-2.0 * xb) - 2.0 * math.exp(-xb)
            wprof = (np.exp(xt - xb) + np.exp(-xt - xb)
                     - 2.0 * math.exp(-xb)) / denom
            sprof = (np.exp(xt - xb) - np.exp(-xt - xb)) / denom
        out[n - 1, idx] = g[idx] * wprof
        for dirn in range(grid.dim_h):
            out[dirn, idx] = g[idx] * (1j * grid.xi[idx, dirn]
                                       / (2.0 * math.pi * xn)) * sprof
    return out


def solenoidal_extension(g: np.ndarray, grid: TorusGrid, lo: float, hi: float,
                         degree: int = DEFAULT_PIECE_DEGREE) -> PieceField:
    """Divergence-free field on the strip (lo, hi) with top normal trace g,
    zero bottom trace."""
    piece = Piece(lo, hi, degree)
    data = solenoidal_profiles(np.asarray(g, complex), grid, piece, lo, hi)
    return PieceField(grid, [piece], [data])


def reflection_extension(u: PieceField, b: float) -> PieceField:
    """Extend u from (0, a) to (0, b) by E u(x, y) = u(x, a - a(y-a)/(b-a)).

    The reflected part is split at the pull-backs of u's piece breakpoints so
    each new piece is the exact affine composition of an analytic piece.
    """
    a = u.top
    if b <= a:
        raise ValueError("reflection target must lie above the current top")
    ratio = (b - a) / a

    def pullback(yprime):
        return a + (a - yprime) * ratio

    new_pieces = list(u.pieces)
    new_data = [arr.copy() for arr in u.data]
    for j in reversed(range(len(u.pieces))):
        src = u.pieces[j]
        p = Piece(pullback(src.hi), pullback(src.lo), src.degree)
        # exact polynomial composition: interpolate src at reflected nodes
        ysrc = a - (p.nodes - a) / ratio
        M = bary_matrix(src.nodes, ysrc)
        new_pieces.append(p)
        new_data.append(u.data[j] @ M.T)
    return PieceField(u.grid, new_pieces, new_data)


def multi_trace_solve(f: SpectralField, g: np.ndarray,
                      degree: int = DEFAULT_PIECE_DEGREE,
                      zero_mode_tol: float = 1e-9) -> PieceField:
    """Field u with div u = f on the slab, vertical trace g_l at each y = a_l,
    and zero bottom trace, built by the strip-by-strip induction.

    f: scalar SpectralField on the layer mesh whose interfaces carry g.
    g: (m, nlat) coefficients. Requires the zero-mode identities
    g_l(0) = int_0^{a_l} f(0, .).
    """
    grid, mesh = f.grid, f.mesh
    m = mesh.m
    n = grid.n
    g = np.asarray(g, complex)

    # zero-mode compatibility
    from .grid import vertical_integral
    scale = max(float(np.max(np.abs(g))), 1e-300)
    for l in range(m):
        want = vertical_integral(f, mesh.a[l + 1])[0, 0]
        if abs(g[l, 0] - want) > zero_mode_tol * max(scale, abs(want)):
            raise IncompatibleData(
                f"incompatible zero mode at interface {l}: "
                f"g(0)={g[l, 0]:.3e} vs integral {want:.3e}")

    u = None
    for k in range(m):
        lo, hi = mesh.a[k], mesh.a[k + 1]
        if u is None:
            strip_pieces = [Piece(lo, hi, degree)]
            fprime = [_restrict(f, strip_pieces[0])[None]]
        else:
            u = reflection_extension(u, hi)
            strip_pieces = [p for p in u.pieces if p.lo >= lo - 1e-12]
            dEu = u.divergence()
            off = len(u.pieces) - len(strip_pieces)
            fprime = [_restrict(f, p)[None] - dEu.data[off + j]
                      for j, p in enumerate(strip_pieces)]
        fp_field = PieceField(grid, strip_pieces, fprime)
        lift = div_right_inverse(fp_field)
        resid = g[k] - lift.data[-1][n - 1][:, -1]
        resid = np.where(np.abs(resid) > 1e-14 * scale, resid, 0.0)
        if grid.is_real(g[k]):
            resid = 0.5 * (resid + np.conj(resid[grid.conj_index]))
        resid[0] = 0.0  # zero mode certified compatible above
        for j, p in enumerate(strip_pieces):
            lift.data[j] += solenoidal_profiles(resid, grid, p, lo, hi)
        if u is None:
            u = lift
        else:
            u.add_in(lift)
    return u


# ----------------------------------------------------------------------------
# Diagnostics used by tests and the verify suite
# ----------------------------------------------------------------------------

def divergence_residual(u: PieceField, f: SpectralField) -> float:
    """max-abs of div u - f at the composite nodes."""
    div = u.divergence()
    worst = 0.0
    for j, p in enumerate(div.pieces):
        fv = _restrict(f, p)
        worst = max(worst, float(np.max(np.abs(div.data[j][0] - fv))))
    return worst


def compatibility_estimate(u: PieceField, f: SpectralField, g: np.ndarray) -> dict:
    """Both sides of sum_l [g_l - int f]_{Hdot^-1} <= 2 pi (sum sqrt(a_l)) ||u||."""
    from .grid import vertical_integral
    mesh = f.mesh
    lhs = 0.0
    for l in range(mesh.m):
        diff = g[l] - vertical_integral(f, mesh.a[l + 1])[0]
        diff = diff.copy()
        diff[0] = 0.0  # zero mode is compatible by construction
        lhs += norm_interface(diff, u.grid, which="Hdot-1")
    const = 2.0 * math.pi * sum(math.sqrt(mesh.a[l + 1]) for l in range(mesh.m))
    rhs = const * math.sqrt(u.l2_norm_sq())
    return {"lhs": lhs, "rhs": rhs, "constant": const, "holds": lhs <= rhs}
