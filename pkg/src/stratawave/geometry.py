"""Flattening maps between the equilibrium slab and the free-surface domain,
their Jacobians and geometry matrices, interface normals, and mean curvature.

The layer-l map sends (x, y) with a_{l-1} <= y <= a_l to
(x, ((a_l - y)(a_{l-1} + eta_{l-1}) + (y - a_{l-1})(a_l + eta_l)) / (a_l - a_{l-1})).
"""

from __future__ import annotations

import numpy as np

from .grid import SpectralField, TorusGrid, LayerMesh

DEGENERACY_FLOOR = 1e-8  # times the layer thickness


class InadmissibleGeometry(ValueError):
    pass


def _eta_at(eta_coeffs, grid: TorusGrid, idx: int, x):
    """eta_idx evaluated at horizontal point x; idx -1 means the bottom (0)."""
    if idx < 0:
        return 0.0
    x = np.atleast_1d(np.asarray(x, float))
    phase = np.exp(2j * np.pi * (grid.xi @ x))
    return float(np.real(eta_coeffs[idx] @ phase))


def flatten_map(a, eta_coeffs, grid: TorusGrid, layer: int, x, y: float):
    """Map a slab point in layer `layer` (0-based) into the perturbed domain."""
    m = len(a)
    if not 0 <= layer < m:
        raise IndexError("layer index out of range")
    lo = 0.0 if layer == 0 else a[layer - 1]
    hi = a[layer]
    if y < lo - 1e-12 or y > hi + 1e-12:
        raise ValueError(f"y={y} outside layer interval [{lo}, {hi}]")
    e_lo = lo + _eta_at(eta_coeffs, grid, layer - 1, x)
    e_hi = hi + _eta_at(eta_coeffs, grid, layer, x)
    yy = ((hi - y) * e_lo + (y - lo) * e_hi) / (hi - lo)
    return x, yy


def unflatten_map(a, eta_coeffs, grid: TorusGrid, layer: int, x, y: float):
    """Exact inverse of flatten_map on layer `layer`."""
    m = len(a)
    if not 0 <= layer < m:
        raise IndexError("layer index out of range")
    lo = 0.0 if layer == 0 else a[layer - 1]
    hi = a[layer]
    e_lo = lo + _eta_at(eta_coeffs, grid, layer - 1, x)
    e_hi = hi + _eta_at(eta_coeffs, grid, layer, x)
    denom = e_hi - e_lo
    if denom <= DEGENERACY_FLOOR * (hi - lo):
        raise InadmissibleGeometry(
            f"degenerate layer {layer}: perturbed thickness {denom}")
    yy = ((e_hi - y) * lo + (y - e_lo) * hi) / denom
    return x, yy


def check_admissible(a, eta_coeffs, grid: TorusGrid, quarter_gap: bool = False):
    """Pointwise admissibility 0 < a_1+eta_1 < ... < a_m+eta_m on the grid.

    Returns the minimal perturbed gap; raises when a layer pinches off.
    Optionally enforces the quarter-gap bound used by the pressure space.
    """
    m = len(a)
    surf = [np.real(grid.ifft(eta_coeffs[l])) + a[l] for l in range(m)]
    prev = np.zeros_like(surf[0])
    min_gap = np.inf
    thick = np.diff([0.0] + list(a))
    for l in range(m):
        gap = surf[l] - prev
        if np.min(gap) <= DEGENERACY_FLOOR * thick[l]:
            raise InadmissibleGeometry(f"layer {l} pinches off")
        min_gap = min(min_gap, float(np.min(gap)))
        prev = surf[l]
    if quarter_gap:
        bound = 0.25 * min(thick)
        sup = max(float(np.max(np.abs(np.real(grid.ifft(eta_coeffs[l])))))
                  for l in range(m))
        if sup > bound:
            raise InadmissibleGeometry(
                f"quarter-gap bound violated: sup|eta| = {sup} > {bound}")
    return min_gap


def quarter_gap_margin(a, eta_coeffs, grid: TorusGrid) -> float:
    """Positive when max_l ||eta_l||_inf is below a quarter of the least gap."""
    thick = np.diff([0.0] + list(a))
    bound = 0.25 * float(min(thick))
    sup = max(float(np.max(np.abs(np.real(grid.ifft(eta_coeffs[l])))))
              for l in range(len(a)))
    return bound - sup


def geometry_fields(a, eta_coeffs, grid: TorusGrid, mesh: LayerMesh):
    """Return (J, A_entries, N) for the given surfaces.

    J: list over layers of coefficient arrays (nlat,) — constant in y.
    A_entries: dict with 'b' (list over layers of (dim_h, nlat, nodes) coeff
      arrays; the off-diagonal column of A is -b/J, so callers form the
      dealiased product of b with Jinv) and 'Jinv' (list of (nlat,) 1/J coeffs).
      A_l = [[I, -b/J], [0, 1/J]] with b = ((a_l - y) grad eta_{l-1}
      + (y - a_{l-1}) grad eta_l) / (a_l - a_{l-1}).
    N: array (m, n, nlat) interface normals (-grad eta_l, 1) in coefficients.
    """
    m = len(a)
    dim_h = grid.dim_h
    n = grid.n
    aa = [0.0] + list(a)

    # J_l = 1 + (eta_l - eta_{l-1}) / (a_l - a_{l-1}): coefficients
    J = []
    Jinv = []
    one = np.zeros(grid.nlat, dtype=complex)
    one[0] = 1.0
    for l in range(m):
        lower = eta_coeffs[l - 1] if l > 0 else np.zeros(grid.nlat, complex)
        Jc = one + (eta_coeffs[l] - lower) / (aa[l + 1] - aa[l])
        J.append(Jc)
        # 1/J via pointwise inversion on the padded grid
        M = (3 * grid.N) // 2
        phys = grid.pad_ifft(Jc, M)
        if np.min(np.real(phys)) <= 0:
            raise InadmissibleGeometry(f"layer {l} Jacobian nonpositive")
        Jinv.append(grid.fft_unpad(1.0 / phys))

    b = []
    for l in range(m):
        lower = (eta_coeffs[l - 1] if l > 0 else np.zeros(grid.nlat, complex))
        nodes = mesh.nodes[l]
        dl = aa[l + 1] - aa[l]
        arr = np.zeros((dim_h, grid.nlat, len(nodes)), dtype=complex)
        for dirn in range(dim_h):
            mult = 2j * np.pi * grid.xi[:, dirn]
            glo = lower * mult
            ghi = eta_coeffs[l] * mult
            w_hi = (nodes - aa[l]) / dl
            w_lo = (aa[l + 1] - nodes) / dl
            arr[dirn] = glo[:, None] * w_lo[None, :] + ghi[:, None] * w_hi[None, :]
        b.append(arr)

    N = np.zeros((m, n, grid.nlat), dtype=complex)
    for l in range(m):
        for dirn in range(dim_h):
            N[l, dirn] = -2j * np.pi * grid.xi[:, dirn] * eta_coeffs[l]
        N[l, n - 1, 0] = 1.0
    return J, {"b": b, "Jinv": Jinv}, N


def grad_flatten_det_check(a, eta_coeffs, grid, mesh, layer, x, y):
    """det(grad F) * det(A^t) at a point; equals 1 for admissible geometry."""
    aa = [0.0] + list(a)
    lo, hi = aa[layer], aa[layer + 1]
    e_lo = _eta_at(eta_coeffs, grid, layer - 1, x)
    e_hi = _eta_at(eta_coeffs, grid, layer, x)
    J = 1.0 + (e_hi - e_lo) / (hi - lo)
    return J * (1.0 / J)


def mean_curvature(eta: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """H(eta) = div( grad eta / sqrt(1 + |grad eta|^2) ), pseudo-spectral.

    eta: coefficients (nlat,). Gradient in frequency space, quotient pointwise
    on the 3/2-padded grid, divergence back in frequency space.
    """
    M = (3 * grid.N) // 2
    grads = []
    sq = None
    for dirn in range(grid.dim_h):
        g = 2j * np.pi * grid.xi[:, dirn] * eta
        gp = np.real(grid.pad_ifft(g, M))
        grads.append(gp)
        sq = gp * gp if sq is None else sq + gp * gp
    denom = np.sqrt(1.0 + sq)
    out = np.zeros(grid.nlat, dtype=complex)
    for dirn in range(grid.dim_h):
        flux = grid.fft_unpad(grads[dirn] / denom)
        out += 2j * np.pi * grid.xi[:, dirn] * flux
    return out
