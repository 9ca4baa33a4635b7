import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratawave.geometry import (InadmissibleGeometry, check_admissible,
                                 flatten_map, geometry_fields, mean_curvature,
                                 quarter_gap_margin, unflatten_map)
from stratawave.grid import LayerMesh, TorusGrid, random_interface


def small_eta(grid, seed, m=2, amp=0.05):
    rng = np.random.default_rng(seed)
    eta = random_interface(grid, rng, m, band=3)
    sup = max(np.max(np.abs(grid.ifft(eta[l]).real)) for l in range(m))
    return eta * (amp / sup)


@settings(deadline=None, max_examples=30)
@given(seed=st.integers(0, 10**6), x=st.floats(0.0, 0.999),
       t=st.floats(0.0, 1.0), layer=st.integers(0, 1))
def test_flatten_unflatten_inverse(seed, x, t, layer):
    grid = TorusGrid(n=2, L=1.0, N=16)
    a = [1.0, 2.0]
    eta = small_eta(grid, seed)
    lo = 0.0 if layer == 0 else a[layer - 1]
    y = lo + t * (a[layer] - lo)
    _, yy = flatten_map(a, eta, grid, layer, np.array([x]), y)
    _, back = unflatten_map(a, eta, grid, layer, np.array([x]), yy)
    assert abs(back - y) < 1e-10


def test_flatten_layer_bounds(grid64):
    eta = small_eta(grid64, 3)
    with pytest.raises(IndexError):
        flatten_map([1.0, 2.0], eta, grid64, 5, np.array([0.1]), 0.5)
    with pytest.raises(ValueError):
        flatten_map([1.0, 2.0], eta, grid64, 0, np.array([0.1]), 1.7)


def test_pinch_off_detected(grid64):
    eta = np.zeros((2, grid64.nlat), complex)
    eta[0, 0] = -1.0  # pushes the first interface onto the bottom
    with pytest.raises(InadmissibleGeometry, match="pinches off"):
        check_admissible([1.0, 2.0], eta, grid64)


def test_quarter_gap_margin_sign(grid64):
    eta = small_eta(grid64, 11, amp=0.05)
    assert quarter_gap_margin([1.0, 2.0], eta, grid64) > 0
    assert quarter_gap_margin([1.0, 2.0], 10 * eta, grid64) < 0


def test_geometry_fields_flat_state(grid64, cfg, mesh32):
    eta = np.zeros((2, grid64.nlat), complex)
    J, A, N = geometry_fields(list(cfg.a), eta, grid64, mesh32)
    for l in range(2):
        assert np.allclose(J[l][0], 1.0) and np.max(np.abs(J[l][1:])) == 0
        assert np.allclose(A["Jinv"][l][0], 1.0)
        assert np.max(np.abs(A["b"][l])) == 0
    assert np.allclose(N[:, 1, 0], 1.0)
    assert np.max(np.abs(N[:, 0, :])) == 0


def test_geometry_fields_jacobian_definition(grid64, cfg, mesh32):
    # J_l = 1 + (eta_l - eta_{l-1}) / (a_l - a_{l-1}) pointwise
    eta = small_eta(grid64, 5)
    J, A, _ = geometry_fields(list(cfg.a), eta, grid64, mesh32)
    e0 = grid64.ifft(eta[0]).real
    e1 = grid64.ifft(eta[1]).real
    assert np.allclose(grid64.ifft(J[0]).real, 1.0 + e0 / 1.0, atol=1e-12)
    assert np.allclose(grid64.ifft(J[1]).real, 1.0 + (e1 - e0) / 1.0, atol=1e-12)
    # Jinv is the dealiased reciprocal
    prod = grid64.dealiased_product(J[0], A["Jinv"][0])
    one = np.zeros(grid64.nlat)
    one[0] = 1.0
    assert np.max(np.abs(prod - one)) < 1e-10


def test_b_endpoint_values(grid64, cfg, mesh32):
    # at the layer top, b equals grad eta_l; at the bottom, grad eta_{l-1}
    eta = small_eta(grid64, 9)
    _, A, _ = geometry_fields(list(cfg.a), eta, grid64, mesh32)
    grad0 = 2j * np.pi * grid64.xi[:, 0] * eta[0]
    assert np.max(np.abs(A["b"][0][0, :, -1] - grad0)) < 1e-14
    assert np.max(np.abs(A["b"][1][0, :, 0] - grad0)) < 1e-14
    assert np.max(np.abs(A["b"][0][0, :, 0])) < 1e-14  # flat bottom


def test_mean_curvature_linearization(grid64):
    # H(eps eta) = eps Lap eta + O(eps^3)
    eta = np.zeros(grid64.nlat, complex)
    idx = np.where(grid64.k[:, 0] == 2)[0][0]
    eta[idx] = 0.5
    eta[grid64.conj_index[idx]] = 0.5
    lap = (2j * np.pi * grid64.xi[:, 0]) ** 2 * eta
    # cubic remainder carries a (2 pi)^4-sized constant
    for eps in (1e-2, 1e-3):
        H = mean_curvature(eps * eta, grid64)
        defect = np.max(np.abs(H - eps * lap))
        assert defect < 1e4 * eps**3


def test_mean_curvature_exact_value(grid64):
    # for eta = A cos(2 pi x): H = -4 pi^2 A cos / (1 + |grad|^2)^{3/2}
    A = 0.1
    eta_phys = A * np.cos(2 * np.pi * grid64.x)
    eta = grid64.fft(eta_phys)
    H = grid64.ifft(mean_curvature(eta, grid64)).real
    gp = -2 * np.pi * A * np.sin(2 * np.pi * grid64.x)
    want = -4 * np.pi**2 * A * np.cos(2 * np.pi * grid64.x) / (1 + gp**2) ** 1.5
    assert np.max(np.abs(H - want)) < 1e-8
