import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratawave.grid import (LayerMesh, SpectralField, TorusGrid, bary_matrix,
                             cheb_diff, cheb_nodes, cheb_weights, multiplier,
                             norm_interface, random_field, random_interface)


def test_fft_round_trip(grid64, rng):
    vals = rng.standard_normal(grid64.shape)
    back = grid64.ifft(grid64.fft(vals))
    assert np.max(np.abs(back.real - vals)) < 1e-13
    assert np.max(np.abs(back.imag)) < 1e-13


@settings(deadline=None, max_examples=25)
@given(seed=st.integers(0, 2**31))
def test_fft_round_trip_property(seed):
    grid = TorusGrid(n=2, L=1.0, N=16)
    vals = np.random.default_rng(seed).standard_normal(grid.shape)
    assert np.allclose(grid.ifft(grid.fft(vals)).real, vals, atol=1e-13)


def test_plancherel(grid64, rng):
    vals = rng.standard_normal(grid64.shape)
    c = grid64.fft(vals)
    lhs = grid64.L ** grid64.dim_h * np.mean(vals**2)
    rhs = grid64.L ** grid64.dim_h * np.sum(np.abs(c) ** 2)
    assert abs(lhs - rhs) < 1e-12 * abs(lhs)


def test_derivative_of_plane_wave(grid64):
    # f = cos(2 pi 3 x) -> f' coefficients are 2 pi i xi f
    f = np.cos(2 * np.pi * 3 * grid64.x)
    c = grid64.fft(f)
    dc = 2j * np.pi * grid64.xi[:, 0] * c
    expect = -2 * np.pi * 3 * np.sin(2 * np.pi * 3 * grid64.x)
    assert np.max(np.abs(grid64.ifft(dc).real - expect)) < 1e-10


def test_dealiased_product_is_exact_for_resolved_modes(grid64, rng):
    # product of band-8 fields has band 16 < N/2, so dealiasing must be exact
    def band_limited():
        c = rng.standard_normal(grid64.nlat) + 1j * rng.standard_normal(grid64.nlat)
        c[grid64.xi_norm > 8] = 0.0
        c[grid64.nyquist_mask] = 0.0
        return 0.5 * (c + np.conj(c[grid64.conj_index]))

    a, b = band_limited(), band_limited()
    got = grid64.dealiased_product(a, b)
    want = grid64.fft(grid64.ifft(a).real * grid64.ifft(b).real)
    assert np.max(np.abs(got - want)) < 1e-13


def test_cheb_differentiation_exact_on_polynomials():
    d = 12
    x = cheb_nodes(d, 0.5, 2.0)
    D = cheb_diff(d, 0.5, 2.0)
    p = x**7 - 3 * x**3 + x
    dp = 7 * x**6 - 9 * x**2 + 1
    assert np.max(np.abs(D @ p - dp)) < 1e-10


def test_cheb_weights_integrate_polynomials():
    d = 16
    x = cheb_nodes(d, 0.0, 1.0)
    w = cheb_weights(d, 0.0, 1.0)
    assert abs(w @ x**9 - 0.1) < 1e-13


def test_bary_interpolation():
    src = cheb_nodes(10, 0.0, 1.0)
    dst = np.linspace(0.05, 0.95, 7)
    M = bary_matrix(src, dst)
    assert np.max(np.abs(M @ src**6 - dst**6)) < 1e-12


def test_mesh_pair_is_exact(cfg):
    mesh = LayerMesh(cfg.a, [12, 12])
    f = mesh.nodes[0] ** 5
    g = mesh.nodes[0] ** 4 + 1j * mesh.nodes[0]
    # int_0^1 x^5 conj(x^4 + i x) = int x^9 - i int x^6
    want = 0.1 - 1j / 7.0
    assert abs(mesh.pair(0, f, g) - want) < 1e-13


def test_norm_interface_weights(grid64):
    c = np.zeros(grid64.nlat, complex)
    idx = np.where(grid64.k[:, 0] == 4)[0][0]
    c[idx] = 1.0
    assert np.isclose(norm_interface(c, grid64, "Hs", s=1.0), 4.0)
    assert np.isclose(norm_interface(c, grid64, "Hdot-1"), 1.0 / 4.0)


def test_homogeneous_seminorm_rejects_zero_mode(grid64):
    c = np.zeros(grid64.nlat, complex)
    c[0] = 1.0
    with pytest.raises(ValueError, match="zero mode obstructs"):
        norm_interface(c, grid64, "Hdot-1")


def test_multiplier_reality_guard(grid64, rng):
    c = random_interface(grid64, rng, m=1, band=4)[0]
    multiplier(lambda xi: np.linalg.norm(xi), c, grid64, real_flag=True)
    with pytest.raises(ValueError, match="reality symmetry"):
        multiplier(lambda xi: 1j * np.linalg.norm(xi), c, grid64,
                   real_flag=True)


def test_spectral_field_trace_and_dy(cfg, grid64, rng):
    mesh = LayerMesh(cfg.a, [16, 16])
    fld = random_field(grid64, mesh, rng, ncomp=1, band=3)
    top = fld.trace(mesh.a[1])
    assert top.shape == (1, grid64.nlat)
    assert np.allclose(top[0], fld.data[0][0, :, -1])
    dv = fld.dy()
    # derivative of the vertical polynomial, spot check at a point
    x = np.array([0.3])
    y = 0.7
    h = 1e-6
    num = (fld.evaluate(x, y + h) - fld.evaluate(x, y - h)) / (2 * h)
    assert np.max(np.abs(dv.evaluate(x, y) - num)) < 1e-6


def test_random_field_is_real(grid64, cfg, rng):
    mesh = LayerMesh(cfg.a, [12, 12])
    fld = random_field(grid64, mesh, rng, ncomp=2, band=4)
    for block in fld.data:
        assert grid64.is_real(block.transpose(0, 2, 1))
