import math

import numpy as np
import pytest

from stratawave.config import PhysicalConfig, reference_config
from stratawave.symbols import (LatticeSymbolTable, SymbolCalculator, o_matrix,
                                curly_weight, verify_asymptotics)
from stratawave.vertical_bvp import oracle_single_layer


@pytest.fixture(scope="module")
def calc(cfg):
    return SymbolCalculator(cfg)


def test_o_matrix_reference(cfg):
    # [[rho]]_0 = rho_2 - rho_1 = -1, [[rho]]_1 = -rho_2 = -1
    o0 = o_matrix(cfg, np.zeros(1))
    assert np.allclose(np.diag(o0), [1.0, 1.0])
    o1 = o_matrix(cfg, np.array([2.0]))
    k2 = 4 * math.pi**2 * 4.0
    assert np.allclose(np.diag(o1), [1.0 + 0.5 * k2, 1.0 + 0.5 * k2])


def test_n_conjugate_symmetry(calc):
    xi = np.array([1.7])
    assert np.allclose(calc.n_matrix(-xi), np.conj(calc.n_matrix(xi)),
                       atol=1e-13)


def test_p_at_zero_vanishes(calc):
    assert np.max(np.abs(calc.p_matrix(np.zeros(1)))) == 0.0


def test_adjoint_identity_sample(calc):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(10):
        xi = np.array([rng.uniform(0.05, 50.0) * rng.choice([-1, 1])])
        nm = calc.n_matrix(xi, +1)
        worst = max(worst, np.linalg.norm(nm.conj().T - calc.n_matrix(xi, -1))
                    / np.linalg.norm(nm))
    assert worst < 1e-10


def test_single_layer_against_oracle():
    cfg = PhysicalConfig(m=1, a=(1.0,), rho=(1.0,), mu=(1.0,), sigma=(0.5,),
                         gamma=1.0, n=2)
    calc = SymbolCalculator(cfg)
    for xi in (0.3, 1.5, -7.0):
        tr, _ = oracle_single_layer(1.0, 1.0, 1.0, 1.0, xi, sign=+1)
        assert abs(calc.n_matrix(np.array([xi]))[0, 0] - tr) < 1e-11


def test_asymptotic_slopes(cfg):
    rep = verify_asymptotics(cfg)
    assert abs(rep["slope_low"] - 2.0) <= 0.1
    assert abs(rep["slope_high"] + 1.0) <= 0.1
    assert rep["coercivity_min"] > 0.0
    assert rep["adjoint_defect"] <= 1e-8
    assert np.isfinite(rep["inverse_bound_sup"])


def test_sweep_window_guard(cfg):
    with pytest.raises(ValueError, match="slope-fit windows"):
        verify_asymptotics(cfg, lo=0.5, hi=2.0, npts=5)


def test_tail_scaling_beyond_trusted_range(calc):
    from stratawave.symbols import TRUSTED_XI_MAX
    xi_in = np.array([TRUSTED_XI_MAX])
    xi_out = np.array([2.0 * TRUSTED_XI_MAX])
    n_in = calc.n_matrix(xi_in)
    n_out = calc.n_matrix(xi_out)
    assert np.allclose(n_out, 0.5 * n_in, atol=1e-14)


def test_curly_weight():
    assert curly_weight(np.array([0.5])) == pytest.approx(0.25 + 0.5**4)
    assert curly_weight(np.array([3.0])) == pytest.approx(9.0)


def test_lattice_table_matches_calculator(cfg, grid64, mesh32):
    table = LatticeSymbolTable(cfg, grid64, mesh32)
    idx = 5
    direct = table.calc.n_matrix(grid64.xi[idx])
    assert np.allclose(table.n_at(idx), direct, atol=1e-14)
    ci = int(grid64.conj_index[idx])
    assert np.allclose(table.n_at(ci), np.conj(direct), atol=1e-14)


def test_apply_p_inverse_round_trip(cfg, grid64, mesh32):
    table = LatticeSymbolTable(cfg, grid64, mesh32)
    rng = np.random.default_rng(2)
    eta = rng.standard_normal((2, grid64.nlat)) \
        + 1j * rng.standard_normal((2, grid64.nlat))
    eta[:, 0] = 0.0
    phi = np.zeros_like(eta)
    for idx in range(1, grid64.nlat):
        phi[:, idx] = table.p_at(idx) @ eta[:, idx]
    back = table.apply_p_inverse(phi)
    assert np.max(np.abs(back - eta)) < 1e-8 * np.max(np.abs(eta))
