import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from girkolab.dyson import (
    build_M,
    counterterm_identity_check,
    counterterm_tail,
    counterterm_tail_batch,
    cubic,
    exact_residual,
    im_m,
    im_m_minus_reference,
    regularized_eta_integral,
    solve_m,
)
from girkolab.errors import DomainError
from girkolab.quadrature import PolarGrid
from girkolab.testfunctions import TestFunction, gauss_bump, poly_bump

GOLDEN = (math.sqrt(5) - 1) / 2


def _roots_oracle(s, eta):
    # v(eta+v)^2 + v s - (eta+v) = v^3 + 2 eta v^2 + (eta^2 + s - 1) v - eta
    r = np.roots([1.0, 2 * eta, eta * eta + s - 1.0, -eta])
    r = r[np.abs(r.imag) < 1e-9].real
    return float(r[r > 0].max())


def test_closed_forms():
    assert solve_m(0, 1.0).v == pytest.approx(GOLDEN, abs=1e-15)
    assert solve_m(0.5, 0.0).v == pytest.approx(math.sqrt(0.75), abs=1e-15)
    assert solve_m(0.5j, 0.0).v == pytest.approx(math.sqrt(0.75), abs=1e-15)
    assert solve_m(0, 0.0).v == 1.0
    sol = solve_m(0, 1.0)
    assert sol.m == 1j * sol.v
    assert sol.u == pytest.approx(0.3819660112501051, abs=1e-15)


def test_domain_errors():
    with pytest.raises(DomainError):
        solve_m(1.0, 0.0)
    with pytest.raises(DomainError):
        solve_m(0.2, -1.0)
    with pytest.raises(DomainError):
        build_M(0.95, 0.1)
    with pytest.raises(DomainError):
        build_M(0.1, 0.0)


def test_root_residual_grid():
    zs = np.linspace(0, 0.9, 50)
    etas = np.logspace(-6, 4, 50)
    worst = 0.0
    for a in zs:
        for e in etas:
            sol = solve_m(a, e)
            worst = max(worst, sol.residual)
            assert 0 < sol.u <= 1 and sol.v > 0
    assert worst <= 1e-12


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0, 3), e=st.floats(1e-5, 1e3))
def test_against_polynomial_roots(a, e):
    v = solve_m(a, e).v
    assert v == pytest.approx(_roots_oracle(a * a, e), rel=1e-9)
    assert v <= 1 / e + 1e-15


def test_im_m_vectorized_matches_scalar():
    a = np.array([0.0, 0.3, 0.8, 1.2, 2.0])
    etas = np.logspace(-5, 3, 17)
    V = im_m(a[:, None], etas[None, :])
    ref = np.array([[solve_m(x, e).v for e in etas] for x in a])
    assert np.allclose(V, ref, rtol=1e-13, atol=0)


def test_im_m_minus_reference():
    a = np.array([0.0, 0.5, 0.9])
    for eta in [1.0, 10.0, 1e3, 1e6]:
        d = im_m_minus_reference(a, eta)
        ref = [solve_m(x, eta).v - 1 / (1 + eta) for x in a]
        assert np.allclose(d, ref, rtol=1e-6, atol=1e-15 / eta)
    with pytest.raises(DomainError):
        im_m_minus_reference(a, 0.5)


def test_mass_normalization():
    for a in [0.0, 0.4, 0.9]:
        etas = np.logspace(-4, 4, 60)
        ev = np.array([e * solve_m(a, e).v for e in etas])
        assert np.all(np.diff(ev) > 0)
        assert abs(ev[-1] - 1) <= 1e-7


def test_u_is_one_at_zero():
    for a in [0.0, 0.3, 0.7]:
        assert solve_m(a, 0.0).u == 1.0


def test_lipschitz():
    zs = np.linspace(0, 0.9, 30)
    etas = np.linspace(1e-3, 5, 30)
    V = np.array([[solve_m(a, e).v for e in etas] for a in zs])
    dz = np.abs(np.diff(V, axis=0)) / np.diff(zs)[:, None]
    de = np.abs(np.diff(V, axis=1)) / np.diff(etas)[None, :]
    # recorded constants on this grid
    assert dz.max() < 3.0
    assert de.max() < 2.0


@pytest.mark.parametrize("a", [0.0, 0.25, 0.5, 0.75])
def test_eta_to_zero_extrapolation(a):
    # Richardson on eta -> 0 (v is smooth in eta at |z| < 1)
    h = 1e-5
    v1, v2 = solve_m(a, h).v, solve_m(a, h / 2).v
    extrap = 2 * v2 - v1
    assert abs(extrap - math.sqrt(1 - a * a)) <= 1e-6


def test_cubic_residual_exact():
    assert cubic(GOLDEN, 0.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert exact_residual(GOLDEN, 0.0, 1.0) <= 1e-15


def test_build_M():
    M = build_M(0, 0.7)
    v = solve_m(0, 0.7).v
    assert np.allclose(M.matrix, 1j * v * np.eye(2))
    assert M.norm == pytest.approx(v)
    for eta in np.logspace(-3, 1, 30):
        D = build_M(0.5 * np.exp(0.3j), eta)
        assert D.norm == pytest.approx(np.linalg.norm(D.matrix, 2), rel=1e-13)
        assert D.norm <= 2


def test_counterterm_tail():
    v0, err = counterterm_tail(0, 1e3, full_output=True)
    assert abs(v0) <= 2e-3 and err < 1e-10
    assert abs(counterterm_tail(0.3, 1e3) - v0) <= 4e-3
    assert abs(counterterm_tail(0, 1e12)) <= 1e-11
    # leading order 1/T - (2+s)/(2T^2)
    assert v0 == pytest.approx(1e-3 - 1e-6, rel=1e-6)
    with pytest.raises(DomainError):
        counterterm_tail(0, 5.0)


def test_counterterm_tail_batch():
    a = np.array([0.0, 0.3, 0.9, 1.5])
    for T in [10.0, 1e4]:
        ref = [counterterm_tail(x, T) for x in a]
        assert np.allclose(counterterm_tail_batch(a, T), ref, rtol=1e-11, atol=1e-16)


def test_regularized_integral_split_point():
    # changing K shifts the value by the z-independent log((1+K')/(1+K))
    shift = math.log(51.0 / 11.0)
    for a in [0.0, 0.6, 1.3]:
        assert regularized_eta_integral(a, 50.0) - regularized_eta_integral(a, 10.0) == pytest.approx(shift, abs=1e-9)


def test_large_eta_residual_floor():
    sol = solve_m(0.0, 1e6)
    assert sol.v == pytest.approx(_roots_oracle(0.0, 1e6), rel=1e-12)


def test_counterterm_identity_zero():
    assert counterterm_identity_check(TestFunction.zero(), 0.0, 100) == (0.0, 0.0)


def test_counterterm_identity_gauss_bump():
    lhs, rhs = counterterm_identity_check(gauss_bump(), 0.3, 100, zgrid=PolarGrid(31, 32))
    assert abs(lhs - rhs) <= 1e-4 * abs(lhs)


def test_counterterm_identity_outside():
    lhs, rhs = counterterm_identity_check(poly_bump(), 3.0, 100, zgrid=PolarGrid(15, 16))
    assert lhs == 0.0
    assert abs(rhs) <= 1e-6


def test_counterterm_identity_edge_warns():
    with pytest.warns(RuntimeWarning):
        counterterm_identity_check(poly_bump(), 1.0, 10000, zgrid=PolarGrid(7, 8))
