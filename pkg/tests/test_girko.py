import json
import math

import numpy as np
import pytest

from girkolab.ensembles import RandomMatrix, sample_matrix
from girkolab.errors import AccuracyError, ConfigurationError, DomainError
from girkolab.girko import (
    RegimeDecomposition,
    Scales,
    compute_I_eps,
    decompose,
    error_term,
    girko_logdet,
    linear_statistic,
)
from girkolab.hermitization import complex_spectrum, log_abs_det_batch
from girkolab.quadrature import EtaGrid, PolarGrid
from girkolab.testfunctions import TestFunction, gauss_bump, poly_bump, rescale

FAST = PolarGrid(31, 32)


@pytest.fixture(scope="module")
def sample50():
    return sample_matrix(50, "gaussian-complex", 0, 0)


def test_scales():
    s = Scales(100, 0.2)
    assert s.eta0 < 1 / 100 < s.eta1 < s.T
    assert s.T == 1e6 and s.T_numeric == 1e6
    sym = Scales(50, 0.2, symbolic_T=True)
    assert sym.T == 50.0**100 and sym.T_numeric == 50.0**3
    assert sym.to_dict()["T_symbolic"] == "n^100"
    with pytest.raises(DomainError):
        Scales(50, 1.0)
    with pytest.raises(DomainError):
        Scales(1, 0.2)
    with pytest.raises(DomainError):
        Scales(10**4, 0.1, symbolic_T=True)


def test_linear_statistic_far_support():
    sig = np.array([0.1, -0.2j, 0.3 + 0.3j])
    g = rescale(poly_bump(), 3.0, 100)
    assert linear_statistic(sig, g) == 0.0


def test_linear_statistic_single_point():
    z0 = 0.4 - 0.2j
    g = rescale(poly_bump(), z0, 1)
    # n = 1: support radius 1 straddles the unit circle
    val = linear_statistic(np.array([z0]), g)
    assert val == pytest.approx(1.0 - g.disk_integral() / math.pi, abs=1e-14)
    assert 0 < g.disk_integral() < math.pi / 4


def test_linear_statistic_zero_matrix():
    n = 30
    X = RandomMatrix.from_array(np.zeros((n, n)))
    g = rescale(poly_bump(), 0, n)
    # every sigma_i = 0, so (1/n) sum g_{z0}(sigma_i) = g_{z0}(0) = n; the disk integral is pi/4
    assert linear_statistic(complex_spectrum(X), g) == pytest.approx(n - 0.25, abs=1e-12)


def test_girko_identity_n20():
    X = sample_matrix(20, "gaussian-complex", 5, 0)
    g = rescale(poly_bump(), 0.1 + 0.2j, 20)
    res = girko_logdet(X, g, full_output=True)
    exact = float(np.sum(g(complex_spectrum(X).sigmas)))
    assert abs(res.value - exact) <= 1e-3 * (1 + abs(exact))
    assert res.degenerate_points == 0


def test_girko_zero():
    X = sample_matrix(10, "gaussian-real", 1)
    assert girko_logdet(X, rescale(TestFunction.zero(), 0, 10)) == 0.0


def test_girko_diagonal():
    d = np.array([0.3, -0.2 + 0.1j, 0.05j, 0.9])
    X = RandomMatrix.from_array(np.diag(d))
    zs = np.array([0.1, 0.2 - 0.3j, -0.5j])
    vals, _ = log_abs_det_batch(X, zs)
    ref = [np.sum(2 * np.log(np.abs(d - z))) for z in zs]
    assert np.allclose(vals, ref, atol=1e-13)
    g = rescale(gauss_bump(), 0.1, 4)
    exact = float(np.sum(g(d)))
    got = girko_logdet(X, g, PolarGrid(127, 256), method="svd")
    assert got == pytest.approx(exact, abs=1e-3 * (1 + abs(exact)))


def test_girko_degenerate_point():
    # an eigenvalue sitting exactly on a grid node
    g = rescale(poly_bump(), 0.0, 4)
    grid = PolarGrid(31, 32)
    node = grid.nodes(g).z[5 * 32 + 3]
    X = RandomMatrix.from_array(np.diag([node, 0.7, -0.6, 0.2j]))
    res = girko_logdet(X, g, grid, full_output=True)
    assert res.degenerate_points >= 1
    exact = float(np.sum(g(np.diag(X.entries))))
    assert abs(res.value - exact) <= res.error_estimate


def test_resolution_precondition():
    X = sample_matrix(20, "gaussian-complex", 5, 0)
    g = rescale(poly_bump(), 0, 20)
    with pytest.raises(ConfigurationError):
        girko_logdet(X, g, PolarGrid(15, 16))
    with pytest.raises(ConfigurationError):
        decompose(X, g, Scales(20, 0.2), PolarGrid(15, 16))


def test_decompose_sum_identity(sample50):
    g = rescale(poly_bump(), 0.2 + 0.1j, 50)
    d = decompose(sample50, g, Scales(50, 0.2), PolarGrid(63, 128))
    assert abs(d.defect) <= d.quad_error
    assert d.quad_error <= 1e-2 * abs(d.lhs_direct) + 1e-6
    e, alt, diff = error_term(d, full_output=True)
    assert abs(diff) <= d.quad_error
    assert e == d.lhs_direct - d.I_eta0_eta1


def test_decompose_json_keys(sample50):
    g = rescale(poly_bump(), 0, 50)
    d = decompose(sample50, g, Scales(50, 0.2), FAST, check=False)
    rec = d.to_json()
    assert list(rec) == ["J_T", "I_0_eta0", "I_eta0_eta1", "I_eta1_T", "I_T_inf", "lhs_direct", "quad_error",
                         "scales", "seed"]
    json.dumps(rec)
    assert rec["seed"] == 0


def test_decompose_zero(sample50):
    d = decompose(sample50, rescale(TestFunction.zero(), 0, 50), Scales(50, 0.2))
    assert (d.J_T, d.I_0_eta0, d.I_eta0_eta1, d.I_eta1_T, d.I_T_inf, d.lhs_direct) == (0.0,) * 6
    assert error_term(d) == 0.0


def test_decompose_refinement(sample50):
    g = rescale(poly_bump(), 0.2 + 0.1j, 50)
    s = Scales(50, 0.2)
    coarse = decompose(sample50, g, s, FAST, EtaGrid(40), check=False)
    fine = decompose(sample50, g, s, FAST.refined(), EtaGrid(40).refined(), check=False)
    assert abs(fine.defect) <= 0.5 * abs(coarse.defect)
    # the [eta1, T] trapezoid is converged at the default density
    assert abs(fine.I_eta1_T - coarse.I_eta1_T) <= 1e-3 * abs(coarse.I_eta1_T)


def test_decompose_accuracy_failure(sample50):
    g = rescale(poly_bump(), 0.2 + 0.1j, 50)
    with pytest.raises(AccuracyError) as info:
        decompose(sample50, g, Scales(50, 0.2), FAST)
    d = info.value.diagnostics["decomposition"]
    assert isinstance(d, RegimeDecomposition)
    assert d.quad_error > 1e-2 * abs(d.lhs_direct) + 1e-6


def test_decompose_symbolic_T(sample50):
    g = rescale(poly_bump(), 0, 50)
    d = decompose(sample50, g, Scales(50, 0.2, symbolic_T=True), FAST, check=False)
    assert abs(d.defect) <= d.quad_error
    assert d.metadata["error_parts"]["truncation"] > 0
    assert abs(d.J_T) < 1e-10 and abs(d.I_T_inf) < 1e-10


def test_decompose_n_mismatch(sample50):
    with pytest.raises(ConfigurationError):
        decompose(sample50, rescale(poly_bump(), 0, 40), Scales(50, 0.2))


def test_compute_I_eps_bitwise(sample50):
    g = rescale(gauss_bump(), -0.3j, 50)
    s = Scales(50, 0.15)
    d = decompose(sample50, g, s, FAST, check=False)
    assert compute_I_eps(sample50, g, s, FAST) == d.I_eta0_eta1


def test_compute_I_eps_empty_window(sample50):
    g = rescale(poly_bump(), 0, 50)
    assert compute_I_eps(sample50, g, Scales(50, 0.0), FAST) == 0.0


def test_ordered_reduction_reproducible(sample50):
    g = rescale(poly_bump(), 0.1, 50)
    s = Scales(50, 0.2)
    a = decompose(sample50, g, s, FAST, check=False).to_json()
    b = decompose(sample_matrix(50, "gaussian-complex", 0, 0), g, s, FAST, check=False).to_json()
    assert json.dumps(a) == json.dumps(b)
