import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from girkolab.ensembles import RandomMatrix, sample_matrix
from girkolab.errors import DomainError
from girkolab.hermitization import (
    SpectralData,
    complex_spectrum,
    hermitize,
    log_abs_det_batch,
    log_abs_det_shifted,
    resolvent_avg,
    resolvent_avg_im,
    resolvent_bilinear,
    singular_values,
    singular_values_batch,
    trace_log_identity,
)


def test_hermitize_1x1():
    a, z = 0.3 + 0.4j, -0.2 + 0.1j
    H = hermitize(RandomMatrix.from_array([[a]]), z).matrix()
    ev = np.linalg.eigvalsh(H)
    assert np.allclose(ev, [-abs(a - z), abs(a - z)], atol=1e-15)


def test_hermitize_structure():
    X = sample_matrix(5, "gaussian-complex", 1)
    z = 0.2 - 0.1j
    H = hermitize(X, z).matrix()
    n = 5
    assert np.array_equal(H, H.conj().T)
    assert np.all(H[:n, :n] == 0) and np.all(H[n:, n:] == 0)
    B = X.entries - z * np.eye(n)
    H2 = H @ H
    assert np.allclose(H2[:n, :n], B @ B.conj().T, atol=1e-14)
    assert np.allclose(H2[n:, n:], B.conj().T @ B, atol=1e-14)


def test_unitary_at_zero():
    Q, _ = np.linalg.qr(sample_matrix(6, "gaussian-complex", 2).entries)
    X = RandomMatrix.from_array(Q)
    assert np.allclose(singular_values(X, 0).lambdas, 1.0, atol=1e-13)
    ev = np.linalg.eigvalsh(hermitize(X, 0).matrix())
    assert np.allclose(ev, np.r_[-np.ones(6), np.ones(6)], atol=1e-13)


def test_eig_vs_svd_n6():
    X = sample_matrix(6, "gaussian-real", 3)
    spec = singular_values(X, 0.4j)
    ev = np.linalg.eigvalsh(hermitize(X, 0.4j).matrix())
    assert np.max(np.abs(ev - spec.hermitized_eigenvalues())) <= 1e-10


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 10**9), zr=st.floats(-1.5, 1.5), zi=st.floats(-1.5, 1.5))
def test_pm_pairing(n, seed, zr, zi):
    X = sample_matrix(n, "gaussian-complex", seed)
    z = complex(zr, zi)
    spec = singular_values(X, z)
    assert spec.lambdas[0] >= 0 and np.all(np.diff(spec.lambdas) >= 0)
    ev = np.linalg.eigvalsh(hermitize(X, z).matrix())
    assert np.max(np.abs(ev - spec.hermitized_eigenvalues())) <= 1e-9


def test_singular_values_diag():
    X = RandomMatrix.from_array(np.diag([1.0, 2.0]))
    assert np.allclose(singular_values(X, 0).lambdas, [1, 2], atol=1e-15)
    assert np.allclose(singular_values(X, 1).lambdas, [0, 1], atol=1e-15)


def test_singular_values_gram_oracle():
    X = sample_matrix(4, "gaussian-complex", 4)
    z = 0.3 + 0.1j
    B = X.entries - z * np.eye(4)
    ref = np.sqrt(np.sort(np.linalg.eigvalsh(B.conj().T @ B)))
    assert np.allclose(singular_values(X, z).lambdas, ref, atol=1e-10)


def test_singular_values_batch_matches():
    X = sample_matrix(7, "gaussian-real", 5)
    zs = [0, 0.5j, -0.3 + 0.2j]
    S = singular_values_batch(X, zs)
    for k, z in enumerate(zs):
        assert np.allclose(S[k], singular_values(X, z).lambdas, atol=1e-12)


def test_complex_spectrum_triangular():
    T = np.triu(sample_matrix(5, "gaussian-complex", 6).entries)
    sig = complex_spectrum(RandomMatrix.from_array(T)).sigmas
    assert np.allclose(np.sort_complex(sig), np.sort_complex(np.diag(T)), atol=1e-12)


def test_complex_spectrum_companion():
    # roots of w^2 + 1 scaled by 1/2: companion of w^2 + 1/4
    C = np.array([[0.0, -0.25], [1.0, 0.0]])
    sig = np.sort_complex(complex_spectrum(RandomMatrix.from_array(C)).sigmas)
    assert np.allclose(sig, [-0.5j, 0.5j], atol=1e-10)


@pytest.mark.parametrize("n", [3, 5, 8])
def test_complex_spectrum_charpoly(n):
    X = sample_matrix(n, "gaussian-complex", n)
    norm = np.linalg.norm(X.entries, 2)
    for s in complex_spectrum(X).sigmas:
        assert abs(np.linalg.det(X.entries - s * np.eye(n))) <= 1e-8 * norm**n


def test_resolvent_avg_im_examples():
    assert resolvent_avg_im(SpectralData.from_lambdas([1, 2]), 1.0) == pytest.approx(0.35, abs=1e-15)
    assert resolvent_avg_im(SpectralData.from_lambdas([0.0]), 1.0) == 1.0
    spec = singular_values(sample_matrix(5, "gaussian-complex", 7), 0.2)
    eta = 1e6
    assert abs(eta * resolvent_avg_im(spec, eta) - 1) <= 1e-6 * spec.lambdas.max() ** 2
    with pytest.raises(DomainError):
        resolvent_avg_im(spec, 0.0)


def test_resolvent_avg_im_matches_full_trace():
    X = sample_matrix(6, "gaussian-complex", 8)
    z, eta = 0.1 + 0.2j, 0.05
    H = hermitize(X, z).matrix()
    G = np.linalg.inv(H - 1j * eta * np.eye(12))
    assert resolvent_avg(singular_values(X, z), eta) == pytest.approx(np.trace(G) / 12, abs=1e-12)


def test_resolvent_avg_im_vectorized():
    spec = singular_values(sample_matrix(6, "gaussian-complex", 8), 0.0)
    etas = np.array([0.01, 0.1, 1.0])
    v = resolvent_avg_im(spec, etas)
    assert np.allclose(v, [resolvent_avg_im(spec, e) for e in etas], rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(lam=st.lists(st.floats(0, 10), min_size=1, max_size=6), eta=st.floats(1e-6, 1e6))
def test_resolvent_positive(lam, eta):
    assert resolvent_avg_im(SpectralData.from_lambdas(lam), eta) > 0


def test_bilinear_1x1():
    a, z, eta = 0.7 - 0.2j, 0.1j, 0.3
    X = RandomMatrix.from_array([[a]])
    e1 = np.array([1.0, 0.0])
    val = resolvent_bilinear(X, z, eta, e1, e1)
    assert val == pytest.approx(1j * eta / (abs(a - z) ** 2 + eta**2), abs=1e-15)


def test_bilinear_positivity_and_eig_oracle():
    n = 6
    X = sample_matrix(n, "gaussian-complex", 9)
    z, eta = 0.2, 0.01
    rng = np.random.default_rng(0)
    x = rng.normal(size=2 * n) + 1j * rng.normal(size=2 * n)
    x /= np.linalg.norm(x)
    assert resolvent_bilinear(X, z, eta, x, x).imag > 0
    y = rng.normal(size=2 * n) + 1j * rng.normal(size=2 * n)
    y -= np.vdot(x, y) * x
    ev, U = np.linalg.eigh(hermitize(X, z).matrix())
    ref = np.sum((U.conj().T @ x).conj() * (U.conj().T @ y) / (ev - 1j * eta))
    assert abs(resolvent_bilinear(X, z, eta, x, y) - ref) <= 1e-9


def test_bilinear_average_matches_trace():
    n = 5
    X = sample_matrix(n, "gaussian-real", 10)
    z, eta = 0.3 - 0.3j, 0.2
    I = np.eye(2 * n)
    tot = sum(resolvent_bilinear(X, z, eta, I[k], I[k]) for k in range(2 * n))
    assert abs(tot - 2 * n * resolvent_avg(singular_values(X, z), eta)) <= 1e-9


def test_bilinear_bad_length():
    X = sample_matrix(3, "gaussian-real", 0)
    with pytest.raises(DomainError):
        resolvent_bilinear(X, 0, 1.0, np.ones(3), np.ones(6))


def test_log_abs_det_shifted():
    assert log_abs_det_shifted(SpectralData.from_lambdas([3.0]), 4.0) == pytest.approx(math.log(25), abs=1e-15)
    assert log_abs_det_shifted(SpectralData.from_lambdas([0, 0, 0]), 7.0) == pytest.approx(6 * math.log(7))
    big = log_abs_det_shifted(SpectralData.from_lambdas([1, 2]), 1e150)
    assert math.isfinite(big)
    assert big == pytest.approx(4 * 150 * math.log(10), rel=1e-15)
    assert big == pytest.approx(1381.5510557964274, abs=1e-10)
    rel = log_abs_det_shifted(SpectralData.from_lambdas([1, 2]), 1e150, relative=True)
    assert rel == pytest.approx(5e-300, rel=1e-12)


def test_log_abs_det_shifted_vs_direct():
    X = sample_matrix(5, "gaussian-complex", 11)
    z, T = 0.4, 3.0
    H = hermitize(X, z).matrix()
    direct = np.linalg.slogdet(H - 1j * T * np.eye(10))[1]
    assert log_abs_det_shifted(singular_values(X, z), T) == pytest.approx(direct, abs=1e-12)


def test_trace_log_examples():
    r = trace_log_identity(SpectralData.from_lambdas([1.0]), 1.0)
    assert r.closed_form == pytest.approx(math.log(2), abs=1e-15)
    assert abs(r.quadrature - math.log(2)) <= 1e-8
    r2 = trace_log_identity(SpectralData.from_lambdas([1.0, 2.0]), 1.0)
    assert r2.closed_form == pytest.approx(0.9162907318741551, abs=1e-12)
    small = trace_log_identity(SpectralData.from_lambdas([1.0, 2.0]), 1e-9)
    assert small.closed_form < 1e-17 and small.quadrature < 1e-17
    with pytest.raises(DomainError):
        trace_log_identity(SpectralData.from_lambdas([1.0]), 0.0)


def test_trace_log_degenerate():
    r = trace_log_identity(SpectralData.from_lambdas([0.0, 1.0]), 1.0)
    assert r.degenerate
    assert math.isfinite(r.closed_form)
    # a zero mode contributes 2 log(E / 1e-300) to both sides
    assert r.closed_form == pytest.approx(2 * 300 * math.log(10) + math.log(2))


def test_trace_log_random_pairs():
    rng = np.random.default_rng(12)
    for _ in range(100):
        lam = rng.exponential(size=rng.integers(1, 8))
        E = float(10 ** rng.uniform(-3, 2))
        r = trace_log_identity(SpectralData.from_lambdas(lam), E)
        assert abs(r.closed_form - r.quadrature) <= 1e-6 * (1 + abs(r.closed_form))


@pytest.mark.parametrize("method", ["hessenberg", "svd"])
def test_log_abs_det_batch(method):
    X = sample_matrix(9, "gaussian-complex", 13)
    zs = np.array([0, 0.3 + 0.2j, -0.5j, 1.2])
    vals, piv = log_abs_det_batch(X, zs, method=method)
    ref = [2 * np.linalg.slogdet(X.entries - z * np.eye(9))[1] for z in zs]
    assert np.allclose(vals, ref, atol=1e-11)
    assert np.all(piv > 0)


def test_log_abs_det_batch_singular():
    X = RandomMatrix.from_array(np.diag([0.5, 1.0, 2.0]))
    vals, piv = log_abs_det_batch(X, [0.5])
    assert piv[0] == 0 or piv[0] < 1e-14
    with pytest.raises(DomainError):
        log_abs_det_batch(X, [0.0], method="qr")
