import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from girkolab.ensembles import (
    KINDS,
    RandomMatrix,
    draw_chi,
    get_distribution,
    sample_entry,
    sample_matrix,
    validate_distribution,
)
from girkolab.errors import ConfigurationError, DomainError


@pytest.mark.parametrize("kind", KINDS)
def test_declared_moments(kind):
    d = get_distribution(kind)
    assert d.claimed_mean == 0 and d.claimed_abs2 == 1
    if d.is_complex:
        assert d.claimed_square == 0
    assert sorted(d.moment_bounds) == list(range(1, 9))
    assert all(0 < c < math.inf for c in d.moment_bounds.values())


def test_moment_bounds_closed_forms():
    # E|chi|^4 for the Gaussians and the uniform disk of radius sqrt(2)
    assert get_distribution("gaussian-real").moment_bounds[4] == pytest.approx(3.0)
    assert get_distribution("gaussian-complex").moment_bounds[4] == pytest.approx(2.0)
    assert get_distribution("uniform-complex").moment_bounds[4] == pytest.approx(4.0 / 3.0)
    assert get_distribution("uniform-complex").moment_bounds[2] == pytest.approx(1.0)


def test_rademacher_n1():
    for idx in range(8):
        X = sample_matrix(1, "rademacher-real", 5, idx)
        assert X.entries.shape == (1, 1)
        assert X.entries[0, 0] in (1.0, -1.0)


def test_determinism_bytes():
    a = sample_matrix(2, "gaussian-complex", 11, 0)
    b = sample_matrix(2, "gaussian-complex", 11, 0)
    assert a.entries.tobytes() == b.entries.tobytes()
    c = sample_matrix(2, "gaussian-complex", 11, 1)
    assert a.entries.tobytes() != c.entries.tobytes()


def test_variance_n500():
    n = 500
    X = sample_matrix(n, "gaussian-complex", 3, 0)
    m = float(np.mean(np.abs(X.entries) ** 2))
    band = 5 * (2 * n * n) ** -0.5 * 3
    assert abs(m * n - 1) <= band


@pytest.mark.parametrize("kind", ["gaussian-real", "rademacher-real"])
def test_real_field_closure(kind):
    X = sample_matrix(7, kind, 1, 2)
    assert not np.iscomplexobj(X.entries) or np.all(X.entries.imag == 0)


def test_two_point_values():
    chi = draw_chi("two-point-complex", 1000, 4)
    s = math.sqrt(0.5)
    assert np.all(np.isin(np.round(chi.real / s), [-1, 1]))
    assert np.all(np.isin(np.round(chi.imag / s), [-1, 1]))
    assert np.allclose(np.abs(chi), 1.0)


def test_uniform_disk_radius():
    chi = draw_chi("uniform-complex", 5000, 4)
    assert np.max(np.abs(chi)) <= math.sqrt(2.0)


def test_entries_read_only():
    X = sample_matrix(3, "gaussian-real", 0)
    with pytest.raises(ValueError):
        X.entries[0, 0] = 1.0


def test_errors():
    with pytest.raises(ConfigurationError):
        sample_matrix(3, "cauchy", 0)
    with pytest.raises(DomainError):
        sample_matrix(0, "gaussian-real", 0)
    with pytest.raises(DomainError):
        sample_matrix(2, "gaussian-real", -1)
    with pytest.raises(DomainError):
        validate_distribution("gaussian-real", 999, 0)


def test_from_array():
    X = RandomMatrix.from_array([[1, 2], [3, 4]])
    assert X.n == 2 and X.entries.dtype == float
    with pytest.raises(DomainError):
        RandomMatrix.from_array([[1, 2, 3]])


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 9), seed=st.integers(0, 2**64 - 1), idx=st.integers(0, 10**6),
       kind=st.sampled_from(KINDS), data=st.data())
def test_entry_regeneration(n, seed, idx, kind, data):
    a = data.draw(st.integers(0, n - 1))
    b = data.draw(st.integers(0, n - 1))
    X = sample_matrix(n, kind, seed, idx)
    assert sample_entry(n, kind, seed, idx, a, b) == X.entries[a, b]


def test_validate_gaussian_complex():
    rep = validate_distribution("gaussian-complex", 10**5, 1)
    assert not rep.flagged
    mean = rep.moments["mean"]
    assert abs(mean.estimate) < 5 * mean.stderr
    assert mean.stderr == pytest.approx(10**-2.5, rel=0.05)


def test_validate_rademacher_exact():
    rep = validate_distribution("rademacher-real", 10**4, 2)
    assert rep.moments["abs2"].estimate == 1.0
    assert rep.moments["abs2"].stderr == 0.0
    assert rep.moments["abs2"].flagged is False


def test_validate_real_square_exempt():
    rep = validate_distribution("gaussian-real", 10**4, 2)
    sq = rep.moments["square"]
    assert sq.flagged is None
    assert sq.estimate == pytest.approx(1.0, abs=5 * sq.stderr)


@pytest.mark.parametrize("kind", KINDS)
def test_moment_sanity_ten_seeds(kind):
    flags = sum(validate_distribution(kind, 10**5, seed).flagged for seed in range(10))
    assert flags == 0
