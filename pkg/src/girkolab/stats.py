"""Monte Carlo estimators and scaling-law checks.

Estimators take an optional ``map_fn`` (an order-preserving map such as
``Pool.map``) that is used for the per-sample work; reductions always run in
sample-index order so results do not depend on scheduling.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sps

from .dyson import DEFAULT_TAU, im_m, m_matrix, solve_m
from .ensembles import RandomMatrix, get_distribution, sample_matrix
from .errors import DomainError
from .girko import Scales, compute_I_eps, linear_statistic
from .hermitization import SpectralData, complex_spectrum, hermitize, resolvent_avg_im, singular_values
from .quadrature import EtaGrid, PolarGrid
from .testfunctions import TestFunction, rescale

__all__ = [
    "TailEstimate",
    "ScanResult",
    "MomentHalf",
    "MomentComparison",
    "MomentExperiment",
    "FitResult",
    "DensityResult",
    "wilson_interval",
    "batch_mean_se",
    "smallest_singular_value",
    "sv_tail_probability",
    "sv_tail_scan",
    "count_small_svs",
    "local_law_scan",
    "z_derivative_scan",
    "mixed_moments",
    "I_eps_moments",
    "compare_ensembles",
    "fit_exponent",
    "empirical_density",
]

N_BATCHES = 20


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> Tuple[float, float]:
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    if n <= 0:
        raise DomainError("need at least one trial")
    p = k / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def batch_mean_se(values, n_batches: int = N_BATCHES) -> float:
    """Standard error of the mean from ``n_batches`` contiguous batch means.

    Falls back to the plain i.i.d. formula when there are fewer than two samples
    per batch.
    """
    v = np.asarray(values, dtype=float)
    m = v.size
    if m < 2:
        return float("nan")
    if m < 2 * n_batches:
        return float(np.std(v, ddof=1) / math.sqrt(m))
    batches = np.array_split(v, n_batches)
    means = np.array([b.mean() for b in batches])
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))


# ---------------------------------------------------------------- tails


@dataclass(frozen=True)
class TailEstimate:
    n: int
    L: float
    samples: int
    count: int
    probability: float
    ci: Tuple[float, float]
    z: complex
    dist: str = "gaussian-complex"
    seed: int = 0

    def to_record(self) -> dict:
        return {
            "n": self.n, "L": self.L, "samples": self.samples, "count": self.count,
            "estimate": self.probability, "ci": list(self.ci), "z": [self.z.real, self.z.imag],
            "dist": self.dist, "seed_range": [self.seed, 0, self.samples],
        }


def smallest_singular_value(dist, n: int, z: complex, seed: int, sample_index: int) -> float:
    X = sample_matrix(n, dist, seed, sample_index)
    return float(singular_values(X, z).lambdas[0])


def sv_tail_scan(dist, n: int, z: complex, Ls: Sequence[float], samples: int, seed: int,
                 map_fn: Callable = map) -> List[TailEstimate]:
    """Tail frequencies of ``lambda_1^z <= n^{-1-L}`` for several ``L`` on shared samples."""
    if samples < 100:
        raise DomainError("tail estimates need at least 10^2 samples")
    dist = get_distribution(dist)
    fn = partial(smallest_singular_value, dist, n, complex(z), seed)
    lam1 = np.fromiter(map_fn(fn, range(samples)), dtype=float, count=samples)
    out = []
    for L in Ls:
        thr = float(n) ** (-1.0 - L)
        k = int(np.sum(lam1 <= thr))
        out.append(TailEstimate(n, float(L), samples, k, k / samples, wilson_interval(k, samples),
                                complex(z), dist.kind, seed))
    return out


def sv_tail_probability(dist, n: int, z: complex, L: float, samples: int, seed: int,
                        map_fn: Callable = map) -> TailEstimate:
    """Empirical ``P(lambda_1^z <= n^{-1-L})`` with a 95% Wilson interval."""
    return sv_tail_scan(dist, n, z, [L], samples, seed, map_fn)[0]


def count_small_svs(spec, threshold: float) -> int:
    """Number of singular values at or below ``threshold``."""
    lam = spec.lambdas if isinstance(spec, SpectralData) else np.asarray(spec, float)
    return int(np.sum(np.asarray(lam) <= threshold))


# ---------------------------------------------------------------- local law


@dataclass(frozen=True)
class ScanResult:
    z: np.ndarray
    eta: np.ndarray
    averaged: np.ndarray  # (n_z, n_eta, n_R)  |<R(G-M)>| n eta / ||R||
    bilinear: np.ndarray  # (n_z, n_eta, n_pairs)  |<x,(G-M)y>| / (|x||y| (1/sqrt(n eta) + 1/(n eta)))
    raw_averaged: np.ndarray  # (n_z, n_eta, n_R)  |<R(G-M)>| without normalisation
    normalization: dict = field(default_factory=lambda: {"averaged": "n*eta", "bilinear": "1/sqrt(n*eta) + 1/(n*eta)"})

    @property
    def worst_averaged(self) -> float:
        return float(self.averaged.max()) if self.averaged.size else 0.0

    @property
    def worst_bilinear(self) -> float:
        return float(self.bilinear.max()) if self.bilinear.size else 0.0


def _m_full(z: complex, eta: float, n: int) -> np.ndarray:
    sol = solve_m(z, eta)
    return np.kron(m_matrix(z, sol.v, sol.u), np.eye(n))


def local_law_scan(X: RandomMatrix, zgrid, etagrid, probes: Optional[dict] = None, tau: float = DEFAULT_TAU,
                   self_test: bool = False) -> ScanResult:
    """Averaged and entrywise local-law statistics on a ``(z, eta)`` grid.

    ``probes`` may hold ``"R"`` (list of ``2n x 2n`` matrices, default the identity)
    and ``"pairs"`` (list of ``(x, y)`` vectors of length ``2n``).  With
    ``self_test`` the resolvent is replaced by ``M`` itself, which must give zeros.
    """
    n = X.n
    zs = np.atleast_1d(np.asarray(zgrid, dtype=complex))
    etas = np.atleast_1d(np.asarray(etagrid, dtype=float))
    if np.any(etas <= float(n) ** -2):
        raise DomainError("eta grid must lie above n^-2")
    if np.any(np.abs(zs) > 1.0 - tau):
        raise DomainError("z grid must satisfy |z| <= 1 - tau")
    probes = probes or {}
    Rs = probes.get("R") or [None]  # None stands for the identity
    pairs = probes.get("pairs") or []
    avg = np.zeros((zs.size, etas.size, len(Rs)))
    raw = np.zeros_like(avg)
    bil = np.zeros((zs.size, etas.size, len(pairs)))
    Rnorms = [1.0 if R is None else float(np.linalg.norm(R, 2)) for R in Rs]
    for a, z in enumerate(zs):
        if self_test:
            ev = U = None
        else:
            ev, U = np.linalg.eigh(hermitize(X, z).matrix())
        Rdiag = [None if (R is None or U is None) else np.einsum("ij,ik,kj->j", U.conj(), R, U) for R in Rs]
        proj = [None if U is None else (U.conj().T @ x, U.conj().T @ y) for x, y in pairs]
        for b, eta in enumerate(etas):
            M = _m_full(z, eta, n)
            if self_test:
                G = M
            for r, R in enumerate(Rs):
                if self_test:
                    val = np.trace((G - M) if R is None else R @ (G - M)) / (2 * n)
                elif R is None:
                    val = np.mean(1.0 / (ev - 1j * eta)) - np.trace(M) / (2 * n)
                else:
                    val = np.sum(Rdiag[r] / (ev - 1j * eta)) / (2 * n) - np.trace(R @ M) / (2 * n)
                raw[a, b, r] = abs(val) / Rnorms[r]
                avg[a, b, r] = raw[a, b, r] * n * eta
            for p, (x, y) in enumerate(pairs):
                if self_test:
                    val = np.vdot(x, (G - M) @ y)
                else:
                    ux, uy = proj[p]
                    val = np.sum(ux.conj() * uy / (ev - 1j * eta)) - np.vdot(x, M @ y)
                scale = np.linalg.norm(x) * np.linalg.norm(y) * (1 / math.sqrt(n * eta) + 1 / (n * eta))
                bil[a, b, p] = abs(val) / scale
    return ScanResult(zs, etas, avg, bil, raw)


def _avg_im_minus_m(X, z: complex, eta: float) -> float:
    return float(resolvent_avg_im(singular_values(X, z), eta)) - float(im_m(abs(z), eta))


def z_derivative_scan(X: RandomMatrix, z: complex, eta: float, h: Optional[float] = None):
    """Central differences of ``<G^z(i eta) - m^z(i eta)>`` in ``Re z`` and ``Im z``.

    Returns ``(d_z, d_zbar, bound_ratio)`` with ``d_z = (d_x - i d_y)/2``,
    ``d_zbar = (d_x + i d_y)/2`` and ``bound_ratio = (|d_z| + |d_zbar|) n eta^{3/2}``.
    """
    n = X.n
    if eta <= 0:
        raise DomainError("eta must be positive")
    hmax = 1e-3 / math.sqrt(n)
    h = hmax if h is None else h
    if not 0 < h <= hmax * (1 + 1e-12):
        raise DomainError("h must lie in (0, 1e-3 n^{-1/2}]")
    if h > 0.1 * eta:
        warnings.warn("finite-difference step is large compared with eta", RuntimeWarning, stacklevel=2)
    z = complex(z)
    # <G - m> = i (<Im G> - Im m) on the imaginary axis
    F = lambda zz: 1j * _avg_im_minus_m(X, zz, eta)  # noqa: E731
    dx = (F(z + h) - F(z - h)) / (2 * h)
    dy = (F(z + 1j * h) - F(z - 1j * h)) / (2 * h)
    d_z = 0.5 * (dx - 1j * dy)
    d_zbar = 0.5 * (dx + 1j * dy)
    ratio = (abs(d_z) + abs(d_zbar)) * n * eta**1.5
    return complex(d_z), complex(d_zbar), float(ratio)


# ---------------------------------------------------------------- moments


@dataclass(frozen=True)
class MomentHalf:
    dist: str
    n: int
    k: int
    estimate: float
    stderr: float
    samples: int
    seed: int
    index_range: Tuple[int, int]
    values: Tuple[float, ...] = field(repr=False, default=())

    def to_record(self) -> dict:
        return {"dist": self.dist, "n": self.n, "k": self.k, "estimate": self.estimate, "stderr": self.stderr,
                "samples": self.samples, "seed_range": [self.seed, *self.index_range]}


def _check_fs(fs, tau):
    fs = [(f, complex(z)) for f, z in fs]
    if not fs:
        raise DomainError("need at least one test function")
    if len(fs) > 4:
        raise DomainError("k is limited to 4")
    for _, z in fs:
        if abs(z) > 1.0 - tau:
            raise DomainError("base points must satisfy |z_j| <= 1 - tau")
    return fs


def _product_linear(dist, n, fs, seed, index) -> float:
    X = sample_matrix(n, dist, seed, index)
    sig = complex_spectrum(X).sigmas
    out = 1.0
    for f, z in fs:
        out *= linear_statistic(sig, rescale(f, z, n))
    return out


def _product_I_eps(dist, n, fs, epsilon, zgrid, etagrid, seed, index) -> float:
    X = sample_matrix(n, dist, seed, index)
    scales = Scales(n, epsilon)
    out = 1.0
    for f, z in fs:
        out *= compute_I_eps(X, rescale(f, z, n), scales, zgrid, etagrid)
    return out


def _half(dist, n, fs, values, seed, start, samples) -> MomentHalf:
    vals = np.asarray(list(values), dtype=float)
    est = float(np.sum(vals) / samples) if samples else 0.0
    se = batch_mean_se(vals)
    return MomentHalf(dist.kind, n, len(fs), est, se, samples, seed, (start, start + samples), tuple(vals.tolist()))


def mixed_moments(dist, fs, n: int, k: Optional[int] = None, samples: int = 100, seed: int = 0,
                  start: int = 0, tau: float = DEFAULT_TAU, map_fn: Callable = map) -> MomentHalf:
    """Monte Carlo ``E prod_j L_j`` with ``L_j`` the centred linear statistic of ``(f_j, z_j)``.

    Samples use stream indices ``start .. start+samples-1`` of ``seed``.
    """
    dist = get_distribution(dist)
    fs = _check_fs(fs, tau)
    if k is not None and k != len(fs):
        raise DomainError("k must equal the number of test functions")
    if any(f.is_zero for f, _ in fs):
        return MomentHalf(dist.kind, n, len(fs), 0.0, 0.0, samples, seed, (start, start + samples),
                          (0.0,) * samples)
    fn = partial(_product_linear, dist, n, fs, seed)
    return _half(dist, n, fs, map_fn(fn, range(start, start + samples)), seed, start, samples)


def I_eps_moments(dist, fs, n: int, k: Optional[int] = None, epsilon: float = 0.2, samples: int = 100,
                  seed: int = 0, start: int = 0, zgrid: Optional[PolarGrid] = None,
                  etagrid: Optional[EtaGrid] = None, tau: float = DEFAULT_TAU, map_fn: Callable = map) -> MomentHalf:
    """As :func:`mixed_moments` with every factor replaced by ``I_eps``."""
    dist = get_distribution(dist)
    fs = _check_fs(fs, tau)
    if k is not None and k != len(fs):
        raise DomainError("k must equal the number of test functions")
    if any(f.is_zero for f, _ in fs):
        return MomentHalf(dist.kind, n, len(fs), 0.0, 0.0, samples, seed, (start, start + samples),
                          (0.0,) * samples)
    zgrid = zgrid or PolarGrid(31, 32)
    etagrid = etagrid or EtaGrid()
    fn = partial(_product_I_eps, dist, n, fs, epsilon, zgrid, etagrid, seed)
    return _half(dist, n, fs, map_fn(fn, range(start, start + samples)), seed, start, samples)


@dataclass(frozen=True)
class MomentExperiment:
    """What to compare: ``fs`` at dimension ``n`` with ``samples`` per ensemble.

    Ensemble A uses stream indices ``[0, samples)``, ensemble B ``[samples, 2 samples)``
    of the same master seed, so the two halves never share randomness.
    """

    fs: Tuple[Tuple[TestFunction, complex], ...]
    n: int
    samples: int
    seed: int = 0
    statistic: str = "linear"
    epsilon: float = 0.2


@dataclass(frozen=True)
class MomentComparison:
    k: int
    fs: tuple
    A: MomentHalf
    B: MomentHalf
    difference: float
    stderr: float
    z_score: float

    def to_record(self) -> dict:
        return {
            "k": self.k,
            "A": self.A.to_record(),
            "B": self.B.to_record(),
            "estimate": self.difference,
            "stderr": self.stderr,
            "z_score": self.z_score,
        }


def compare_ensembles(A, B, experiment: MomentExperiment, map_fn: Callable = map) -> MomentComparison:
    """Estimate the same moment under ensembles ``A`` and ``B`` and form a z-score."""
    e = experiment
    if e.statistic == "linear":
        est = partial(mixed_moments, fs=e.fs, n=e.n, samples=e.samples, seed=e.seed, map_fn=map_fn)
    elif e.statistic == "i-eps":
        est = partial(I_eps_moments, fs=e.fs, n=e.n, epsilon=e.epsilon, samples=e.samples, seed=e.seed,
                      map_fn=map_fn)
    else:
        raise DomainError(f"unknown statistic {e.statistic!r}")
    ha = est(A, start=0)
    hb = est(B, start=e.samples)
    diff = ha.estimate - hb.estimate
    se = math.hypot(ha.stderr, hb.stderr)
    z = diff / se if se > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
    return MomentComparison(len(e.fs), tuple(e.fs), ha, hb, diff, se, z)


# ---------------------------------------------------------------- fits and densities


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float

    def __iter__(self):
        return iter((self.slope, self.intercept, self.r2))


def fit_exponent(points) -> FitResult:
    """Least-squares fit of ``log y = slope * log x + intercept``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DomainError("need at least three (x, y) points")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise DomainError("fit_exponent needs positive finite inputs")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    res = sps.linregress(lx, ly)
    resid = ly - (res.slope * lx + res.intercept)
    sst = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if sst == 0 else 1.0 - float(np.sum(resid**2)) / sst
    return FitResult(float(res.slope), float(res.intercept), r2)


@dataclass(frozen=True)
class DensityResult:
    edges: np.ndarray
    mass: np.ndarray  # (bins, bins), sums to 1
    density: np.ndarray  # mass / bin area
    central_density: float
    central_se: float
    mass_outside: dict
    n: int
    samples: int
    dist: str = "gaussian-complex"

    def to_record(self) -> dict:
        return {"n": self.n, "samples": self.samples, "dist": self.dist, "estimate": self.central_density,
                "stderr": self.central_se, "mass_outside": {str(k): v for k, v in self.mass_outside.items()},
                "bins": int(self.mass.shape[0])}


def _eigs(dist, n, seed, index):
    return complex_spectrum(sample_matrix(n, dist, seed, index)).sigmas


def empirical_density(dist, n: int, samples: int, binning: int = 31, seed: int = 0,
                      extent: float = 1.5, radii: Sequence[float] = (1.2,), map_fn: Callable = map) -> DensityResult:
    """Normalised 2D histogram of all eigenvalues over ``samples`` matrices.

    ``binning`` bins per axis on ``[-extent, extent]^2``; an odd count centres a
    bin on the origin, whose density carries a batch-means standard error.
    """
    dist = get_distribution(dist)
    if extent < 1.5:
        raise DomainError("binning must cover [-1.5, 1.5]^2")
    if binning < 1:
        raise DomainError("need at least one bin")
    edges = np.linspace(-extent, extent, binning + 1)
    area = (edges[1] - edges[0]) ** 2
    counts = np.zeros((binning, binning))
    centre = []
    outside = {float(r): 0 for r in radii}
    total = 0
    c = binning // 2
    fn = partial(_eigs, dist, n, seed)
    for sig in map_fn(fn, range(samples)):
        h, _, _ = np.histogram2d(sig.real, sig.imag, bins=[edges, edges])
        counts += h
        total += sig.size
        centre.append(h[c, c] / (sig.size * area) if binning % 2 else np.nan)
        for r in outside:
            outside[r] += int(np.sum(np.abs(sig) > r))
    inside = counts.sum()
    mass = counts / inside
    dens = mass / area
    cd = float(dens[c, c]) if binning % 2 else float("nan")
    se = batch_mean_se(centre) if binning % 2 else float("nan")
    return DensityResult(edges, mass, dens, cd, se, {r: v / total for r, v in outside.items()}, n, samples,
                         dist.kind)
