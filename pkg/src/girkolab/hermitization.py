"""Hermitization ``H^z`` of ``X - z`` and the resolvent functionals built on it.

``H^z`` is the ``2n x 2n`` Hermitian block matrix ``[[0, X - z], [(X - z)^*, 0]]``.
Its eigenvalues are ``{+lambda_i, -lambda_i}`` with ``lambda_i`` the singular
values of ``X - z``, so every normalised trace of ``G^z(i eta) = (H^z - i eta)^-1``
reduces to a sum over singular values.

Dense linear algebra (SVD, eigenvalues, linear solves) is delegated to
LAPACK through numpy/scipy with a declared absolute accuracy of ``1e-10``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg as sla
from scipy import integrate

from .ensembles import RandomMatrix
from .errors import DomainError, NumericalError

__all__ = [
    "BACKEND_TOLERANCE",
    "LOG_FLOOR",
    "DEGENERACY_THRESHOLD",
    "HermitizedOperator",
    "SpectralData",
    "TraceLogIdentity",
    "hermitize",
    "singular_values",
    "singular_values_batch",
    "complex_spectrum",
    "resolvent_avg_im",
    "resolvent_avg",
    "resolvent_bilinear",
    "log_abs_det_shifted",
    "log_abs_det_batch",
    "trace_log_identity",
]

BACKEND_TOLERANCE = 1e-10
# exact zero singular values are floored here before taking logs
LOG_FLOOR = 1e-300
DEGENERACY_THRESHOLD = 1e-14

_BATCH = 512


def _as_array(X) -> np.ndarray:
    return X.entries if isinstance(X, RandomMatrix) else np.asarray(X)


def _context(X, z=None) -> dict:
    ctx = {"n": _as_array(X).shape[0]}
    if z is not None:
        ctx["z"] = complex(z)
    if isinstance(X, RandomMatrix):
        ctx["seed"] = X.seed
        ctx["sample_index"] = X.sample_index
    return ctx


@dataclass(frozen=True, eq=False)
class HermitizedOperator:
    X: RandomMatrix
    z: complex

    @property
    def dim(self) -> int:
        return 2 * _as_array(self.X).shape[0]

    def shifted_block(self) -> np.ndarray:
        A = _as_array(self.X)
        return A - self.z * np.eye(A.shape[0])

    def matrix(self) -> np.ndarray:
        B = self.shifted_block()
        n = B.shape[0]
        H = np.zeros((2 * n, 2 * n), dtype=complex)
        H[:n, n:] = B
        H[n:, :n] = B.conj().T
        return H


@dataclass(frozen=True)
class SpectralData:
    """Ascending singular values of ``X - z`` and, optionally, eigenvalues of ``X``."""

    lambdas: Optional[np.ndarray] = None
    sigmas: Optional[np.ndarray] = None
    backend_tolerance: float = BACKEND_TOLERANCE
    z: Optional[complex] = None

    @classmethod
    def from_lambdas(cls, lambdas, z=None) -> "SpectralData":
        lam = np.sort(np.abs(np.asarray(lambdas, dtype=float)))
        return cls(lambdas=lam, z=z)

    @property
    def n(self) -> int:
        return len(self.lambdas if self.lambdas is not None else self.sigmas)

    @property
    def degenerate(self) -> bool:
        return self.lambdas is not None and bool(self.lambdas[0] < DEGENERACY_THRESHOLD)

    def hermitized_eigenvalues(self) -> np.ndarray:
        return np.concatenate([-self.lambdas[::-1], self.lambdas])


def hermitize(X: RandomMatrix, z: complex) -> HermitizedOperator:
    return HermitizedOperator(X, complex(z))


def singular_values(X: RandomMatrix, z: complex = 0.0) -> SpectralData:
    """Ascending singular values of ``X - z``."""
    A = _as_array(X)
    try:
        s = sla.svdvals(A - z * np.eye(A.shape[0]), check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"SVD failed: {exc}", **_context(X, z)) from exc
    return SpectralData(lambdas=s[::-1].copy(), z=complex(z))


def singular_values_batch(X: RandomMatrix, zs) -> np.ndarray:
    """Singular values of ``X - z`` for every ``z`` in ``zs``; shape ``(len(zs), n)``, ascending."""
    A = _as_array(X)
    zs = np.asarray(zs, dtype=complex).ravel()
    n = A.shape[0]
    out = np.empty((zs.size, n))
    eye = np.eye(n)
    for start in range(0, zs.size, _BATCH):
        chunk = zs[start : start + _BATCH]
        stack = A[None, :, :] - chunk[:, None, None] * eye
        try:
            s = np.linalg.svd(stack, compute_uv=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"batched SVD failed: {exc}", **_context(X)) from exc
        out[start : start + chunk.size] = s[:, ::-1]
    return out


def complex_spectrum(X: RandomMatrix) -> SpectralData:
    """The ``n`` complex eigenvalues of ``X`` (unordered, with multiplicity)."""
    A = _as_array(X)
    try:
        sig = sla.eigvals(A, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigenvalue backend failed: {exc}", **_context(X)) from exc
    return SpectralData(sigmas=np.asarray(sig, dtype=complex))


def _check_eta(eta):
    if np.any(np.asarray(eta) <= 0):
        raise DomainError("eta must be positive")


def resolvent_avg_im(spec, eta):
    """``<Im G^z(i eta)> = (1/n) sum_i eta / (lambda_i^2 + eta^2)``.

    ``spec`` may be a :class:`SpectralData` or an array of singular values whose
    last axis indexes ``i``; ``eta`` may be a scalar or an array, in which case the
    result broadcasts as ``lambdas[..., None, :]`` against ``eta[:, None]``.
    """
    _check_eta(eta)
    lam = spec.lambdas if isinstance(spec, SpectralData) else np.asarray(spec, dtype=float)
    eta_arr = np.asarray(eta, dtype=float)
    if eta_arr.ndim == 0:
        return np.mean(eta_arr / (lam**2 + eta_arr**2), axis=-1)
    lam2 = (lam**2)[..., None, :]
    e = eta_arr[:, None]
    return np.mean(e / (lam2 + e * e), axis=-1)


def resolvent_avg(spec, eta) -> complex:
    """Full normalised trace ``<G^z(i eta)>``; purely imaginary by the +-lambda symmetry."""
    return 1j * resolvent_avg_im(spec, eta)


def resolvent_bilinear(X: RandomMatrix, z: complex, eta: float, x, y) -> complex:
    """``<x, (H^z - i eta)^-1 y>`` (conjugate-linear in ``x``) by a direct linear solve."""
    _check_eta(eta)
    H = hermitize(X, z).matrix()
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.shape != (H.shape[0],) or y.shape != (H.shape[0],):
        raise DomainError(f"probe vectors must have length {H.shape[0]}")
    A = H - 1j * eta * np.eye(H.shape[0])
    try:
        w = sla.solve(A, y, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"shifted solve failed: {exc}", **_context(X, z)) from exc
    ynorm = np.linalg.norm(y)
    if np.linalg.norm(A @ w - y) > 1e-10 * max(ynorm, 1e-300):
        raise NumericalError("shifted solve residual too large", **_context(X, z))
    return complex(np.vdot(x, w))


def log_abs_det_shifted(spec, T: float, relative: bool = False) -> float:
    """``log|det(H^z - iT)| = sum_i [2 log T + log1p(lambda_i^2 / T^2)]``.

    With ``relative=True`` the z-independent ``2n log T`` is dropped, which keeps
    full precision for astronomically large ``T``.
    """
    if T <= 0:
        raise DomainError("T must be positive")
    lam = spec.lambdas if isinstance(spec, SpectralData) else np.asarray(spec, dtype=float)
    corr = float(np.sum(np.log1p((lam / T) ** 2)))
    if relative:
        return corr
    return 2.0 * lam.shape[-1] * math.log(T) + corr


class TraceLogIdentity(NamedTuple):
    closed_form: float
    quadrature: float
    degenerate: bool


def trace_log_identity(spec, E: float) -> TraceLogIdentity:
    """``sum_i log(1 + E^2/lambda_i^2)`` against ``2n * int_0^E <Im G(i eta)> d eta``.

    Exact zero modes cannot be integrated (the integrand is ``1/eta``); they enter
    both sides through the floored closed form and set ``degenerate``.
    """
    if E <= 0:
        raise DomainError("E must be positive")
    lam = spec.lambdas if isinstance(spec, SpectralData) else np.asarray(spec, dtype=float)
    lam = np.asarray(lam, dtype=float)
    zero = lam < DEGENERACY_THRESHOLD
    floored = np.maximum(lam, LOG_FLOOR)
    # log(1 + E^2/l^2) = 2 log(E/l) + log1p(l^2/E^2) avoids overflow for tiny l
    ratio = np.log(E) - np.log(floored)
    terms = 2.0 * np.maximum(ratio, 0.0) + np.log1p(np.exp(-2.0 * np.abs(ratio)))
    closed = float(np.sum(terms))

    live = lam[~zero]
    quad = float(np.sum(terms[zero]))
    if live.size:
        lam2 = live**2

        def integrand(eta):
            return 2.0 * np.sum(eta / (lam2 + eta * eta))

        brk = sorted({float(v) for v in live if 0.0 < v < E})
        edges = [0.0] + brk + [E]
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            if b > a:
                val, _ = integrate.quad(integrand, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
                total += val
        quad += total
    return TraceLogIdentity(closed, quad, bool(zero.any()))


def log_abs_det_batch(X: RandomMatrix, zs, method: str = "hessenberg"):
    """``log|det H^z| = 2 log|det(X - z)|`` for every ``z`` in ``zs``.

    ``method="hessenberg"`` reduces ``X`` once to upper Hessenberg form and runs
    partially pivoted Gaussian elimination on ``Hess - z`` for all shifts at once
    (``O(n^2)`` per shift); ``method="svd"`` sums ``2 log lambda_i``.  Returns
    ``(values, min_pivot)`` where ``min_pivot`` is the smallest pivot (Hessenberg)
    or ``lambda_1`` (SVD) per shift, floored values having been used where it is 0.
    """
    zs = np.asarray(zs, dtype=complex).ravel()
    A = _as_array(X)
    if method == "svd":
        lam = singular_values_batch(X, zs)
        return 2.0 * np.sum(np.log(np.maximum(lam, LOG_FLOOR)), axis=1), lam[:, 0]
    if method != "hessenberg":
        raise DomainError(f"unknown log-determinant method {method!r}")
    try:
        Hs = sla.hessenberg(A.astype(complex), check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Hessenberg reduction failed: {exc}", **_context(X)) from exc
    n = Hs.shape[0]
    values = np.empty(zs.size)
    min_piv = np.empty(zs.size)
    chunk = max(1, 2_000_000 // max(n * n, 1) * 8)
    for start in range(0, zs.size, chunk):
        z = zs[start : start + chunk]
        v, p = _hessenberg_logabsdet(Hs, z)
        values[start : start + z.size] = 2.0 * v
        min_piv[start : start + z.size] = p
    return values, min_piv


def _hessenberg_logabsdet(Hs: np.ndarray, z: np.ndarray):
    n = Hs.shape[0]
    K = z.size
    row = np.repeat(Hs[0][None, :], K, axis=0)
    row[:, 0] -= z
    total = np.zeros(K)
    min_piv = np.full(K, np.inf)
    for k in range(n - 1):
        nxt = np.repeat(Hs[k + 1, k:][None, :], K, axis=0)
        nxt[:, 1] -= z
        swap = np.abs(nxt[:, 0]) > np.abs(row[:, 0])
        piv_row = np.where(swap[:, None], nxt, row)
        other = np.where(swap[:, None], row, nxt)
        piv = piv_row[:, 0]
        apiv = np.abs(piv)
        min_piv = np.minimum(min_piv, apiv)
        total += np.log(np.maximum(apiv, LOG_FLOOR))
        safe = np.where(apiv > 0, piv, 1.0)
        mult = np.where(apiv > 0, other[:, 0] / safe, 0.0)
        row = other[:, 1:] - mult[:, None] * piv_row[:, 1:]
    last = np.abs(row[:, 0])
    min_piv = np.minimum(min_piv, last)
    total += np.log(np.maximum(last, LOG_FLOOR))
    return total, min_piv
