"""Scalar Dyson equation on the imaginary axis and the deterministic counterterms.

On ``w = i eta`` the solution is ``m = i v`` with ``v > 0`` the unique positive
root of the cubic

    f(v) = v (eta + v)^2 + v |z|^2 - (eta + v).

At ``eta = 0`` and ``|z| < 1`` the root is ``sqrt(1 - |z|^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate

from .errors import DomainError, SolverError

__all__ = [
    "DysonSolution",
    "DeterministicApprox",
    "DEFAULT_TOL",
    "DEFAULT_TAU",
    "REGULARIZATION_K",
    "cubic",
    "exact_residual",
    "solve_m",
    "im_m",
    "im_m_minus_reference",
    "build_M",
    "m_matrix",
    "regularized_eta_integral",
    "counterterm_tail",
    "counterterm_tail_batch",
    "counterterm_identity_check",
]

DEFAULT_TOL = 1e-12
DEFAULT_TAU = 0.1
REGULARIZATION_K = 10.0
_BISECTIONS = 64


@dataclass(frozen=True)
class DysonSolution:
    z: complex
    eta: float
    v: float
    u: float
    residual: float

    @property
    def m(self) -> complex:
        return 1j * self.v


@dataclass(frozen=True)
class DeterministicApprox:
    z: complex
    eta: float
    matrix: np.ndarray
    norm: float


def cubic(v: float, s: float, eta: float) -> float:
    """``f(v)`` with ``s = |z|^2``, arranged as ``(eta+v)(v(eta+v)-1) + v s``."""
    w = eta + v
    return w * (v * w - 1.0) + v * s


def _dcubic(v, s, eta):
    w = eta + v
    return w * w + 2.0 * v * w + s - 1.0


def exact_residual(v: float, s: float, eta: float) -> float:
    """``|f(v)|`` evaluated in exact rational arithmetic on the given floats."""
    V, S, E = Fraction(v), Fraction(s), Fraction(eta)
    W = E + V
    return float(abs(V * W * W + V * S - W))


def _v_scalar(s: float, eta: float) -> float:
    if eta == 0.0:
        return math.sqrt(1.0 - s)
    lo, hi = 0.0, min(1.0 / eta, 2.0)
    if cubic(hi, s, eta) <= 0.0:
        raise SolverError("bracket failure", s=s, eta=eta)
    for _ in range(_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if cubic(mid, s, eta) > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-9 * hi:
            break
    v = 0.5 * (lo + hi)
    for _ in range(6):
        d = _dcubic(v, s, eta)
        if d <= 0.0:
            break
        step = cubic(v, s, eta) / d
        nv = v - step
        if not (lo <= nv <= hi):
            break
        v = nv
        if abs(step) <= 1e-17 * v:
            break
    return v


def solve_m(z: complex, eta: float, tol: float = DEFAULT_TOL) -> DysonSolution:
    """Solve the Dyson equation at ``w = i eta``: bisection on the cubic, Newton polish.

    The reported residual is the exact ``|f(v)|`` at the returned float; the two
    neighbouring floats are also tried and the best of the three is kept.
    """
    if eta < 0:
        raise DomainError("eta must be non-negative")
    s = abs(z) ** 2
    if eta == 0 and s >= 1.0:
        raise DomainError("eta = 0 requires |z| < 1")
    v = _v_scalar(s, float(eta))
    if eta > 0:
        best = min(
            (v, math.nextafter(v, 0.0), math.nextafter(v, math.inf)),
            key=lambda c: exact_residual(c, s, eta),
        )
        v = best
    res = exact_residual(v, s, eta)
    if eta == 0:
        # sqrt(1-s) is a root of v^2 + s - 1, the reduced form of the cubic at eta=0
        res = float(abs(Fraction(v) ** 2 + Fraction(s) - 1))
    # for large eta the cubic's terms are O(eta^2 v) and |f'(v)| ulp(v) exceeds tol
    floor = 4.0 * math.ulp(v) * abs(_dcubic(v, s, float(eta)))
    if res > max(tol, floor):
        raise SolverError("residual above tolerance", z=z, eta=eta, residual=res)
    u = v / (eta + v)
    return DysonSolution(complex(z), float(eta), v, u, res)


def im_m(abs_z, eta) -> np.ndarray:
    """Vectorised ``v = Im m^z(i eta)``; broadcasts ``abs_z`` against ``eta``.

    Same bisection + Newton scheme as :func:`solve_m` without the exact residual.
    """
    s, eta = np.broadcast_arrays(np.asarray(abs_z, float) ** 2, np.asarray(eta, float))
    if np.any(eta < 0):
        raise DomainError("eta must be non-negative")
    if np.any((eta == 0) & (s >= 1)):
        raise DomainError("eta = 0 requires |z| < 1")
    s = s.astype(float)
    pos = eta > 0
    e = np.where(pos, eta, 1.0)
    lo = np.zeros_like(e)
    hi = np.minimum(1.0 / e, 2.0)
    for _ in range(_BISECTIONS):
        mid = 0.5 * (lo + hi)
        up = cubic(mid, s, e) > 0.0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    v = 0.5 * (lo + hi)
    for _ in range(3):
        d = _dcubic(v, s, e)
        nv = v - cubic(v, s, e) / np.where(d > 0, d, 1.0)
        ok = (d > 0) & (nv >= lo) & (nv <= hi)
        v = np.where(ok, nv, v)
    with np.errstate(invalid="ignore"):
        v0 = np.sqrt(np.maximum(1.0 - s, 0.0))
    return np.where(pos, v, v0)


def im_m_minus_reference(abs_z, eta) -> np.ndarray:
    """``Im m^z(i eta) - 1/(1+eta)`` without cancellation, for ``eta >= 1``.

    Writes ``v = a + d`` with ``a = 1/(1+eta)`` and solves the exact cubic Taylor
    expansion of ``f`` around ``a`` for ``d``; ``f(a)`` has the closed form
    ``(s - eta (eta^2+eta+1)/(1+eta)^2) / (1+eta)``.
    """
    s, eta = np.broadcast_arrays(np.asarray(abs_z, float) ** 2, np.asarray(eta, float))
    if np.any(eta < 1):
        raise DomainError("reference subtraction form needs eta >= 1")
    a = 1.0 / (1.0 + eta)
    f0 = (s - eta * (eta * eta + eta + 1.0) * a * a) * a
    f1 = _dcubic(a, s, eta)
    f2h = 2.0 * eta + 3.0 * a
    d = -f0 / f1
    for _ in range(4):
        g = f0 + d * (f1 + d * (f2h + d))
        dg = f1 + d * (2.0 * f2h + 3.0 * d)
        d = d - g / dg
    return d


def m_matrix(z: complex, v: float, u: float) -> np.ndarray:
    return np.array([[1j * v, -z * u], [-np.conj(z) * u, 1j * v]], dtype=complex)


def build_M(z: complex, eta: float, tol: float = DEFAULT_TOL, tau: float = DEFAULT_TAU) -> DeterministicApprox:
    """The 2x2 deterministic approximation ``M^z(i eta)``.

    ``M = i v I + N`` with ``N`` Hermitian of eigenvalues ``+-|z| u``, so ``M`` is
    normal and both singular values equal ``sqrt(v^2 + |z|^2 u^2)``.
    """
    if eta <= 0:
        raise DomainError("eta must be positive")
    if abs(z) > 1.0 - tau:
        raise DomainError(f"|z| = {abs(z):.6g} exceeds 1 - tau = {1 - tau:.6g}")
    sol = solve_m(z, eta, tol)
    M = m_matrix(complex(z), sol.v, sol.u)
    norm = math.sqrt(sol.v**2 + abs(z) ** 2 * sol.u**2)
    return DeterministicApprox(complex(z), float(eta), M, norm)


def _tail_series(s: float, T: float) -> float:
    # int_T^inf (v - 1/(1+eta)) with v - 1/(1+eta) = eta^-2 - (2+s) eta^-3 + (1+...) eta^-4
    return 1.0 / T - (2.0 + s) / (2.0 * T * T) + 1.0 / (3.0 * T**3)


def counterterm_tail(z: complex, T: float, full_output: bool = False):
    """``int_T^inf (Im m^z(i eta) - 1/(eta+1)) d eta`` for ``T >= 10``.

    Quadrature on ``[T, 1000 T]`` (in ``log eta``) plus the asymptotic series
    beyond.  With ``full_output`` returns ``(value, error_bound)``.
    """
    if T < 10:
        raise DomainError("counterterm_tail needs T >= 10")
    s = abs(z) ** 2
    Tp = 1e3 * T

    def integrand(t):
        eta = T * math.exp(t)
        return float(im_m_minus_reference(math.sqrt(s), eta)) * eta

    val, err = integrate.quad(integrand, 0.0, math.log(1e3), epsabs=0.0, epsrel=1e-12, limit=100)
    tail = _tail_series(s, Tp)
    value = val + tail
    # series remainder is O(Tp^-4); quadrature error as reported
    bound = abs(err) + 10.0 * (3.0 + s) ** 2 / Tp**4 + 1e-15 / T
    if full_output:
        return value, bound
    return value


def counterterm_tail_batch(abs_z, T: float) -> np.ndarray:
    """Vectorised :func:`counterterm_tail` over ``abs_z`` (fixed 64-point Gauss rule in ``log eta``)."""
    if T < 10:
        raise DomainError("counterterm_tail needs T >= 10")
    from .quadrature import gauss_legendre

    a = np.asarray(abs_z, float)
    L = math.log(1e3)
    x, w = gauss_legendre(64)
    eta = T * np.exp(L * x)
    vals = im_m_minus_reference(a[..., None], eta) * eta
    return vals @ (L * w) + _tail_series(a * a, 1e3 * T)


def regularized_eta_integral(abs_z: float, K: float = REGULARIZATION_K) -> float:
    """``int_0^K (Im m - 1/(1+eta)) d eta + log(1+K) + counterterm_tail(K)``.

    This is the finite part of ``int_0^inf Im m^z(i eta) d eta`` up to a
    z-independent constant (which integrates to zero against a Laplacian).
    """
    s = abs_z * abs_z
    pts = [p for p in (1e-6, 1e-4, 1e-2, 1.0) if p < K]

    def integrand(eta):
        return _v_scalar(s, eta) - 1.0 / (1.0 + eta)

    val, _ = integrate.quad(integrand, 0.0, K, points=pts, epsabs=1e-14, epsrel=1e-13, limit=400)
    return val + math.log1p(K) + counterterm_tail(abs_z, K)


def counterterm_identity_check(f, z0: complex, n: int, zgrid=None, K: float = REGULARIZATION_K):
    """Both sides of ``(1/pi) int_D f_{z0} = -(1/2pi) int Lap f_{z0}(z) int_0^inf Im m^z d eta d^2z``.

    ``f`` is a :class:`~girkolab.testfunctions.TestFunction`; the left side is an
    adaptive disk integral, the right side a polar product quadrature of the
    Laplacian against the regularised eta-integral.  Returns ``(lhs, rhs)``.
    """
    import warnings

    from .quadrature import PolarGrid
    from .testfunctions import rescale

    g = rescale(f, z0, n)
    if g.is_zero:
        return 0.0, 0.0
    grid = zgrid or PolarGrid(n_radial=63, n_angular=64)
    lhs = g.disk_integral() / math.pi
    nodes = grid.nodes(g)
    radius = g.radius
    if abs(abs(z0) - 1.0) < 2 * radius + 1e-12:
        warnings.warn(
            "test-function support meets |z| = 1 where Im m is not smooth in z; "
            "the quadrature may be inaccurate",
            RuntimeWarning,
            stacklevel=2,
        )
    abs_z = np.abs(nodes.z)
    uniq, inv = np.unique(np.round(abs_z, 15), return_inverse=True)
    h = np.array([regularized_eta_integral(float(a), K) for a in uniq])[inv]
    rhs = -nodes.integrate(g.laplacian(nodes.z) * h) / (2.0 * math.pi)
    return float(lhs), float(rhs)
