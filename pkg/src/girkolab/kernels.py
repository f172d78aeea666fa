"""Limiting complex-Ginibre correlation kernel and its determinantal k-point densities."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericalError

__all__ = ["KernelEvaluation", "erf_complex", "ginibre_kernel", "kernel_evaluation", "kpoint_density"]

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
_SERIES_RADIUS = 3.0
_CF_MIN_RE = 2.5
_MAX_ABS = 30.0
_EXP_MAX = 709.0


def _erf_series(w: complex) -> complex:
    """Maclaurin series ``2/sqrt(pi) sum (-1)^k w^{2k+1} / (k! (2k+1))``."""
    w2 = w * w
    term = w  # (-1)^k w^{2k+1} / k!
    total = w
    k = 0
    while True:
        k += 1
        term *= -w2 / k
        add = term / (2 * k + 1)
        total += add
        if abs(add) <= 1e-17 * abs(total) or k > 200:
            break
    return _TWO_OVER_SQRT_PI * total


def _exp_checked(z: complex) -> complex:
    if z.real > _EXP_MAX:
        raise NumericalError("erf value overflows double precision", w_exponent=z.real)
    return cmath.exp(z)


def _erfc_continued_fraction(w: complex) -> complex:
    """``erfc`` for ``Re w > 0`` from the Laplace continued fraction (modified Lentz).

    ``erfc(w) = e^{-w^2}/sqrt(pi) / (w + (1/2)/(w + 1/(w + (3/2)/(w + ...))))``.
    """
    tiny = 1e-300
    f = w
    C, D = f, 0.0
    for k in range(1, 500):
        a = 0.5 * k
        D = w + a * D
        D = tiny if D == 0 else D
        C = w + a / C
        C = tiny if C == 0 else C
        D = 1.0 / D
        delta = C * D
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return _exp_checked(-w * w) / (math.sqrt(math.pi) * f)


def _erf_strip(x: float, y: float) -> complex:
    """``erf(x + iy)`` for ``x >= 0``, ``y >= 0`` by the exponentially convergent
    series of Abramowitz and Stegun 7.1.29; terms are scaled in log space."""
    xy = x * y
    # (1 - cos 2xy)/x and sin(2xy)/x written through sinc so x -> 0 is exact
    s1 = 2.0 * y * math.sin(xy) * np.sinc(xy / math.pi)
    s2 = 2.0 * y * np.sinc(2.0 * xy / math.pi)
    e = math.exp(-x * x)
    re = math.erf(x) + e / (2.0 * math.pi) * s1
    im = e / (2.0 * math.pi) * s2
    c2, sn2 = math.cos(2 * xy), math.sin(2 * xy)
    kmax = int(2.0 * y + 14.0)
    for k in range(1, kmax + 1):
        base = -0.25 * k * k - x * x
        if base + k * y > _EXP_MAX:
            raise NumericalError("erf value overflows double precision", w_exponent=base + k * y)
        ep = math.exp(base + k * y)
        em = math.exp(base - k * y)
        ch = 0.5 * (ep + em)
        sh = 0.5 * (ep - em)
        e0 = math.exp(base)
        denom = k * k + 4.0 * x * x
        f = 2.0 * x * e0 - 2.0 * x * ch * c2 + k * sh * sn2
        g = 2.0 * x * ch * sn2 + k * sh * c2
        re += 2.0 / math.pi * f / denom
        im += 2.0 / math.pi * g / denom
    return complex(re, im)


def _erf_far(w: complex) -> complex:
    """Continuation used outside the series disk (valid everywhere)."""
    if w.real < 0:
        return -_erf_far(-w)
    if w.imag < 0:
        return _erf_far(w.conjugate()).conjugate()
    if w.real >= _CF_MIN_RE:
        return 1.0 - _erfc_continued_fraction(w)
    return _erf_strip(w.real, w.imag)


def erf_complex(w: complex) -> complex:
    """Entire error function for ``|w| <= 30``.

    Accuracy is ``1e-12`` absolute where ``|erf(w)| <= 1`` and relative elsewhere;
    values beyond the double range (far along the imaginary direction) raise
    :class:`NumericalError`.
    """
    w = complex(w)
    r = abs(w)
    if not math.isfinite(r) or r > _MAX_ABS:
        raise DomainError(f"erf_complex is defined here for |w| <= {_MAX_ABS}")
    if r <= _SERIES_RADIUS:
        return _erf_series(w)
    return _erf_far(w)


@dataclass(frozen=True)
class KernelEvaluation:
    z1: complex
    z2: complex
    w1: complex
    w2: complex
    value: complex


def _same(a: complex, b: complex, tol: float) -> bool:
    return a == b if tol == 0 else abs(a - b) <= tol


def ginibre_kernel(z1: complex, z2: complex, w1: complex, w2: complex, tol: float = 1e-12) -> complex:
    """Limiting kernel at base points ``z1, z2`` and microscopic coordinates ``w1, w2``.

    ``tol`` governs the equality tests on base points and on ``|z1| = 1``;
    ``tol = 0`` compares exactly.
    """
    z1, z2, w1, w2 = complex(z1), complex(z2), complex(w1), complex(w2)
    if not _same(z1, z2, tol):
        return 0j
    a = abs(z1)
    gauss = cmath.exp(-0.5 * abs(w1) ** 2 - 0.5 * abs(w2) ** 2 + w1 * w2.conjugate())
    if _same(a, 1.0, tol):
        arg = -math.sqrt(2.0) * (z1 * w2.conjugate() + w1 * z2.conjugate())
        return (1.0 + erf_complex(arg)) * gauss / (2.0 * math.pi)
    if a > 1.0:
        return 0j
    return gauss / math.pi


def kernel_evaluation(z1, z2, w1, w2, tol: float = 1e-12) -> KernelEvaluation:
    return KernelEvaluation(complex(z1), complex(z2), complex(w1), complex(w2), ginibre_kernel(z1, z2, w1, w2, tol))


def kpoint_density(z: Sequence[complex], w: Sequence[complex], tol: float = 1e-12) -> float:
    """``det[K(z_i, z_j; w_i, w_j)]_{i,j<=k}``; real and non-negative up to ``1e-10``."""
    z = [complex(v) for v in z]
    w = [complex(v) for v in w]
    if len(z) != len(w) or not z:
        raise DomainError("z and w must be non-empty lists of equal length")
    k = len(z)
    K = np.empty((k, k), dtype=complex)
    for i in range(k):
        for j in range(k):
            K[i, j] = ginibre_kernel(z[i], z[j], w[i], w[j], tol)
    det = complex(np.linalg.det(K))
    if abs(det.imag) > 1e-10:
        raise NumericalError("k-point density has an imaginary residue", residue=det.imag)
    if det.real < -1e-10:
        raise NumericalError("k-point density is negative", value=det.real)
    return det.real
