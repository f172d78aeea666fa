"""Radial C^2 bump functions with closed-form Laplacians and their n-rescalings.

A profile is written as ``g(w) = G(|w|^2 / R^2)`` with ``G`` supported on
``[0, 1]``; then ``Lap g = (4 / R^2) (t G''(t) + G'(t))`` at ``t = |w|^2/R^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, DomainError

__all__ = ["PROFILES", "TestFunction", "RescaledTestFunction", "rescale", "poly_bump", "gauss_bump"]

PROFILES = ("poly-bump", "gauss-bump")


def _poly(t):
    s = 1.0 - t
    return s * s * s, -3.0 * s * s, 6.0 * s


def _gauss_factory(alpha):
    ea = math.exp(-alpha)

    def G(t):
        # e^{-alpha t} minus its second-order Taylor polynomial at t = 1
        d = t - 1.0
        e = np.exp(-alpha * t)
        g0 = e - ea * (1.0 - alpha * d + 0.5 * alpha * alpha * d * d)
        g1 = -alpha * e - ea * (-alpha + alpha * alpha * d)
        g2 = alpha * alpha * e - ea * alpha * alpha
        return g0, g1, g2

    return G


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported radial profile on the disk of radius ``radius``."""

    __test__ = False  # not a pytest class

    profile: str = "poly-bump"
    radius: float = 1.0
    amplitude: float = 1.0
    alpha: float = 4.0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigurationError(f"unknown test-function profile {self.profile!r}")
        if not self.radius > 0:
            raise ConfigurationError("support radius must be positive")
        if self.profile == "gauss-bump" and not self.alpha > 0:
            raise ConfigurationError("gauss-bump alpha must be positive")

    @classmethod
    def zero(cls, profile: str = "poly-bump") -> "TestFunction":
        return cls(profile=profile, amplitude=0.0)

    @property
    def is_zero(self) -> bool:
        return self.amplitude == 0.0

    def _G(self, t):
        if self.profile == "poly-bump":
            return _poly(t)
        return _gauss_factory(self.alpha)(t)

    def _t(self, w):
        t = np.abs(np.asarray(w)) ** 2 / self.radius**2
        return t, t < 1.0

    def __call__(self, w):
        t, inside = self._t(w)
        g0, _, _ = self._G(np.minimum(t, 1.0))
        return self.amplitude * np.where(inside, g0, 0.0)

    def laplacian(self, w):
        t, inside = self._t(w)
        tc = np.minimum(t, 1.0)
        _, g1, g2 = self._G(tc)
        lap = 4.0 / self.radius**2 * (tc * g2 + g1)
        return self.amplitude * np.where(inside, lap, 0.0)

    def profile_t(self, t):
        """``(G, G', G'')`` of the radial profile in ``t = |w|^2/R^2``, times the amplitude."""
        return tuple(self.amplitude * np.asarray(x) for x in self._G(np.asarray(t, float)))

    @cached_property
    def sup_norm(self) -> float:
        return abs(self.amplitude) * float(self._G(0.0)[0])

    @cached_property
    def integral(self) -> float:
        """``int g d^2w`` = ``pi R^2 int_0^1 G(t) dt``."""
        val, _ = integrate.quad(lambda t: self._G(t)[0], 0.0, 1.0, epsabs=0, epsrel=1e-13)
        return self.amplitude * math.pi * self.radius**2 * val

    @cached_property
    def laplacian_l1(self) -> float:
        """``||Lap g||_1`` = ``4 pi int_0^1 |t G'' + G'| dt`` (independent of R)."""

        def h(t):
            _, g1, g2 = self._G(t)
            return t * g2 + g1

        ts = np.linspace(0.0, 1.0, 2001)
        vals = h(ts)
        roots = [float(ts[i]) for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]]
        pts = []
        for r in roots:
            from scipy.optimize import brentq

            pts.append(brentq(h, r, r + 1.0 / 2000, xtol=1e-15))
        val, _ = integrate.quad(lambda t: abs(h(t)), 0.0, 1.0, points=pts or None, epsabs=0, epsrel=1e-13, limit=200)
        return abs(self.amplitude) * 4.0 * math.pi * val


def poly_bump(radius: float = 1.0) -> TestFunction:
    return TestFunction("poly-bump", radius)


def gauss_bump(radius: float = 1.0, alpha: float = 4.0) -> TestFunction:
    return TestFunction("gauss-bump", radius, alpha=alpha)


@dataclass(frozen=True)
class RescaledTestFunction:
    """``g_{z0}(z) = n g(sqrt(n) (z - z0))``."""

    __test__ = False

    base: TestFunction
    z0: complex
    n: int

    def __post_init__(self):
        if int(self.n) < 1:
            raise DomainError("n must be a positive integer")

    @property
    def scale(self) -> float:
        return math.sqrt(self.n)

    @property
    def radius(self) -> float:
        """Support radius in the z-plane."""
        return self.base.radius / self.scale

    @property
    def is_zero(self) -> bool:
        return self.base.is_zero

    def to_local(self, z):
        return self.scale * (np.asarray(z) - self.z0)

    def __call__(self, z):
        return self.n * self.base(self.to_local(z))

    def laplacian(self, z):
        return self.n**2 * self.base.laplacian(self.to_local(z))

    @property
    def laplacian_l1(self) -> float:
        return self.n * self.base.laplacian_l1

    @property
    def sup_norm(self) -> float:
        return self.n * self.base.sup_norm

    def angular_fraction(self, r):
        """Fraction of the circle ``|z - z0| = r`` lying inside the open unit disk."""
        r = np.asarray(r, float)
        a = abs(self.z0)
        out = np.empty_like(r)
        if a == 0.0:
            out[...] = np.where(r < 1.0, 1.0, 0.0)
            return out
        with np.errstate(divide="ignore", invalid="ignore"):
            c = (1.0 - a * a - r * r) / (2.0 * r * a)
        c = np.where(r == 0, np.where(a < 1, np.inf, -np.inf), c)
        frac = 1.0 - np.arccos(np.clip(c, -1.0, 1.0)) / math.pi
        return np.where(c >= 1.0, 1.0, np.where(c <= -1.0, 0.0, frac))

    def disk_integral(self, tol: float = 1e-10) -> float:
        """``int_{|z|<1} g_{z0}(z) d^2z`` by radial quadrature of the angular fraction."""
        if self.is_zero:
            return 0.0
        a, rho = abs(self.z0), self.radius
        if a + rho <= 1.0:
            return self.base.integral
        if a - rho >= 1.0:
            return 0.0
        # kinks of the angular fraction at r = |1 - a| and r = 1 + a
        pts = [p for p in (abs(1.0 - a), 1.0 + a) if 0.0 < p < rho]
        n, s = self.n, self.scale

        def integrand(r):
            t = (s * r / self.base.radius) ** 2
            g0 = float(self.base.profile_t(min(t, 1.0))[0])
            return n * g0 * 2.0 * math.pi * r * float(self.angular_fraction(np.array(r)))

        val, _ = integrate.quad(integrand, 0.0, rho, points=pts or None, epsabs=tol * self.sup_norm * rho**2,
                                epsrel=1e-12, limit=200)
        return val


def rescale(f: TestFunction, z0: complex, n: int) -> RescaledTestFunction:
    """Rescale ``f`` to the microscopic scale ``n^{-1/2}`` around ``z0``."""
    return RescaledTestFunction(f, complex(z0), int(n))
