"""Nested quadrature rules for the z-plane and the eta-axis.

z-plane: a polar product rule centred on the test function's base point, Fejer
type-2 in the radius times the periodic trapezoid in the angle.  Both factors
are nested (dropping every other node gives the next coarser rule), which
yields cheap embedded error estimates.

eta-axis: end-corrected trapezoid in ``log eta`` with a fixed number of points per decade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from .errors import ConfigurationError

__all__ = ["fejer2", "gauss_legendre", "PolarGrid", "ZNodes", "EtaGrid", "EtaNodes"]


@lru_cache(maxsize=64)
def fejer2(npts: int) -> Tuple[np.ndarray, np.ndarray]:
    """Fejer type-2 nodes and weights on ``[0, 1]`` (``npts`` odd interior Chebyshev nodes)."""
    if npts < 1 or npts % 2 == 0:
        raise ConfigurationError("Fejer-2 rule needs an odd number of nodes")
    N1 = npts + 1
    k = np.arange(1, npts + 1)
    th = k * math.pi / N1
    j = np.arange(1, N1 // 2 + 1)
    s = np.sin(np.outer(th, 2 * j - 1)) / (2 * j - 1)
    w = 4.0 * np.sin(th) / N1 * s.sum(axis=1)
    x = np.cos(th)
    order = np.argsort(x)
    nodes = 0.5 * (x[order] + 1.0)
    weights = 0.5 * w[order]
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=64)
def gauss_legendre(npts: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class ZNodes:
    """Flattened nodes of a polar rule with the weights of the embedded coarser rules."""

    z: np.ndarray
    weights: np.ndarray
    radial_half: np.ndarray  # weights of the rule with every other radius
    angular_half: np.ndarray  # weights of the rule with every other angle
    shape: Tuple[int, int]

    def integrate(self, values, weights=None) -> float:
        w = self.weights if weights is None else weights
        return float(np.dot(w, values))

    def estimates(self, values) -> Tuple[float, float, float]:
        """(full rule, radial-half rule, angular-half rule)."""
        return (self.integrate(values), self.integrate(values, self.radial_half),
                self.integrate(values, self.angular_half))

    def error_estimate(self, values) -> float:
        q, qr, qa = self.estimates(values)
        return max(abs(q - qr), abs(q - qa))


@dataclass(frozen=True)
class PolarGrid:
    """Polar product rule over the support disk ``|z - z0| <= rho`` of a rescaled test function.

    ``n_radial`` must be ``2^k - 1`` and ``n_angular`` even so both factors nest.
    """

    n_radial: int = 127
    n_angular: int = 2048
    offset: float = 0.5

    def __post_init__(self):
        if self.n_radial < 3 or (self.n_radial + 1) & self.n_radial:
            raise ConfigurationError("n_radial must be of the form 2^k - 1 with k >= 2")
        if self.n_angular < 4 or self.n_angular % 2:
            raise ConfigurationError("n_angular must be even and >= 4")

    @property
    def size(self) -> int:
        return self.n_radial * self.n_angular

    def refined(self) -> "PolarGrid":
        return PolarGrid(2 * self.n_radial + 1, 2 * self.n_angular, self.offset)

    def spacing(self, rho: float) -> float:
        """Mean node spacing ``sqrt(area / nodes)`` over the disk of radius ``rho``."""
        return rho * math.sqrt(math.pi / self.size)

    def resolves(self, rho: float, fraction: float = 1.0 / 16) -> bool:
        return self.spacing(rho) <= fraction * rho

    def nodes(self, g) -> ZNodes:
        """Nodes for the support disk of ``g`` (a rescaled test function)."""
        return self.nodes_for(complex(g.z0), float(g.radius))

    def nodes_for(self, z0: complex, rho: float) -> ZNodes:
        r, wr = fejer2(self.n_radial)
        na = self.n_angular
        th = 2 * math.pi * (np.arange(na) + self.offset) / na
        wt = np.full(na, 2 * math.pi / na)
        z = z0 + rho * np.outer(r, np.exp(1j * th))
        w = np.outer(rho * rho * r * wr, wt)
        # radial half: nodes 1, 3, 5, ... (0-based) form the Fejer-2 rule of (N-1)/2 points
        rh, wrh = fejer2((self.n_radial - 1) // 2)
        wr_half = np.zeros_like(wr)
        wr_half[1::2] = wrh
        w_r = np.outer(rho * rho * r * wr_half, wt)
        wt_half = np.zeros(na)
        wt_half[0::2] = 4 * math.pi / na
        w_a = np.outer(rho * rho * r * wr, wt_half)
        return ZNodes(z.ravel(), w.ravel(), w_r.ravel(), w_a.ravel(), (self.n_radial, na))


@dataclass(frozen=True)
class EtaNodes:
    eta: np.ndarray
    weights: np.ndarray
    half_weights: np.ndarray

    def integrate(self, values, axis=-1):
        return np.tensordot(values, self.weights, axes=([axis], [0]))

    def integrate_half(self, values, axis=-1):
        return np.tensordot(values, self.half_weights, axes=([axis], [0]))


def _gregory(m: int, h: float) -> np.ndarray:
    """Trapezoid weights with third-order Gregory end corrections (error ``O(h^4)``); ``m >= 6``."""
    w = np.full(m + 1, h)
    ends = h * np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])
    w[:3] = ends
    w[-3:] = ends[::-1]
    return w


@dataclass(frozen=True)
class EtaGrid:
    """End-corrected trapezoid rule in ``log eta`` with ``per_decade`` intervals per decade.

    The interval count is at least 12 and even, so the embedded rule on every
    other node carries the same end corrections.
    """

    per_decade: int = 40

    def __post_init__(self):
        if self.per_decade < 2:
            raise ConfigurationError("per_decade must be at least 2")

    def refined(self) -> "EtaGrid":
        return EtaGrid(2 * self.per_decade)

    def nodes(self, a: float, b: float) -> EtaNodes:
        """Nodes on ``[a, b]`` with ``0 < a <= b``."""
        if not (0 < a <= b):
            raise ConfigurationError("eta interval must satisfy 0 < a <= b")
        if a == b:
            return EtaNodes(np.array([a]), np.zeros(1), np.zeros(1))
        la, lb = math.log(a), math.log(b)
        m = max(12, math.ceil(self.per_decade * (lb - la) / math.log(10)))
        m += m % 2
        s = np.linspace(la, lb, m + 1)
        eta = np.exp(s)
        eta[0], eta[-1] = a, b
        h = (lb - la) / m
        wt = _gregory(m, h)
        wh = np.zeros(m + 1)
        wh[0::2] = _gregory(m // 2, 2 * h)
        # d eta = eta d(log eta)
        return EtaNodes(eta, wt * eta, wh * eta)
