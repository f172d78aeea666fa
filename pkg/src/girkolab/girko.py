"""Girko's Hermitization formula and the five-range eta decomposition.

For a rescaled test function ``f`` and any square ``X``,

    sum_i f(sigma_i) = (1/4 pi) int Lap f(z) log|det H^z| d^2z,

and with ``log|det H^z| = log|det(H^z - iT)| - 2n int_0^T <Im G^z(i eta)> d eta``
the centred linear statistic ``(1/n) sum f(sigma_i) - (1/pi) int_D f`` splits as

    J_T + I_0^{eta0} + I_{eta0}^{eta1} + I_{eta1}^T + I_T^inf

where each ``I`` is ``-(1/2 pi) int Lap f int (<Im G> - Im m) d eta`` over its
eta-range, and ``I_T^inf = (1/2 pi) int Lap f int_T^inf (Im m - 1/(1+eta))``.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dyson import counterterm_tail_batch, im_m
from .ensembles import RandomMatrix
from .errors import AccuracyError, ConfigurationError, DomainError
from .hermitization import (
    DEGENERACY_THRESHOLD,
    LOG_FLOOR,
    SpectralData,
    complex_spectrum,
    log_abs_det_batch,
    singular_values,
    singular_values_batch,
)
from .quadrature import EtaGrid, PolarGrid, gauss_legendre
from .testfunctions import RescaledTestFunction

__all__ = [
    "Scales",
    "RegimeDecomposition",
    "GirkoResult",
    "DEFAULT_GIRKO_GRID",
    "DEFAULT_DECOMPOSE_GRID",
    "DEFAULT_ETA_GRID",
    "linear_statistic",
    "girko_logdet",
    "decompose",
    "compute_I_eps",
    "error_term",
]

DEFAULT_GIRKO_GRID = PolarGrid(127, 2048)
DEFAULT_DECOMPOSE_GRID = PolarGrid(63, 128)
DEFAULT_ETA_GRID = EtaGrid(40)
SYMBOLIC_T_EXPONENT = 100
_CHUNK = 256


@dataclass(frozen=True)
class Scales:
    """``eta0 = n^{-1-eps}``, ``eta1 = n^{-1+eps}`` and the upper cut ``T``.

    ``symbolic_T`` selects ``T = n^100``; the eta-quadrature then stops at
    ``T_numeric = n^3`` and the neglected range is bounded in the error budget.
    """

    n: int
    epsilon: float
    T: Optional[float] = None
    symbolic_T: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("scales need n >= 2")
        if not (0.0 <= self.epsilon < 1.0):
            raise DomainError("epsilon must lie in [0, 1)")
        if self.symbolic_T:
            try:
                T = float(self.n) ** SYMBOLIC_T_EXPONENT
            except OverflowError as exc:
                raise DomainError("n^100 overflows double precision") from exc
            object.__setattr__(self, "T", T)
        elif self.T is None:
            object.__setattr__(self, "T", float(self.n) ** 3)
        if not self.T > self.eta1 or self.T < 10:
            raise DomainError("T must exceed eta1 and be at least 10")

    @property
    def eta0(self) -> float:
        return float(self.n) ** (-1.0 - self.epsilon)

    @property
    def eta1(self) -> float:
        return float(self.n) ** (-1.0 + self.epsilon)

    @property
    def T_numeric(self) -> float:
        return min(self.T, float(self.n) ** 3) if self.symbolic_T else self.T

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "eta0": self.eta0,
            "eta1": self.eta1,
            "T": self.T,
            "T_numeric": self.T_numeric,
            "T_symbolic": f"n^{SYMBOLIC_T_EXPONENT}" if self.symbolic_T else None,
        }


_TERMS = ("J_T", "I_0_eta0", "I_eta0_eta1", "I_eta1_T", "I_T_inf")


@dataclass(frozen=True)
class RegimeDecomposition:
    J_T: float
    I_0_eta0: float
    I_eta0_eta1: float
    I_eta1_T: float
    I_T_inf: float
    lhs_direct: float
    quad_error: float
    scales: Scales
    seed: Optional[int] = None
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def total(self) -> float:
        # fixed summation order
        return self.J_T + self.I_0_eta0 + self.I_eta0_eta1 + self.I_eta1_T + self.I_T_inf

    @property
    def defect(self) -> float:
        return self.total - self.lhs_direct

    def to_json(self) -> dict:
        return {
            "J_T": self.J_T,
            "I_0_eta0": self.I_0_eta0,
            "I_eta0_eta1": self.I_eta0_eta1,
            "I_eta1_T": self.I_eta1_T,
            "I_T_inf": self.I_T_inf,
            "lhs_direct": self.lhs_direct,
            "quad_error": self.quad_error,
            "scales": self.scales.to_dict(),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class GirkoResult:
    value: float
    error_estimate: float
    degenerate_points: int
    grid: tuple


def _sigmas(sigmas) -> np.ndarray:
    if isinstance(sigmas, SpectralData):
        if sigmas.sigmas is None:
            raise DomainError("SpectralData has no eigenvalues")
        return np.asarray(sigmas.sigmas)
    if isinstance(sigmas, RandomMatrix):
        return complex_spectrum(sigmas).sigmas
    return np.asarray(sigmas, dtype=complex)


def linear_statistic(sigmas, f: RescaledTestFunction) -> float:
    """``(1/n) sum_i f(sigma_i) - (1/pi) int_D f`` with ``n`` the number of eigenvalues."""
    sig = _sigmas(sigmas)
    if f.is_zero:
        return 0.0
    return float(np.sum(f(sig))) / sig.size - f.disk_integral() / math.pi


def _require_resolution(grid: PolarGrid, f: RescaledTestFunction):
    if not grid.resolves(f.radius):
        raise ConfigurationError(
            f"z-grid {grid.n_radial}x{grid.n_angular} does not resolve the support "
            "(mean spacing must be at most 1/16 of the support radius)"
        )


def girko_logdet(X: RandomMatrix, f: RescaledTestFunction, zgrid: Optional[PolarGrid] = None,
                 method: str = "hessenberg", full_output: bool = False):
    """``(1/4 pi) int Lap f(z) log|det H^z| d^2z`` on a polar grid; equals ``sum_i f(sigma_i)``.

    Nodes where ``H^z`` is numerically singular (``lambda_1 < 1e-14``) are dropped
    and their weighted contribution at the log floor is added to the error estimate.
    """
    grid = zgrid or DEFAULT_GIRKO_GRID
    if f.is_zero:
        res = GirkoResult(0.0, 0.0, 0, (grid.n_radial, grid.n_angular))
        return res if full_output else 0.0
    _require_resolution(grid, f)
    nodes = grid.nodes(f)
    lap = f.laplacian(nodes.z)
    L, piv = log_abs_det_batch(X, nodes.z, method=method)
    # a small pivot flags a candidate; confirm with the smallest singular value
    suspects = np.nonzero(piv < 1e-10)[0]
    bad = np.zeros(nodes.z.size, bool)
    for k in suspects:
        if singular_values(X, nodes.z[k]).lambdas[0] < DEGENERACY_THRESHOLD:
            bad[k] = True
    vals = np.where(bad, 0.0, lap * L) / (4.0 * math.pi)
    q, qr, qa = nodes.estimates(vals)
    err = max(abs(q - qr), abs(q - qa))
    if bad.any():
        err += float(np.sum(np.abs(nodes.weights[bad] * lap[bad]))) * 2 * X.n * abs(math.log(LOG_FLOOR)) / (4 * math.pi)
    res = GirkoResult(q, err, int(bad.sum()), (grid.n_radial, grid.n_angular))
    return res if full_output else q


class _Plan:
    """Deterministic ingredients of :func:`decompose` shared by all samples."""

    def __init__(self, f: RescaledTestFunction, scales: Scales, zgrid: PolarGrid, etagrid: EtaGrid):
        self.nodes = zgrid.nodes(f)
        self.lap = f.laplacian(self.nodes.z)
        keep = self.lap != 0.0
        self.keep = keep
        z = self.nodes.z[keep]
        self.z = z
        self.w = self.nodes.weights[keep] * self.lap[keep]
        self.w_r = self.nodes.radial_half[keep] * self.lap[keep]
        self.w_a = self.nodes.angular_half[keep] * self.lap[keep]
        self.mid = etagrid.nodes(scales.eta0, scales.eta1)
        self.up = etagrid.nodes(scales.eta1, scales.T_numeric)
        az, inv = np.unique(np.abs(z), return_inverse=True)
        m_mid = im_m(az[:, None], self.mid.eta[None, :])
        m_up = im_m(az[:, None], self.up.eta[None, :])
        x, wx = gauss_legendre(32)
        m_low = im_m(az[:, None], scales.eta0 * x[None, :]) @ (scales.eta0 * wx)
        tail = counterterm_tail_batch(az, scales.T_numeric)
        self.m_low = m_low[inv]
        self.m_mid = (m_mid @ self.mid.weights)[inv]
        self.m_mid_half = (m_mid @ self.mid.half_weights)[inv]
        self.m_up = (m_up @ self.up.weights)[inv]
        self.m_up_half = (m_up @ self.up.half_weights)[inv]
        self.tail = tail[inv]
        self.disk = f.disk_integral() / math.pi
        self.shape = (zgrid.n_radial, zgrid.n_angular)


_PLANS: "OrderedDict[tuple, _Plan]" = OrderedDict()


def _plan(f, scales, zgrid, etagrid) -> _Plan:
    key = (f, scales, zgrid, etagrid)
    plan = _PLANS.get(key)
    if plan is None:
        plan = _Plan(f, scales, zgrid, etagrid)
        _PLANS[key] = plan
        while len(_PLANS) > 8:
            _PLANS.popitem(last=False)
    else:
        _PLANS.move_to_end(key)
    return plan


def _avg_im_integral(lam2, eta_nodes, weights_list):
    """``int <Im G> d eta`` against each weight vector; ``lam2`` has shape ``(K, n)``."""
    out = [np.empty(lam2.shape[0]) for _ in weights_list]
    eta = eta_nodes.eta
    for s in range(0, lam2.shape[0], _CHUNK):
        block = lam2[s : s + _CHUNK]
        vals = np.mean(eta[None, :, None] / (block[:, None, :] + (eta * eta)[None, :, None]), axis=2)
        for o, wts in zip(out, weights_list):
            o[s : s + _CHUNK] = vals @ wts
    return out


def _spectra(X, plan):
    lam = singular_values_batch(X, plan.z)
    return lam, lam * lam


def _mid_node(lam2, plan):
    g_mid, g_mid_half = _avg_im_integral(lam2, plan.mid, [plan.mid.weights, plan.mid.half_weights])
    return g_mid - plan.m_mid, g_mid_half - plan.m_mid_half


def decompose(X: RandomMatrix, f: RescaledTestFunction, scales: Scales,
              zgrid: Optional[PolarGrid] = None, etagrid: Optional[EtaGrid] = None,
              check: bool = True) -> RegimeDecomposition:
    """Compute the five eta-range contributions and the directly evaluated statistic.

    ``quad_error`` bounds the identity defect and is the sum of
    (a) the z-quadrature error of the log-determinant part, known exactly on the
    grid because Girko's identity is exact, (b) the same for the deterministic
    ``Im m`` part, whose exact value is the disk integral, (c) the embedded
    half-rule difference of every eta-trapezoid, and (d) a rounding floor.
    With ``check``, an estimate above ``1e-2 |lhs_direct| + 1e-6`` raises
    :class:`AccuracyError` carrying the decomposition.
    """
    zgrid = zgrid or DEFAULT_DECOMPOSE_GRID
    etagrid = etagrid or DEFAULT_ETA_GRID
    if f.n != scales.n or (isinstance(X, RandomMatrix) and X.n != scales.n):
        raise ConfigurationError("test function, matrix and scales must share n")
    seed = getattr(X, "seed", None)
    if f.is_zero:
        return RegimeDecomposition(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, scales, seed,
                                   {"grid": (zgrid.n_radial, zgrid.n_angular), "eta_per_decade": etagrid.per_decade})
    _require_resolution(zgrid, f)
    plan = _plan(f, scales, zgrid, etagrid)
    n = X.n
    lam, lam2 = _spectra(X, plan)
    c = 1.0 / (2.0 * math.pi)

    J_node = np.sum(np.log1p((lam / scales.T) ** 2), axis=1) / (4.0 * math.pi * n)
    # closed form of int_0^eta0 <Im G>; zero modes use the log floor
    lf = np.maximum(lam, LOG_FLOOR)
    ratio = math.log(scales.eta0) - np.log(lf)
    terms = 2.0 * np.maximum(ratio, 0.0) + np.log1p(np.exp(-2.0 * np.abs(ratio)))
    g_low = np.sum(terms, axis=1) / (2.0 * n)
    I0_node = -c * (g_low - plan.m_low)
    mid_node, mid_half = _mid_node(lam2, plan)
    g_up, g_up_half = _avg_im_integral(lam2, plan.up, [plan.up.weights, plan.up.half_weights])
    up_node = -c * (g_up - plan.m_up)
    up_half = -c * (g_up_half - plan.m_up_half)
    mid_node, mid_half = -c * mid_node, -c * mid_half
    tail_node = c * plan.tail

    w = plan.w
    J_T = float(np.dot(w, J_node))
    I_0 = float(np.dot(w, I0_node))
    I_mid = float(np.dot(w, mid_node))
    I_up = float(np.dot(w, up_node))
    I_tail = float(np.dot(w, tail_node))

    sig = complex_spectrum(X).sigmas
    sum_f = float(np.sum(f(sig)))
    lhs = sum_f / n - plan.disk

    # (a) log-determinant part against the exact eigenvalue sum
    logdet = 2.0 * np.sum(np.log(lf), axis=1) / (4.0 * math.pi * n)
    err_logdet = abs(float(np.dot(w, logdet)) - sum_f / n)
    # (b) deterministic part against the exact disk integral
    m_node = c * (plan.m_low + plan.m_mid + plan.m_up + plan.tail)
    err_m = abs(float(np.dot(w, m_node)) + plan.disk)
    # (c) eta-trapezoids: full rule against the embedded half rule
    err_eta = abs(float(np.dot(w, mid_node - mid_half))) + abs(float(np.dot(w, up_node - up_half)))
    # neglected [T_numeric, T] when T is symbolic: |<Im G> - Im m| <= (lam_max^2 + 3)/eta^3
    err_trunc = 0.0
    if scales.symbolic_T:
        err_trunc = c * f.laplacian_l1 * (float(lam2.max()) + 3.0) / (2.0 * scales.T_numeric**2)
    scale = float(np.sum(np.abs(w) * (np.abs(J_node) + np.abs(I0_node) + np.abs(mid_node) + np.abs(up_node)
                                      + np.abs(tail_node))))
    err_round = 1e-13 * scale + 1e-15
    degenerate = int(np.sum(lam[:, 0] < DEGENERACY_THRESHOLD))
    quad_error = err_logdet + err_m + err_eta + err_trunc + err_round

    sub = {
        "radial_half": float(np.dot(plan.w_r, logdet)) - sum_f / n,
        "angular_half": float(np.dot(plan.w_a, logdet)) - sum_f / n,
    }
    meta = {
        "grid": plan.shape,
        "eta_per_decade": etagrid.per_decade,
        "z_nodes": int(plan.z.size),
        "eta_nodes": (int(plan.mid.eta.size), int(plan.up.eta.size)),
        "error_parts": {"logdet": err_logdet, "deterministic": err_m, "eta": err_eta,
                        "truncation": err_trunc, "rounding": err_round},
        "embedded_logdet_errors": sub,
        "degenerate_points": degenerate,
        "sample_index": getattr(X, "sample_index", None),
        "sum_f": sum_f,
    }
    d = RegimeDecomposition(J_T, I_0, I_mid, I_up, I_tail, lhs, quad_error, scales, seed, meta)
    if check and quad_error > 1e-2 * abs(lhs) + 1e-6:
        raise AccuracyError(
            f"decomposition quadrature error {quad_error:.3e} exceeds 1e-2*|lhs_direct| + 1e-6",
            diagnostics={"decomposition": d, **meta["error_parts"]},
        )
    return d


def compute_I_eps(X: RandomMatrix, f: RescaledTestFunction, scales: Scales,
                  zgrid: Optional[PolarGrid] = None, etagrid: Optional[EtaGrid] = None) -> float:
    """``I_{eta0}^{eta1}`` alone, evaluated exactly as in :func:`decompose`."""
    zgrid = zgrid or DEFAULT_DECOMPOSE_GRID
    etagrid = etagrid or DEFAULT_ETA_GRID
    if f.is_zero:
        return 0.0
    _require_resolution(zgrid, f)
    plan = _plan(f, scales, zgrid, etagrid)
    _, lam2 = _spectra(X, plan)
    mid_node, _ = _mid_node(lam2, plan)
    mid_node = -(1.0 / (2.0 * math.pi)) * mid_node
    return float(np.dot(plan.w, mid_node))


def error_term(d: RegimeDecomposition, full_output: bool = False):
    """``E_eps = lhs_direct - I_{eta0}^{eta1}``.

    With ``full_output`` returns ``(E, E_alt, difference)`` where ``E_alt`` is the
    sum of the four remaining terms.
    """
    e = d.lhs_direct - d.I_eta0_eta1
    alt = d.J_T + d.I_0_eta0 + d.I_eta1_T + d.I_T_inf
    if full_output:
        return e, alt, e - alt
    return e
