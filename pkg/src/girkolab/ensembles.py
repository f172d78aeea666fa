"""I.i.d. and Ginibre matrix ensembles with counter-based reproducible sampling.

Every entry ``x_ab`` of a sampled matrix is ``n**-0.5 * chi`` where ``chi`` is
drawn from a :class:`DistributionSpec`.  Randomness comes from a Philox
counter-based stream keyed by ``(seed, sample_index)``; entry ``e = a*n + b``
always consumes the two 64-bit words at stream positions ``2e`` and ``2e+1``,
so a single entry can be regenerated without replaying its predecessors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from dataclasses import field as dc_field
from typing import Dict, Optional

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "DistributionSpec",
    "RandomMatrix",
    "MomentEstimate",
    "MomentReport",
    "KINDS",
    "get_distribution",
    "sample_matrix",
    "sample_entry",
    "draw_chi",
    "validate_distribution",
]

_TWO_PI = 2.0 * math.pi
_INV_2_53 = 2.0**-53


def _gauss_real_abs_moment(p: int) -> float:
    return 2.0 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)


# Exact E|chi|^p for each kind; these double as the bounds C_p.
_ABS_MOMENTS = {
    "gaussian-real": _gauss_real_abs_moment,
    "gaussian-complex": lambda p: math.gamma(1 + p / 2),
    "rademacher-real": lambda p: 1.0,
    "uniform-complex": lambda p: 2.0 * 2.0 ** (p / 2) / (p + 2),
    "two-point-complex": lambda p: 1.0,
}

_FIELDS = {
    "gaussian-real": "real",
    "gaussian-complex": "complex",
    "rademacher-real": "real",
    "uniform-complex": "complex",
    "two-point-complex": "complex",
}

KINDS = tuple(_FIELDS)


@dataclass(frozen=True)
class DistributionSpec:
    """Declarative description of the entry distribution ``chi``.

    The moment fields are *claims*; :func:`validate_distribution` checks them
    empirically.
    """

    kind: str
    field: str
    claimed_mean: complex = 0.0
    claimed_abs2: float = 1.0
    claimed_square: complex = 0.0
    moment_bounds: Dict[int, float] = dc_field(default_factory=dict, compare=False, hash=False)

    @property
    def is_complex(self) -> bool:
        return self.field == "complex"

    @property
    def is_ginibre(self) -> bool:
        return self.kind.startswith("gaussian")


def get_distribution(kind: str) -> DistributionSpec:
    """Return the :class:`DistributionSpec` registered under ``kind``."""
    if isinstance(kind, DistributionSpec):
        return kind
    if kind not in _FIELDS:
        raise ConfigurationError(
            f"unsupported distribution kind {kind!r}; expected one of {', '.join(KINDS)}"
        )
    fld = _FIELDS[kind]
    bounds = {p: float(_ABS_MOMENTS[kind](p)) for p in range(1, 9)}
    return DistributionSpec(
        kind=kind,
        field=fld,
        claimed_mean=0.0,
        claimed_abs2=1.0,
        claimed_square=0.0 if fld == "complex" else 1.0,
        moment_bounds=bounds,
    )


@dataclass(frozen=True, eq=False)
class RandomMatrix:
    """An ``n x n`` sample together with its provenance."""

    n: int
    entries: np.ndarray
    dist: DistributionSpec
    seed: int
    sample_index: int

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def is_complex(self) -> bool:
        return self.dist.is_complex

    def provenance(self) -> dict:
        return {"dist": self.dist.kind, "seed": self.seed, "sample_index": self.sample_index}

    @classmethod
    def from_array(cls, entries, dist: str = "gaussian-complex", seed: int = 0, sample_index: int = 0):
        """Wrap a deterministic matrix (used for closed-form checks)."""
        arr = np.array(entries, dtype=complex if np.iscomplexobj(entries) else float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DomainError("matrix must be square")
        return cls(arr.shape[0], arr, get_distribution(dist), seed, sample_index)


def _stream_key(seed: int, sample_index: int) -> np.ndarray:
    if seed < 0 or sample_index < 0:
        raise DomainError("seed and sample_index must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(sample_index),))
    return ss.generate_state(2, np.uint64)


def _words(seed: int, sample_index: int, count: int, start: int = 0) -> np.ndarray:
    """``count`` entries' worth of raw words (shape ``(count, 2)``) from entry ``start`` on."""
    key = _stream_key(seed, sample_index)
    first_word = 2 * start
    block, offset = divmod(first_word, 4)
    bitgen = np.random.Philox(key=key, counter=block)
    raw = bitgen.random_raw(offset + 2 * count)
    return raw[offset:].reshape(count, 2)


def _transform(kind: str, words: np.ndarray) -> np.ndarray:
    w1, w2 = words[:, 0], words[:, 1]
    u1 = ((w1 >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53  # in (0, 1)
    u2 = (w2 >> np.uint64(11)).astype(np.float64) * _INV_2_53  # in [0, 1)
    if kind == "gaussian-real":
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)
    if kind == "gaussian-complex":
        return np.sqrt(-np.log(u1)) * np.exp(1j * _TWO_PI * u2)
    if kind == "rademacher-real":
        return np.where(w1 >> np.uint64(63), 1.0, -1.0)
    if kind == "uniform-complex":
        return np.sqrt(2.0 * u1) * np.exp(1j * _TWO_PI * u2)
    if kind == "two-point-complex":
        re = np.where(w1 >> np.uint64(63), 1.0, -1.0)
        im = np.where(w2 >> np.uint64(63), 1.0, -1.0)
        return (re + 1j * im) / math.sqrt(2.0)
    raise ConfigurationError(f"unsupported distribution kind {kind!r}")


def draw_chi(dist, count: int, seed: int, sample_index: int = 0, start: int = 0) -> np.ndarray:
    """Unscaled draws of ``chi`` for entries ``start .. start+count-1`` of a stream."""
    dist = get_distribution(dist)
    return _transform(dist.kind, _words(seed, sample_index, count, start))


def sample_matrix(n: int, dist, seed: int, sample_index: int = 0) -> RandomMatrix:
    """Draw the ``n x n`` matrix with entries ``n**-0.5 * chi``; deterministic in all inputs."""
    dist = get_distribution(dist)
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError(f"matrix dimension must be a positive integer, got {n!r}")
    chi = draw_chi(dist, n * n, seed, sample_index)
    entries = (chi / math.sqrt(n)).reshape(n, n)
    return RandomMatrix(int(n), entries, dist, int(seed), int(sample_index))


def sample_entry(n: int, dist, seed: int, sample_index: int, a: int, b: int):
    """Regenerate the single entry ``x_ab`` of :func:`sample_matrix` without the rest."""
    dist = get_distribution(dist)
    if not (0 <= a < n and 0 <= b < n):
        raise DomainError("entry index out of range")
    return draw_chi(dist, 1, seed, sample_index, start=a * n + b)[0] / math.sqrt(n)


@dataclass(frozen=True)
class MomentEstimate:
    name: str
    estimate: complex
    stderr: float
    claimed: complex
    flagged: Optional[bool]  # None when the check does not apply to this field


@dataclass(frozen=True)
class MomentReport:
    dist: str
    sample_count: int
    seed: int
    moments: Dict[str, MomentEstimate]

    @property
    def flagged(self) -> bool:
        return any(m.flagged for m in self.moments.values())


def _estimate(name, values, claimed, applicable=True, nsigma=5.0):
    count = values.size
    est = values.mean()
    stderr = float(np.sqrt(np.mean(np.abs(values - est) ** 2) / (count - 1)))
    dev = abs(est - claimed)
    if not applicable:
        flagged = None
    elif stderr == 0.0:
        flagged = bool(dev > 1e-12)
    else:
        flagged = bool(dev > nsigma * stderr)
    if np.isrealobj(values) or abs(np.imag(est)) == 0.0:
        est = float(np.real(est))
    else:
        est = complex(est)
    return MomentEstimate(name, est, stderr, claimed, flagged)


def validate_distribution(dist, sample_count: int, seed: int) -> MomentReport:
    """Empirical E chi, E|chi|^2, E chi^2, E|chi|^4 with standard errors and 5-sigma flags."""
    dist = get_distribution(dist)
    if sample_count < 1000:
        raise DomainError("validation needs at least 10^3 samples")
    chi = draw_chi(dist, sample_count, seed)
    abs2 = np.abs(chi) ** 2
    moments = {
        "mean": _estimate("mean", chi, dist.claimed_mean),
        "abs2": _estimate("abs2", abs2, dist.claimed_abs2),
        # the E chi^2 = 0 condition only constrains complex entries
        "square": _estimate("square", chi * chi, dist.claimed_square, applicable=dist.is_complex),
        "abs4": _estimate("abs4", abs2 * abs2, dist.moment_bounds[4]),
    }
    return MomentReport(dist.kind, sample_count, seed, moments)
