"""Experiment configuration: parsing, validation and content hashing."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Tuple

from ..ensembles import KINDS as DIST_KINDS
from ..errors import ConfigurationError
from ..testfunctions import PROFILES

EXPERIMENT_KINDS = (
    "girko-check",
    "decompose",
    "i-eps",
    "local-law",
    "sv-tail",
    "kernel-eval",
    "universality",
    "density",
    "dyson-table",
)

# keys excluded from the content hash (they do not change results)
_UNHASHED = ("workers", "out")

_COMMON = {"kind", "seed", "workers", "out"}
_ALLOWED = {
    "girko-check": {"dist", "n_list", "samples", "z0", "test_function", "grid", "tolerance"},
    "decompose": {"dist", "n_list", "samples", "z0", "test_function", "grid", "epsilon", "symbolic_T"},
    "i-eps": {"dist", "n_list", "samples", "z0", "test_function", "grid", "epsilon"},
    "local-law": {"dist", "n_list", "samples", "z_list", "eta_list", "eta_exponents", "tau"},
    "sv-tail": {"dist", "n_list", "samples", "z", "L_list"},
    "kernel-eval": {"points"},
    "universality": {"dist", "dist_b", "n_list", "samples", "z0", "test_function", "repetitions"},
    "density": {"dist", "n_list", "samples", "bins"},
    "dyson-table": {"z_abs", "eta_list", "tau"},
}
_REQUIRED = {
    "girko-check": {"n_list", "samples"},
    "decompose": {"n_list", "samples", "epsilon"},
    "i-eps": {"n_list", "samples", "epsilon"},
    "local-law": {"n_list", "samples"},
    "sv-tail": {"n_list", "samples", "L_list"},
    "kernel-eval": {"points"},
    "universality": {"n_list", "samples", "dist_b"},
    "density": {"n_list", "samples"},
    "dyson-table": {"z_abs", "eta_list"},
}
_DEFAULTS = {
    "seed": 0,
    "dist": "gaussian-complex",
    "z0": [0.0],
    "test_function": {"profile": "poly-bump", "radius": 1.0},
    "tolerance": 1e-3,
    "symbolic_T": False,
    "tau": 0.1,
    "repetitions": 1,
    "bins": 31,
    "z": 0.0,
}
_MAX_N = 2000
_MAX_SAMPLES = 10**6


def _fail(msg):
    raise ConfigurationError(msg)


def parse_complex(v, key: str) -> complex:
    """Numbers or ``[re, im]`` pairs."""
    if isinstance(v, bool):
        _fail(f"{key}: expected a number or [re, im]")
    if isinstance(v, (int, float)):
        c = complex(v)
    elif isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        c = complex(v[0], v[1])
    else:
        _fail(f"{key}: expected a number or [re, im], got {v!r}")
    if not (math.isfinite(c.real) and math.isfinite(c.imag)):
        _fail(f"{key}: non-finite value")
    return c


def _int(v, key, lo, hi):
    if isinstance(v, bool) or not isinstance(v, int) or not (lo <= v <= hi):
        _fail(f"{key}: expected an integer in [{lo}, {hi}], got {v!r}")
    return v


def _num(v, key, lo=-math.inf, hi=math.inf, lo_open=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(f"{key}: expected a finite number, got {v!r}")
    if v < lo or v > hi or (lo_open and v == lo):
        _fail(f"{key}: {v!r} outside the legal range")
    return float(v)


def _list(v, key, minlen=1):
    if not isinstance(v, list) or len(v) < minlen:
        _fail(f"{key}: expected a list with at least {minlen} entries")
    return v


def _validate_value(kind: str, key: str, v: Any):
    if key == "seed":
        _int(v, key, 0, 2**64 - 1)
    elif key == "workers":
        _int(v, key, 1, 1024)
    elif key == "out":
        if not isinstance(v, str) or not v:
            _fail("out: expected a directory path")
    elif key in ("dist", "dist_b"):
        if v not in DIST_KINDS:
            _fail(f"{key}: unsupported distribution {v!r}")
    elif key == "n_list":
        for x in _list(v, key):
            _int(x, "n_list entry", 2 if kind in ("decompose", "i-eps") else 1, _MAX_N)
    elif key == "samples":
        lo = 100 if kind == "sv-tail" else 1
        _int(v, key, lo, _MAX_SAMPLES)
    elif key == "repetitions":
        _int(v, key, 1, 1000)
    elif key == "bins":
        _int(v, key, 1, 1001)
    elif key in ("z0", "z_list"):
        for x in _list(v, key):
            parse_complex(x, key)
    elif key == "z":
        parse_complex(v, key)
    elif key == "z_abs":
        for x in _list(v, key):
            _num(x, "z_abs entry", 0.0)
    elif key == "eta_list":
        for x in _list(v, key):
            _num(x, "eta_list entry", 0.0, lo_open=kind != "dyson-table")
    elif key == "eta_exponents":
        if not (isinstance(v, list) and len(v) == 3):
            _fail("eta_exponents: expected [lo, hi, count] (eta = n^e)")
        _num(v[0], "eta_exponents lo", -2.0, 0.0, lo_open=True)
        _num(v[1], "eta_exponents hi", v[0], 1.0)
        _int(v[2], "eta_exponents count", 2, 1000)
    elif key == "L_list":
        for x in _list(v, key):
            _num(x, "L_list entry", 0.0, 100.0)
    elif key == "epsilon":
        _num(v, key, 0.0, 0.999)
    elif key == "tolerance":
        _num(v, key, 0.0, 1.0, lo_open=True)
    elif key == "tau":
        _num(v, key, 0.0, 1.0, lo_open=True)
    elif key == "symbolic_T":
        if not isinstance(v, bool):
            _fail("symbolic_T: expected a boolean")
    elif key == "test_function":
        if not isinstance(v, dict):
            _fail("test_function: expected an object")
        extra = set(v) - {"profile", "radius", "alpha"}
        if extra:
            _fail(f"test_function: unknown keys {sorted(extra)}")
        if v.get("profile", "poly-bump") not in PROFILES:
            _fail(f"test_function.profile must be one of {PROFILES}")
        _num(v.get("radius", 1.0), "test_function.radius", 0.0, 100.0, lo_open=True)
        _num(v.get("alpha", 4.0), "test_function.alpha", 0.0, 100.0, lo_open=True)
    elif key == "grid":
        if not isinstance(v, dict):
            _fail("grid: expected an object")
        extra = set(v) - {"radial", "angular", "eta_per_decade"}
        if extra:
            _fail(f"grid: unknown keys {sorted(extra)}")
        if "radial" in v:
            r = _int(v["radial"], "grid.radial", 3, 4095)
            if (r + 1) & r:
                _fail("grid.radial must be 2^k - 1")
        if "angular" in v:
            a = _int(v["angular"], "grid.angular", 4, 1 << 16)
            if a % 2:
                _fail("grid.angular must be even")
        if "eta_per_decade" in v:
            _int(v["eta_per_decade"], "grid.eta_per_decade", 2, 10000)
    elif key == "points":
        for p in _list(v, key):
            if not isinstance(p, dict) or set(p) - {"z", "w"} or not {"z", "w"} <= set(p):
                _fail("points: each entry needs exactly 'z' and 'w' lists")
            zs, ws = _list(p["z"], "points.z"), _list(p["w"], "points.w")
            if len(zs) != len(ws) or len(zs) > 12:
                _fail("points: z and w must have equal length (at most 12)")
            for x in zs + ws:
                parse_complex(x, "points entry")
    else:  # pragma: no cover - guarded by the key check
        _fail(f"unknown key {key!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment configuration (defaults filled in)."""

    data: Dict[str, Any]

    @property
    def kind(self) -> str:
        return self.data["kind"]

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)

    def canonical(self) -> str:
        payload = {k: v for k, v in self.data.items() if k not in _UNHASHED}
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @property
    def experiment_id(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def params(self) -> Dict[str, Any]:
        return json.loads(self.canonical())


def validate_config(raw: Dict[str, Any]) -> ExperimentConfig:
    """Check keys and ranges and fill defaults; raises :class:`ConfigurationError`."""
    if not isinstance(raw, dict):
        _fail("config must be a JSON object")
    kind = raw.get("kind")
    if kind not in EXPERIMENT_KINDS:
        _fail(f"kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    allowed = _COMMON | _ALLOWED[kind]
    unknown = set(raw) - allowed
    if unknown:
        _fail(f"unknown keys for {kind}: {sorted(unknown)}")
    missing = _REQUIRED[kind] - set(raw)
    if missing:
        _fail(f"missing keys for {kind}: {sorted(missing)}")
    for key, v in raw.items():
        if key != "kind":
            _validate_value(kind, key, v)
    data = dict(raw)
    for key, v in _DEFAULTS.items():
        if key in allowed and key not in data:
            data[key] = json.loads(json.dumps(v))
    if kind == "local-law" and "eta_list" not in data and "eta_exponents" not in data:
        data["eta_exponents"] = [-0.9, 0.0, 10]
    if kind in ("local-law", "dyson-table"):
        tau = data["tau"]
        for x in data.get("z_list", []) + data.get("z_abs", []):
            if kind == "local-law" and abs(parse_complex(x, "z_list")) > 1 - tau:
                _fail("z_list entries must satisfy |z| <= 1 - tau")
    if kind == "dyson-table":
        for a in data["z_abs"]:
            for e in data["eta_list"]:
                if e == 0 and a >= 1:
                    _fail("eta = 0 requires |z| < 1")
    if kind in ("universality", "i-eps") and "z0" in data:
        for x in data["z0"]:
            if abs(parse_complex(x, "z0")) > 0.9:
                _fail("z0 entries must satisfy |z0| <= 1 - tau")
    return ExperimentConfig(data)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        _fail(f"config file not found: {p}")
    except json.JSONDecodeError as exc:
        _fail(f"config is not valid JSON: {exc}")
    return validate_config(raw)


def grids_from(config: ExperimentConfig, default_z: Tuple[int, int]):
    from ..quadrature import EtaGrid, PolarGrid

    g = config.get("grid") or {}
    return (PolarGrid(g.get("radial", default_z[0]), g.get("angular", default_z[1])),
            EtaGrid(g.get("eta_per_decade", 40)))


def test_function_from(config: ExperimentConfig):
    from ..testfunctions import TestFunction

    t = config.get("test_function") or {}
    return TestFunction(t.get("profile", "poly-bump"), float(t.get("radius", 1.0)), alpha=float(t.get("alpha", 4.0)))
