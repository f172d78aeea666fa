"""Turn a directory of JSONL records into CSV tables, exponent fits and SVG plots.

The output is a pure function of the records: rows are sorted, plots carry no
timestamp and use a fixed SVG id salt.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from ..errors import ConfigurationError, DomainError
from ..stats import fit_exponent
from .runner import SCHEMA_VERSION, _flatten, write_csv

_TERMS = ("J_T", "I_0_eta0", "I_eta0_eta1", "I_eta1_T", "I_T_inf")


class SchemaError(ConfigurationError):
    """Records of an unknown schema or malformed lines."""


@dataclass
class ReportSummary:
    out_dir: Path
    experiments: int = 0
    files: List[str] = field(default_factory=list)


def load_records(in_dir) -> List[dict]:
    in_dir = Path(in_dir)
    if not in_dir.is_dir():
        raise SchemaError(f"not a directory: {in_dir}")
    records = []
    for path in sorted(in_dir.rglob("*.jsonl")):
        for lineno, line in enumerate(path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: malformed record ({exc})") from exc
            if not isinstance(rec, dict) or rec.get("schema") != SCHEMA_VERSION:
                raise SchemaError(f"{path}:{lineno}: unsupported schema {rec.get('schema') if isinstance(rec, dict) else rec!r}")
            for key in ("experiment_id", "kind", "task_index", "payload"):
                if key not in rec:
                    raise SchemaError(f"{path}:{lineno}: missing field {key!r}")
            records.append(rec)
    return records


def _fit_row(kind, series, points) -> dict:
    pts = [(x, y) for x, y in points if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)]
    try:
        fr = fit_exponent(pts)
    except DomainError:
        return {}
    return {"kind": kind, "series": series, "slope": fr.slope, "intercept": fr.intercept, "r2": fr.r2,
            "points": len(pts)}


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else float("nan")


# ---------------------------------------------------------------- per-kind tables


def _table_default(payloads):
    return [_flatten(p) for p in payloads], [], []


def _table_sv_tail(payloads):
    rows = sorted((_flatten(p) for p in payloads), key=lambda r: (r["n"], r["L"]))
    fits, series = [], defaultdict(list)
    for r in rows:
        series[r["n"]].append((float(r["n"]) ** (-1.0 - r["L"]), r["estimate"]))
    plots = []
    for n, pts in sorted(series.items()):
        f = _fit_row("sv-tail", f"n={n}", pts)
        if f:
            fits.append(f)
        plots.append((f"n={n}", pts))
    return rows, fits, [("sv_tail", "threshold n^(-1-L)", "P(lambda_1 <= threshold)", True, plots)]


def _table_decompose(payloads):
    by_n = defaultdict(list)
    for p in payloads:
        by_n[p["n"]].append(p)
    rows = []
    for n, ps in sorted(by_n.items()):
        row = {"n": n, "samples": len(ps), "epsilon": ps[0]["scales"]["epsilon"]}
        for t in _TERMS:
            row[f"mean_abs_{t}"] = _mean([abs(p[t]) for p in ps])
        row["mean_abs_lhs_direct"] = _mean([abs(p["lhs_direct"]) for p in ps])
        row["max_abs_defect"] = max(abs(p["defect"]) for p in ps)
        row["max_quad_error"] = max(p["quad_error"] for p in ps)
        row["mean_abs_E_eps"] = _mean([abs(p["E_eps"]) for p in ps])
        row["passed"] = all(p.get("passed", False) for p in ps)
        rows.append(row)
    fits = [f for f in [_fit_row("decompose", "mean_abs_E_eps", [(r["n"], r["mean_abs_E_eps"]) for r in rows])] if f]
    plots = [(t, [(r["n"], r[f"mean_abs_{t}"]) for r in rows]) for t in _TERMS]
    plots.append(("E_eps", [(r["n"], r["mean_abs_E_eps"]) for r in rows]))
    return rows, fits, [("regimes", "n", "mean magnitude", True, plots)]


def _table_i_eps(payloads):
    by_n = defaultdict(list)
    for p in payloads:
        by_n[p["n"]].append(p["I_eps"])
    rows = [{"n": n, "samples": len(v), "mean_I_eps": _mean(v), "mean_abs_I_eps": _mean(np.abs(v)),
             "std_I_eps": float(np.std(v))} for n, v in sorted(by_n.items())]
    fits = [f for f in [_fit_row("i-eps", "mean_abs_I_eps", [(r["n"], r["mean_abs_I_eps"]) for r in rows])] if f]
    return rows, fits, [("i_eps", "n", "mean |I_eps|", True, [("I_eps", [(r["n"], r["mean_abs_I_eps"]) for r in rows])])]


def _table_local_law(payloads):
    acc = defaultdict(list)
    for p in payloads:
        for a, z in enumerate(p["z"]):
            for b, eta in enumerate(p["eta"]):
                acc[(p["n"], tuple(z), eta)].append(p["raw_averaged"][a][b])
    rows = [{"n": n, "z": json.dumps(list(z)), "eta": eta, "samples": len(v), "mean_abs_avg_error": _mean(v),
             "normalized": _mean(v) * n * eta} for (n, z, eta), v in sorted(acc.items())]
    series = defaultdict(list)
    for r in rows:
        series[f"n={r['n']} z={r['z']}"].append((r["eta"], r["mean_abs_avg_error"]))
    fits = [f for f in (_fit_row("local-law", s, pts) for s, pts in sorted(series.items())) if f]
    return rows, fits, [("local_law", "eta", "mean |<G - M>|", True, sorted(series.items()))]


def _table_girko(payloads):
    by_n = defaultdict(list)
    for p in payloads:
        by_n[p["n"]].append(p)
    rows = [{"n": n, "samples": len(ps), "max_abs_defect": max(abs(p["defect"]) for p in ps),
             "max_error_estimate": max(p["error_estimate"] for p in ps),
             "passed": all(p["passed"] for p in ps)} for n, ps in sorted(by_n.items())]
    pts = [(abs(p["sum_f"]) + 1.0, abs(p["defect"]) + 1e-300) for p in payloads]
    return rows, [], [("girko_defects", "1 + |sum f|", "|defect|", True, [("samples", sorted(pts))])]


def _table_density(payloads):
    rows = sorted((_flatten(p) for p in payloads), key=lambda r: r["n"])
    return rows, [], [("density", "n", "central density", False,
                       [("estimate", [(r["n"], r["estimate"]) for r in rows]),
                        ("1/pi", [(r["n"], 1.0 / math.pi) for r in rows])])]


def _table_universality(payloads):
    rows = sorted((_flatten(p) for p in payloads), key=lambda r: (r["n"], r["repetition"]))
    return rows, [], [("universality", "repetition", "z-score", False,
                       [("z_score", [(r["repetition"], r["z_score"]) for r in rows])])]


def _table_dyson(payloads):
    rows = sorted((_flatten(p) for p in payloads), key=lambda r: (r["z_abs"], r["eta"]))
    series = defaultdict(list)
    for r in rows:
        if r["eta"] > 0:
            series[f"|z|={r['z_abs']}"].append((r["eta"], r["v"]))
    return rows, [], [("dyson", "eta", "Im m", True, sorted(series.items()))]


_TABLES = {
    "sv-tail": _table_sv_tail,
    "decompose": _table_decompose,
    "i-eps": _table_i_eps,
    "local-law": _table_local_law,
    "girko-check": _table_girko,
    "density": _table_density,
    "universality": _table_universality,
    "dyson-table": _table_dyson,
    "kernel-eval": _table_default,
}


# ---------------------------------------------------------------- plotting


def _plot(path: Path, xlabel, ylabel, loglog, series: List[Tuple[str, list]]):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "girkolab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 4))
        for label, pts in series:
            pts = [(x, y) for x, y in pts if y is not None and (not loglog or (x > 0 and y > 0))]
            if not pts:
                continue
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", label=str(label))
        if loglog:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if series:
            ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def report(in_dir, out_dir=None) -> ReportSummary:
    """Write ``<kind>-<id>.csv``, ``<kind>-<id>-<plot>.svg`` and ``fits.csv``."""
    records = load_records(in_dir)
    out = Path(out_dir) if out_dir is not None else Path(in_dir) / "report"
    summary = ReportSummary(out)
    if not records:
        return summary
    out.mkdir(parents=True, exist_ok=True)
    groups: Dict[tuple, list] = defaultdict(list)
    for rec in records:
        groups[(rec["kind"], rec["experiment_id"])].append(rec)
    all_fits = []
    for (kind, eid), recs in sorted(groups.items()):
        recs.sort(key=lambda r: r["task_index"])
        payloads = [r["payload"] for r in recs]
        table = _TABLES.get(kind, _table_default)
        try:
            rows, fits, plots = table(payloads)
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"records of kind {kind!r} have an unexpected payload: {exc}") from exc
        stem = f"{kind}-{eid[:12]}"
        write_csv(out / f"{stem}.csv", rows)
        summary.files.append(f"{stem}.csv")
        for f in fits:
            all_fits.append({"experiment_id": eid[:12], **f})
        for name, xlabel, ylabel, loglog, series in plots:
            fname = f"{stem}-{name}.svg"
            _plot(out / fname, xlabel, ylabel, loglog, series)
            summary.files.append(fname)
        summary.experiments += 1
    write_csv(out / "fits.csv", all_fits, ["experiment_id", "kind", "series", "slope", "intercept", "r2", "points"])
    summary.files.append("fits.csv")
    return summary
