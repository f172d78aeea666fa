"""Experiment execution: worker pool, ordered JSONL writer and CSV summary."""

from __future__ import annotations

import csv
import json
import logging
import math
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

from ..errors import AccuracyError
from .config import ExperimentConfig
from .tasks import plan

log = logging.getLogger(__name__)

SCHEMA_VERSION = "v1"
RECORDS_FILE = "records.jsonl"
SUMMARY_FILE = "summary.csv"
WORKERS_ENV = "GIRKOLAB_WORKERS"

EXIT_OK = 0
EXIT_ACCURACY = 2
EXIT_CONFIG = 3


def resolve_workers(flag: Optional[int] = None, config: Optional[ExperimentConfig] = None) -> int:
    """Flag, then ``GIRKOLAB_WORKERS``, then the config, then the CPU count."""
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", WORKERS_ENV, env)
    if config is not None and config.get("workers"):
        return int(config["workers"])
    return os.cpu_count() or 1


def default_out_dir(config: ExperimentConfig) -> Path:
    return Path(config.get("out") or f"girkolab-out/{config.kind}-{config.experiment_id[:12]}")


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):  # numpy scalars
        return _jsonable(x.item())
    return x


class RecordWriter:
    """Appends one JSON line per ``os.write`` on an ``O_APPEND`` descriptor."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fd = os.open(self.path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)

    def write(self, record: dict):
        line = (json.dumps(record, sort_keys=True, allow_nan=False) + "\n").encode()
        view = memoryview(line)
        while view:
            k = os.write(self._fd, view)
            view = view[k:]

    def close(self):
        if self._fd is not None:
            os.fsync(self._fd)
            os.close(self._fd)
            self._fd = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class RunSummary:
    experiment_id: str
    kind: str
    out_dir: Path
    records: int = 0
    accuracy_failures: int = 0
    exit_code: int = EXIT_OK
    wall_time: float = 0.0
    payloads: List[dict] = field(default_factory=list, repr=False)


def _flatten(payload: dict, prefix: str = "") -> dict:
    row = {}
    for k, v in payload.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            row.update(_flatten(v, key + "."))
        elif isinstance(v, (str, int, float, bool)) or v is None:
            row[key] = v
        elif isinstance(v, list) and len(v) <= 4 and all(isinstance(x, (int, float)) for x in v):
            row[key] = json.dumps(v)
    return row


def write_csv(path: Path, rows: List[dict], columns: Optional[List[str]] = None):
    cols = list(columns or [])
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in cols})


def run(config: ExperimentConfig, workers: Optional[int] = None, out_dir=None) -> RunSummary:
    """Execute ``config``; records are written as each group finishes."""
    workers = resolve_workers(workers, config)
    out = Path(out_dir) if out_dir is not None else default_out_dir(config)
    summary = RunSummary(config.experiment_id, config.kind, out)
    params = config.params()
    t0 = time.perf_counter()
    pool = None
    if workers > 1:
        pool = ProcessPoolExecutor(max_workers=workers, mp_context=multiprocessing.get_context("spawn"))
    map_fn = map if pool is None else (lambda fn, items: pool.map(fn, items, chunksize=1))
    rows = []
    index = 0
    try:
        with RecordWriter(out / RECORDS_FILE) as writer:
            for group in plan(config):
                tg = time.perf_counter()
                try:
                    payloads = group.run(map_fn)
                except AccuracyError as exc:
                    log.error("accuracy failure in group %s: %s", group.label, exc)
                    summary.accuracy_failures += 1
                    summary.exit_code = EXIT_ACCURACY
                    break
                # group wall time shared by its records; kept outside the payload
                wall = (time.perf_counter() - tg) / max(1, len(payloads))
                for p in payloads:
                    p = _jsonable(p)
                    writer.write({
                        "schema": SCHEMA_VERSION,
                        "experiment_id": config.experiment_id,
                        "kind": config.kind,
                        "task_index": index,
                        "timestamp": datetime.now(timezone.utc).isoformat(),
                        "params": params,
                        "seed": group.seed,
                        "payload": p,
                        "wall_time": wall,
                    })
                    index += 1
                    summary.payloads.append(p)
                    rows.append({"task_index": index - 1, **_flatten(p)})
                    if "accuracy_failure" in p or p.get("passed") is False and config.kind in ("girko-check", "decompose"):
                        summary.accuracy_failures += 1
                        summary.exit_code = EXIT_ACCURACY
    finally:
        if pool is not None:
            pool.shutdown()
    write_csv(out / SUMMARY_FILE, rows)
    summary.records = index
    summary.wall_time = time.perf_counter() - t0
    return summary
