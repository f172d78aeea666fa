"""Per-kind experiment plans.

A plan is a list of :class:`Group`.  Each group runs with a ``map_fn`` (serial
``map`` or a process pool's ordered ``map``) and returns its records' payloads
in a fixed order, so output never depends on scheduling.  Functions handed to
``map_fn`` are module level so they pickle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, List

import numpy as np

from ..dyson import solve_m
from ..ensembles import sample_matrix
from ..errors import AccuracyError
from ..girko import DEFAULT_DECOMPOSE_GRID, DEFAULT_GIRKO_GRID, Scales, compute_I_eps, decompose, error_term, girko_logdet
from ..hermitization import complex_spectrum
from ..kernels import kpoint_density
from ..stats import MomentExperiment, compare_ensembles, empirical_density, local_law_scan, sv_tail_scan
from ..testfunctions import rescale
from .config import ExperimentConfig, grids_from, parse_complex, test_function_from


@dataclass
class Group:
    label: tuple
    seed: dict  # provenance shared by the group's records
    run: Callable  # run(map_fn) -> list of payload dicts


def derive_seed(master: int, *key: int) -> int:
    """Independent 64-bit seed for the sub-experiment labelled by ``key``."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def cplx(z: complex) -> list:
    return [float(z.real), float(z.imag)]


def _provenance(config, key, derived):
    return {"master_seed": config["seed"], "spawn_key": list(key), "derived_seed": derived}


# ---------------------------------------------------------------- per-sample workers


def _girko_sample(dist, n, seed, f, z0, grid, tolerance, idx):
    X = sample_matrix(n, dist, seed, idx)
    g = rescale(f, z0, n)
    res = girko_logdet(X, g, grid, full_output=True)
    sum_f = float(np.sum(g(complex_spectrum(X).sigmas)))
    defect = res.value - sum_f
    return {
        "n": n, "z0": cplx(z0), "sample_index": idx, "girko": res.value, "sum_f": sum_f,
        "defect": defect, "error_estimate": res.error_estimate, "degenerate_points": res.degenerate_points,
        "tolerance": tolerance, "passed": abs(defect) <= tolerance * (1.0 + abs(sum_f)),
    }


def _decompose_sample(dist, n, seed, f, z0, scales, zgrid, etagrid, idx):
    X = sample_matrix(n, dist, seed, idx)
    g = rescale(f, z0, n)
    try:
        d = decompose(X, g, scales, zgrid, etagrid)
        failure = None
    except AccuracyError as exc:
        d = exc.diagnostics["decomposition"]
        failure = str(exc)
    out = {"n": n, "z0": cplx(z0), "sample_index": idx, **d.to_json()}
    out.update({
        "total": d.total, "defect": d.defect, "E_eps": error_term(d),
        "error_parts": d.metadata.get("error_parts", {}),
        "passed": failure is None and abs(d.defect) <= d.quad_error,
    })
    if failure:
        out["accuracy_failure"] = failure
    return out


def _i_eps_sample(dist, n, seed, f, z0, scales, zgrid, etagrid, idx):
    X = sample_matrix(n, dist, seed, idx)
    value = compute_I_eps(X, rescale(f, z0, n), scales, zgrid, etagrid)
    return {"n": n, "z0": cplx(z0), "sample_index": idx, "epsilon": scales.epsilon, "I_eps": value}


def _local_law_sample(dist, n, seed, zs, etas, tau, idx):
    X = sample_matrix(n, dist, seed, idx)
    scan = local_law_scan(X, zs, etas, tau=tau)
    return {
        "n": n, "sample_index": idx, "z": [cplx(z) for z in scan.z], "eta": scan.eta.tolist(),
        "raw_averaged": scan.raw_averaged[:, :, 0].tolist(), "averaged": scan.averaged[:, :, 0].tolist(),
        "worst_averaged": scan.worst_averaged,
    }


# ---------------------------------------------------------------- plans


def _sample_groups(config: ExperimentConfig, worker, extra_args) -> List[Group]:
    """One group per (n, z0); records are per sample."""
    groups = []
    for n in config["n_list"]:
        for j, z0 in enumerate(config["z0"]):
            z0 = parse_complex(z0, "z0")
            key = (n, j)
            seed = derive_seed(config["seed"], *key)
            fn = partial(worker, config["dist"], n, seed, test_function_from(config), z0, *extra_args(n))
            samples = range(config["samples"])
            groups.append(Group(key, _provenance(config, key, seed),
                                lambda map_fn, fn=fn, samples=samples: list(map_fn(fn, samples))))
    return groups


def plan_girko_check(config):
    zgrid, _ = grids_from(config, (DEFAULT_GIRKO_GRID.n_radial, DEFAULT_GIRKO_GRID.n_angular))
    return _sample_groups(config, _girko_sample, lambda n: (zgrid, config["tolerance"]))


def _scaled_args(config):
    zgrid, etagrid = grids_from(config, (DEFAULT_DECOMPOSE_GRID.n_radial, DEFAULT_DECOMPOSE_GRID.n_angular))
    symbolic = bool(config.get("symbolic_T", False))
    return lambda n: (Scales(n, config["epsilon"], symbolic_T=symbolic), zgrid, etagrid)


def plan_decompose(config):
    return _sample_groups(config, _decompose_sample, _scaled_args(config))


def plan_i_eps(config):
    return _sample_groups(config, _i_eps_sample, _scaled_args(config))


def _etas_for(config, n):
    if "eta_list" in config.data:
        return [float(e) for e in config["eta_list"]]
    lo, hi, count = config["eta_exponents"]
    return (float(n) ** np.linspace(lo, hi, count)).tolist()


def plan_local_law(config):
    zs = [parse_complex(z, "z_list") for z in config.get("z_list") or [0.0]]
    groups = []
    for n in config["n_list"]:
        key = (n,)
        seed = derive_seed(config["seed"], *key)
        fn = partial(_local_law_sample, config["dist"], n, seed, zs, _etas_for(config, n), config["tau"])
        samples = range(config["samples"])
        groups.append(Group(key, _provenance(config, key, seed),
                            lambda map_fn, fn=fn, samples=samples: list(map_fn(fn, samples))))
    return groups


def plan_sv_tail(config):
    z = parse_complex(config["z"], "z")
    groups = []
    for n in config["n_list"]:
        key = (n,)
        seed = derive_seed(config["seed"], *key)

        def run(map_fn, n=n, seed=seed):
            est = sv_tail_scan(config["dist"], n, z, config["L_list"], config["samples"], seed, map_fn=map_fn)
            return [e.to_record() for e in est]

        groups.append(Group(key, _provenance(config, key, seed), run))
    return groups


def plan_kernel_eval(config):
    def run(map_fn):
        out = []
        for p in config["points"]:
            zs = [parse_complex(v, "points") for v in p["z"]]
            ws = [parse_complex(v, "points") for v in p["w"]]
            out.append({"k": len(zs), "z": [cplx(v) for v in zs], "w": [cplx(v) for v in ws],
                        "density": kpoint_density(zs, ws)})
        return out

    return [Group((0,), _provenance(config, (), None), run)]


def plan_universality(config):
    f = test_function_from(config)
    fs = tuple((f, parse_complex(z, "z0")) for z in config["z0"])
    groups = []
    for n in config["n_list"]:
        for r in range(config["repetitions"]):
            key = (n, r)
            seed = derive_seed(config["seed"], *key)

            def run(map_fn, n=n, r=r, seed=seed):
                exp = MomentExperiment(fs, n, config["samples"], seed)
                cmp = compare_ensembles(config["dist"], config["dist_b"], exp, map_fn=map_fn)
                rec = cmp.to_record()
                rec.update({"n": n, "repetition": r, "passed": abs(cmp.z_score) <= 3.0})
                return [rec]

            groups.append(Group(key, _provenance(config, key, seed), run))
    return groups


def plan_density(config):
    groups = []
    for n in config["n_list"]:
        key = (n,)
        seed = derive_seed(config["seed"], *key)

        def run(map_fn, n=n, seed=seed):
            d = empirical_density(config["dist"], n, config["samples"], config["bins"], seed, map_fn=map_fn)
            rec = d.to_record()
            rec["z_score"] = (d.central_density - 1.0 / math.pi) / d.central_se if d.central_se > 0 else None
            rec["passed"] = rec["z_score"] is not None and abs(rec["z_score"]) <= 3.0
            return [rec]

        groups.append(Group(key, _provenance(config, key, seed), run))
    return groups


def plan_dyson_table(config):
    def run(map_fn):
        out = []
        for a in config["z_abs"]:
            for eta in config["eta_list"]:
                s = solve_m(complex(a), float(eta))
                norm = math.sqrt(s.v**2 + (a * s.u) ** 2)
                out.append({"z_abs": float(a), "eta": float(eta), "v": s.v, "u": s.u, "residual": s.residual,
                            "norm_M": norm})
        return out

    return [Group((0,), _provenance(config, (), None), run)]


PLANS = {
    "girko-check": plan_girko_check,
    "decompose": plan_decompose,
    "i-eps": plan_i_eps,
    "local-law": plan_local_law,
    "sv-tail": plan_sv_tail,
    "kernel-eval": plan_kernel_eval,
    "universality": plan_universality,
    "density": plan_density,
    "dyson-table": plan_dyson_table,
}


def plan(config: ExperimentConfig) -> List[Group]:
    return PLANS[config.kind](config)
