"""Declarative experiments: config validation, per-seed runs and artifacts.

A config is a JSON object::

    {"schema": 1, "kind": "barrier-stabilizer",
     "parameters": {...}, "seeds": [0, 1, 2], "output_dir": "runs/barrier"}

Each kind owns a runner that maps ``(parameters, seed)`` to table rows.
Runs write CSV tables, a JSON manifest and a plot script into the output
directory, each file atomically.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import __version__, bmps, finite, gf, peps, replica, stabilizer_peps, wick
from .tensor import ConvergenceError

SCHEMA_VERSION = 1
SEED_OFFSET_ENV = "PEPSLAB_SEED_OFFSET"


class ConfigError(ValueError):
    """Raised by ``run`` when the config does not validate."""

    def __init__(self, diagnostics: List[str]):
        super().__init__("invalid config: " + "; ".join(diagnostics))
        self.diagnostics = diagnostics


# ---------------------------------------------------------------------------
# Parameter schemas
# ---------------------------------------------------------------------------

INT = "int"
NUM = "number"
STR = "str"
BOOL = "bool"
INT_LIST = "int-list"
NUM_LIST = "number-list"


@dataclass
class Kind:
    name: str
    required: Dict[str, str]
    optional: Dict[str, Tuple[str, object]]
    runner: Callable
    tables: Tuple[str, ...]
    seeded: bool = True
    summarise: Optional[Callable] = None
    checks: Optional[Callable] = None
    plot: str = ""


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_num(v):
    return (_is_int(v) or isinstance(v, float)) and not isinstance(v, bool)


_TYPE_CHECK = {
    INT: _is_int,
    NUM: _is_num,
    STR: lambda v: isinstance(v, str),
    BOOL: lambda v: isinstance(v, bool),
    INT_LIST: lambda v: isinstance(v, list) and len(v) > 0 and all(_is_int(x) for x in v),
    NUM_LIST: lambda v: isinstance(v, list) and len(v) > 0 and all(_is_num(x) for x in v),
}


# ---------------------------------------------------------------------------
# Runners: (params, seed) -> {table: [row dicts]}
# ---------------------------------------------------------------------------

def _fixed_point(D, d, chi, seed, p):
    T = peps.sample_clean(D, d, seed)
    dt = peps.double_tensor(T)
    fp = bmps.fixed_point(dt, chi, p["fidelity_tol"], p["spectrum_tol"], p["max_iter"])
    return T, dt, fp


def _run_ipeps(p, seed):
    spectra, summary, fids = [], [], []
    fps = {}
    for chi in p["chi"]:
        _, _, fp = _fixed_point(p["D"], p["d"], chi, seed, p)
        fps[chi] = fp
        s2 = fp.schmidt ** 2
        for i, v in enumerate(s2):
            spectra.append({"seed": seed, "D": p["D"], "d": p["d"], "chi": chi,
                            "i": i + 1, "sigma2": v})
        summary.append({"seed": seed, "D": p["D"], "d": p["d"], "chi": chi,
                        "iterations": fp.iterations,
                        "S_vn": bmps.renyi_entropy(fp.schmidt, 1),
                        "xi": bmps.correlation_length(fp.bmps)})
    chi_max = max(fps)
    for chi, fp in fps.items():
        f = abs(bmps.fidelity_per_site(fp.bmps, fps[chi_max].bmps))
        fids.append({"seed": seed, "D": p["D"], "d": p["d"], "chi": chi,
                     "chi_max": chi_max, "fidelity_abs": f, "one_minus_fidelity": 1.0 - f})
    return {"spectrum": spectra, "fixed_point": summary, "fidelity": fids}


def _run_correlation_length(p, seed):
    rows = []
    for D in p["D"]:
        for chi in p["chi"]:
            _, _, fp = _fixed_point(D, p["d"], chi, seed, p)
            rows.append({"seed": seed, "D": D, "d": p["d"], "chi": chi,
                         "iterations": fp.iterations,
                         "xi": bmps.correlation_length(fp.bmps)})
    return {"correlation_length": rows}


def _rho(T, dt, chi, p):
    top = bmps.fixed_point(dt, chi, p["fidelity_tol"], p["spectrum_tol"], p["max_iter"])
    bot = bmps.fixed_point(dt.reflected(), chi, p["fidelity_tol"], p["spectrum_tol"],
                           p["max_iter"])
    rho = bmps.reduced_density_matrix(top, bot, dt, peps.open_double_tensor(T))
    return rho, top, bot


def _run_rho_convergence(p, seed):
    T = peps.sample_clean(p["D"], p["d"], seed)
    dt = peps.double_tensor(T)
    ref, top_ref, bot_ref = _rho(T, dt, p["chi_ref"], p)

    def nxt(fp, chi):
        full = fp.schmidt ** 2
        return float(full[chi]) if chi < len(full) else 0.0

    rows = []
    for chi in p["chi"]:
        rho, top, _ = _rho(T, dt, chi, p)
        fid = bmps.fidelity_per_site(top.bmps, top_ref.bmps)
        rows.append({"seed": seed, "D": p["D"], "d": p["d"], "chi": chi,
                     "chi_ref": p["chi_ref"], "delta_rho": bmps.delta_rho(rho, ref),
                     "fidelity_abs": abs(fid), "sigma2_next": nxt(top_ref, chi),
                     "sigma2_next_bottom": nxt(bot_ref, chi)})
    return {"rho_convergence": rows}


def _run_overlap_eta(p, seed):
    """Mid-cut entropy of <Psi'|Psi> with Psi' = (1 - eta) Psi + eta noise.

    Finite disordered lattices by default; ``infinite`` uses one clean tensor
    and the uniform engine, recording ``Ly`` rows.
    """
    rows = []
    if p["infinite"]:
        T = peps.sample_clean(p["D"], p["d"], seed)
    else:
        lat = peps.sample_disordered(p["Lx"], p["Ly"], p["D"], p["d"], seed)
    for eta in p["eta"]:
        if p["infinite"]:
            dt = peps.double_tensor(T, peps.perturb(T, eta, seed))
            ent = bmps.entropy_evolution(dt, p["chi"], p["Ly"])
        else:
            other = peps.perturb_lattice(lat, eta, seed)
            ent = finite.finite_entropy_profile(lat, p["chi"], other=other)
        for y, s in enumerate(ent, start=1):
            rows.append({"seed": seed, "D": p["D"], "d": p["d"], "chi": p["chi"],
                         "eta": eta, "y": y, "S": s})
    return {"overlap_profile": rows}


def _run_barrier_dense(p, seed):
    if p["ensemble"] == "clean":
        lat = peps.clean_lattice(peps.sample_clean(p["D"], p["d"], seed), p["Lx"], p["Ly"],
                                 seed=seed)
    else:
        lat = peps.sample_disordered(p["Lx"], p["Ly"], p["D"], p["d"], seed)
    chi = p["chi"] if p["chi"] > 0 else None
    ent = finite.finite_entropy_profile(lat, chi)
    rows = [{"seed": seed, "D": p["D"], "d": p["d"], "Lx": p["Lx"], "Ly": p["Ly"],
             "chi": p["chi"], "ensemble": p["ensemble"], "y": y, "S": s}
            for y, s in enumerate(ent, start=1)]
    return {"profile": rows}


def _run_barrier_stabilizer(p, seed):
    spec = stabilizer_peps.StabilizerPepsSpec(p["p"], p["k_D"], p["k_d"], p["Lx"], p["Ly"],
                                              p["ensemble"], seed)
    prof = stabilizer_peps.layer_profile(spec)
    rows = [{"p": spec.p, "k_D": spec.k_D, "k_d": spec.k_d, "Lx": spec.Lx, "Ly": spec.Ly,
             "ensemble": spec.ensemble, "seed": seed, "y": y, "S_logp": s,
             "resamples": prof.resamples, "n_cuts": prof.n_cuts}
            for y, s in enumerate(prof.entropies, start=1)]
    return {"profile": rows}


def _summarise_barrier(tables):
    rows = tables.get("profile", [])
    by_y: Dict[int, List[float]] = {}
    for r in rows:
        by_y.setdefault(r["y"], []).append(r["S_logp"] / r["n_cuts"])
    out = []
    for y in sorted(by_y):
        v = np.array(by_y[y])
        std = float(v.std(ddof=1)) if len(v) > 1 else 0.0
        out.append({"y": y, "mean_per_cut": float(v.mean()), "std_per_cut": std,
                    "samples": len(v)})
    return {"summary": out}


def _replica_params(p, **over):
    kw = dict(n=p["n"], m=p["m"], D=p["D"], d=p["d"], Lx=p["Lx"], Ly=p["Ly"],
              region=tuple(p["region"]), periodic_x=p["periodic_x"])
    kw.update(over)
    return replica.ReplicaParams(**kw)


def _run_statmech(p, seed):
    P = _replica_params(p)
    za = replica.exact_partition(P, replica.VARIANT_A, p["engine"])
    z0 = replica.exact_partition(P, replica.VARIANT_0, p["engine"])
    ent = -(za.log_z - z0.log_z) / (P.m * (P.n - 1)) if P.n > 1 else 0.0
    return {"partition": [{"n": P.n, "m": P.m, "D": P.D, "d": P.d,
                           "lattice": f"{P.Lx}x{P.Ly}", "region": _region_str(P.region),
                           "engine": za.engine, "logZ_A": za.log_z, "logZ_0": z0.log_z,
                           "entropy_surrogate": ent}]}


def _region_str(region):
    return " ".join(str(x) for x in region)


def _run_wick(p, seed):
    P = _replica_params(p)
    est = wick.wick_oracle_mc(P, p["samples"], seed, p["batch"])
    return {"wick": [{"seed": seed, "n": P.n, "m": P.m, "D": P.D, "d": P.d,
                      "lattice": f"{P.Lx}x{P.Ly}", "region": _region_str(P.region),
                      "log_Z_A": est.log_z_a, "Z_A_rel_err": est.z_a_err / est.z_a,
                      "log_Z_0": est.log_z_0, "Z_0_rel_err": est.z_0_err / est.z_0,
                      "log_ratio": est.log_ratio, "log_ratio_err": est.log_ratio_err,
                      "samples": est.samples}]}


# ---------------------------------------------------------------------------
# Kind-specific checks (return diagnostics)
# ---------------------------------------------------------------------------

def _check_stabilizer(p):
    out = []
    if not gf.is_prime(p["p"]):
        out.append("p must be prime")
    if p["k_D"] < 0 or p["k_d"] < 0:
        out.append("k_D and k_d must be non-negative")
    if p["Lx"] < 2 or p["Ly"] < 1:
        out.append("need Lx >= 2 and Ly >= 1")
    if p["ensemble"] not in (stabilizer_peps.CLEAN, stabilizer_peps.DISORDERED):
        out.append(f"ensemble must be 'clean' or 'disordered', got {p['ensemble']!r}")
    return out


def _check_replica_common(p):
    out = []
    if p["n"] < 1 or p["m"] < 1:
        out.append("n and m must be positive")
    if p["D"] < 1 or p["d"] < 1:
        out.append("D and d must be at least 1")
    if p["Lx"] < 1 or p["Ly"] < 1:
        out.append("lattice extents must be positive")
    if any(not 0 <= x < p["Lx"] for x in p["region"]):
        out.append("region columns out of range")
    return out


def _check_statmech(p):
    out = _check_replica_common(p)
    if out:
        return out
    if p["engine"] not in ("auto", "brute", "transfer", "irrep"):
        return [f"unknown engine {p['engine']!r}"]
    P = _replica_params(p)
    engine, work = replica.choose_engine(P)
    count = P.configuration_count()
    if p["engine"] == "auto" and engine == "none":
        out.append(f"enumeration budget exceeded: {count} configurations "
                   f"> {replica.ENUMERATION_BUDGET} and no transfer/irrep engine applies")
    if p["engine"] == "brute" and count > replica.ENUMERATION_BUDGET:
        out.append(f"enumeration budget exceeded: {count} configurations "
                   f"> {replica.ENUMERATION_BUDGET}")
    return out


def _check_wick(p):
    out = _check_replica_common(p)
    if out:
        return out
    if not float(p["D"]).is_integer() or not float(p["d"]).is_integer():
        out.append("the Wick oracle needs integer D and d")
        return out
    dense = int(p["d"]) ** (p["Lx"] * p["Ly"]) * int(p["D"]) ** p["Lx"]
    if dense > wick.DENSE_LIMIT:
        out.append(f"dense amplitude size {dense} exceeds {wick.DENSE_LIMIT}")
    if p["samples"] < 2:
        out.append("need at least 2 samples")
    return out


def _check_dims(p):
    out = []
    for key in ("D", "d"):
        vals = p[key] if isinstance(p[key], list) else [p[key]]
        if any(v < 1 for v in vals):
            out.append(f"{key} must be >= 1")
    for key in ("chi", "chi_ref"):
        if key in p:
            vals = p[key] if isinstance(p[key], list) else [p[key]]
            if any(v < 1 for v in vals):
                out.append(f"{key} must be >= 1")
    if "eta" in p and any(not 0.0 <= e <= 1.0 for e in p["eta"]):
        out.append("eta values must lie in [0, 1]")
    return out


def _check_barrier_dense(p):
    out = [m for m in _check_dims(dict(p, chi=max(p["chi"], 1)))]
    if p["ensemble"] not in ("clean", "disordered"):
        out.append(f"ensemble must be 'clean' or 'disordered', got {p['ensemble']!r}")
    if p["Lx"] < 2:
        out.append("need Lx >= 2 for a mid cut")
    return out


_FP_OPTS = {"fidelity_tol": (NUM, 1e-10), "spectrum_tol": (NUM, 1e-8),
            "max_iter": (INT, 2000)}

_REPLICA_OPTS = {"region": (INT_LIST, None), "periodic_x": (BOOL, False)}

KINDS: Dict[str, Kind] = {
    "ipeps-fixed-point": Kind(
        "ipeps-fixed-point", {"D": INT, "d": INT, "chi": INT_LIST}, dict(_FP_OPTS),
        _run_ipeps, ("spectrum", "fixed_point", "fidelity"), checks=_check_dims,
        plot="semilogy spectrum.csv x=i y=sigma2 group=chi,seed"),
    "correlation-length": Kind(
        "correlation-length", {"D": INT_LIST, "d": INT, "chi": INT_LIST}, dict(_FP_OPTS),
        _run_correlation_length, ("correlation_length",), checks=_check_dims,
        plot="plot correlation_length.csv x=chi y=xi group=D,seed"),
    "rho-convergence": Kind(
        "rho-convergence", {"D": INT, "d": INT, "chi": INT_LIST, "chi_ref": INT},
        dict(_FP_OPTS), _run_rho_convergence, ("rho_convergence",), checks=_check_dims,
        plot="semilogy rho_convergence.csv x=chi y=delta_rho group=seed"),
    "overlap-eta": Kind(
        "overlap-eta", {"D": INT, "d": INT, "chi": INT, "eta": NUM_LIST, "Ly": INT},
        {"Lx": (INT, 16), "infinite": (BOOL, False)},
        _run_overlap_eta, ("overlap_profile",), checks=_check_dims,
        plot="plot overlap_profile.csv x=y y=S group=eta,seed"),
    "barrier-dense": Kind(
        "barrier-dense", {"D": INT, "d": INT, "Lx": INT, "Ly": INT},
        {"chi": (INT, 0), "ensemble": (STR, "disordered")},
        _run_barrier_dense, ("profile",), checks=_check_barrier_dense,
        plot="plot profile.csv x=y y=S group=seed"),
    "barrier-stabilizer": Kind(
        "barrier-stabilizer", {"p": INT, "k_D": INT, "k_d": INT, "Lx": INT, "Ly": INT},
        {"ensemble": (STR, "disordered")}, _run_barrier_stabilizer, ("profile", "summary"),
        summarise=_summarise_barrier, checks=_check_stabilizer,
        plot="errorbar summary.csv x=y y=mean_per_cut yerr=std_per_cut"),
    "statmech-exact": Kind(
        "statmech-exact", {"n": INT, "m": INT, "D": NUM, "d": NUM, "Lx": INT, "Ly": INT},
        dict(_REPLICA_OPTS, engine=(STR, "auto")), _run_statmech, ("partition",),
        seeded=False, checks=_check_statmech,
        plot="table partition.csv columns=n,m,D,d,lattice,logZ_A,logZ_0"),
    "wick-oracle": Kind(
        "wick-oracle", {"n": INT, "m": INT, "D": INT, "d": INT, "Lx": INT, "Ly": INT,
                        "samples": INT},
        dict(_REPLICA_OPTS, batch=(INT, 5000)), _run_wick, ("wick",), checks=_check_wick,
        plot="table wick.csv columns=seed,log_Z_A,log_Z_0,log_ratio,log_ratio_err"),
}


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _resolved_params(kind: Kind, params: dict) -> dict:
    out = {k: params[k] for k in kind.required}
    for key, (_, default) in kind.optional.items():
        out[key] = params.get(key, default)
    if "region" in out and out["region"] is None:
        out["region"] = list(range(out["Lx"] // 2))
    return out


def validate(config) -> List[str]:
    """Diagnostics for a config; an empty list means ``run`` accepts it."""
    if not isinstance(config, dict):
        return ["config must be a JSON object"]
    diags = []
    unknown = sorted(set(config) - {"schema", "kind", "parameters", "seeds", "output_dir"})
    if unknown:
        diags.append(f"unknown top-level keys: {', '.join(unknown)}")
    if config.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        diags.append(f"unsupported schema version {config.get('schema')!r}")
    kind = KINDS.get(config.get("kind"))
    if kind is None:
        diags.append(f"kind must be one of {', '.join(sorted(KINDS))}")
        return diags
    params = config.get("parameters")
    if not isinstance(params, dict):
        return diags + ["parameters must be an object"]
    missing = [k for k in kind.required if k not in params]
    if missing:
        diags.append(f"missing parameters: {', '.join(missing)}")
    extra = sorted(set(params) - set(kind.required) - set(kind.optional))
    if extra:
        diags.append(f"unknown parameters: {', '.join(extra)}")
    for key, typ in list(kind.required.items()) + [(k, t) for k, (t, _) in kind.optional.items()]:
        if key in params and not (key == "region" and params[key] == []) \
                and not _TYPE_CHECK[typ](params[key]):
            diags.append(f"parameter {key} must be of type {typ}")
    seeds = config.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(_is_int(s) and s >= 0 for s in seeds):
        diags.append("seeds must be a non-empty list of non-negative integers")
    if "output_dir" in config and not isinstance(config["output_dir"], str):
        diags.append("output_dir must be a string")
    if diags:
        return diags
    if kind.checks is not None:
        diags += kind.checks(_resolved_params(kind, params))
    return diags


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if _is_int(v):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def csv_text(rows: List[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    header = list(rows[0])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format_value(r[k]) for k in header])
    return buf.getvalue()


def atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunArtifact:
    manifest: dict
    tables: Dict[str, List[dict]] = field(default_factory=dict)
    plotscript: str = ""
    output_dir: Optional[str] = None

    @property
    def all_failed(self) -> bool:
        status = self.manifest["seeds"]
        return bool(status) and all(s["status"] != "ok" for s in status)


def seed_offset() -> int:
    raw = os.environ.get(SEED_OFFSET_ENV, "0").strip() or "0"
    return int(raw)


def _one(kind_name: str, params: dict, seed: int):
    kind = KINDS[kind_name]
    t0 = time.perf_counter()
    try:
        tables = kind.runner(params, seed)
        return seed, "ok", "", tables, time.perf_counter() - t0
    except (ConvergenceError, bmps.GaugeError, RuntimeError, ValueError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        return seed, "failed", f"{type(exc).__name__}: {exc}", {}, time.perf_counter() - t0


def run(config: dict, jobs: int = 1, output_dir: Optional[str] = None,
        write: bool = True) -> RunArtifact:
    """Validate and run a config, writing its artifacts.

    Args:
        config: parsed JSON config.
        jobs: number of worker processes over seeds.
        output_dir: overrides ``config["output_dir"]``.
        write: write files (False keeps the artifact in memory only).

    Raises:
        ConfigError: the config does not validate.
    """
    diags = validate(config)
    if diags:
        raise ConfigError(diags)
    kind = KINDS[config["kind"]]
    params = _resolved_params(kind, config["parameters"])
    offset = seed_offset()
    seeds = [s + offset for s in config.get("seeds", [0])]
    if not kind.seeded:
        seeds = seeds[:1]
    t0 = time.time()
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one, [kind.name] * len(seeds), [params] * len(seeds),
                                    seeds))
    else:
        results = [_one(kind.name, params, s) for s in seeds]
    tables: Dict[str, List[dict]] = {name: [] for name in kind.tables}
    status = []
    for seed, st, msg, tab, dt in results:
        status.append({"seed": seed, "status": st, "error": msg, "seconds": round(dt, 3)})
        for name, rows in tab.items():
            tables.setdefault(name, []).extend(rows)
    if kind.summarise is not None:
        tables.update(kind.summarise(tables))
    out_dir = output_dir or config.get("output_dir") or os.path.join("runs", kind.name)
    manifest = {
        "schema": SCHEMA_VERSION,
        "code_version": __version__,
        "config": config,
        "resolved_parameters": params,
        "seed_offset": offset,
        "wall_seconds": round(time.time() - t0, 3),
        "seeds": status,
        "tables": [{"file": f"{name}.csv", "rows": len(rows)} for name, rows in tables.items()],
    }
    plot = _plotscript(kind, tables)
    art = RunArtifact(manifest, tables, plot, out_dir)
    if write:
        for name, rows in tables.items():
            atomic_write(os.path.join(out_dir, f"{name}.csv"), csv_text(rows))
        atomic_write(os.path.join(out_dir, "plot.txt"), plot)
        atomic_write(os.path.join(out_dir, "manifest.json"),
                     json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return art


def _plotscript(kind: Kind, tables) -> str:
    lines = [f"# plot commands for {kind.name}; one command per line",
             "# syntax: <style> <csv> key=value ...", kind.plot]
    return "\n".join(lines) + "\n"


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def budget_estimates(config: dict) -> List[str]:
    """Informational resource estimates (never blocking)."""
    kind = KINDS.get(config.get("kind"))
    if kind is None or validate(config):
        return []
    p = _resolved_params(kind, config["parameters"])
    if kind.name == "statmech-exact":
        P = _replica_params(p)
        engine, work = replica.choose_engine(P)
        return [f"configurations: {P.configuration_count()}", f"engine: {engine} (work {work})"]
    if kind.name == "wick-oracle":
        dense = int(p["d"]) ** (p["Lx"] * p["Ly"]) * int(p["D"]) ** p["Lx"]
        return [f"dense amplitudes: {dense} (limit {wick.DENSE_LIMIT})"]
    return []
