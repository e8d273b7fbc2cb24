"""Command-line front end: ``cellhom <command> [options]``.

Every run writes ``<out>/<command>.csv`` and ``<out>/<command>.json``.
Exit codes: 0 success, 1 configuration error, 2 numerical failure (flagged
results under ``--strict``, or a failed precondition).
"""

from __future__ import annotations

import argparse
import csv
import enum
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import COMMANDS, ConfigError, RunConfig, check_caps, load_config, parse_xi, resolve
from .gallery import UnknownDensityError, get_density
from .gamma import BuildRefused, Stage, affine_target, limsup_experiment
from .homogenize import HWMemo, hw_estimate, subadditive_trace
from .hyper2d import Hyper2DConfig, det_I, g_eval, in_G, prop24_suite
from .optimize import OptimizerConfig
from .relaxation import z_value, zh_value
from .ruusc import NoFeasibleSamplesError, radial_samples, ru_usc_audit

SCHEMA_VERSION = 1

# CSV column schemas (versioned by SCHEMA_VERSION)
COLUMNS = {
    "hom": ("xi", "k", "n", "value", "iterations", "converged"),
    "relax": ("xi", "operator", "level", "value", "witness_norm", "converged", "flag"),
    "ruusc": ("t", "delta_lower", "n_samples", "within_threshold"),
    "converge": ("eps", "value", "k_eps", "counting_bound", "n_vertices", "status"),
    "gamma": ("t", "n_pa", "z_level", "eps", "energy", "lp_distance", "status"),
    "example2d": ("item", "pass", "detail"),
    "example2d_points": ("xi", "in_G", "det", "W", "g"),
}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, np.ndarray):
        return " ".join(_fmt(x) for x in v.ravel())
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else _fmt(v)
    return obj


def write_csv(path: Path, columns: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _opt(cfg: RunConfig) -> OptimizerConfig:
    return OptimizerConfig(n_starts=cfg.starts, max_iters=cfg.max_iters, seed=cfg.seed)


# -- commands: each returns (csv columns, rows, summary, flags) -------------


def run_hom(cfg, W):
    rows, per_xi, flags = [], [], []
    for xi in parse_xi(cfg.xi, W.m, W.d):
        est = hw_estimate(W, xi, cfg.k, cfg.n, _opt(cfg))
        for k, n, v, it, conv in est.rows():
            rows.append((xi, k, n, v, it, conv))
        per_xi.append({"xi": xi, "best": est.best, "branch": est.branch, "flag": est.flag, "tiling_ok": est.tiling_ok})
        if est.flag != "OK":
            flags.append(est.flag)
    return COLUMNS["hom"], rows, {"results": per_xi}, flags


def run_relax(cfg, W):
    rows, flags = [], []
    memo = HWMemo(W) if cfg.operator == "HW" else None
    for xi in parse_xi(cfg.xi, W.m, W.d):
        for level in cfg.level:
            r = z_value(W, xi, level, _opt(cfg)) if memo is None else zh_value(W, xi, level, memo)
            rows.append((xi, cfg.operator, level, r.value, r.witness_norm, r.converged, r.flag))
            if r.flag != "OK" or not r.converged:
                flags.append(r.flag if r.flag != "OK" else "NONCONVERGED")
    return COLUMNS["relax"], rows, {"rows": len(rows)}, flags


def run_ruusc(cfg, W):
    rng = np.random.default_rng(cfg.seed)
    Z = radial_samples(W.domain.member, (W.m, W.d), cfg.samples, rng)
    X = rng.random((16, W.d)) if W.x_dependent else np.zeros((1, W.d))
    rep = ru_usc_audit(W, cfg.a, cfg.t, X, Z)
    summary = {"audit": rep.as_dict(), "worst_xi": rep.worst_xi, "verdict": "PASS" if rep.passed else "FAIL"}
    return COLUMNS["ruusc"], rep.rows(), summary, [] if rep.passed else ["FAIL"]


def run_converge(cfg, W):
    xi = parse_xi(cfg.xi, W.m, W.d)[0]
    tr = subadditive_trace(W, xi, eps_schedule=cfg.eps, k_ref_list=cfg.k, n=cfg.n[0], cfg=_opt(cfg))
    rows = [(e.eps, e.value, e.k_eps, e.counting_bound, e.n_vertices, e.status) for e in tr.entries]
    flags = ["INCOMPLETE" if e.status == "SKIPPED" else e.status for e in tr.entries if e.status != "OK"]
    summary = {"xi": xi, "reference": tr.reference, "reference_table": tr.reference_table}
    return COLUMNS["converge"], rows, summary, flags


def run_gamma(cfg, W):
    xi = parse_xi(cfg.xi, W.m, W.d)[0]
    schedule = [Stage(t, n, lv, e) for t, n, lv, e in zip(cfg.t, cfg.n, cfg.level, cfg.eps)]
    rep = limsup_experiment(W, affine_target(xi, W.d), schedule, cfg.slack)
    rows = [row + (s["status"],) for row, s in zip(rep["rows"], rep["stages"])]
    summary = {k: rep[k] for k in ("reference", "gap", "slack", "distances_decrease", "lower_bound_ok", "diagnostics")}
    summary["stages"] = rep["stages"]
    summary["verdict"] = "PASS" if rep["pass"] else "FAIL"
    return COLUMNS["gamma"], rows, summary, [] if rep["pass"] else ["FAIL"]


def run_example2d(cfg, W):
    if cfg.suite:
        rep = prop24_suite(Hyper2DConfig(), n_samples=cfg.samples, seed=cfg.seed, t_grid=cfg.t)
        rows = [(name, it["pass"], it["detail"]) for name, it in rep["items"].items()]
        rep["verdict"] = "PASS" if rep["all_pass"] else "FAIL"
        return COLUMNS["example2d"], rows, rep, [] if rep["all_pass"] else ["FAIL"]
    Z = parse_xi(cfg.xi, 2, 2)
    rows = [(z, bool(in_G(z[None])[0]), float(det_I(z[None])[0]), W(np.zeros(2), z), float(g_eval(z[None])[0]))
            for z in Z]
    return COLUMNS["example2d_points"], rows, {"points": len(rows)}, []


RUNNERS = {
    "hom": run_hom,
    "relax": run_relax,
    "ruusc": run_ruusc,
    "converge": run_converge,
    "gamma": run_gamma,
    "example2d": run_example2d,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cellhom", description="Periodic homogenization and relaxation experiments.")
    p.add_argument("--version", action="version", version=f"cellhom {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="key = value file; flags override it")
        s.add_argument("--density", help="gallery id")
        s.add_argument("--xi", help="matrices separated by ',', entries by spaces")
        s.add_argument("--k", help="cell multiples, e.g. 1,2,3")
        s.add_argument("--n", help="mesh subdivisions per unit cell")
        s.add_argument("--t", help="radial parameters")
        s.add_argument("--eps", help="oscillation scales")
        s.add_argument("--level", help="dyadic levels of the relaxation mesh")
        s.add_argument("--operator", choices=("W", "HW"), help="relax: apply Z to W or to HW")
        s.add_argument("--a", help="ruusc: weight in the modulus")
        s.add_argument("--slack", help="gamma: relative gap tolerance")
        s.add_argument("--starts", help="optimizer starts")
        s.add_argument("--max-iters", dest="max_iters", help="optimizer iteration cap")
        s.add_argument("--seed", help="random seed")
        s.add_argument("--samples", help="number of samples")
        s.add_argument("--out", help="output directory")
        s.add_argument("--strict", action="store_true", default=None, help="exit 2 on flagged results")
        s.add_argument("--suite", action="store_true", default=None, help="example2d: run the full suite")
    return p


def _config_from_args(ns: argparse.Namespace) -> RunConfig:
    from .config import coerce

    keys = ("density", "xi", "k", "n", "t", "eps", "level", "operator", "a", "slack", "starts", "max_iters",
            "seed", "samples", "out", "strict", "suite")
    overrides = {k: coerce(k, getattr(ns, k)) for k in keys if getattr(ns, k) is not None}
    if ns.config:
        overrides["command"] = ns.command
        base = load_config(ns.config, overrides)
        if base.command != ns.command:
            raise ConfigError(f"config command {base.command!r} differs from {ns.command!r}")
        return base
    return resolve(RunConfig(command=ns.command, **overrides))


def run(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(ns)
        W = get_density(cfg.density)
        check_caps(cfg, W.d)
        if cfg.command == "example2d" and W.name != "hyper2d_default":
            raise ConfigError("example2d requires density hyper2d_default")
        columns, rows, summary, flags = RUNNERS[cfg.command](cfg, W)
    except (ConfigError, UnknownDensityError) as exc:
        print(f"config error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return 1
    except (BuildRefused, NoFeasibleSamplesError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f"{cfg.command}.csv", columns, rows)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "cellhom_version": __version__,
        "command": cfg.command,
        "config": cfg.as_dict(),
        "density": {"name": W.name, "version": W.version},
        "columns": list(columns),
        "flags": sorted(set(flags)),
        "summary": summary,
    }
    (out / f"{cfg.command}.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / (cfg.command + '.csv')} ({len(rows)} rows)")
    if flags:
        print(f"flags: {', '.join(sorted(set(flags)))}", file=sys.stderr)
        if cfg.strict:
            return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
