"""Command-line entry point: ``fairsel {synth,select,evaluate,gradcheck,sweep}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .dataset import Dataset, SyntheticSpec, generate_synthetic, load_csv, synthetic_standardized, write_csv
from .errors import ConfigError, DataError, FairselError, NumericError
from .evaluation import METRICS, evaluate_selection
from .experiments import FRACTIONS, feature_count
from .fufs import FufsConfig, optimize, rank_features
from .gradcheck import GRADCHECK_TOL, finite_difference_check, random_instance

EXIT_CODES = {ConfigError: 1, DataError: 2, NumericError: 3}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text: str) -> list[float]:
    items = [t for t in text.replace(" ", "").split(",") if t]
    try:
        return [float(t) for t in items]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


# -- data sources -----------------------------------------------------------

def _add_data_args(p):
    p.add_argument("--data", help="CSV file, one instance per row")
    p.add_argument("--protected", type=_names, help="comma-separated protected column names")
    p.add_argument("--label", help="ground-truth cluster label column")
    p.add_argument("--no-standardize", action="store_true")
    g = p.add_argument_group("synthetic data (used when --data is absent)")
    g.add_argument("--n", type=int, default=200)
    g.add_argument("--utility", type=int, default=10)
    g.add_argument("--sensitive", type=int, default=10)
    g.add_argument("--noise", type=int, default=10)
    g.add_argument("--separation", type=float, default=3.0)
    g.add_argument("--correlation", type=float, default=0.9)
    g.add_argument("--data-seed", type=int, default=0)


def _provenance(args) -> dict:
    if args.data:
        if not args.protected:
            raise ConfigError("--protected is required with --data")
        return {"type": "csv", "path": str(Path(args.data).resolve()), "protected": args.protected,
                "label": args.label, "standardize": not args.no_standardize}
    spec = SyntheticSpec(args.n, args.utility, args.sensitive, args.noise,
                         args.separation, args.correlation, args.data_seed)
    return {"type": "synthetic", "spec": spec.to_dict(), "standardize": not args.no_standardize}


def load_source(prov: dict) -> Dataset:
    if prov["type"] == "csv":
        return load_csv(prov["path"], prov["protected"], prov.get("label"), prov.get("standardize", True))
    if prov["type"] == "synthetic":
        spec = SyntheticSpec(**prov["spec"])
        return synthetic_standardized(spec) if prov.get("standardize", True) else generate_synthetic(spec)
    raise ConfigError(f"unknown dataset provenance type {prov.get('type')!r}")


# -- configuration ----------------------------------------------------------

def _add_config_args(p):
    p.add_argument("--config", help="JSON file with FufsConfig fields")
    p.add_argument("--k", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--seed", type=int)


def _read_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def build_config(args, base: Optional[dict] = None) -> FufsConfig:
    """Flags override file values, which override defaults."""
    values = dict(base or {})
    values.update(_read_config_file(getattr(args, "config", None)))
    for key in ("k", "l", "alpha", "beta", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return FufsConfig.from_dict(values)


def _manifest(command: str, snapshot: dict, started: float, outputs: list[Path]) -> dict:
    return {
        "command": command,
        "config_snapshot": snapshot,
        "tool_version": __version__,
        "wall_time_seconds": time.perf_counter() - started,
        "outputs": [str(p) for p in outputs],
    }


# -- commands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    started = time.perf_counter()
    spec = SyntheticSpec(args.n, args.utility, args.sensitive, args.noise,
                         args.separation, args.correlation, args.data_seed)
    ds = generate_synthetic(spec)
    out = Path(args.out)
    roles_path = _sibling(out, ".roles.json")
    manifest_path = _sibling(out, ".manifest.json")
    write_csv(ds, out)
    _write_json(roles_path, {"roles": list(ds.roles)})
    _write_json(manifest_path, _manifest("synth", {"dataset": {"type": "synthetic", "spec": spec.to_dict()}},
                                         started, [out, roles_path, manifest_path]))
    print(f"wrote {out} (n={ds.n}, d={ds.d}) and {roles_path}")
    return 0


def cmd_select(args) -> int:
    started = time.perf_counter()
    if args.manifest:
        snap = json.loads(Path(args.manifest).read_text(encoding="utf-8"))["config_snapshot"]
        prov = snap["dataset"]
        cfg = build_config(args, snap["fufs"])
    else:
        prov = _provenance(args)
        cfg = build_config(args)
    ds = load_source(prov)
    cfg.check_dims(ds.d)
    result = optimize(ds, cfg)

    out = Path(args.out)
    manifest_path = _sibling(out, ".manifest.json")
    _write_json(out, result.to_dict())
    _write_json(manifest_path, _manifest("select", {"fufs": cfg.to_dict(), "dataset": prov},
                                         started, [out, manifest_path]))
    print(f"selected {result.selected} after {result.iterations} iterations "
          f"(converged={result.converged}); wrote {out}")
    return 0


def _eval_rows(ds, m, fractions, restarts, seed, metrics, clusters, threshold):
    ranked = [i for i, _ in rank_features(m)]
    rows, reports = [], {}
    for f in fractions:
        rep = evaluate_selection(ds, ranked[: feature_count(f, ds.d)], clusters, restarts, seed, metrics, threshold)
        reports[repr(f)] = rep.to_dict()
        rows.append({"fraction": f, "acc": rep.acc, "nmi": rep.nmi,
                     "balance": rep.balance, "proportion": rep.proportion})
    return rows, reports


def best_per_metric(rows: list[dict]) -> dict:
    best = {}
    for key in METRICS:
        vals = [(r[key], r["fraction"]) for r in rows if r[key] is not None]
        if not vals:
            continue
        # lower proportion is fairer; ties keep the smaller fraction
        pick = min(vals, key=lambda t: (t[0], t[1])) if key == "proportion" else max(vals, key=lambda t: (t[0], -t[1]))
        best[key] = {"value": pick[0], "fraction": pick[1]}
    return best


def _write_table(path: Path, header: list[str], rows: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r[k] is None else r[k]) for k in header})


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    sel = json.loads(Path(args.selection).read_text(encoding="utf-8"))
    m = np.asarray(sel["m"], dtype=float)
    prov = _provenance(args)
    ds = load_source(prov)
    if m.shape != (ds.d,):
        raise DataError(f"selection has {m.size} features but the dataset has d={ds.d}")
    metrics = tuple(args.metrics)
    if set(metrics) - set(METRICS):
        raise ConfigError(f"--metrics must be drawn from {METRICS}")
    rows, reports = _eval_rows(ds, m, args.fractions, args.restarts, args.seed, metrics, args.clusters, args.threshold)
    best = best_per_metric(rows)

    out = Path(args.out)
    best_path = _sibling(out, ".best.json")
    reports_path = _sibling(out, ".reports.json")
    manifest_path = _sibling(out, ".manifest.json")
    _write_table(out, ["fraction", "acc", "nmi", "balance", "proportion"], rows)
    _write_json(best_path, best)
    _write_json(reports_path, reports)
    snapshot = {"dataset": prov, "selection": str(Path(args.selection).resolve()), "fractions": args.fractions,
                "restarts": args.restarts, "seed": args.seed, "metrics": list(metrics),
                "clusters": args.clusters, "threshold": args.threshold}
    _write_json(manifest_path, _manifest("evaluate", snapshot, started, [out, best_path, reports_path, manifest_path]))
    for key, b in best.items():
        print(f"best {key}: {b['value']:.4f} at fraction {b['fraction']:g}")
    return 0


def cmd_gradcheck(args) -> int:
    if min(args.d, args.p) < 1 or args.n < 2 or not args.epsilon > 0:
        raise ConfigError("gradcheck needs d, p >= 1, n >= 2 and epsilon > 0")
    ds, pair = random_instance(args.d, args.n, args.p, args.seed)
    cfg = FufsConfig(alpha=args.alpha, beta=args.beta, k=1)
    err, (block, idx) = finite_difference_check(ds, pair, cfg, args.epsilon)
    print(f"max relative error {err:.3e} (at d{block}[{idx}])")
    if err >= GRADCHECK_TOL:
        print(f"gradcheck failed: dL/d{block}[{idx}] relative error {err:.3e} >= {GRADCHECK_TOL:g}", file=sys.stderr)
        return 3
    return 0


def _sweep_point(task):
    prov, cfg_dict, fractions, restarts, seed, ablate = task
    ds = load_source(prov)
    cfg = FufsConfig.from_dict(cfg_dict)
    variants = [("full", cfg)] + ([("ablated", replace(cfg, ablate_g=True))] if ablate else [])
    out = []
    for name, c in variants:
        res = optimize(ds, c)
        rows, _ = _eval_rows(ds, res.indicators.m, fractions, restarts, seed, METRICS, None, None)
        for r in rows:
            out.append({"alpha": c.alpha, "beta": c.beta, **r, "variant": name})
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FAIRSEL_THREADS", "1")))
    except ValueError:
        raise ConfigError("FAIRSEL_THREADS must be an integer") from None


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    if not args.alphas or not args.betas or not args.fractions:
        raise ConfigError("--alphas, --betas and --fractions must be non-empty")
    prov = _provenance(args)
    base = build_config(args)
    ds = load_source(prov)
    base.check_dims(ds.d)
    if ds.labels is None:
        raise DataError("sweep needs ground-truth labels for acc/nmi")
    tasks = [(prov, replace(base, alpha=a, beta=b).to_dict(), args.fractions, args.restarts, base.seed, args.ablate_g)
             for a in args.alphas for b in args.betas]
    workers = min(_threads(), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sweep_point, tasks))
    else:
        chunks = [_sweep_point(t) for t in tasks]
    rows = sorted((r for c in chunks for r in c),
                  key=lambda r: (r["alpha"], r["beta"], r["fraction"], r["variant"] != "full"))

    out = Path(args.out)
    manifest_path = _sibling(out, ".manifest.json")
    _write_table(out, ["alpha", "beta", "fraction", "acc", "nmi", "balance", "proportion", "variant"], rows)
    snapshot = {"fufs": base.to_dict(), "dataset": prov, "alphas": args.alphas, "betas": args.betas,
                "fractions": args.fractions, "restarts": args.restarts, "ablate_g": args.ablate_g}
    _write_json(manifest_path, _manifest("sweep", snapshot, started, [out, manifest_path]))
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairsel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic dataset CSV and its roles JSON")
    _add_data_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("select", help="run the optimizer and write the selection JSON")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--manifest", help="rerun from a previous select manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="cluster on top-ranked features over a fraction grid")
    _add_data_args(p)
    p.add_argument("--selection", required=True)
    p.add_argument("--fractions", type=_floats, default=list(FRACTIONS))
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metrics", type=_names, default=list(METRICS))
    p.add_argument("--clusters", type=int, help="number of clusters when labels are absent")
    p.add_argument("--threshold", type=float, help="split value for a continuous protected attribute")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--seed", type=int, default=11)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.1)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("sweep", help="alpha x beta grid, long-format CSV")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--alphas", type=_floats, default=[1.0])
    p.add_argument("--betas", type=_floats, default=[0.1])
    p.add_argument("--fractions", type=_floats, default=list(FRACTIONS))
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--ablate-g", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "out", None):
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except FairselError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CODES.get(type(e), 1)
    except (OSError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FloatingPointError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
