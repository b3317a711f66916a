"""Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import benchmark as bm
from .errors import DataTooShortError, IdentError
from .lti import DataRecord
from .methods import METHODS, TuningConfig, run_method

MIN_SAMPLES = 10

CONFIG_KEYS = {
    "databank": {"seed", "count", "collections", "out"},
    "benchmark": {"seed", "count", "collections", "methods", "out", "parallel", "tuning"},
    "estimate": {"data", "method", "m", "out", "tuning"},
}
REQUIRED_KEYS = {
    "databank": ["seed", "collections"],
    "benchmark": ["seed", "collections", "methods"],
    "estimate": ["method"],
}


class ConfigError(Exception):
    pass


def _load_config(args) -> dict:
    if not args.config:
        return {}
    try:
        cfg = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    allowed = CONFIG_KEYS[args.command]
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    missing = [k for k in REQUIRED_KEYS[args.command] if k not in cfg]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
    return cfg


def _merged(args, cfg: dict, key: str, default=None):
    v = getattr(args, key, None)
    if v is not None:
        return v
    return cfg.get(key, default)


def _require_out(args, cfg) -> Path:
    out = _merged(args, cfg, "out")
    if out is None:
        raise ConfigError("missing config keys: out (or pass --out)")
    return Path(out)


def _collections(args, cfg) -> list:
    names = cfg.get("collections", list(bm.COLLECTIONS))
    if not isinstance(names, list) or not names:
        raise ConfigError("collections must be a nonempty list")
    seed = _merged(args, cfg, "seed", 0)
    count = bm.FULL_COUNT if getattr(args, "full", False) else _merged(args, cfg, "count", bm.DESK_COUNT)
    try:
        return [bm.CollectionSpec(n, int(count), int(seed)) for n in names]
    except (IdentError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _methods(cfg) -> list:
    items = cfg.get("methods")
    if items is None:
        return list(bm.DEFAULT_METHODS)
    if not isinstance(items, list) or not items:
        raise ConfigError("methods must be a nonempty list")
    out = []
    try:
        for it in items:
            if isinstance(it, str):
                out.append(bm.MethodConfig.parse(it))
            elif isinstance(it, dict):
                extra = set(it) - {"name", "m"}
                if extra:
                    raise ConfigError(f"unknown method keys: {', '.join(sorted(extra))}")
                out.append(bm.MethodConfig(it["name"], it.get("m")))
            else:
                raise ConfigError(f"cannot parse method entry {it!r}")
    except (IdentError, KeyError, ValueError) as exc:
        raise ConfigError(f"invalid method entry: {exc}") from exc
    return out


def _tuning(cfg):
    t = cfg.get("tuning")
    if t is None:
        return None
    try:
        return TuningConfig.from_dict(t)
    except (IdentError, TypeError) as exc:
        raise ConfigError(f"invalid tuning settings: {exc}") from exc


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_databank(args) -> int:
    cfg = _load_config(args)
    out = _require_out(args, cfg)
    specs = _collections(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    man = bm.manifest(specs)
    for spec in specs:
        d = out / spec.name
        d.mkdir(exist_ok=True)
        for run in bm.generate_collection(spec):
            _atomic_write(d / f"run_{run.index:03d}.csv", run.data.to_csv())
    for entry in man["runs"]:
        entry["file"] = f"{entry['collection']}/run_{entry['run']:03d}.csv"
    _atomic_write(out / "manifest.json", bm.manifest_json(man))
    print(f"wrote {len(man['runs'])} data sets to {out}")
    return 0


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    out = _require_out(args, cfg)
    method = _merged(args, cfg, "method")
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    m = _merged(args, cfg, "m", None if method == "RFIR-TC" else 40)
    data_path = _merged(args, cfg, "data")
    if data_path is None:
        raise ConfigError("missing config keys: data (or pass --data)")
    config = _tuning(cfg)
    data = DataRecord.read_csv(data_path)
    if data.N < MIN_SAMPLES:
        raise DataTooShortError(f"N={data.N} < {MIN_SAMPLES} samples")
    est = run_method(method, data, m, config)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["k,g_hat"] + [f"{k},{v!r}" for k, v in enumerate(est.impulse.tolist(), start=1)]
    _atomic_write(out / "estimate.csv", "\n".join(lines) + "\n")
    print(json.dumps(est.summary(), indent=1, sort_keys=True))
    return 0


def _write_tables(out: Path, table) -> str:
    text = bm.emit_table(table, "text")
    _atomic_write(out / "table.txt", text)
    _atomic_write(out / "table.csv", bm.emit_table(table, "csv"))
    return text


def cmd_benchmark(args) -> int:
    cfg = _load_config(args)
    out = _require_out(args, cfg)
    specs = _collections(args, cfg)
    methods = _methods(cfg)
    config = _tuning(cfg)
    parallel = int(_merged(args, cfg, "parallel", 1))
    if parallel < 1:
        raise ConfigError("parallel must be >= 1")
    out.mkdir(parents=True, exist_ok=True)
    table = bm.run_benchmark(specs, methods, parallel, config)
    _atomic_write(out / "raw_fits.csv", bm.emit_raw(table))
    text = _write_tables(out, table)
    _atomic_write(out / "manifest.json", bm.manifest_json(bm.manifest(specs, methods, config)))
    print(text, end="")
    return 0


def cmd_table(args) -> int:
    if args.raw is None and args.out is None:
        raise ConfigError("pass --raw PATH or --out DIR")
    raw_path = Path(args.raw) if args.raw else Path(args.out) / "raw_fits.csv"
    try:
        table = bm.read_raw(raw_path.read_text())
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        _write_tables(Path(args.out), table)
    print(bm.emit_table(table, args.format), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regsysid",
                                description="Kernel-regularized identification with orthonormal bases.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeds=True):
        sp.add_argument("--config", help="JSON run-config file")
        sp.add_argument("--out", help="output directory")
        if seeds:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--count", type=int, help="runs per collection")
            sp.add_argument("--full", action="store_true",
                            help=f"use {bm.FULL_COUNT} runs per collection")

    sp = sub.add_parser("databank", help="generate data collections")
    common(sp)
    sp.set_defaults(func=cmd_databank)

    sp = sub.add_parser("estimate", help="estimate one impulse response from a t,u,y CSV")
    common(sp, seeds=False)
    sp.add_argument("--data", help="input CSV with header t,u,y")
    sp.add_argument("--method", choices=METHODS)
    sp.add_argument("--m", type=int, help="number of Laguerre functions")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("benchmark", help="run a Monte-Carlo campaign")
    common(sp)
    sp.add_argument("--parallel", type=int, help="worker processes (results do not depend on it)")
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("table", help="re-emit a table from raw_fits.csv")
    sp.add_argument("--raw", help="raw_fits.csv path (default OUT/raw_fits.csv)")
    sp.add_argument("--out", help="directory to write table.txt and table.csv into")
    sp.add_argument("--format", choices=("text", "csv"), default="text")
    sp.set_defaults(func=cmd_table)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"regsysid {args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except (IdentError, OSError, ArithmeticError, ValueError) as exc:
        print(f"regsysid {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
