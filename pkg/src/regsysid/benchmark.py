"""Monte-Carlo benchmark over the four data collections.

Every run is reproducible from ``(base_seed, collection name, run index)``
alone, so runs are executed independently (optionally in worker processes)
and reduced in a fixed order. BLAS is pinned to one thread during a
campaign so results do not depend on the worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import DegenerateSignalError, DomainError, IdentError
from .lti import DataRecord, TransferFunction, add_noise, impulse_response, random_system, simulate
from .methods import FIR_ORDER, METHODS, TuningConfig, run_method

__all__ = [
    "COLLECTIONS",
    "CollectionSpec",
    "MethodConfig",
    "Run",
    "FitTable",
    "DEFAULT_METHODS",
    "fit_metric",
    "derive_seed",
    "generate_collection",
    "generate_run",
    "run_benchmark",
    "emit_table",
    "emit_raw",
    "parse_table_csv",
    "read_raw",
]

SYSTEM_ORDER = 30
DESK_COUNT = 30
FULL_COUNT = 250

# name -> (system class, N, SNR)
COLLECTIONS = {
    "S1D1": ("fast", 500, 10.0),
    "S1D2": ("fast", 375, 1.0),
    "S2D1": ("slow", 500, 10.0),
    "S2D2": ("slow", 375, 1.0),
}


@dataclass(frozen=True)
class CollectionSpec:
    name: str
    count: int = DESK_COUNT
    base_seed: int = 0

    def __post_init__(self):
        if self.name not in COLLECTIONS:
            raise DomainError(f"unknown collection {self.name!r}; choose from {list(COLLECTIONS)}")
        if self.count < 1:
            raise DomainError("count must be >= 1")

    @property
    def system_class(self) -> str:
        return COLLECTIONS[self.name][0]

    @property
    def N(self) -> int:
        return COLLECTIONS[self.name][1]

    @property
    def snr(self) -> float:
        return COLLECTIONS[self.name][2]


@dataclass(frozen=True)
class MethodConfig:
    name: str
    m: int | None = None

    def __post_init__(self):
        if self.name not in METHODS:
            raise DomainError(f"unknown method {self.name!r}; choose from {METHODS}")
        if self.name == "RFIR-TC":
            object.__setattr__(self, "m", None)
        elif self.m is None or self.m < 1:
            raise DomainError(f"{self.name} needs m >= 1")

    @property
    def label(self) -> str:
        return self.name if self.m is None else f"{self.name}:{self.m}"

    @classmethod
    def parse(cls, text: str) -> "MethodConfig":
        name, _, m = text.partition(":")
        return cls(name, int(m) if m else None)


DEFAULT_METHODS = tuple(
    [MethodConfig("RFIR-TC")]
    + [MethodConfig(name, m) for name in ("RFIR-LAG", "RLAG-TC", "RLAG-DI", "LS-LAG")
       for m in (10, 20, 30, 40)]
)


@dataclass(eq=False)
class Run:
    collection: str
    index: int
    seed: int
    system: TransferFunction
    data: DataRecord
    g0: np.ndarray


def fit_metric(g_hat, g_true) -> float:
    """Impulse-response fit in percent; 100 is a perfect match."""
    g_hat = np.asarray(g_hat, dtype=float).ravel()
    g_true = np.asarray(g_true, dtype=float).ravel()
    if g_hat.shape != g_true.shape:
        raise ValueError(f"length mismatch {g_hat.size} vs {g_true.size}")
    spread = float(np.sum((g_true - g_true.mean()) ** 2))
    if not spread > 0:
        raise DegenerateSignalError("true impulse response is constant")
    err = float(np.sum((g_true - g_hat) ** 2))
    return 100.0 * (1.0 - math.sqrt(err / spread))


def derive_seed(base_seed: int, name: str, index: int) -> int:
    digest = hashlib.sha256(f"{base_seed}:{name}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def generate_run(spec: CollectionSpec, index: int) -> Run:
    seed = derive_seed(spec.base_seed, spec.name, index)
    sys_ss, in_ss, noise_ss = np.random.SeedSequence(seed).spawn(3)
    tf = random_system(SYSTEM_ORDER, spec.system_class, np.random.default_rng(sys_ss))
    tf = TransferFunction(tf.num, tf.den, spec.system_class, seed)
    u = np.random.default_rng(in_ss).standard_normal(spec.N)
    y, sigma2 = add_noise(simulate(tf, u), spec.snr, np.random.default_rng(noise_ss))
    data = DataRecord(u, y, sigma2, {"collection": spec.name, "run": index, "seed": seed})
    return Run(spec.name, index, seed, tf, data, impulse_response(tf, FIR_ORDER))


def generate_collection(spec: CollectionSpec) -> list[Run]:
    return [generate_run(spec, i) for i in range(spec.count)]


@dataclass(frozen=True)
class RawFit:
    collection: str
    run: int
    method: str
    m: int | None
    fit: float | None
    error: str | None = None


@dataclass
class FitTable:
    rows: list  # (method, m) in display order
    columns: list  # collection names
    raw: list = field(default_factory=list)

    def fits(self, method: str, m, column: str) -> list[float]:
        return [r.fit for r in self.raw
                if r.method == method and r.m == m and r.collection == column and r.fit is not None]

    def cell(self, method: str, m, column: str) -> float | None:
        vals = self.fits(method, m, column)
        return math.fsum(vals) / len(vals) if vals else None

    def failures(self) -> list:
        return [r for r in self.raw if r.fit is None]


def _run_task(args):
    spec, index, methods, config = args
    run = generate_run(spec, index)
    cache: dict = {}
    out = []
    for mc in methods:
        try:
            est = run_method(mc.name, run.data, mc.m, config, cache)
            out.append(RawFit(spec.name, index, mc.name, mc.m, fit_metric(est.impulse, run.g0)))
        except (IdentError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            out.append(RawFit(spec.name, index, mc.name, mc.m, None,
                              f"{type(exc).__name__}: {exc}"))
    return out


def _init_worker():
    threadpool_limits(1)


def run_benchmark(collections, methods=DEFAULT_METHODS, parallelism: int = 1,
                  config: TuningConfig | None = None) -> FitTable:
    """Evaluate every method on every run of every collection.

    Failed (method, run) pairs are recorded with their error and excluded
    from the means.
    """
    collections = list(collections)
    methods = list(methods)
    if not collections or not methods:
        raise DomainError("need at least one collection and one method")
    tasks = [(spec, i, methods, config) for spec in collections for i in range(spec.count)]
    with threadpool_limits(1):
        if parallelism <= 1:
            results = [_run_task(t) for t in tasks]
        else:
            with ProcessPoolExecutor(max_workers=parallelism, initializer=_init_worker) as ex:
                results = list(ex.map(_run_task, tasks))
    raw = [r for chunk in results for r in chunk]
    rows = [(mc.name, mc.m) for mc in methods]
    return FitTable(rows, [c.name for c in collections], raw)


def _fmt(v):
    return "" if v is None else f"{v:.1f}"


def emit_table(table: FitTable, fmt: str = "text") -> str:
    """Render mean fits with one decimal as ``"csv"`` or aligned ``"text"``."""
    header = ["method", "m"] + list(table.columns)
    body = []
    for method, m in table.rows:
        body.append([method, "" if m is None else str(m)]
                    + [_fmt(table.cell(method, m, c)) for c in table.columns])
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    cells = [header] + [[c if c else "-" for c in row[:2]] + [c if c else "NA" for c in row[2:]]
                        for row in body]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    failed = table.failures()
    lines.append("")
    lines.append(f"excluded runs: {len(failed)}")
    for r in failed:
        label = r.method if r.m is None else f"{r.method} m={r.m}"
        lines.append(f"  {r.collection} run {r.run} {label}: {r.error}")
    return "\n".join(lines) + "\n"


RAW_HEADER = ["collection", "run", "method", "m", "fit", "error"]


def emit_raw(table: FitTable) -> str:
    """Per-run fits in full precision, failures included."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RAW_HEADER)
    for r in table.raw:
        w.writerow([r.collection, r.run, r.method, "" if r.m is None else r.m,
                    "" if r.fit is None else repr(r.fit), r.error or ""])
    return buf.getvalue()


def read_raw(text: str) -> FitTable:
    """Rebuild a :class:`FitTable` from :func:`emit_raw` output."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != RAW_HEADER:
        raise ValueError(f"expected raw-fit header {RAW_HEADER}, got {header}")
    raw, rows, cols = [], [], []
    for rec in reader:
        coll, run, method, m, fit, err = rec
        m = int(m) if m else None
        raw.append(RawFit(coll, int(run), method, m, float(fit) if fit else None, err or None))
        if (method, m) not in rows:
            rows.append((method, m))
        if coll not in cols:
            cols.append(coll)
    return FitTable(rows, cols, raw)


def parse_table_csv(text: str) -> dict:
    """``{(method, m): {collection: mean or None}}`` from :func:`emit_table` CSV."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    out = {}
    for rec in reader:
        key = (rec[0], int(rec[1]) if rec[1] else None)
        out[key] = {c: (float(v) if v else None) for c, v in zip(header[2:], rec[2:])}
    return out


def manifest(collections, methods=(), config: TuningConfig | None = None) -> dict:
    """Systems, seeds and settings needed to replay a campaign exactly."""
    runs = []
    for spec in collections:
        for run in generate_collection(spec):
            runs.append({
                "collection": spec.name,
                "run": run.index,
                "seed": run.seed,
                "sigma2": run.data.sigma2,
                "system": run.system.to_dict(),
            })
    return {
        "collections": [{"name": c.name, "count": c.count, "base_seed": c.base_seed}
                        for c in collections],
        "methods": [{"name": mc.name, "m": mc.m} for mc in methods],
        "tuning": None if config is None else config.__dict__,
        "runs": runs,
    }


def manifest_json(man: dict) -> str:
    return json.dumps(man, indent=1, sort_keys=True) + "\n"
