"""End-to-end estimation pipelines.

=========  ===============================================================
RFIR-TC    FIR(125) with a tuned TC kernel on the impulse response
RFIR-LAG   FIR(125) with the time-domain Laguerre (OB) kernel; pole tuned
RLAG-TC    Laguerre model, TC kernel on the coefficients; pole tuned
RLAG-DI    Laguerre model, DI kernel on the coefficients; pole tuned
LS-LAG     Laguerre model, plain least squares at the RLAG-TC pole
=========  ===============================================================

``m`` is the number of Laguerre functions throughout this module. All
hyperparameters, the pole included, are tuned by minimizing
:func:`~regsysid.estimators.marglik_from_factor`. The noise variance is
estimated beforehand with :func:`~regsysid.estimators.estimate_sigma2`
unless ``sigma2_mode="joint"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import basis_impulse_matrix, basis_regressor, laguerre_poleset
from .errors import DomainError, EstimationError
from .estimators import (RegressionStats, estimate_sigma2, ls, marglik_from_factor,
                         rls)
from .kernels import KernelSpec, kernel_factor, kernel_matrix
from .lti import DataRecord, build_fir_regressor
from .tuning import Dim, tune_hyperparameters

__all__ = [
    "FIR_ORDER",
    "METHODS",
    "TuningConfig",
    "EstimateResult",
    "method_rfir",
    "method_rlag",
    "method_lslag",
    "run_method",
]

FIR_ORDER = 125
METHODS = ("RFIR-TC", "RFIR-LAG", "RLAG-TC", "RLAG-DI", "LS-LAG")


@dataclass(frozen=True)
class TuningConfig:
    strategy: str = "grid+simplex"
    sigma2_mode: str = "estimate"
    grid_points: int = 8
    pole_bound: float = 0.95
    pole_step: float = 0.05
    di_scale: bool = True
    max_evals: int | None = None

    def __post_init__(self):
        if self.sigma2_mode not in ("estimate", "joint"):
            raise DomainError(f"sigma2_mode must be 'estimate' or 'joint', got {self.sigma2_mode!r}")
        if not 0 < self.pole_bound < 1:
            raise DomainError("pole_bound must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "TuningConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown tuning keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EstimateResult:
    method: str
    impulse: np.ndarray
    hyper: dict
    sigma2: float
    objective: float
    coefficients: np.ndarray | None = None
    m: int | None = None

    @property
    def pole(self) -> float | None:
        return self.hyper.get("a")

    def summary(self) -> dict:
        return {
            "method": self.method,
            "m": self.m,
            "hyperparameters": dict(self.hyper),
            "sigma2": self.sigma2,
            "objective": self.objective,
        }


def _scale_hint(data: DataRecord) -> float:
    vu = float(np.var(data.u))
    vy = float(np.var(data.y))
    return vy / vu if vu > 0 and vy > 0 else 1.0


def _kernel_dims(family: str, s: float, cfg: TuningConfig) -> list[Dim]:
    g = cfg.grid_points
    c = Dim("c", 1e-4 * s, 1e2 * s, "log", g)
    decay = Dim("lam", 0.3, 0.999, "linear", g)
    if family == "TC":
        return [c, decay]
    if family == "DC":
        return [c, decay, Dim("rho", -0.99, 0.99, "linear", g)]
    if family == "DI":
        a_di = Dim("a_di", 0.3, 0.999, "linear", g)
        return [c, a_di] if cfg.di_scale else [a_di]
    if family in ("SI", "OB_TIME"):
        return [c]
    if family == "ADC":
        return [c, Dim("rho", -0.99, 0.99, "linear", g), Dim("gamma", 0.1, 10.0, "log", g)]
    raise DomainError(f"unknown kernel family {family!r}")


def _pole_dim(cfg: TuningConfig) -> Dim:
    b = cfg.pole_bound
    return Dim("a", -b, b, "linear", int(round(2 * b / cfg.pole_step)) + 1)


def _sigma2_dim(data: DataRecord) -> Dim:
    vy = float(np.var(data.y))
    return Dim("sigma2", 1e-4 * vy, vy, "log", 8)


def _check_input(data: DataRecord):
    if not np.any(data.u):
        raise EstimationError("input is identically zero: regressor has rank 0")


def _split_fixed(dims, fixed):
    fixed = dict(fixed or {})
    names = {d.name for d in dims}
    unknown = set(fixed) - names
    if unknown:
        raise DomainError(f"cannot fix unknown hyperparameters {sorted(unknown)}")
    return [d for d in dims if d.name not in fixed], fixed


def _tune(objective, dims, fixed, cfg):
    free, fixed = _split_fixed(dims, fixed)
    res = tune_hyperparameters(lambda v: objective({**fixed, **v}), free,
                               strategy=cfg.strategy, max_evals=cfg.max_evals)
    values = {d.name: ({**fixed, **res.values})[d.name] for d in dims}
    return values, res.objective


def method_rfir(data: DataRecord, family: str = "TC", m: int | None = None,
                n: int = FIR_ORDER, config: TuningConfig | None = None,
                fixed: dict | None = None, name: str | None = None) -> EstimateResult:
    """Regularized FIR estimate with a tuned kernel.

    ``family="OB_TIME"`` uses the time-domain Laguerre kernel with ``m``
    functions and tunes its pole ``a`` together with the scale ``c``.
    ``fixed`` pins any hyperparameters (``a``, ``c``, ``lam``, ...) instead
    of tuning them.
    """
    cfg = config or TuningConfig()
    _check_input(data)
    Phi = build_fir_regressor(data.u, data.N, n)
    stats = RegressionStats.from_data(Phi, data.y)
    s = _scale_hint(data)
    dims = _kernel_dims(family, s, cfg)
    if family == "OB_TIME":
        if m is None or m < 1:
            raise DomainError("OB_TIME kernel needs m >= 1 basis functions")
        dims = [_pole_dim(cfg)] + dims
    if cfg.sigma2_mode == "joint":
        dims = dims + [_sigma2_dim(data)]
        sigma2_hat = None
    else:
        sigma2_hat = estimate_sigma2(data.u, data.y)

    psi_cache: dict = {}

    def basis(a):
        if a not in psi_cache:
            psi = basis_impulse_matrix(laguerre_poleset(a, m - 1), m - 1, n)
            psi_cache[a] = (psi, stats.project(psi))
        return psi_cache[a]

    def spec_for(v):
        alpha = [v[k] for k in ("c", "lam", "rho", "a_di", "gamma") if k in v]
        if family == "OB_TIME":
            return KernelSpec("OB_TIME", [v["c"]], laguerre_poleset(v["a"], m - 1))
        return KernelSpec(family, alpha, di_scale=cfg.di_scale)

    def objective(v):
        sigma2 = v.get("sigma2", sigma2_hat)
        if family == "OB_TIME":
            _, st = basis(v["a"])
            return marglik_from_factor(st, math.sqrt(v["c"]) * np.eye(m), sigma2)
        return marglik_from_factor(stats, kernel_factor(spec_for(v), n), sigma2)

    values, obj = _tune(objective, dims, fixed, cfg)
    sigma2 = values.get("sigma2", sigma2_hat)
    spec = spec_for(values)
    if family == "OB_TIME":
        L = math.sqrt(values["c"]) * basis(values["a"])[0]
        K = L @ L.T
    else:
        L = kernel_factor(spec, n)
        K = kernel_matrix(spec, n)
    theta = rls(Phi, data.y, K, sigma2, factor=L)
    impulse = np.zeros(FIR_ORDER)
    k = min(n, FIR_ORDER)
    impulse[:k] = theta[:k]
    label = name or ("RFIR-LAG" if family == "OB_TIME" else f"RFIR-{family}")
    return EstimateResult(label, impulse, values, sigma2, obj, None, m)


def method_rlag(data: DataRecord, m: int, family: str = "TC",
                config: TuningConfig | None = None, fixed: dict | None = None,
                name: str | None = None) -> EstimateResult:
    """Regularized Laguerre-model estimate with ``m`` basis functions.

    The regressor filters the input through each Laguerre function (zero
    initial conditions); the pole ``a`` and the coefficient-kernel
    hyperparameters are tuned jointly.
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    if family == "OB_TIME":
        raise DomainError("OB_TIME is an impulse-response kernel; use method_rfir")
    cfg = config or TuningConfig()
    _check_input(data)
    s = _scale_hint(data)
    dims = [_pole_dim(cfg)] + _kernel_dims(family, s, cfg)
    if cfg.sigma2_mode == "joint":
        dims = dims + [_sigma2_dim(data)]
        sigma2_hat = None
    else:
        sigma2_hat = estimate_sigma2(data.u, data.y)

    reg_cache: dict = {}

    def regression(a):
        if a not in reg_cache:
            if len(reg_cache) > 256:
                reg_cache.clear()
            Phi = basis_regressor(data.u, laguerre_poleset(a, m - 1), m - 1)
            reg_cache[a] = (Phi, RegressionStats.from_data(Phi, data.y))
        return reg_cache[a]

    def spec_for(v):
        alpha = [v[k] for k in ("c", "lam", "rho", "a_di", "gamma") if k in v]
        return KernelSpec(family, alpha, di_scale=cfg.di_scale)

    def objective(v):
        sigma2 = v.get("sigma2", sigma2_hat)
        _, st = regression(v["a"])
        return marglik_from_factor(st, kernel_factor(spec_for(v), m), sigma2)

    values, obj = _tune(objective, dims, fixed, cfg)
    sigma2 = values.get("sigma2", sigma2_hat)
    spec = spec_for(values)
    Phi, _ = regression(values["a"])
    g = rls(Phi, data.y, kernel_matrix(spec, m), sigma2, factor=kernel_factor(spec, m))
    psi = basis_impulse_matrix(laguerre_poleset(values["a"], m - 1), m - 1, FIR_ORDER)
    return EstimateResult(name or f"RLAG-{family}", psi @ g, values, sigma2, obj, g, m)


def method_lslag(data: DataRecord, m: int, a_from) -> EstimateResult:
    """Unregularized Laguerre fit at the pole of a previous estimate.

    ``a_from`` is an :class:`EstimateResult` carrying a pole, or the pole.
    """
    a = a_from.pole if isinstance(a_from, EstimateResult) else a_from
    if a is None:
        raise DomainError("a_from carries no Laguerre pole")
    _check_input(data)
    poles = laguerre_poleset(a, m - 1)
    Phi = basis_regressor(data.u, poles, m - 1)
    g = ls(Phi, data.y)
    resid = data.y - Phi @ g
    impulse = basis_impulse_matrix(poles, m - 1, FIR_ORDER) @ g
    rss = float(resid @ resid)
    dof = data.N - m
    return EstimateResult("LS-LAG", impulse, {"a": float(a)},
                          rss / dof if dof > 0 else float("nan"), rss, g, m)


def run_method(name: str, data: DataRecord, m: int | None = None,
               config: TuningConfig | None = None, cache: dict | None = None) -> EstimateResult:
    """Dispatch one of :data:`METHODS` by name.

    ``cache`` (a dict) shares RLAG-TC results with LS-LAG on the same data.
    """
    cache = {} if cache is None else cache
    if name not in METHODS:
        raise DomainError(f"unknown method {name!r}; choose from {METHODS}")
    if name == "RFIR-TC":
        return method_rfir(data, "TC", config=config)
    if m is None:
        raise DomainError(f"{name} needs m")
    if name == "RFIR-LAG":
        return method_rfir(data, "OB_TIME", m=m, config=config)
    if name in ("RLAG-TC", "RLAG-DI"):
        key = (name, m)
        if key not in cache:
            cache[key] = method_rlag(data, m, name.split("-")[1], config=config)
        return cache[key]
    base = run_method("RLAG-TC", data, m, config, cache)
    return method_lslag(data, m, base)
