"""Deterministic box-constrained hyperparameter search.

A coarse product grid is evaluated first; the best grid point then seeds a
bounded Nelder-Mead refinement. Positive scale parameters are searched in
``log10`` coordinates, everything else linearly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import TuningFailedError

__all__ = ["Dim", "TuneResult", "tune_hyperparameters"]

STRATEGIES = ("grid+simplex", "grid")


@dataclass(frozen=True)
class Dim:
    """One search dimension."""

    name: str
    lo: float
    hi: float
    scale: str = "linear"
    points: int = 8

    def __post_init__(self):
        if self.scale not in ("linear", "log"):
            raise ValueError(f"scale must be 'linear' or 'log', got {self.scale!r}")
        if not self.lo <= self.hi:
            raise ValueError(f"empty range for {self.name}: [{self.lo}, {self.hi}]")
        if self.scale == "log" and not self.lo > 0:
            raise ValueError(f"log dimension {self.name} needs lo > 0")
        if self.points < 1:
            raise ValueError("points must be >= 1")

    def to_internal(self, x):
        return np.log10(x) if self.scale == "log" else x

    def from_internal(self, z):
        return 10.0 ** z if self.scale == "log" else z

    @property
    def bounds(self):
        return float(self.to_internal(self.lo)), float(self.to_internal(self.hi))

    def grid(self) -> np.ndarray:
        lo, hi = self.bounds
        if self.points == 1 or lo == hi:
            return np.array([(lo + hi) / 2.0])
        return np.linspace(lo, hi, self.points)


@dataclass
class TuneResult:
    values: dict
    objective: float
    n_evals: int

    def vector(self, names: Sequence[str]) -> list:
        return [self.values[k] for k in names]


def _safe(objective, x):
    try:
        v = float(objective(x))
    except (ArithmeticError, ValueError, np.linalg.LinAlgError):
        return math.inf
    return v if math.isfinite(v) else math.inf


def tune_hyperparameters(objective: Callable[[dict], float], box: Sequence[Dim],
                         strategy: str = "grid+simplex", mapper=map,
                         max_evals: int | None = None, xatol: float = 1e-4,
                         fatol: float = 1e-7) -> TuneResult:
    """Minimize ``objective(values_dict)`` over ``box``.

    Grid ties are broken by the lexicographically smallest hyperparameter
    vector. ``mapper`` evaluates grid points (any order-preserving map, for
    example an executor's ``map``); the result does not depend on it.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    box = list(box)
    names = [d.name for d in box]

    def natural(z):
        return {d.name: float(np.clip(d.from_internal(zi), d.lo, d.hi)) for d, zi in zip(box, z)}

    if not box:
        v = _safe(objective, {})
        if not math.isfinite(v):
            raise TuningFailedError("objective is not finite")
        return TuneResult({}, v, 1)

    grid = [np.array(z) for z in itertools.product(*(d.grid() for d in box))]
    points = [natural(z) for z in grid]
    values = list(mapper(partial(_safe, objective), points))
    n_evals = len(values)
    best_i = min(range(len(points)),
                 key=lambda i: (values[i], [points[i][k] for k in names]))
    if not math.isfinite(values[best_i]):
        raise TuningFailedError(f"objective non-finite on all {n_evals} grid points")
    best_z, best_v = grid[best_i], values[best_i]

    if strategy == "grid+simplex":
        bounds = [d.bounds for d in box]
        steps = []
        for d in box:
            lo, hi = d.bounds
            steps.append((hi - lo) / max(d.points - 1, 1) / 2.0)
        simplex = [best_z.copy()]
        for i, (lo, hi) in enumerate(bounds):
            v = best_z.copy()
            v[i] = v[i] + steps[i] if v[i] + steps[i] <= hi else v[i] - steps[i]
            simplex.append(v)
        simplex = np.array(simplex)
        # Degenerate dimensions (lo == hi) would make the simplex singular.
        active = [i for i, (lo, hi) in enumerate(bounds) if hi > lo]
        if active:
            z0 = best_z.copy()

            def f(sub):
                z = z0.copy()
                z[active] = sub
                return _safe(objective, natural(z))

            opts = {"xatol": xatol, "fatol": fatol,
                    "initial_simplex": simplex[[0] + [i + 1 for i in active]][:, active]}
            if max_evals is not None:
                opts["maxfev"] = max_evals
            res = minimize(f, best_z[active], method="Nelder-Mead",
                           bounds=[bounds[i] for i in active], options=opts)
            n_evals += int(res.nfev)
            if math.isfinite(res.fun) and res.fun < best_v:
                best_z = z0.copy()
                best_z[active] = res.x
                best_v = float(res.fun)

    return TuneResult(natural(best_z), best_v, n_evals)
