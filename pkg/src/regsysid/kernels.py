"""Regularization kernels: TC, DC, DI, SI, adapted DC and the time-domain OB kernel.

All kernels index their rows and columns ``1..n`` (lags for impulse
responses, basis positions for basis coefficients).

Hyperparameter layout of :attr:`KernelSpec.alpha` per family:

========  ==========================  ==========================================
family    alpha                       entry ``K(k, j)``
========  ==========================  ==========================================
TC        ``(c, lam)``                ``c * min(lam**k, lam**j)``
DC        ``(c, lam, rho)``           ``c * lam**((k+j)/2) * rho**|k-j|``
DI        ``(c, a)`` or ``(a,)``      ``c * a**k`` on the diagonal
SI        ``(c,)``                    ``c`` on the diagonal
ADC       ``(c, rho, gamma)``         ``c * profile(k+j, gamma) * rho**|k-j|``
OB_TIME   ``(c,)`` plus poles         ``c * (Psi Psi^T)[k, j]``
========  ==========================  ==========================================

The DI form without scale is selected with ``di_scale=False``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis import PoleSet, basis_impulse_matrix
from .errors import DomainError, IndefiniteKernelError

__all__ = [
    "FAMILIES",
    "PARAM_NAMES",
    "DECAY_PROFILES",
    "KernelSpec",
    "kernel_matrix",
    "kernel_factor",
    "psd_factor",
]

FAMILIES = ("TC", "DC", "DI", "SI", "ADC", "OB_TIME")

PARAM_NAMES = {
    "TC": ("c", "lam"),
    "DC": ("c", "lam", "rho"),
    "DI": ("c", "a_di"),
    "SI": ("c",),
    "ADC": ("c", "rho", "gamma"),
    "OB_TIME": ("c",),
}

# Sub-exponential decay profiles for the adapted DC kernel. Each must make
# lam(k + j) a valid kernel; (1 + x)^-gamma is a mixture of exponentials.
DECAY_PROFILES: dict[str, Callable[[np.ndarray, float], np.ndarray]] = {
    "poly": lambda x, gamma: (1.0 + x) ** (-gamma),
}


@dataclass(frozen=True)
class KernelSpec:
    family: str
    alpha: tuple
    poles: PoleSet | None = None
    m: int | None = None
    di_scale: bool = True
    profile: str = "poly"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "alpha", tuple(float(x) for x in np.atleast_1d(self.alpha)))
        expected = len(self.param_names)
        if len(self.alpha) != expected:
            raise DomainError(
                f"{self.family} expects {expected} hyperparameters {self.param_names}, "
                f"got {len(self.alpha)}")
        if self.family == "OB_TIME":
            if self.poles is None:
                raise DomainError("OB_TIME needs a pole set")
            if self.m is None:
                object.__setattr__(self, "m", len(self.poles) - 1)
        self.validate()

    @property
    def param_names(self) -> tuple:
        if self.family == "DI" and not self.di_scale:
            return ("a_di",)
        return PARAM_NAMES[self.family]

    @property
    def params(self) -> dict:
        return dict(zip(self.param_names, self.alpha))

    @property
    def scale(self) -> float:
        return self.params.get("c", 1.0)

    def validate(self):
        p = self.params
        if not all(np.isfinite(v) for v in p.values()):
            raise DomainError("hyperparameters must be finite")
        if "c" in p and p["c"] < 0:
            raise DomainError("scale c must be >= 0")
        if "lam" in p and not 0 < p["lam"] < 1:
            raise DomainError("lam must lie in (0, 1)")
        if "rho" in p and not abs(p["rho"]) <= 1:
            raise DomainError("rho must satisfy |rho| <= 1")
        if "a_di" in p and not 0 < p["a_di"] < 1:
            raise DomainError("a_di must lie in (0, 1)")
        if "gamma" in p and not p["gamma"] > 0:
            raise DomainError("gamma must be > 0")
        if self.family == "ADC" and self.profile not in DECAY_PROFILES:
            raise DomainError(f"unknown decay profile {self.profile!r}")

    def with_alpha(self, alpha) -> "KernelSpec":
        return KernelSpec(self.family, alpha, self.poles, self.m, self.di_scale, self.profile)

    def to_dict(self) -> dict:
        d = {"family": self.family, **self.params}
        if self.family == "OB_TIME":
            d["poles"] = [[z.real, z.imag] for z in self.poles]
            d["m"] = self.m
        if self.family == "DI":
            d["di_scale"] = self.di_scale
        if self.family == "ADC":
            d["profile"] = self.profile
        return d


def _ob_basis(spec: KernelSpec, n: int) -> np.ndarray:
    return basis_impulse_matrix(spec.poles, spec.m, n)


def kernel_matrix(spec: KernelSpec, n: int) -> np.ndarray:
    """Dense ``n x n`` kernel matrix for ``spec``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = spec.params
    k = np.arange(1, n + 1, dtype=float)
    kk, jj = k[:, None], k[None, :]
    fam = spec.family
    if fam == "TC":
        lk = p["lam"] ** k
        K = p["c"] * np.minimum(lk[:, None], lk[None, :])
    elif fam == "DC":
        K = p["c"] * p["lam"] ** ((kk + jj) / 2.0) * p["rho"] ** np.abs(kk - jj)
    elif fam == "DI":
        K = np.diag(spec.scale * p["a_di"] ** k)
    elif fam == "SI":
        K = p["c"] * np.eye(n)
    elif fam == "ADC":
        decay = DECAY_PROFILES[spec.profile]
        K = p["c"] * decay(kk + jj, p["gamma"]) * p["rho"] ** np.abs(kk - jj)
    else:
        psi = _ob_basis(spec, n)
        K = p["c"] * (psi @ psi.T)
    # Exact symmetry regardless of rounding in the entry formulas.
    return np.triu(K) + np.triu(K, 1).T


def kernel_factor(spec: KernelSpec, n: int) -> np.ndarray:
    """A matrix ``L`` with ``L @ L.T == kernel_matrix(spec, n)``.

    Diagonal and OB_TIME kernels have exact factors (the latter of rank
    ``m + 1``); the others go through :func:`psd_factor`.
    """
    fam = spec.family
    p = spec.params
    if fam == "SI":
        return np.sqrt(p["c"]) * np.eye(n)
    if fam == "DI":
        k = np.arange(1, n + 1, dtype=float)
        return np.diag(np.sqrt(spec.scale * p["a_di"] ** k))
    if fam == "OB_TIME":
        return np.sqrt(p["c"]) * _ob_basis(spec, n)
    L, _ = psd_factor(kernel_matrix(spec, n))
    return L


def psd_factor(K) -> tuple[np.ndarray, float]:
    """Cholesky factor of ``K + jitter * I`` with the smallest workable jitter.

    Jitter runs through ``0`` and then ``10^-16 .. 10^-8`` times
    ``trace(K) / n``. Returns ``(L, jitter)``.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if K.shape != (n, n):
        raise ValueError("K must be square")
    if not np.all(np.isfinite(K)):
        raise IndefiniteKernelError("kernel matrix has non-finite entries")
    if not np.any(K):
        return np.zeros_like(K), 0.0
    scale = np.trace(K) / n
    if not scale > 0:
        raise IndefiniteKernelError("kernel matrix has nonpositive trace")
    eye = np.eye(n)
    for jitter in [0.0] + [scale * 10.0 ** e for e in range(-16, -7)]:
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise IndefiniteKernelError(
        f"Cholesky failed with jitter up to {scale * 1e-8:.3g}")
