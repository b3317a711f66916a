"""Discrete-time SISO LTI systems: representation, simulation, generation.

Conventions
-----------
A :class:`TransferFunction` is stored in the delay operator ``q^-1``::

    G(q) = (b1 q^-1 + ... + b_nb q^-nb) / (1 + f1 q^-1 + ... + f_nf q^-nf)

so ``num = [b1, ..., b_nb]`` and ``den = [1, f1, ..., f_nf]``. Every system is
strictly proper. Impulse responses are plain 1-D arrays whose element ``0``
is the tap at lag 1.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import lfilter

from .errors import DataFormatError, DegenerateSignalError, StabilityError

__all__ = [
    "TransferFunction",
    "DataRecord",
    "impulse_response",
    "simulate",
    "add_noise",
    "random_system",
    "build_fir_regressor",
]


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """Strictly proper rational transfer function in ``q^-1``."""

    num: np.ndarray
    den: np.ndarray
    system_class: str | None = None
    seed: int | None = None

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float)).copy()
        den = np.atleast_1d(np.asarray(self.den, dtype=float)).copy()
        if den.size == 0 or den[0] != 1.0:
            raise ValueError("denominator must be monic (den[0] == 1)")
        if num.size == 0:
            raise ValueError("numerator must have at least one coefficient")
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise ValueError("coefficients must be finite")
        num.flags.writeable = False
        den.flags.writeable = False
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def order(self) -> int:
        return self.den.size - 1

    @property
    def strictly_proper(self) -> bool:
        return True

    def poles(self) -> np.ndarray:
        if self.order == 0:
            return np.zeros(0, dtype=complex)
        return np.roots(self.den)

    def max_pole_modulus(self) -> float:
        p = self.poles()
        return float(np.max(np.abs(p))) if p.size else 0.0

    def is_stable(self) -> bool:
        return self.max_pole_modulus() < 1.0

    def check_stable(self):
        rho = self.max_pole_modulus()
        if not rho < 1.0:
            raise StabilityError(f"unstable denominator: max pole modulus {rho:.6g} >= 1")

    def scaled(self, gain: float) -> "TransferFunction":
        return TransferFunction(gain * self.num, self.den, self.system_class, self.seed)

    def to_dict(self) -> dict:
        return {
            "num": [float(x) for x in self.num],
            "den": [float(x) for x in self.den],
            "class": self.system_class,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransferFunction":
        return cls(d["num"], d["den"], d.get("class"), d.get("seed"))


@dataclass(eq=False)
class DataRecord:
    """One identification experiment with sampling interval 1."""

    u: np.ndarray
    y: np.ndarray
    sigma2: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).ravel()
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.u.size != self.y.size:
            raise ValueError(f"len(u)={self.u.size} differs from len(y)={self.y.size}")
        if self.u.size < 1:
            raise ValueError("a data record needs at least one sample")
        if not self.sigma2 >= 0:
            raise ValueError("sigma2 must be nonnegative")

    @property
    def N(self) -> int:
        return self.u.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "u", "y"])
        for t, (ut, yt) in enumerate(zip(self.u, self.y), start=1):
            w.writerow([t, repr(float(ut)), repr(float(yt))])
        return buf.getvalue()

    def write_csv(self, path):
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "DataRecord":
        lines = text.splitlines()
        if not lines or [c.strip() for c in lines[0].split(",")] != ["t", "u", "y"]:
            raise DataFormatError("expected header 't,u,y'", line=1)
        u, y = [], []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise DataFormatError(f"expected 3 fields, got {len(parts)}", line=lineno)
            try:
                t = int(parts[0])
                ut, yt = float(parts[1]), float(parts[2])
            except ValueError as exc:
                raise DataFormatError(f"cannot parse {line!r}", line=lineno) from exc
            if t != len(u) + 1:
                raise DataFormatError(f"expected t={len(u) + 1}, got {t}", line=lineno)
            if not (math.isfinite(ut) and math.isfinite(yt)):
                raise DataFormatError("non-finite value", line=lineno)
            u.append(ut)
            y.append(yt)
        if not u:
            raise DataFormatError("no data rows", line=len(lines))
        return cls(np.array(u), np.array(y))

    @classmethod
    def read_csv(cls, path) -> "DataRecord":
        return cls.from_csv(Path(path).read_text())


def impulse_response(tf: TransferFunction, length: int) -> np.ndarray:
    """First ``length`` taps of the impulse response, starting at lag 1."""
    if length < 1:
        raise ValueError("length must be >= 1")
    tf.check_stable()
    x = np.zeros(length)
    x[0] = 1.0
    # Driving with a lag-0 impulse, b0 = 0 is dropped so element 0 is lag 1.
    return lfilter(tf.num, tf.den, x)


def simulate(tf: TransferFunction, u) -> np.ndarray:
    """Noise-free output with zero initial conditions."""
    tf.check_stable()
    u = np.asarray(u, dtype=float).ravel()
    return lfilter(np.r_[0.0, tf.num], tf.den, u)


def add_noise(y0, snr: float, rng: np.random.Generator):
    """Add white Gaussian noise at a given output SNR.

    The noise variance is ``var(y0) / snr`` with the unbiased sample variance
    of the noise-free output. Returns ``(y, sigma2)``.
    """
    if not snr > 0:
        raise ValueError("snr must be positive")
    y0 = np.asarray(y0, dtype=float).ravel()
    v = float(np.var(y0, ddof=1)) if y0.size > 1 else 0.0
    if not v > 0:
        raise DegenerateSignalError("noise-free output has zero variance")
    sigma2 = v / snr
    return y0 + math.sqrt(sigma2) * rng.standard_normal(y0.size), sigma2


def _conjugate_pairs(rng, count, rmin, rmax):
    r = rng.uniform(rmin, rmax, count)
    theta = rng.uniform(0.0, np.pi, count)
    z = r * np.exp(1j * theta)
    return np.concatenate([z, z.conj()])


def _energy_horizon(rho: float) -> int:
    return int(max(1000, 3 * math.ceil(math.log(1e-12) / math.log(rho))))


def random_system(order: int, system_class: str, rng: np.random.Generator,
                  max_retries: int = 100) -> TransferFunction:
    """Random stable strictly proper system with unit impulse-response energy.

    ``fast`` systems keep every pole modulus in [0.4, 0.95]. ``slow`` systems
    additionally get ``ceil(order/10)`` pole pairs with modulus in
    [0.95, 0.99]. Zeros are ``order - 1`` values with modulus up to 0.95.
    """
    if order < 2 or order % 2:
        raise ValueError("order must be even and >= 2")
    if system_class not in ("fast", "slow"):
        raise ValueError("system_class must be 'fast' or 'slow'")
    n_pairs = order // 2
    n_slow = math.ceil(order / 10) if system_class == "slow" else 0
    for _ in range(max_retries):
        poles = np.concatenate([
            _conjugate_pairs(rng, n_pairs - n_slow, 0.4, 0.95),
            _conjugate_pairs(rng, n_slow, 0.95, 0.99),
        ])
        zeros = _conjugate_pairs(rng, (order - 1) // 2, 0.0, 0.95)
        if (order - 1) % 2:
            zeros = np.r_[zeros, rng.uniform(-0.95, 0.95)]
        den = np.real(np.poly(poles))
        num = np.real(np.poly(zeros))
        tf = TransferFunction(num, den, system_class)
        rho = tf.max_pole_modulus()
        if not rho < 1.0:
            continue
        if system_class == "fast" and rho > 0.95:
            continue
        if system_class == "slow" and not rho > 0.95:
            continue
        g = impulse_response(tf, _energy_horizon(rho))
        energy = float(np.sqrt(np.dot(g, g)))
        if not (np.isfinite(energy) and energy > 0):
            continue
        return tf.scaled(1.0 / energy)
    raise RuntimeError(f"random_system: constraints not met after {max_retries} draws")


def build_fir_regressor(u, N: int, n: int) -> np.ndarray:
    """``N x n`` regressor with row ``i`` equal to ``[u(i-1), ..., u(i-n)]``.

    Inputs before ``t = 1`` are taken as zero.
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.size < N:
        raise ValueError(f"need len(u) >= N ({u.size} < {N})")
    if n < 1:
        raise ValueError("n must be >= 1")
    col = np.r_[0.0, u[: N - 1]]
    return toeplitz(col, np.zeros(n))
