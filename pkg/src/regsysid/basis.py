"""Takenaka-Malmquist orthonormal basis functions and their kernels.

Frequency-domain functions evaluate the Malmquist system on the unit circle,
``z = e^{i omega}``::

    phi_k(z) = sqrt(1 - |a_k|^2) / (1 - conj(a_k) z)
               * prod_{j<k} (a_j - z) / (1 - conj(a_j) z) * |a_j| / a_j

with ``|a_j| / a_j := -1`` when ``a_j == 0``. Here ``z`` plays the role of the
delay, so the coefficient of ``z^t`` is the time-domain value ``phi_k(t)``.

Time-domain basis matrices are real. Real poles use the formula above
directly (so Laguerre columns may differ from the textbook Laguerre model by
a factor ``(-1)^k`` for ``a > 0``). A conjugate pair ``(a, conj(a))`` is
realized by two real second-order sections spanning the same space as the
two complex Malmquist functions; the pair is a unitary rotation of them, so
every kernel is unchanged.

Index convention: ``m`` in this module is the highest basis index, i.e. a
basis matrix has ``m + 1`` columns. Row ``t`` of a basis matrix holds lag
``t + 1`` so that the basis functions are strictly proper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidPoleError, RealnessError

__all__ = [
    "PoleSet",
    "laguerre_poleset",
    "malmquist_freq",
    "blaschke",
    "ob_kernel_freq_sum",
    "ob_kernel_freq_cd",
    "default_truncation",
    "basis_impulse_matrix",
    "basis_regressor",
    "basis_to_csv",
]

CD_DIAGONAL_THRESHOLD = 1e-8
REAL_TOL = 1e-12


@dataclass(frozen=True)
class PoleSet:
    """Ordered multiset of basis poles, all strictly inside the unit disc.

    Conjugate closure is only enforced where real time-domain functions are
    built (:func:`basis_impulse_matrix`, :func:`basis_regressor`).
    """

    poles: tuple

    def __post_init__(self):
        p = tuple(complex(x) for x in np.atleast_1d(self.poles))
        if not p:
            raise InvalidPoleError("a pole set needs at least one pole")
        for k, a in enumerate(p):
            if not abs(a) < 1.0:
                raise InvalidPoleError(f"pole {k} = {a} has modulus >= 1")
        object.__setattr__(self, "poles", p)

    def __len__(self):
        return len(self.poles)

    def __getitem__(self, k):
        return self.poles[k]

    def as_array(self) -> np.ndarray:
        return np.array(self.poles, dtype=complex)

    @property
    def rho_max(self) -> float:
        return max(abs(a) for a in self.poles)

    def sections(self, m: int | None = None) -> list[tuple]:
        """Split poles ``0..m`` into real poles and adjacent conjugate pairs.

        Returns a list of ``(a,)`` or ``(a, conj(a))`` tuples. Raises
        :class:`RealnessError` if a complex pole lacks its adjacent partner.
        """
        m = len(self) - 1 if m is None else m
        _check_index(self, m)
        out = []
        k = 0
        while k <= m:
            a = self.poles[k]
            if abs(a.imag) <= REAL_TOL:
                out.append((a.real,))
                k += 1
                continue
            if k + 1 > m or abs(self.poles[k + 1] - a.conjugate()) > REAL_TOL:
                raise RealnessError(
                    f"complex pole {k} = {a} is not followed by its conjugate "
                    f"within poles 0..{m}")
            out.append((a, a.conjugate()))
            k += 2
        return out

    def is_conjugate_closed(self, m: int | None = None) -> bool:
        try:
            self.sections(m)
        except RealnessError:
            return False
        return True


def laguerre_poleset(a: float, m: int) -> PoleSet:
    """``m + 1`` copies of the real pole ``a``."""
    if isinstance(a, complex) and a.imag != 0:
        raise InvalidPoleError("Laguerre pole must be real")
    a = float(np.real(a))
    if not abs(a) < 1.0:
        raise InvalidPoleError(f"Laguerre pole {a} has modulus >= 1")
    if m < 0:
        raise ValueError("m must be >= 0")
    return PoleSet((a,) * (m + 1))


def _check_index(poles, m):
    if not 0 <= m < len(poles):
        raise IndexError(f"basis index {m} out of range for {len(poles)} poles")


def _unimodular(a: complex) -> complex:
    return -1.0 if a == 0 else abs(a) / a


def _allpass(a: complex, z):
    return (a - z) / (1.0 - a.conjugate() * z) * _unimodular(a)


def _head(a: complex, z):
    return math.sqrt(1.0 - abs(a) ** 2) / (1.0 - a.conjugate() * z)


def _unit(omega):
    return np.exp(1j * np.asarray(omega, dtype=float))


def malmquist_freq(poles: PoleSet, k: int, omega):
    """``phi_k(e^{i omega})``; vectorized over ``omega``."""
    _check_index(poles, k)
    z = _unit(omega)
    val = _head(poles[k], z)
    for j in range(k):
        val = val * _allpass(poles[j], z)
    return val


def blaschke(poles: PoleSet, count: int, omega):
    """Product of the first ``count`` all-pass factors at ``e^{i omega}``."""
    if not 0 <= count <= len(poles):
        raise ValueError(f"count {count} exceeds {len(poles)} poles")
    z = _unit(omega)
    val = np.ones_like(z)
    for j in range(count):
        val = val * _allpass(poles[j], z)
    return val if np.ndim(omega) else complex(val)


def _basis_values(poles, m, z):
    """Rows ``phi_0(z) .. phi_m(z)`` via one running all-pass product."""
    chain = np.ones_like(z)
    vals = []
    for k in range(m + 1):
        a = poles[k]
        vals.append(_head(a, z) * chain)
        chain = chain * _allpass(a, z)
    return vals


def ob_kernel_freq_sum(poles: PoleSet, m: int, omega, omega_prime):
    """Direct sum ``sum_{k<=m} phi_k(e^{iw}) conj(phi_k(e^{iw'}))``."""
    _check_index(poles, m)
    z, zp = np.broadcast_arrays(_unit(omega), _unit(omega_prime))
    out = np.zeros(z.shape, dtype=complex)
    for a, b in zip(_basis_values(poles, m, z), _basis_values(poles, m, zp)):
        out += a * np.conj(b)
    return out if out.ndim else complex(out)


def ob_kernel_freq_cd(poles: PoleSet, m: int, omega, omega_prime,
                      threshold: float = CD_DIAGONAL_THRESHOLD):
    """Christoffel-Darboux closed form of the frequency-domain OB kernel.

    Where ``|1 - e^{i(omega - omega')}| < threshold`` the direct sum is used
    instead of the (singular) quotient.
    """
    _check_index(poles, m)
    w, wp = np.broadcast_arrays(np.asarray(omega, dtype=float),
                                np.asarray(omega_prime, dtype=float))
    denom = 1.0 - np.exp(1j * (w - wp))
    near = np.abs(denom) < threshold
    safe = np.where(near, 1.0, denom)
    bw = blaschke(poles, m + 1, w)
    bwp = blaschke(poles, m + 1, wp)
    out = np.asarray((1.0 - bw * np.conj(bwp)) / safe, dtype=complex)
    if np.any(near):
        out = np.where(near, ob_kernel_freq_sum(poles, m, w, wp), out)
    return out if out.ndim else complex(out)


def default_truncation(poles: PoleSet, minimum: int = 125, tail: float = 1e-9) -> int:
    """Truncation length with a discarded tail below ``tail`` (at least ``minimum``)."""
    rho = poles.rho_max
    if rho == 0:
        return max(minimum, len(poles) + 1)
    return max(minimum, math.ceil(math.log(tail) / math.log(rho)))


def _pair_constants(a: complex):
    d1 = -2.0 * a.real
    d2 = abs(a) ** 2
    # Autocovariance at lags 0 and 1 of the impulse response of 1 / (1 + d1 z + d2 z^2).
    r0 = (1.0 + d2) / ((1.0 - d2) * ((1.0 + d2) ** 2 - d1 ** 2))
    r1 = -d1 * r0 / (1.0 + d2)
    return d1, d2, r0, r1


def _cascade(sections, x):
    """Filter ``x`` through every basis function; returns ``len(x) x (m+1)``."""
    cols = []
    state = np.asarray(x, dtype=float)
    last = len(sections) - 1
    for i, sec in enumerate(sections):
        if len(sec) == 1:
            a = sec[0]
            den = [1.0, -a]
            cols.append(lfilter([math.sqrt(1.0 - a * a)], den, state))
            if i < last:
                s = 1.0 if a > 0 else -1.0
                state = lfilter([s * a, -s], den, state)
        else:
            d1, d2, r0, r1 = _pair_constants(sec[0])
            den = [1.0, d1, d2]
            cols.append(lfilter(np.array([1.0, 1.0]) / math.sqrt(2.0 * (r0 + r1)), den, state))
            cols.append(lfilter(np.array([1.0, -1.0]) / math.sqrt(2.0 * (r0 - r1)), den, state))
            if i < last:
                state = lfilter([d2, d1, 1.0], den, state)
    return np.column_stack(cols)


def basis_impulse_matrix(poles: PoleSet, m: int, T: int | None = None) -> np.ndarray:
    """Real ``T x (m+1)`` matrix whose column ``k`` is basis function ``k``.

    Row ``t`` holds lag ``t + 1``. ``T`` defaults to
    :func:`default_truncation` of the poles in use.
    """
    sections = poles.sections(m)
    if T is None:
        T = default_truncation(PoleSet(poles.poles[: m + 1]))
    if T < 1:
        raise ValueError("T must be >= 1")
    x = np.zeros(T)
    x[0] = 1.0
    return _cascade(sections, x)


def basis_regressor(u, poles: PoleSet, m: int) -> np.ndarray:
    """Regressor whose column ``k`` is basis function ``k`` applied to ``u``.

    Zero initial conditions; identical to ``build_fir_regressor(u, N, N) @
    basis_impulse_matrix(poles, m, N)``.
    """
    u = np.asarray(u, dtype=float).ravel()
    return _cascade(poles.sections(m), np.r_[0.0, u[:-1]])


def basis_to_csv(psi: np.ndarray) -> str:
    header = "t," + ",".join(f"phi_{k}" for k in range(psi.shape[1]))
    rows = [header]
    for t, row in enumerate(psi, start=1):
        rows.append(",".join([str(t)] + [repr(float(v)) for v in row]))
    return "\n".join(rows) + "\n"
