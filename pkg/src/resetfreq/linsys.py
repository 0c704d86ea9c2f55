"""SISO LTI primitives: transfer functions, state-space realizations,
frequency evaluation, matrix exponential and block composition.

Everything here is immutable after construction. Coefficient vectors are
stored in descending powers of ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import linalg

__all__ = [
    "SingularFrequencyError",
    "ExpmRangeError",
    "TransferFunction",
    "StateSpace",
    "LinearSystem",
    "FrequencyGrid",
    "freq_eval",
    "freq_response",
    "expm",
    "series",
    "feedback",
    "tf_to_ss",
    "to_ss",
    "ss_series",
    "principal_angle",
]

CANCEL_RTOL = 1e-9
_EXPM_NORM_LIMIT = 700.0


class SingularFrequencyError(ZeroDivisionError):
    """The resolvent (or denominator) is singular at the requested frequency."""


class ExpmRangeError(OverflowError):
    """Matrix exponential argument is too large to be represented."""


def _as_poly(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[nz[0]:].copy()


@dataclass(frozen=True)
class TransferFunction:
    """Rational transfer function ``num(s)/den(s)``."""

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num = _as_poly(self.num)
        den = _as_poly(self.den)
        if not np.all(np.isfinite(num)) or not np.all(np.isfinite(den)):
            raise ValueError("transfer function coefficients must be finite")
        if den[0] == 0.0:
            raise ValueError("denominator leading coefficient must be nonzero")
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def gain(cls, k: float) -> "TransferFunction":
        return cls([k], [1.0])

    @property
    def order(self) -> int:
        return len(self.den) - 1

    @property
    def is_proper(self) -> bool:
        return len(self.num) <= len(self.den)

    @property
    def is_strictly_proper(self) -> bool:
        return len(self.num) < len(self.den) or not np.any(self.num)

    def __call__(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def __mul__(self, other):
        return series(self, other)

    def __repr__(self):
        return f"TransferFunction(num={self.num.tolist()}, den={self.den.tolist()})"


@dataclass(frozen=True)
class StateSpace:
    """SISO state-space model ``x' = Ax + Bu``, ``y = Cx + Du``.

    ``B`` is stored as a length-n column (n, 1), ``C`` as a row (1, n) and
    ``D`` as a (1, 1) array; a static gain has ``n = 0``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = 0 if A.size == 0 else A.shape[0]
        A = A.reshape(n, n)
        B = np.asarray(self.B, dtype=float).reshape(n, 1)
        C = np.asarray(self.C, dtype=float).reshape(1, n)
        D = np.asarray(self.D, dtype=float).reshape(1, 1)
        for name, m in (("A", A), ("B", B), ("C", C), ("D", D)):
            if not np.all(np.isfinite(m)):
                raise ValueError(f"state-space matrix {name} has non-finite entries")
            m.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @classmethod
    def gain(cls, k: float) -> "StateSpace":
        return cls(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[k]])


LinearSystem = Union[TransferFunction, StateSpace]


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing grid of positive angular frequencies (rad/s)."""

    omega: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float).ravel()
        if w.size and (np.any(w <= 0) or np.any(~np.isfinite(w))):
            raise ValueError("frequency grid must be finite and strictly positive")
        if np.any(np.diff(w) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        w.setflags(write=False)
        object.__setattr__(self, "omega", w)

    @classmethod
    def log(cls, w_min: float, w_max: float, num: int) -> "FrequencyGrid":
        return cls(np.logspace(np.log10(w_min), np.log10(w_max), num))

    @classmethod
    def from_hz(cls, freqs_hz) -> "FrequencyGrid":
        return cls(2 * np.pi * np.asarray(freqs_hz, dtype=float))

    def __iter__(self):
        return iter(self.omega)

    def __len__(self):
        return self.omega.size


def principal_angle(z) -> np.ndarray:
    """Angle of ``z`` in (-pi, pi]."""
    ang = np.arctan2(np.imag(z), np.real(z))
    return np.where(ang == -np.pi, np.pi, ang)


def _resolvent_solve(A, B, s):
    M = s * np.eye(A.shape[0]) - A
    if np.linalg.cond(M) > 1e14:
        raise SingularFrequencyError(f"(sI - A) singular at s={s}")
    return np.linalg.solve(M, B)


def freq_eval(sys: LinearSystem, omega: float) -> complex:
    """Evaluate ``sys`` at ``s = j*omega``."""
    if not np.isfinite(omega):
        raise ValueError("omega must be finite")
    s = 1j * omega
    if isinstance(sys, TransferFunction):
        den = np.polyval(sys.den, s)
        if den == 0:
            raise SingularFrequencyError(f"transfer function has a pole at s={s}")
        return complex(np.polyval(sys.num, s) / den)
    if sys.n == 0:
        return complex(sys.D[0, 0])
    x = _resolvent_solve(sys.A.astype(complex), sys.B.astype(complex), s)
    return complex((sys.C @ x)[0, 0] + sys.D[0, 0])


def freq_response(sys: LinearSystem, omegas) -> np.ndarray:
    """Vectorized :func:`freq_eval` over an array of frequencies."""
    w = np.asarray(omegas, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValueError("omega must be finite")
    s = 1j * w.ravel()
    if isinstance(sys, TransferFunction):
        den = np.polyval(sys.den, s)
        if np.any(den == 0):
            raise SingularFrequencyError("transfer function has a pole on the grid")
        return (np.polyval(sys.num, s) / den).reshape(w.shape)
    if sys.n == 0:
        return np.full(w.shape, complex(sys.D[0, 0]))
    M = s[:, None, None] * np.eye(sys.n)[None] - sys.A[None]
    if np.any(np.linalg.cond(M) > 1e14):
        raise SingularFrequencyError("(sI - A) singular on the grid")
    rhs = np.broadcast_to(sys.B.astype(complex), (s.size, sys.n, 1))
    x = np.linalg.solve(M, rhs)[..., 0]
    return (x @ sys.C[0] + sys.D[0, 0]).reshape(w.shape)


def expm(A, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``e^{A t}`` (scaling and squaring, Padé 13)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.all(np.isfinite(A)) or not np.isfinite(t):
        raise ValueError("expm argument must be finite")
    if A.size == 0:
        return np.zeros((0, 0))
    At = A * t
    # growth rate beyond ~700 overflows float64
    if np.max(np.real(np.linalg.eigvals(At))) > _EXPM_NORM_LIMIT:
        raise ExpmRangeError("e^{At} overflows double precision")
    E = linalg.expm(At)
    if not np.all(np.isfinite(E)):
        raise ExpmRangeError("e^{At} overflows double precision")
    return E


def _cancel(num: np.ndarray, den: np.ndarray, rtol: float = CANCEL_RTOL):
    """Remove common roots of ``num`` and ``den`` matching within ``rtol``."""
    if len(num) < 2 or len(den) < 2 or not np.any(num):
        return num, den
    zeros = list(np.roots(num))
    poles = list(np.roots(den))
    kept_z, found = [], False
    for z in zeros:
        match = None
        for i, p in enumerate(poles):
            if abs(z - p) <= rtol * max(1.0, abs(p)):
                match = i
                break
        if match is None:
            kept_z.append(z)
        else:
            poles.pop(match)
            found = True
    if not found:
        return num, den
    new_num = num[0] * np.real(np.poly(kept_z)) if kept_z else np.array([num[0]])
    new_den = den[0] * np.real(np.poly(poles)) if poles else np.array([den[0]])
    return np.atleast_1d(new_num), np.atleast_1d(new_den)


def ss_to_tf(ss: StateSpace) -> TransferFunction:
    if ss.n == 0:
        return TransferFunction([ss.D[0, 0]], [1.0])
    den = np.poly(ss.A)
    # num(s) = C adj(sI-A) B + D det(sI-A) = det(sI - A + B C) - det(sI-A) + D det
    num = np.poly(ss.A - ss.B @ ss.C) - den + ss.D[0, 0] * den
    return TransferFunction(np.real(num), np.real(den))


def _to_tf(sys: LinearSystem) -> TransferFunction:
    if isinstance(sys, TransferFunction):
        return sys
    if isinstance(sys, StateSpace):
        return ss_to_tf(sys)
    return TransferFunction.gain(float(sys))


def series(a: LinearSystem, b: LinearSystem) -> LinearSystem:
    """Cascade ``a`` then ``b`` (product of SISO responses).

    Two state-space operands stay in state-space form; otherwise the result
    is a transfer function with exactly common roots (relative tolerance
    ``CANCEL_RTOL``) cancelled.
    """
    if isinstance(a, StateSpace) and isinstance(b, StateSpace):
        return ss_series(a, b)
    ta, tb = _to_tf(a), _to_tf(b)
    num, den = _cancel(np.polymul(ta.num, tb.num), np.polymul(ta.den, tb.den))
    return TransferFunction(num, den)


def feedback(forward: LinearSystem, back: LinearSystem | None = None) -> TransferFunction:
    """Negative-feedback loop ``G / (1 + G H)`` (unity feedback by default)."""
    g = _to_tf(forward)
    h = _to_tf(back) if back is not None else TransferFunction.gain(1.0)
    num = np.polymul(g.num, h.den)
    den = np.polyadd(np.polymul(g.den, h.den), np.polymul(g.num, h.num))
    num, den = _cancel(num, den)
    return TransferFunction(num, den)


def tf_to_ss(tf: TransferFunction) -> StateSpace:
    """Controllable canonical realization of a proper transfer function."""
    if not tf.is_proper:
        raise ValueError("improper transfer function has no state-space realization")
    den = tf.den / tf.den[0]
    num = tf.num / tf.den[0]
    n = len(den) - 1
    num = np.concatenate([np.zeros(n + 1 - len(num)), num])
    d = num[0]
    if n == 0:
        return StateSpace.gain(d)
    rem = num[1:] - d * den[1:]
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = rem.reshape(1, n)
    return StateSpace(A, B, C, [[d]])


def to_ss(sys: LinearSystem) -> StateSpace:
    if isinstance(sys, StateSpace):
        return sys
    if isinstance(sys, TransferFunction):
        return tf_to_ss(sys)
    return StateSpace.gain(float(sys))


def ss_series(a: StateSpace, b: StateSpace) -> StateSpace:
    """State-space cascade, state ordering ``[x_a; x_b]``."""
    na, nb = a.n, b.n
    A = np.zeros((na + nb, na + nb))
    A[:na, :na] = a.A
    A[na:, :na] = b.B @ a.C
    A[na:, na:] = b.A
    B = np.vstack([a.B, b.B @ a.D])
    C = np.hstack([b.D @ a.C, b.C])
    D = b.D @ a.D
    return StateSpace(A, B, C, D)
