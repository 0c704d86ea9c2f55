"""Open-loop steady-state analysis of single-reset-state controllers.

Two routes to the higher-order sinusoidal-input describing functions are
provided and kept independent of each other:

* :func:`classical_Hn` -- the established closed form built from
  ``Lambda, Delta, Delta_r, Gamma_r, Theta_D``;
* :func:`C_n` -- the pulse-based decomposition into a base-linear response
  plus a filtered square wave, ``C_n = C_bl + C_nl`` for ``n = 1``.

Reset always acts on the first controller state (``n_r = 1``).

Sign convention of the reset fixed point
----------------------------------------
Between two resets the nonlinear state ``x_nl = x_c - x_bl`` evolves freely
and its after-reset value alternates in sign from one reset to the next.
Solving the two-reset periodicity condition with that alternation gives

    Delta_v = (I + A_rho e^{A_R pi/w})^{-1} (A_rho - I) Delta_c

which is singular exactly where the classical ``Delta_r`` is singular. It
coincides with ``(A_rho e^{A_R pi/w} - I)^{-1} (I - A_rho) Delta_c`` only
when ``A_rho e^{A_R pi/w}`` vanishes on the reset row (e.g. ``gamma = 0``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linsys import (
    LinearSystem,
    SingularFrequencyError,
    StateSpace,
    expm,
    freq_eval,
)
from .spectrum import HarmonicSpectrum, odd_orders, reconstruct

__all__ = [
    "ResetFixedPointError",
    "ResetController",
    "SinusoidSpec",
    "CnIntermediates",
    "HnIntermediates",
    "C_bl",
    "C_nl",
    "C_n",
    "classical_Hn",
    "hn_intermediates",
    "cn_intermediates",
    "nonlinear_gain",
    "gci_square_levels",
    "pulse_nonlinear_spectrum",
    "controller_output_spectrum",
    "open_loop_Ln",
    "open_loop_output_spectrum",
    "reconstruct",
    "DEFAULT_NH",
]

DEFAULT_NH = 501
SINGULARITY_LIMIT = 1e12


class ResetFixedPointError(np.linalg.LinAlgError):
    """``I + A_rho e^{A_R pi/w}`` is (nearly) singular: no periodic reset orbit."""


@dataclass(frozen=True)
class ResetController:
    """Reset controller with base-linear matrices and reset ratio ``gamma``.

    The first state is the reset state; the remaining ``n_c - 1`` states
    flow without jumps.
    """

    A_R: np.ndarray
    B_R: np.ndarray
    C_R: np.ndarray
    D_R: np.ndarray
    gamma: float

    def __post_init__(self):
        ss = StateSpace(self.A_R, self.B_R, self.C_R, self.D_R)
        if ss.n < 1:
            raise ValueError("a reset controller needs at least one state")
        g = float(self.gamma)
        if not -1.0 < g <= 1.0:
            raise ValueError(f"reset ratio gamma={g} outside (-1, 1]")
        object.__setattr__(self, "A_R", ss.A)
        object.__setattr__(self, "B_R", ss.B)
        object.__setattr__(self, "C_R", ss.C)
        object.__setattr__(self, "D_R", ss.D)
        object.__setattr__(self, "gamma", g)

    @property
    def n_c(self) -> int:
        return self.A_R.shape[0]

    n_r = 1

    @property
    def A_rho(self) -> np.ndarray:
        r = np.eye(self.n_c)
        r[0, 0] = self.gamma
        return r

    @property
    def base_linear(self) -> StateSpace:
        return StateSpace(self.A_R, self.B_R, self.C_R, self.D_R)

    def with_gamma(self, gamma: float) -> "ResetController":
        return ResetController(self.A_R, self.B_R, self.C_R, self.D_R, gamma)

    @classmethod
    def clegg(cls, gamma: float = 0.0) -> "ResetController":
        """Generalized Clegg integrator ``1/s`` with reset ratio ``gamma``."""
        return cls([[0.0]], [[1.0]], [[1.0]], [[0.0]], gamma)

    @classmethod
    def fore(cls, omega_r: float, gamma: float = 0.0) -> "ResetController":
        """First-order reset element ``1/(s/omega_r + 1)``."""
        return cls([[-omega_r]], [[omega_r]], [[1.0]], [[0.0]], gamma)

    @classmethod
    def from_state_space(cls, ss: StateSpace, gamma: float) -> "ResetController":
        return cls(ss.A, ss.B, ss.C, ss.D, gamma)


@dataclass(frozen=True)
class SinusoidSpec:
    """``amplitude * sin(n * omega * t + phase)``."""

    amplitude: float
    omega: float
    n: int = 1
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValueError("sinusoid amplitude must be positive")
        if self.omega <= 0:
            raise ValueError("base frequency must be positive")
        if self.n < 1 or self.n % 2 == 0:
            raise ValueError("frequency multiple n must be an odd positive integer")
        ph = float(np.angle(np.exp(1j * self.phase)))
        object.__setattr__(self, "phase", np.pi if ph == -np.pi else ph)

    @property
    def phasor(self) -> complex:
        return self.amplitude * np.exp(1j * self.phase)

    def __call__(self, t):
        return self.amplitude * np.sin(self.n * self.omega * np.asarray(t) + self.phase)


@dataclass(frozen=True)
class CnIntermediates:
    omega: float
    n: int
    delta_l: np.ndarray     # (jn w I - A_R)^{-1} B_R, complex (n_c,)
    delta_x: np.ndarray     # C_R (jn w I - A_R)^{-1} jn w, complex (n_c,)
    delta_c: np.ndarray     # reset-instant value of the base-linear state, real
    delta_v: np.ndarray     # after-reset nonlinear state, real
    delta_q: np.ndarray     # jump of the nonlinear state, real


@dataclass(frozen=True)
class HnIntermediates:
    omega: float
    Lambda: np.ndarray
    Delta: np.ndarray
    Delta_r: np.ndarray
    Gamma_r: np.ndarray
    Theta_D: np.ndarray = field(repr=False)


def _solve(M, b, what):
    if np.linalg.cond(M) > 1e14:
        raise SingularFrequencyError(f"{what} is singular")
    return np.linalg.solve(M, b)


def _delta_l(rc: ResetController, w: float) -> np.ndarray:
    M = 1j * w * np.eye(rc.n_c) - rc.A_R
    return _solve(M, rc.B_R[:, 0].astype(complex), f"(j{w:g} I - A_R)")


def _delta_x(rc: ResetController, w: float) -> np.ndarray:
    M = 1j * w * np.eye(rc.n_c) - rc.A_R
    # row vector C_R (M)^{-1} * j w  -> solve M^T z = C_R^T
    return _solve(M.T, rc.C_R[0].astype(complex), f"(j{w:g} I - A_R)") * (1j * w)


def _delta_x_batch(rc: ResetController, ws: np.ndarray) -> np.ndarray:
    ws = np.asarray(ws, dtype=float)
    I = np.eye(rc.n_c)
    M = 1j * ws[:, None, None] * I[None] - rc.A_R[None]
    if np.any(np.linalg.cond(M) > 1e14):
        raise SingularFrequencyError("(j n w I - A_R) singular at a harmonic")
    rhs = np.broadcast_to(rc.C_R[0].astype(complex), (ws.size, rc.n_c))[..., None]
    z = np.linalg.solve(np.transpose(M, (0, 2, 1)), rhs)[..., 0]
    return z * (1j * ws)[:, None]


def _fixed_point(rc: ResetController, w: float):
    """``(E, V)`` with ``E = e^{A_R pi/w}`` and ``Delta_v = V Delta_c``."""
    E = expm(rc.A_R, np.pi / w)
    I = np.eye(rc.n_c)
    F = I + rc.A_rho @ E
    try:
        Finv = np.linalg.inv(F)
    except np.linalg.LinAlgError as exc:
        raise ResetFixedPointError(
            f"I + A_rho e^(A_R pi/w) is singular at w={w:g} rad/s") from exc
    if not np.all(np.isfinite(Finv)) or np.linalg.norm(Finv, 2) > SINGULARITY_LIMIT:
        raise ResetFixedPointError(
            f"I + A_rho e^(A_R pi/w) is nearly singular at w={w:g} rad/s")
    return E, Finv @ (rc.A_rho - I)


def _jump_map(rc: ResetController, w: float) -> np.ndarray:
    """Matrix ``M`` with ``Delta_q = M Delta_c``."""
    E, V = _fixed_point(rc, w)
    return (np.eye(rc.n_c) + E) @ V


def cn_intermediates(rc: ResetController, omega: float, n: int = 1,
                     phase_offset: float = 0.0) -> CnIntermediates:
    """Derivation quantities for an input at ``n*omega`` and trigger at ``omega``.

    ``phase_offset`` is ``angle(E_n) - n*angle(E_s)``, zero when the input is
    the trigger itself.
    """
    dl = _delta_l(rc, n * omega)
    dc = np.imag(dl * np.exp(1j * phase_offset))
    E, V = _fixed_point(rc, omega)
    dv = V @ dc
    dq = (np.eye(rc.n_c) + E) @ dv
    return CnIntermediates(omega, n, dl, _delta_x(rc, n * omega), dc, dv, dq)


def C_bl(rc: ResetController, omega: float) -> complex:
    """Base-linear frequency response ``C_R (jwI - A_R)^{-1} B_R + D_R``."""
    return complex(rc.C_R[0] @ _delta_l(rc, omega) + rc.D_R[0, 0])


def C_nl(rc: ResetController, omega: float, n: int = 1) -> complex:
    """Nonlinear HOSIDF at ``n*omega`` per unit input amplitude."""
    if n % 2 == 0:
        return 0j
    if rc.gamma == 1.0:
        return 0j
    dq = _jump_map(rc, omega) @ np.imag(_delta_l(rc, omega))
    return complex(2.0 * (_delta_x(rc, n * omega) @ dq) / (n * np.pi))


def nonlinear_gain(rc: ResetController, omega: float, orders) -> np.ndarray:
    """Vectorized ``C_nl(n*omega)`` for an array of odd ``orders``."""
    orders = np.asarray(orders, dtype=int)
    if rc.gamma == 1.0 or orders.size == 0:
        return np.zeros(orders.shape, dtype=complex)
    dq = _jump_map(rc, omega) @ np.imag(_delta_l(rc, omega))
    dx = _delta_x_batch(rc, orders * omega)
    out = 2.0 * (dx @ dq) / (orders * np.pi)
    return np.where(orders % 2 == 1, out, 0j)


def C_n(rc: ResetController, omega: float, n: int = 1) -> complex:
    """n-th open-loop HOSIDF from the pulse-based decomposition."""
    if n < 1:
        raise ValueError("harmonic order must be positive")
    if n % 2 == 0:
        return 0j
    if n == 1:
        return C_bl(rc, omega) + C_nl(rc, omega, 1)
    return C_nl(rc, omega, n)


def hn_intermediates(rc: ResetController, omega: float) -> HnIntermediates:
    I = np.eye(rc.n_c)
    Lam = omega ** 2 * I + rc.A_R @ rc.A_R
    E = expm(rc.A_R, np.pi / omega)
    Delta = I + E
    Delta_r = I + rc.A_rho @ E
    if np.linalg.cond(Lam) > 1e14:
        raise SingularFrequencyError(f"Lambda(w) singular at w={omega:g}")
    if np.linalg.cond(Delta_r) > 1e14:
        raise SingularFrequencyError(f"Delta_r(w) singular at w={omega:g}")
    Lam_inv = np.linalg.inv(Lam)
    Gamma_r = np.linalg.solve(Delta_r, rc.A_rho @ Delta @ Lam_inv)
    Theta_D = (-2 * omega ** 2 / np.pi) * Delta @ (Gamma_r - Lam_inv)
    return HnIntermediates(omega, Lam, Delta, Delta_r, Gamma_r, Theta_D)


def classical_Hn(rc: ResetController, omega: float, n: int = 1) -> complex:
    """Classical HOSIDF ``H_n(w)`` of a reset controller."""
    if n < 1:
        raise ValueError("harmonic order must be positive")
    if n % 2 == 0:
        return 0j
    th = hn_intermediates(rc, omega).Theta_D
    I = np.eye(rc.n_c)
    M = 1j * n * omega * I - rc.A_R
    if n == 1:
        x = _solve(M, (I + 1j * th) @ rc.B_R[:, 0], "(jwI - A_R)")
        return complex(rc.C_R[0] @ x + rc.D_R[0, 0])
    x = _solve(M, 1j * th @ rc.B_R[:, 0], "(jnwI - A_R)")
    return complex(rc.C_R[0] @ x)


def gci_square_levels(gamma: float, omega: float, amp: float = 1.0):
    """Levels of the square-wave part of a generalized Clegg integrator.

    Returns ``(a, b)``: the value on ``[2k, 2k+1) pi/w`` and on
    ``[2k+1, 2k+2) pi/w`` for input ``amp*sin(w t)`` and base-linear output
    ``amp/w (1 - cos w t)``.
    """
    if gamma == -1.0:
        raise ZeroDivisionError("gamma = -1 has no periodic reset orbit")
    if not -1.0 < gamma <= 1.0:
        raise ValueError(f"reset ratio gamma={gamma} outside (-1, 1]")
    if omega <= 0:
        raise ValueError("omega must be positive")
    a = -2.0 * abs(amp) * gamma / ((gamma + 1.0) * omega)
    b = -2.0 * abs(amp) / ((gamma + 1.0) * omega)
    return a, b


def pulse_nonlinear_spectrum(rc: ResetController, input: SinusoidSpec,
                             trigger: SinusoidSpec,
                             n_h: int = DEFAULT_NH) -> HarmonicSpectrum:
    """Nonlinear output spectrum for an input at ``n*omega`` reset by ``trigger``.

    The trigger must be at the base frequency (``trigger.n == 1``). Only its
    phase matters; the returned spectrum holds odd orders up to ``n_h`` and
    is in phase with the square wave that changes sign at the trigger's
    zero crossings.
    """
    if trigger.n != 1:
        raise ValueError("the reset trigger must run at the base frequency")
    if not np.isclose(input.omega, trigger.omega, rtol=1e-12):
        raise ValueError("input and trigger must share the base frequency")
    w = trigger.omega
    orders = odd_orders(n_h)
    if rc.gamma == 1.0:
        return HarmonicSpectrum(w, orders, np.zeros(orders.size, dtype=complex))
    offset = input.phase - input.n * trigger.phase
    dc = np.imag(_delta_l(rc, input.n * w) * np.exp(1j * offset))
    dq = _jump_map(rc, w) @ dc
    dx = _delta_x_batch(rc, orders * w)
    coeffs = (2.0 * input.amplitude / np.pi) * (dx @ dq) / orders \
        * np.exp(1j * orders * trigger.phase)
    return HarmonicSpectrum(w, orders, coeffs)


def controller_output_spectrum(rc: ResetController, e: SinusoidSpec,
                               n_h: int = DEFAULT_NH) -> HarmonicSpectrum:
    """Steady-state reset output ``v = v_bl + v_nl`` when ``e`` also triggers."""
    if e.n != 1:
        raise ValueError("input must be at the base frequency")
    orders = odd_orders(n_h)
    e1n = e.amplitude * np.exp(1j * orders * e.phase)
    coeffs = e1n * nonlinear_gain(rc, e.omega, orders)
    coeffs[0] += e.phasor * C_bl(rc, e.omega)
    return HarmonicSpectrum(e.omega, orders, coeffs)


def _block(sys: LinearSystem | None, w: float) -> complex:
    return 1.0 + 0j if sys is None else freq_eval(sys, w)


def open_loop_Ln(rc: ResetController, c_alpha: LinearSystem | None,
                 plant: LinearSystem | None, omega: float, n: int = 1) -> complex:
    """n-th open-loop HOSIDF of the chain ``C -> C_alpha -> P``."""
    if n % 2 == 0:
        return 0j
    w = n * omega
    return C_n(rc, omega, n) * _block(c_alpha, w) * _block(plant, w)


def open_loop_output_spectrum(rc: ResetController, c_alpha: LinearSystem | None,
                              plant: LinearSystem | None, e: SinusoidSpec,
                              n_h: int = DEFAULT_NH) -> HarmonicSpectrum:
    """Output spectrum ``Y_n = E_1n L_n`` of the open-loop chain."""
    v = controller_output_spectrum(rc, e, n_h)
    g = np.array([_block(c_alpha, n * e.omega) * _block(plant, n * e.omega)
                  for n in v.orders])
    return HarmonicSpectrum(e.omega, v.orders, v.coeffs * g)
