"""Closed-loop steady-state analysis of a unity-feedback reset loop.

Loop structure::

    r -> (+) -e-> [reset controller] -v-> [C_alpha] -u-> [P] -y-> (-) back to r

When a shaping filter is present the reset is triggered by ``e_s = C_s e``
instead of ``e``; the frequency-domain analysis treats it as a pure
triggering device (resets at the zero crossings of the error fundamental).

Correction factor
-----------------
The nonlinear reset output is pushed around the loop and re-enters the
controller at every odd harmonic. The fixed-point jump map ``(A_rho - I)``
has rank one (only the reset row), so every harmonic's contribution to the
reset pulse is proportional to the reset-state component of its own
``Delta_c`` vector. The ratio that defines the correction factor therefore
reduces to a ratio of scalars and is real by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hosidf_open import (
    DEFAULT_NH,
    ResetController,
    _delta_x_batch,
    classical_Hn,
    hn_intermediates,
    nonlinear_gain,
)
from .linsys import (
    LinearSystem,
    SingularFrequencyError,
    freq_eval,
    freq_response,
    to_ss,
)
from .spectrum import HarmonicSpectrum, odd_orders

__all__ = [
    "ClosedLoopSystem",
    "Interconnection",
    "GammaResult",
    "GammaSingularityError",
    "MarginalLoopError",
    "SensitivitySet",
    "LoopResponse",
    "loop_response",
    "gamma",
    "closed_loop_sensitivities",
    "method_A",
    "method_B",
    "method_A_set",
    "method_B_set",
    "predict_spectra",
    "predict_signals",
]

GAMMA_SINGULAR_TOL = 1e-9


class GammaSingularityError(ZeroDivisionError):
    """The correction-factor denominator vanishes."""


class MarginalLoopError(ZeroDivisionError):
    """``1 + L`` vanishes at an evaluated frequency."""


@dataclass(frozen=True)
class Interconnection:
    """Closed-loop state equations driven by the reference ``r``.

    ``x' = A x + b r`` between resets and ``x <- rho * x`` at a reset. Every
    named signal is ``rows[name] @ x + feed[name] * r``.
    """

    A: np.ndarray
    b: np.ndarray
    rho: np.ndarray
    rows: dict
    feed: dict
    trigger: str
    labels: tuple
    loop_states: int


@dataclass(frozen=True)
class ClosedLoopSystem:
    """Reset controller, linear controller part, plant and optional shaping filter."""

    rc: ResetController
    c_alpha: LinearSystem
    plant: LinearSystem
    shaping: LinearSystem | None = None
    _ic: Interconnection = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_ic", self._build())

    @property
    def n_c(self) -> int:
        return self.rc.n_c

    @property
    def n_alpha(self) -> int:
        return to_ss(self.c_alpha).n + to_ss(self.plant).n

    @property
    def interconnection(self) -> Interconnection:
        return self._ic

    @property
    def A_cl(self) -> np.ndarray:
        """Loop matrix over ``[x_c; x_alpha]`` (shaping states excluded)."""
        k = self._ic.loop_states
        return self._ic.A[:k, :k]

    @property
    def C_cl(self) -> np.ndarray:
        """Output row ``y = C_cl x`` over the loop states (zero reference)."""
        return self._ic.rows["y"][: self._ic.loop_states]

    @property
    def A_rho_cl(self) -> np.ndarray:
        return np.diag(self._ic.rho[: self._ic.loop_states])

    def with_gamma(self, g: float) -> "ClosedLoopSystem":
        return ClosedLoopSystem(self.rc.with_gamma(g), self.c_alpha, self.plant, self.shaping)

    def _build(self) -> Interconnection:
        rc = self.rc
        ca, p = to_ss(self.c_alpha), to_ss(self.plant)
        cs = to_ss(self.shaping) if self.shaping is not None else None
        nc, na, npl = rc.n_c, ca.n, p.n
        ns = cs.n if cs is not None else 0
        N = nc + na + npl + ns
        ic, ia, ip, is_ = 0, nc, nc + na, nc + na + npl

        dr, dca, dp = rc.D_R[0, 0], ca.D[0, 0], p.D[0, 0]
        k = dp * dca * dr
        if 1.0 + k == 0.0:
            raise MarginalLoopError("algebraic loop 1 + D_P D_alpha D_R = 0")

        # y = (Cp xp + Dp Cca xa + Dp Dca CR xc + k r) / (1 + k)
        y_row = np.zeros(N)
        y_row[ip:ip + npl] = p.C[0]
        y_row[ia:ia + na] = dp * ca.C[0]
        y_row[ic:ic + nc] = dp * dca * rc.C_R[0]
        y_row /= 1.0 + k
        y_ff = k / (1.0 + k)
        e_row, e_ff = -y_row, 1.0 - y_ff
        v_row = dr * e_row
        v_row[ic:ic + nc] += rc.C_R[0]
        v_ff = dr * e_ff
        u_row = dca * v_row
        u_row[ia:ia + na] += ca.C[0]
        u_ff = dca * v_ff

        A = np.zeros((N, N))
        b = np.zeros(N)
        A[ic:ic + nc, ic:ic + nc] += rc.A_R
        A[ic:ic + nc] += np.outer(rc.B_R[:, 0], e_row)
        b[ic:ic + nc] += rc.B_R[:, 0] * e_ff
        A[ia:ia + na, ia:ia + na] += ca.A
        A[ia:ia + na] += np.outer(ca.B[:, 0], v_row)
        b[ia:ia + na] += ca.B[:, 0] * v_ff
        A[ip:ip + npl, ip:ip + npl] += p.A
        A[ip:ip + npl] += np.outer(p.B[:, 0], u_row)
        b[ip:ip + npl] += p.B[:, 0] * u_ff

        rows = {"r": np.zeros(N), "e": e_row, "v": v_row, "u": u_row, "y": y_row}
        feed = {"r": 1.0, "e": e_ff, "v": v_ff, "u": u_ff, "y": y_ff}
        if cs is not None:
            A[is_:, is_:] += cs.A
            A[is_:] += np.outer(cs.B[:, 0], e_row)
            b[is_:] += cs.B[:, 0] * e_ff
            es_row = cs.D[0, 0] * e_row
            es_row[is_:] += cs.C[0]
            rows["e_s"] = es_row
            feed["e_s"] = cs.D[0, 0] * e_ff
            trigger = "e_s"
        else:
            rows["e_s"] = e_row.copy()
            feed["e_s"] = e_ff
            trigger = "e"

        rho = np.ones(N)
        rho[ic] = rc.gamma
        labels = tuple([f"xc{i}" for i in range(nc)] + [f"xa{i}" for i in range(na)]
                       + [f"xp{i}" for i in range(npl)] + [f"xs{i}" for i in range(ns)])
        for m in (A, b, rho, *rows.values()):
            m.setflags(write=False)
        return Interconnection(A, b, rho, rows, feed, trigger, labels, nc + na + npl)


def _first_delta_l(rc: ResetController, ws: np.ndarray) -> np.ndarray:
    """Reset-state component of ``(j w I - A_R)^{-1} B_R`` for each ``w``."""
    ws = np.asarray(ws, dtype=float)
    M = 1j * ws[:, None, None] * np.eye(rc.n_c)[None] - rc.A_R[None]
    if np.any(np.linalg.cond(M) > 1e14):
        raise SingularFrequencyError("(j n w I - A_R) singular at a harmonic")
    rhs = np.broadcast_to(rc.B_R.astype(complex), (ws.size, rc.n_c, 1))
    return np.linalg.solve(M, rhs)[:, 0, 0]


def _linear_parts(sys: ClosedLoopSystem, ws: np.ndarray):
    """``(C_bl, C_alpha * P, P)`` at each frequency in ``ws``."""
    cbl = freq_response(sys.rc.base_linear, ws)
    p = freq_response(sys.plant, ws)
    g = freq_response(sys.c_alpha, ws) * p
    return cbl, g, p


@dataclass(frozen=True)
class LoopResponse:
    omega: float
    n: int
    L_bl: complex
    L_nl: complex
    L_o: complex


def loop_response(sys: ClosedLoopSystem, omega: float, n: int = 1,
                  gamma_value: float = 1.0) -> LoopResponse:
    """Base-linear, nonlinear and combined loop gains at ``n*omega``."""
    if n % 2 == 0:
        return LoopResponse(omega, n, 0j, 0j, 0j)
    cbl, g, _ = _linear_parts(sys, np.array([n * omega]))
    lbl = complex(cbl[0] * g[0])
    lnl = complex(nonlinear_gain(sys.rc, omega, [n])[0] * g[0])
    return LoopResponse(omega, n, lbl, lnl, lbl + gamma_value * lnl)


@dataclass(frozen=True)
class GammaResult:
    """Correction factor at one frequency.

    ``psi`` and ``delta_c`` are indexed like ``orders`` (odd ``3..n_h``);
    ``delta_c1`` is the fundamental's reset-state component.
    """

    omega: float
    gamma: float
    orders: np.ndarray
    psi: np.ndarray
    delta_c: np.ndarray
    delta_c1: float
    n_h: int
    denominator: float


def gamma(sys: ClosedLoopSystem, omega: float, n_h: int = DEFAULT_NH) -> GammaResult:
    """Correction factor from the odd harmonics ``3..n_h``."""
    if omega <= 0 or not np.isfinite(omega):
        raise ValueError("omega must be positive and finite")
    orders = odd_orders(n_h)[1:]
    dc1 = float(np.imag(_first_delta_l(sys.rc, np.array([omega]))[0]))
    if orders.size == 0 or sys.rc.gamma == 1.0:
        z = np.zeros(orders.size)
        return GammaResult(omega, 1.0, orders, z, z.copy(), dc1, n_h, 1.0)
    ws = orders * omega
    cbl, g, _ = _linear_parts(sys, ws)
    lbl = cbl * g
    lnl = nonlinear_gain(sys.rc, omega, orders) * g
    one = 1.0 + lbl
    if np.any(np.abs(one) == 0.0):
        raise MarginalLoopError("1 + L_bl(n w) = 0 at a harmonic")
    psi = np.abs(lnl) / np.abs(one)
    dl = _first_delta_l(sys.rc, ws)
    # -|dl| sin(angle dl + angle L_nl - angle(1 + L_bl)); zero where L_nl = 0
    rot = np.where(lnl != 0, lnl / np.abs(np.where(lnl != 0, lnl, 1.0)), 0.0)
    dcn = -np.imag(dl * rot * np.conj(one) / np.abs(one))
    if dc1 == 0.0:
        raise GammaSingularityError(f"reset-state fundamental vanishes at w={omega:g}")
    den = 1.0 - float(np.sum(psi * dcn)) / dc1
    if abs(den) < GAMMA_SINGULAR_TOL or not np.isfinite(den):
        raise GammaSingularityError(
            f"Gamma singularity at w={omega:g} rad/s (denominator {den:.3e})")
    return GammaResult(omega, 1.0 / den, orders, psi, dcn, dc1, n_h, den)


@dataclass(frozen=True)
class SensitivitySet:
    """Closed-loop harmonic sensitivities at one frequency (odd orders only).

    Even orders are structurally zero and are returned as ``0j`` by the
    accessor methods.
    """

    omega: float
    orders: np.ndarray
    S: np.ndarray
    T: np.ndarray
    CS: np.ndarray
    gamma: float = 1.0
    method: str = "new"

    def _get(self, arr, n):
        if n < 1:
            raise ValueError("harmonic order must be positive")
        idx = np.flatnonzero(self.orders == n)
        return complex(arr[idx[0]]) if idx.size else 0j

    def S_n(self, n: int) -> complex:
        return self._get(self.S, n)

    def T_n(self, n: int) -> complex:
        return self._get(self.T, n)

    def CS_n(self, n: int) -> complex:
        return self._get(self.CS, n)


def _check_nonzero(vals, exc, msg):
    if np.any(vals == 0):
        raise exc(msg)


def closed_loop_sensitivities(sys: ClosedLoopSystem, omega: float,
                              n_h: int = DEFAULT_NH,
                              gamma_value: float | None = None) -> SensitivitySet:
    """``S_n, T_n, CS_n`` for odd ``n <= n_h``.

    ``gamma_value`` overrides the computed correction factor (``1.0``
    reproduces the assumption that higher harmonics are never reset).
    """
    g_val = gamma(sys, omega, n_h).gamma if gamma_value is None else float(gamma_value)
    orders = odd_orders(n_h)
    ws = orders * omega
    cbl, g, p = _linear_parts(sys, ws)
    lbl = cbl * g
    lnl = nonlinear_gain(sys.rc, omega, orders) * g
    lo1 = lbl[0] + g_val * lnl[0]
    _check_nonzero(1.0 + lo1, MarginalLoopError, f"1 + L_o(w) = 0 at w={omega:g}")
    s1 = 1.0 / (1.0 + lo1)
    S = np.empty(orders.size, dtype=complex)
    T = np.empty(orders.size, dtype=complex)
    S[0] = s1
    T[0] = lo1 / (1.0 + lo1)
    if orders.size > 1:
        one = 1.0 + lbl[1:]
        _check_nonzero(one, MarginalLoopError, "1 + L_bl(n w) = 0 at a harmonic")
        rot = abs(s1) * np.exp(1j * orders[1:] * np.angle(s1))
        S[1:] = -g_val * lnl[1:] * rot / one
        T[1:] = -S[1:]
    _check_nonzero(p, SingularFrequencyError, "plant has a zero at a harmonic: CS undefined")
    return SensitivitySet(omega, orders, S, T, T / p, g_val, "new")


def method_A(sys: ClosedLoopSystem, omega: float):
    """First-harmonic describing-function sensitivities ``(S, T, CS)``."""
    h1 = classical_Hn(sys.rc, omega, 1)
    ca = freq_eval(sys.c_alpha, omega)
    L = h1 * ca * freq_eval(sys.plant, omega)
    if 1.0 + L == 0:
        raise MarginalLoopError(f"1 + H_1 C_alpha P = 0 at w={omega:g}")
    return 1.0 / (1.0 + L), L / (1.0 + L), h1 * ca / (1.0 + L)


def method_B(sys: ClosedLoopSystem, omega: float, n: int = 1):
    """Harmonic sensitivities assuming higher error harmonics never reset."""
    if n < 1:
        raise ValueError("harmonic order must be positive")
    if n % 2 == 0:
        return 0j, 0j, 0j
    S1, T1, CS1 = method_A(sys, omega)
    if n == 1:
        return S1, T1, CS1
    w = n * omega
    g = freq_eval(sys.c_alpha, w) * freq_eval(sys.plant, w)
    p = freq_eval(sys.plant, w)
    lbl = freq_eval(sys.rc.base_linear, w) * g
    if 1.0 + lbl == 0:
        raise MarginalLoopError("1 + L_bl(n w) = 0")
    Ln = classical_Hn(sys.rc, omega, n) * g
    S = -Ln / (1.0 + lbl) * abs(S1) * np.exp(1j * n * np.angle(S1))
    if p == 0:
        raise SingularFrequencyError("plant has a zero at a harmonic: CS undefined")
    return complex(S), complex(-S), complex(-S / p)


def method_B_set(sys: ClosedLoopSystem, omega: float, n_h: int = DEFAULT_NH) -> SensitivitySet:
    """Vectorized :func:`method_B` over odd orders up to ``n_h``."""
    orders = odd_orders(n_h)
    S1, T1, CS1 = method_A(sys, omega)
    S, T, CS = (np.empty(orders.size, dtype=complex) for _ in range(3))
    S[0], T[0], CS[0] = S1, T1, CS1
    if orders.size > 1:
        rc = sys.rc
        hi = orders[1:]
        ws = hi * omega
        cbl, g, p = _linear_parts(sys, ws)
        one = 1.0 + cbl * g
        _check_nonzero(one, MarginalLoopError, "1 + L_bl(n w) = 0 at a harmonic")
        _check_nonzero(p, SingularFrequencyError, "plant has a zero at a harmonic: CS undefined")
        th = hn_intermediates(rc, omega).Theta_D
        # H_n = C_R (j n w I - A_R)^{-1} j Theta_D B_R
        hn = (_delta_x_batch(rc, ws) / (1j * ws)[:, None]) @ (1j * th @ rc.B_R[:, 0])
        S[1:] = -hn * g / one * abs(S1) * np.exp(1j * hi * np.angle(S1))
        T[1:] = -S[1:]
        CS[1:] = T[1:] / p
    return SensitivitySet(omega, orders, S, T, CS, 1.0, "B")


def method_A_set(sys: ClosedLoopSystem, omega: float) -> SensitivitySet:
    S, T, CS = method_A(sys, omega)
    return SensitivitySet(omega, np.array([1]), np.array([S]), np.array([T]),
                          np.array([CS]), 1.0, "A")


def predict_spectra(sens: SensitivitySet, amplitude: float) -> dict[str, HarmonicSpectrum]:
    """Spectra of ``e``, ``y``, ``u`` for ``r = amplitude * sin(omega t)``."""
    w = sens.omega
    return {
        "e": HarmonicSpectrum(w, sens.orders, amplitude * sens.S),
        "y": HarmonicSpectrum(w, sens.orders, amplitude * sens.T),
        "u": HarmonicSpectrum(w, sens.orders, amplitude * sens.CS),
    }


def predict_signals(sys: ClosedLoopSystem, amplitude: float, omega: float,
                    n_h: int = DEFAULT_NH, t=None, method: str = "new",
                    sens: SensitivitySet | None = None) -> dict[str, np.ndarray]:
    """Steady-state ``e(t)``, ``y(t)``, ``u(t)`` from the harmonic sensitivities.

    ``t`` defaults to one period sampled at 1024 points.
    """
    if t is None:
        t = np.arange(1024) * (2 * np.pi / omega) / 1024
    if sens is None:
        if method == "new":
            sens = closed_loop_sensitivities(sys, omega, n_h)
        elif method == "A":
            sens = method_A_set(sys, omega)
        elif method == "B":
            sens = method_B_set(sys, omega, n_h)
        else:
            raise ValueError(f"unknown method {method!r}")
    spectra = predict_spectra(sens, amplitude)
    out = {"t": np.asarray(t, dtype=float)}
    for k, sp in spectra.items():
        out[k] = sp.reconstruct(t)
    return out
