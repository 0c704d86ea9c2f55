"""Numerical checks of the conditions the harmonic analysis relies on."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .hosidf_closed import ClosedLoopSystem
from .hosidf_open import ResetController, SinusoidSpec
from .hybridsim import SimConfig, simulate, steady_state
from .linsys import expm

__all__ = [
    "NotHurwitzError",
    "OpenLoopCondition",
    "HBetaCheck",
    "TwoResetCheck",
    "open_loop_condition",
    "hbeta_check",
    "two_reset_check",
    "to_json",
]


class NotHurwitzError(ValueError):
    """The base-linear closed loop has an eigenvalue with nonnegative real part."""


@dataclass(frozen=True)
class OpenLoopCondition:
    passed: bool
    worst_radius: float
    worst_delta: float


def open_loop_condition(rc: ResetController, deltas) -> OpenLoopCondition:
    """Spectral radius of the reset-plus-flow map ``A_rho e^{A_R delta}``.

    Passes when the largest radius over ``deltas`` (seconds) is below one.
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if deltas.size == 0 or np.any(deltas <= 0):
        raise ValueError("delta grid must be non-empty and positive")
    radii = np.array([np.max(np.abs(np.linalg.eigvals(rc.A_rho @ expm(rc.A_R, d))))
                      for d in deltas])
    i = int(np.argmax(radii))
    return OpenLoopCondition(bool(radii[i] < 1.0), float(radii[i]), float(deltas[i]))


@dataclass(frozen=True)
class HBetaCheck:
    beta: float
    P: float
    omega: np.ndarray
    min_real: float
    argmin_omega: float
    reset_residual: float
    spr_passed: bool
    reset_passed: bool

    @property
    def passed(self) -> bool:
        return self.spr_passed and self.reset_passed


def hbeta_check(sys: ClosedLoopSystem, beta: float, P: float, omegas) -> HBetaCheck:
    """Evaluate a user-supplied ``(beta, P)`` quadratic-stability certificate.

    ``H(s) = [P, 0, beta C_alpha] (sI - A_cl)^{-1} [1; 0; 0]`` must have a
    positive real part on the grid, and ``gamma^2 P - P <= 0``.
    """
    P = float(P)
    if P <= 0:
        raise ValueError("P must be positive")
    A = sys.A_cl
    if np.max(np.real(np.linalg.eigvals(A))) >= 0:
        raise NotHurwitzError("closed-loop matrix is not Hurwitz")
    w = np.asarray(omegas, dtype=float).ravel()
    nc = sys.n_c
    row = beta * sys.C_cl.copy()
    row[:nc] = 0.0
    row[0] = P
    col = np.zeros(A.shape[0])
    col[0] = 1.0
    M = 1j * w[:, None, None] * np.eye(A.shape[0])[None] - A[None]
    x = np.linalg.solve(M, np.broadcast_to(col.astype(complex), (w.size, A.shape[0]))[..., None])
    h = x[..., 0] @ row
    re = np.real(h)
    i = int(np.argmin(re))
    g = sys.rc.gamma
    resid = g * g * P - P
    return HBetaCheck(float(beta), P, w, float(re[i]), float(w[i]), float(resid),
                      bool(re[i] > 0), bool(resid <= 0))


@dataclass(frozen=True)
class TwoResetCheck:
    two_reset: bool
    resets_per_period: int
    reset_counts: tuple
    residual: float
    omega: float
    amplitude: float

    @property
    def classification(self) -> str:
        return "two-reset" if self.two_reset else "multiple-reset"


def two_reset_check(sys: ClosedLoopSystem, amplitude: float, omega: float,
                    cfg: SimConfig | None = None, K: int = 2) -> TwoResetCheck:
    """Simulate to steady state and count the resets per period."""
    cfg = cfg or SimConfig()
    tr = simulate(sys, SinusoidSpec(amplitude, omega), cfg)
    ss = steady_state(tr, K=K, tol=cfg.periodicity_tol)
    two = all(c == 2 for c in ss.reset_counts)
    return TwoResetCheck(two, ss.resets_per_period, ss.reset_counts, ss.residual,
                         float(omega), float(amplitude))


def to_json(report) -> str:
    """Serialize a check result (arrays become lists)."""
    d = asdict(report)
    if hasattr(report, "classification"):
        d["classification"] = report.classification
    if hasattr(report, "passed") and "passed" not in d:
        d["passed"] = report.passed

    def conv(v):
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, (np.floating, np.integer, np.bool_)):
            return v.item()
        if isinstance(v, (list, tuple)):
            return [conv(x) for x in v]
        return v

    return json.dumps({k: conv(v) for k, v in d.items()}, indent=2, sort_keys=True)
