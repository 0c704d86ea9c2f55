"""Time-domain simulation of reset systems under sinusoidal excitation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..hosidf_closed import ClosedLoopSystem, Interconnection
from ..hosidf_open import ResetController, SinusoidSpec
from ..linsys import LinearSystem, to_ss
from ..spectrum import HarmonicSpectrum
from . import _backend

SIGNALS = ("r", "e", "e_s", "v", "u", "y")
MIN_STEPS_PER_PERIOD = 4096
MAX_AUTO_TRANSIENT = 5000


class SimulationError(RuntimeError):
    pass


class ZenoError(SimulationError):
    """Two resets closer than the configured fraction of a period."""


class DivergenceError(SimulationError):
    """State norm exceeded the divergence limit."""


class NotConvergedError(SimulationError):
    """Periodicity residual above threshold."""

    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class SimConfig:
    """Integration and harvesting settings.

    The step is ``period / steps_per_period`` so that the sample grid is
    aligned to whole periods. ``steps_per_period=None`` picks the smallest
    power of two ``>= 4096`` with ``|lambda_max| * dt <= stiffness``.
    ``bisect_tol`` and ``zeno_fraction`` are fractions of the period.
    With ``auto_transient`` the discarded transient is lengthened (and the
    total extended by the same amount) until the slowest mode of the
    base-linear dynamics has decayed by ``transient_decay``.
    """

    steps_per_period: int | None = None
    periods: int = 60
    transient_periods: int = 40
    bisect_tol: float = 1e-12
    record_every: int = 1
    auto_transient: bool = True
    transient_decay: float = 1e-9
    periodicity_tol: float = 1e-6
    zeno_fraction: float = 1e-6
    divergence_limit: float = 1e12
    stiffness: float = 0.1

    def __post_init__(self):
        if self.steps_per_period is not None and self.steps_per_period <= 1000:
            raise ValueError("steps_per_period must exceed 1000")
        if not 0 <= self.transient_periods < self.periods:
            raise ValueError("need 0 <= transient_periods < periods")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.bisect_tol <= 0 or self.zeno_fraction <= 0:
            raise ValueError("tolerances must be positive")

    def dt(self, omega: float, A: np.ndarray | None = None) -> float:
        return (2 * np.pi / omega) / self.resolve_steps(omega, A)

    def resolve_steps(self, omega: float, A: np.ndarray | None = None) -> int:
        if self.steps_per_period is not None:
            return int(self.steps_per_period)
        n = MIN_STEPS_PER_PERIOD
        if A is not None and A.size:
            lam = float(np.max(np.abs(np.linalg.eigvals(A))))
            need = lam * (2 * np.pi / omega) / self.stiffness
            while n < need:
                n *= 2
        return n


@dataclass(frozen=True)
class OpenLoopSetup:
    """Reset controller followed by optional ``c_alpha`` and ``plant``.

    The controller input is the excitation itself. Reset is triggered by
    ``trigger`` when given, else by the input. A non-resetting copy of the
    controller runs alongside so that the nonlinear part
    ``q = v - v_bl`` is available as a signal.
    """

    rc: ResetController
    c_alpha: LinearSystem | None = None
    plant: LinearSystem | None = None
    trigger: SinusoidSpec | None = None


@dataclass(frozen=True)
class EventLog:
    t: np.ndarray
    pre: np.ndarray
    post: np.ndarray
    is_reset: np.ndarray

    def __len__(self):
        return self.t.size


@dataclass(frozen=True)
class Trajectory:
    """Recorded steady-state part of a run.

    ``t`` is uniform with spacing ``dt * record_every`` and spans whole
    periods. Events cover the full run including the transient.
    """

    t: np.ndarray
    x: np.ndarray
    signals: dict
    events: EventLog
    omega: float
    samples_per_period: int
    labels: tuple
    reset_index: int
    backend: str
    dt: float

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    @property
    def reset_flag(self) -> np.ndarray:
        """1 on samples preceded by a reset since the previous sample."""
        flag = np.zeros(self.t.size, dtype=int)
        if self.t.size == 0:
            return flag
        h = self.t[1] - self.t[0] if self.t.size > 1 else self.dt
        ev = self.events.t[self.events.is_reset]
        ev = ev[(ev > self.t[0] - h) & (ev <= self.t[-1])]
        idx = np.searchsorted(self.t, ev, side="left")
        flag[idx[idx < flag.size]] = 1
        return flag


@dataclass(frozen=True)
class _Model:
    A: np.ndarray
    b: np.ndarray
    rho: np.ndarray
    rows: dict
    feed: dict
    c_trig: np.ndarray
    d_trig: float
    ext: tuple
    labels: tuple
    decay_A: np.ndarray | None


def _closed_model(sys: ClosedLoopSystem) -> _Model:
    ic: Interconnection = sys.interconnection
    c = np.asarray(ic.rows[ic.trigger])
    return _Model(ic.A, ic.b, ic.rho, dict(ic.rows), dict(ic.feed), c,
                  float(ic.feed[ic.trigger]), (0.0, 0.0, 0.0), ic.labels, ic.A)


def _open_model(setup: OpenLoopSetup, base_omega: float) -> _Model:
    rc = setup.rc
    ca = to_ss(setup.c_alpha) if setup.c_alpha is not None else None
    p = to_ss(setup.plant) if setup.plant is not None else None
    nc = rc.n_c
    na = ca.n if ca is not None else 0
    npl = p.n if p is not None else 0
    N = 2 * nc + na + npl
    ia, ip, ish = nc, nc + na, nc + na + npl
    A = np.zeros((N, N))
    b = np.zeros(N)
    A[:nc, :nc] = rc.A_R
    b[:nc] = rc.B_R[:, 0]
    A[ish:, ish:] = rc.A_R
    b[ish:] = rc.B_R[:, 0]
    v_row = np.zeros(N)
    v_row[:nc] = rc.C_R[0]
    v_ff = rc.D_R[0, 0]
    if ca is not None:
        A[ia:ip, ia:ip] = ca.A
        A[ia:ip] += np.outer(ca.B[:, 0], v_row)
        b[ia:ip] += ca.B[:, 0] * v_ff
        u_row = ca.D[0, 0] * v_row
        u_row[ia:ip] += ca.C[0]
        u_ff = ca.D[0, 0] * v_ff
    else:
        u_row, u_ff = v_row.copy(), v_ff
    if p is not None:
        A[ip:ish, ip:ish] = p.A
        A[ip:ish] += np.outer(p.B[:, 0], u_row)
        b[ip:ish] += p.B[:, 0] * u_ff
        y_row = p.D[0, 0] * u_row
        y_row[ip:ish] += p.C[0]
        y_ff = p.D[0, 0] * u_ff
    else:
        y_row, y_ff = u_row.copy(), u_ff
    vbl_row = np.zeros(N)
    vbl_row[ish:] = rc.C_R[0]
    zero = np.zeros(N)
    rows = {"r": zero, "e": zero, "v": v_row, "u": u_row, "y": y_row,
            "v_bl": vbl_row, "q": v_row - vbl_row}
    feed = {"r": 1.0, "e": 1.0, "v": v_ff, "u": u_ff, "y": y_ff,
            "v_bl": v_ff, "q": 0.0}
    if setup.trigger is not None:
        tr = setup.trigger
        if tr.n != 1 or not np.isclose(tr.omega, base_omega, rtol=1e-12):
            raise ValueError("trigger must be a sinusoid at the base frequency")
        ext = (tr.amplitude, tr.omega, tr.phase)
        d_trig = 0.0
    else:
        ext = (0.0, 0.0, 0.0)
        d_trig = 1.0
    rows["e_s"] = zero
    feed["e_s"] = d_trig
    rho = np.ones(N)
    rho[0] = rc.gamma
    labels = tuple([f"xc{i}" for i in range(nc)] + [f"xa{i}" for i in range(na)]
                   + [f"xp{i}" for i in range(npl)] + [f"xbl{i}" for i in range(nc)])
    return _Model(A, b, rho, rows, feed, zero, d_trig, ext, labels, None)


def _auto_transient(model: _Model, omega: float, cfg: SimConfig) -> int:
    if not cfg.auto_transient or model.decay_A is None or model.decay_A.size == 0:
        return cfg.transient_periods
    sigma = float(-np.max(np.real(np.linalg.eigvals(model.decay_A))))
    if sigma <= 0:
        return cfg.transient_periods
    need = math.ceil(math.log(1.0 / cfg.transient_decay) / (sigma * 2 * np.pi / omega))
    return int(min(max(cfg.transient_periods, need), MAX_AUTO_TRANSIENT))


def simulate(system, input: SinusoidSpec, cfg: SimConfig | None = None,
             x0=None, backend: str | None = None) -> Trajectory:
    """Integrate a closed loop (``ClosedLoopSystem``) or an open chain
    (``OpenLoopSetup``) driven by ``input`` from ``x0`` (zero by default).

    For a closed loop ``input`` is the reference; for an open chain it is the
    controller input. The base frequency is ``input.omega``.
    """
    cfg = cfg or SimConfig()
    omega = float(input.omega)
    if isinstance(system, ClosedLoopSystem):
        model = _closed_model(system)
    elif isinstance(system, OpenLoopSetup):
        model = _open_model(system, omega)
    elif isinstance(system, ResetController):
        model = _open_model(OpenLoopSetup(system), omega)
    else:
        raise TypeError(f"cannot simulate {type(system).__name__}")

    period = 2 * np.pi / omega
    n_per = cfg.resolve_steps(omega, model.A)
    dt = period / n_per
    transient = _auto_transient(model, omega, cfg)
    total = cfg.periods + (transient - cfg.transient_periods)
    n_steps = total * n_per
    record_start = transient * n_per
    drive = (input.amplitude, input.n * omega, input.phase)
    x0 = np.zeros(model.A.shape[0]) if x0 is None else np.asarray(x0, dtype=float)
    if x0.shape != (model.A.shape[0],):
        raise ValueError(f"x0 must have length {model.A.shape[0]}")

    kernel = _backend.get_kernel(backend)
    status, t_fail, X, ev_t, ev_pre, ev_post = kernel(
        model.A, model.b, drive, model.c_trig, model.d_trig, model.ext,
        model.rho, x0, dt, n_steps, record_start, cfg.bisect_tol * period,
        cfg.zeno_fraction * period, cfg.divergence_limit)
    if status == 1:
        raise ZenoError(f"two resets within {cfg.zeno_fraction:g} period at t={t_fail:.9g} s")
    if status == 2:
        raise DivergenceError(f"|x| exceeded {cfg.divergence_limit:g} at t={t_fail:.9g} s")

    k = np.arange(record_start, n_steps)[:: cfg.record_every]
    X = X[:: cfg.record_every]
    t = k * dt
    ev_pre = ev_pre.reshape(-1, x0.size)
    ev_post = ev_post.reshape(-1, x0.size)
    is_reset = np.any(ev_pre != ev_post, axis=1) if ev_t.size else np.zeros(0, bool)
    events = EventLog(np.asarray(ev_t, dtype=float), ev_pre, ev_post, is_reset)
    r = input(t)
    signals = {name: X @ row + model.feed[name] * r for name, row in model.rows.items()}
    return Trajectory(t, X, signals, events, omega, n_per // cfg.record_every,
                      model.labels, 0, _backend.BACKEND if backend is None else backend, dt)


@dataclass(frozen=True)
class SteadyStateRecord:
    """Last ``K`` periods of a trajectory and its periodicity diagnostics."""

    t: np.ndarray
    signals: dict
    residual: float
    resets_per_period: int
    reset_counts: tuple
    periods: int
    omega: float
    samples_per_period: int
    event_times: np.ndarray = field(repr=False)


def steady_state(traj: Trajectory, omega: float | None = None, K: int = 2,
                 tol: float = 1e-6, check: bool = True) -> SteadyStateRecord:
    """Harvest the last ``K`` periods.

    The residual is the L-infinity difference between the last two recorded
    periods, relative to each signal's peak, maximized over signals. A
    residual above ``tol`` raises :class:`NotConvergedError` when ``check``.
    """
    omega = traj.omega if omega is None else float(omega)
    if not np.isclose(omega, traj.omega, rtol=1e-12):
        raise ValueError("omega does not match the trajectory")
    m = traj.samples_per_period
    n_rec = traj.t.size // m
    if K < 1 or n_rec < max(K, 2):
        raise ValueError(f"trajectory holds {n_rec} periods; need >= max(K, 2)")
    residual = 0.0
    for name, sig in traj.signals.items():
        a, b = sig[-2 * m:-m], sig[-m:]
        peak = np.max(np.abs(sig[-m:]))
        if peak > 0:
            residual = max(residual, float(np.max(np.abs(a - b)) / peak))
    if check and residual > tol:
        raise NotConvergedError(
            f"steady state not reached: periodicity residual {residual:.3e} > {tol:.1e}",
            residual)
    sl = slice(traj.t.size - K * m, traj.t.size)
    t = traj.t[sl]
    period = 2 * np.pi / omega
    ev = traj.events.t[traj.events.is_reset]
    # half-open bins, nudged so an event landing on a grid edge counts once
    edges = t[0] + period * (np.arange(K + 1) - 1e-9)
    idx = np.searchsorted(ev, edges, side="left")
    counts = tuple(int(c) for c in np.diff(idx))
    return SteadyStateRecord(t, {k: v[sl] for k, v in traj.signals.items()}, residual,
                             counts[-1], counts, K, omega, m, ev[idx[0]:idx[-1]])


def harmonics(signal, omega: float, n_max: int, t) -> HarmonicSpectrum:
    """Fourier coefficients of a uniformly sampled window of whole periods.

    ``c_n = (2/T_w) * integral x(t) e^{-j n w t} dt`` in the sine basis,
    integrated with the trapezoidal rule on the closed periodic window
    (which on a uniform grid reduces to a plain sum).
    """
    x = np.asarray(signal, dtype=float)
    t = np.asarray(t, dtype=float)
    if x.shape != t.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("signal and t must be matching 1-D arrays")
    h = t[1] - t[0]
    if np.max(np.abs(np.diff(t) - h)) > 1e-6 * h:
        raise ValueError("time grid must be uniform")
    span = x.size * h * omega / (2 * np.pi)
    K = int(round(span))
    if K < 1 or abs(span - K) > 1e-6:
        raise ValueError(f"window spans {span:.6f} periods; need an integer number")
    N = x.size
    if n_max * K >= N // 2:
        raise ValueError("n_max exceeds the Nyquist limit of the window")
    X = np.fft.rfft(x)
    orders = np.arange(1, n_max + 1)
    z = (2.0 / N) * X[orders * K] * np.exp(-1j * orders * omega * t[0])
    return HarmonicSpectrum(omega, orders, 1j * z)


def prediction_error(e_sim, e_pre, t_sim=None, t_pre=None) -> float:
    """``max |e_sim - e_pre|`` on a common grid (``e_pre`` interpolated if needed)."""
    e_sim = np.asarray(e_sim, dtype=float)
    e_pre = np.asarray(e_pre, dtype=float)
    if t_sim is not None and t_pre is not None:
        t_sim = np.asarray(t_sim, dtype=float)
        t_pre = np.asarray(t_pre, dtype=float)
        if t_sim.shape != t_pre.shape or not np.array_equal(t_sim, t_pre):
            if t_sim[0] < t_pre[0] or t_sim[-1] > t_pre[-1]:
                raise ValueError("prediction window does not cover the simulation window")
            e_pre = np.interp(t_sim, t_pre, e_pre)
    if e_sim.shape != e_pre.shape:
        raise ValueError("signals cover different windows")
    return float(np.max(np.abs(e_sim - e_pre)))


def export_csv(traj: Trajectory, fh, header: str | None = None) -> None:
    """Write ``t, r, e, e_s, v, u, y, reset_flag`` rows (12 significant digits)."""
    if header:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
    fh.write(",".join(("t",) + SIGNALS + ("reset_flag",)) + "\n")
    cols = [traj.t] + [traj.signals[s] for s in SIGNALS]
    flag = traj.reset_flag
    for i in range(traj.t.size):
        fh.write(",".join(f"{c[i]:.12g}" for c in cols) + f",{flag[i]}\n")
