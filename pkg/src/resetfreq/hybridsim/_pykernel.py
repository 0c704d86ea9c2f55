"""Pure-Python reference of the hybrid integration kernel.

Mirrors ``_ckernel.pyx`` step for step; used when the compiled module is
unavailable or ``RESETFREQ_KERNEL=python`` is set.
"""

from __future__ import annotations

import math

import numpy as np

OK, ZENO, DIVERGED = 0, 1, 2


def _sign(v: float) -> int:
    return 1 if v > 0.0 else (-1 if v < 0.0 else 0)


def integrate(A, b, drive, c_trig, d_trig, ext, rho, x0, dt, n_steps,
              record_start, bisect_tol, zeno_dt, div_limit):
    """Fixed-step RK4 of ``x' = A x + b u(t)`` with zero-crossing jumps.

    ``u(t) = drive[0] sin(drive[1] t + drive[2])``; the trigger is
    ``c_trig . x + d_trig u(t) + ext[0] sin(ext[1] t + ext[2])`` and a sign
    change of it applies ``x <- rho * x`` at the bisected crossing time.

    Returns ``(status, t_fail, X, ev_t, ev_pre, ev_post)`` where ``X`` holds
    the states at grid times ``k*dt`` for ``record_start <= k < n_steps``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c_trig, dtype=float)
    rho = np.asarray(rho, dtype=float)
    x = np.array(x0, dtype=float)
    n = x.size
    da, dw, dp = (float(v) for v in drive)
    ea, ew, ep = (float(v) for v in ext)

    def u(t):
        return da * math.sin(dw * t + dp)

    def trig(xv, t):
        return float(c @ xv) + d_trig * u(t) + ea * math.sin(ew * t + ep)

    def rk4(xv, t, h):
        k1 = A @ xv + b * u(t)
        k2 = A @ (xv + 0.5 * h * k1) + b * u(t + 0.5 * h)
        k3 = A @ (xv + 0.5 * h * k2) + b * u(t + 0.5 * h)
        k4 = A @ (xv + h * k3) + b * u(t + h)
        return xv + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    n_rec = max(n_steps - record_start, 0)
    X = np.empty((n_rec, n))
    ev_t, ev_pre, ev_post = [], [], []
    last_sign = _sign(trig(x, 0.0))
    last_event = -math.inf

    for k in range(n_steps):
        if k >= record_start:
            X[k - record_start] = x
        t1 = (k + 1) * dt
        ts = k * dt
        xs = x
        while True:
            h = t1 - ts
            if h <= 0.0:
                x = xs
                break
            x1 = rk4(xs, ts, h)
            s1 = _sign(trig(x1, t1))
            if s1 != 0 and last_sign != 0 and s1 != last_sign:
                lo, hi = 0.0, h
                while hi - lo > bisect_tol:
                    mid = 0.5 * (lo + hi)
                    if _sign(trig(rk4(xs, ts, mid), ts + mid)) == last_sign:
                        lo = mid
                    else:
                        hi = mid
                te = ts + hi
                xe = rk4(xs, ts, hi)
                if te - last_event < zeno_dt:
                    return ZENO, te, X[:0], np.array(ev_t), np.array(ev_pre), np.array(ev_post)
                last_event = te
                xp = rho * xe
                if k >= record_start and te - k * dt <= bisect_tol:
                    # right-continuous sampling at a grid-point event
                    X[k - record_start] = xp
                ev_t.append(te)
                ev_pre.append(xe)
                ev_post.append(xp)
                last_sign = s1
                xs, ts = xp, te
                continue
            if s1 != 0:
                last_sign = s1
            x = x1
            break
        if not np.all(np.abs(x) <= div_limit):
            return DIVERGED, t1, X[:0], np.array(ev_t), np.array(ev_pre), np.array(ev_post)

    ev_pre_a = np.array(ev_pre).reshape(-1, n)
    ev_post_a = np.array(ev_post).reshape(-1, n)
    return OK, 0.0, X, np.array(ev_t, dtype=float), ev_pre_a, ev_post_a
