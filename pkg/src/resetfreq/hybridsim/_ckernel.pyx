# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hybrid integration kernel; see ``_pykernel.integrate``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, fabs, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef enum:
    OK = 0
    ZENO = 1
    DIVERGED = 2


cdef inline int _sign(double v) nogil:
    if v > 0.0:
        return 1
    if v < 0.0:
        return -1
    return 0


cdef struct Sys:
    int n
    double* A
    double* b
    double* c
    double d
    double da, dw, dp
    double ea, ew, ep
    double* k1
    double* k2
    double* k3
    double* k4
    double* tmp


cdef inline double _u(Sys* s, double t) nogil:
    return s.da * sin(s.dw * t + s.dp)


cdef inline void _deriv(Sys* s, double* x, double ut, double* out) nogil:
    cdef int i, j, n = s.n
    cdef double acc
    for i in range(n):
        acc = s.b[i] * ut
        for j in range(n):
            acc += s.A[i * n + j] * x[j]
        out[i] = acc


cdef void _rk4(Sys* s, double* x, double t, double h, double* out) nogil:
    cdef int i, n = s.n
    cdef double um = _u(s, t + 0.5 * h)
    _deriv(s, x, _u(s, t), s.k1)
    for i in range(n):
        s.tmp[i] = x[i] + 0.5 * h * s.k1[i]
    _deriv(s, s.tmp, um, s.k2)
    for i in range(n):
        s.tmp[i] = x[i] + 0.5 * h * s.k2[i]
    _deriv(s, s.tmp, um, s.k3)
    for i in range(n):
        s.tmp[i] = x[i] + h * s.k3[i]
    _deriv(s, s.tmp, _u(s, t + h), s.k4)
    for i in range(n):
        out[i] = x[i] + (h / 6.0) * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i])


cdef inline double _trig(Sys* s, double* x, double t) nogil:
    cdef int i
    cdef double acc = s.d * _u(s, t) + s.ea * sin(s.ew * t + s.ep)
    for i in range(s.n):
        acc += s.c[i] * x[i]
    return acc


def integrate(A, b, drive, c_trig, double d_trig, ext, rho, x0, double dt,
              long n_steps, long record_start, double bisect_tol,
              double zeno_dt, double div_limit):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Af = np.ascontiguousarray(A, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bf = np.ascontiguousarray(b, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cf = np.ascontiguousarray(c_trig, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rf = np.ascontiguousarray(rho, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xf = np.array(x0, dtype=np.float64).ravel()
    cdef int n = xf.shape[0]
    cdef long n_rec = n_steps - record_start if n_steps > record_start else 0
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.empty((n_rec, n))
    cdef double[:, ::1] Xv = X
    cdef Sys s
    cdef double* work = <double*> malloc(9 * n * sizeof(double) + 1)
    if work == NULL:
        raise MemoryError()
    s.n = n
    s.A = &Af[0] if n else NULL
    s.b = &bf[0] if n else NULL
    s.c = &cf[0] if n else NULL
    s.d = d_trig
    s.da, s.dw, s.dp = drive
    s.ea, s.ew, s.ep = ext
    s.k1 = work
    s.k2 = work + n
    s.k3 = work + 2 * n
    s.k4 = work + 3 * n
    s.tmp = work + 4 * n
    cdef double* x = work + 5 * n
    cdef double* xs = work + 6 * n
    cdef double* x1 = work + 7 * n
    cdef double* xm = work + 8 * n
    cdef double* rp = &rf[0] if n else NULL

    ev_t, ev_pre, ev_post = [], [], []
    cdef int i, s1, last_sign
    cdef long k
    cdef double t1, ts, h, lo, hi, mid, te
    cdef double last_event = -INFINITY
    cdef int status = OK
    cdef double t_fail = 0.0
    for i in range(n):
        x[i] = xf[i]
    last_sign = _sign(_trig(&s, x, 0.0))

    try:
        for k in range(n_steps):
            if k >= record_start:
                for i in range(n):
                    Xv[k - record_start, i] = x[i]
            t1 = (k + 1) * dt
            ts = k * dt
            for i in range(n):
                xs[i] = x[i]
            while True:
                h = t1 - ts
                if h <= 0.0:
                    for i in range(n):
                        x[i] = xs[i]
                    break
                _rk4(&s, xs, ts, h, x1)
                s1 = _sign(_trig(&s, x1, t1))
                if s1 != 0 and last_sign != 0 and s1 != last_sign:
                    lo = 0.0
                    hi = h
                    while hi - lo > bisect_tol:
                        mid = 0.5 * (lo + hi)
                        _rk4(&s, xs, ts, mid, xm)
                        if _sign(_trig(&s, xm, ts + mid)) == last_sign:
                            lo = mid
                        else:
                            hi = mid
                    te = ts + hi
                    _rk4(&s, xs, ts, hi, xm)
                    if te - last_event < zeno_dt:
                        status = ZENO
                        t_fail = te
                        break
                    last_event = te
                    pre = np.empty(n)
                    post = np.empty(n)
                    for i in range(n):
                        pre[i] = xm[i]
                        xs[i] = rp[i] * xm[i]
                        post[i] = xs[i]
                    if k >= record_start and te - k * dt <= bisect_tol:
                        # right-continuous sampling at a grid-point event
                        for i in range(n):
                            Xv[k - record_start, i] = xs[i]
                    ev_t.append(te)
                    ev_pre.append(pre)
                    ev_post.append(post)
                    last_sign = s1
                    ts = te
                    continue
                if s1 != 0:
                    last_sign = s1
                for i in range(n):
                    x[i] = x1[i]
                break
            if status != OK:
                break
            for i in range(n):
                if not fabs(x[i]) <= div_limit:
                    status = DIVERGED
                    t_fail = t1
                    break
            if status != OK:
                break
    finally:
        free(work)

    if status != OK:
        return status, t_fail, X[:0], np.array(ev_t), np.array(ev_pre), np.array(ev_post)
    return (OK, 0.0, X, np.array(ev_t, dtype=float),
            np.array(ev_pre).reshape(-1, n), np.array(ev_post).reshape(-1, n))
