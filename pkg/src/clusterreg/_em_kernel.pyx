# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled EM backend.

Implements the ``em_run`` contract documented in ``_em_py`` with plain C
loops and LAPACK's dgelsy for the weighted least-squares solves. The whole
trajectory runs without the GIL, so multi-start drivers can execute starts
on real threads.
"""

import numpy as np

from libc.math cimport exp, fabs, isfinite, log, sqrt
from scipy.linalg.cython_lapack cimport dgels, dgelsy

DEF MODE_HOM = 0
DEF MODE_HET = 1
DEF MODE_CON = 2

cdef double LOG_2PI = 1.8378770664093454836

name = "compiled"


cdef inline double _rowdot(double[:, ::1] X, double[:, ::1] betas, int i, int g, int p) nogil:
    cdef int j
    cdef double acc = 0.0
    for j in range(p):
        acc += X[i, j] * betas[g, j]
    return acc


cdef double _estep(double[:, ::1] X, double[::1] y,
                   double[::1] w, double[:, ::1] betas, double[::1] variances,
                   double[:, ::1] z, double[::1] lp,
                   double[::1] lognorm, double[::1] i2v,
                   int n, int p, int G) nogil:
    # terms more than 37 nats below the row maximum underflow past double
    # precision; skipping their exp() leaves sums unchanged to ~1e-16
    cdef int i, g
    cdef double r, val, mx, s, lse, d, ll = 0.0
    for g in range(G):
        lognorm[g] = log(w[g]) - 0.5 * (LOG_2PI + log(variances[g]))
        i2v[g] = 1.0 / (2.0 * variances[g])
    for i in range(n):
        mx = -1e308
        for g in range(G):
            r = y[i] - _rowdot(X, betas, i, g, p)
            val = lognorm[g] - r * r * i2v[g]
            lp[g] = val
            if val > mx:
                mx = val
        s = 0.0
        for g in range(G):
            d = lp[g] - mx
            if d > -37.0:
                s += exp(d)
        lse = mx + log(s)
        ll += lse
        for g in range(G):
            d = lp[g] - lse
            z[i, g] = exp(d) if d > -37.0 else 0.0
    return ll


cdef inline void _fill_scaled(double[:, ::1] X, double[::1] y, double[:, ::1] z,
                              int g, double* a, double* b, int n, int p) nogil:
    cdef int i, j
    cdef double sw
    for i in range(n):
        sw = sqrt(z[i, g])
        b[i] = sw * y[i]
        for j in range(p):
            a[j * n + i] = sw * X[i, j]


cdef int _mstep(double[:, ::1] X, double[::1] y, double[:, ::1] z,
                double min_weight,
                double[::1] mass, double[::1] nw, double[:, ::1] nbetas,
                double[::1] vraw, double* rss_total,
                double* a, double* b, int* jpvt, double* work, int lwork,
                double rcond, int n, int p, int G) nogil:
    """0 ok, 1 empty component, 2 lapack failure.

    Plain QR (dgels) solves the sqrt(z)-scaled system; the rank-revealing
    dgelsy takes over only when dgels reports or produces a rank problem,
    yielding the minimum-norm solution in that case.
    """
    cdef int i, j, g, rank, info, nrhs = 1, ldb, m_ = n, p_ = p, ok
    cdef char trans = b'N'
    cdef double r, rss_g
    ldb = n if n > p else p
    for g in range(G):
        mass[g] = 0.0
    for i in range(n):
        for g in range(G):
            mass[g] += z[i, g]
    for g in range(G):
        if mass[g] < min_weight * n:
            return 1
        nw[g] = mass[g] / n
    rss_total[0] = 0.0
    for g in range(G):
        _fill_scaled(X, y, z, g, a, b, n, p)
        dgels(&trans, &m_, &p_, &nrhs, a, &m_, b, &ldb, work, &lwork, &info)
        ok = info == 0
        if ok:
            for j in range(p):
                if not isfinite(b[j]):
                    ok = 0
                    break
        if not ok:
            _fill_scaled(X, y, z, g, a, b, n, p)
            for j in range(p):
                jpvt[j] = 0
            dgelsy(&m_, &p_, &nrhs, a, &m_, b, &ldb, jpvt, &rcond, &rank, work, &lwork, &info)
            if info != 0:
                return 2
        for j in range(p):
            nbetas[g, j] = b[j]
        rss_g = 0.0
        for i in range(n):
            r = y[i] - _rowdot(X, nbetas, i, g, p)
            rss_g += z[i, g] * r * r
        vraw[g] = rss_g / mass[g]
        rss_total[0] += rss_g
    return 0


cdef void _mode_variances(double[::1] vraw, double rss_total, int n, int G,
                          int mode_code, double lo, double hi, double floor,
                          double[::1] out, int* floored) nogil:
    cdef int g
    cdef double pooled
    floored[0] = 0
    if mode_code == MODE_HET:
        for g in range(G):
            out[g] = vraw[g]
    elif mode_code == MODE_HOM:
        pooled = rss_total / n
        if pooled < floor:
            pooled = floor
            floored[0] = 1
        for g in range(G):
            out[g] = pooled
    else:
        for g in range(G):
            if vraw[g] < lo:
                out[g] = lo
            elif vraw[g] > hi:
                out[g] = hi
            else:
                out[g] = vraw[g]


def em_run(X, y, z0, int mode_code, double c, double target,
           int max_iter, double rel_tol, double min_weight, double floor):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    z0 = np.ascontiguousarray(z0, dtype=np.float64)

    cdef double[:, ::1] Xv = X
    cdef double[::1] yv = y
    cdef double[:, ::1] z0v = z0
    cdef int n = Xv.shape[0]
    cdef int p = Xv.shape[1]
    cdef int G = z0v.shape[1]
    cdef int ldb = n if n > p else p

    w_arr = np.empty(G)
    betas_arr = np.empty((G, p))
    var_arr = np.empty(G)
    z_arr = np.empty((n, G))
    trace_arr = np.empty(max_iter + 2)
    cdef double[::1] w = w_arr
    cdef double[:, ::1] betas = betas_arr
    cdef double[::1] variances = var_arr
    cdef double[:, ::1] z = z_arr
    cdef double[::1] trace = trace_arr

    scratch_w = np.empty(G)
    scratch_mass = np.empty(G)
    scratch_betas = np.empty((G, p))
    scratch_v = np.empty(G)
    scratch_lp = np.empty(G)
    scratch_lognorm = np.empty(G)
    scratch_i2v = np.empty(G)
    a_arr = np.empty(n * p)
    b_arr = np.empty(ldb)
    jpvt_arr = np.zeros(p, dtype=np.intc)
    cdef double[::1] nw = scratch_w
    cdef double[::1] mass = scratch_mass
    cdef double[:, ::1] nbetas = scratch_betas
    cdef double[::1] vraw = scratch_v
    cdef double[::1] lp = scratch_lp
    cdef double[::1] lognorm = scratch_lognorm
    cdef double[::1] i2v = scratch_i2v
    cdef double[::1] a = a_arr
    cdef double[::1] b = b_arr
    cdef int[::1] jpvt = jpvt_arr

    cdef double rcond = (n if n > p else p) * 2.220446049250313e-16
    cdef double lo = 0.0, hi = 0.0
    if mode_code == MODE_CON:
        lo = target * sqrt(c)
        hi = target / sqrt(c)

    # workspace query sized for both dgels and dgelsy
    cdef int nrhs = 1, rank, info, lwork = -1
    cdef char trans = b'N'
    cdef double wk_gelsy, wk_gels
    dgelsy(&n, &p, &nrhs, &a[0], &n, &b[0], &ldb, &jpvt[0], &rcond, &rank,
           &wk_gelsy, &lwork, &info)
    dgels(&trans, &n, &p, &nrhs, &a[0], &n, &b[0], &ldb, &wk_gels, &lwork, &info)
    lwork = <int> (wk_gelsy if wk_gelsy > wk_gels else wk_gels)
    work_arr = np.empty(lwork)
    cdef double[::1] work = work_arr

    cdef double rss_total = 0.0, ll = 0.0, prev_ll = 0.0
    cdef int st, floored, it = 0, t = 0
    cdef int converged = 0, degenerate = 0, status = 0, have_prev = 0
    cdef int init_collapse = 0, g, j

    with nogil:
        st = _mstep(Xv, yv, z0v, min_weight, mass, nw, nbetas, vraw, &rss_total,
                    &a[0], &b[0], &jpvt[0], &work[0], lwork, rcond, n, p, G)
        if st == 0:
            for g in range(G):
                w[g] = nw[g]
                for j in range(p):
                    betas[g, j] = nbetas[g, j]
            if mode_code == MODE_HET:
                for g in range(G):
                    if vraw[g] < floor:
                        init_collapse = 1
            if init_collapse:
                # collapse straight out of the initial posteriors
                for g in range(G):
                    variances[g] = vraw[g] if vraw[g] > floor else floor
                degenerate = 1
                ll = _estep(Xv, yv, w, betas, variances, z, lp, lognorm, i2v, n, p, G)
                trace[t] = ll
                t += 1
            else:
                _mode_variances(vraw, rss_total, n, G, mode_code, lo, hi, floor,
                                variances, &floored)
                if floored:
                    degenerate = 1
                while True:
                    ll = _estep(Xv, yv, w, betas, variances, z, lp, lognorm, i2v, n, p, G)
                    trace[t] = ll
                    t += 1
                    if have_prev and fabs(ll - prev_ll) <= rel_tol * n:
                        converged = 1
                        break
                    prev_ll = ll
                    have_prev = 1
                    if it >= max_iter:
                        break
                    st = _mstep(Xv, yv, z, min_weight, mass, nw, nbetas, vraw,
                                &rss_total, &a[0], &b[0], &jpvt[0], &work[0],
                                lwork, rcond, n, p, G)
                    if st != 0:
                        status = st
                        break
                    if mode_code == MODE_HET:
                        init_collapse = 0
                        for g in range(G):
                            if vraw[g] < floor:
                                init_collapse = 1
                        if init_collapse:
                            degenerate = 1
                            break
                    for g in range(G):
                        w[g] = nw[g]
                        for j in range(p):
                            betas[g, j] = nbetas[g, j]
                    _mode_variances(vraw, rss_total, n, G, mode_code, lo, hi, floor,
                                    variances, &floored)
                    if floored:
                        degenerate = 1
                    it += 1

    if st == 1 and t == 0:
        return None, None, None, None, None, False, False, 2
    if st == 2:
        raise RuntimeError("dgelsy failed inside the EM kernel")
    status = 1 if status == 1 else 0
    return (w_arr, betas_arr, var_arr, z_arr, trace_arr[:t].copy(),
            bool(converged), bool(degenerate), status)
