# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, INFINITY

cnp.import_array()

cdef double GOLDEN = 0.5 * (sqrt(5.0) - 1.0)


def cd_sweeps(double[:, ::1] G, double[::1] pen, double[::1] beta, double[::1] r,
              int max_sweeps, double tol):
    cdef Py_ssize_t p = beta.shape[0]
    cdef Py_ssize_t j, k
    cdef int sweeps = 0
    cdef double change = 0.0
    cdef double gjj, old, z, thr, new, delta, step
    while sweeps < max_sweeps:
        sweeps += 1
        change = 0.0
        for j in range(p):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            old = beta[j]
            z = r[j] + gjj * old
            thr = pen[j]
            if z > thr:
                new = (z - thr) / gjj
            elif z < -thr:
                new = (z + thr) / gjj
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                for k in range(p):
                    r[k] -= G[j, k] * delta
                step = fabs(delta) * sqrt(gjj)
                if step > change:
                    change = step
        if change <= tol:
            break
    return sweeps, change


cdef inline double _ratio(double q, double c) nogil:
    if c <= 0.0:
        return INFINITY
    return q / (c * c)


cdef double _constraint_shift(double[::1] b, double[::1] d, double t,
                              unsigned char[::1] sm, double[::1] w) nogil:
    cdef Py_ssize_t i
    cdef double c = 0.0, v
    for i in range(b.shape[0]):
        v = b[i] + t * d[i]
        if sm[i]:
            c += fabs(v)
        else:
            c -= w[i] * fabs(v)
    return c


cdef double _quad(double[:, ::1] G, double[::1] u, double[::1] v) nogil:
    cdef Py_ssize_t i, k
    cdef double s = 0.0
    for i in range(u.shape[0]):
        for k in range(v.shape[0]):
            s += u[i] * G[i, k] * v[k]
    return s


def refine_ratio(double[:, ::1] G, s_mask, double[::1] w, double[::1] b,
                 int passes, double step0):
    cdef Py_ssize_t p = b.shape[0]
    cdef unsigned char[::1] sm = np.ascontiguousarray(s_mask, dtype=np.uint8)
    cdef list dir_list = []
    cdef Py_ssize_t i, j, it, di, ndir
    for i in range(p):
        d = np.zeros(p)
        d[i] = 1.0
        dir_list.append(d)
    for i in range(p):
        for j in range(i + 1, p):
            for sgn in (1.0, -1.0):
                d = np.zeros(p)
                d[i] = 1.0
                d[j] = sgn
                dir_list.append(d)
    ndir = len(dir_list)
    cdef double[:, ::1] D = np.ascontiguousarray(np.array(dir_list).reshape(ndir, p))
    cdef double[::1] dGd = np.empty(ndir)
    for di in range(ndir):
        dGd[di] = _quad(G, D[di], D[di])

    cdef double zero = 0.0
    cdef double[::1] zvec = np.zeros(p)
    cdef double best = _ratio(_quad(G, b, b), _constraint_shift(b, zvec, zero, sm, w))
    cdef double h = step0
    cdef double q0, Gb_d, lo, hi, x1, x2, f1, f2, t, ft, c
    cdef bint improved
    cdef int _pass
    for _pass in range(passes):
        improved = False
        for di in range(ndir):
            Gb_d = _quad(G, D[di], b)
            q0 = _quad(G, b, b)
            lo = -h
            hi = h
            x1 = hi - GOLDEN * (hi - lo)
            x2 = lo + GOLDEN * (hi - lo)
            f1 = _ratio(q0 + 2.0 * x1 * Gb_d + x1 * x1 * dGd[di],
                        _constraint_shift(b, D[di], x1, sm, w))
            f2 = _ratio(q0 + 2.0 * x2 * Gb_d + x2 * x2 * dGd[di],
                        _constraint_shift(b, D[di], x2, sm, w))
            for it in range(48):
                if f1 <= f2:
                    hi = x2
                    x2 = x1
                    f2 = f1
                    x1 = hi - GOLDEN * (hi - lo)
                    f1 = _ratio(q0 + 2.0 * x1 * Gb_d + x1 * x1 * dGd[di],
                                _constraint_shift(b, D[di], x1, sm, w))
                else:
                    lo = x1
                    x1 = x2
                    f1 = f2
                    x2 = lo + GOLDEN * (hi - lo)
                    f2 = _ratio(q0 + 2.0 * x2 * Gb_d + x2 * x2 * dGd[di],
                                _constraint_shift(b, D[di], x2, sm, w))
            if f1 <= f2:
                t = x1
                ft = f1
            else:
                t = x2
                ft = f2
            if ft < best * (1.0 - 1e-15):
                for i in range(p):
                    b[i] += t * D[di, i]
                c = _constraint_shift(b, zvec, zero, sm, w)
                for i in range(p):
                    b[i] /= c
                best = ft
                improved = True
        if not improved:
            h *= 0.5
            if h < 1e-12:
                break
    return best
