# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled nearest-distance scans over a box tree of the point cloud.

Points are reordered so that every tree node covers a contiguous range and
carries an axis-aligned bounding box.  A node is skipped when a lower bound
of the distance from the query to its box is not below the best value found
so far.  The bound uses only the per-axis monotonicity of each term, so it
stays valid for the anisotropic pseudo-distance, which violates the triangle
inequality.  The minimum equals that of an exhaustive scan.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt, INFINITY

cnp.import_array()

DEF MAX_STACK = 256


cdef inline double _gap(double x, double lo, double hi) noexcept nogil:
    if x < lo:
        return lo - x
    if x > hi:
        return x - hi
    return 0.0


cdef inline double _apow(double x, double e) noexcept nogil:
    if e == 1.0:
        return x
    if e == 2.0:
        return x * x
    if e == 3.0:
        return x * x * x
    if e == 1.5:
        return x * sqrt(x)
    if x == 0.0:
        return 0.0
    return pow(x, e)


cdef inline double _aniso_lb(const double[:, ::1] q, Py_ssize_t k, const double[:, ::1] lo,
                             const double[:, ::1] hi, Py_ssize_t c, const double[::1] a) noexcept nogil:
    cdef double lb = 0.0
    cdef Py_ssize_t i
    for i in range(q.shape[1]):
        lb = lb + _apow(_gap(q[k, i], lo[c, i], hi[c, i]), a[i])
    return lb


cdef inline double _par_lb(const double[:, ::1] q, Py_ssize_t k, const double[:, ::1] lo,
                           const double[:, ::1] hi, Py_ssize_t c) noexcept nogil:
    cdef double sq = 0.0, g
    cdef Py_ssize_t i, d = q.shape[1] - 1
    for i in range(d):
        g = _gap(q[k, i], lo[c, i], hi[c, i])
        sq = sq + g * g
    return sqrt(sq) + sqrt(_gap(q[k, d], lo[c, d], hi[c, d]))


cdef inline double _lb(bint parabolic, const double[:, ::1] q, Py_ssize_t k, const double[:, ::1] lo,
                       const double[:, ::1] hi, Py_ssize_t c, const double[::1] a) noexcept nogil:
    if parabolic:
        return _par_lb(q, k, lo, hi, c)
    return _aniso_lb(q, k, lo, hi, c, a)


cdef double _scan(bint parabolic, const double[:, ::1] q, Py_ssize_t k, const double[:, ::1] pts,
                  Py_ssize_t start, Py_ssize_t stop, const double[::1] a, double best) noexcept nogil:
    cdef Py_ssize_t p, i
    cdef Py_ssize_t dim = q.shape[1]
    cdef double acc, diff
    for p in range(start, stop):
        acc = 0.0
        if parabolic:
            for i in range(dim - 1):
                diff = q[k, i] - pts[p, i]
                acc = acc + diff * diff
            acc = sqrt(acc) + sqrt(fabs(q[k, dim - 1] - pts[p, dim - 1]))
        else:
            for i in range(dim):
                acc = acc + _apow(fabs(q[k, i] - pts[p, i]), a[i])
                if acc >= best:
                    break
        if acc < best:
            best = acc
    return best


cdef void _query_all(bint parabolic, const double[:, ::1] q, const double[:, ::1] pts,
                     const double[::1] a, const long[::1] left, const long[::1] right,
                     const long[::1] start, const long[::1] stop,
                     const double[:, ::1] lo, const double[:, ::1] hi, double[::1] out) noexcept nogil:
    cdef long stack[MAX_STACK]
    cdef double bounds[MAX_STACK]
    cdef Py_ssize_t k
    cdef int top
    cdef long node, l, r
    cdef double best, bl, br
    for k in range(q.shape[0]):
        best = INFINITY
        top = 0
        stack[0] = 0
        bounds[0] = _lb(parabolic, q, k, lo, hi, 0, a)
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if bounds[top] >= best:
                continue
            l = left[node]
            if l < 0:
                best = _scan(parabolic, q, k, pts, start[node], stop[node], a, best)
                continue
            r = right[node]
            bl = _lb(parabolic, q, k, lo, hi, l, a)
            br = _lb(parabolic, q, k, lo, hi, r, a)
            # push the farther child first so the nearer one is visited first
            if bl <= br:
                if br < best:
                    stack[top] = r
                    bounds[top] = br
                    top += 1
                if bl < best:
                    stack[top] = l
                    bounds[top] = bl
                    top += 1
            else:
                if bl < best:
                    stack[top] = l
                    bounds[top] = bl
                    top += 1
                if br < best:
                    stack[top] = r
                    bounds[top] = br
                    top += 1
        out[k] = best


def min_aniso_dist(const double[:, ::1] queries, const double[:, ::1] points, const double[::1] a,
                   tree):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(queries.shape[0])
    cdef double[::1] ov = out
    cdef const long[::1] left = tree.left
    cdef const long[::1] right = tree.right
    cdef const long[::1] start = tree.start
    cdef const long[::1] stop = tree.stop
    cdef const double[:, ::1] lo = tree.lo
    cdef const double[:, ::1] hi = tree.hi
    with nogil:
        _query_all(False, queries, points, a, left, right, start, stop, lo, hi, ov)
    return out


def min_parabolic_dist(const double[:, ::1] queries, const double[:, ::1] points, tree):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(queries.shape[0])
    cdef double[::1] ov = out
    cdef double[::1] dummy = np.zeros(queries.shape[1])
    cdef const long[::1] left = tree.left
    cdef const long[::1] right = tree.right
    cdef const long[::1] start = tree.start
    cdef const long[::1] stop = tree.stop
    cdef const double[:, ::1] lo = tree.lo
    cdef const double[:, ::1] hi = tree.hi
    with nogil:
        _query_all(True, queries, points, dummy, left, right, start, stop, lo, hi, ov)
    return out
