# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: sampler streams, partial sums, and the built-in drift kernels.

Mirrors ``_core_py`` operation for operation; see that module for the calling
conventions.
"""

import numpy as np

from libc.math cimport exp, log, sin, cos, sqrt, fabs, INFINITY
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free

cdef enum:
    IID = 0
    SHUFFLE = 1
    RANDOM_SHUFFLE = 2
    SRW = 3
    NBRW = 4
    CHAIN = 5

cdef enum:
    K_LINEAR = 0
    K_MOMENTUM = 1
    K_SGDA = 2
    K_GTD2 = 3
    K_TDC = 4

BACKEND = "compiled"


cdef struct CSampler:
    int kind
    uint64_t rng
    int64_t cur
    int64_t prev
    int64_t pos
    int64_t *indptr
    int64_t *indices
    double *cdf
    int64_t n_cdf
    int64_t *perm
    int64_t n_perm


cdef inline uint64_t next_u64(CSampler *s) noexcept nogil:
    cdef uint64_t z
    s.rng += <uint64_t>0x9E3779B97F4A7C15ULL
    z = s.rng
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double next_double(CSampler *s) noexcept nogil:
    return <double>(next_u64(s) >> 11) * 1.1102230246251565e-16


cdef inline int64_t randbelow(CSampler *s, int64_t k) noexcept nogil:
    return <int64_t>(next_double(s) * <double>k)


cdef inline int64_t bisect_cdf(double *cdf, int64_t lo, int64_t hi, double u) noexcept nogil:
    cdef int64_t mid
    hi -= 1
    while lo < hi:
        mid = (lo + hi) // 2
        if u < cdf[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef inline void reshuffle(CSampler *s) noexcept nogil:
    cdef int64_t i, j, tmp
    i = s.n_perm - 1
    while i > 0:
        j = randbelow(s, i + 1)
        tmp = s.perm[i]
        s.perm[i] = s.perm[j]
        s.perm[j] = tmp
        i -= 1


cdef inline int64_t sampler_next(CSampler *s) noexcept nogil:
    cdef int64_t nxt, lo, deg, k, j
    if s.kind == IID:
        nxt = bisect_cdf(s.cdf, 0, s.n_cdf, next_double(s))
    elif s.kind == SHUFFLE or s.kind == RANDOM_SHUFFLE:
        s.pos += 1
        if s.pos == s.n_perm:
            s.pos = 0
            if s.kind == RANDOM_SHUFFLE:
                reshuffle(s)
        nxt = s.perm[s.pos]
    elif s.kind == SRW:
        lo = s.indptr[s.cur]
        deg = s.indptr[s.cur + 1] - lo
        nxt = s.indices[lo + randbelow(s, deg)]
    elif s.kind == NBRW:
        lo = s.indptr[s.cur]
        deg = s.indptr[s.cur + 1] - lo
        if s.prev < 0:
            nxt = s.indices[lo + randbelow(s, deg)]
        elif deg == 1:
            nxt = s.prev
        else:
            k = randbelow(s, deg - 1)
            j = lo
            while True:
                if s.indices[j] != s.prev:
                    if k == 0:
                        break
                    k -= 1
                j += 1
            nxt = s.indices[j]
    else:
        lo = s.indptr[s.cur]
        nxt = s.indices[bisect_cdf(s.cdf, lo, s.indptr[s.cur + 1], next_double(s))]
    s.prev = s.cur
    s.cur = nxt
    return nxt


cdef class _Packed:
    """Keeps the numpy buffers alive while a CSampler points into them."""
    cdef object packed
    cdef uint64_t[::1] rng
    cdef int64_t[::1] st
    cdef int64_t[::1] indptr
    cdef int64_t[::1] indices
    cdef double[::1] cdf
    cdef int64_t[::1] perm
    cdef CSampler c

    def __init__(self, packed):
        kind, rng, st, indptr, indices, cdf, perm = packed
        self.packed = packed
        self.rng = rng
        self.st = st
        self.indptr = indptr
        self.indices = indices
        self.cdf = cdf
        self.perm = perm
        self.c.kind = kind
        if kind > CHAIN or kind < 0:
            raise ValueError(f"unknown sampler kind {kind}")
        self.c.rng = rng[0]
        self.c.cur = st[0]
        self.c.prev = st[1]
        self.c.pos = st[2]
        self.c.indptr = &self.indptr[0] if self.indptr.shape[0] else NULL
        self.c.indices = &self.indices[0] if self.indices.shape[0] else NULL
        self.c.cdf = &self.cdf[0] if self.cdf.shape[0] else NULL
        self.c.n_cdf = self.cdf.shape[0]
        self.c.perm = &self.perm[0] if self.perm.shape[0] else NULL
        self.c.n_perm = self.perm.shape[0]

    cdef void store(self):
        self.rng[0] = self.c.rng
        self.st[0] = self.c.cur
        self.st[1] = self.c.prev
        self.st[2] = self.c.pos


def sample_stream(packed, Py_ssize_t n):
    cdef _Packed p = _Packed(packed)
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            o[i] = sampler_next(&p.c)
    p.store()
    return out


def accumulate_sums(packed, g, gbar, Py_ssize_t burn_in, Py_ssize_t horizon):
    cdef _Packed p = _Packed(packed)
    cdef double[:, ::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(gbar, dtype=np.float64)
    cdef Py_ssize_t k = cv.shape[0]
    acc_arr = np.zeros(k, dtype=np.float64)
    cdef double[::1] acc = acc_arr
    cdef Py_ssize_t i, j
    cdef int64_t xi
    with nogil:
        for i in range(burn_in):
            sampler_next(&p.c)
        for i in range(horizon):
            xi = sampler_next(&p.c)
            for j in range(k):
                acc[j] += gv[xi, j] - cv[j]
    p.store()
    return acc_arr


cdef inline bint finite(double v) noexcept nogil:
    return v == v and fabs(v) < INFINITY


cdef inline void project(double *v, Py_ssize_t d, double radius) noexcept nogil:
    cdef double sq = 0.0, nrm, scale
    cdef Py_ssize_t i
    for i in range(d):
        sq += v[i] * v[i]
    nrm = sqrt(sq)
    if nrm > radius:
        scale = radius / nrm
        for i in range(d):
            v[i] *= scale


cdef inline double sigmoid(double t) noexcept nogil:
    cdef double e
    if t >= 0.0:
        return 1.0 / (1.0 + exp(-t))
    e = exp(t)
    return e / (1.0 + e)


def run_kernel(int code, params, packed, x0, y0, int64_t n_steps, checkpoints,
               double a, double b, double radius):
    cdef _Packed p = _Packed(packed)
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] y = np.array(y0, dtype=np.float64)
    cdef Py_ssize_t d1 = x.shape[0], d2 = y.shape[0]
    cdef int64_t[::1] cps = np.ascontiguousarray(checkpoints, dtype=np.int64)
    cdef Py_ssize_t ncp = cps.shape[0]
    xs_arr = np.zeros((ncp, d1))
    ys_arr = np.zeros((ncp, d2))
    cdef double[:, ::1] xs = xs_arr
    cdef double[:, ::1] ys = ys_arr
    cdef double[::1] h1 = np.zeros(d1)
    cdef double[::1] h2 = np.zeros(d2)

    # kernel parameters; unused views stay at dummy arrays
    dummy2 = np.zeros((1, 1))
    dummy1 = np.zeros(1)
    idummy = np.zeros(1, dtype=np.int64)
    cdef double[:, ::1] A11 = dummy2, A12 = dummy2, A21 = dummy2, A22 = dummy2
    cdef double[:, ::1] C1 = dummy2, C2 = dummy2, S = dummy2, B = dummy2
    cdef double[::1] w = dummy1, z = dummy1, t = dummy1, amp = dummy1, er = dummy1
    cdef int64_t[::1] efrom = idummy, eto = idummy
    cdef double kappa = 0.0, rate = 0.0, scale = 0.0, alpha = 0.0
    cdef int family = 0

    if code == K_LINEAR:
        A11, A12, A21, A22, C1, C2, w = params
    elif code == K_MOMENTUM:
        S, z, w, kap = params
        kappa = kap[0]
    elif code == K_SGDA:
        t, B, w, kap = params
        kappa = kap[0]
    elif code == K_GTD2 or code == K_TDC:
        amp, efrom, eto, er, fp = params
        family = int(fp[0])
        rate = fp[1]
        scale = fp[2]
        alpha = fp[3]
    else:
        raise ValueError(f"unknown kernel code {code}")

    cdef Py_ssize_t ci = 0, i, j
    cdef int64_t n, xi, bad = -1, s0, s1
    cdef double lg, beta, gamma, acc, wt, dot, coef, ti
    cdef double xv, yv, e, w0, w1, p0, p1, dp0, sn, cs, delta, f
    cdef bint ok

    while ci < ncp and cps[ci] == 0:
        for i in range(d1):
            xs[ci, i] = x[i]
        for i in range(d2):
            ys[ci, i] = y[i]
        ci += 1

    with nogil:
        for n in range(n_steps):
            xi = sampler_next(&p.c)
            lg = log(n + 2.0)
            beta = exp(-b * lg)
            gamma = exp(-a * lg)

            if code == K_LINEAR:
                wt = w[xi]
                for i in range(d1):
                    acc = C1[xi, i]
                    for j in range(d1):
                        acc += A11[i, j] * x[j]
                    for j in range(d2):
                        acc += A12[i, j] * y[j]
                    h1[i] = wt * acc
                for i in range(d2):
                    acc = C2[xi, i]
                    for j in range(d1):
                        acc += A21[i, j] * x[j]
                    for j in range(d2):
                        acc += A22[i, j] * y[j]
                    h2[i] = wt * acc
            elif code == K_MOMENTUM:
                dot = 0.0
                for j in range(d1):
                    dot += S[xi, j] * x[j]
                coef = sigmoid(dot) - z[xi]
                wt = w[xi]
                for j in range(d1):
                    h1[j] = y[j]
                    h2[j] = -(wt * (coef * S[xi, j] + kappa * x[j]) + y[j])
            elif code == K_SGDA:
                wt = w[xi]
                ti = t[xi]
                for j in range(d1):
                    h1[j] = wt * (ti * y[j] - kappa * x[j])
                    h2[j] = wt * (-y[j] + B[xi, j] - ti * x[j])
            else:
                s0 = efrom[xi]
                s1 = eto[xi]
                xv = x[0]
                yv = y[0]
                if family == 0:
                    e = exp(rate * xv)
                    w0 = amp[s0] * (e - 1.0)
                    w1 = amp[s1] * (e - 1.0)
                    p0 = amp[s0] * rate * e
                    p1 = amp[s1] * rate * e
                    dp0 = amp[s0] * rate * rate * e
                else:
                    sn = sin(xv)
                    cs = cos(xv)
                    w0 = scale * amp[s0] * (xv + sn)
                    w1 = scale * amp[s1] * (xv + sn)
                    p0 = scale * amp[s0] * (1.0 + cs)
                    p1 = scale * amp[s1] * (1.0 + cs)
                    dp0 = -scale * amp[s0] * sn
                delta = er[xi] + alpha * w1 - w0
                f = (delta - p0 * yv) * dp0 * yv
                if code == K_GTD2:
                    h1[0] = (p0 - alpha * p1) * p0 * yv - f
                else:
                    h1[0] = delta * p0 - f - alpha * p1 * p0 * yv
                h2[0] = delta * p0 - p0 * p0 * yv

            for i in range(d1):
                x[i] += beta * h1[i]
            for i in range(d2):
                y[i] += gamma * h2[i]
            if radius > 0.0:
                project(&x[0], d1, radius)
                project(&y[0], d2, radius)
            ok = True
            for i in range(d1):
                ok = ok and finite(x[i])
            for i in range(d2):
                ok = ok and finite(y[i])
            if not ok:
                bad = n + 1
                break
            while ci < ncp and cps[ci] == n + 1:
                for i in range(d1):
                    xs[ci, i] = x[i]
                for i in range(d2):
                    ys[ci, i] = y[i]
                ci += 1

    p.store()
    return xs_arr, ys_arr, bad
