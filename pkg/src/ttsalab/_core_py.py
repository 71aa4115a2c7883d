"""Pure-Python twin of ``_core.pyx``.

Every routine here performs the same floating-point operations in the same
order as the compiled version so that both produce bitwise-identical output.
Sampler state travels as ``(kind, rng, st, indptr, indices, cdf, perm)`` where
``rng`` is a length-1 uint64 array and ``st`` holds ``[current, previous, pos]``.
"""

import math

import numpy as np

from .rng import SplitMix64, bisect_cdf, shuffle_inplace

IID, SHUFFLE, RANDOM_SHUFFLE, SRW, NBRW, CHAIN = range(6)
LINEAR, MOMENTUM, SGDA, GTD2, TDC = range(5)
EXP_FAMILY, SIN_FAMILY = 0, 1

BACKEND = "python"


class _PySampler:
    __slots__ = ("kind", "rng", "cur", "prev", "pos", "indptr", "indices", "cdf", "perm", "n_perm")

    def __init__(self, packed):
        kind, rng, st, indptr, indices, cdf, perm = packed
        self.kind = int(kind)
        self.rng = SplitMix64(int(rng[0]))
        self.cur, self.prev, self.pos = int(st[0]), int(st[1]), int(st[2])
        self.indptr = indptr.tolist()
        self.indices = indices.tolist()
        self.cdf = cdf.tolist()
        self.perm = perm.tolist()
        self.n_perm = len(self.perm)

    def store(self, packed):
        _, rng, st, _, _, _, perm = packed
        rng[0] = self.rng.state
        st[0], st[1], st[2] = self.cur, self.prev, self.pos
        if self.kind == RANDOM_SHUFFLE:
            perm[:] = self.perm

    def next(self):
        kind = self.kind
        if kind == IID:
            nxt = bisect_cdf(self.cdf, 0, len(self.cdf), self.rng.random())
        elif kind == SHUFFLE or kind == RANDOM_SHUFFLE:
            self.pos += 1
            if self.pos == self.n_perm:
                self.pos = 0
                if kind == RANDOM_SHUFFLE:
                    shuffle_inplace(self.rng, self.perm)
            nxt = self.perm[self.pos]
        elif kind == SRW:
            lo = self.indptr[self.cur]
            deg = self.indptr[self.cur + 1] - lo
            nxt = self.indices[lo + self.rng.randbelow(deg)]
        elif kind == NBRW:
            lo = self.indptr[self.cur]
            deg = self.indptr[self.cur + 1] - lo
            if self.prev < 0:
                nxt = self.indices[lo + self.rng.randbelow(deg)]
            elif deg == 1:
                nxt = self.prev
            else:
                k = self.rng.randbelow(deg - 1)
                j = lo
                # k-th neighbour after skipping the previous node
                while True:
                    if self.indices[j] != self.prev:
                        if k == 0:
                            break
                        k -= 1
                    j += 1
                nxt = self.indices[j]
        elif kind == CHAIN:
            lo = self.indptr[self.cur]
            hi = self.indptr[self.cur + 1]
            nxt = self.indices[bisect_cdf(self.cdf, lo, hi, self.rng.random())]
        else:
            raise ValueError(f"unknown sampler kind {kind}")
        self.prev = self.cur
        self.cur = nxt
        return nxt


def sample_stream(packed, n):
    s = _PySampler(packed)
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = s.next()
    s.store(packed)
    return out


def accumulate_sums(packed, g, gbar, burn_in, horizon):
    """Return sum over ``horizon`` steps of ``g[xi] - gbar`` after ``burn_in`` discarded steps."""
    s = _PySampler(packed)
    rows = g.tolist()
    centre = gbar.tolist()
    k = len(centre)
    acc = [0.0] * k
    for _ in range(burn_in):
        s.next()
    for _ in range(horizon):
        row = rows[s.next()]
        for j in range(k):
            acc[j] += row[j] - centre[j]
    s.store(packed)
    return np.array(acc, dtype=np.float64)


def _finite(v):
    return v == v and -math.inf < v < math.inf


def _project(v, radius):
    sq = 0.0
    for t in v:
        sq += t * t
    nrm = math.sqrt(sq)
    if nrm > radius:
        scale = radius / nrm
        for i in range(len(v)):
            v[i] *= scale


def _sigmoid(t):
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def run_kernel(code, params, packed, x0, y0, n_steps, checkpoints, a, b, radius):
    """Run the two-timescale recursion for one of the built-in drift kernels.

    Returns ``(xs, ys, bad_step)``; ``bad_step`` is -1 unless an iterate became
    non-finite, in which case it is the 1-based index of the offending update.
    """
    s = _PySampler(packed)
    x = [float(v) for v in x0]
    y = [float(v) for v in y0]
    d1, d2 = len(x), len(y)
    cps = [int(c) for c in checkpoints]
    xs = np.zeros((len(cps), d1))
    ys = np.zeros((len(cps), d2))
    h1 = [0.0] * d1
    h2 = [0.0] * d2
    ci = 0
    while ci < len(cps) and cps[ci] == 0:
        xs[ci], ys[ci] = x, y
        ci += 1

    if code == LINEAR:
        A11, A12, A21, A22, c1, c2, w = (p.tolist() for p in params)
    elif code == MOMENTUM:
        S, z, w, kap = (p.tolist() for p in params)
        kappa = kap[0]
    elif code == SGDA:
        t, B, w, kap = (p.tolist() for p in params)
        kappa = kap[0]
    elif code == GTD2 or code == TDC:
        amp, efrom, eto, er, fp = (p.tolist() for p in params)
        family, rate, scale, alpha = int(fp[0]), fp[1], fp[2], fp[3]
    else:
        raise ValueError(f"unknown kernel code {code}")

    bad = -1
    for n in range(n_steps):
        xi = s.next()
        lg = math.log(n + 2.0)
        beta = math.exp(-b * lg)
        gamma = math.exp(-a * lg)

        if code == LINEAR:
            wt = w[xi]
            for i in range(d1):
                acc = c1[xi][i]
                for j in range(d1):
                    acc += A11[i][j] * x[j]
                for j in range(d2):
                    acc += A12[i][j] * y[j]
                h1[i] = wt * acc
            for i in range(d2):
                acc = c2[xi][i]
                for j in range(d1):
                    acc += A21[i][j] * x[j]
                for j in range(d2):
                    acc += A22[i][j] * y[j]
                h2[i] = wt * acc
        elif code == MOMENTUM:
            row = S[xi]
            dot = 0.0
            for j in range(d1):
                dot += row[j] * x[j]
            coef = _sigmoid(dot) - z[xi]
            wt = w[xi]
            for j in range(d1):
                h1[j] = y[j]
                h2[j] = -(wt * (coef * row[j] + kappa * x[j]) + y[j])
        elif code == SGDA:
            wt = w[xi]
            ti = t[xi]
            row = B[xi]
            for j in range(d1):
                h1[j] = wt * (ti * y[j] - kappa * x[j])
                h2[j] = wt * (-y[j] + row[j] - ti * x[j])
        else:
            s0, s1 = efrom[xi], eto[xi]
            xv, yv = x[0], y[0]
            if family == EXP_FAMILY:
                e = math.exp(rate * xv)
                w0 = amp[s0] * (e - 1.0)
                w1 = amp[s1] * (e - 1.0)
                p0 = amp[s0] * rate * e
                p1 = amp[s1] * rate * e
                dp0 = amp[s0] * rate * rate * e
            else:
                sn = math.sin(xv)
                cs = math.cos(xv)
                w0 = scale * amp[s0] * (xv + sn)
                w1 = scale * amp[s1] * (xv + sn)
                p0 = scale * amp[s0] * (1.0 + cs)
                p1 = scale * amp[s1] * (1.0 + cs)
                dp0 = -scale * amp[s0] * sn
            delta = er[xi] + alpha * w1 - w0
            f = (delta - p0 * yv) * dp0 * yv
            if code == GTD2:
                h1[0] = (p0 - alpha * p1) * p0 * yv - f
            else:
                h1[0] = delta * p0 - f - alpha * p1 * p0 * yv
            h2[0] = delta * p0 - p0 * p0 * yv

        for i in range(d1):
            x[i] += beta * h1[i]
        for i in range(d2):
            y[i] += gamma * h2[i]
        if radius > 0.0:
            _project(x, radius)
            _project(y, radius)
        ok = True
        for v in x:
            ok = ok and _finite(v)
        for v in y:
            ok = ok and _finite(v)
        if not ok:
            bad = n + 1
            break
        while ci < len(cps) and cps[ci] == n + 1:
            xs[ci], ys[ci] = x, y
            ci += 1

    s.store(packed)
    return xs, ys, bad
