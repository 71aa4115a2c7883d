"""Problem instances and their drift pairs: momentum SGD, SGDA, and nonlinear GTD2/TDC."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import backend
from .asymptotics import (
    CovBlocks,
    HurwitzError,
    JacobianBlocks,
    asymptotic_model,
    hurwitz_check,
    lyapunov_solve,
    sampling_cov_closed,
    slow_shift,
)
from .chains import FiniteChain, augment_chain, read_edge_list
from .ttsa import DriftPair, KernelSpec


def importance_weights(graph):
    """Per-node weights ``avg_degree / d_i``.

    Under the degree-proportional occupancy of SRW/NBRW these make the
    weighted mean of any per-node quantity equal its uniform average.
    """
    return (graph.degrees.mean() / graph.degrees).astype(np.float64)


# ---------------------------------------------------------------------------
# logistic regression / momentum SGD


@dataclass(frozen=True)
class LogisticProblem:
    features: np.ndarray
    labels: np.ndarray
    kappa: float = 1.0

    def __post_init__(self):
        S = np.asarray(self.features, dtype=np.float64)
        z = np.asarray(self.labels, dtype=np.float64)
        if S.ndim != 2 or S.shape[0] < 1 or z.shape != (S.shape[0],):
            raise ValueError("features must be (N, d) with N >= 1 and one label per row")
        if not (np.all(np.isfinite(S)) and np.all(np.isfinite(z))) or self.kappa < 0:
            raise ValueError("non-finite data or negative penalty")
        if not np.all((z == 0) | (z == 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "features", S)
        object.__setattr__(self, "labels", z)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def grad_sample(self, x, i):
        s = self.features[i]
        return (expit(s @ x) - self.labels[i]) * s + self.kappa * x

    def grad(self, x):
        S = self.features
        return S.T @ (expit(S @ x) - self.labels) / self.n + self.kappa * x

    def hessian(self, x):
        S = self.features
        p = expit(S @ x)
        return (S.T * (p * (1 - p))) @ S / self.n + self.kappa * np.eye(self.dim)

    def solve(self, tol=1e-13, max_iter=100):
        """Minimiser of the regularised objective by Newton's method."""
        x = np.zeros(self.dim)
        for _ in range(max_iter):
            g = self.grad(x)
            if np.abs(g).max() < tol:
                break
            x = x - np.linalg.solve(self.hessian(x), g)
        return x

    def to_json(self):
        return {"type": "logistic", "kappa": self.kappa, "features": self.features.tolist(),
                "labels": self.labels.tolist()}


def synthetic_logistic(n=200, dim=20, seed=0, kappa=1.0):
    """Linearly separable labels from a random hyperplane; features scaled to unit-ish norm."""
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((n, dim)) / np.sqrt(dim)
    w = rng.standard_normal(dim)
    z = (S @ w > 0).astype(np.float64)
    return LogisticProblem(S, z, kappa)


def momentum_sgd_drift(problem, weights=None):
    """Momentum SGD as TTSA: ``h1 = y``, ``h2 = -(w_xi grad F(x, xi) + y)``.

    ``weights`` (per sample, e.g. :func:`importance_weights`) rescales only the
    gradient, as in the reweighted momentum update.
    """
    w = np.ones(problem.n) if weights is None else np.asarray(weights, dtype=np.float64)
    d = problem.dim

    def h1(x, y, xi):
        return np.array(y, dtype=np.float64)

    def h2(x, y, xi):
        return -(w[xi] * problem.grad_sample(x, xi) + y)

    def mean_h1(x, y):
        return np.array(y, dtype=np.float64)

    def mean_h2(x, y):
        return -(problem.grad(x) + y)

    def jacobian(x, y):
        eye = np.eye(d)
        return JacobianBlocks(np.zeros((d, d)), eye, -problem.hessian(x), -eye)

    kernel = KernelSpec(backend.MOMENTUM, (np.ascontiguousarray(problem.features), problem.labels.copy(),
                                           w.copy(), np.array([problem.kappa])))
    return DriftPair(d, d, h1, h2, mean_h1, mean_h2, jacobian, None, kernel, "momentum-sgd")


# ---------------------------------------------------------------------------
# minimax / SGDA


@dataclass(frozen=True)
class MinimaxProblem:
    """``F(x, y, i) = -[|y|^2/2 - b_i^T y + t_i y^T x] + kappa |x|^2 / 2``."""

    t: np.ndarray
    b: np.ndarray
    kappa: float = 10.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if b.ndim != 2 or t.shape != (b.shape[0],):
            raise ValueError("b must be (N, d) and t must have N entries")
        if np.abs(b.mean(axis=0)).max() > 1e-12:
            raise ValueError("rows of b must average to zero")
        if not np.all((t > 0) & (t < 0.1)):
            raise ValueError("t_i must lie in (0, 0.1)")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return self.b.shape[0]

    @property
    def dim(self):
        return self.b.shape[1]

    def to_json(self):
        return {"type": "minimax", "kappa": self.kappa, "t": self.t.tolist(), "b": self.b.tolist()}


def minimax_datagen(seed=0, n=100, dim=10, kappa=10.0):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n, dim))
    b = raw - raw.mean(axis=0)
    t = rng.uniform(0.0, 0.1, size=n)
    t[t == 0.0] = 0.05  # open interval
    return MinimaxProblem(t, b, kappa)


def sgda_drift(problem, weights=None):
    """Descent in ``x``, ascent in ``y``, with signs folded in for the ``+`` update.

    ``h1 = -grad_x F = t_i y - kappa x`` and ``h2 = grad_y F = -y + b_i - t_i x``;
    ``weights`` multiplies both.
    """
    t, B, kappa, d = problem.t, problem.b, problem.kappa, problem.dim
    w = None if weights is None else np.asarray(weights, dtype=np.float64)
    tbar = t.mean()
    bbar = B.mean(axis=0)

    def h1(x, y, xi):
        return t[xi] * y - kappa * x

    def h2(x, y, xi):
        return -y + B[xi] - t[xi] * x

    def mean_h1(x, y):
        return tbar * y - kappa * x

    def mean_h2(x, y):
        return -y + bbar - tbar * x

    def jacobian(x, y):
        eye = np.eye(d)
        return JacobianBlocks(-kappa * eye, tbar * eye, -tbar * eye, -eye)

    kw = np.ones(problem.n) if w is None else w
    kernel = KernelSpec(backend.SGDA, (t.copy(), np.ascontiguousarray(B), kw.copy(), np.array([kappa])))
    return DriftPair(d, d, h1, h2, mean_h1, mean_h2, jacobian, w, kernel, "sgda")


def linear_drift(A11, A12, A21, A22, c1, c2, weights=None):
    """``h1 = A11 x + A12 y + c1[xi]``, ``h2 = A21 x + A22 y + c2[xi]``; mean fields use no weighting."""
    A11, A12, A21, A22 = (np.atleast_2d(np.asarray(M, dtype=np.float64)) for M in (A11, A12, A21, A22))
    c1 = np.atleast_2d(np.asarray(c1, dtype=np.float64))
    c2 = np.atleast_2d(np.asarray(c2, dtype=np.float64))
    d1, d2 = A11.shape[0], A22.shape[0]
    if c1.shape[1] != d1:
        c1 = c1.T
    if c2.shape[1] != d2:
        c2 = c2.T
    m = c1.shape[0]
    w = None if weights is None else np.asarray(weights, dtype=np.float64)

    def h1(x, y, xi):
        return A11 @ x + A12 @ y + c1[xi]

    def h2(x, y, xi):
        return A21 @ x + A22 @ y + c2[xi]

    kw = np.ones(m) if w is None else w
    kernel = KernelSpec(backend.LINEAR, (A11.copy(), A12.copy(), A21.copy(), A22.copy(),
                                         np.ascontiguousarray(c1), np.ascontiguousarray(c2), kw.copy()))
    jac = JacobianBlocks(A11, A12, A21, A22)
    return DriftPair(d1, d2, h1, h2, None, None, lambda x, y: jac, w, kernel, "custom-linear")


# ---------------------------------------------------------------------------
# five-state random walk and nonlinear GTD


AMPLITUDES = (-2.0, -6.0, -3.0, -4.0, -5.0)


def ring_chain(n=5):
    P = np.zeros((n, n))
    for s in range(n):
        P[s, (s + 1) % n] += 0.5
        P[s, (s - 1) % n] += 0.5
    return FiniteChain(P)


@dataclass(frozen=True)
class FiveStateTask:
    """Ring random walk; reward +0.5 for a step right, -0.5 for a step left.

    Value families (scalar parameter ``x``):

    * ``exp``: ``W_x(s) = a(s) (exp(rate x) - 1)``
    * ``sin``: ``W_x(s) = scale a(s) (x + sin x)``

    Both are zero at ``x = 0``, the true value function of this task.
    """

    family: str = "exp"
    amplitudes: tuple = AMPLITUDES
    alpha: float = 0.9
    rate: float = 0.1
    scale: float = 0.1
    chain: FiniteChain = field(default_factory=ring_chain, compare=False)

    def __post_init__(self):
        if self.family not in ("exp", "sin"):
            raise ValueError("family must be 'exp' or 'sin'")

    @property
    def n_states(self):
        return self.chain.n_states

    def reward(self, s, s_next):
        return 0.5 if (s_next - s) % self.n_states == 1 else -0.5

    def features(self, x):
        """``(W, phi, dphi, d2phi)`` over states at scalar ``x``."""
        a = np.asarray(self.amplitudes, dtype=np.float64)
        x = float(np.asarray(x).reshape(-1)[0])
        if self.family == "exp":
            e = np.exp(self.rate * x)
            k = self.rate
            return a * (e - 1.0), a * k * e, a * k * k * e, a * k ** 3 * e
        c = self.scale
        return c * a * (x + np.sin(x)), c * a * (1 + np.cos(x)), -c * a * np.sin(x), -c * a * np.cos(x)

    @property
    def augmented(self):
        return _augmented(self)

    def edge_arrays(self):
        aug = self.augmented
        e = aug.edges
        r = np.array([self.reward(int(i), int(j)) for i, j in e])
        return e[:, 0].astype(np.int64), e[:, 1].astype(np.int64), r

    def to_json(self):
        return {"type": "five-state", "family": self.family, "amplitudes": list(self.amplitudes),
                "alpha": self.alpha, "rate": self.rate, "scale": self.scale}


_AUG_CACHE = {}


def _augmented(task):
    key = id(task.chain)
    if key not in _AUG_CACHE:
        _AUG_CACHE[key] = (task.chain, augment_chain(task.chain))
    return _AUG_CACHE[key][1]


def _gtd_terms(task, x, y, algorithm):
    """Per-edge drifts and their partial derivatives at scalar ``(x, y)``."""
    s0, s1, r = task.edge_arrays()
    W, phi, dphi, ddphi = task.features(x)
    al = task.alpha
    y = float(np.asarray(y).reshape(-1)[0])
    W0, W1, p0, p1, dp0, dp1, ddp0 = W[s0], W[s1], phi[s0], phi[s1], dphi[s0], dphi[s1], ddphi[s0]
    delta = r + al * W1 - W0
    delta_x = al * p1 - p0
    f = (delta - p0 * y) * dp0 * y
    f_x = (delta_x - dp0 * y) * dp0 * y + (delta - p0 * y) * ddp0 * y
    f_y = -p0 * dp0 * y + (delta - p0 * y) * dp0
    h2 = delta * p0 - p0 * p0 * y
    h2_x = delta_x * p0 + delta * dp0 - 2 * p0 * dp0 * y
    h2_y = -p0 * p0
    if algorithm == "gtd2":
        h1 = (p0 - al * p1) * p0 * y - f
        h1_x = ((dp0 - al * dp1) * p0 + (p0 - al * p1) * dp0) * y - f_x
        h1_y = (p0 - al * p1) * p0 - f_y
    else:
        h1 = delta * p0 - f - al * p1 * p0 * y
        h1_x = delta_x * p0 + delta * dp0 - f_x - al * (dp1 * p0 + p1 * dp0) * y
        h1_y = -f_y - al * p1 * p0
    return h1, h2, h1_x, h1_y, h2_x, h2_y


def _gtd_drift(task, algorithm):
    pi_e = task.augmented.pi
    s0, s1, r = task.edge_arrays()

    def h1(x, y, xi):
        return np.array([_gtd_terms(task, x, y, algorithm)[0][xi]])

    def h2(x, y, xi):
        return np.array([_gtd_terms(task, x, y, algorithm)[1][xi]])

    def mean_h1(x, y):
        return np.array([pi_e @ _gtd_terms(task, x, y, algorithm)[0]])

    def mean_h2(x, y):
        return np.array([pi_e @ _gtd_terms(task, x, y, algorithm)[1]])

    def jacobian(x, y):
        _, _, h1x, h1y, h2x, h2y = _gtd_terms(task, x, y, algorithm)
        return JacobianBlocks(*(np.array([[pi_e @ v]]) for v in (h1x, h1y, h2x, h2y)))

    fam = 0.0 if task.family == "exp" else 1.0
    params = (np.asarray(task.amplitudes, dtype=np.float64), s0, s1, r,
              np.array([fam, task.rate, task.scale, task.alpha]))
    code = backend.GTD2 if algorithm == "gtd2" else backend.TDC
    return DriftPair(1, 1, h1, h2, mean_h1, mean_h2, jacobian, None, KernelSpec(code, params), algorithm)


def gtd2_drift(task):
    """Nonlinear GTD2; noise index is an edge of the augmented (s_n, s_{n+1}) chain."""
    return _gtd_drift(task, "gtd2")


def tdc_drift(task):
    """Nonlinear TDC; shares ``h2`` with GTD2."""
    return _gtd_drift(task, "tdc")


@dataclass(frozen=True)
class GtdTheory:
    C: float
    A: float
    U_y: float
    U_x: float
    K_x: float
    V_x: float
    V_y: float
    model: object  # AsymptoticModel from the generic Jacobian/Poisson route

    def to_dict(self):
        out = {k: getattr(self, k) for k in ("C", "A", "U_y", "U_x", "K_x", "V_x", "V_y")}
        out["model"] = self.model.to_dict()
        return out


def gtd_theory(task, schedule, algorithm="gtd2", x_star=0.0):
    """Closed-form CLT quantities of nonlinear GTD2/TDC on ``task``.

    The scalar fields follow ``C = E[phi^2]``, ``A = E[phi (phi - alpha phi') + delta dphi]``,
    ``K_x = -A^2 / C``, ``U_x = A^2 U_y / C^2``; ``U_y`` is the sampling
    covariance of ``delta(x*) phi(s_n)`` on the augmented chain. ``model``
    recomputes everything through the generic Jacobian and stacked-covariance
    path for ``algorithm``.
    """
    aug = task.augmented
    pi_e = aug.pi
    s0, s1, r = task.edge_arrays()
    W, phi, dphi, _ = task.features(x_star)
    delta = r + task.alpha * W[s1] - W[s0]
    C = float(task.chain.pi @ phi ** 2)
    A = float(pi_e @ (phi[s0] * (phi[s0] - task.alpha * phi[s1]) + delta * dphi[s0]))
    U_y = float(sampling_cov_closed(aug.chain, delta * phi[s0])[0, 0])
    K = -A * A / C
    U_x = A * A * U_y / (C * C)
    shift = slow_shift(schedule)
    chk = hurwitz_check([[K + shift]])
    if not chk:
        raise HurwitzError(f"-A^T C^-1 A + shift is not Hurwitz (max real part {chk.max_real:.3g})")
    V_x = float(lyapunov_solve([[K + shift]], [[U_x]])[0, 0])
    V_y = float(lyapunov_solve([[-C]], [[U_y]])[0, 0])

    drift = gtd2_drift(task) if algorithm == "gtd2" else tdc_drift(task)
    x = np.array([x_star])
    y = np.zeros(1)
    blocks = drift.jacobian(x, y)
    g = drift.noise_table(x, y, len(pi_e))
    covs = CovBlocks.from_stacked(sampling_cov_closed(aug.chain, g), 1)
    model = asymptotic_model(blocks, covs, schedule)
    return GtdTheory(C=C, A=A, U_y=U_y, U_x=U_x, K_x=K, V_x=V_x, V_y=V_y, model=model)


# ---------------------------------------------------------------------------
# data ingestion


class FormatError(ValueError):
    pass


def load_libsvm(path, n_features=None, kappa=1.0):
    """Read ``label idx:val ...`` lines into a dense :class:`LogisticProblem`.

    Feature indices are 1-based; labels ``-1/+1`` (or ``0/1``) map to ``0/1``.
    ``n_features`` pads the dimension beyond the largest index seen.
    """
    labels, rows = [], []
    width = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                lab = float(parts[0])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad label {parts[0]!r}") from None
            if lab not in (-1.0, 0.0, 1.0):
                raise FormatError(f"{path}:{lineno}: label must be -1, 0 or +1")
            row = {}
            for tok in parts[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    k, v = int(idx), float(val)
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: bad feature token {tok!r}") from None
                if not sep or k < 1:
                    raise FormatError(f"{path}:{lineno}: bad feature token {tok!r}")
                if k in row:
                    raise FormatError(f"{path}:{lineno}: duplicate feature index {k}")
                row[k] = v
                width = max(width, k)
            labels.append(1.0 if lab > 0 else 0.0)
            rows.append(row)
    if not rows:
        raise FormatError(f"{path}: empty file")
    if n_features is not None:
        if n_features < width:
            raise FormatError(f"{path}: feature index {width} exceeds declared dimension {n_features}")
        width = n_features
    S = np.zeros((len(rows), width))
    for i, row in enumerate(rows):
        for k, v in row.items():
            S[i, k - 1] = v
    return LogisticProblem(S, np.array(labels), kappa)


def load_edge_list(path):
    return read_edge_list(path)


def problem_from_json(data):
    kind = data["type"]
    if kind == "logistic":
        return LogisticProblem(np.array(data["features"]), np.array(data["labels"]), data["kappa"])
    if kind == "minimax":
        return MinimaxProblem(np.array(data["t"]), np.array(data["b"]), data["kappa"])
    if kind == "five-state":
        return FiveStateTask(data["family"], tuple(data["amplitudes"]), data["alpha"], data["rate"], data["scale"])
    raise ValueError(f"unknown problem type {kind!r}")


def dump_problem(problem, path):
    with open(path, "w") as fh:
        json.dump(problem.to_json(), fh)
