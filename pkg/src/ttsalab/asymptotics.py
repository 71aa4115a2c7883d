"""Closed-form and Monte Carlo CLT quantities of two-timescale stochastic approximation.

Everything here is a pure function of immutable inputs. Matrices are plain
``numpy`` arrays; scalar problems use 1x1 matrices throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .chains import ChainError, FiniteChain
from .rng import derive_seed

HURWITZ_MARGIN = 1e-12
KRONECKER_MAX_DIM = 40


class HurwitzError(ArithmeticError):
    """A matrix required to be Hurwitz is not."""


def _as_table(h):
    h = np.asarray(h, dtype=np.float64)
    return (h[:, None], True) if h.ndim == 1 else (h, False)


def poisson_solve(chain, h):
    """Solve ``m - P m = h - pi.h`` via the fundamental matrix ``(I - P + 1 pi^T)^-1``.

    ``h`` is ``(m,)`` or ``(m, k)``. For chains that are not irreducible (the
    non-backtracking edge chain of a cycle) the fundamental matrix is singular;
    there the minimum-norm least-squares solution is returned provided it
    satisfies the equation, which holds when ``h`` is centred on every
    recurrent class.
    """
    table, flat = _as_table(h)
    P = chain.P
    pi = chain.pi
    m = chain.n_states
    if table.shape[0] != m:
        raise ValueError(f"h has {table.shape[0]} rows, chain has {m} states")
    if not np.all(np.isfinite(table)):
        raise ValueError("h has non-finite values")
    hbar = pi @ table
    if chain.irreducible:
        Z = np.eye(m) - P + np.outer(np.ones(m), pi)
        if np.linalg.cond(Z) > 1e12:
            raise ChainError("fundamental matrix is singular; chain is not ergodic")
        sol = np.linalg.solve(Z, table)
    else:
        sol = np.linalg.lstsq(np.eye(m) - P, table - hbar, rcond=None)[0]
        resid = np.abs(sol - P @ sol - (table - hbar)).max()
        if resid > 1e-9 * (1.0 + np.abs(table).max()):
            raise ChainError("Poisson equation has no solution: chain is reducible and "
                             "h is not centred on each recurrent class")
    return sol[:, 0] if flat else sol


def poisson_residual(chain, h, m):
    table, _ = _as_table(h)
    sol, _ = _as_table(m)
    return np.abs(sol - chain.P @ sol - (table - chain.pi @ table)).max()


def sampling_cov_closed(chain, g):
    """Long-run covariance ``lim (1/s) E[D_s D_s^T]`` of partial sums of ``g - gbar``.

    Computed as ``sum_i pi_i [sum_j P_ij m_j m_j^T - (P m)_i (P m)_i^T]`` with
    ``m`` the Poisson solution for the centred function. Always returns a
    ``(k, k)`` matrix.
    """
    table, _ = _as_table(g)
    centred = table - chain.pi @ table
    m = _as_table(poisson_solve(chain, centred))[0]
    Pm = chain.P @ m
    pi = chain.pi
    U = m.T @ ((chain.P.T @ pi)[:, None] * m) - Pm.T @ (pi[:, None] * Pm)
    return 0.5 * (U + U.T)


@dataclass(frozen=True)
class McCovariance:
    U: np.ndarray
    stderr: np.ndarray
    horizon: int
    trials: int
    per_trial_trace: np.ndarray

    @property
    def trace_stderr(self):
        return float(self.per_trial_trace.std(ddof=1) / np.sqrt(self.trials))


def sampling_cov_mc(sampler_spec, g, s, trials, burn_in=0, seed=0, gbar=None, core=None):
    """Monte Carlo estimate of the sampling covariance over ``trials`` independent streams.

    ``g`` is tabulated over the sampler's reported index. ``gbar`` defaults to
    the mean under the sampler's target distribution. Trial ``k`` is seeded with
    ``derive_seed(seed, k)``; per-trial outer products are reduced in trial
    order.
    """
    table, _ = _as_table(g)
    if not np.all(np.isfinite(table)):
        raise ValueError("g has non-finite values")
    if trials < 2:
        raise ValueError("need at least two trials for standard errors")
    if s < 10 * burn_in or s < 1:
        raise ValueError("horizon must be at least 10 * burn_in")
    if gbar is None:
        gbar = sampler_spec.target() @ table
    gbar = np.asarray(gbar, dtype=np.float64).reshape(-1)
    core = core or backend.core
    k = table.shape[1]
    outer = np.empty((trials, k, k))
    for t in range(trials):
        sampler = sampler_spec.build(derive_seed(seed, t))
        if sampler.compiled:
            packed = sampler.pack()
            delta = core.accumulate_sums(packed, np.ascontiguousarray(table), gbar, int(burn_in), int(s))
        else:
            for _ in range(burn_in):
                sampler.next()
            delta = np.zeros(k)
            for _ in range(s):
                delta += table[sampler.next()] - gbar
        outer[t] = np.outer(delta, delta) / s
    U = outer.mean(axis=0)
    se = outer.std(axis=0, ddof=1) / np.sqrt(trials)
    return McCovariance(U=U, stderr=se, horizon=int(s), trials=int(trials),
                        per_trial_trace=np.trace(outer, axis1=1, axis2=2))


# ---------------------------------------------------------------------------
# Jacobian blocks


@dataclass(frozen=True)
class JacobianBlocks:
    Q11: np.ndarray
    Q12: np.ndarray
    Q21: np.ndarray
    Q22: np.ndarray

    @property
    def dims(self):
        return self.Q11.shape[0], self.Q22.shape[0]

    def full(self):
        return np.block([[self.Q11, self.Q12], [self.Q21, self.Q22]])


@dataclass(frozen=True)
class CovBlocks:
    U11: np.ndarray
    U12: np.ndarray
    U21: np.ndarray
    U22: np.ndarray

    @classmethod
    def from_stacked(cls, U, d1):
        U = np.asarray(U, dtype=np.float64)
        return cls(U[:d1, :d1], U[:d1, d1:], U[d1:, :d1], U[d1:, d1:])

    def stacked(self):
        return np.block([[self.U11, self.U12], [self.U21, self.U22]])


def _fd_jacobian(fun, point, step):
    point = np.asarray(point, dtype=np.float64)
    cols = []
    for i in range(point.size):
        e = np.zeros_like(point)
        e[i] = step
        hi = np.asarray(fun(point + e), dtype=np.float64)
        lo = np.asarray(fun(point - e), dtype=np.float64)
        if not (np.all(np.isfinite(hi)) and np.all(np.isfinite(lo))):
            raise ArithmeticError(f"non-finite drift at perturbed coordinate {i}")
        cols.append((hi - lo) / (2 * step))
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def mean_fields_from_chain(drift, chain):
    """``(hbar1, hbar2)`` as pi-weighted sums of the drift over the chain's states."""
    pi = chain.pi
    states = chain.observe
    w = drift.reweight

    def weight(k):
        return 1.0 if w is None else w[states[k]]

    def hbar1(x, y):
        return sum(pi[k] * weight(k) * np.asarray(drift.h1(x, y, states[k])) for k in range(len(pi)) if pi[k] > 0)

    def hbar2(x, y):
        return sum(pi[k] * weight(k) * np.asarray(drift.h2(x, y, states[k])) for k in range(len(pi)) if pi[k] > 0)

    return hbar1, hbar2


def jacobian_blocks(drift, x_star, y_star, chain=None, fd_step=None):
    """Jacobians of the mean fields at ``(x*, y*)``.

    Uses ``drift.jacobian`` when present, otherwise central finite differences
    of ``drift.mean_h1/mean_h2`` (or of pi-weighted drift sums over ``chain``).
    The default step is ``1e-5 * (1 + max|point|)``.
    """
    x_star = np.atleast_1d(np.asarray(x_star, dtype=np.float64))
    y_star = np.atleast_1d(np.asarray(y_star, dtype=np.float64))
    if getattr(drift, "jacobian", None) is not None:
        return drift.jacobian(x_star, y_star)
    if drift.mean_h1 is not None and drift.mean_h2 is not None:
        hb1, hb2 = drift.mean_h1, drift.mean_h2
    elif chain is not None:
        hb1, hb2 = mean_fields_from_chain(drift, chain)
    else:
        raise ValueError("need analytic mean fields or a chain to average the drift over")
    if fd_step is None:
        fd_step = 1e-5 * (1.0 + max(np.abs(x_star).max(), np.abs(y_star).max()))
    return JacobianBlocks(
        Q11=_fd_jacobian(lambda x: hb1(x, y_star), x_star, fd_step),
        Q12=_fd_jacobian(lambda y: hb1(x_star, y), y_star, fd_step),
        Q21=_fd_jacobian(lambda x: hb2(x, y_star), x_star, fd_step),
        Q22=_fd_jacobian(lambda y: hb2(x_star, y), y_star, fd_step),
    )


def _q22_inverse(blocks):
    if np.linalg.cond(blocks.Q22) > 1e12:
        raise np.linalg.LinAlgError("Q22 is numerically singular (condition number > 1e12)")
    return np.linalg.inv(blocks.Q22)


def k_x(blocks):
    """Reduced slow-timescale Jacobian ``Q11 - Q12 Q22^-1 Q21``."""
    return blocks.Q11 - blocks.Q12 @ _q22_inverse(blocks) @ blocks.Q21


def u_x(blocks, covs):
    """Slow-timescale noise covariance ``[I, -Q12 Q22^-1] U [I, -Q12 Q22^-1]^T``."""
    d1 = blocks.Q11.shape[0]
    L = np.hstack([np.eye(d1), -blocks.Q12 @ _q22_inverse(blocks)])
    U = L @ covs.stacked() @ L.T
    return 0.5 * (U + U.T)


@dataclass(frozen=True)
class HurwitzResult:
    hurwitz: bool
    max_real: float

    def __bool__(self):
        return self.hurwitz


def hurwitz_check(M, margin=HURWITZ_MARGIN):
    """Whether every eigenvalue of ``M`` has real part below ``-margin``."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if M.shape[0] != M.shape[1]:
        raise ValueError("Hurwitz check needs a square matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    eig = np.linalg.eigvals(M)
    top = float(eig.real.max())
    return HurwitzResult(hurwitz=top < -margin, max_real=top)


def lyapunov_solve(K, U):
    """Solve ``K V + V K^T + U = 0`` for Hurwitz ``K``.

    Small systems use the Kronecker form ``(I (x) K + K (x) I) vec V = -vec U``;
    beyond ``KRONECKER_MAX_DIM`` the d^2 x d^2 system gets too large and the
    Bartels-Stewart solver from scipy is used instead.
    """
    K = np.atleast_2d(np.asarray(K, dtype=np.float64))
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    check = hurwitz_check(K)
    if not check:
        raise HurwitzError(f"K is not Hurwitz (max real part {check.max_real:.3g})")
    d = K.shape[0]
    if d <= KRONECKER_MAX_DIM:
        eye = np.eye(d)
        L = np.kron(eye, K) + np.kron(K, eye)
        V = np.linalg.solve(L, -U.reshape(-1, order="F")).reshape(d, d, order="F")
    else:
        from scipy.linalg import solve_continuous_lyapunov

        V = solve_continuous_lyapunov(K, -U)
    return 0.5 * (V + V.T)


def lyapunov_residual(K, V, U):
    return float(np.linalg.norm(K @ V + V @ K.T + U))


def slow_shift(schedule):
    return 0.5 if schedule.b == 1 else 0.0


def limiting_covariances(blocks, covs, schedule):
    """``(V_x, V_y)``; ``V_x`` carries the ``I/2`` shift when ``b = 1``, ``V_y`` never does."""
    d1 = blocks.Q11.shape[0]
    K = k_x(blocks) + slow_shift(schedule) * np.eye(d1)
    chk = hurwitz_check(K)
    if not chk:
        raise HurwitzError(f"K_x + shift is not Hurwitz (max real part {chk.max_real:.3g})")
    chk = hurwitz_check(blocks.Q22)
    if not chk:
        raise HurwitzError(f"Q22 is not Hurwitz (max real part {chk.max_real:.3g})")
    return lyapunov_solve(K, u_x(blocks, covs)), lyapunov_solve(blocks.Q22, covs.U22)


@dataclass(frozen=True)
class AsymptoticModel:
    blocks: JacobianBlocks
    covs: CovBlocks
    K_x: np.ndarray
    U_x: np.ndarray
    V_x: np.ndarray
    V_y: np.ndarray
    b: float

    def to_dict(self):
        out = {name: getattr(self.blocks, name).tolist() for name in ("Q11", "Q12", "Q21", "Q22")}
        out.update({name: getattr(self.covs, name).tolist() for name in ("U11", "U12", "U21", "U22")})
        out.update(K_x=self.K_x.tolist(), U_x=self.U_x.tolist(), V_x=self.V_x.tolist(),
                   V_y=self.V_y.tolist(), b=self.b,
                   trace_V_x=float(np.trace(self.V_x)), trace_V_y=float(np.trace(self.V_y)))
        return out


def asymptotic_model(blocks, covs, schedule):
    V_x, V_y = limiting_covariances(blocks, covs, schedule)
    return AsymptoticModel(blocks=blocks, covs=covs, K_x=k_x(blocks), U_x=u_x(blocks, covs),
                           V_x=V_x, V_y=V_y, b=schedule.b)


def loewner_leq(A, B, tol=1e-10):
    """``A <=_L B`` within ``tol``: smallest eigenvalue of ``B - A`` is at least ``-tol``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    D = B - A
    return bool(np.linalg.eigvalsh(0.5 * (D + D.T)).min() >= -tol)


def save_matrix_csv(path, M):
    np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt="%.17g")


def load_matrix_csv(path):
    return np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))
