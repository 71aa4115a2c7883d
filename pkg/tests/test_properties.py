import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_ergodic
from ttsalab.asymptotics import (
    CovBlocks,
    JacobianBlocks,
    limiting_covariances,
    loewner_leq,
    lyapunov_residual,
    lyapunov_solve,
    poisson_residual,
    poisson_solve,
    sampling_cov_closed,
    u_x,
)
from ttsalab.chains import FiniteChain, Sampler, augment_chain
from ttsalab.ttsa import StepSchedule, step_sizes

seeds = st.integers(0, 2**32 - 1)


def _psd(rng, d, rank=None):
    S = rng.standard_normal((d, rank or d))
    return S @ S.T


def _hurwitz(rng, d):
    A = rng.standard_normal((d, d))
    return A - (np.linalg.eigvals(A).real.max() + 0.1 + rng.random()) * np.eye(d)


@given(seeds, st.integers(2, 20))
def test_poisson_residual(seed, m):
    rng = np.random.default_rng(seed)
    ch = FiniteChain(random_ergodic(m, rng))
    h = rng.standard_normal((m, 2)) * 10 ** rng.uniform(-2, 2)
    assert poisson_residual(ch, h, poisson_solve(ch, h)) <= 1e-11 * (1 + np.abs(h).max())


@given(seeds, st.integers(2, 15), st.integers(1, 4))
def test_closed_cov_symmetric_psd(seed, m, k):
    rng = np.random.default_rng(seed)
    U = sampling_cov_closed(FiniteChain(random_ergodic(m, rng)), rng.standard_normal((m, k)))
    assert U.shape == (k, k)
    assert np.array_equal(U, U.T)
    assert np.linalg.eigvalsh(U).min() >= -1e-9 * (1 + np.abs(U).max())


@given(seeds, st.integers(2, 10))
def test_augmented_marginal(seed, m):
    rng = np.random.default_rng(seed)
    ch = FiniteChain(random_ergodic(m, rng))
    aug = augment_chain(ch)
    marg = np.zeros(m)
    np.add.at(marg, aug.edges[:, 0], aug.pi)
    assert np.abs(marg - ch.pi).max() < 1e-12
    assert np.abs(aug.P.sum(axis=1) - 1).max() < 1e-12


@given(seeds, st.integers(1, 8))
def test_lyapunov_identity(seed, d):
    rng = np.random.default_rng(seed)
    K, U = _hurwitz(rng, d), _psd(rng, d)
    V = lyapunov_solve(K, U)
    assert lyapunov_residual(K, V, U) <= 1e-10 * (1 + np.linalg.norm(U))
    assert np.linalg.eigvalsh(V).min() >= -1e-9 * np.abs(V).max()


@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_u_x_congruence_psd(seed, d1, d2):
    rng = np.random.default_rng(seed)
    bl = JacobianBlocks(-np.eye(d1), rng.standard_normal((d1, d2)), rng.standard_normal((d2, d1)), _hurwitz(rng, d2))
    Ux = u_x(bl, CovBlocks.from_stacked(_psd(rng, d1 + d2, rank=max(1, d1)), d1))
    assert np.linalg.eigvalsh(Ux).min() >= -1e-10 * (1 + np.abs(Ux).max())


@given(seeds, st.integers(1, 5))
def test_loewner_transitive(seed, d):
    rng = np.random.default_rng(seed)
    A = _psd(rng, d)
    B = A + _psd(rng, d, rank=1)
    C = B + _psd(rng, d, rank=2)
    assert loewner_leq(A, B) and loewner_leq(B, C) and loewner_leq(A, C)


@given(seeds, st.integers(1, 3), st.integers(1, 3), st.booleans())
def test_monotone_mapping(seed, d1, d2, unit_b):
    rng = np.random.default_rng(seed)
    Q22 = _hurwitz(rng, d2)
    Q12 = 0.3 * rng.standard_normal((d1, d2))
    Q21 = 0.3 * rng.standard_normal((d2, d1))
    Q11 = _hurwitz(rng, d1) - np.eye(d1) + Q12 @ np.linalg.solve(Q22, Q21)  # keeps K_x + I/2 Hurwitz
    bl = JacobianBlocks(Q11, Q12, Q21, Q22)
    Z = _psd(rng, d1 + d2)
    W = Z + _psd(rng, d1 + d2, rank=1)
    sch = StepSchedule(0.6, 1.0 if unit_b else 0.8)
    VxW, VyW = limiting_covariances(bl, CovBlocks.from_stacked(W, d1), sch)
    VxZ, VyZ = limiting_covariances(bl, CovBlocks.from_stacked(Z, d1), sch)
    assert loewner_leq(VxZ, VxW, 1e-9) and loewner_leq(VyZ, VyW, 1e-9)


@given(seeds, st.integers(1, 40))
def test_single_shuffle_windows(seed, N):
    s = Sampler("single-shuffle", n=N, seed=seed).stream(3 * N)
    for k in range(2 * N):
        assert np.array_equal(np.sort(s[k:k + N]), np.arange(N))


@given(seeds)
def test_seed_determinism(seed):
    mu = np.full(6, 1 / 6)
    assert np.array_equal(Sampler("iid", mu=mu, seed=seed).stream(200), Sampler("iid", mu=mu, seed=seed).stream(200))


@given(st.floats(0.501, 0.95), st.floats(0.01, 0.49), st.integers(0, 10**9))
def test_beta_below_gamma(a, gap, n):
    b = min(1.0, a + gap)
    beta, gamma = step_sizes(n, StepSchedule(a, b))
    assert 0 < beta <= gamma <= 1
