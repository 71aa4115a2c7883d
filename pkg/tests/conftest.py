import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_ergodic(m, rng, density=0.6):
    """Random transition matrix with a self-loop on state 0 and a Hamiltonian cycle, so it is ergodic."""
    P = rng.random((m, m)) * (rng.random((m, m)) < density)
    perm = rng.permutation(m)
    for k in range(m):
        P[perm[k], perm[(k + 1) % m]] += 0.1 + rng.random()
    P[0, 0] += 0.1
    return P / P.sum(axis=1, keepdims=True)


def power_iteration(P, iters=200_000, tol=1e-15):
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    lazy = 0.5 * (P + np.eye(P.shape[0]))
    for _ in range(iters):
        nxt = pi @ lazy
        if np.abs(nxt - pi).max() < tol:
            return nxt
        pi = nxt
    return pi


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
