"""Compiled core and pure-Python fallback must agree bit for bit."""

import subprocess
import sys

import numpy as np
import pytest

from ttsalab import backend
from ttsalab.applications import (
    FiveStateTask,
    gtd2_drift,
    importance_weights,
    linear_drift,
    minimax_datagen,
    momentum_sgd_drift,
    sgda_drift,
    synthetic_logistic,
    tdc_drift,
)
from ttsalab.chains import FiniteChain, SamplerSpec, random_connected_graph, star_graph
from ttsalab.rng import SplitMix64, bisect_cdf, derive_seed, mix64, shuffle_inplace
from ttsalab.ttsa import StepSchedule, run_ttsa

compiled = pytest.mark.skipif(backend.compiled_core is None, reason="extension not built")
PY = backend.python_core

GRAPH = random_connected_graph(30, 3.0, seed=11)
SPECS = {
    "iid": SamplerSpec("iid", mu=np.arange(1, 8) / 28.0),
    "single-shuffle": SamplerSpec("single-shuffle", n=13),
    "random-shuffle": SamplerSpec("random-shuffle", n=13),
    "srw": SamplerSpec("srw", graph=GRAPH),
    "nbrw": SamplerSpec("nbrw", graph=GRAPH),
    "nbrw-star": SamplerSpec("nbrw", graph=star_graph(5)),
    "finite-chain": SamplerSpec("finite-chain", chain=FiniteChain([[0.1, 0.9, 0.0], [0.0, 0.5, 0.5], [0.7, 0.0, 0.3]])),
}


# --- rng ---------------------------------------------------------------------

def test_splitmix_reference_values():
    # SplitMix64 with seed 0: first outputs of the reference generator
    r = SplitMix64(0)
    assert [r.next_u64() for _ in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_rng_helpers():
    r = SplitMix64(5)
    u = [r.random() for _ in range(10_000)]
    assert 0 <= min(u) and max(u) < 1 and abs(np.mean(u) - 0.5) < 0.01
    assert sorted(SplitMix64(3).permutation(20)) == list(range(20))
    seq = list(range(10))
    shuffle_inplace(SplitMix64(1), seq)
    assert sorted(seq) == list(range(10)) and seq != list(range(10))
    cdf = np.array([0.2, 0.5, 1.0])
    assert [bisect_cdf(cdf, 0, 3, u) for u in (0.0, 0.2, 0.49, 0.5, 0.99)] == [0, 1, 1, 2, 2]
    assert derive_seed(1, 0) != derive_seed(1, 1) != derive_seed(2, 0)
    assert mix64(0) == 0


# --- streams and sums ----------------------------------------------------------

@compiled
@pytest.mark.parametrize("name", sorted(SPECS))
def test_stream_parity(name):
    spec = SPECS[name]
    a = spec.build(21).stream(5000, backend.compiled_core)
    b = spec.build(21).stream(5000, PY)
    np.testing.assert_array_equal(a, b)


@compiled
@pytest.mark.parametrize("name", ["iid", "srw", "nbrw", "single-shuffle", "finite-chain"])
def test_accumulate_parity(name):
    spec = SPECS[name]
    n = len(spec.target())
    g = np.random.default_rng(1).standard_normal((n, 2))
    gbar = spec.target() @ g
    out = []
    for core in (backend.compiled_core, PY):
        out.append(core.accumulate_sums(spec.build(4).pack(), g, gbar, 10, 3000))
    assert out[0].tobytes() == out[1].tobytes()


@compiled
def test_stream_state_carries_over():
    spec = SPECS["nbrw"]
    s = spec.build(2)
    whole = spec.build(2).stream(2000)
    np.testing.assert_array_equal(np.concatenate([s.stream(700), s.stream(1300, PY)]), whole)


# --- drift kernels --------------------------------------------------------------

def _kernel_cases():
    g = random_connected_graph(40, 3.0, seed=2)
    w = importance_weights(g)
    task = FiveStateTask("exp")
    aug = SamplerSpec("finite-chain", chain=task.augmented.chain)
    lin_P = FiniteChain([[0.3, 0.7], [0.6, 0.4]])
    yield "linear", linear_drift([[-1.0, 0.2], [0.0, -0.5]], [[0.1], [0.3]], [[0.2, -0.1]], [[-1.0]],
                                 [[1.0, 0.0], [-1.0, 2.0]], [[0.5], [-0.5]], [1.2, 0.8]), \
        SamplerSpec("finite-chain", chain=lin_P), 2, 1
    yield "momentum", momentum_sgd_drift(synthetic_logistic(40, 4, seed=1), w), SamplerSpec("nbrw", graph=g), 4, 4
    yield "sgda", sgda_drift(minimax_datagen(1, 40, 3), w), SamplerSpec("srw", graph=g), 3, 3
    yield "gtd2", gtd2_drift(task), aug, 1, 1
    yield "tdc", tdc_drift(task), aug, 1, 1
    yield "gtd2-sin", gtd2_drift(FiveStateTask("sin")), aug, 1, 1


CASES = {c[0]: c[1:] for c in _kernel_cases()}


@compiled
@pytest.mark.parametrize("name", sorted(CASES))
def test_kernel_parity(name):
    drift, spec, d1, d2 = CASES[name]
    sch = StepSchedule(0.6, 0.9)
    x0, y0 = np.full(d1, 0.3), np.full(d2, -0.2)
    cps = [1, 10, 100, 3000]
    a = run_ttsa(drift, spec.build(6), sch, x0, y0, 3000, cps, core=backend.compiled_core)
    b = run_ttsa(drift, spec.build(6), sch, x0, y0, 3000, cps, core=PY)
    assert a.x.tobytes() == b.x.tobytes() and a.y.tobytes() == b.y.tobytes()


@pytest.mark.parametrize("name", sorted(CASES))
def test_kernel_matches_generic_loop(name):
    drift, spec, d1, d2 = CASES[name]
    sch = StepSchedule(0.6, 0.9)
    x0, y0 = np.full(d1, 0.3), np.full(d2, -0.2)
    a = run_ttsa(drift, spec.build(6), sch, x0, y0, 1500, [10, 1500])
    b = run_ttsa(drift, spec.build(6), sch, x0, y0, 1500, [10, 1500], use_kernel=False)
    np.testing.assert_allclose(a.x, b.x, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(a.y, b.y, rtol=1e-10, atol=1e-12)


@compiled
def test_projection_parity():
    drift, spec, d1, d2 = CASES["sgda"]
    sch = StepSchedule(0.6, 0.9)
    a = run_ttsa(drift, spec.build(1), sch, np.full(3, 5.0), np.full(3, 5.0), 500, [500], projection=1.0,
                 core=backend.compiled_core)
    b = run_ttsa(drift, spec.build(1), sch, np.full(3, 5.0), np.full(3, 5.0), 500, [500], projection=1.0, core=PY)
    assert a.x.tobytes() == b.x.tobytes()


def test_pure_env_selects_fallback():
    out = subprocess.run([sys.executable, "-c", "from ttsalab import backend; print(backend.NAME)"],
                         env={"TTSALAB_PURE": "1", "PATH": ""}, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
