"""Compiled core vs pure-Python fallback on the hot loops.

    python3 benchmarks/bench_core.py [--steps N]
"""

import argparse
import time

import numpy as np

from ttsalab import backend
from ttsalab.applications import FiveStateTask, gtd2_drift, importance_weights, momentum_sgd_drift, synthetic_logistic
from ttsalab.chains import SamplerSpec, random_connected_graph
from ttsalab.ttsa import StepSchedule, run_ttsa


def _time(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(steps):
    g = random_connected_graph(100, 4.0, seed=1)
    srw = SamplerSpec("srw", graph=g)
    yield "srw stream", steps, lambda core: srw.build(5).stream(steps, core)

    task = FiveStateTask("exp")
    spec = SamplerSpec("finite-chain", chain=task.augmented.chain)
    drift = gtd2_drift(task)
    sch = StepSchedule(0.501, 0.6)
    yield "gtd2 kernel", steps, lambda core: run_ttsa(drift, spec.build(5), sch, [0.0], [0.0], steps,
                                                     [steps], core=core).x
    n = steps // 10
    prob = synthetic_logistic(100, 20, seed=0)
    mom = momentum_sgd_drift(prob, importance_weights(g))
    nb = SamplerSpec("nbrw", graph=g)
    sch1 = StepSchedule(0.501, 1.0)
    yield "momentum kernel d=20", n, lambda core: run_ttsa(mom, nb.build(5), sch1, np.zeros(20), np.zeros(20), n,
                                                           [n], core=core).x


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=200_000)
    args = ap.parse_args(argv)
    if backend.compiled_core is None:
        raise SystemExit("compiled core not built; run `pip install --no-build-isolation -e .` first")
    print(f"{'case':<22}{'steps':>9}{'compiled ns/step':>18}{'python ns/step':>16}{'speedup':>9}  same")
    for name, n, fn in cases(args.steps):
        tc, oc = _time(lambda: fn(backend.compiled_core))
        tp, op = _time(lambda: fn(backend.python_core), repeat=1)
        same = np.array_equal(np.asarray(oc), np.asarray(op))
        print(f"{name:<22}{n:>9}{1e9 * tc / n:>18.1f}{1e9 * tp / n:>16.1f}{tp / tc:>9.0f}  {same}")


if __name__ == "__main__":
    main()
