"""Two-timescale stochastic approximation runner.

    x_{n+1} = x_n + beta_{n+1}  h1(x_n, y_n, xi_{n+1})
    y_{n+1} = y_n + gamma_{n+1} h2(x_n, y_n, xi_{n+1})

The noise index is drawn first and both updates read the pre-update pair.
Drifts that carry a ``kernel`` spec run in the compiled core; anything else
runs the generic Python loop over the drift callables.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import backend
from .rng import derive_seed


class TTSADivergence(ArithmeticError):
    """An iterate became non-finite."""

    def __init__(self, step, trial=None):
        self.step = step
        self.trial = trial
        where = f" in trial {trial}" if trial is not None else ""
        super().__init__(f"non-finite iterate at step {step}{where}; iterates are unbounded "
                         "(consider a projection radius)")


@dataclass(frozen=True)
class StepSchedule:
    """Polynomial step sizes ``beta_n = (n+1)^-b`` (slow) and ``gamma_n = (n+1)^-a`` (fast)."""

    a: float
    b: float

    def __post_init__(self):
        if not (0.5 < self.a < self.b <= 1.0):
            raise ValueError(f"step exponents must satisfy 0.5 < a < b <= 1, got a={self.a}, b={self.b}")

    def beta(self, n):
        return math.exp(-self.b * math.log(n + 1.0))

    def gamma(self, n):
        return math.exp(-self.a * math.log(n + 1.0))


def step_sizes(n, schedule):
    """``(beta_n, gamma_n)``; evaluated as ``exp(-b log(n+1))`` to match the compiled core."""
    if n < 0:
        raise ValueError("iteration index must be non-negative")
    return schedule.beta(n), schedule.gamma(n)


def geometric_checkpoints(n_steps, per_decade=20, start=1):
    """Distinct integers ``round(10^(k/per_decade))`` in ``[start, n_steps]``, always ending at ``n_steps``."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    top = math.log10(n_steps)
    ks = np.arange(0, int(math.floor(top * per_decade)) + 1)
    pts = np.unique(np.round(10.0 ** (ks / per_decade)).astype(np.int64))
    pts = pts[(pts >= start) & (pts <= n_steps)]
    if len(pts) == 0 or pts[-1] != n_steps:
        pts = np.append(pts, n_steps)
    return pts


@dataclass(frozen=True)
class KernelSpec:
    """Parameters for one of the compiled drift kernels (``backend.LINEAR`` ...)."""

    code: int
    params: tuple


@dataclass
class DriftPair:
    """Drift evaluators of a TTSA instance.

    ``h1(x, y, xi)`` and ``h2(x, y, xi)`` return arrays of length ``d1`` and
    ``d2``. ``reweight[xi]`` multiplies both drifts when set. ``jacobian(x, y)``
    returns :class:`~ttsalab.asymptotics.JacobianBlocks`.
    """

    d1: int
    d2: int
    h1: Callable
    h2: Callable
    mean_h1: Optional[Callable] = None
    mean_h2: Optional[Callable] = None
    jacobian: Optional[Callable] = None
    reweight: Optional[np.ndarray] = None
    kernel: Optional[KernelSpec] = None
    name: str = "custom"

    def noise_table(self, x, y, n_states):
        """Stacked ``[h1; h2]`` at ``(x, y)`` for every noise index, reweighting included."""
        rows = []
        for xi in range(n_states):
            v = np.concatenate([np.atleast_1d(self.h1(x, y, xi)), np.atleast_1d(self.h2(x, y, xi))])
            if self.reweight is not None:
                v = v * self.reweight[xi]
            rows.append(v)
        return np.array(rows)


@dataclass
class TrajectoryRecord:
    checkpoints: np.ndarray
    x: np.ndarray
    y: np.ndarray
    trial_seed: int
    final_n: int
    trial: int = 0

    def __post_init__(self):
        cps = np.asarray(self.checkpoints)
        if len(cps) and (np.any(np.diff(cps) <= 0) or cps[-1] > self.final_n):
            raise ValueError("checkpoints must be strictly increasing and <= final_n")

    def at(self, n):
        k = int(np.searchsorted(self.checkpoints, n))
        if k >= len(self.checkpoints) or self.checkpoints[k] != n:
            raise KeyError(f"no checkpoint at n={n}")
        return self.x[k], self.y[k]


def _project(v, radius):
    nrm = np.linalg.norm(v)
    return v * (radius / nrm) if nrm > radius else v


def _run_generic(drift, sampler, schedule, x, y, n_steps, cps, radius):
    xs = np.zeros((len(cps), drift.d1))
    ys = np.zeros((len(cps), drift.d2))
    ci = 0
    while ci < len(cps) and cps[ci] == 0:
        xs[ci], ys[ci] = x, y
        ci += 1
    w = drift.reweight
    for n in range(n_steps):
        xi = sampler.next(x, y)
        beta, gamma = step_sizes(n + 1, schedule)
        g1 = np.asarray(drift.h1(x, y, xi), dtype=np.float64)
        g2 = np.asarray(drift.h2(x, y, xi), dtype=np.float64)
        if w is not None:
            g1 = w[xi] * g1
            g2 = w[xi] * g2
        x = x + beta * g1
        y = y + gamma * g2
        if radius is not None:
            x = _project(x, radius)
            y = _project(y, radius)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise TTSADivergence(n + 1)
        while ci < len(cps) and cps[ci] == n + 1:
            xs[ci], ys[ci] = x, y
            ci += 1
    return xs, ys


def run_ttsa(drift, sampler, schedule, x0, y0, n_steps, checkpoints=None, projection=None,
             use_kernel=True, core=None, trial_seed=None):
    """Run one trajectory and record ``(x_n, y_n)`` at ``checkpoints``.

    Parameters
    ----------
    drift : DriftPair
    sampler : Sampler
        Its current state is ``xi_0``; it is advanced in place.
    projection : float, optional
        Radius of the Euclidean balls that ``x`` and ``y`` are each clipped to
        after every step.
    use_kernel : bool
        Set False to force the generic Python loop even when a compiled kernel
        exists for this drift.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    x = np.atleast_1d(np.asarray(x0, dtype=np.float64)).copy()
    y = np.atleast_1d(np.asarray(y0, dtype=np.float64)).copy()
    if x.shape != (drift.d1,) or y.shape != (drift.d2,):
        raise ValueError(f"initial point has shape {x.shape}/{y.shape}, drift expects ({drift.d1},)/({drift.d2},)")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("initial point must be finite")
    cps = geometric_checkpoints(n_steps) if checkpoints is None else np.asarray(checkpoints, dtype=np.int64)
    if len(cps) and (np.any(np.diff(cps) <= 0) or cps[0] < 0 or cps[-1] > n_steps):
        raise ValueError("checkpoints must be strictly increasing within [0, n_steps]")
    if projection is not None and projection <= 0:
        raise ValueError("projection radius must be positive")

    if use_kernel and drift.kernel is not None and sampler.compiled:
        core = core or backend.core
        packed = sampler.pack()
        xs, ys, bad = core.run_kernel(drift.kernel.code, drift.kernel.params, packed, x, y,
                                      int(n_steps), cps, schedule.a, schedule.b,
                                      float(projection) if projection is not None else 0.0)
        sampler.unpack(packed)
        if bad >= 0:
            raise TTSADivergence(int(bad))
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            xs, ys = _run_generic(drift, sampler, schedule, x, y, int(n_steps), cps, projection)
    seed = sampler.state.rng_seed if trial_seed is None else trial_seed
    return TrajectoryRecord(checkpoints=cps, x=xs, y=ys, trial_seed=int(seed), final_n=int(n_steps))


@dataclass
class TrialConfig:
    """Everything needed to reproduce a batch of independent trajectories."""

    drift: DriftPair
    sampler: object  # SamplerSpec
    schedule: StepSchedule
    x0: np.ndarray
    y0: np.ndarray
    n_steps: int
    checkpoints: Optional[np.ndarray] = None
    projection: Optional[float] = None
    master_seed: int = 0
    use_kernel: bool = True

    def trial_seed(self, k):
        return derive_seed(self.master_seed, k)


def _one_trial(config, k):
    seed = config.trial_seed(k)
    sampler = config.sampler.build(seed)
    try:
        rec = run_ttsa(config.drift, sampler, config.schedule, config.x0, config.y0, config.n_steps,
                       config.checkpoints, config.projection, use_kernel=config.use_kernel,
                       trial_seed=seed)
    except TTSADivergence as exc:
        raise TTSADivergence(exc.step, trial=k) from None
    rec.trial = k
    return rec


def run_trials(config, n_trials, workers=1):
    """Run ``n_trials`` independent trajectories; trial ``k`` uses ``derive_seed(master_seed, k)``.

    With ``workers > 1`` trials run on a thread pool (the compiled kernels drop
    the GIL); results always come back in trial order.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if workers <= 1:
        return [_one_trial(config, k) for k in range(n_trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda k: _one_trial(config, k), range(n_trials)))
