"""Experiment statistics (MSE curves, CLT checks, efficiency ordering) and the config-driven runner."""

from __future__ import annotations

import csv
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from . import __version__, backend
from .applications import (
    FiveStateTask,
    gtd2_drift,
    tdc_drift,
    gtd_theory,
    importance_weights,
    linear_drift,
    load_libsvm,
    minimax_datagen,
    momentum_sgd_drift,
    sgda_drift,
    synthetic_logistic,
)
from .asymptotics import (
    CovBlocks,
    asymptotic_model,
    jacobian_blocks,
    limiting_covariances,
    loewner_leq,
    sampling_cov_closed,
    sampling_cov_mc,
)
from .chains import FiniteChain, SamplerSpec, chain_of_sampler, random_connected_graph, read_edge_list
from .ttsa import StepSchedule, TrialConfig, geometric_checkpoints, run_trials

logger = logging.getLogger(__name__)

APPLICATIONS = ("momentum-sgd", "sgda", "gtd2", "tdc", "custom-linear")
CLOSED_FORM_KINDS = ("iid", "srw", "nbrw", "finite-chain")
OUTPUT_ROOT_ENV = "TTSALAB_OUTPUT_ROOT"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# MSE curves


@dataclass
class MseReport:
    n: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    mse_x: np.ndarray
    mse_y: np.ndarray
    se_x: np.ndarray
    se_y: np.ndarray
    trace_V_x: Optional[float] = None
    trace_V_y: Optional[float] = None

    @property
    def rescaled_x(self):
        return self.mse_x / self.beta

    @property
    def rescaled_y(self):
        return self.mse_y / self.gamma

    COLUMNS = ("n", "beta", "gamma", "mse_x", "mse_y", "se_x", "se_y", "rescaled_x", "rescaled_y",
               "rescaled_se_x", "rescaled_se_y", "trace_V_x", "trace_V_y")

    def rows(self):
        tvx = "" if self.trace_V_x is None else repr(float(self.trace_V_x))
        tvy = "" if self.trace_V_y is None else repr(float(self.trace_V_y))
        for k in range(len(self.n)):
            yield [int(self.n[k])] + [repr(float(v)) for v in (
                self.beta[k], self.gamma[k], self.mse_x[k], self.mse_y[k], self.se_x[k], self.se_y[k],
                self.rescaled_x[k], self.rescaled_y[k], self.se_x[k] / self.beta[k],
                self.se_y[k] / self.gamma[k])] + [tvx, tvy]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            w.writerows(self.rows())

    def slope(self, which="x", decades=1.0):
        """Least-squares slope of log(rescaled MSE) against log(n) over the last ``decades``."""
        vals = self.rescaled_x if which == "x" else self.rescaled_y
        keep = self.n >= self.n[-1] / 10 ** decades
        return float(np.polyfit(np.log(self.n[keep]), np.log(vals[keep]), 1)[0])


def _stack(records, attr):
    grids = [tuple(r.checkpoints) for r in records]
    if any(g != grids[0] for g in grids):
        raise ValueError("records have mismatched checkpoint grids")
    return np.stack([getattr(r, attr) for r in records])


def mse_curve(records, x_star, y_star, schedule, model=None):
    """Per-checkpoint mean squared error across trials, with across-trial standard errors."""
    if len(records) < 2:
        raise ValueError("need at least two trials")
    X = _stack(records, "x")
    Y = _stack(records, "y")
    n = np.asarray(records[0].checkpoints)
    ex = ((X - np.asarray(x_star)) ** 2).sum(axis=2)
    ey = ((Y - np.asarray(y_star)) ** 2).sum(axis=2)
    root = np.sqrt(len(records))
    return MseReport(
        n=n,
        beta=np.array([schedule.beta(int(k)) for k in n]),
        gamma=np.array([schedule.gamma(int(k)) for k in n]),
        mse_x=ex.mean(axis=0), mse_y=ey.mean(axis=0),
        se_x=ex.std(axis=0, ddof=1) / root, se_y=ey.std(axis=0, ddof=1) / root,
        trace_V_x=None if model is None else float(np.trace(model.V_x)),
        trace_V_y=None if model is None else float(np.trace(model.V_y)),
    )


# ---------------------------------------------------------------------------
# CLT


@dataclass
class CltReport:
    n: int
    samples: np.ndarray
    empirical_cov: np.ndarray
    V_x: np.ndarray
    ks_stat: np.ndarray
    ks_pvalue: np.ndarray
    hist_counts: list
    hist_edges: list
    alpha: float = 0.01

    @property
    def passed(self):
        return bool(np.all(self.ks_pvalue >= self.alpha))

    def to_dict(self):
        return {
            "n": int(self.n),
            "n_trials": int(self.samples.shape[0]),
            "samples": self.samples.tolist(),
            "empirical_cov": self.empirical_cov.tolist(),
            "V_x": self.V_x.tolist(),
            "ks_stat": self.ks_stat.tolist(),
            "ks_pvalue": self.ks_pvalue.tolist(),
            "hist_counts": self.hist_counts,
            "hist_edges": self.hist_edges,
            "alpha": self.alpha,
            "passed": self.passed,
        }


def clt_check(records, x_star, schedule, V_x, bins=20, alpha=0.01):
    """KS test of ``beta_n^{-1/2} (x_n - x*)`` at the last checkpoint against ``N(0, diag V_x)``."""
    V_x = np.atleast_2d(np.asarray(V_x, dtype=np.float64))
    var = np.diag(V_x)
    if np.any(var <= 0):
        raise ValueError("theoretical variance is zero on some coordinate")
    X = _stack(records, "x")[:, -1, :]
    n = int(records[0].checkpoints[-1])
    if len(records) < 50:
        logger.warning("CLT check with %d trials has little power", len(records))
    z = (X - np.asarray(x_star)) / np.sqrt(schedule.beta(n))
    cov = np.atleast_2d(np.cov(z, rowvar=False)) if len(records) > 1 else np.zeros_like(V_x)
    ks, pv, counts, edges = [], [], [], []
    for j in range(z.shape[1]):
        res = stats.kstest(z[:, j], stats.norm(0.0, np.sqrt(var[j])).cdf)
        ks.append(res.statistic)
        pv.append(res.pvalue)
        c, e = np.histogram(z[:, j], bins=bins)
        counts.append(c.tolist())
        edges.append(e.tolist())
    return CltReport(n=n, samples=z, empirical_cov=0.5 * (cov + cov.T), V_x=V_x, ks_stat=np.array(ks),
                     ks_pvalue=np.array(pv), hist_counts=counts, hist_edges=edges, alpha=alpha)


# ---------------------------------------------------------------------------
# efficiency ordering


def sampler_covariance(spec, table, method="auto", horizon=100_000, trials=200, seed=0):
    """Sampling covariance of ``table[xi]`` under ``spec``: closed form when a finite chain exists."""
    if method == "closed" or (method == "auto" and spec.kind in CLOSED_FORM_KINDS):
        src = {"iid": spec.mu, "srw": spec.graph, "nbrw": spec.graph, "finite-chain": spec.chain}[spec.kind]
        chain = chain_of_sampler(spec.kind, src)
        return sampling_cov_closed(chain, table[chain.observe]), None
    mc = sampling_cov_mc(spec, table, horizon, trials, seed=seed)
    return mc.U, mc


def ordering_report(drift, spec_a, spec_b, x_star, y_star, schedule, blocks=None, method="auto",
                    horizon=100_000, trials=200, seed=0, tol=1e-9):
    """Compare two samplers through ``U`` and the induced ``V_x``, ``V_y``.

    Both samplers must target the same distribution. Verdict ``a_leq_b`` means
    sampler A is at least as efficient (``U_A <=_L U_B``).
    """
    ta, tb = spec_a.target(), spec_b.target()
    if ta.shape != tb.shape or np.abs(ta - tb).max() > 1e-9:
        raise ValueError("samplers target different distributions")
    x_star = np.atleast_1d(np.asarray(x_star, dtype=np.float64))
    y_star = np.atleast_1d(np.asarray(y_star, dtype=np.float64))
    if blocks is None:
        blocks = jacobian_blocks(drift, x_star, y_star)
    table = drift.noise_table(x_star, y_star, len(ta))
    out = {"samplers": [spec_a.kind, spec_b.kind], "method": method}
    mats = {}
    for tag, spec, sd in (("a", spec_a, seed), ("b", spec_b, seed + 1)):
        U, mc = sampler_covariance(spec, table, method, horizon, trials, sd)
        covs = CovBlocks.from_stacked(U, drift.d1)
        V_x, V_y = limiting_covariances(blocks, covs, schedule)
        mats[tag] = (U, V_x, V_y)
        out[tag] = {
            "kind": spec.kind,
            "trace_U": float(np.trace(U)),
            "trace_U_se": None if mc is None else mc.trace_stderr,
            "trace_V_x": float(np.trace(V_x)),
            "trace_V_y": float(np.trace(V_y)),
            "U": U.tolist(), "V_x": V_x.tolist(), "V_y": V_y.tolist(),
        }
    for i, name in enumerate(("U", "V_x", "V_y")):
        A, B = mats["a"][i], mats["b"][i]
        out[f"{name}_a_leq_b"] = loewner_leq(A, B, tol)
        out[f"{name}_b_leq_a"] = loewner_leq(B, A, tol)
    out["trace_order_consistent"] = bool(
        np.sign(out["a"]["trace_U"] - out["b"]["trace_U"]) == np.sign(out["a"]["trace_V_x"] - out["b"]["trace_V_x"]))
    return out


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    application: str
    sampler: dict
    schedule: StepSchedule
    n_steps: int
    n_trials: int
    master_seed: int = 0
    checkpoints: object = field(default_factory=lambda: {"per_decade": 20})
    output_dir: str = "runs/experiment"
    application_params: dict = field(default_factory=dict)
    compare_sampler: Optional[dict] = None
    projection: Optional[float] = None
    x0: Optional[list] = None
    y0: Optional[list] = None
    data: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        raw = json.loads(json.dumps(d))
        app = d.get("application")
        if app not in APPLICATIONS:
            raise ConfigError(f"application must be one of {APPLICATIONS}, got {app!r}")
        sch = d.get("schedule") or {}
        try:
            schedule = StepSchedule(float(sch["a"]), float(sch["b"]))
        except KeyError:
            raise ConfigError("schedule needs 'a' and 'b'") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        try:
            n_steps, n_trials = int(d["n_steps"]), int(d["n_trials"])
        except KeyError as exc:
            raise ConfigError(f"missing field {exc.args[0]!r}") from None
        if n_steps < 1 or n_trials < 1:
            raise ConfigError("n_steps and n_trials must be >= 1")
        out = d.get("output_dir", "runs/experiment")
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not os.path.isabs(out):
            out = os.path.join(root, out)
        sampler = d.get("sampler") or {"kind": "finite-chain"}
        if "kind" not in sampler:
            raise ConfigError("sampler needs a 'kind'")
        return cls(application=app, sampler=sampler, schedule=schedule, n_steps=n_steps, n_trials=n_trials,
                   master_seed=int(d.get("master_seed", 0)), checkpoints=d.get("checkpoints", {"per_decade": 20}),
                   output_dir=out, application_params=d.get("application_params", {}),
                   compare_sampler=d.get("compare_sampler"), projection=d.get("projection"),
                   x0=d.get("x0"), y0=d.get("y0"), data=d.get("data", {}), raw=raw)

    def checkpoint_grid(self):
        cp = self.checkpoints
        if isinstance(cp, dict):
            return geometric_checkpoints(self.n_steps, int(cp.get("per_decade", 20)))
        grid = np.array(sorted(set(int(c) for c in cp)), dtype=np.int64)
        if len(grid) == 0 or grid[-1] > self.n_steps:
            raise ConfigError("checkpoints must lie within n_steps")
        return grid


def load_config(path):
    path = Path(path)
    try:
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        else:
            with open(path) as fh:
                data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return ExperimentConfig.from_dict(data)


@dataclass
class Setup:
    drift: object
    spec: SamplerSpec
    x_star: np.ndarray
    y_star: np.ndarray
    problem: object = None
    compare_spec: Optional[SamplerSpec] = None
    theory: Optional[object] = None


def _graph_from(desc, data, n_default):
    if desc is None or desc == "random":
        desc = {"random": {}}
    if "edge_list" in desc:
        return read_edge_list(desc["edge_list"])
    if data.get("edge_list"):
        return read_edge_list(data["edge_list"])
    r = desc.get("random", {})
    return random_connected_graph(int(r.get("n", n_default)), float(r.get("avg_degree", 4.0)), int(r.get("seed", 0)))


def _data_sampler(desc, n_data, data):
    """Sampler over ``n_data`` samples, plus the per-sample importance weights it needs."""
    kind = desc["kind"]
    if kind in ("srw", "nbrw"):
        g = _graph_from(desc.get("graph"), data, n_data)
        if g.n_nodes != n_data:
            raise ConfigError(f"graph has {g.n_nodes} nodes but the problem has {n_data} samples")
        w = importance_weights(g) if desc.get("reweight", True) else None
        return SamplerSpec(kind, graph=g), w
    if kind == "iid":
        return SamplerSpec("iid", mu=np.full(n_data, 1.0 / n_data)), None
    if kind in ("single-shuffle", "random-shuffle"):
        return SamplerSpec(kind, n=n_data), None
    raise ConfigError(f"sampler kind {kind!r} does not apply to a finite dataset")


def build_setup(cfg):
    """Problem, drift, sampler recipe and equilibrium for an :class:`ExperimentConfig`."""
    app, p = cfg.application, cfg.application_params
    try:
        if app in ("gtd2", "tdc"):
            task = FiveStateTask(p.get("family", "exp"), alpha=float(p.get("alpha", 0.9)))
            drift = gtd2_drift(task) if app == "gtd2" else tdc_drift(task)
            if cfg.sampler.get("kind", "finite-chain") != "finite-chain":
                raise ConfigError("GTD noise is the task's transition chain; sampler kind must be finite-chain")
            spec = SamplerSpec("finite-chain", chain=task.augmented.chain)
            return Setup(drift, spec, np.zeros(1), np.zeros(1), task)
        if app == "momentum-sgd":
            if cfg.data.get("libsvm"):
                prob = load_libsvm(cfg.data["libsvm"], p.get("n_features"), float(p.get("kappa", 1.0)))
            else:
                prob = synthetic_logistic(int(p.get("n", 200)), int(p.get("dim", 20)), int(p.get("seed", 0)),
                                          float(p.get("kappa", 1.0)))
            spec, w = _data_sampler(cfg.sampler, prob.n, cfg.data)
            drift = momentum_sgd_drift(prob, w)
            cmp = None
            if cfg.compare_sampler:
                cmp, w2 = _data_sampler(cfg.compare_sampler, prob.n, cfg.data)
                if (w is None) != (w2 is None) or (w is not None and not np.allclose(w, w2)):
                    raise ConfigError("compared samplers need the same importance weights")
            return Setup(drift, spec, prob.solve(), np.zeros(prob.dim), prob, cmp)
        if app == "sgda":
            prob = minimax_datagen(int(p.get("seed", 0)), int(p.get("n", 100)), int(p.get("dim", 10)),
                                   float(p.get("kappa", 10.0)))
            spec, w = _data_sampler(cfg.sampler, prob.n, cfg.data)
            drift = sgda_drift(prob, w)
            cmp = _data_sampler(cfg.compare_sampler, prob.n, cfg.data)[0] if cfg.compare_sampler else None
            return Setup(drift, spec, np.zeros(prob.dim), np.zeros(prob.dim), prob, cmp)
        # custom-linear
        P = np.array(p["P"], dtype=np.float64)
        chain = FiniteChain(P)
        drift = linear_drift(p["A11"], p["A12"], p["A21"], p["A22"], p["c1"], p["c2"])
        blocks = drift.jacobian(None, None)
        table = drift.noise_table(np.zeros(drift.d1), np.zeros(drift.d2), chain.n_states)
        cbar = chain.pi @ table
        sol = np.linalg.solve(blocks.full(), -cbar)
        spec = SamplerSpec("finite-chain", chain=chain)
        return Setup(drift, spec, sol[:drift.d1], sol[drift.d1:], None)
    except KeyError as exc:
        raise ConfigError(f"missing application parameter {exc.args[0]!r}") from None


def theory_model(setup, schedule, mc_horizon=20_000, mc_trials=50, seed=0):
    """AsymptoticModel at the setup's equilibrium, or ``None`` when a Hurwitz condition fails."""
    if setup.drift.name in ("gtd2", "tdc"):
        return gtd_theory(setup.problem, schedule, setup.drift.name).model
    blocks = jacobian_blocks(setup.drift, setup.x_star, setup.y_star)
    table = setup.drift.noise_table(setup.x_star, setup.y_star, len(setup.spec.target()))
    U, _ = sampler_covariance(setup.spec, table, "auto", mc_horizon, mc_trials, seed)
    covs = CovBlocks.from_stacked(U, setup.drift.d1)
    return asymptotic_model(blocks, covs, schedule)


# ---------------------------------------------------------------------------
# runner


TRAJECTORY_FILE = "trajectories.csv"
MSE_FILE = "mse.csv"
CLT_FILE = "clt.json"
THEORY_FILE = "theory.json"
PROVENANCE_FILE = "provenance.json"
ORDERING_FILE = "ordering.json"


def write_trajectories(records, path):
    d1, d2 = records[0].x.shape[1], records[0].y.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "n"] + [f"x_{i}" for i in range(d1)] + [f"y_{i}" for i in range(d2)])
        for r in records:
            for k, n in enumerate(r.checkpoints):
                w.writerow([r.trial, int(n)] + [repr(float(v)) for v in r.x[k]] + [repr(float(v)) for v in r.y[k]])


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)


def run_experiment(cfg, workers=1):
    """Run trials and write the report files into ``cfg.output_dir``.

    Files are produced in a scratch directory and moved into place only after
    every step succeeded, so a failure leaves no partial outputs.
    """
    setup = build_setup(cfg)
    grid = cfg.checkpoint_grid()
    x0 = np.zeros(setup.drift.d1) if cfg.x0 is None else np.asarray(cfg.x0, dtype=np.float64)
    y0 = np.zeros(setup.drift.d2) if cfg.y0 is None else np.asarray(cfg.y0, dtype=np.float64)
    tc = TrialConfig(setup.drift, setup.spec, cfg.schedule, x0, y0, cfg.n_steps, grid, cfg.projection,
                     cfg.master_seed)
    out_dir = Path(cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out_dir} is not writable: {exc}") from None
    if not os.access(out_dir, os.W_OK):
        raise ConfigError(f"output directory {out_dir} is not writable")
    scratch = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
    try:
        records = run_trials(tc, cfg.n_trials, workers)
        model = theory_model(setup, cfg.schedule, seed=cfg.master_seed)
        write_trajectories(records, scratch / TRAJECTORY_FILE)
        if cfg.n_trials >= 2:
            mse = mse_curve(records, setup.x_star, setup.y_star, cfg.schedule, model)
            mse.to_csv(scratch / MSE_FILE)
        else:
            (scratch / MSE_FILE).write_text(",".join(MseReport.COLUMNS) + "\n")
        clt = clt_check(records, setup.x_star, cfg.schedule, model.V_x)
        clt_d = clt.to_dict()
        clt_d["meaningful"] = cfg.n_trials >= 50
        _dump(clt_d, scratch / CLT_FILE)
        theory = model.to_dict()
        theory.update(application=cfg.application, x_star=setup.x_star.tolist(), y_star=setup.y_star.tolist())
        _dump(theory, scratch / THEORY_FILE)
        if setup.compare_spec is not None:
            rep = ordering_report(setup.drift, setup.spec, setup.compare_spec, setup.x_star, setup.y_star,
                                  cfg.schedule, seed=cfg.master_seed)
            _dump(rep, scratch / ORDERING_FILE)
        _dump({
            "config": cfg.raw,
            "trial_seeds": [int(r.trial_seed) for r in records],
            "master_seed": cfg.master_seed,
            "package_version": __version__,
            "backend": backend.NAME,
            "numpy_version": np.__version__,
        }, scratch / PROVENANCE_FILE)
        written = []
        for f in sorted(scratch.iterdir()):
            os.replace(f, out_dir / f.name)
            written.append(out_dir / f.name)
        return written
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


# ---------------------------------------------------------------------------
# report validation


_NUM_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

SCHEMAS = {
    CLT_FILE: {
        "type": "object",
        "required": ["n", "n_trials", "samples", "empirical_cov", "V_x", "ks_stat", "ks_pvalue",
                     "hist_counts", "hist_edges", "passed"],
        "properties": {
            "n": {"type": "integer", "minimum": 1},
            "n_trials": {"type": "integer", "minimum": 1},
            "samples": _NUM_MATRIX,
            "empirical_cov": _NUM_MATRIX,
            "V_x": _NUM_MATRIX,
            "ks_stat": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
            "ks_pvalue": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
            "passed": {"type": "boolean"},
        },
    },
    THEORY_FILE: {
        "type": "object",
        "required": ["Q11", "Q12", "Q21", "Q22", "U11", "U12", "U21", "U22", "K_x", "U_x", "V_x", "V_y", "b"],
        "properties": {k: _NUM_MATRIX for k in ("Q11", "Q12", "Q21", "Q22", "U11", "U22", "K_x", "U_x", "V_x", "V_y")},
    },
    PROVENANCE_FILE: {
        "type": "object",
        "required": ["config", "trial_seeds", "master_seed", "package_version"],
        "properties": {"trial_seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
    },
    ORDERING_FILE: {
        "type": "object",
        "required": ["a", "b", "U_a_leq_b", "V_x_a_leq_b", "V_y_a_leq_b"],
    },
}


def check_report(directory):
    """Validate a report directory; returns a list of problems (empty when valid)."""
    import jsonschema

    d = Path(directory)
    problems = []
    for name in (TRAJECTORY_FILE, MSE_FILE, CLT_FILE, THEORY_FILE, PROVENANCE_FILE):
        if not (d / name).is_file():
            problems.append(f"missing {name}")
    for name, schema in SCHEMAS.items():
        p = d / name
        if not p.is_file():
            continue
        try:
            jsonschema.validate(json.loads(p.read_text()), schema)
        except (ValueError, jsonschema.ValidationError) as exc:
            problems.append(f"{name}: {getattr(exc, 'message', exc)}")
    if (d / MSE_FILE).is_file():
        with open(d / MSE_FILE) as fh:
            rows = list(csv.DictReader(fh))
        for row in rows:
            if float(row["mse_x"]) < 0 or float(row["mse_y"]) < 0:
                problems.append(f"{MSE_FILE}: negative MSE at n={row['n']}")
    if (d / CLT_FILE).is_file() and (d / PROVENANCE_FILE).is_file() and not problems:
        clt = json.loads((d / CLT_FILE).read_text())
        prov = json.loads((d / PROVENANCE_FILE).read_text())
        if clt["n_trials"] != len(prov["trial_seeds"]) or len(clt["samples"]) != clt["n_trials"]:
            problems.append("CLT sample count does not match the number of trials")
        cov = np.asarray(clt["empirical_cov"])
        if np.abs(cov - cov.T).max() > 1e-12 or np.linalg.eigvalsh(cov).min() < -1e-10:
            problems.append("CLT empirical covariance is not symmetric PSD")
    return problems
