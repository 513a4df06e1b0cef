"""Experiment orchestration and the perclr command line interface.

Each experiment recipe turns a validated configuration into seeded tasks,
runs them on an optional worker pool, and persists results as CSV/JSON
plus a manifest with per-task seeds and output digests.  Task seeds are
assigned by sorted task key before execution, so the emitted bytes do not
depend on the worker count.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from perclr import __version__

from .errors import (
    CapacityError,
    ConfigError,
    InvalidInputError,
    InvariantViolationError,
    NumericError,
)
from .estimators import (
    LambdaEstimate,
    ThetaEstimate,
    continuity_telescope,
    estimate_corner_distance,
    monotone_sweep,
    theta_inf,
    theta_slope,
)
from .exact_enumeration import (
    default_russo_suite,
    lambda_small_beta_derivative,
    verify_russo,
)
from .graphs import BoxGraph, corner_distance, count_cut_points, cutpoint_mean_exact
from .kernel import block_kernel_sum, connection_prob, one_dim_kernel
from .sampling import (
    MeasureSpec,
    config_to_jsonl,
    sample_direct,
    sample_fast,
    stream_seed,
)

EXPERIMENTS = (
    "theta_curve",
    "small_beta_slope",
    "monotone_sweep",
    "continuity",
    "russo_verify",
    "self_similarity",
    "cutpoints",
)

SUBCOMMANDS = (
    "sample",
    "estimate",
    "sweep",
    "continuity",
    "russo-verify",
    "cutpoints",
    "self-sim",
    "theta",
)

_SUB_TO_EXPERIMENT = {
    "theta": "theta_curve",
    "sweep": "monotone_sweep",
    "continuity": "continuity",
    "russo-verify": "russo_verify",
    "self-sim": "self_similarity",
    "cutpoints": "cutpoints",
}

# recipe defaults keep bare invocations reproducible and desk-sized
_RECIPE_DEFAULTS = {
    "theta_curve": dict(sizes=(256, 512, 1024, 2048), betas=(0.0, 0.5, 1.0, 2.0), replicas=200),
    "small_beta_slope": dict(
        sizes=(256, 512, 1024, 2048, 4096), betas=(0.05, 0.1, 0.2, 0.3), replicas=200
    ),
    "monotone_sweep": dict(sizes=(4096,), betas=(1.0, 2.0, 4.0), replicas=200),
    "continuity": dict(sizes=(4096,), betas=(1.0,), replicas=200),
    "russo_verify": dict(sizes=(), betas=(0.3, 1.0, 2.0), replicas=2),
    "self_similarity": dict(sizes=(2,), betas=(1.0,), replicas=100000),
    "cutpoints": dict(sizes=(16, 64), betas=(0.5, 1.0), replicas=3000),
}

_DEFAULT_SEED = 20260816
_BOX_CELL_GUARD = 2 ** 24

_USAGE = """usage: perclr SUBCOMMAND [options]

subcommands:
  sample        draw configurations, write samples.jsonl
  estimate      one corner-distance estimate, write estimates.csv
  theta         corner-distance ladders and exponent estimates per beta
  sweep         coupled monotone beta sweep with pathwise checks
  continuity    telescoping decomposition over an epsilon grid
  russo-verify  exact derivative vs finite differences on a model suite
  cutpoints     Monte Carlo cut-point counts vs the exact mean
  self-sim      block kernel identity, analytic and Monte Carlo

common options: --config PATH --out DIR --seed N --replicas N --dim N
                --sizes a,b,c --betas x,y --beta X --eps X --workers N
(PERCLR_WORKERS is the fallback for --workers; run
 `perclr SUBCOMMAND --help` for the full per-subcommand list)
"""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment request; validation happens before any sampling."""

    experiment: str
    dim: int = 1
    sizes: tuple = ()
    betas: tuple = ()
    eps: float | None = None
    replicas: int = 200
    seed: int = _DEFAULT_SEED
    output_path: str = "runs"

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))

    def diagnostics(self) -> list:
        """Every violated constraint, each tagged with its field path."""
        errs = []
        if self.experiment not in EXPERIMENTS:
            errs.append(
                f"config.experiment: {self.experiment!r} not in {'/'.join(EXPERIMENTS)}"
            )
        if self.dim < 1:
            errs.append(f"config.dim: must be >= 1 (got {self.dim})")
        if self.replicas < 2:
            errs.append(f"config.replicas: must be >= 2 (got {self.replicas})")
        if self.seed < 0:
            errs.append(f"config.seed: must be >= 0 (got {self.seed})")
        if self.eps is not None and not 0.0 <= self.eps <= 1.0:
            errs.append(f"config.eps: must lie in [0, 1] (got {self.eps})")
        for i, n in enumerate(self.sizes):
            if n < 2:
                errs.append(f"config.sizes[{i}]: box side must be >= 2 (got {n})")
            elif self.dim >= 1 and n ** max(self.dim, 1) > _BOX_CELL_GUARD:
                errs.append(f"config.sizes[{i}]: {n}^{self.dim} exceeds {_BOX_CELL_GUARD} cells")
        for i, b in enumerate(self.betas):
            if b < 0:
                errs.append(f"config.betas[{i}]: must be >= 0 (got {b})")
        if not isinstance(self.output_path, str) or not self.output_path:
            errs.append("config.output_path: must be a non-empty string")
        errs.extend(self._experiment_diagnostics())
        return errs

    def _experiment_diagnostics(self) -> list:
        errs = []
        exp = self.experiment
        if exp == "theta_curve":
            if not self.sizes:
                errs.append("config.sizes: theta_curve needs at least one size")
            if not self.betas:
                errs.append("config.betas: theta_curve needs at least one beta")
        elif exp == "small_beta_slope":
            if self.dim != 1:
                errs.append(f"config.dim: small_beta_slope is d=1 only (got {self.dim})")
            if len(self.sizes) < 3:
                errs.append("config.sizes: slope regression needs >= 3 sizes")
            if not self.betas:
                errs.append("config.betas: small_beta_slope needs at least one beta")
            for i, b in enumerate(self.betas):
                if not 0.0 < b <= 0.3:
                    errs.append(f"config.betas[{i}]: must lie in (0, 0.3] (got {b})")
        elif exp == "monotone_sweep":
            if not self.sizes:
                errs.append("config.sizes: monotone_sweep needs at least one size")
            if len(self.betas) < 2:
                errs.append("config.betas: a sweep needs at least two betas")
            elif list(self.betas) != sorted(self.betas):
                errs.append("config.betas: must be ascending")
        elif exp == "continuity":
            if self.dim != 1:
                errs.append(f"config.dim: continuity is d=1 only (got {self.dim})")
            if len(self.betas) != 1:
                errs.append("config.betas: continuity takes exactly one base beta")
            if len(self.sizes) != 1:
                errs.append("config.sizes: continuity takes exactly one box side")
            else:
                n = self.sizes[0]
                k = n.bit_length() - 1
                if 2 ** k != n or not 2 <= k <= 14:
                    errs.append(
                        f"config.sizes[0]: must be a power of two in [4, 16384] (got {n})"
                    )
        elif exp == "self_similarity":
            if self.dim != 1:
                errs.append(f"config.dim: self_similarity runs at d=1 (got {self.dim})")
            if len(self.sizes) != 1 or not self.sizes or self.sizes[0] > 8:
                errs.append("config.sizes: one block side in [2, 8]")
            if len(self.betas) != 1:
                errs.append("config.betas: self_similarity takes exactly one beta")
        elif exp == "cutpoints":
            if self.dim != 1:
                errs.append(f"config.dim: cut points are defined for d=1 (got {self.dim})")
            if not self.sizes or any(n < 3 for n in self.sizes):
                errs.append("config.sizes: cutpoints needs sizes >= 3")
            if not self.betas:
                errs.append("config.betas: cutpoints needs at least one beta")
        return errs

    def validated(self) -> "ExperimentConfig":
        errs = self.diagnostics()
        if errs:
            raise ConfigError(errs)
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sizes"] = list(self.sizes)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(["config: top level must be a JSON object"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([f"config.{k}: unknown field" for k in unknown])
        if "experiment" not in data:
            raise ConfigError(["config.experiment: missing"])
        return cls(**data)


@dataclass(frozen=True)
class RunManifest:
    """Record of one run: inputs, seeds, and digests of every output."""

    config: dict
    version: str
    wall_clock_seconds: float
    task_seeds: dict
    output_digests: dict

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError([f"config.experiment: {experiment!r} not in {'/'.join(EXPERIMENTS)}"])
    merged = dict(_RECIPE_DEFAULTS[experiment])
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(experiment=experiment, **merged)


# ---------------------------------------------------------------------------
# output formatting

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "%.12g" % x
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(c) for c in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


ESTIMATES_HEADER = (
    "beta", "n", "dim", "measure_kind", "k_threshold",
    "mean", "stderr", "replicas", "pair_policy", "seed",
)
THETA_HEADER = ("beta", "method", "value", "ci_low", "ci_high", "sizes", "replicas", "seed")
TELESCOPE_HEADER = ("beta", "eps", "n_exponent", "k", "log_ratio", "stderr", "replicas", "seed")
CUTPOINTS_HEADER = ("beta", "n", "dim", "mean_mc", "stderr", "mean_exact", "replicas", "seed")


def _estimate_row(e: LambdaEstimate):
    m = e.measure
    return (
        m.beta, e.n, e.dim, m.kind,
        m.k_threshold if m.kind == "mixed" else None,
        e.mean, e.stderr, e.replicas, e.pair_policy, e.seed,
    )


def _theta_row(t: ThetaEstimate):
    sizes = "|".join(str(n) for n in t.sizes_used)
    return (t.beta, t.method, t.value, t.ci_low, t.ci_high, sizes, t.replicas, t.seed)


# ---------------------------------------------------------------------------
# task execution

def _run_task(task: dict):
    kind = task["kind"]
    if kind == "ladder_sweep":
        return monotone_sweep(
            task["betas"], task["n"], task["dim"], task["replicas"], task["seed"]
        )
    if kind == "corner":
        spec = MeasureSpec(kind="plain", beta=task["beta"])
        return estimate_corner_distance(spec, task["n"], task["dim"], task["replicas"], task["seed"])
    if kind == "telescope":
        terms = continuity_telescope(
            task["beta"], task["eps"], task["n_exponent"], task["replicas"], task["seed"]
        )
        n = 2 ** task["n_exponent"]
        end_seed = stream_seed(task["seed"], 0xE17D)
        hi = estimate_corner_distance(
            MeasureSpec(kind="plain", beta=task["beta"]), n, 1, task["replicas"], end_seed
        )
        lo = estimate_corner_distance(
            MeasureSpec(kind="plain", beta=task["beta"] + task["eps"]),
            n, 1, task["replicas"], end_seed,
        )
        return terms, hi, lo
    if kind == "russo":
        model, functional = task["model"], task["functional"]
        rows = []
        for beta in task["betas"]:
            rep = verify_russo(model, functional, beta, h=task["h"])
            rows.append(
                {
                    "model_id": task["model_id"],
                    "beta": beta,
                    "mode": rep.mode,
                    "analytic": rep.analytic,
                    "finite_diff": rep.finite_diff,
                    "abs_error": rep.abs_error,
                    "pass": bool(rep.abs_error < task["tol"]),
                }
            )
        return rows
    if kind == "cutpoints":
        spec = MeasureSpec(kind="plain", beta=task["beta"])
        n, replicas = task["n"], task["replicas"]
        counts = np.empty(replicas)
        for r in range(replicas):
            config = sample_fast(spec, n, 1, task["seed"], r)
            g = BoxGraph(config)
            cuts = count_cut_points(g)
            counts[r] = cuts
            dist = corner_distance(config)
            if dist < cuts:
                raise InvariantViolationError(
                    f"replica {r} at (n={n}, beta={task['beta']}): "
                    f"corner distance {dist} below cut count {cuts}"
                )
        return float(counts.mean()), float(counts.std(ddof=1) / math.sqrt(replicas))
    if kind == "selfsim_mc":
        spec = MeasureSpec(kind="plain", beta=task["beta"])
        block, (u, v) = task["block_side"], task["pair"]
        box = block * (v + 1)
        hits = 0
        for r in range(task["replicas"]):
            config = sample_direct(spec, box, 1, task["seed"], r)
            hit = False
            for (a,), (b,) in config.long_edges:
                lo_in = u * block <= a < (u + 1) * block
                hi_in = v * block <= b < (v + 1) * block
                if lo_in and hi_in:
                    hit = True
                    break
            if hit:
                hits += 1
        return hits
    raise InvalidInputError(f"unknown task kind {kind!r}")


def _execute(tasks, workers: int) -> dict:
    """Run (key, task) pairs; returns {key: result} regardless of pool size."""
    tasks = sorted(tasks, key=lambda kv: kv[0])
    if workers <= 1 or len(tasks) <= 1:
        return {key: _run_task(t) for key, t in tasks}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_run_task, [t for _, t in tasks]))
    return {key: res for (key, _), res in zip(tasks, results)}


def _assign_seeds(keyed_tasks, base_seed: int) -> dict:
    """Give every task a seed derived from its rank in sorted key order."""
    seeds = {}
    for idx, (key, task) in enumerate(sorted(keyed_tasks, key=lambda kv: kv[0])):
        task["seed"] = stream_seed(base_seed, idx)
        seeds[key] = task["seed"]
    return seeds


# ---------------------------------------------------------------------------
# experiment recipes

def run_theta_curve(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> dict:
    """Corner-distance ladders per beta plus both exponent estimators.

    Betas at a fixed size share one coupled sweep, so the per-size samples
    are comparable across beta by construction.
    """
    betas = sorted(config.betas)
    tasks = [
        (f"n={n:08d}", {"kind": "ladder_sweep", "betas": betas, "n": n,
                        "dim": config.dim, "replicas": config.replicas})
        for n in sorted(config.sizes)
    ]
    task_seeds = _assign_seeds(tasks, config.seed)
    results = _execute(tasks, workers)

    est_rows, theta_rows, theta_estimates = [], [], []
    by_beta = {b: [] for b in betas}
    for key in sorted(results):
        ests, _report = results[key]
        for e in ests:
            est_rows.append(_estimate_row(e))
            by_beta[e.measure.beta].append(e)
    for b in betas:
        ladder = by_beta[b]
        t_inf = theta_inf(ladder)
        theta_estimates.append(t_inf)
        theta_rows.append(_theta_row(t_inf))
        if len(ladder) >= 3:
            t_slope = theta_slope(ladder)
            theta_estimates.append(t_slope)
            theta_rows.append(_theta_row(t_slope))
    _write_csv(out_dir / "estimates.csv", ESTIMATES_HEADER, est_rows)
    _write_csv(out_dir / "theta.csv", THETA_HEADER, theta_rows)
    report = {
        "experiment": "theta_curve",
        "betas": betas,
        "sizes": sorted(config.sizes),
        "theta": [dataclasses.asdict(t) for t in theta_estimates],
    }
    _write_json(out_dir / "report.json", report)
    return {"task_seeds": task_seeds, "report": report}


def run_small_beta(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> dict:
    """Slope estimates near beta = 0 and the exact derivative ratio column.

    Emits (1 - theta_slope)/beta per beta, which should hover near 1 for
    small beta, alongside the deterministic derivative ratio
    lambda'(n)/(n log n) whose limit is -1.
    """
    betas = sorted(config.betas)
    sizes = sorted(config.sizes)
    tasks = [
        (f"b={b:.12g}|n={n:08d}", {"kind": "corner", "beta": b, "n": n,
                                   "dim": config.dim, "replicas": config.replicas})
        for b in betas
        for n in sizes
    ]
    task_seeds = _assign_seeds(tasks, config.seed)
    results = _execute(tasks, workers)

    est_rows, theta_rows, mc_rows = [], [], []
    for b in betas:
        ladder = [results[f"b={b:.12g}|n={n:08d}"] for n in sizes]
        est_rows.extend(_estimate_row(e) for e in ladder)
        t = theta_slope(ladder)
        theta_rows.append(_theta_row(t))
        mc_rows.append(
            {
                "beta": b,
                "theta_slope": t.value,
                "ratio": (1.0 - t.value) / b,
                "ratio_low": (1.0 - t.ci_high) / b,
                "ratio_high": (1.0 - t.ci_low) / b,
            }
        )
    exact_rows = []
    for j in (8, 10, 12, 14, 16):
        n = 2 ** j
        value = lambda_small_beta_derivative(n) / (n * math.log(n))
        exact_rows.append({"n": n, "derivative_ratio": value})
    _write_csv(out_dir / "estimates.csv", ESTIMATES_HEADER, est_rows)
    _write_csv(out_dir / "theta.csv", THETA_HEADER, theta_rows)
    report = {
        "experiment": "small_beta_slope",
        "monte_carlo": mc_rows,
        "exact_derivative_ratio": exact_rows,
    }
    _write_json(out_dir / "report.json", report)
    return {"task_seeds": task_seeds, "report": report}


def run_monotone_sweep(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> dict:
    """Coupled sweep per size; a pathwise ordering breach aborts the run."""
    betas = list(config.betas)
    tasks = [
        (f"n={n:08d}", {"kind": "ladder_sweep", "betas": betas, "n": n,
                        "dim": config.dim, "replicas": config.replicas})
        for n in sorted(config.sizes)
    ]
    task_seeds = _assign_seeds(tasks, config.seed)
    results = _execute(tasks, workers)

    est_rows, sweep_rows = [], []
    for key in sorted(results):
        ests, report = results[key]
        est_rows.extend(_estimate_row(e) for e in ests)
        pairs = []
        for i, (dm, ds) in enumerate(zip(report.diff_means, report.diff_stderrs)):
            pairs.append(
                {
                    "beta_low": betas[i],
                    "beta_high": betas[i + 1],
                    "diff_mean": dm,
                    "diff_stderr": ds,
                    "strict_at_3sigma": bool(dm - 3 * ds > 0),
                }
            )
        sweep_rows.append(
            {"n": report.n, "replicas": report.replicas, "pairs": pairs, "pathwise_ok": True}
        )
    _write_csv(out_dir / "estimates.csv", ESTIMATES_HEADER, est_rows)
    report = {"experiment": "monotone_sweep", "betas": betas, "sweeps": sweep_rows}
    _write_json(out_dir / "report.json", report)
    return {"task_seeds": task_seeds, "report": report}


def run_continuity(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> dict:
    """Telescope terms over an epsilon grid plus the endpoint identity check.

    The per-epsilon sum of terms must match the log-distance gap between
    independently estimated endpoints; sigma combines both endpoint
    variances twice since the telescoping chain carries its own copy.
    """
    beta = config.betas[0]
    n_exponent = config.sizes[0].bit_length() - 1
    grid = [0.0] + ([config.eps] if config.eps is not None else [0.05, 0.5])
    tasks = [
        (f"eps={eps:.12g}", {"kind": "telescope", "beta": beta, "eps": eps,
                             "n_exponent": n_exponent, "replicas": config.replicas})
        for eps in grid
    ]
    task_seeds = _assign_seeds(tasks, config.seed)
    results = _execute(tasks, workers)

    telescope_rows, summary = [], []
    for eps in grid:
        terms, hi, lo = results[f"eps={eps:.12g}"]
        seed = task_seeds[f"eps={eps:.12g}"]
        for t in terms:
            telescope_rows.append(
                (beta, eps, n_exponent, t.k, t.log_ratio, t.stderr, config.replicas, seed)
            )
        gap_sum = sum(t.log_ratio for t in terms)
        gap_direct = math.log(hi.mean - 1) - math.log(lo.mean - 1)
        var = (hi.stderr / (hi.mean - 1)) ** 2 + (lo.stderr / (lo.mean - 1)) ** 2
        sigma = math.sqrt(2 * var)
        summary.append(
            {
                "eps": eps,
                "sum_log_ratios": gap_sum,
                "direct_gap": gap_direct,
                "sigma": sigma,
                "within_3sigma": bool(abs(gap_sum - gap_direct) <= 3 * sigma),
                "endpoint_mean_beta": hi.mean,
                "endpoint_mean_beta_plus_eps": lo.mean,
            }
        )
    _write_csv(out_dir / "telescope.csv", TELESCOPE_HEADER, telescope_rows)
    report = {
        "experiment": "continuity",
        "beta": beta,
        "n_exponent": n_exponent,
        "identity": summary,
    }
    _write_json(out_dir / "report.json", report)
    return {"task_seeds": task_seeds, "report": report}


def run_russo_verify(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> dict:
    """Exact derivative vs central differences over the randomized suite.

    Also reports the error-ratio table for halved steps on the first five
    models; a second-order scheme puts those ratios near 4.
    """
    betas = list(config.betas) or [0.3, 1.0, 2.0]
    suite = default_russo_suite()
    tasks = [
        (model_id, {"kind": "russo", "model_id": model_id, "model": model,
                    "functional": functional, "betas": betas, "h": 1e-4, "tol": 1e-6})
        for model_id, model, functional in suite
    ]
    task_seeds = _assign_seeds(tasks, config.seed)
    # functionals close over model structure and do not pickle; the whole
    # suite is exact arithmetic and runs in well under a second anyway
    results = _execute(tasks, 1)
    rows = [row for key in sorted(results) for row in results[key]]

    convergence = []
    for model_id, model, functional in suite:
        if len(convergence) == 5:
            break
        errors = {}
        for h in (0.04, 0.02, 0.01):
            errors[h] = verify_russo(model, functional, beta=1.0, h=h).abs_error
        # expectations that are affine in an edge probability have zero
        # truncation error; the ratio test needs a curved one
        if errors[0.04] <= 1e-9:
            continue
        convergence.append(
            {
                "model_id": model_id,
                "ratio_004_002": errors[0.04] / errors[0.02],
                "ratio_002_001": errors[0.02] / errors[0.01],
            }
        )
    report = {
        "experiment": "russo_verify",
        "betas": betas,
        "h": 1e-4,
        "tolerance": 1e-6,
        "all_pass": all(r["pass"] for r in rows),
        "suite": rows,
        "h_convergence": convergence,
    }
    _write_json(out_dir / "report.json", report)
    return {"task_seeds": task_seeds, "report": report}


def run_self_similarity(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> dict:
    """Block kernel identity: analytic grid plus one Monte Carlo check."""
    beta = config.betas[0]
    block = config.sizes[0]
    analytic = []
    for n in (1, 2, 4, 8):
        for v in (2, 3, 5):
            total = block_kernel_sum(0, v, n, 1)
            target = one_dim_kernel(v)
            analytic.append(
                {
                    "u": 0,
                    "v": v,
                    "n": n,
                    "block_sum": total,
                    "kernel": target,
                    "abs_error": abs(total - target),
                    "pass": bool(abs(total - target) <= 1e-10),
                }
            )
    pair = (0, 3)
    tasks = [
        ("mc", {"kind": "selfsim_mc", "beta": beta, "block_side": block,
                "pair": pair, "replicas": config.replicas})
    ]
    task_seeds = _assign_seeds(tasks, config.seed)
    hits = _execute(tasks, workers)["mc"]
    p = connection_prob(beta, (pair[0],), (pair[1],), 1)
    freq = hits / config.replicas
    sigma = math.sqrt(p * (1 - p) / config.replicas)
    report = {
        "experiment": "self_similarity",
        "analytic": analytic,
        "analytic_all_pass": all(r["pass"] for r in analytic),
        "monte_carlo": {
            "beta": beta,
            "pair": list(pair),
            "block_side": block,
            "replicas": config.replicas,
            "frequency": freq,
            "probability": p,
            "sigma": sigma,
            "within_3sigma": bool(abs(freq - p) <= 3 * sigma),
        },
    }
    _write_json(out_dir / "report.json", report)
    return {"task_seeds": task_seeds, "report": report}


def run_cutpoints(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> dict:
    """Monte Carlo cut-point means vs the exact formula, per (n, beta)."""
    tasks = [
        (f"b={b:.12g}|n={n:08d}", {"kind": "cutpoints", "beta": b, "n": n,
                                   "replicas": config.replicas})
        for b in sorted(config.betas)
        for n in sorted(config.sizes)
    ]
    task_seeds = _assign_seeds(tasks, config.seed)
    results = _execute(tasks, workers)

    csv_rows, checks = [], []
    for b in sorted(config.betas):
        for n in sorted(config.sizes):
            key = f"b={b:.12g}|n={n:08d}"
            mean_mc, stderr = results[key]
            exact = cutpoint_mean_exact(n, b)
            csv_rows.append((b, n, 1, mean_mc, stderr, exact, config.replicas, task_seeds[key]))
            z = (mean_mc - exact) / stderr if stderr > 0 else 0.0
            checks.append(
                {
                    "beta": b,
                    "n": n,
                    "mean_mc": mean_mc,
                    "mean_exact": exact,
                    "z": z,
                    "within_3sigma": bool(abs(z) <= 3.0),
                    "distance_dominates_cuts": True,
                }
            )
    _write_csv(out_dir / "cutpoints.csv", CUTPOINTS_HEADER, csv_rows)
    report = {"experiment": "cutpoints", "checks": checks}
    _write_json(out_dir / "report.json", report)
    return {"task_seeds": task_seeds, "report": report}


_RUNNERS = {
    "theta_curve": run_theta_curve,
    "small_beta_slope": run_small_beta,
    "monotone_sweep": run_monotone_sweep,
    "continuity": run_continuity,
    "russo_verify": run_russo_verify,
    "self_similarity": run_self_similarity,
    "cutpoints": run_cutpoints,
}


def run_experiment(config: ExperimentConfig, out_dir=None, workers: int = 1) -> RunManifest:
    """Validate, run, and persist one experiment with its manifest."""
    config = config.validated()
    out = Path(out_dir if out_dir is not None else config.output_path)
    out.mkdir(parents=True, exist_ok=True)
    config = dataclasses.replace(config, output_path=str(out))
    started = time.monotonic()
    _write_json(out / "config.json", config.to_dict())
    outcome = _RUNNERS[config.experiment](config, out, workers)
    digests = {
        p.name: _sha256(p)
        for p in sorted(out.iterdir())
        if p.is_file() and p.name != "manifest.json"
    }
    manifest = RunManifest(
        config=config.to_dict(),
        version=__version__,
        wall_clock_seconds=time.monotonic() - started,
        task_seeds=outcome["task_seeds"],
        output_digests=digests,
    )
    manifest.write(out)
    return manifest


# ---------------------------------------------------------------------------
# command line surface

def _parse_list(text, cast):
    return tuple(cast(part) for part in text.split(",") if part != "")


def _build_parser(sub: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=f"perclr {sub}", add_help=True)
    p.add_argument("--config", type=str, default=None, help="JSON config file")
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: PERCLR_WORKERS or 1)")
    p.add_argument("--beta", type=float, default=None, help="single beta")
    p.add_argument("--betas", type=str, default=None, help="comma-separated betas")
    p.add_argument("--sizes", type=str, default=None, help="comma-separated box sides")
    p.add_argument("--eps", type=float, default=None)
    if sub == "sample":
        p.add_argument("--n", type=int, default=8, help="box side")
        p.add_argument("--method", choices=("fast", "direct"), default="direct")
    if sub == "estimate":
        p.add_argument("--n", type=int, default=64, help="box side")
    if sub == "russo-verify":
        p.add_argument("--suite", choices=("default",), default="default")
    return p


def _resolve_workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("PERCLR_WORKERS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _config_from_args(sub: str, args) -> ExperimentConfig:
    file_data = {}
    if args.config is not None:
        try:
            file_data = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError([f"config: file not found: {args.config}"])
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: invalid JSON: {exc}"])
        if not isinstance(file_data, dict):
            raise ConfigError(["config: top level must be a JSON object"])

    experiment = file_data.get("experiment", _SUB_TO_EXPERIMENT[sub])
    allowed = {_SUB_TO_EXPERIMENT[sub]}
    if sub == "theta":
        allowed.add("small_beta_slope")
    if experiment not in allowed:
        raise ConfigError(
            [f"config.experiment: {experiment!r} does not match subcommand {sub!r}"]
        )

    if args.beta is not None and args.betas is not None:
        raise ConfigError(["config.betas: give --beta or --betas, not both"])
    overrides = {
        "dim": args.dim,
        "replicas": args.replicas,
        "seed": args.seed,
        "eps": args.eps,
        "output_path": args.out,
    }
    if args.betas is not None:
        overrides["betas"] = _parse_list(args.betas, float)
    elif args.beta is not None:
        overrides["betas"] = (args.beta,)
    if args.sizes is not None:
        overrides["sizes"] = _parse_list(args.sizes, int)

    merged = dict(_RECIPE_DEFAULTS[experiment])
    merged["output_path"] = f"runs/{experiment}"
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(file_data) - known)
    if unknown:
        raise ConfigError([f"config.{k}: unknown field" for k in unknown])
    merged.update({k: v for k, v in file_data.items() if k != "experiment"})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(experiment=experiment, **merged)


def _run_sample(args) -> int:
    errs = []
    if args.n < 1:
        errs.append(f"config.n: must be >= 1 (got {args.n})")
    if args.dim is not None and args.dim < 1:
        errs.append(f"config.dim: must be >= 1 (got {args.dim})")
    replicas = args.replicas if args.replicas is not None else 10
    if replicas < 1:
        errs.append(f"config.replicas: must be >= 1 (got {replicas})")
    if args.beta is None and args.betas is not None:
        errs.append("config.betas: sample takes a single --beta")
    if errs:
        raise ConfigError(errs)
    beta = args.beta if args.beta is not None else 1.0
    dim = args.dim if args.dim is not None else 1
    seed = args.seed if args.seed is not None else _DEFAULT_SEED
    out = Path(args.out if args.out is not None else "runs/sample")
    out.mkdir(parents=True, exist_ok=True)
    sampler = sample_direct if args.method == "direct" else sample_fast
    spec = MeasureSpec(kind="plain", beta=beta)
    started = time.monotonic()
    lines = [config_to_jsonl(sampler(spec, args.n, dim, seed, r)) for r in range(replicas)]
    (out / "samples.jsonl").write_text("\n".join(lines) + "\n")
    manifest = RunManifest(
        config={"subcommand": "sample", "beta": beta, "n": args.n, "dim": dim,
                "replicas": replicas, "seed": seed, "method": args.method},
        version=__version__,
        wall_clock_seconds=time.monotonic() - started,
        task_seeds={"sample": seed},
        output_digests={"samples.jsonl": _sha256(out / "samples.jsonl")},
    )
    manifest.write(out)
    print(f"wrote {replicas} configurations to {out / 'samples.jsonl'}")
    return 0


def _run_estimate(args) -> int:
    errs = []
    if args.n < 2:
        errs.append(f"config.n: must be >= 2 (got {args.n})")
    replicas = args.replicas if args.replicas is not None else 200
    if replicas < 2:
        errs.append(f"config.replicas: must be >= 2 (got {replicas})")
    if errs:
        raise ConfigError(errs)
    beta = args.beta if args.beta is not None else 1.0
    dim = args.dim if args.dim is not None else 1
    seed = args.seed if args.seed is not None else _DEFAULT_SEED
    out = Path(args.out if args.out is not None else "runs/estimate")
    out.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    est = estimate_corner_distance(MeasureSpec(kind="plain", beta=beta), args.n, dim, replicas, seed)
    _write_csv(out / "estimates.csv", ESTIMATES_HEADER, [_estimate_row(est)])
    manifest = RunManifest(
        config={"subcommand": "estimate", "beta": beta, "n": args.n, "dim": dim,
                "replicas": replicas, "seed": seed},
        version=__version__,
        wall_clock_seconds=time.monotonic() - started,
        task_seeds={"estimate": seed},
        output_digests={"estimates.csv": _sha256(out / "estimates.csv")},
    )
    manifest.write(out)
    print(f"mean={est.mean:.6g} stderr={est.stderr:.6g} -> {out / 'estimates.csv'}")
    return 0


def cli_main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(_USAGE, end="")
        return 0
    sub = argv[0]
    if sub not in SUBCOMMANDS:
        sys.stderr.write(f"unknown subcommand: {sub!r}\n\n{_USAGE}")
        return 64
    parser = _build_parser(sub)
    try:
        args = parser.parse_args(argv[1:])
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if sub == "sample":
            return _run_sample(args)
        if sub == "estimate":
            return _run_estimate(args)
        config = _config_from_args(sub, args)
        manifest = run_experiment(config, workers=_resolve_workers(args))
        print(
            f"{config.experiment}: wrote {len(manifest.output_digests)} files "
            f"to {config.output_path} in {manifest.wall_clock_seconds:.1f}s"
        )
        return 0
    except ConfigError as exc:
        for line in exc.errors:
            sys.stderr.write(line + "\n")
        return 1
    except InvariantViolationError as exc:
        sys.stderr.write(f"invariant violation: {exc}\n")
        return 2
    except (InvalidInputError, CapacityError, NumericError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main():
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
