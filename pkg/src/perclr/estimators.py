"""Monte Carlo estimators for distance growth on percolation boxes.

Covers corner-pair and all-pairs estimates of expected graph distance plus
one, two exponent estimators (inf formula and log-log regression) with
bootstrap confidence intervals, coupled beta sweeps with a pathwise
monotonicity check, and the telescoping decomposition that probes how the
exponent moves under a small increase of beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, InvalidInputError, InvariantViolationError
from .graphs import BoxGraph, bfs_distance, corner_distance
from .sampling import (
    MeasureSpec,
    chi_augment,
    coupled_sweep,
    sample_continuum,
    sample_fast,
    stream_seed,
)

# all-pairs estimation is quadratic in the vertex count
_FULL_PAIRS_GUARD = 256
_RESAMPLES = 1000
_BOOT_TAG = 0xC2B2AE3D27D4EB4F


@dataclass(frozen=True)
class LambdaEstimate:
    """Estimate of an expected box distance plus one.

    ``pair_policy`` records which pair the mean refers to: "corner" for the
    main-diagonal pair, "full_max" for the maximizing pair over the whole
    box.  ``samples`` keeps the per-replica values (distance + 1) when the
    estimator walks replicas one by one; it is None for aggregated results.
    """

    n: int
    dim: int
    measure: MeasureSpec
    mean: float
    stderr: float
    replicas: int
    pair_policy: str
    seed: int
    samples: np.ndarray | None = field(default=None, compare=False, repr=False)
    max_pair: tuple | None = None

    def __post_init__(self):
        if self.n < 1 or self.dim < 1:
            raise InvalidInputError("n and dim must be >= 1")
        if self.pair_policy not in ("corner", "full_max"):
            raise InvalidInputError(f"unknown pair_policy {self.pair_policy!r}")
        if self.replicas < 0:
            raise InvalidInputError("replicas must be >= 0")
        if not self.stderr >= 0:
            raise InvalidInputError("stderr must be >= 0")
        # hop distances live in [0, dim*(n-1)], so mean+1 in [1, dim*(n-1)+1]
        if not 1.0 <= self.mean <= self.dim * (self.n - 1) + 1:
            raise InvalidInputError(f"mean {self.mean} outside [1, dim*(n-1)+1]")
        if self.samples is not None:
            arr = np.asarray(self.samples, dtype=float)
            if arr.shape != (self.replicas,):
                raise InvalidInputError("samples must hold one value per replica")
            arr.setflags(write=False)
            object.__setattr__(self, "samples", arr)


@dataclass(frozen=True)
class ThetaEstimate:
    """Distance exponent estimate with a bootstrap 95% interval."""

    beta: float
    method: str
    value: float
    ci_low: float
    ci_high: float
    sizes_used: tuple
    replicas: int
    seed: int

    def __post_init__(self):
        if self.method not in ("inf_formula", "ols_slope"):
            raise InvalidInputError(f"unknown method {self.method!r}")
        if not 0.0 < self.value <= 1.0:
            raise InvariantViolationError(f"theta value {self.value} outside (0, 1]")
        if not self.ci_low <= self.value <= self.ci_high:
            raise InvariantViolationError("CI must bracket the point estimate")


@dataclass(frozen=True)
class TelescopeTerm:
    """One level of the telescoping log-distance decomposition."""

    k: int
    log_ratio: float
    stderr: float

    def __post_init__(self):
        if self.k < 2:
            raise InvalidInputError("telescope levels start at k = 2")
        if not self.stderr >= 0:
            raise InvalidInputError("stderr must be >= 0")


@dataclass(frozen=True)
class SweepReport:
    """Paired-difference summary of a coupled beta sweep.

    ``diff_means[i]`` estimates E[D(beta_i) - D(beta_{i+1})] >= 0 from the
    coupled replicas; common random numbers make these differences far less
    noisy than differencing independent runs.
    """

    betas: tuple
    n: int
    dim: int
    replicas: int
    seed: int
    diff_means: tuple
    diff_stderrs: tuple

    def __post_init__(self):
        if len(self.diff_means) != max(len(self.betas) - 1, 0):
            raise InvalidInputError("one difference per adjacent beta pair")
        if len(self.diff_stderrs) != len(self.diff_means):
            raise InvalidInputError("diff_means and diff_stderrs must align")


def _sample_for(spec: MeasureSpec, n: int, dim: int, seed: int, replica: int):
    if spec.kind == "continuum":
        return sample_continuum(spec.beta, n, dim, seed, replica)
    return sample_fast(spec, n, dim, seed, replica)


def estimate_corner_distance(
    spec: MeasureSpec, n: int, dim: int, replicas: int, seed: int
) -> LambdaEstimate:
    """Average corner-to-corner distance plus one, over independent replicas."""
    if replicas < 2:
        raise InvalidInputError("need at least 2 replicas")
    vals = np.empty(replicas, dtype=float)
    for r in range(replicas):
        config = _sample_for(spec, n, dim, seed, r)
        vals[r] = corner_distance(config) + 1.0
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(replicas))
    return LambdaEstimate(
        n=n,
        dim=dim,
        measure=spec,
        mean=mean,
        stderr=stderr,
        replicas=replicas,
        pair_policy="corner",
        seed=int(seed),
        samples=vals,
    )


def estimate_lambda_full(
    beta: float, n: int, dim: int, replicas: int, seed: int
) -> LambdaEstimate:
    """Maximum over all vertex pairs of (average distance) + 1.

    Per-pair means are accumulated across replicas and the maximizing pair
    is reported together with its standard error.  Restricted to boxes of
    at most 256 vertices.
    """
    size = n ** dim
    if size > _FULL_PAIRS_GUARD:
        raise CapacityError(f"{size} vertices exceed the all-pairs guard of {_FULL_PAIRS_GUARD}")
    if replicas < 2:
        raise InvalidInputError("need at least 2 replicas")
    spec = MeasureSpec(kind="plain", beta=float(beta))
    sums = np.zeros((size, size))
    sumsq = np.zeros((size, size))
    dmat = np.empty((size, size))
    for r in range(replicas):
        config = sample_fast(spec, n, dim, seed, r)
        g = BoxGraph(config)
        for i in range(size):
            dmat[i] = bfs_distance(g, g.point_of(i)).dist
        sums += dmat
        sumsq += dmat * dmat
    pair_means = sums / replicas + 1.0
    i, j = divmod(int(np.argmax(pair_means)), size)
    var = (sumsq[i, j] - sums[i, j] ** 2 / replicas) / (replicas - 1)
    return LambdaEstimate(
        n=n,
        dim=dim,
        measure=spec,
        mean=float(pair_means[i, j]),
        stderr=float(math.sqrt(max(var, 0.0) / replicas)),
        replicas=replicas,
        pair_policy="full_max",
        seed=int(seed),
        samples=None,
        max_pair=tuple(sorted((g.point_of(i), g.point_of(j)))),
    )


def _check_ladder(estimates, min_sizes: int):
    if len(estimates) < min_sizes:
        raise InvalidInputError(f"need at least {min_sizes} estimates")
    sizes = [e.n for e in estimates]
    if len(set(sizes)) != len(sizes):
        raise InvalidInputError("sizes must be distinct")
    if any(e.n < 2 for e in estimates):
        raise InvalidInputError("every size must be >= 2")
    first = estimates[0].measure
    if any(e.measure != first for e in estimates):
        raise InvalidInputError("estimates must share one measure")
    return sorted(estimates, key=lambda e: e.n)


def _bootstrap_means(estimates, resamples: int, rng) -> np.ndarray:
    """Matrix of resampled means, one row per estimate, or None.

    Falls back to None when the inputs carry no per-replica samples; that
    path is only legitimate for deterministic inputs (stderr 0 everywhere).
    """
    if any(e.samples is None for e in estimates):
        if any(e.stderr != 0.0 for e in estimates):
            raise InvalidInputError(
                "bootstrap needs per-replica samples unless every stderr is 0"
            )
        return None
    mat = np.empty((len(estimates), resamples))
    for i, e in enumerate(estimates):
        idx = rng.integers(0, e.samples.size, size=(resamples, e.samples.size))
        mat[i] = e.samples[idx].mean(axis=1)
    return mat


def _finish_theta(method, raw, boot_values, estimates) -> ThetaEstimate:
    if raw <= 0.0:
        raise InvariantViolationError(f"estimated exponent {raw} is not positive")
    value = min(raw, 1.0)
    if boot_values is None:
        lo = hi = value
    else:
        lo, hi = np.percentile(boot_values, [2.5, 97.5])
        lo = min(float(lo), value)
        hi = min(max(float(hi), value), 1.0)
    return ThetaEstimate(
        beta=estimates[0].measure.beta,
        method=method,
        value=float(value),
        ci_low=float(lo),
        ci_high=float(hi),
        sizes_used=tuple(e.n for e in estimates),
        replicas=min(e.replicas for e in estimates),
        seed=estimates[0].seed,
    )


def _boot_rng(estimates, resamples):
    parts = [_BOOT_TAG, resamples]
    for e in estimates:
        parts.extend((e.seed, e.n, e.replicas))
    return np.random.Generator(np.random.PCG64(stream_seed(*parts)))


def theta_inf(estimates, resamples: int = _RESAMPLES, bootstrap_seed: int | None = None):
    """Exponent via min over n of log(mean)/log(n).

    The minimum over a finite ladder is an upper bound for the limiting
    exponent, so this estimator is biased upward at finite n; it is exact
    on inputs of the form mean = n^theta.
    """
    ests = _check_ladder(estimates, 1)
    logs = np.log([e.mean for e in ests])
    logn = np.log([e.n for e in ests])
    raw = float(np.min(logs / logn))
    rng = (
        np.random.Generator(np.random.PCG64(bootstrap_seed))
        if bootstrap_seed is not None
        else _boot_rng(ests, resamples)
    )
    mat = _bootstrap_means(ests, resamples, rng)
    boot = None if mat is None else np.min(np.log(mat) / logn[:, None], axis=0)
    return _finish_theta("inf_formula", raw, boot, ests)


def _ols_slope(logn: np.ndarray, logy: np.ndarray):
    xc = logn - logn.mean()
    return (xc @ logy) / (xc @ xc)


def theta_slope(estimates, resamples: int = _RESAMPLES, bootstrap_seed: int | None = None):
    """Exponent via least-squares slope of log(mean) against log(n).

    Complements the inf formula, which is upper-biased on finite ladders;
    needs at least three distinct sizes.
    """
    ests = _check_ladder(estimates, 3)
    logn = np.log([float(e.n) for e in ests])
    raw = float(_ols_slope(logn, np.log([e.mean for e in ests])))
    rng = (
        np.random.Generator(np.random.PCG64(bootstrap_seed))
        if bootstrap_seed is not None
        else _boot_rng(ests, resamples)
    )
    mat = _bootstrap_means(ests, resamples, rng)
    boot = None
    if mat is not None:
        logy = np.log(mat)
        xc = logn - logn.mean()
        boot = (xc @ logy) / (xc @ xc)
    return _finish_theta("ols_slope", raw, boot, ests)


def monotone_sweep(betas, n: int, dim: int, replicas: int, seed: int):
    """Coupled corner-distance estimates along an ascending beta grid.

    Every replica is checked pathwise: adding edges can only shrink
    distances, so a corner distance that grows along the grid is a sampler
    bug and raises immediately.  Returns the per-beta estimates and a
    paired-difference report.
    """
    betas = [float(b) for b in betas]
    if replicas < 2:
        raise InvalidInputError("need at least 2 replicas")
    if not betas:
        raise InvalidInputError("betas must be non-empty")
    vals = np.empty((len(betas), replicas), dtype=float)
    for r in range(replicas):
        configs = coupled_sweep(betas, n, dim, seed, r)
        dists = [corner_distance(c) for c in configs]
        for i in range(len(dists) - 1):
            if dists[i + 1] > dists[i]:
                raise InvariantViolationError(
                    f"replica {r}: distance rose from {dists[i]} to {dists[i + 1]} "
                    f"between beta={betas[i]} and beta={betas[i + 1]}"
                )
        vals[:, r] = [d + 1.0 for d in dists]
    estimates = []
    for i, b in enumerate(betas):
        row = vals[i]
        estimates.append(
            LambdaEstimate(
                n=n,
                dim=dim,
                measure=MeasureSpec(kind="plain", beta=b),
                mean=float(row.mean()),
                stderr=float(row.std(ddof=1) / math.sqrt(replicas)),
                replicas=replicas,
                pair_policy="corner",
                seed=int(seed),
                samples=row,
            )
        )
    diffs = vals[:-1] - vals[1:]
    report = SweepReport(
        betas=tuple(betas),
        n=n,
        dim=dim,
        replicas=replicas,
        seed=int(seed),
        diff_means=tuple(float(d.mean()) for d in diffs),
        diff_stderrs=tuple(float(d.std(ddof=1) / math.sqrt(replicas)) for d in diffs),
    )
    return estimates, report


def continuity_telescope(
    beta: float, eps: float, n_exponent: int, replicas: int, seed: int
):
    """Level-by-level log-distance drop when beta rises to beta + eps.

    On the box of side 2^N (d = 1), edges are classed by dyadic length
    scale.  Level k draws lengths below 2^k at beta and the rest at
    beta + eps; sprinkling one class moves level k to level k - 1, so the
    chain shares its base randomness all the way down.  The returned terms
    log E_k[D] - log E_{k-1}[D] for k in {2..N} sum to the log-distance
    gap between the pure-beta and pure-(beta+eps) measures.
    """
    if not 2 <= n_exponent <= 14:
        raise InvalidInputError("n_exponent must lie in [2, 14]")
    if not 0.0 <= eps <= 1.0:
        raise InvalidInputError("eps must lie in [0, 1]")
    if beta < 0:
        raise InvalidInputError("beta must be >= 0")
    if replicas < 2:
        raise InvalidInputError("need at least 2 replicas")
    n = 2 ** n_exponent
    spec_top = MeasureSpec(
        kind="mixed", beta=float(beta), beta2=float(beta) + float(eps), k_threshold=n_exponent
    )
    # dists[k - 1] holds the per-replica corner distances at level k
    dists = np.empty((n_exponent, replicas), dtype=float)
    for r in range(replicas):
        omega = sample_fast(spec_top, n, 1, seed, r)
        dists[n_exponent - 1, r] = corner_distance(omega)
        for k in range(n_exponent, 1, -1):
            omega = chi_augment(omega, eps, k, seed)
            dists[k - 2, r] = corner_distance(omega)
    level_means = dists.mean(axis=1)
    rng = np.random.Generator(np.random.PCG64(stream_seed(_BOOT_TAG, int(seed), n_exponent)))
    idx = rng.integers(0, replicas, size=(_RESAMPLES, replicas))
    boot_means = dists[:, idx].mean(axis=2)  # (levels, resamples)
    terms = []
    for k in range(2, n_exponent + 1):
        ratio = float(math.log(level_means[k - 1]) - math.log(level_means[k - 2]))
        boot = np.log(boot_means[k - 1]) - np.log(boot_means[k - 2])
        terms.append(TelescopeTerm(k=k, log_ratio=ratio, stderr=float(boot.std(ddof=1))))
    return terms
