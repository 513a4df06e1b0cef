"""Configuration samplers for the percolation measures.

Provides the plain product measure P_beta, the mixed measure (edges in
length classes up to 2^k - 1 use beta, longer ones beta2), the continuum
Poisson construction, a Harris-coupled monotone sweep across a beta grid,
and the chi-augmentation that sprinkles one length class with an
independent epsilon-stream.

Randomness comes from two sources with distinct roles:

* ``edge_uniform`` is a stateless counter-based function (splitmix64 chain
  over the canonical edge coordinates) so per-edge uniforms exist lazily
  without materializing the quadratically many potential edges; it backs
  ``sample_direct`` and the coupled sweep's conditional uniforms.
* Class-count sampling in ``sample_fast``/``chi_augment`` uses a seeded
  numpy PCG64 stream per (seed, replica) since only the law matters there,
  not per-edge reproducibility.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import kernel
from .errors import CapacityError, InvalidInputError

__all__ = [
    "MeasureSpec",
    "Configuration",
    "edge_uniform",
    "sample_direct",
    "sample_fast",
    "sample_continuum",
    "coupled_sweep",
    "chi_augment",
    "config_to_record",
    "record_to_config",
]

_MASK64 = (1 << 64) - 1
_DIRECT_PAIR_GUARD = 10 ** 8
# fixed tags separating pseudorandom domains that must never share values
_CHI_TAG = 0x9D8F3CEB01D6A0A7
_SWEEP_TAG = 0x5851F42D4C957F2D


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D49BE3242A879B) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def stream_seed(*parts: int) -> int:
    """Fold integers into one 64-bit stream seed (order-sensitive)."""
    h = 0x243F6A8885A308D3
    for p in parts:
        h = _splitmix64(h ^ (int(p) & _MASK64))
    return h


def _canonical_edge(e):
    (a, b) = e
    ta = (a,) if isinstance(a, (int, np.integer)) else tuple(int(c) for c in a)
    tb = (b,) if isinstance(b, (int, np.integer)) else tuple(int(c) for c in b)
    if ta == tb:
        raise InvalidInputError("edge endpoints must be distinct")
    return (ta, tb) if ta < tb else (tb, ta)


def edge_uniform(seed: int, e) -> float:
    """Stateless uniform in [0,1) attached to (seed, canonical edge).

    Symmetric in endpoint order and identical across repeated queries,
    which is exactly the Harris-coupling contract for the per-edge U_e.
    """
    u, v = _canonical_edge(e)
    h = _splitmix64(int(seed) & _MASK64)
    for c in u + v:
        h = _splitmix64(h ^ (c & _MASK64))
    return (h >> 11) * (2.0 ** -53)


@dataclass(frozen=True)
class MeasureSpec:
    """Sampling law descriptor: plain P_beta, mixed, or continuum-coupled."""

    kind: str
    beta: float
    beta2: float | None = None
    k_threshold: int | None = None

    def __post_init__(self):
        if self.kind not in ("plain", "mixed", "continuum"):
            raise InvalidInputError(f"unknown measure kind {self.kind!r}")
        if self.beta < 0:
            raise InvalidInputError("beta must be >= 0")
        if self.kind == "mixed":
            if self.beta2 is None or self.beta2 < 0:
                raise InvalidInputError("mixed measure needs beta2 >= 0")
            if self.k_threshold is None or self.k_threshold < 1:
                raise InvalidInputError("mixed measure needs k_threshold >= 1")
        elif self.beta2 is not None or self.k_threshold is not None:
            raise InvalidInputError("beta2/k_threshold only apply to the mixed kind")

    def beta_for_length(self, length: int) -> float:
        """Parameter applied to an edge of inf-norm length >= 2."""
        if self.kind != "mixed":
            return self.beta
        return self.beta if length <= 2 ** self.k_threshold - 1 else self.beta2


@dataclass(frozen=True)
class Configuration:
    """One sampled edge set on the box {0..n-1}^d.

    Nearest-neighbor edges (inf-norm 1) are implicit and always present;
    ``long_edges`` holds canonical coordinate-tuple pairs with length >= 2.
    """

    box_side: int
    dim: int
    long_edges: frozenset
    measure: MeasureSpec
    seed: int
    replica: int

    def __post_init__(self):
        if self.box_side < 1 or self.dim < 1:
            raise InvalidInputError("box_side and dim must be >= 1")

    def edge_count(self) -> int:
        return len(self.long_edges)


def _check_inside_box(edge, n, dim):
    for pt in edge:
        if len(pt) != dim or any(c < 0 or c >= n for c in pt):
            raise InvalidInputError(f"point {pt} outside box of side {n}")


def _iter_long_pairs(n: int, dim: int):
    """All unordered in-box pairs at inf-norm distance >= 2."""
    pts = list(product(range(n), repeat=dim))
    for i, u in enumerate(pts):
        for v in pts[i + 1:]:
            if max(abs(a - b) for a, b in zip(u, v)) >= 2:
                yield u, v


def _guard_direct(n: int, dim: int):
    if n ** (2 * dim) > _DIRECT_PAIR_GUARD:
        raise CapacityError(
            f"box side {n} in d={dim} exceeds the exhaustive-pair guard; "
            "use sample_fast"
        )


def sample_direct(spec: MeasureSpec, n: int, dim: int, seed: int, replica: int) -> Configuration:
    """Exhaustive per-pair sampler: edge open iff its lazy uniform <= p."""
    _guard_direct(n, dim)
    if spec.kind == "continuum":
        return sample_continuum(spec.beta, n, dim, seed, replica)
    stream = (int(seed) ^ int(replica)) & _MASK64
    edges = []
    for u, v in _iter_long_pairs(n, dim):
        length = max(abs(a - b) for a, b in zip(u, v))
        beta = spec.beta_for_length(length)
        if beta == 0.0:
            continue
        p = -math.expm1(-beta * kernel.kernel_integral(u, v, dim).value)
        if edge_uniform(stream, (u, v)) <= p:
            edges.append((u, v))
    return Configuration(n, dim, frozenset(edges), spec, int(seed), int(replica))


def _pick_distinct(rng: np.random.Generator, m: int, c: int) -> np.ndarray:
    """c distinct integers from range(m), cheap for the typical c << m."""
    if c >= m:
        return np.arange(m)
    if c > m // 8:
        return rng.permutation(m)[:c]
    chosen = set()
    while len(chosen) < c:
        for x in rng.integers(0, m, size=c - len(chosen)):
            chosen.add(int(x))
    return np.fromiter(chosen, dtype=np.int64)


def _fast_one_dim(spec, n, rng):
    ks = np.arange(2, n, dtype=np.int64)
    if ks.size == 0:
        return []
    betas = np.fromiter(
        (spec.beta_for_length(int(k)) for k in ks), dtype=np.float64, count=ks.size
    )
    # p(beta,k) = 1 - ((k^2-1)/k^2)^beta, stable via expm1/log1p; beta=0 -> 0
    probs = -np.expm1(betas * np.log1p(-1.0 / (ks.astype(np.float64) ** 2)))
    slots = n - ks
    counts = rng.binomial(slots, probs)
    edges = []
    for k, m, c in zip(ks, slots, counts):
        if c == 0:
            continue
        starts = _pick_distinct(rng, int(m), int(c))
        edges.extend(((int(s),), (int(s) + int(k),)) for s in starts)
    return edges


def _displacement_classes(n, dim):
    """Half-space displacement representatives covering each unordered pair once."""
    zero = (0,) * dim
    for dz in product(range(-(n - 1), n), repeat=dim):
        if dz <= zero:  # keep the lexicographically positive half
            continue
        if max(abs(c) for c in dz) < 2:
            continue
        yield dz


def _class_edges(rng, dz, n, p):
    """Binomial count of open edges in one displacement class, then placement."""
    axis_counts = [n - abs(c) for c in dz]
    m = 1
    for a in axis_counts:
        m *= a
    c = int(rng.binomial(m, p))
    edges = []
    for flat in _pick_distinct(rng, m, c):
        rem = int(flat)
        u = []
        for a in axis_counts:
            u.append(rem % a)
            rem //= a
        u = tuple(ui + max(0, -dc) for ui, dc in zip(u, dz))
        v = tuple(ui + dc for ui, dc in zip(u, dz))
        edges.append((u, v) if u < v else (v, u))
    return edges


def _fast_general(spec, n, dim, rng):
    edges = []
    origin = (0,) * dim
    for dz in _displacement_classes(n, dim):
        length = max(abs(c) for c in dz)
        beta = spec.beta_for_length(length)
        if beta == 0.0:
            continue
        J = kernel.kernel_integral(origin, dz, dim).value
        p = -math.expm1(-beta * J)
        edges.extend(_class_edges(rng, dz, n, p))
    return edges


def sample_fast(spec: MeasureSpec, n: int, dim: int, seed: int, replica: int) -> Configuration:
    """Class-count sampler with the same law as sample_direct.

    d=1 draws a binomial count per distance class and places starts, which
    is O(n + edge count); d>=2 falls back to per-displacement classes.
    Matches sample_direct in distribution, not bit pattern.
    """
    if spec.kind == "continuum":
        return sample_continuum(spec.beta, n, dim, seed, replica)
    rng = np.random.Generator(np.random.PCG64(stream_seed(seed, replica)))
    if dim == 1:
        edges = _fast_one_dim(spec, n, rng)
    else:
        edges = _fast_general(spec, n, dim, rng)
    return Configuration(n, dim, frozenset(edges), spec, int(seed), int(replica))


def sample_continuum(beta: float, n: int, dim: int, seed: int, replica: int) -> Configuration:
    """Poisson construction: u ~ v iff the process puts a point on their box pair.

    Pre-symmetrization each ordered pair carries a Poisson(beta*J/2) count;
    the edge is open when the two ordered counts are not both zero, so
    P(u not~ v) = exp(-beta*J) and the projected law is exactly P_beta.
    Point locations are irrelevant to the lattice projection and skipped.
    """
    if beta < 0:
        raise InvalidInputError("beta must be >= 0")
    _guard_direct(n, dim)
    rng = np.random.Generator(np.random.PCG64(stream_seed(seed, replica)))
    edges = []
    for u, v in _iter_long_pairs(n, dim):
        J = kernel.kernel_integral(u, v, dim).value
        lam = 0.5 * beta * J
        if rng.poisson(lam) + rng.poisson(lam) > 0:
            edges.append((u, v))
    spec = MeasureSpec(kind="continuum", beta=beta)
    return Configuration(n, dim, frozenset(edges), spec, int(seed), int(replica))


def coupled_sweep(betas, n: int, dim: int, seed: int, replica: int):
    """Harris-coupled configurations across an ascending beta grid.

    Sampled once at beta_max, then every realized edge gets a conditional
    uniform V ~ U[0, p_max) and stays open at beta_i iff V <= p(beta_i, e).
    Marginals are each exactly P_beta_i and the edge sets are nested.
    """
    betas = list(betas)
    if betas != sorted(betas):
        raise InvalidInputError("betas must be ascending")
    if any(b < 0 for b in betas):
        raise InvalidInputError("betas must be >= 0")
    if not betas:
        return []
    beta_max = betas[-1]
    base = sample_fast(MeasureSpec(kind="plain", beta=beta_max), n, dim, seed, replica)
    vstream = stream_seed(seed, replica) ^ _SWEEP_TAG
    edge_info = []
    for e in base.long_edges:
        J = kernel.kernel_integral(e[0], e[1], dim).value
        p_max = -math.expm1(-beta_max * J)
        V = edge_uniform(vstream, e) * p_max
        edge_info.append((e, J, V))
    configs = []
    for b in betas:
        if b == 0.0:
            kept = frozenset()
        else:
            kept = frozenset(e for (e, J, V) in edge_info if V <= -math.expm1(-b * J))
        configs.append(
            Configuration(n, dim, kept, MeasureSpec(kind="plain", beta=b), int(seed), int(replica))
        )
    return configs


def chi_augment(omega: Configuration, eps: float, k: int, seed: int) -> Configuration:
    """Sprinkle the length class [2^(k-1), 2^k - 1] with an independent epsilon stream.

    If omega is mixed at threshold k with beta2 = beta + eps, the union
    omega OR chi is distributed as the mixed measure at threshold k-1: the
    sprinkled class moves from parameter beta to beta + eps.
    """
    if eps < 0:
        raise InvalidInputError("eps must be >= 0")
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    m = omega.measure
    if m.kind != "mixed" or m.k_threshold != k:
        raise InvalidInputError("omega must carry a mixed measure at threshold k")
    if not math.isclose(m.beta2, m.beta + eps, rel_tol=0, abs_tol=1e-12):
        raise InvalidInputError("omega's beta2 must equal beta + eps")
    lo, hi = max(2, 2 ** (k - 1)), 2 ** k - 1
    new_measure = MeasureSpec(kind="mixed", beta=m.beta, beta2=m.beta2, k_threshold=k - 1)
    if eps == 0.0 or hi < lo:
        return Configuration(
            omega.box_side, omega.dim, omega.long_edges, new_measure, omega.seed, omega.replica
        )
    rng = np.random.Generator(
        np.random.PCG64(stream_seed(int(seed) ^ _CHI_TAG, k, omega.replica))
    )
    n, dim = omega.box_side, omega.dim
    chi_edges = []
    if dim == 1:
        ks = np.arange(lo, min(hi, n - 1) + 1, dtype=np.int64)
        if ks.size:
            probs = -np.expm1(eps * np.log1p(-1.0 / (ks.astype(np.float64) ** 2)))
            counts = rng.binomial(n - ks, probs)
            for kk, mm, c in zip(ks, n - ks, counts):
                if c:
                    for s in _pick_distinct(rng, int(mm), int(c)):
                        chi_edges.append(((int(s),), (int(s) + int(kk),)))
    else:
        origin = (0,) * dim
        for dz in _displacement_classes(n, dim):
            length = max(abs(c) for c in dz)
            if not (lo <= length <= hi):
                continue
            J = kernel.kernel_integral(origin, dz, dim).value
            p = -math.expm1(-eps * J)
            chi_edges.extend(_class_edges(rng, dz, n, p))
    merged = omega.long_edges | frozenset(chi_edges)
    return Configuration(n, dim, merged, new_measure, omega.seed, omega.replica)


def config_to_record(config: Configuration) -> dict:
    """JSONL-serializable record of one configuration."""
    m = config.measure
    return {
        "measure": {
            "kind": m.kind,
            "beta": m.beta,
            "beta2": m.beta2,
            "k_threshold": m.k_threshold,
        },
        "n": config.box_side,
        "dim": config.dim,
        "seed": config.seed,
        "replica": config.replica,
        "edges": sorted([list(u), list(v)] for u, v in config.long_edges),
    }


def record_to_config(record: dict) -> Configuration:
    m = record["measure"]
    spec = MeasureSpec(
        kind=m["kind"], beta=m["beta"], beta2=m.get("beta2"), k_threshold=m.get("k_threshold")
    )
    edges = frozenset(
        (tuple(int(c) for c in u), tuple(int(c) for c in v)) for u, v in record["edges"]
    )
    return Configuration(
        record["n"], record["dim"], edges, spec, int(record["seed"]), int(record["replica"])
    )


def config_to_jsonl(config: Configuration) -> str:
    return json.dumps(config_to_record(config), sort_keys=True)
