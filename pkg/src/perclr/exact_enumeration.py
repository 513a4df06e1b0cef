"""Exact expectations over all 2^m configurations of a small edge set.

Verifies the derivative identity

    d/dbeta E_beta[f] = sum_e p'(beta,e) * E_beta[f(omega with e open) - f(omega with e closed)]

against finite differences on finite models: a vertex set, always-open
forced edges, and at most 24 optional edges whose probabilities are
1 - exp(-beta J(e)).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .errors import CapacityError, InvalidInputError

__all__ = [
    "FiniteModel",
    "Functional",
    "RussoReport",
    "exact_expectation",
    "russo_derivative",
    "verify_russo",
    "lambda_small_beta_derivative",
    "path_box_model",
    "distance_functional",
    "diameter_functional",
    "cutpoint_functional",
]

_ENUMERATION_GUARD = 24


@dataclass(frozen=True)
class FiniteModel:
    """Small graph with forced edges plus beta-parametrized optional edges."""

    vertices: tuple
    optional_edges: tuple
    forced_edges: tuple
    dim: int = 1

    def __post_init__(self):
        if len(self.optional_edges) > _ENUMERATION_GUARD:
            raise CapacityError(
                f"{len(self.optional_edges)} optional edges exceed the "
                f"enumeration guard of {_ENUMERATION_GUARD}"
            )
        vs = set(self.vertices)
        for u, v in list(self.optional_edges) + list(self.forced_edges):
            if u not in vs or v not in vs:
                raise InvalidInputError(f"edge ({u},{v}) uses unknown vertices")
        for u, v in self.optional_edges:
            delta = kernel.canonical_displacement(u, v, self.dim)
            if max(delta) < 2:
                raise InvalidInputError(
                    f"optional edge ({u},{v}) is nearest-neighbor; its "
                    "probability is pinned at 1 and cannot carry beta"
                )

    def edge_probs(self, beta: float) -> np.ndarray:
        return np.array(
            [kernel.connection_prob(beta, u, v, self.dim) for u, v in self.optional_edges]
        )

    def edge_prob_derivatives(self, beta: float) -> np.ndarray:
        return np.array(
            [
                kernel.connection_prob_derivative(beta, u, v, self.dim)
                for u, v in self.optional_edges
            ]
        )


@dataclass(frozen=True)
class Functional:
    """Total bounded function of the optional-edge assignment."""

    name: str
    evaluate: object = field(compare=False)  # callable(model, open_optional_edges) -> float


def _model_adjacency(model: FiniteModel, open_edges):
    adj = {v: [] for v in model.vertices}
    for u, v in list(model.forced_edges) + list(open_edges):
        adj[u].append(v)
        adj[v].append(u)
    return adj


def _bfs(adj, source):
    dist = {source: 0}
    q = deque((source,))
    while q:
        x = q.popleft()
        for y in adj[x]:
            if y not in dist:
                dist[y] = dist[x] + 1
                q.append(y)
    return dist


def distance_functional(a, b) -> Functional:
    """f = D(a, b) on the model graph; raises if the endpoints disconnect."""

    def evaluate(model, open_edges):
        dist = _bfs(_model_adjacency(model, open_edges), a)
        if b not in dist:
            raise InvalidInputError(
                f"D({a},{b}) undefined: graph disconnected without forced backbone"
            )
        return float(dist[b])

    return Functional(name=f"D({a},{b})", evaluate=evaluate)


def diameter_functional() -> Functional:
    def evaluate(model, open_edges):
        adj = _model_adjacency(model, open_edges)
        best = 0
        for s in model.vertices:
            dist = _bfs(adj, s)
            if len(dist) != len(model.vertices):
                raise InvalidInputError("diameter undefined on disconnected model")
            best = max(best, max(dist.values()))
        return float(best)

    return Functional(name="diameter", evaluate=evaluate)


def _line_coord(v):
    return int(v) if isinstance(v, (int, np.integer)) else int(v[0])


def cutpoint_functional() -> Functional:
    """d=1 cut-point count over the model's sorted vertex line."""

    def evaluate(model, open_edges):
        pts = sorted(_line_coord(v) for v in model.vertices)
        edges = [
            tuple(sorted((_line_coord(u), _line_coord(v))))
            for u, v in list(model.forced_edges) + list(open_edges)
        ]
        count = 0
        for w in pts[1:-1]:
            if not any(a < w < b for a, b in edges):
                count += 1
        return float(count)

    return Functional(name="cutpoints", evaluate=evaluate)


def functional_table(model: FiniteModel, f: Functional) -> np.ndarray:
    """f evaluated on every optional-edge assignment, indexed by bit mask."""
    m = len(model.optional_edges)
    table = np.empty(2 ** m, dtype=np.float64)
    for mask in range(2 ** m):
        open_edges = [e for j, e in enumerate(model.optional_edges) if mask >> j & 1]
        table[mask] = f.evaluate(model, open_edges)
    return table


def _factor_matrix(model: FiniteModel, beta: float) -> np.ndarray:
    """factors[j, mask] = p_j if bit j set else 1-p_j."""
    m = len(model.optional_edges)
    probs = model.edge_probs(beta)
    masks = np.arange(2 ** m, dtype=np.int64)
    bits = (masks[None, :] >> np.arange(m)[:, None]) & 1
    return np.where(bits == 1, probs[:, None], 1.0 - probs[:, None])


def exact_expectation(
    model: FiniteModel, f: Functional, beta: float, table: np.ndarray | None = None
) -> float:
    """E_beta[f] as the exact 2^m-term sum."""
    if beta < 0:
        raise InvalidInputError("beta must be >= 0")
    if table is None:
        table = functional_table(model, f)
    m = len(model.optional_edges)
    if m == 0:
        return float(table[0])
    weights = _factor_matrix(model, beta).prod(axis=0)
    return float(weights @ table)


def russo_derivative(
    model: FiniteModel, f: Functional, beta: float, table: np.ndarray | None = None
) -> float:
    """Analytic d/dbeta E_beta[f] via the pivotal-difference sum."""
    if beta < 0:
        raise InvalidInputError("beta must be >= 0")
    if table is None:
        table = functional_table(model, f)
    m = len(model.optional_edges)
    if m == 0:
        return 0.0
    factors = _factor_matrix(model, beta)
    derivs = model.edge_prob_derivatives(beta)
    masks = np.arange(2 ** m, dtype=np.int64)
    total = 0.0
    for j in range(m):
        w_minus = np.ones(2 ** m)
        for i in range(m):
            if i != j:
                w_minus *= factors[i]
        bit = (masks >> j) & 1
        e_plus = float(np.sum(table * w_minus * (bit == 1)))
        e_minus = float(np.sum(table * w_minus * (bit == 0)))
        total += derivs[j] * (e_plus - e_minus)
    return total


@dataclass(frozen=True)
class RussoReport:
    beta: float
    h: float
    mode: str  # central or forward
    analytic: float
    finite_diff: float
    abs_error: float


def verify_russo(
    model: FiniteModel, f: Functional, beta: float, h: float = 1e-4
) -> RussoReport:
    """Compare the analytic derivative with a finite difference of step h.

    Uses the central quotient when beta - h >= 0, else falls back to the
    forward quotient (beta >= 0 is a boundary and the identity concerns the
    right-hand derivative there).
    """
    if h <= 0:
        raise InvalidInputError("h must be > 0")
    table = functional_table(model, f)
    analytic = russo_derivative(model, f, beta, table=table)
    if beta - h >= 0:
        fd = (
            exact_expectation(model, f, beta + h, table=table)
            - exact_expectation(model, f, beta - h, table=table)
        ) / (2 * h)
        mode = "central"
    else:
        fd = (
            exact_expectation(model, f, beta + h, table=table)
            - exact_expectation(model, f, beta, table=table)
        ) / h
        mode = "forward"
    return RussoReport(
        beta=beta,
        h=h,
        mode=mode,
        analytic=analytic,
        finite_diff=fd,
        abs_error=abs(analytic - fd),
    )


def lambda_small_beta_derivative(n: int) -> float:
    """d/dbeta at beta=0 of the d=1 corner-distance expectation plus one.

    At beta=0 the configuration is the bare path, a single opened edge of
    length k saves k-1 hops, and there are n-k independent candidates per
    length, giving exactly -sum_{k=2}^{n-1} (n-k) J(k) (k-1).  Divided by
    n log n this tends to -1 from above as n grows.
    """
    if n < 3:
        raise InvalidInputError("need n >= 3")
    k = np.arange(2, n, dtype=np.float64)
    J = np.log1p(1.0 / (k * k - 1.0))
    return float(-np.sum((n - k) * J * (k - 1.0)))


def path_box_model(n: int, dim: int = 1) -> FiniteModel:
    """d=1 box: forced path 0..n-1, optional edges all pairs of length >= 2."""
    if dim != 1:
        raise InvalidInputError("box models are d=1 here")
    vertices = tuple(range(n))
    forced = tuple((i, i + 1) for i in range(n - 1))
    optional = tuple(
        (i, j) for i in range(n) for j in range(i + 2, n)
    )
    return FiniteModel(vertices=vertices, optional_edges=optional, forced_edges=forced, dim=1)


def random_finite_model(rng, max_vertices: int = 8, max_optional: int = 8):
    """Random d=1 model plus functional, for the randomized derivative suite.

    Vertices are distinct integers, forced edges chain them in sorted order
    (keeping every functional total), optional edges are a random subset of
    the pairs at distance >= 2.
    """
    n_v = rng.randint(3, max_vertices)
    vertices = tuple(sorted(rng.sample(range(0, 14), n_v)))
    forced = tuple((a, b) for a, b in zip(vertices, vertices[1:]))
    candidates = [
        (a, b)
        for i, a in enumerate(vertices)
        for b in vertices[i + 1:]
        if b - a >= 2
    ]
    rng.shuffle(candidates)
    m = rng.randint(1, min(max_optional, len(candidates))) if candidates else 0
    optional = tuple(sorted(candidates[:m]))
    model = FiniteModel(vertices=vertices, optional_edges=optional, forced_edges=forced, dim=1)
    choice = rng.randrange(3)
    if choice == 0:
        a, b = rng.sample(vertices, 2)
        f = distance_functional(a, b)
    elif choice == 1:
        f = diameter_functional()
    else:
        f = cutpoint_functional()
    return model, f


def default_russo_suite(count: int = 50, seed: int = 20260816):
    """The fixed randomized suite used by tests and the verification CLI."""
    import random

    rng = random.Random(seed)
    suite = []
    for i in range(count):
        model, f = random_finite_model(rng)
        suite.append((f"model-{i:03d}-{f.name}", model, f))
    return suite
