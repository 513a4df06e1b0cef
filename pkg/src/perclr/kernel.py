"""Kernel integral J(u,v), connection probabilities and their beta-derivatives.

The model connects distinct lattice sites u, v with probability
p(beta, {u,v}) = 1 - exp(-beta * J(u,v)) where J is the double integral of
||x - y||_2^(-2d) over the unit boxes attached to u and v.  Touching boxes
(||u-v||_inf <= 1) make the integrand non-integrable, so nearest-neighbor
edges (diagonals included) are structurally always open.

In d=1 the integral has the closed form J(k) = log(k^2/(k^2-1)), validated
in the test suite against direct 2-D quadrature.  In d>=2 the box-pair
integral is reduced by the substitution z = y - x to

    J(delta) = integral over [-1,1]^d of prod_i (1-|z_i|) * ||delta+z||_2^(-2d) dz

(the hat factors are the densities of the per-coordinate differences) and
evaluated orthant-by-orthant with adaptive quadrature.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy import integrate

from .errors import InvalidInputError, NumericError

__all__ = [
    "KernelValue",
    "DegreeEstimate",
    "canonical_displacement",
    "kernel_integral",
    "connection_prob",
    "connection_prob_derivative",
    "block_kernel_sum",
    "expected_degree",
    "one_dim_kernel",
    "one_dim_probs",
    "save_kernel_cache",
    "load_kernel_cache",
]

QUAD_ABSTOL = 1e-10


@dataclass(frozen=True)
class KernelValue:
    """Value of J(u,v); ``exact`` marks closed forms, else quadrature."""

    value: float
    exact: bool
    quad_error: float = 0.0

    def __post_init__(self):
        if self.value < 0 or self.quad_error < 0:
            raise InvalidInputError("kernel value and error bound must be >= 0")


@dataclass(frozen=True)
class DegreeEstimate:
    """Expected degree of the origin with a truncation tail bound."""

    value: float
    tail_bound: float
    radius: int


def _as_coords(p, dim: int):
    coords = (p,) if isinstance(p, (int, np.integer)) else tuple(int(c) for c in p)
    if len(coords) != dim:
        raise InvalidInputError(f"point {p!r} does not have dimension {dim}")
    return coords


def canonical_displacement(u, v, dim: int) -> tuple:
    """Reduce v - u by reflections and coordinate permutations.

    The kernel depends on the displacement only through the multiset of
    absolute coordinates, so the canonical form is the sorted tuple of
    |v_i - u_i|.  Used as the cache key.
    """
    cu, cv = _as_coords(u, dim), _as_coords(v, dim)
    return tuple(sorted(abs(b - a) for a, b in zip(cu, cv)))


def one_dim_kernel(k: int) -> float:
    """Closed form J(k) = log(k^2/(k^2-1)) for d=1 displacements k >= 2."""
    if k < 2:
        raise InvalidInputError("closed form needs |u-v| >= 2")
    # log1p keeps full precision for large k where k^2/(k^2-1) -> 1
    return math.log1p(1.0 / (k * k - 1.0))


def one_dim_probs(beta: float, ks: np.ndarray) -> np.ndarray:
    """Vectorized p(beta,k) = 1 - ((k^2-1)/k^2)^beta for d=1, k >= 2."""
    ks = np.asarray(ks, dtype=np.float64)
    return -np.expm1(beta * np.log1p(-1.0 / (ks * ks)))


def _orthant_integrand_factory(delta, signs, dim):
    def f(*z):
        w = 1.0
        s = 0.0
        for zi, di, si in zip(z, delta, signs):
            w *= 1.0 - zi
            c = di + si * zi
            s += c * c
        return w * s ** (-dim)  # ||.||_2^(-2d) = (sum of squares)^(-d)

    return f


def _quadrature_kernel(delta: tuple, dim: int) -> KernelValue:
    """Adaptive quadrature of the reduced d-dimensional hat-weighted integral."""
    orthants = list(product((1.0, -1.0), repeat=dim))
    per_orthant_tol = QUAD_ABSTOL / (2 * len(orthants))
    total = 0.0
    err = 0.0
    for signs in orthants:
        f = _orthant_integrand_factory(delta, signs, dim)
        val, e = integrate.nquad(
            f,
            [(0.0, 1.0)] * dim,
            opts={"epsabs": per_orthant_tol, "epsrel": 1e-12},
        )
        total += val
        err += e
    if err > QUAD_ABSTOL:
        raise NumericError(
            f"quadrature error {err:.3e} exceeds {QUAD_ABSTOL:.1e} for delta={delta}",
            partial=total,
        )
    return KernelValue(value=total, exact=False, quad_error=err)


# displacement -> KernelValue, keyed by (dim, canonical delta).  Insertion is
# idempotent (every writer computes the same value), so plain dict assignment
# is race-free under concurrent use.
_KERNEL_CACHE: dict = {}


def kernel_integral(u, v, dim: int) -> KernelValue:
    """J(u,v) for distinct lattice points; +inf on touching boxes.

    Results are cached by canonical displacement; repeated queries return
    bit-identical values.
    """
    delta = canonical_displacement(u, v, dim)
    if all(c == 0 for c in delta):
        raise InvalidInputError("kernel integral requires u != v")
    cached = _KERNEL_CACHE.get((dim, delta))
    if cached is not None:
        return cached
    if max(delta) <= 1:
        kv = KernelValue(value=math.inf, exact=True)
    elif dim == 1:
        kv = KernelValue(value=one_dim_kernel(delta[0]), exact=True)
    else:
        kv = _quadrature_kernel(delta, dim)
    _KERNEL_CACHE[(dim, delta)] = kv
    return kv


def connection_prob(beta: float, u, v, dim: int) -> float:
    """p(beta,{u,v}) = 1 - exp(-beta J); exactly 1 on nearest neighbors."""
    if beta < 0:
        raise InvalidInputError("beta must be >= 0")
    kv = kernel_integral(u, v, dim)
    if math.isinf(kv.value):
        return 1.0
    return -math.expm1(-beta * kv.value)


def connection_prob_derivative(beta: float, u, v, dim: int) -> float:
    """d/dbeta p(beta,e) = J e^(-beta J) for non-nearest edges."""
    if beta < 0:
        raise InvalidInputError("beta must be >= 0")
    kv = kernel_integral(u, v, dim)
    if math.isinf(kv.value):
        raise InvalidInputError(
            "derivative undefined on nearest-neighbor edges (probability pinned at 1)"
        )
    return kv.value * math.exp(-beta * kv.value)


def block_kernel_sum(u, v, n: int, dim: int) -> float:
    """Sum of J(x,y) over the side-n blocks at u and v.

    Block V_u^n is the cube of side n with corner n*u.  By rescaling the
    continuum integral the sum equals J(u,v) of the unscaled pair, which is
    the model's self-similarity.
    """
    if n < 1:
        raise InvalidInputError("block side must be >= 1")
    cu, cv = _as_coords(u, dim), _as_coords(v, dim)
    if max(abs(b - a) for a, b in zip(cu, cv)) < 2:
        raise InvalidInputError("blocks must be non-adjacent (||u-v||_inf >= 2)")
    offsets = list(product(range(n), repeat=dim))
    total = 0.0
    for wx in offsets:
        x = tuple(n * c + o for c, o in zip(cu, wx))
        for wy in offsets:
            y = tuple(n * c + o for c, o in zip(cv, wy))
            total += kernel_integral(x, y, dim).value
    return total


_ONE_DIM_DEGREE_RADIUS = 10 ** 6


def expected_degree(beta: float, dim: int, radius: int | None = None) -> DegreeEstimate:
    """E[deg(origin)] = (3^d - 1) + sum over ||w||_inf >= 2 of p(beta,{0,w}).

    The series is truncated at ``radius`` in the inf-norm; the dropped tail
    is bounded through p <= beta*J <= beta*(||w||-sqrt(d))^(-2d) and returned,
    never silently discarded.
    """
    if beta < 0:
        raise InvalidInputError("beta must be >= 0")
    nn = 3 ** dim - 1
    if dim == 1:
        R = radius or _ONE_DIM_DEGREE_RADIUS
        k = np.arange(2, R + 1, dtype=np.float64)
        total = nn + 2.0 * float(np.sum(one_dim_probs(beta, k)))
        # sum_{k>R} J(k) <= sum 1/(k^2-1) telescopes to (1/R + 1/(R+1))/2
        tail = beta * (1.0 / R + 1.0 / (R + 1))
        return DegreeEstimate(value=total, tail_bound=tail, radius=R)
    R = radius or 20
    total = float(nn)
    for w in product(range(-R, R + 1), repeat=dim):
        if max(abs(c) for c in w) < 2:
            continue
        total += connection_prob(beta, (0,) * dim, w, dim)
    tail = beta * _shell_tail_bound(R, dim)
    return DegreeEstimate(value=total, tail_bound=tail, radius=R)


def _shell_tail_bound(R: int, dim: int) -> float:
    """sum_{||w||_inf > R} J(w) bounded shell by shell via the bracket bound."""
    sq = math.sqrt(dim)
    total = 0.0
    r = R + 1
    while True:
        count = (2 * r + 1) ** dim - (2 * r - 1) ** dim
        term = count * (r - sq) ** (-2 * dim)
        total += term
        if term < 1e-18 * max(total, 1.0):
            return total
        r += 1


def save_kernel_cache(path) -> int:
    """Persist quadrature-backed cache entries as CSV; returns row count."""
    rows = [
        (dim, " ".join(map(str, delta)), kv.value, kv.quad_error)
        for (dim, delta), kv in sorted(_KERNEL_CACHE.items())
        if not kv.exact
    ]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dim", "displacement", "value", "quad_error"])
        w.writerows(rows)
    return len(rows)


def load_kernel_cache(path) -> int:
    """Load persisted quadrature values; returns number of entries added."""
    added = 0
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            dim = int(row["dim"])
            delta = tuple(int(c) for c in row["displacement"].split())
            key = (dim, delta)
            if key not in _KERNEL_CACHE:
                _KERNEL_CACHE[key] = KernelValue(
                    value=float(row["value"]),
                    exact=False,
                    quad_error=float(row["quad_error"]),
                )
                added += 1
    return added
