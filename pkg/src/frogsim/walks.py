"""Continuous-time random walk sampling and exact killed-walk series.

Walks jump at rate 1: holding times are Exp(1) and the number of jumps by
time t is Poisson(t). Exact quantities (exit probabilities, heat kernels,
Green functions) are computed by uniformization: Poisson(t)-weighted powers
of the discrete jump chain, truncated with a certified tail bound. All
series run on the ball of radius K around the start, where K is the number
of retained terms, so they are exact for the truncated graph: a walk cannot
leave that ball in K jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graphs import Graph, GraphError, ball
from .rng import Stream
from .stats import Estimate, from_samples

DEFAULT_TOL = 1e-10


class SeriesToleranceError(RuntimeError):
    """Requested tolerance not reachable within the configured term budget."""


class LeakageBudgetError(RuntimeError):
    """Truncation-frontier mass exceeded the caller's leakage budget: the
    horizon is too long for the graph's truncation radius."""


def max_terms_for(t: float) -> int:
    return int(20.0 * t) + 200


@dataclass(frozen=True)
class Trajectory:
    """One particle's path: positions after each jump, within lifespan t."""

    start: int
    jumps: tuple[int, ...]
    lifespan: float
    absorbed: bool = False  # entered a frontier sink and stopped early

    @property
    def jump_count(self) -> int:
        return len(self.jumps)

    @property
    def visited(self) -> frozenset:
        return frozenset((self.start, *self.jumps))


@dataclass
class KilledWalkTable:
    """P_x(tau_{S^c} <= t) for every x in S, with certified truncation."""

    domain: tuple[int, ...]
    horizon: float
    exit_prob: dict[int, float]
    truncation_error: float


def sample_jump_count(t: float, rng: Stream) -> int:
    """Number of jumps by time t: a Poisson(t) draw."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return rng.poisson(t)


def _step(g: Graph, x: int, u: float) -> int:
    row = g.out_neighbors(x)
    if g.weights is None:
        return int(row[int(u * row.size)])
    cw = g.row_cumweights(x)
    return int(row[np.searchsorted(cw, u * cw[-1], side="right")])


def walk_positions(g: Graph, x: int, t: float, rng: Stream):
    """Positions after each jump up to time t; stops at the frontier.

    Returns (jumps list, absorbed flag). Jump times are partial sums of
    Exp(1) draws pulled one at a time, so a shorter horizon reads a prefix
    of the same stream: the lifespan coupling is exact per key.
    """
    jumps: list[int] = []
    if g.is_boundary(x):
        return jumps, True
    cur = x
    elapsed = rng.exponential()
    while elapsed <= t:
        cur = _step(g, cur, rng.uniform())
        jumps.append(cur)
        if g.is_boundary(cur):
            return jumps, True
        elapsed += rng.exponential()
    return jumps, False


def sample_trajectory(g: Graph, x: int, t: float, rng: Stream) -> Trajectory:
    if not (0 <= x < g.vertex_count):
        raise GraphError(f"invalid vertex {x}")
    if t < 0:
        raise ValueError("t must be >= 0")
    jumps, absorbed = walk_positions(g, x, t, rng)
    return Trajectory(x, tuple(jumps), t, absorbed)


def discrete_walk(g: Graph, x: int, steps: int, rng: Stream) -> list[int]:
    """Jump-chain positions X(0..k), truncated at the first frontier hit
    (k = steps when the walk stays interior)."""
    path = [x]
    cur = x
    for _ in range(steps):
        if g.is_boundary(cur):
            break
        cur = _step(g, cur, rng.uniform())
        path.append(cur)
    return path


# ---------------------------------------------------------------------------
# exact series (uniformization)
# ---------------------------------------------------------------------------


def _poisson_weights(t: float, tol: float, max_terms: int | None):
    """Poisson(t) pmf sequence long enough that the remaining tail < tol."""
    if max_terms is None:
        max_terms = max_terms_for(t)
    if t > 700.0:
        raise SeriesToleranceError("uniformization underflows for t > 700")
    pmf = [math.exp(-t)]
    cum = pmf[0]
    k = 0
    while 1.0 - cum >= tol:
        k += 1
        if k > max_terms:
            raise SeriesToleranceError(
                f"poisson tail still {1.0 - cum:.3e} after {max_terms} terms")
        pmf.append(pmf[-1] * t / k)
        cum += pmf[-1]
    return np.array(pmf), 1.0 - cum


def _local_kernel(g: Graph, center: int, k_terms: int, kill: set[int]):
    """CSR jump kernel on ball(center, k_terms), columns into `kill` removed,
    frontier vertices absorbing. Returns (local ids array, kernel, local
    index of center)."""
    dom = sorted(ball(g, center, k_terms) - set(kill))
    local = {v: i for i, v in enumerate(dom)}
    n = len(dom)
    rows, cols, vals = [], [], []
    for i, v in enumerate(dom):
        if g.is_boundary(v):
            rows.append(i)
            cols.append(i)
            vals.append(1.0)
            continue
        nbrs = g.out_neighbors(v)
        if g.weights is None:
            wrow = np.full(nbrs.size, 1.0 / g.pi[v])
        else:
            wrow = g.weights[g.indptr[v]:g.indptr[v + 1]] / g.pi[v]
        for u, w in zip(nbrs, wrow):
            j = local.get(int(u))
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(float(w))
    kernel = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return np.array(dom), kernel, local[center]


def exit_probability_exact(g: Graph, S, t: float, tol: float = DEFAULT_TOL,
                           max_terms: int | None = None) -> KilledWalkTable:
    """Exact P_x(tau_{S^c} <= t) for all x in S.

    The jump chain restricted to S is sub-stochastic (exit mass is killed,
    rows are not renormalized); survival in S is the Poisson-weighted sum of
    its powers applied to the all-ones vector.
    """
    S = sorted(set(int(v) for v in S))
    if not S:
        raise GraphError("S must be non-empty")
    if t < 0:
        raise ValueError("t must be >= 0")
    for v in S:
        if not (0 <= v < g.vertex_count):
            raise GraphError(f"invalid vertex {v}")
        if g.is_boundary(v):
            raise GraphError("S must lie in the interior (frontier is killing)")
    pmf, tail = _poisson_weights(t, tol, max_terms)
    local = {v: i for i, v in enumerate(S)}
    n = len(S)
    rows, cols, vals = [], [], []
    for i, v in enumerate(S):
        nbrs = g.out_neighbors(v)
        if g.weights is None:
            wrow = np.full(nbrs.size, 1.0 / g.pi[v])
        else:
            wrow = g.weights[g.indptr[v]:g.indptr[v + 1]] / g.pi[v]
        for u, w in zip(nbrs, wrow):
            j = local.get(int(u))
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(float(w))
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    v = np.ones(n)
    surv = pmf[0] * v
    for k in range(1, pmf.size):
        v = Q @ v
        surv += pmf[k] * v
    exit_prob = np.clip(1.0 - surv, 0.0, 1.0)
    return KilledWalkTable(tuple(S), t, {v: float(p) for v, p in zip(S, exit_prob)},
                           tail)


def hitting_probability_exact(g: Graph, x: int, y: int, t: float,
                              tol: float = DEFAULT_TOL,
                              max_terms: int | None = None,
                              max_leakage: float | None = None) -> float:
    """Exact P_x(tau_y <= t) via the killed-at-y series.

    Exact for the truncated graph; relative to the untruncated one the value
    undercounts by at most the frontier mass, which `max_leakage` can cap
    (raises LeakageBudgetError beyond it).
    """
    if x == y:
        return 1.0
    if t == 0:
        return 0.0
    pmf, tail = _poisson_weights(t, tol, max_terms)
    dom, Q, ix = _local_kernel(g, x, pmf.size, kill={y})
    v = np.ones(len(dom))
    surv = pmf[0]
    for k in range(1, pmf.size):
        v = Q @ v
        surv += pmf[k] * v[ix]
    if max_leakage is not None:
        row = heat_kernel_row(g, x, t, tol, max_terms)
        if row.boundary_leakage > max_leakage:
            raise LeakageBudgetError(
                f"frontier mass {row.boundary_leakage:.3e} exceeds the "
                f"budget {max_leakage:.3e}")
    return float(min(max(1.0 - surv, 0.0), 1.0 + tail))


@dataclass
class HeatKernelRow:
    """Distribution p_t(x, .) on the local ball, plus leakage diagnostics."""

    source: int
    horizon: float
    support: np.ndarray
    mass: np.ndarray
    boundary_leakage: float
    truncation_error: float

    def prob(self, y: int) -> float:
        hits = np.flatnonzero(self.support == y)
        return float(self.mass[hits[0]]) if hits.size else 0.0

    def row_sum(self) -> float:
        return float(self.mass.sum())


def heat_kernel_row(g: Graph, x: int, t: float, tol: float = DEFAULT_TOL,
                    max_terms: int | None = None) -> HeatKernelRow:
    pmf, tail = _poisson_weights(t, tol, max_terms)
    dom, Q, ix = _local_kernel(g, x, pmf.size, kill=set())
    u = np.zeros(len(dom))
    u[ix] = 1.0
    acc = pmf[0] * u
    QT = Q.T.tocsr()
    for k in range(1, pmf.size):
        u = QT @ u
        acc += pmf[k] * u
    leak = float(acc[g.boundary_mask[dom]].sum())
    return HeatKernelRow(x, t, dom, acc, leak, tail)


def heat_kernel_exact(g: Graph, x: int, y: int, t: float,
                      tol: float = DEFAULT_TOL,
                      max_terms: int | None = None,
                      max_leakage: float | None = None) -> float:
    """p_t(x, y) on the truncated graph, error below tol.

    Raises LeakageBudgetError when the frontier absorbs more mass than
    `max_leakage` allows, instead of silently returning a value distorted
    relative to the untruncated graph.
    """
    if t == 0:
        return 1.0 if x == y else 0.0
    row = heat_kernel_row(g, x, t, tol, max_terms)
    if max_leakage is not None and row.boundary_leakage > max_leakage:
        raise LeakageBudgetError(
            f"frontier mass {row.boundary_leakage:.3e} exceeds the budget "
            f"{max_leakage:.3e}")
    return row.prob(y)


def truncated_green(g: Graph, x: int, y: int, t: float,
                    tol: float = DEFAULT_TOL,
                    max_terms: int | None = None,
                    max_leakage: float | None = None) -> float:
    """G_t(x,y) = integral of p_s(x,y) over s in [0,t].

    Each Poisson weight integrates in closed form to a Gamma tail:
    int_0^t e^{-s} s^k / k! ds = P(Poisson(t) >= k+1), and those tails sum
    to t, giving an exact remainder bound. `max_leakage` caps the admissible
    end-of-horizon frontier mass, as for the heat kernel.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 0.0
    if max_leakage is not None:
        row = heat_kernel_row(g, x, t, tol, max_terms)
        if row.boundary_leakage > max_leakage:
            raise LeakageBudgetError(
                f"frontier mass {row.boundary_leakage:.3e} exceeds the "
                f"budget {max_leakage:.3e}")
    if max_terms is None:
        max_terms = max_terms_for(t)
    if t > 700.0:
        raise SeriesToleranceError("uniformization underflows for t > 700")
    # gamma tail weights g_k = P(Po(t) >= k+1), until sum_{k>K} g_k < tol
    pmf = math.exp(-t)
    cdf = pmf
    gk = [1.0 - cdf]
    consumed = gk[0]
    k = 0
    while t - consumed >= tol:
        k += 1
        if k > max_terms:
            raise SeriesToleranceError(
                f"gamma-tail remainder still {t - consumed:.3e} after {max_terms} terms")
        pmf *= t / k
        cdf += pmf
        gk.append(1.0 - cdf)
        consumed += gk[-1]
    weights = np.array(gk)
    dom, Q, ix = _local_kernel(g, x, weights.size, kill=set())
    iy = np.flatnonzero(dom == y)
    if iy.size == 0:
        return 0.0
    iy = int(iy[0])
    u = np.zeros(len(dom))
    u[ix] = 1.0
    total = weights[0] * u[iy]
    QT = Q.T.tocsr()
    for k in range(1, weights.size):
        u = QT @ u
        total += weights[k] * u[iy]
    return float(total)


# ---------------------------------------------------------------------------
# Monte Carlo range statistics
# ---------------------------------------------------------------------------


@dataclass
class RangeStats:
    restricted: Estimate          # E |R(t) cap (B \ H)|
    range_size: Estimate          # E |R(t)|
    small_range_tail: dict[float, Estimate] = field(default_factory=dict)


def range_statistics(g: Graph, x: int, t: float, replicas: int, rng: Stream,
                     B=None, H=(), alphas=()) -> RangeStats:
    """Sample |R(t)|, its restriction to B minus H, and P(|R| <= alpha t)."""
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    target = None if B is None else (set(B) - set(H))
    sizes = []
    restricted = []
    tails = {a: 0 for a in alphas}
    for r in range(replicas):
        jumps, _ = walk_positions(g, x, t, rng.child("range", r))
        R = set(jumps)
        R.add(x)
        sizes.append(len(R))
        restricted.append(len(R & target) if target is not None
                          else len(R) - len(R & set(H)))
        for a in alphas:
            if len(R) <= a * t:
                tails[a] += 1
    tail_est = {a: Estimate(c / replicas,
                            math.sqrt(max(c / replicas * (1 - c / replicas), 0.0)
                                      / replicas),
                            replicas, rng.key, "mc-binomial")
                for a, c in tails.items()}
    return RangeStats(from_samples(restricted, rng.key),
                      from_samples(sizes, rng.key), tail_est)


def self_intersection_profile(g: Graph, x: int, t: float, m: int,
                              replicas: int, rng: Stream) -> Estimate:
    """Mean number of coincident pairs in the every-m subsampled jump chain
    run for floor(t/2m) subsampled steps.

    Walks absorbed at the truncation frontier stop contributing subsample
    points, which can only remove pairs, so the spectral pair bound stays an
    upper bound on the estimate.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    terms = int(t // (2 * m))
    counts = []
    for r in range(replicas):
        if terms == 0:
            counts.append(0)
            continue
        path = discrete_walk(g, x, m * terms, rng.child("selfint", r))
        sub = path[::m]
        eq = 0
        for i in range(len(sub)):
            for j in range(i + 1, len(sub)):
                if sub[i] == sub[j]:
                    eq += 1
        counts.append(eq)
    return from_samples(counts, rng.key)


def self_intersection_bound(t: float, m: int, rho: float) -> float:
    """t rho^m / (2m (1 - rho^m)), the spectral pair-collision bound."""
    rm = rho ** m
    return t * rm / (2 * m * (1.0 - rm))
