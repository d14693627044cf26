"""Finite graph arenas for walks and frogs.

Infinite graphs are represented by truncated stand-ins: lattice boxes
(graph-metric balls of Z^d), regular trees, ladders, and user-supplied
weighted networks. Vertices get dense integer ids in BFS order from the
origin (id 0), adjacency is stored CSR-style, and the truncation frontier is
recorded in ``boundary``. Walk dynamics treat boundary vertices as sinks:
interior behaviour is exact up to the first boundary hit, which is all the
finite connection events need.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from collections import deque
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Malformed graph specification or input file."""


@dataclass(frozen=True)
class GraphSpec:
    """Declarative description of a graph family instance.

    family is one of lattice_box, regular_tree, ladder, weighted_file.
    boundary_mode 'absorbing' makes frontier vertices sinks for the walk;
    'open-killing' additionally documents that frontier vertices are always
    treated as outside any restricted window S. Dynamics are identical up to
    the first boundary hit.
    """

    family: str
    d: int = 0
    radius: int = 0
    degree: int = 0
    depth: int = 0
    width: int = 0
    length: int = 0
    path: str = ""
    boundary_mode: str = "absorbing"
    max_vertices: int = 20_000_000

    def describe(self) -> str:
        """Compact descriptor; comma-free so it can sit in a CSV cell."""
        if self.family == "lattice_box":
            return f"lattice_box:d{self.d}:r{self.radius}"
        if self.family == "regular_tree":
            return f"regular_tree:{self.degree}:{self.depth}"
        if self.family == "ladder":
            return f"ladder:{self.width}:{self.length}"
        if self.family == "weighted_file":
            return f"weighted_file:{Path(self.path).name}".replace(",", "_")
        return self.family


@dataclass
class Graph:
    """Finite weighted (di)graph with CSR adjacency and BFS-ordered ids."""

    vertex_count: int
    indptr: np.ndarray        # int64, len n+1
    indices: np.ndarray       # int32, concatenated out-neighbor lists
    weights: np.ndarray | None  # float64 aligned with indices; None means all 1
    pi: np.ndarray            # float64, pi(x) = sum_y w(x, y)
    directed: bool
    boundary_mask: np.ndarray  # bool, truncation frontier (walk sinks)
    dist: np.ndarray          # int32, graph distance from origin (-1 unreachable)
    family: str = "custom"
    boundary_mode: str = "absorbing"
    origin: int = 0
    coords: np.ndarray | None = None  # (n, d) lattice points, grid families only
    _cumw: np.ndarray | None = field(default=None, repr=False)
    _transition: sp.csr_matrix | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.boundary_mask[self.origin]:
            raise GraphError("origin lies on the truncation frontier")

    # -- basic queries -------------------------------------------------

    def out_neighbors(self, x: int) -> np.ndarray:
        return self.indices[self.indptr[x]:self.indptr[x + 1]]

    def degree(self, x: int) -> int:
        return int(self.indptr[x + 1] - self.indptr[x])

    def max_interior_degree(self) -> int:
        """Largest out-degree away from the truncation frontier."""
        degs = np.diff(self.indptr)
        inside = degs[~self.boundary_mask]
        return int((inside if inside.size else degs).max())

    def is_boundary(self, x: int) -> bool:
        return bool(self.boundary_mask[x])

    @property
    def boundary_set(self) -> frozenset:
        return frozenset(np.flatnonzero(self.boundary_mask).tolist())

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    @property
    def max_radius(self) -> int:
        """Largest graph distance from the origin (the truncation radius)."""
        return int(self.dist.max())

    def edge_weight(self, x: int, y: int) -> float:
        row = self.out_neighbors(x)
        hits = np.flatnonzero(row == y)
        if hits.size == 0:
            return 0.0
        if self.weights is None:
            return float(hits.size)
        return float(self.weights[self.indptr[x] + hits].sum())

    # -- walk kernel ---------------------------------------------------

    def row_cumweights(self, x: int) -> np.ndarray:
        """Cumulative outgoing weights of x, for weighted neighbor sampling."""
        if self._cumw is None:
            w = self.weights if self.weights is not None else np.ones_like(
                self.indices, dtype=np.float64)
            cw = np.cumsum(w)
            starts = cw[self.indptr[:-1] - 1]
            starts[self.indptr[:-1] == 0] = 0.0
            self._cumw = cw - np.repeat(starts, np.diff(self.indptr))
        return self._cumw[self.indptr[x]:self.indptr[x + 1]]

    def transition_matrix(self) -> sp.csr_matrix:
        """Jump-chain kernel P(x,y) = w(x,y)/pi(x); boundary rows absorb."""
        if self._transition is None:
            n = self.vertex_count
            w = (self.weights if self.weights is not None
                 else np.ones_like(self.indices, dtype=np.float64))
            data = w / np.repeat(self.pi, np.diff(self.indptr))
            if self.boundary_mask.any():
                rows = np.repeat(np.arange(n), np.diff(self.indptr))
                keep = ~self.boundary_mask[rows]
                bidx = np.flatnonzero(self.boundary_mask)
                rows = np.concatenate([rows[keep], bidx])
                cols = np.concatenate([self.indices[keep], bidx])
                vals = np.concatenate([data[keep], np.ones(bidx.size)])
                mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
            else:
                mat = sp.csr_matrix(
                    (data, self.indices.copy(), self.indptr.copy()), shape=(n, n))
            self._transition = mat
        return self._transition


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------


def _csr_from_edges(n: int, src: np.ndarray, dst: np.ndarray,
                    w: np.ndarray | None):
    """Assemble CSR arrays from directed edge lists (already both-way for
    undirected graphs)."""
    order = np.argsort(src, kind="stable")
    src = src[order]
    dst = dst[order]
    if w is not None:
        w = w[order]
    counts = np.bincount(src, minlength=n)
    indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return indptr, dst.astype(np.int32), w


def _bfs_order_and_dist(n, indptr, indices, origin):
    dist = np.full(n, -1, dtype=np.int32)
    dist[origin] = 0
    frontier = np.array([origin], dtype=np.int64)
    d = 0
    while frontier.size:
        d += 1
        nbrs = []
        for v in frontier:
            nbrs.append(indices[indptr[v]:indptr[v + 1]])
        nxt = np.unique(np.concatenate(nbrs)) if nbrs else np.empty(0, np.int64)
        nxt = nxt[dist[nxt] < 0]
        dist[nxt] = d
        frontier = nxt
    return dist


def _points_to_graph(points: np.ndarray, origin_row: int, spec: GraphSpec,
                     boundary_of: np.ndarray) -> Graph:
    """Unit-step grid graph on an arbitrary finite set of Z^d points.

    points: (n, d) int array. boundary_of: bool per point. Ids are assigned
    in BFS order from the origin (sorted by (graph distance, lex coords)),
    which for these convex point sets equals (l1 distance to origin, lex).
    """
    pts = points - points[origin_row]
    l1 = np.abs(pts).sum(axis=1)
    order = np.lexsort(tuple(pts[:, k] for k in range(pts.shape[1] - 1, -1, -1)))
    order = order[np.argsort(l1[order], kind="stable")]
    pts = pts[order]
    boundary = boundary_of[order]
    n = pts.shape[0]
    if n > spec.max_vertices:
        raise GraphError(f"vertex budget exceeded: {n} > {spec.max_vertices}")

    # lexicographic key per point for neighbor lookup
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo + 3
    key = np.zeros(n, dtype=np.int64)
    for k in range(pts.shape[1]):
        key = key * span[k] + (pts[:, k] - lo[k] + 1)
    key_order = np.argsort(key)
    key_sorted = key[key_order]

    srcs, dsts = [], []
    d = pts.shape[1]
    for axis in range(d):
        for sign in (1, -1):
            shifted = pts.copy()
            shifted[:, axis] += sign
            skey = np.zeros(n, dtype=np.int64)
            for k in range(d):
                skey = skey * span[k] + (shifted[:, k] - lo[k] + 1)
            pos = np.searchsorted(key_sorted, skey)
            pos = np.clip(pos, 0, n - 1)
            found = key_sorted[pos] == skey
            srcs.append(np.flatnonzero(found))
            dsts.append(key_order[pos[found]])
    src = np.concatenate(srcs)
    dst = np.concatenate(dsts)
    indptr, indices, _ = _csr_from_edges(n, src, dst, None)
    dist = np.abs(pts).sum(axis=1).astype(np.int32)
    pi = np.diff(indptr).astype(np.float64)
    return Graph(n, indptr, indices, None, pi, False, boundary,
                 dist, family=spec.describe(), boundary_mode=spec.boundary_mode,
                 coords=pts)


def _build_lattice_box(spec: GraphSpec) -> Graph:
    d, r = spec.d, spec.radius
    if d < 1 or r < 1:
        raise GraphError("lattice_box needs d >= 1 and radius >= 1")
    if (2 * r + 1) ** d > 40 * spec.max_vertices:
        raise GraphError("lattice_box enumeration too large for vertex budget")
    axes = [np.arange(-r, r + 1)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.abs(pts).sum(axis=1) <= r
    pts = pts[keep]
    origin_row = int(np.flatnonzero(np.all(pts == 0, axis=1))[0])
    boundary = np.abs(pts).sum(axis=1) == r
    return _points_to_graph(pts, origin_row, spec, boundary)


def _build_ladder(spec: GraphSpec) -> Graph:
    w, ln = spec.width, spec.length
    if w < 1 or ln < 1:
        raise GraphError("ladder needs width >= 1 and length >= 1")
    cols = np.arange(-ln, ln + 1)
    rows = np.arange(w)
    cc, rr = np.meshgrid(cols, rows, indexing="ij")
    pts = np.stack([cc.ravel(), rr.ravel()], axis=1)
    origin_row = int(np.flatnonzero((pts[:, 0] == 0) & (pts[:, 1] == 0))[0])
    # frontier along the unbounded direction: the two end columns
    boundary = np.abs(pts[:, 0]) == ln
    return _points_to_graph(pts, origin_row, spec, boundary)


def _build_regular_tree(spec: GraphSpec) -> Graph:
    deg, depth = spec.degree, spec.depth
    if deg < 3:
        raise GraphError("regular_tree needs degree >= 3")
    if depth < 1:
        raise GraphError("regular_tree needs depth >= 1")
    sizes = [1, deg]
    for _ in range(2, depth + 1):
        sizes.append(sizes[-1] * (deg - 1))
    n = int(np.sum(sizes))
    if n > spec.max_vertices:
        raise GraphError(f"vertex budget exceeded: {n} > {spec.max_vertices}")
    starts = np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)
    child = []
    parent = []
    for lev in range(1, depth + 1):
        ids = np.arange(starts[lev], starts[lev + 1], dtype=np.int64)
        k = deg if lev == 1 else deg - 1
        par = starts[lev - 1] + (ids - starts[lev]) // k
        child.append(ids)
        parent.append(par)
    child = np.concatenate(child)
    parent = np.concatenate(parent)
    src = np.concatenate([child, parent])
    dst = np.concatenate([parent, child])
    indptr, indices, _ = _csr_from_edges(n, src, dst, None)
    dist = np.zeros(n, dtype=np.int32)
    for lev in range(1, depth + 1):
        dist[starts[lev]:starts[lev + 1]] = lev
    boundary = dist == depth
    pi = np.diff(indptr).astype(np.float64)
    return Graph(n, indptr, indices, None, pi, False, boundary, dist,
                 family=spec.describe(), boundary_mode=spec.boundary_mode)


def _parse_weighted_file(spec: GraphSpec) -> Graph:
    path = Path(spec.path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise GraphError(f"cannot read graph file: {exc}") from exc
    lines = text.splitlines()
    header = None
    body_start = 0
    for i, line in enumerate(lines):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            header = stripped
            body_start = i + 1
            break
    if header is None:
        raise GraphError("empty graph file")
    parts = header.split()
    if len(parts) != 3 or parts[0] != "frogsim-graph" or parts[1] != "v1":
        raise GraphError(f"bad header line: {header!r}")
    if parts[2] not in ("directed", "undirected"):
        raise GraphError(f"orientation must be directed|undirected, got {parts[2]!r}")
    directed = parts[2] == "directed"

    edges: dict[tuple[int, int], float] = {}
    ids: set[int] = set()
    for lineno, line in enumerate(lines[body_start:], start=body_start + 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        toks = stripped.split()
        if len(toks) != 3:
            raise GraphError(f"line {lineno}: expected 'u v w', got {stripped!r}")
        try:
            u, v = int(toks[0]), int(toks[1])
            w = float(toks[2])
        except ValueError as exc:
            raise GraphError(f"line {lineno}: {exc}") from exc
        if w <= 0 or not np.isfinite(w):
            raise GraphError(f"line {lineno}: weight must be positive, got {w}")
        ids.add(u)
        ids.add(v)
        keys = [(u, v)] if directed else [(u, v), (v, u)]
        for key in keys:
            if key in edges and edges[key] != w:
                raise GraphError(f"line {lineno}: conflicting weight for edge {key}")
            edges[key] = w
    if not ids:
        raise GraphError("graph file has no edges")
    if len(ids) > spec.max_vertices:
        raise GraphError("vertex budget exceeded")

    raw_ids = sorted(ids)
    raw_index = {rid: i for i, rid in enumerate(raw_ids)}
    n = len(raw_ids)
    src0 = np.array([raw_index[u] for (u, v) in edges], dtype=np.int64)
    dst0 = np.array([raw_index[v] for (u, v) in edges], dtype=np.int64)
    w0 = np.array(list(edges.values()), dtype=np.float64)

    # provisional CSR to run BFS from the smallest original id
    indptr0, indices0, w0s = _csr_from_edges(n, src0, dst0, w0)
    dist0 = _bfs_order_and_dist(n, indptr0, indices0, 0)
    reach = dist0 >= 0
    sort_dist = np.where(reach, dist0, np.iinfo(np.int32).max)
    order = np.lexsort((np.arange(n), sort_dist))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)

    src = rank[src0]
    dst = rank[dst0]
    # vertices with no out-edges are natural sinks; keep local finiteness
    # with a self-loop and mark them as frontier
    out_counts = np.bincount(src, minlength=n)
    sinks = np.flatnonzero(out_counts == 0)
    if sinks.size:
        src = np.concatenate([src, sinks])
        dst = np.concatenate([dst, sinks])
        w0 = np.concatenate([w0, np.ones(sinks.size)])
    indptr, indices, wfin = _csr_from_edges(n, src, dst, w0)
    pi = np.zeros(n, dtype=np.float64)
    np.add.at(pi, src, w0)
    dist = np.empty(n, dtype=np.int32)
    dist[rank] = np.where(reach, dist0, -1)
    boundary = np.zeros(n, dtype=bool)
    boundary[sinks] = True
    g = Graph(n, indptr, indices, wfin, pi, directed, boundary, dist,
              family=spec.describe(), boundary_mode=spec.boundary_mode)
    _validate(g)
    return g


def build_graph(spec: GraphSpec) -> Graph:
    if spec.boundary_mode not in ("absorbing", "open-killing"):
        raise GraphError(f"unknown boundary_mode {spec.boundary_mode!r}")
    if spec.family == "lattice_box":
        return _build_lattice_box(spec)
    if spec.family == "regular_tree":
        return _build_regular_tree(spec)
    if spec.family == "ladder":
        return _build_ladder(spec)
    if spec.family == "weighted_file":
        return _parse_weighted_file(spec)
    raise GraphError(f"unknown graph family {spec.family!r}")


def _validate(g: Graph, rel_tol: float = 1e-12) -> None:
    if np.any(np.diff(g.indptr) <= 0):
        raise GraphError("every vertex needs a non-empty out-neighbor list")
    w = g.weights if g.weights is not None else np.ones_like(g.indices, float)
    sums = np.zeros(g.vertex_count)
    np.add.at(sums, np.repeat(np.arange(g.vertex_count), np.diff(g.indptr)), w)
    if not np.allclose(sums, g.pi, rtol=rel_tol, atol=0):
        raise GraphError("pi(x) does not match outgoing weight sums")
    if not g.directed:
        # w(x, y) must equal w(y, x) for every stored edge
        src = np.repeat(np.arange(g.vertex_count), np.diff(g.indptr))
        fwd = {(int(a), int(b)): float(c) for a, b, c in zip(src, g.indices, w)}
        for (a, b), c in fwd.items():
            if fwd.get((b, a)) != c:
                raise GraphError(f"asymmetric weight on edge ({a}, {b})")


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------


def ball(g: Graph, x: int, r: int) -> set[int]:
    """All vertices within graph distance r of x (out-distance if directed)."""
    if not (0 <= x < g.vertex_count):
        raise GraphError(f"invalid vertex {x}")
    if r < 0:
        raise GraphError("radius must be >= 0")
    if x == g.origin and g.dist.min() >= 0:
        return set(np.flatnonzero(g.dist <= r).tolist())
    seen = {x}
    frontier = [x]
    for _ in range(r):
        nxt = []
        for v in frontier:
            for u in g.out_neighbors(v):
                u = int(u)
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        if not nxt:
            break
        frontier = nxt
    return seen


def sphere(g: Graph, x: int, r: int) -> set[int]:
    """S(r) = B(r) minus B(r-1)."""
    if r == 0:
        return {x}
    return ball(g, x, r) - ball(g, x, r - 1)


def distances_from(g: Graph, x: int) -> np.ndarray:
    if x == g.origin:
        return g.dist
    dist = np.full(g.vertex_count, -1, dtype=np.int32)
    dist[x] = 0
    frontier = deque([x])
    while frontier:
        v = frontier.popleft()
        for u in g.out_neighbors(v):
            if dist[u] < 0:
                dist[u] = dist[v] + 1
                frontier.append(int(u))
    return dist


def distance_to_complement(g: Graph, S) -> dict[int, int]:
    """d(x, S^c) for x in S, following directed edges out of S.

    Computed by BFS from S^c over reversed edges.
    """
    S = set(S)
    dist = {}
    rev: dict[int, list[int]] = {x: [] for x in S}
    frontier = []
    for x in S:
        for y in g.out_neighbors(x):
            y = int(y)
            if y in S:
                rev[y].append(x)
            else:
                if x not in dist:
                    dist[x] = 1
                    frontier.append(x)
    d = 1
    while frontier:
        d += 1
        nxt = []
        for y in frontier:
            for x in rev[y]:
                if x not in dist:
                    dist[x] = d
                    nxt.append(x)
        frontier = nxt
    return dist


def growth_profile(g: Graph, x: int, rmax: int):
    """Ball volumes g(0..rmax) around x and the fitted growth exponent.

    The exponent is the least-squares slope of log g(n) against log n over
    n in [rmax/2, rmax]. Raises if the profile would be boundary-distorted.
    """
    if rmax < 2:
        raise GraphError("rmax must be >= 2 to fit an exponent")
    sizes = [1]
    seen = {x}
    frontier = [x]
    for r in range(1, rmax + 1):
        nxt = []
        for v in frontier:
            for u in g.out_neighbors(v):
                u = int(u)
                if u not in seen:
                    if g.boundary_mask[u]:
                        raise GraphError(
                            f"rmax={rmax} reaches the truncation frontier at r={r}; "
                            "profile would be boundary-distorted")
                    seen.add(u)
                    nxt.append(u)
        frontier = nxt
        sizes.append(len(seen))
    sizes = np.array(sizes, dtype=np.int64)
    ns = np.arange(rmax // 2, rmax + 1)
    slope = np.polyfit(np.log(ns), np.log(sizes[ns]), 1)[0]
    return sizes, float(slope), int(round(slope))


def cheeger_of_set(g: Graph, A) -> float:
    """Boundary-weight to volume ratio of A: sum_{a in A, b not in A} w(a,b)
    over sum_{a in A} pi(a)."""
    A = set(int(a) for a in A)
    if not A:
        raise GraphError("cheeger_of_set needs a non-empty set")
    for a in A:
        if not (0 <= a < g.vertex_count):
            raise GraphError(f"invalid vertex {a}")
    out_w = 0.0
    vol = 0.0
    for a in A:
        vol += g.pi[a]
        row = g.out_neighbors(a)
        w = (g.weights[g.indptr[a]:g.indptr[a + 1]]
             if g.weights is not None else np.ones(row.size))
        for y, wy in zip(row, w):
            if int(y) not in A:
                out_w += wy
    return out_w / vol


def stationary_control_constant(g: Graph) -> float:
    """max pi / min pi over interior vertices (frontier degrees are
    truncation artifacts, not graph geometry)."""
    interior = g.interior_mask
    vals = g.pi[interior] if interior.any() else g.pi
    return float(vals.max() / vals.min())


@dataclass
class SpectralEstimate:
    estimate: float
    returns: np.ndarray        # p_{2n}(x,x) for n = 0..nmax/2
    root_seq: np.ndarray       # p_{2n}^{1/2n}
    ratio_seq: np.ndarray      # sqrt(p_{2n+2}/p_{2n})
    richardson_seq: np.ndarray
    monotone: bool
    leakage: float
    truncation_warning: bool


def spectral_radius_estimate(g: Graph, x: int, nmax: int) -> SpectralEstimate:
    """Estimate the jump-chain spectral radius from even-step returns.

    Computes p_{2n}(x,x) by exact sparse iteration of the boundary-absorbed
    kernel, then extrapolates the ratio sequence sqrt(p_{2n+2}/p_{2n}), whose
    1/n polynomial correction is removed Richardson-style. Requires an
    undirected graph (the estimator relies on reversibility).

    Returns to x are exact (not truncation-biased) as long as no walk of
    length nmax can reach the frontier and come back, i.e. whenever
    nmax < 2 * d(x, boundary); otherwise the result is flagged and reads as
    an upper-bias bracket of the truncated kernel.

    On a closed graph (no frontier: user-supplied expander stand-ins) the
    returns converge to the stationary weight pi(x)/pi(V); the decay rate is
    then read off the centered sequence, which tracks the second eigenvalue.
    """
    if g.directed:
        raise GraphError("spectral_radius_estimate requires an undirected graph")
    if nmax < 4 or nmax % 2:
        raise GraphError("nmax must be an even integer >= 4")
    P = g.transition_matrix()
    v = np.zeros(g.vertex_count)
    v[x] = 1.0
    returns = [1.0]
    for k in range(1, nmax + 1):
        v = P.T @ v
        if k % 2 == 0:
            returns.append(float(v[x]))
    returns = np.array(returns)
    leakage = float(v[g.boundary_mask].sum())
    stationary = 0.0 if g.boundary_mask.any() else float(g.pi[x] / g.pi.sum())
    centered = returns - stationary
    if np.any(centered[1:] <= 0):
        centered = returns  # closed bipartite-like input; keep raw decay
    ns = np.arange(1, returns.size)
    root_seq = centered[1:] ** (1.0 / (2 * ns))
    ratio_seq = np.sqrt(centered[2:] / centered[1:-1])
    m = np.arange(1, ratio_seq.size + 1).astype(float)
    richardson = m[1:] * ratio_seq[1:] - m[:-1] * ratio_seq[:-1]
    monotone = bool(np.all(np.diff(returns) <= 1e-15))
    estimate = float(richardson[-1]) if richardson.size else float(ratio_seq[-1])
    estimate = min(estimate, 1.0)
    if g.boundary_mask.any():
        dx = distances_from(g, x) if x != g.origin else g.dist
        bdist = int(dx[g.boundary_mask].min())
        warn = nmax >= 2 * bdist
    else:
        warn = False
    return SpectralEstimate(estimate, returns, root_seq, ratio_seq,
                            richardson, monotone, leakage, warn)
