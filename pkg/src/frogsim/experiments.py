"""Coupling and renormalization constructions packaged as runnable
experiments: first-jump Bernoulli edge coupling, coarse-grained block
renormalization on the planar box, schedule-invariance replay, the
linear-growth extinction study, and the non-amenable survival pipeline.

Every experiment returns an ExperimentReport whose metrics carry replica
counts and seeds, and can be serialized to JSON plus the shared CSV schema.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import (Graph, GraphError, GraphSpec, ball, build_graph,
                     spectral_radius_estimate, stationary_control_constant)
from .frogs import FrogParams, ParticleField, explore_cluster
from .estimators import nonamenable_t_bound, survival_probability
from .rng import Stream
from .stats import Estimate, from_binomial, from_samples
from .walks import exit_probability_exact


@dataclass
class ExperimentReport:
    name: str
    inputs: dict
    metrics: dict[str, Estimate | float]
    checks: dict[str, bool]
    seed: int

    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> str:
        def enc(v):
            if isinstance(v, Estimate):
                return {"mean": v.mean, "stderr": v.stderr,
                        "replicas": v.replicas, "seed": v.seed,
                        "method": v.method}
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v
        payload = {
            "experiment": self.name,
            "seed": self.seed,
            "inputs": {k: enc(v) for k, v in self.inputs.items()},
            "metrics": {k: enc(v) for k, v in self.metrics.items()},
            "checks": self.checks,
            "passed": self.passed(),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def csv_rows(self) -> list[dict]:
        graph = str(self.inputs.get("graph", ""))
        lam = self.inputs.get("lambda", "")
        t = self.inputs.get("t", "")
        n = self.inputs.get("n", "")
        rows = []
        for metric, val in sorted(self.metrics.items()):
            if isinstance(val, Estimate):
                rows.append(dict(experiment=self.name, graph=graph, **{
                    "lambda": lam}, t=t, n=n, replicas=val.replicas,
                    seed=self.seed, metric=metric, mean=val.mean,
                    stderr=val.stderr))
            else:
                rows.append(dict(experiment=self.name, graph=graph, **{
                    "lambda": lam}, t=t, n=n, replicas=1, seed=self.seed,
                    metric=metric, mean=float(val), stderr=0.0))
        return rows


CSV_HEADER = ["experiment", "graph", "lambda", "t", "n", "replicas", "seed",
              "metric", "mean", "stderr"]


def format_csv(rows: list[dict]) -> str:
    out = [",".join(CSV_HEADER)]
    for row in rows:
        cells = []
        for col in CSV_HEADER:
            v = row.get(col, "")
            if isinstance(v, float):
                cells.append(f"{v:.12g}")
            else:
                cells.append(str(v))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def write_report(report: ExperimentReport, outdir) -> tuple[Path, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    jpath = outdir / f"{report.name}-{report.seed}.json"
    cpath = outdir / f"{report.name}-{report.seed}.csv"
    jpath.write_text(report.to_json() + "\n", encoding="utf-8")
    cpath.write_text(format_csv(report.csv_rows()), encoding="utf-8")
    return jpath, cpath


# ---------------------------------------------------------------------------
# first-jump Bernoulli edge coupling
# ---------------------------------------------------------------------------


def edge_open_probability(delta_deg: int, lam: float, t: float) -> float:
    """Closed-form per-edge open probability on a Delta-regular graph:
    (1 - exp(-lam (1 - e^{-t}) / Delta))^2."""
    one_side = -math.expm1(-lam * -math.expm1(-t) / delta_deg)
    return one_side * one_side


def _first_jump_open(field: ParticleField, params: FrogParams,
                     x: int, y: int) -> bool:
    eta, trajs = field.particles(x, params)
    return any(tr.jumps and tr.jumps[0] == y for tr in trajs)


def bernoulli_edge_coupling(g: Graph, params: FrogParams, replicas: int,
                            seed: int, *, edge_trials: int = 100_000,
                            independence_pairs: int = 20_000,
                            inclusion_seeds: int = 5) -> ExperimentReport:
    """Declare an edge open when both endpoints send a first jump across it
    within the lifespan; validate the product closed form, cross-edge
    independence, and per-seed containment of the open cluster in the frog
    cluster on the same field.

    `replicas` counts particle-field replicas; when 0 the count is derived
    from `edge_trials` (each replica contributes one trial per interior
    full-degree edge).
    """
    if g.directed:
        raise GraphError("edge coupling needs an undirected graph")
    interior = g.interior_mask
    delta_deg = g.max_interior_degree()
    edges = []
    for x in range(g.vertex_count):
        if not interior[x] or g.degree(x) != delta_deg:
            continue
        for y in g.out_neighbors(x):
            y = int(y)
            if x < y and interior[y] and g.degree(y) == delta_deg:
                edges.append((x, y))
    if not edges:
        raise GraphError("no interior edges of full degree")

    p_closed = edge_open_probability(delta_deg, params.lam, params.t)
    per_rep = len(edges)
    need_reps = replicas if replicas >= 1 else max(1, -(-edge_trials // per_rep))
    opens = 0
    trials = 0
    # vertex-disjoint edge pairs for the correlation probe
    pair_step = max(2, len(edges) // 32)
    pairs = []
    for i in range(0, len(edges) - pair_step, pair_step):
        e1, e2 = edges[i], edges[i + pair_step // 2]
        if len({*e1, *e2}) == 4:
            pairs.append((e1, e2))
    pair_obs: list[tuple[int, int]] = []
    for r in range(need_reps):
        fld = ParticleField(g, Stream(seed, "edges", r).key)
        opened = {}
        for (x, y) in edges:
            o = (_first_jump_open(fld, params, x, y)
                 and _first_jump_open(fld, params, y, x))
            opened[(x, y)] = o
            opens += o
            trials += 1
        if len(pair_obs) < independence_pairs:
            for e1, e2 in pairs:
                pair_obs.append((opened[e1], opened[e2]))
    rate = from_binomial(opens, trials, seed)

    a = np.array([u for u, _ in pair_obs], dtype=float)
    b = np.array([v for _, v in pair_obs], dtype=float)
    if a.std() > 0 and b.std() > 0:
        corr = float(np.corrcoef(a, b)[0, 1])
    else:
        corr = 0.0
    corr_se = 1.0 / math.sqrt(len(pair_obs))

    inclusion_ok = True
    for s in range(inclusion_seeds):
        fld = ParticleField(g, Stream(seed, "edges", s).key)
        adj: dict[int, list[int]] = {}
        for (x, y) in edges:
            if (_first_jump_open(fld, params, x, y)
                    and _first_jump_open(fld, params, y, x)):
                adj.setdefault(x, []).append(y)
                adj.setdefault(y, []).append(x)
        open_cluster = {g.origin}
        stack = [g.origin]
        while stack:
            v = stack.pop()
            for u in adj.get(v, ()):
                if u not in open_cluster:
                    open_cluster.add(u)
                    stack.append(u)
        frog = explore_cluster(g, params, fld, particle_budget=5_000_000)
        if not open_cluster <= frog.activated:
            inclusion_ok = False
    dev = abs(rate.mean - p_closed)
    checks = {
        "rate_matches_closed_form_3se": dev <= 3.0 * max(rate.stderr, 1e-12),
        "pair_correlation_within_3se": abs(corr) <= 3.0 * corr_se,
        "open_cluster_inside_frog_cluster": inclusion_ok,
    }
    return ExperimentReport(
        "bernoulli_coupling",
        {"graph": g.family, "lambda": params.lam, "t": params.t,
         "delta": delta_deg, "edge_trials": trials},
        {"open_rate": rate, "closed_form": p_closed,
         "pair_correlation": corr, "pair_correlation_se": corr_se},
        checks, seed)


# ---------------------------------------------------------------------------
# renormalization on the planar box
# ---------------------------------------------------------------------------

_NET_NEIGHBORS = ((1, 0), (-1, 0), (0, 1), (0, -1),
                  (1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass
class NetConfig:
    """Sublattice block structure on a planar box.

    Net sites are the spacing-a sublattice inside the box; net edges join
    the eight adjacent sites (all within graph distance 4*beta*a for
    beta = 1, and a valid block net: site percolation on that adjacency is
    comfortably subcritical at 3/4). Balls of radius a//3 around distinct
    sites are disjoint.
    """

    a: int
    net_extent: int          # net sites live in the l1 ball of this many steps
    box_radius: int | None = None
    beta: float = 1.0

    def __post_init__(self):
        if self.a < 3:
            raise GraphError("spacing a must be >= 3")
        if self.net_extent < 1:
            raise GraphError("net_extent must be >= 1")
        if 2 * (self.a // 3) >= self.a:
            raise GraphError("ball radius a//3 too large for disjointness")
        if self.box_radius is None:
            halo = 2 * self.a + self.a // 3 + 2
            self.box_radius = self.net_extent * self.a + halo

    @property
    def lifespan(self) -> float:
        return float(self.a * self.a)

    def net_sites(self):
        e = self.net_extent
        return [(i * self.a, j * self.a)
                for i in range(-e, e + 1) for j in range(-e, e + 1)
                if abs(i) + abs(j) <= e]


class _CoordIndex:
    def __init__(self, g: Graph):
        if g.coords is None:
            raise GraphError("experiment needs a lattice graph with coordinates")
        self._map = {tuple(int(c) for c in p): i for i, p in enumerate(g.coords)}

    def vid(self, p) -> int:
        v = self._map.get((int(p[0]), int(p[1])))
        if v is None:
            raise GraphError(f"point {p} outside the base box")
        return v


def _arrow_adjacency(g: Graph, B: set[int], field: ParticleField,
                     params: FrogParams) -> dict[int, set[int]]:
    """Arrows x -> (range of x's particles) within B, one shared field."""
    arrows = {}
    for x in B:
        _, trajs = field.particles(x, params)
        s: set[int] = set()
        for tr in trajs:
            s |= (tr.visited & B)
        s.discard(x)
        arrows[x] = s
    return arrows


def _closure(arrows: dict[int, set[int]], start: int,
             stop_size: float = math.inf) -> set[int]:
    reached = {start}
    stack = [start]
    while stack and len(reached) < stop_size:
        u = stack.pop()
        for w in arrows[u]:
            if w not in reached:
                reached.add(w)
                stack.append(w)
    return reached


def _cascade_covers(g: Graph, window: set[int], seeds, params: FrogParams,
                    field: ParticleField, targets: set[int]) -> bool:
    """Frog cascade restricted to `window`: only window vertices wake their
    particles. True iff every target vertex is eventually visited."""
    visited = set(seeds)
    todo = list(seeds)
    remaining = set(targets) - visited
    while todo and remaining:
        x = todo.pop()
        _, trajs = field.particles(x, params)
        for tr in trajs:
            for v in tr.jumps:
                if v in remaining:
                    remaining.discard(v)
                if v in window and v not in visited:
                    visited.add(v)
                    todo.append(v)
    return not remaining


def block_open(g: Graph, idx: _CoordIndex, net: NetConfig, site, lam: float,
               phase1: ParticleField, phase2: ParticleField) -> bool:
    """Openness of one net site: some vertex of its small ball conquers a
    quarter of the ball with the first particle wave, and the second wave
    seeded on that conquered set covers all eight neighboring balls through
    the ball-plus-targets window."""
    t = net.lifespan
    half = FrogParams(lam / 2.0, t)
    v = idx.vid(site)
    B = ball(g, v, net.a // 3)
    arrows = _arrow_adjacency(g, B, phase1, half)
    quota = len(B) / 4.0
    goods = []
    for x in sorted(B):
        reached = _closure(arrows, x)
        if len(reached) >= quota:
            goods.append((len(reached), x, reached))
    if not goods:
        return False
    goods.sort(key=lambda item: (-item[0], item[1]))
    bhat: set[int] = set()
    for ox, oy in _NET_NEIGHBORS:
        w = idx.vid((site[0] + ox * net.a, site[1] + oy * net.a))
        bhat |= ball(g, w, net.a // 3)
    window = B | bhat
    for _, x, reached in goods:
        if _cascade_covers(g, window, reached, half, phase2, bhat):
            return True
    return False


def good_vertex_decay(g: Graph, center: int, a: int, density: float,
                      sizes, replicas: int, seed: int):
    """P(no good vertex in A) for nested candidate sets A of the given
    sizes inside the radius-a ball, at lifespan a^2.

    Goodness = the candidate's in-ball activation covers a quarter of the
    ball. Nesting makes the probabilities non-increasing in |A| per seed.
    """
    B = ball(g, center, a)
    order = sorted(B, key=lambda v: (int(g.dist[v]), v))
    nested = {k: order[:k] for k in sizes}
    params = FrogParams(density, float(a * a))
    quota = len(B) / 4.0
    fails = {k: 0 for k in sizes}
    for rep in range(replicas):
        fld = ParticleField(g, Stream(seed, "decay", rep).key)
        arrows = _arrow_adjacency(g, B, fld, params)
        good_found: set[int] = set()
        for k in sorted(sizes):
            ok = any(x in good_found for x in nested[k])
            if not ok:
                for x in nested[k]:
                    if len(_closure(arrows, x)) >= quota:
                        good_found.add(x)
                        ok = True
                        break
            if not ok:
                fails[k] += 1
    return {k: from_binomial(fails[k], replicas, seed) for k in sizes}


def renormalization_experiment(net: NetConfig, lam: float, replicas: int,
                               seed: int, *, decay_density: float = 0.25,
                               decay_sizes=(4, 16, 64),
                               decay_replicas: int = 500) -> ExperimentReport:
    """Two-wave block renormalization: split the particle density in half,
    open a net site when wave one finds a good vertex in its ball and wave
    two conquers the neighboring balls, then read off the open frequency and
    the site-percolation cluster of the renormalized configuration.
    """
    g = build_graph(GraphSpec("lattice_box", d=2, radius=net.box_radius))
    idx = _CoordIndex(g)
    sites = net.net_sites()
    site_ids = {s: i for i, s in enumerate(sites)}
    net_adj = {s: [n for n in ((s[0] + ox * net.a, s[1] + oy * net.a)
                               for ox, oy in _NET_NEIGHBORS) if n in site_ids]
               for s in sites}
    per_rep_fraction = []
    open_counts = {s: 0 for s in sites}
    cluster_fracs = []
    for rep in range(replicas):
        phase1 = ParticleField(g, Stream(seed, "phase1", rep).key)
        phase2 = ParticleField(g, Stream(seed, "phase2", rep).key)
        state = {}
        for s in sites:
            state[s] = block_open(g, idx, net, s, lam, phase1, phase2)
            open_counts[s] += state[s]
        per_rep_fraction.append(sum(state.values()) / len(sites))
        # renormalized site-percolation cluster of the center site
        if state[(0, 0)]:
            comp = {(0, 0)}
            stack = [(0, 0)]
            while stack:
                u = stack.pop()
                for w in net_adj[u]:
                    if state[w] and w not in comp:
                        comp.add(w)
                        stack.append(w)
            cluster_fracs.append(len(comp) / len(sites))
        else:
            cluster_fracs.append(0.0)
    open_freq = from_samples(per_rep_fraction, seed, "open-fraction")
    site_freqs = {s: c / replicas for s, c in open_counts.items()}
    decay = good_vertex_decay(g, g.origin, net.a, decay_density, decay_sizes,
                              decay_replicas, Stream(seed, "decay").key)
    dec_means = [decay[k].mean for k in sorted(decay)]
    strict = all(a > b for a, b in zip(dec_means, dec_means[1:]))
    supported = [(k, decay[k].mean) for k in sorted(decay) if decay[k].mean > 0]
    slope = float("nan")
    if len(supported) >= 2:
        xs = np.array([k for k, _ in supported], dtype=float)
        ys = np.log([p for _, p in supported])
        slope = float(np.polyfit(xs, ys, 1)[0])
    checks = {
        "open_frequency_at_least_3_quarters": open_freq.mean >= 0.75,
        "decay_strictly_decreasing": strict,
        "decay_log_slope_negative": (not math.isnan(slope)) and slope < 0.0,
    }
    metrics: dict = {
        "open_frequency": open_freq,
        "open_frequency_site_min": min(site_freqs.values()),
        "open_frequency_site_max": max(site_freqs.values()),
        "center_cluster_fraction": from_samples(cluster_fracs, seed),
        "net_sites": float(len(sites)),
    }
    for k in sorted(decay):
        metrics[f"p_no_good_vertex_size_{k}"] = decay[k]
    return ExperimentReport(
        "renormalization",
        {"graph": g.family, "lambda": lam, "t": net.lifespan, "a": net.a,
         "net_extent": net.net_extent, "decay_density": decay_density},
        metrics, checks, seed)


# ---------------------------------------------------------------------------
# schedule invariance replay
# ---------------------------------------------------------------------------


def abelian_invariance_check(g: Graph, params: FrogParams,
                             seeds) -> ExperimentReport:
    """Replay identical particle fields under fifo/lifo/random schedules and
    demand set equality of the activated clusters. A mismatch reports its
    minimal reproducer (seed and schedule pair)."""
    mismatches = []
    sizes = []
    seeds = list(seeds)
    for s in seeds:
        results = {}
        for sched in ("fifo", "lifo", "random"):
            fld = ParticleField(g, s)
            cl = explore_cluster(g, params, fld, schedule=sched,
                                 rng=Stream(s, "sched", sched))
            results[sched] = cl.activated
        sizes.append(len(results["fifo"]))
        base = results["fifo"]
        for sched in ("lifo", "random"):
            if results[sched] != base:
                mismatches.append((s, sched))
    report = ExperimentReport(
        "abelian",
        {"graph": g.family, "lambda": params.lam, "t": params.t,
         "seeds": len(seeds)},
        {"mean_cluster_size": from_samples(sizes, seeds[0] if seeds else 0),
         "mismatches": float(len(mismatches))},
        {"all_schedules_agree": not mismatches},
        seeds[0] if seeds else 0)
    if mismatches:
        report.inputs["first_mismatch"] = mismatches[0]
    return report


# ---------------------------------------------------------------------------
# linear growth
# ---------------------------------------------------------------------------


def annulus_blocking_probability(g: Graph, inner: int, outer: int,
                                 params: FrogParams, tol: float = 1e-10) -> float:
    """Exact probability that no particle of the annulus B(outer) minus
    B(inner) leaves B(outer) within its lifespan: the Poisson-thinning
    closed form exp(-lam * sum of exit probabilities)."""
    S = ball(g, g.origin, outer)
    S = {v for v in S if not g.boundary_mask[v]}
    table = exit_probability_exact(g, S, params.t, tol)
    annulus = [x for x in S if int(g.dist[x]) > inner]
    total = sum(table.exit_prob[x] for x in annulus)
    return math.exp(-params.lam * total)


def linear_growth_experiment(width: int, length: int, params: FrogParams,
                             replicas: int, seed: int,
                             *, distances=(50, 100, 200),
                             blocking_inner: int = 50) -> ExperimentReport:
    """Survival decay along a ladder, the quasi-1d stand-in for linear
    growth, plus the exact blocking probability of an annulus."""
    g = build_graph(GraphSpec("ladder", width=width, length=length))
    ests = {}
    for n in distances:
        sv = survival_probability(g, params, n, replicas, seed)
        ests[n] = sv.estimate
    outer = blocking_inner + max(4, int(math.ceil(2 * params.t)) + 2)
    blocking = annulus_blocking_probability(g, blocking_inner, outer, params)
    means = [ests[n].mean for n in sorted(ests)]
    checks = {
        "survival_nonincreasing_in_n": all(a >= b for a, b in
                                           zip(means, means[1:])),
        "blocking_probability_positive": blocking > 0.0,
    }
    metrics: dict = {f"survival_to_{n}": ests[n] for n in sorted(ests)}
    metrics["annulus_blocking_probability"] = blocking
    return ExperimentReport(
        "linear_growth",
        {"graph": g.family, "lambda": params.lam, "t": params.t,
         "n": max(distances), "blocking_annulus": (blocking_inner, outer)},
        metrics, checks, seed)


# ---------------------------------------------------------------------------
# non-amenable pipeline
# ---------------------------------------------------------------------------


def escape_probability(g: Graph, A, horizon: int, replicas: int,
                       seed: int) -> Estimate:
    """Stationary-start probability of not returning to A within the
    horizon (a proxy for never returning): start from pi restricted to A."""
    A = sorted(set(int(a) for a in A))
    w = np.array([g.pi[a] for a in A])
    cum = np.cumsum(w / w.sum())
    hits = 0
    for r in range(replicas):
        st = Stream(seed, "escape", r)
        x = A[int(np.searchsorted(cum, st.uniform()))]
        cur = x
        returned = False
        for _ in range(horizon):
            if g.is_boundary(cur):
                break
            row = g.out_neighbors(cur)
            if g.weights is None:
                cur = int(row[int(st.uniform() * row.size)])
            else:
                cw = g.row_cumweights(cur)
                cur = int(row[np.searchsorted(cw, st.uniform() * cw[-1],
                                              side="right")])
            if cur in A:
                returned = True
                break
        hits += not returned
    return from_binomial(hits, replicas, seed)


def nonamenable_pipeline(g: Graph, lam: float, t_list, replicas: int,
                         seed: int, *, survival_radius: int | None = None,
                         spectral_nmax: int | None = None,
                         escape_radius: int = 3,
                         escape_horizon: int = 150,
                         amenable_cutoff: float = 0.995) -> ExperimentReport:
    """Estimate the spectral radius and stationary control, evaluate the
    sufficient-lifespan bound, then bracket the empirical critical lifespan
    by survival measurements over t_list (hi = smallest tested lifespan with
    confidently positive survival)."""
    if g.directed:
        raise GraphError("pipeline needs an undirected reversible network")
    if spectral_nmax is None:
        spectral_nmax = 2 * min(20, max(2, g.max_radius - 1))
    spec_est = spectral_radius_estimate(g, g.origin, spectral_nmax)
    rho = spec_est.estimate
    if rho >= amenable_cutoff:
        raise GraphError(
            f"estimated spectral radius {rho:.4f} is too close to 1: "
            "amenable input rejected")
    K = stationary_control_constant(g)
    bound = nonamenable_t_bound(rho, K, lam)
    if survival_radius is None:
        survival_radius = min(g.max_radius, 16)
    surv = {}
    for i, t in enumerate(t_list):
        sv = survival_probability(g, FrogParams(lam, float(t)),
                                  survival_radius, replicas,
                                  Stream(seed, "t", i).key)
        surv[float(t)] = sv.estimate
    confident = [t for t, e in surv.items()
                 if e.mean > 0.0 and e.mean - 3.0 * e.stderr > 0.0]
    bracket_hi = min(confident) if confident else math.inf
    below = [t for t in surv if t < bracket_hi]
    bracket_lo = max(below) if below else 0.0
    esc = escape_probability(g, ball(g, g.origin, escape_radius),
                             escape_horizon, replicas, Stream(seed, "esc").key)
    checks = {
        "empirical_bracket_below_bound": bracket_hi <= bound.bound,
        "escape_probability_large": esc.mean >= (1.0 - rho) - 0.05,
    }
    metrics: dict = {
        "rho_hat": rho,
        "K_control": K,
        "lifespan_bound": bound.bound,
        "alpha": bound.alpha,
        "escape_probability": esc,
        "bracket_lo": bracket_lo,
        "bracket_hi": bracket_hi,
    }
    for t, e in sorted(surv.items()):
        metrics[f"survival_t_{t:g}"] = e
    return ExperimentReport(
        "nonamenable",
        {"graph": g.family, "lambda": lam, "t": max(t_list),
         "n": survival_radius},
        metrics, checks, seed)
