"""Batch front-end.

Reads a flat key=value config (plus command-line overrides), fans replicas
out over a deterministic worker pool, and writes three artifacts into the
output directory: results.csv (fixed schema), report.json, and plot.gp (a
gnuplot script that reads only the CSV). Reruns of the same config and seed
are byte-identical regardless of worker count.

Usage:
    frogsim run config.txt [key=value ...]
    frogsim validate config.txt [key=value ...]

Exit status: 0 success, 2 config validation failure, 3 particle-budget
exhaustion while estimating.
"""

from __future__ import annotations

import multiprocessing as mp
import sys
from dataclasses import dataclass, field as dc_field, fields as dc_fields
from pathlib import Path

from .graphs import GraphError, GraphSpec, build_graph
from .frogs import FrogParams, ParticleField, explore_cluster
from .experiments import (ExperimentReport, NetConfig,
                          abelian_invariance_check, bernoulli_edge_coupling,
                          format_csv, linear_growth_experiment,
                          nonamenable_pipeline, renormalization_experiment)
from .rng import Stream
from .stats import from_binomial

EXPERIMENTS = ("survival_sweep", "bernoulli_coupling", "abelian",
               "linear_growth", "nonamenable", "renormalization")


@dataclass
class RunConfig:
    experiment: str = ""
    family: str = "regular_tree"
    d: int = 2
    radius: int = 20
    degree: int = 3
    depth: int = 12
    width: int = 2
    length: int = 240
    path: str = ""
    boundary_mode: str = "absorbing"
    lam: str = "1.0"          # value or lo:hi:step grid
    t: str = "1.0"            # value or lo:hi:step grid
    n: int = 10
    replicas: int = 100
    seed: int | None = None
    out: str = "out"
    workers: int = 1
    max_particles: int = 2_000_000
    max_vertices: int = 20_000_000
    # experiment-specific knobs
    t_list: str = "0.5:10:auto"   # nonamenable: comma list, e.g. 0.5,2,10
    a: int = 8
    net_extent: int = 2
    decay_density: float = 0.25

    def graph_spec(self) -> GraphSpec:
        return GraphSpec(self.family, d=self.d, radius=self.radius,
                         degree=self.degree, depth=self.depth,
                         width=self.width, length=self.length,
                         path=self.path, boundary_mode=self.boundary_mode,
                         max_vertices=self.max_vertices)


_KEY_ALIASES = {"lambda": "lam"}
_INT_KEYS = {"d", "radius", "degree", "depth", "width", "length", "n",
             "replicas", "seed", "workers", "max_particles", "max_vertices",
             "a", "net_extent"}
_FLOAT_KEYS = {"decay_density"}


def parse_config(path: str | None, overrides=()) -> RunConfig:
    cfg = RunConfig()
    pairs = []
    if path:
        text = Path(path).read_text(encoding="utf-8")
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line is not key=value: {line!r}")
            k, v = line.split("=", 1)
            pairs.append((k.strip(), v.strip()))
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override is not key=value: {item!r}")
        k, v = item.split("=", 1)
        pairs.append((k.strip(), v.strip()))
    known = {f.name for f in dc_fields(RunConfig)}
    for k, v in pairs:
        k = _KEY_ALIASES.get(k, k)
        if k not in known:
            raise ValueError(f"unknown config key {k!r}")
        if k in _INT_KEYS:
            setattr(cfg, k, int(v))
        elif k in _FLOAT_KEYS:
            setattr(cfg, k, float(v))
        else:
            setattr(cfg, k, v)
    return cfg


def parse_grid(text: str) -> list[float]:
    """A float, or an inclusive lo:hi:step grid."""
    text = text.strip()
    if ":" in text:
        lo_s, hi_s, step_s = text.split(":")
        lo, hi, step = float(lo_s), float(hi_s), float(step_s)
        if step <= 0 or hi < lo:
            raise ValueError(f"bad grid {text!r}")
        vals = []
        k = 0
        while True:
            v = lo + k * step
            if v > hi + 1e-9:
                break
            vals.append(round(v, 12))
            k += 1
        return vals
    return [float(text)]


def expected_truncation_radius(cfg: RunConfig) -> int | None:
    if cfg.family == "lattice_box":
        return cfg.radius
    if cfg.family == "regular_tree":
        return cfg.depth
    if cfg.family == "ladder":
        return cfg.length + cfg.width - 1
    return None


def validate(cfg: RunConfig) -> list[str]:
    """All violations, never just the first."""
    problems = []
    if cfg.experiment not in EXPERIMENTS:
        problems.append(
            f"experiment must be one of {', '.join(EXPERIMENTS)}; "
            f"got {cfg.experiment!r}")
    if cfg.replicas < 1:
        problems.append("replicas must be >= 1")
    if cfg.seed is None:
        problems.append("seed is required (no wall-clock default)")
    if cfg.workers < 1:
        problems.append("workers must be >= 1")
    if cfg.max_particles <= 0 or cfg.max_vertices <= 0:
        problems.append("budgets must be positive")
    for name, text in (("lambda", cfg.lam), ("t", cfg.t)):
        try:
            vals = parse_grid(text)
            if any(v < 0 for v in vals):
                problems.append(f"{name} values must be >= 0")
        except ValueError as exc:
            problems.append(f"bad {name} grid: {exc}")
    if cfg.family not in ("lattice_box", "regular_tree", "ladder",
                          "weighted_file"):
        problems.append(f"unknown graph family {cfg.family!r}")
    if cfg.family == "weighted_file" and not cfg.path:
        problems.append("weighted_file needs path=")
    trunc = expected_truncation_radius(cfg)
    if (cfg.experiment in ("survival_sweep", "nonamenable")
            and trunc is not None and cfg.n > trunc):
        problems.append(
            f"survival radius n={cfg.n} exceeds the truncation radius "
            f"{trunc} of the requested graph")
    if cfg.n < 0:
        problems.append("n must be >= 0")
    return problems


# ---------------------------------------------------------------------------
# survival sweep with a deterministic worker pool
# ---------------------------------------------------------------------------

_WORKER_STATE: dict = {}


def _sweep_worker_init(spec_kwargs):
    _WORKER_STATE["graph"] = build_graph(GraphSpec(**spec_kwargs))


def _sweep_worker(task):
    """One replica: survival indicators for every grid point, on one shared
    field keyed only by (seed, replica) so grid points ride the coupling."""
    (seed, replica, lam_grid, t_grid, n, budget) = task
    g = _WORKER_STATE["graph"]
    out = []
    censored = 0
    for lam in lam_grid:
        for t in t_grid:
            fld = ParticleField(g, Stream(seed, "survival", replica).key)
            if n == 0:
                cl = explore_cluster(g, FrogParams(lam, t), fld,
                                     vertex_budget=2, particle_budget=budget)
                out.append(1 if len(cl.activated) > 1 else 0)
                continue
            cl = explore_cluster(g, FrogParams(lam, t), fld, radius=n,
                                 schedule="lifo", particle_budget=budget)
            out.append(1 if cl.stop_reason == "radius_reached" else 0)
            censored += cl.stop_reason == "particle_budget"
    return replica, out, censored


def _run_survival_sweep(cfg: RunConfig):
    lam_grid = parse_grid(cfg.lam)
    t_grid = parse_grid(cfg.t)
    spec_kwargs = dict(family=cfg.family, d=cfg.d, radius=cfg.radius,
                       degree=cfg.degree, depth=cfg.depth, width=cfg.width,
                       length=cfg.length, path=cfg.path,
                       boundary_mode=cfg.boundary_mode,
                       max_vertices=cfg.max_vertices)
    tasks = [(cfg.seed, r, lam_grid, t_grid, cfg.n, cfg.max_particles)
             for r in range(cfg.replicas)]
    if cfg.workers > 1:
        with mp.Pool(cfg.workers, initializer=_sweep_worker_init,
                     initargs=(spec_kwargs,)) as pool:
            results = pool.map(_sweep_worker, tasks, chunksize=16)
    else:
        _sweep_worker_init(spec_kwargs)
        results = [_sweep_worker(t) for t in tasks]
    results.sort(key=lambda item: item[0])
    npoints = len(lam_grid) * len(t_grid)
    hits = [0] * npoints
    censored = 0
    for _, indicators, cens in results:
        censored += cens
        for i, v in enumerate(indicators):
            hits[i] += v
    rows = []
    metrics = {}
    i = 0
    graph_name = GraphSpec(**spec_kwargs).describe()
    for lam in lam_grid:
        for t in t_grid:
            est = from_binomial(hits[i], cfg.replicas, cfg.seed)
            rows.append({"experiment": "survival_sweep", "graph": graph_name,
                         "lambda": lam, "t": t, "n": cfg.n,
                         "replicas": cfg.replicas, "seed": cfg.seed,
                         "metric": "survival", "mean": est.mean,
                         "stderr": est.stderr})
            metrics[f"survival_lam_{lam:g}_t_{t:g}"] = est
            i += 1
    report = ExperimentReport(
        "survival_sweep",
        {"graph": graph_name, "lambda": cfg.lam, "t": cfg.t, "n": cfg.n,
         "censored": censored},
        metrics, {"no_budget_exhaustion": censored == 0}, cfg.seed)
    return rows, report, censored


_PLOT_TEMPLATE = """\
# gnuplot script; reads only results.csv
set datafile separator ','
set key off
set xlabel 'lambda'
set ylabel 'estimate'
set grid
plot 'results.csv' every ::1 using 3:9 with linespoints pt 7
"""


def run(cfg: RunConfig) -> int:
    """Execute the configured experiment; returns the process exit status."""
    problems = validate(cfg)
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    censored = 0
    try:
        if cfg.experiment == "survival_sweep":
            rows, report, censored = _run_survival_sweep(cfg)
        else:
            lam = parse_grid(cfg.lam)[0]
            t = parse_grid(cfg.t)[0]
            if cfg.experiment == "bernoulli_coupling":
                g = build_graph(cfg.graph_spec())
                report = bernoulli_edge_coupling(g, FrogParams(lam, t),
                                                 cfg.replicas, cfg.seed)
            elif cfg.experiment == "abelian":
                g = build_graph(cfg.graph_spec())
                seeds = [Stream(cfg.seed, "abelian", i).key
                         for i in range(cfg.replicas)]
                report = abelian_invariance_check(g, FrogParams(lam, t), seeds)
                report.seed = cfg.seed
            elif cfg.experiment == "linear_growth":
                report = linear_growth_experiment(
                    cfg.width, cfg.length, FrogParams(lam, t), cfg.replicas,
                    cfg.seed, distances=(cfg.n // 4, cfg.n // 2, cfg.n))
            elif cfg.experiment == "nonamenable":
                g = build_graph(cfg.graph_spec())
                ts = [float(s) for s in cfg.t_list.split(",")] \
                    if "," in cfg.t_list else [t]
                report = nonamenable_pipeline(g, lam, ts, cfg.replicas,
                                              cfg.seed, survival_radius=cfg.n)
            elif cfg.experiment == "renormalization":
                net = NetConfig(a=cfg.a, net_extent=cfg.net_extent)
                report = renormalization_experiment(
                    net, lam, cfg.replicas, cfg.seed,
                    decay_density=cfg.decay_density)
            rows = report.csv_rows()
    except GraphError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    (outdir / "results.csv").write_text(format_csv(rows), encoding="utf-8")
    (outdir / "report.json").write_text(report.to_json() + "\n",
                                        encoding="utf-8")
    (outdir / "plot.gp").write_text(_PLOT_TEMPLATE, encoding="utf-8")
    if censored:
        print(f"budget exhaustion: {censored} replicas censored",
              file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(__doc__)
        return 0
    cmd = argv[0]
    if cmd not in ("run", "validate"):
        print(f"unknown command {cmd!r}; expected run|validate",
              file=sys.stderr)
        return 2
    rest = argv[1:]
    path = None
    if rest and "=" not in rest[0]:
        path = rest[0]
        rest = rest[1:]
    try:
        cfg = parse_config(path, rest)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cmd == "validate":
        problems = validate(cfg)
        for p in problems:
            print(p)
        return 2 if problems else 0
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
