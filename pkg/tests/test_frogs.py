import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frogsim import (FrogParams, GraphError, GraphSpec, ParticleField,
                     Stream, arrow_closure, ball, build_graph,
                     ep_exploration_sample, exit_conditional_jumps,
                     explore_cluster, from_samples, good_vertices,
                     restricted_activation, sphere_activation_profile)


def make_out_tree(tmp_path, degree=3, depth=5):
    lines = ["frogsim-graph v1 directed"]
    nxt = 1
    frontier = [0]
    for _ in range(depth):
        new = []
        for v in frontier:
            for _ in range(degree):
                lines.append(f"{v} {nxt} 1.0")
                new.append(nxt)
                nxt += 1
        frontier = new
    p = tmp_path / "out_tree.txt"
    p.write_text("\n".join(lines) + "\n")
    return build_graph(GraphSpec("weighted_file", path=str(p)))


def test_params_validation():
    with pytest.raises(ValueError):
        FrogParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        FrogParams(1.0, math.inf)


def test_field_requery_identical(tree8):
    fld = ParticleField(tree8, 99)
    p = FrogParams(1.3, 0.9)
    assert fld.particles(5, p) == fld.particles(5, p)
    # an independent instance with the same seed replays identically
    fld2 = ParticleField(tree8, 99)
    assert fld.particles(5, p) == fld2.particles(5, p)


def test_field_poisson_counts(tree8):
    fld = ParticleField(tree8, 4)
    lam = 2.0
    counts = [fld.count_at(x, lam) for x in range(4000)]
    mean = sum(counts) / len(counts)
    assert abs(mean - lam) < 3 * math.sqrt(lam / len(counts))


def test_cluster_trivial_cases(tree8):
    assert explore_cluster(tree8, FrogParams(0.0, 1.0),
                           ParticleField(tree8, 1)).activated == {0}
    cl = explore_cluster(tree8, FrogParams(1.0, 0.0), ParticleField(tree8, 1))
    assert cl.activated == {0} and cl.stop_reason == "exhausted"


def test_cluster_subcritical_rarely_reaches_radius(tree12):
    # lam t = 0.5: certain extinction, radius-12 hits should be absent
    hits = 0
    for seed in range(500):
        cl = explore_cluster(tree12, FrogParams(0.5, 1.0),
                             ParticleField(tree12, seed), radius=12)
        hits += cl.stop_reason == "radius_reached"
    assert hits <= 2


@given(st.integers(min_value=0, max_value=10**9))
@settings(max_examples=40, deadline=None)
def test_abelian_schedule_invariance(tree8, seed):
    params = FrogParams(1.0, 1.0)
    sets = []
    for sched in ("fifo", "lifo", "random"):
        cl = explore_cluster(tree8, params, ParticleField(tree8, seed),
                             schedule=sched, rng=Stream(seed, sched))
        sets.append(cl.activated)
    assert sets[0] == sets[1] == sets[2]


@given(st.integers(min_value=0, max_value=10**9))
@settings(max_examples=30, deadline=None)
def test_monotone_coupling_in_both_parameters(z2_box20, seed):
    small = explore_cluster(z2_box20, FrogParams(0.6, 0.7),
                            ParticleField(z2_box20, seed))
    big = explore_cluster(z2_box20, FrogParams(0.9, 1.2),
                          ParticleField(z2_box20, seed))
    assert small.activated <= big.activated


def test_total_particles_counts_activated_vertices(tree8):
    params = FrogParams(1.5, 1.0)
    fld = ParticleField(tree8, 31)
    cl = explore_cluster(tree8, params, fld)
    assert cl.total_particles == sum(fld.count_at(v, 1.5) for v in cl.activated)


def test_particle_budget_stop(tree12):
    cl = explore_cluster(tree12, FrogParams(3.0, 3.0),
                         ParticleField(tree12, 11), particle_budget=10)
    assert cl.stop_reason == "particle_budget"


def test_activated_mass_tail_decays_exponentially(tree8):
    # subcritical regime: the total number of woken particles has an
    # exponential moment, visible as log-linear tail decay
    import numpy as np

    totals = []
    for seed in range(3000):
        cl = explore_cluster(tree8, FrogParams(0.5, 1.0),
                             ParticleField(tree8, seed))
        totals.append(cl.total_particles)
    kmax = 25
    counts = np.bincount(np.minimum(totals, kmax), minlength=kmax + 1)
    tail = np.cumsum(counts[::-1])[::-1] / len(totals)
    ks = [k for k in range(1, kmax) if tail[k] >= 10 / len(totals)]
    slope = np.polyfit(ks, np.log(tail[ks]), 1)[0]
    assert slope < -0.1


# -- restricted activation ----------------------------------------------


def test_harpoon_reflexive_and_zero_density(tree8):
    S = ball(tree8, 0, 2)
    ra = restricted_activation(tree8, S, FrogParams(0.0, 1.0),
                               ParticleField(tree8, 3))
    assert ra.harpoon[0] is True
    assert sum(ra.harpoon.values()) == 1 and ra.exiters == 0


def test_harpoon_subset_of_cluster(tree8):
    params = FrogParams(1.0, 1.0)
    S = ball(tree8, 0, 2)
    for seed in range(100):
        ra = restricted_activation(tree8, S, params, ParticleField(tree8, seed))
        cl = explore_cluster(tree8, params, ParticleField(tree8, seed))
        assert {x for x, h in ra.harpoon.items() if h} <= cl.activated


def test_singleton_window_exiters(z2_box20):
    # every particle at the origin that jumps at all leaves S = {0}
    params = FrogParams(2.0, 1.0)
    vals = []
    for seed in range(4000):
        fld = ParticleField(z2_box20, seed)
        ra = restricted_activation(z2_box20, {0}, params, fld)
        vals.append(ra.exiters)
    est = from_samples(vals, 0)
    expect = params.lam * (1 - math.exp(-params.t))
    assert abs(est.mean - expect) <= 3 * est.stderr


def test_window_must_hold_origin_and_avoid_frontier(tree8):
    with pytest.raises(GraphError):
        restricted_activation(tree8, {1, 2}, FrogParams(1, 1),
                              ParticleField(tree8, 0))
    bad = {0} | {v for v in range(tree8.vertex_count)
                 if tree8.boundary_mask[v]}
    with pytest.raises(GraphError):
        restricted_activation(tree8, bad, FrogParams(1, 1),
                              ParticleField(tree8, 0))


# -- good vertices -------------------------------------------------------


def test_good_vertices_singleton(z2_box20):
    assert good_vertices(z2_box20, {5}, FrogParams(0.0, 1.0), Stream(1)) == {5}


def test_good_vertices_zero_density_empty(z2_box20):
    B = ball(z2_box20, 0, 2)
    assert len(B) >= 5
    assert good_vertices(z2_box20, B, FrogParams(0.0, 64.0), Stream(2)) == set()


def test_good_vertices_exist_in_active_regime():
    g = build_graph(GraphSpec("lattice_box", d=2, radius=24))
    B = ball(g, 0, 8)
    found = 0
    trials = 50
    for s in range(trials):
        got = good_vertices(g, B, FrogParams(1.0, 64.0), Stream(60, s),
                            stop_after=1)
        found += bool(got)
    assert found >= 0.9 * trials


def test_arrow_closure_reflexive_and_contained(z2_box20):
    B = ball(z2_box20, 0, 3)
    fld = ParticleField(z2_box20, 8)
    A = arrow_closure(z2_box20, B, 0, FrogParams(1.0, 1.0), fld)
    assert 0 in A and A <= B


# -- exploration process -------------------------------------------------


def test_ep_zero_density(tree8):
    ep = ep_exploration_sample(tree8, {0}, FrogParams(0.0, 1.0), Stream(5))
    assert ep.generation_sizes == [1, 0]


def test_ep_singleton_window_mean_children(tmp_path):
    # on an outward tree every visited vertex is fresh, so the per-particle
    # child count is exactly the jump count: E[Z1] = lam * t
    g = make_out_tree(tmp_path, degree=3, depth=6)
    lam, t = 0.8, 1.2
    vals = []
    for rep in range(4000):
        ep = ep_exploration_sample(g, {0}, FrogParams(lam, t),
                                   Stream(17, rep), max_generations=1)
        vals.append(ep.generation_sizes[1])
    est = from_samples(vals, 17)
    assert abs(est.mean - lam * t) <= 3 * est.stderr


def test_ep_first_generation_dominated_by_phi_tilde(tree8):
    # the per-parent child mean is capped by the weighted window functional
    from frogsim import phi_tilde_hat

    S = ball(tree8, 0, 2)
    params = FrogParams(0.3, 1.0)
    z1 = []
    for rep in range(3000):
        ep = ep_exploration_sample(tree8, S, params, Stream(42, rep),
                                   max_generations=1)
        z1.append(ep.generation_sizes[1] if len(ep.generation_sizes) > 1 else 0)
    est = from_samples(z1, 42)
    pt = phi_tilde_hat(tree8, S, params, 3000, 43, conditional_replicas=4000)
    assert est.mean <= pt.mean + 3 * math.hypot(est.stderr, pt.stderr)


def test_ep_subcritical_dies(tree8):
    sizes = []
    for rep in range(200):
        ep = ep_exploration_sample(tree8, ball(tree8, 0, 2),
                                   FrogParams(0.3, 1.0), Stream(23, rep))
        assert not ep.budget_exhausted
        sizes.append(len(ep.generation_sizes))
        assert ep.generation_sizes[-1] == 0
    assert max(sizes) < 50


# -- shell profile and conditional jumps ---------------------------------


def test_sphere_profile_shapes(tree8):
    S = ball(tree8, 0, 4)
    prof = sphere_activation_profile(tree8, S, FrogParams(1.0, 1.0), 300,
                                     Stream(29))
    assert set(prof) == {1, 2, 3, 4, 5}  # interior depths of a radius-4 ball
    for est in prof.values():
        assert est.mean >= 0.0


def test_sphere_profile_zero_density(tree8):
    S = ball(tree8, 0, 3)
    prof = sphere_activation_profile(tree8, S, FrogParams(0.0, 1.0), 50,
                                     Stream(30))
    # only the origin is ever reached; it sits at depth 4 in a radius-3 ball
    assert prof[4].mean == 1.0
    assert all(prof[r].mean == 0.0 for r in prof if r != 4)


def test_exit_conditional_jumps_singleton(z2_box20):
    t = 1.0
    stats = exit_conditional_jumps(z2_box20, {0}, 0, t, 40_000, Stream(31))
    expect = t / (1 - math.exp(-t))  # mean of N given N >= 1
    assert stats.estimate is not None
    assert abs(stats.estimate.mean - expect) <= 3 * stats.estimate.stderr
    assert stats.bound == 4 * (t + 1)  # Delta^{D_x} (t + D_x) at depth one


def test_exit_conditional_small_t_limit(z2_box20):
    # single-jump exits dominate: E[N | N >= 1] = t/(1-e^{-t}) -> 1
    t = 0.05
    stats = exit_conditional_jumps(z2_box20, {0}, 0, t, 50_000, Stream(33))
    assert stats.estimate is not None
    expect = t / (1 - math.exp(-t))
    assert abs(stats.estimate.mean - expect) <= 3 * stats.estimate.stderr
    assert stats.estimate.mean < 1.05


def test_exit_conditional_zero_accepts(tree8):
    S = ball(tree8, 0, 4)
    stats = exit_conditional_jumps(tree8, S, 0, 0.01, 200, Stream(37))
    assert stats.accepted == 0 and stats.estimate is None
    assert stats.exit_rate == 0.0
