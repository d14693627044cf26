import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.special import iv

from frogsim import (GraphError, GraphSpec, SeriesToleranceError, Stream,
                     ball, build_graph, exit_probability_exact,
                     heat_kernel_exact, heat_kernel_row,
                     hitting_probability_exact, range_statistics,
                     sample_jump_count, sample_trajectory,
                     self_intersection_bound, self_intersection_profile,
                     truncated_green)


# -- sampling ----------------------------------------------------------


def test_jump_count_zero_horizon():
    s = Stream(1)
    assert all(sample_jump_count(0.0, s) == 0 for _ in range(20))


def test_jump_count_mean():
    s = Stream(2)
    n = 400_000
    mean = sum(sample_jump_count(1.0, s) for _ in range(n)) / n
    assert abs(mean - 1.0) < 3.0 / math.sqrt(n)  # CLT: 3 sigma/sqrt(n), sigma=1


def test_jump_count_chernoff_tail():
    # standard Poisson Chernoff rate at L=2:
    # P(N > (1+L)t) <= exp(-t ((1+L) log(1+L) - L))
    t, L = 4.0, 2.0
    bound = math.exp(-t * ((1 + L) * math.log(1 + L) - L))
    s = Stream(3)
    n = 200_000
    exceed = sum(sample_jump_count(t, s) > (1 + L) * t for _ in range(n)) / n
    assert exceed <= bound


def test_trajectory_zero_horizon(z2_box20):
    tr = sample_trajectory(z2_box20, 0, 0.0, Stream(4))
    assert tr.jumps == () and tr.visited == {0}


def test_trajectory_mean_jumps(z2_box40):
    s = Stream(5)
    n = 50_000
    mean = sum(sample_trajectory(z2_box40, 0, 1.0, s.child(i)).jump_count
               for i in range(n)) / n
    assert abs(mean - 1.0) < 0.015


def test_trajectory_first_jump_rate(z2_box40):
    # P(range not a singleton) = P(first Exp(1) clock <= t) = 1 - e^{-1}
    s = Stream(6)
    n = 40_000
    moved = sum(sample_trajectory(z2_box40, 0, 1.0, s.child(i)).jump_count > 0
                for i in range(n)) / n
    p = 1 - math.exp(-1)
    assert abs(moved - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_trajectory_stops_at_frontier():
    g = build_graph(GraphSpec("lattice_box", d=1, radius=2))
    absorbed = 0
    for i in range(2000):
        tr = sample_trajectory(g, 0, 30.0, Stream(7, i))
        if tr.absorbed:
            absorbed += 1
            assert g.boundary_mask[tr.jumps[-1]]
            assert not any(g.boundary_mask[v] for v in tr.jumps[:-1])
    assert absorbed > 1900  # t=30 on a radius-2 segment almost surely exits


# -- exact series ------------------------------------------------------


def test_exit_probability_singleton(z2_box20):
    tab = exit_probability_exact(z2_box20, {0}, 1.0)
    assert abs(tab.exit_prob[0] - (1 - math.exp(-1))) < 1e-10
    assert tab.truncation_error < 1e-10


def test_exit_probability_zero_horizon(z2_box20):
    tab = exit_probability_exact(z2_box20, ball(z2_box20, 0, 2), 0.0)
    assert all(p == 0.0 for p in tab.exit_prob.values())


def test_exit_probability_two_state_generator_oracle(z1_box):
    # S = {origin, +1}: continuous-time generator on two states, killed
    # outside; survival = expm oracle
    S = [0, 2]
    assert z1_box.dist[2] == 1
    tab = exit_probability_exact(z1_box, S, 1.0)
    Q = np.array([[-1.0, 0.5], [0.5, -1.0]])
    surv = expm(Q * 1.0) @ np.ones(2)
    assert abs(tab.exit_prob[0] - (1 - surv[0])) < 1e-9
    assert abs(tab.exit_prob[2] - (1 - surv[1])) < 1e-9


def test_exit_probability_monotone_in_time(tree8):
    S = ball(tree8, 0, 2)
    prev = {x: 0.0 for x in S}
    for t in (0.25, 0.5, 1.0, 2.0, 4.0):
        tab = exit_probability_exact(tree8, S, t)
        for x in S:
            assert tab.exit_prob[x] >= prev[x] - 1e-12
        prev = tab.exit_prob


def test_exit_probability_monotone_under_enlargement(tree8):
    small = ball(tree8, 0, 1)
    big = ball(tree8, 0, 3)
    t_small = exit_probability_exact(tree8, small, 1.5)
    t_big = exit_probability_exact(tree8, big, 1.5)
    for x in small:
        assert t_small.exit_prob[x] >= t_big.exit_prob[x] - 1e-12


def test_exit_probability_rejects_frontier(z2_box20):
    S = {0} | set(np.flatnonzero(z2_box20.boundary_mask)[:1].tolist())
    with pytest.raises(GraphError):
        exit_probability_exact(z2_box20, S, 1.0)


def test_series_tolerance_budget(z2_box20):
    with pytest.raises(SeriesToleranceError):
        exit_probability_exact(z2_box20, {0}, 5.0, tol=1e-10, max_terms=3)


def test_leakage_budget_enforced():
    from frogsim import LeakageBudgetError
    g = build_graph(GraphSpec("lattice_box", d=1, radius=4))
    # a horizon of 40 on a radius-4 segment drains almost all mass
    with pytest.raises(LeakageBudgetError):
        heat_kernel_exact(g, 0, 0, 40.0, max_leakage=0.5)
    with pytest.raises(LeakageBudgetError):
        truncated_green(g, 0, 0, 40.0, max_leakage=0.5)
    with pytest.raises(LeakageBudgetError):
        hitting_probability_exact(g, 0, 1, 40.0, max_leakage=0.5)
    # comfortably inside the budget at a short horizon
    assert heat_kernel_exact(g, 0, 0, 0.5, max_leakage=0.5) > 0.0


@pytest.mark.parametrize("family,kwargs", [
    ("lattice_box", dict(d=2, radius=12)),
    ("regular_tree", dict(degree=3, depth=8)),
    ("ladder", dict(width=2, length=30)),
])
def test_exit_probability_matches_monte_carlo(family, kwargs):
    g = build_graph(GraphSpec(family, **kwargs))
    rng = Stream(11, family)
    for trial in range(10):
        r = 1 + rng.randint(3)
        S = ball(g, g.origin, r)
        S = {v for v in S if not g.boundary_mask[v]}
        xs = sorted(S)
        x = xs[rng.randint(len(xs))]
        t = 0.5 + rng.uniform() * 1.5
        tab = exit_probability_exact(g, S, t)
        n = 2500
        hits = 0
        for i in range(n):
            tr = sample_trajectory(g, x, t, rng.child("mc", trial, i))
            hits += any(v not in S for v in tr.jumps)
        p = tab.exit_prob[x]
        se = math.sqrt(max(p * (1 - p), 1e-9) / n)
        assert abs(hits / n - p) <= 3 * se + 1e-9


def test_hitting_probability_trivia(z2_box20):
    assert hitting_probability_exact(z2_box20, 3, 3, 1.0) == 1.0
    assert hitting_probability_exact(z2_box20, 0, 3, 0.0) == 0.0


def test_hitting_probability_neighbors_vs_mc(z2_box40):
    y = 1  # a lattice neighbor of the origin
    p = hitting_probability_exact(z2_box40, 0, y, 1.0)
    rng = Stream(13)
    n = 60_000
    hits = sum(y in sample_trajectory(z2_box40, 0, 1.0, rng.child(i)).visited
               for i in range(n))
    se = math.sqrt(p * (1 - p) / n)
    assert abs(hits / n - p) <= 3 * se


def test_heat_kernel_zero_horizon(z2_box20):
    assert heat_kernel_exact(z2_box20, 0, 0, 0.0) == 1.0
    assert heat_kernel_exact(z2_box20, 0, 1, 0.0) == 0.0


def test_heat_kernel_z1_bessel(z1_box):
    # rate-1 walk on the integers: p_t(0,0) = e^{-t} I_0(t)
    val = heat_kernel_exact(z1_box, 0, 0, 1.0, tol=1e-12)
    assert abs(val - math.exp(-1) * iv(0, 1.0)) < 1e-10


def test_heat_kernel_row_sums_and_reversibility(tree8, z2_box40):
    for g, t in ((tree8, 2.0), (z2_box40, 5.0)):
        row = heat_kernel_row(g, g.origin, t)
        assert abs(row.row_sum() - 1.0) < 1e-9
        x, y = 0, 2
        fwd = heat_kernel_exact(g, x, y, t)
        bwd = heat_kernel_exact(g, y, x, t)
        assert abs(g.pi[x] * fwd - g.pi[y] * bwd) < 1e-9


def test_heat_kernel_z2_decay(z2_box40):
    vals = {t: t * heat_kernel_exact(z2_box40, 0, 0, t) for t in (10.0, 20.0, 40.0)}
    lo, hi = min(vals.values()), max(vals.values())
    assert hi / lo < 1.10
    # cross-check against the product of two half-rate 1d kernels
    for t, v in vals.items():
        oracle = (math.exp(-t / 2) * iv(0, t / 2)) ** 2
        assert abs(v / t - oracle) < 1e-8


def test_truncated_green_zero(z2_box20):
    assert truncated_green(z2_box20, 0, 0, 0.0) == 0.0


def test_truncated_green_z2_log_growth():
    # planar on-diagonal growth is log t with slope 1/pi: the raw G/log t
    # ratio carries a large O(1) offset (0.73 vs 0.53 at e^2, e^4), so test
    # the log-increments, which the series oracle puts at 0.658 and 0.639
    g = build_graph(GraphSpec("lattice_box", d=2, radius=60))
    vals = {k: truncated_green(g, 0, 0, math.e ** k) for k in (2, 4, 6)}
    inc1 = vals[4] - vals[2]
    inc2 = vals[6] - vals[4]
    assert abs(inc1 - inc2) / inc1 < 0.10
    assert abs(inc2 - 2 / math.pi) / (2 / math.pi) < 0.15


def test_truncated_green_z3_bounded():
    g = build_graph(GraphSpec("lattice_box", d=3, radius=40))
    v50 = truncated_green(g, 0, 0, 50.0)
    v100 = truncated_green(g, 0, 0, 100.0)
    assert v50 <= v100 <= 1.1 * v50


def test_truncated_green_small_time_quadrature(z1_box):
    # independent oracle: composite Simpson quadrature of the heat kernel
    t = 2.0
    xs = np.linspace(0, t, 41)
    ys = [heat_kernel_exact(z1_box, 0, 0, float(s), tol=1e-12) for s in xs]
    simpson = (xs[1] - xs[0]) / 3 * (
        ys[0] + ys[-1] + 4 * sum(ys[1:-1:2]) + 2 * sum(ys[2:-2:2]))
    assert abs(truncated_green(z1_box, 0, 0, t) - simpson) < 1e-6


# -- range statistics --------------------------------------------------


def test_range_zero_horizon(z2_box20):
    rs = range_statistics(z2_box20, 0, 0.0, 50, Stream(17))
    assert rs.range_size.mean == 1.0 and rs.range_size.stderr == 0.0


def test_range_restriction(z2_box20):
    B = ball(z2_box20, 0, 3)
    H = ball(z2_box20, 0, 1)
    rs = range_statistics(z2_box20, 0, 2.0, 400, Stream(18), B=B, H=H)
    assert 0.0 <= rs.restricted.mean <= len(B) - len(H)


def test_range_tree_linear_lower_tail(tree12):
    rs = range_statistics(tree12, 0, 100.0, 300, Stream(19), alphas=(0.05,))
    assert rs.small_range_tail[0.05].mean <= 0.05


def test_self_intersection_trivia(z2_box20):
    est = self_intersection_profile(z2_box20, 0, 10.0, 6, 50, Stream(20))
    assert est.mean == 0.0  # subsequence has <= 1 term
    est2 = self_intersection_profile(z2_box20, 0, 200.0, 1, 200, Stream(21))
    assert est2.mean > 0.0


def test_self_intersection_tree_bound(tree12):
    rho = 2 * math.sqrt(2) / 3
    est = self_intersection_profile(tree12, 0, 200.0, 20, 400, Stream(22))
    assert est.mean <= self_intersection_bound(200.0, 20, rho) + 3 * est.stderr
