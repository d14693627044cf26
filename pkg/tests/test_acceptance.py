"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Every tolerance is pinned here; nothing defers to later calibration.
"""

import math
import subprocess
import sys

import pytest

from frogsim import (FrogParams, GraphSpec, NetConfig, ParticleField, Stream,
                     abelian_invariance_check, ball, bernoulli_edge_coupling,
                     build_graph, cluster_size_tail, edge_open_probability,
                     exit_probability_exact, from_samples, gw_oracle,
                     heat_kernel_row, linear_growth_experiment, mean_exiters,
                     nonamenable_pipeline, nonamenable_t_bound, phi_hat,
                     phi_tilde_hat, range_statistics,
                     renormalization_experiment, russo_inequality_check,
                     sample_trajectory, sharpness_constants,
                     spectral_radius_estimate, sphere_activation_profile,
                     survival_probability)


def report(num, ok, detail):
    line = f"ACCEPTANCE {num:02d}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


def test_01_abelian_invariance(tree12):
    rep = abelian_invariance_check(tree12, FrogParams(1.0, 1.0), range(1000))
    matches = 1000 - int(rep.metrics["mismatches"])
    report(1, rep.checks["all_schedules_agree"] and matches == 1000,
           f"{matches}/1000 seeds identical across fifo/lifo/random")


def test_02_subcritical_extinction():
    tree20 = build_graph(GraphSpec("regular_tree", degree=3, depth=20))
    sv = survival_probability(tree20, FrogParams(0.5, 1.0), 20, 2000, 202)
    tree12 = build_graph(GraphSpec("regular_tree", degree=3, depth=12))
    ct = cluster_size_tail(tree12, FrogParams(0.5, 1.0), 30, 2000, 203)
    ok = (sv.estimate.mean <= 0.01 and ct.slope < 0.0 and ct.r_squared >= 0.9)
    report(2, ok, f"survival-to-20 {sv.estimate.mean:.4f} <= 0.01, "
                  f"tail slope {ct.slope:.3f} < 0, R^2 {ct.r_squared:.3f} >= 0.9")


def test_03_edge_coupling_probability(tree8):
    rep = bernoulli_edge_coupling(tree8, FrogParams(2.0, 1.0), 0, 303,
                                  edge_trials=100_000)
    rate = rep.metrics["open_rate"]
    target = edge_open_probability(3, 2.0, 1.0)
    ok = abs(rate.mean - target) <= 3 * rate.stderr
    report(3, ok, f"open rate {rate.mean:.5f} within 3 s.e. "
                  f"({3 * rate.stderr:.5f}) of {target:.5f} "
                  f"over {rate.replicas} trials")


def test_04_exact_walk_oracles(tree8, z2_box20, ladder240):
    tab = exit_probability_exact(z2_box20, {0}, 1.0)
    exact_ok = abs(tab.exit_prob[0] - (1 - math.exp(-1))) < 1e-10

    rng = Stream(404)
    mc_ok = True
    triples = 0
    for g in (z2_box20, tree8, ladder240):
        for trial in range(4 if g is z2_box20 else 3):
            r = 1 + rng.randint(2)
            S = {v for v in ball(g, g.origin, r) if not g.boundary_mask[v]}
            xs = sorted(S)
            x = xs[rng.randint(len(xs))]
            t = 0.5 + 1.5 * rng.uniform()
            p = exit_probability_exact(g, S, t).exit_prob[x]
            n = 4000
            hits = sum(
                any(v not in S for v in
                    sample_trajectory(g, x, t, rng.child(triples, i)).jumps)
                for i in range(n))
            se = math.sqrt(max(p * (1 - p), 1e-9) / n)
            mc_ok &= abs(hits / n - p) <= 3 * se + 1e-9
            triples += 1

    rows_ok = True
    for g, t in ((tree8, 2.0), (z2_box20, 5.0)):
        rows_ok &= abs(heat_kernel_row(g, g.origin, t).row_sum() - 1.0) < 1e-9
    report(4, exact_ok and mc_ok and rows_ok,
           f"singleton exit exact to 1e-10; {triples} random (S,x,t) triples "
           "within 3 s.e.; heat-kernel row sums within 1e-9")


def test_05_phi_closed_forms(tree8, z2_box20):
    params = FrogParams(1.0, 1.0)
    ph0 = phi_hat(tree8, {0}, params, 400, 505)
    ok = abs(ph0.mean - 0.6321205588) <= max(3 * ph0.stderr, 1e-9)
    pt0 = phi_tilde_hat(tree8, {0}, params, 2000, 506,
                        conditional_replicas=20_000)
    ok &= abs(pt0.mean - 1.0) <= 3 * pt0.stderr
    details = [f"phi({{0}})={ph0.mean:.5f}", f"phi~({{0}})={pt0.mean:.4f}"]
    for g, name in ((z2_box20, "Z2"), (tree8, "T3")):
        for r in (1, 2):
            S = ball(g, g.origin, r)
            a = phi_hat(g, S, params, 3000, 507)
            b = mean_exiters(g, S, params, 3000, 508)
            gap = abs(a.mean - b.mean)
            lim = 3 * math.hypot(a.stderr, b.stderr)
            ok &= gap <= lim
            details.append(f"{name} B({r}) dual gap {gap:.4f}<= {lim:.4f}")
    report(5, ok, "; ".join(details))


def test_06_constant_comparison(tree8):
    ok = sharpness_constants(3, 0.0, 1.0).c == 0.0
    details = ["c(3,0,1)=0"]
    for lam, t in ((1.0, 1.0), (0.5, 2.0)):
        params = FrogParams(lam, t)
        consts = sharpness_constants(3, lam, t)
        for r in (1, 2):
            S = ball(tree8, tree8.origin, r)
            ph = phi_hat(tree8, S, params, 1500, 606)
            pt = phi_tilde_hat(tree8, S, params, 1500, 607)
            lhs = pt.mean + 3 * pt.stderr
            rhs = consts.C * max(ph.mean - 3 * ph.stderr, 0.0)
            ok &= lhs < rhs
            details.append(f"B({r})@({lam:g},{t:g}): {lhs:.3f} < C*phi")
    report(6, ok, "; ".join(details))


def test_07_shell_activation_bound(tree8):
    S = ball(tree8, tree8.origin, 4)
    prof = sphere_activation_profile(tree8, S, FrogParams(1.0, 1.0), 3000,
                                     Stream(707))
    K = sharpness_constants(3, 1.0, 1.0).K
    a1 = prof[1]
    ok = True
    details = [f"E|A_1|={a1.mean:.4f}", f"K={K:.2f}"]
    for r in (2, 3, 4):
        cap = K ** (r - 1) * a1.mean + 3 * math.hypot(
            prof[r].stderr, K ** (r - 1) * a1.stderr)
        ok &= prof[r].mean <= cap
        details.append(f"E|A_{r}|={prof[r].mean:.4f}<={cap:.3f}")
    report(7, ok, "; ".join(details))


def test_08_range_scaling():
    z2 = build_graph(GraphSpec("lattice_box", d=2, radius=170))
    stats2 = {}
    for a in (8, 16, 32):
        rs = range_statistics(z2, 0, float(a * a), 1000, Stream(808, a))
        stats2[a] = rs.range_size.mean * math.log(a) / (a * a)
    ratio2 = max(stats2.values()) / min(stats2.values())

    z3 = build_graph(GraphSpec("lattice_box", d=3, radius=50))
    stats3 = {}
    for a in (6, 10, 14):
        rs = range_statistics(z3, 0, float(a * a), 1000, Stream(809, a))
        stats3[a] = rs.range_size.mean / (a * a)
    ratio3 = max(stats3.values()) / min(stats3.values())
    ok = ratio2 <= 2.0 and ratio3 <= 1.5
    report(8, ok, f"Z2 E|R| log a/a^2 spread {ratio2:.3f} <= 2; "
                  f"Z3 E|R|/a^2 spread {ratio3:.3f} <= 1.5")


def test_09_spectral_radius(tree16):
    est_tree = spectral_radius_estimate(tree16, 0, 30).estimate
    target = 2 * math.sqrt(2) / 3
    z2 = build_graph(GraphSpec("lattice_box", d=2, radius=60))
    est_z2 = spectral_radius_estimate(z2, 0, 60).estimate
    ok = abs(est_tree - target) < 0.03 and est_z2 >= 0.99
    report(9, ok, f"T3 {est_tree:.4f} within 0.03 of {target:.5f}; "
                  f"Z2 {est_z2:.4f} >= 0.99")


def test_10_gw_oracle():
    grid_ok = all(gw_oracle(lam, t).extinction == 1.0
                  for lam, t in ((0.25, 4.0), (0.5, 2.0), (1.0, 1.0),
                                 (2.0, 0.5), (4.0, 0.25), (0.9, 1.0)))
    q = gw_oracle(2.0, 1.0)
    fixed_ok = 0.0 < q.extinction < 1.0 and q.residual <= 1e-10
    report(10, grid_ok and fixed_ok,
           f"extinction 1 on the 6-point lam*t<=1 grid; "
           f"q(2,1)={q.extinction:.6f} residual {q.residual:.2e} <= 1e-10")


def test_11_nonamenable_pipeline(tree16):
    lb = nonamenable_t_bound(0.9428, 1.0, 1.0)
    depth = math.log((1 - 0.9428) / 32.0) / math.log(0.9428)
    independent = 200.0 * (depth + 1.0) / ((1 - 0.9428) ** 2)
    arit_ok = abs(lb.bound - 6.63e6) / 6.63e6 <= 0.01 \
        and abs(lb.bound - independent) < 1e-6 * independent
    rep = nonamenable_pipeline(tree16, 1.0, [10.0], 1000, 1111,
                               survival_radius=16, spectral_nmax=30)
    surv = rep.metrics["survival_t_10"]
    rho = rep.metrics["rho_hat"]
    esc = rep.metrics["escape_probability"]
    ok = (arit_ok and surv.mean >= 0.5
          and rep.checks["empirical_bracket_below_bound"]
          and esc.mean >= (1 - rho) - 0.05)
    report(11, ok, f"bound {lb.bound:.4g} (= arithmetic re-eval, within 1% "
                   f"of 6.63e6); survival(t=10) {surv.mean:.3f} >= 0.5; "
                   f"escape {esc.mean:.3f} >= {(1 - rho) - 0.05:.3f}")


def test_12_linear_growth():
    rep = linear_growth_experiment(2, 240, FrogParams(2.0, 2.0), 500, 1212,
                                   distances=(50, 100, 200))
    s200 = rep.metrics["survival_to_200"]
    ok = s200.mean <= 0.05 and rep.checks["blocking_probability_positive"]
    report(12, ok, f"ladder survival-to-200 {s200.mean:.4f} <= 0.05 "
                   f"over {s200.replicas} replicas; blocking prob "
                   f"{rep.metrics['annulus_blocking_probability']:.3e} > 0")


def test_13_renormalization():
    net = NetConfig(a=8, net_extent=2)
    rep = renormalization_experiment(net, 4.0, 40, 1313,
                                     decay_density=0.25, decay_replicas=600)
    freq = rep.metrics["open_frequency"]
    decays = [rep.metrics[f"p_no_good_vertex_size_{k}"].mean
              for k in (4, 16, 64)]
    ok = (freq.mean >= 0.75
          and rep.checks["decay_strictly_decreasing"]
          and rep.checks["decay_log_slope_negative"])
    report(13, ok, f"open frequency {freq.mean:.3f} >= 0.75 over "
                   f"{int(rep.metrics['net_sites'])} sites x 40 replicas; "
                   f"P(no good) {decays[0]:.3f} > {decays[1]:.3f} > "
                   f"{decays[2]:.3f}")


def test_14_cli_determinism(tmp_path):
    cfg = tmp_path / "det.cfg"
    cfg.write_text("\n".join([
        "experiment = survival_sweep", "family = regular_tree",
        "degree = 3", "depth = 10", "lambda = 0.5:2.5:0.5", "t = 1.0",
        "n = 8", "replicas = 200", "seed = 1414"]) + "\n")
    outs = {}
    for w in (1, 4):
        out = tmp_path / f"w{w}"
        r = subprocess.run(
            [sys.executable, "-m", "frogsim.cli", "run", str(cfg),
             f"out={out}", f"workers={w}"], capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs[w] = (out / "results.csv").read_bytes()
    ok = outs[1] == outs[4]
    report(14, ok, f"results.csv byte-identical across workers 1 and 4 "
                   f"({len(outs[1])} bytes)")


@pytest.mark.parametrize("variant", ["lambda", "t"])
def test_15_russo_inequality(tree8, variant):
    rc = russo_inequality_check(tree8, 2, FrogParams(1.5, 1.0), 0.1,
                                100_000, 1515, variant=variant,
                                phi_replicas=30_000)
    margin = 3 * math.hypot(rc.derivative.stderr, rc.rhs_se)
    report(15, rc.holds and not rc.insufficient,
           f"{variant}-variant derivative {rc.derivative.mean:.4f} >= "
           f"rhs {rc.rhs:.4f} - {margin:.4f}")
