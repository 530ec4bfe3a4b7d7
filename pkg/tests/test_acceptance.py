"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerance.

The lines are collected into a separate section of the pytest terminal summary.
Criteria that do not reach their tolerance fail here; they are not relaxed.
"""
import math
import time

import numpy as np
import pytest

from twostage.effective_magnet import Haar, XYZAveraged
from twostage.propagator import build_schedule, partition_free_boundary, pinned_table, two_stage_fit, fit_rate
from twostage.resummation import resummed_rate, solve_irreducible, reconstruct, generating_root
from twostage.theory import averaged_channel, staircase_minimize, r_mag_analytic, predict_rates
from twostage import exact_circuit as ec
from oracles import doubled_overlaps, magnon_from_doubled

R_HAAR = math.log2(5 / 4)


def rel(a, b):
    return abs(a - b) / abs(b)


def test_c1_haar_brickwall(acceptance):
    t0 = time.perf_counter()
    s = partition_free_boundary(7, build_schedule("brickwall", "open", 14), Haar(2), 60)
    early, late = two_stage_fit(s)
    dt = time.perf_counter() - t0
    ok = rel(early.rate, R_HAAR) <= 0.05 and dt < 10 and s.path == "dw"
    acceptance("C1", ok, f"Haar brickwall open L=14 T=60: r = {early.rate:.5f} on t in {early.window} "
                         f"(target {R_HAAR:.5f} +-5%), {dt:.2f} s via {s.path} path (< 10 s)",
               [f"post-saturation window {late.window}: {late.rate:.4f} (finite-L slowest mode)"])
    assert ok


def test_c2_haar_staircase(acceptance):
    t0 = time.perf_counter()
    s = partition_free_boundary(10, build_schedule("staircase", "open", 20), Haar(2), 50)
    r1, r2 = two_stage_fit(s)
    dt = time.perf_counter() - t0
    t1, t2 = 0.5 * math.log2(1.5), R_HAAR
    ok = rel(r1.rate, t1) <= 0.05 and rel(r2.rate, t2) <= 0.10 and dt < 30
    acceptance("C2", ok, f"Haar staircase open L=20: r1 = {r1.rate:.4f} on {r1.window} (target {t1:.4f} +-5%), "
                         f"r2 = {r2.rate:.4f} on {r2.window} (target {t2:.4f} +-10%), {dt:.1f} s (< 30 s)")
    assert ok


@pytest.mark.slow
def test_c3_du_periodic(acceptance):
    t0 = time.perf_counter()
    s = partition_free_boundary(6, build_schedule("brickwall", "periodic", 12), XYZAveraged(1, 1, 0.5), 40)
    r1, r2 = two_stage_fit(s)
    dt = time.perf_counter() - t0
    t2 = math.log2(1.5)
    ok1, ok2 = rel(r1.rate, 2.0) <= 0.10, rel(r2.rate, t2) <= 0.10
    steps = -np.diff(np.log2(np.abs(s.dz[:8])))
    acceptance("C3", ok1 and ok2 and dt < 300,
               f"XYZ(1,1,0.5) brickwall periodic L=12 dense: r1 = {r1.rate:.4f} on {r1.window} (target 2 +-10%: "
               f"{'ok' if ok1 else 'miss'}), r2 = {r2.rate:.4f} on {r2.window} (target {t2:.4f} +-10%: "
               f"{'ok' if ok2 else 'miss'}), {dt:.1f} s (< 300 s)",
               ["per-layer decrements of log2|dZ|, t = 1..7: " + " ".join(f"{x:.3f}" for x in steps)])
    assert ok1 and ok2 and dt < 300


@pytest.mark.slow
def test_c4_magnon_sweep(acceptance):
    L = 16
    tau = L - 1          # last step before the boundary enters (see README, time conventions)
    s = build_schedule("brickwall", "open", L)
    devs, info = {}, []
    alt = {"abs_sum_x": [], "max_x": [], "abs_max_x": []}
    for az in np.round(np.arange(1, 10) / 10, 1):
        tab = pinned_table("magnon", s, XYZAveraged(1, 1, az), tau)
        r = resummed_rate(tab, "sum_x")
        target = r_mag_analytic(az)
        devs[az] = r.rate / target - 1
        info.append(f"a_z={az}: r = {r.rate:.4f} vs {target:.4f} ({devs[az]:+.1%}, {r.method})")
        for m in alt:
            alt[m].append(abs(resummed_rate(tab, m).rate / target - 1))
    cap = all(predict_rates(XYZAveraged(1, 1, az), "brickwall", "open").r2 == 1.0
              for az in np.linspace(0, 1 / 3, 11))
    worst = max(devs, key=lambda a: abs(devs[a]))
    ok = abs(devs[worst]) <= 0.05 and cap
    info += [f"other reductions, max |dev|: " + ", ".join(f"{m} {max(v):.1%}" for m, v in alt.items())]
    acceptance("C4", ok, f"magnon W/Z sweep L={L} tau={tau} sum_x: max |dev| {abs(devs[worst]):.1%} at a_z={worst} "
                         f"(tol 5%); OBC cap at 1 for a_z <= 1/3: {cap}", info)
    assert ok


def test_c5_channel_identity(acceptance):
    grid = np.linspace(0, 1, 101)
    err = max(abs(averaged_channel(a).lam_minus - (2 - math.cos(math.pi * a)) / 3) for a in grid)
    ok = err < 1e-12
    acceptance("C5", ok, f"averaged channel lambda_- vs (2 - cos pi a_z)/3 on 101 points: max err {err:.1e} (< 1e-12)")
    assert ok


def test_c6_membrane(acceptance):
    errs = []
    for q in range(2, 7):
        m = staircase_minimize(q)
        v, F = m.closed_form()
        errs.append(max(abs(m.v_star - v), abs(m.F_nats - F)))
    ok = max(errs) < 1e-8
    acceptance("C6", ok, f"staircase minimization q=2..6: max |v*-v*_cf|, |F-F_cf| = {max(errs):.1e} (< 1e-8)")
    assert ok


def test_c7_wz_inversion(acceptance):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        T = int(rng.integers(5, 40))
        rates, amps = rng.uniform(0.05, 1.5, 3), rng.dirichlet(np.ones(3))
        z = (amps[:, None] * 2.0 ** (-rates[:, None] * np.arange(T + 1))).sum(0)
        worst = max(worst, np.max(np.abs(reconstruct(solve_irreducible(z)) - z) / np.abs(z)))
    exp_err = 0.0
    for a in rng.uniform(0.02, 0.98, 50):
        r = generating_root(solve_irreducible(a ** np.arange(12)), taus=[2])
        exp_err = max(exp_err, abs(r.rate + math.log2(a)))
    ok = worst < 1e-10 and exp_err < 1e-10
    acceptance("C7", ok, f"W/Z round trip on 100 series: max rel err {worst:.1e} (< 1e-10); "
                         f"exponential rate at order 2: max err {exp_err:.1e} (< 1e-10)")
    assert ok


def _exact_trace(L):
    g = ec.floquet_gate(1, 1, 0.5, 0.6)
    tab = ec.magnon_overlap_table(g, L, T=L - 1)
    return resummed_rate(tab, "sum_x"), ec.light_cone_channel(g).r_mag_fixed()


@pytest.mark.slow
def test_c8_exact_floquet(acceptance):
    t0 = time.perf_counter()
    r12, pred = _exact_trace(12)
    dt = time.perf_counter() - t0
    r8, _ = _exact_trace(8)
    k12, q12 = r12.last_quartile()
    k8, q8 = r8.last_quartile()
    d12, d8 = np.max(np.abs(q12 / pred - 1)), np.max(np.abs(q8 / pred - 1))
    ok = d12 <= 0.10 and d8 <= 0.20 and dt < 1800
    acceptance("C8", ok, f"Floquet (1,1,0.5) phi=0.6: channel prediction {pred:.4f}; L=12 last quartile "
                         f"{np.round(q12, 4).tolist()} max dev {d12:.1%} (tol 10%), {dt:.0f} s (< 1800 s); "
                         f"L=8 max dev {d8:.1%} (tol 20%)",
               ["L=12 trace (tau=2..11): " + " ".join(f"{x:.3f}" for x in r12.rate_trace),
                "L=8 trace (tau=2..7): " + " ".join(f"{x:.3f}" for x in r8.rate_trace)])
    assert ok


def test_c9_small_oracle(acceptance):
    L = 6
    g = ec.floquet_gate(1, 1, 0.5, 0.6)
    err = np.max(np.abs(ec.magnon_overlap_table(g, L).values - magnon_from_doubled(doubled_overlaps(g.U, L, L), L)))
    ok = err < 1e-10
    acceptance("C9", ok, f"magnon table vs doubled-circuit contraction at L=6: max err {err:.1e} (< 1e-10)")
    assert ok


@pytest.mark.slow
def test_c10_reverse_transition(acceptance):
    res = {}
    for az, target in ((0.2, 1.0), (0.6, r_mag_analytic(0.6))):
        rt = ec.reverse_transition_correlator(az, 0.6, L=12)
        res[az] = (rt, target)
    oks = {az: rel(rt.fit.rate, tg) <= 0.15 for az, (rt, tg) in res.items()}
    parts = [f"a_z={az}: r = {rt.fit.rate:.4f} on {rt.window} vs {tg:.4f} ({rt.fit.rate / tg - 1:+.1%})"
             for az, (rt, tg) in res.items()]
    info = [f"a_z={az}: product-state Haar average gives {rt.fit_exact.rate:.4f}; per-step decrements "
            + " ".join(f"{x:.2f}" for x in -np.diff(np.log2(rt.sampled))) for az, (rt, _) in res.items()]
    info += [f"a_z={az}: window (2, 12) including the boundary step: r = {fit_rate(rt.t, rt.sampled, (2, 12)).rate:.4f}"
             for az, (rt, _) in res.items()]
    ok = all(oks.values())
    acceptance("C10", ok, "reverse transition L=12, 32 states seed 1234: " + "; ".join(parts) + " (tol 15%)", info)
    assert ok


def test_c11_light_cone(acceptance):
    L = 8
    worst_off = 0.0
    gates = [ec.floquet_gate(1, 1, az, phi) for az, phi in ((0.2, 0.6), (0.5, 0.6), (0.8, 1.3))]
    P = {p: [ec.site_operator(p, x, L) for x in range(1, L + 1)] for p in "XYZ"}
    for g in gates:
        for t, (A,) in ec.operator_series(L, g, [ec.site_operator("Z", 1, L)], T=L - 1):
            for x in range(1, L + 1):
                if x == 1 + t:
                    continue
                for p in "XYZ":
                    worst_off = max(worst_off, abs(np.einsum("ij,ji->", A, P[p][x - 1]).real) / 2 ** L)
    du = max(ec.check_dual_unitarity(ec.floquet_gate(1, 1, az, 0.6).U)[1] for az in np.linspace(0, 1, 21))
    non = ec.check_dual_unitarity(ec.floquet_gate(0.9, 0.8, 0.5, 0.6).U)[1]
    ok = worst_off < 1e-12 and du < 1e-12 and non > 0.1
    acceptance("C11", ok, f"off-light-cone correlators max {worst_off:.1e} (< 1e-12); DU residual (1,1,a_z) "
                          f"max {du:.1e} (< 1e-12); (0.9,0.8,0.5) residual {non:.2f} (order 1)")
    assert ok
