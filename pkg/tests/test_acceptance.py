"""Acceptance criteria, one test each.

Every test prints a single ``[criterion k] PASS|FAIL`` line with the measured
quantities before asserting, so ``pytest -s`` or the captured log shows the
outcome of each criterion even when an assertion fails.
"""

import math
import time

import numpy as np
import pytest

from srdgauss.closed_forms import (counterexample_model, counterexample_report, iid_waterfilling,
                                   srd_rwf_vector, srd_scalar)
from srdgauss.convex import gradient_check
from srdgauss.model import scalar_model, unstable_rate_lower_bound, validate_model
from srdgauss.montecarlo import SimulationConfig, empirical_information_rate, simulate
from srdgauss.realization import run_riccati, sensor_from_covariances, stationary_sensor
from srdgauss.solvers import (finite_horizon_program, lemma4_bound, make_bound_params,
                              recover_Q, srd_finite_horizon, srd_stationary, stationary_program,
                              sweep_curve)

from conftest import split_search

LOG6 = math.log(6.0)


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {k}] {'PASS' if ok else 'FAIL'}: {detail}")


def q_recovery_error(model, sol):
    info = model.A.T @ np.linalg.solve(model.sigma_w, model.A)
    errs = [np.linalg.norm(np.linalg.inv(Q) - (np.linalg.inv(P) + info))
            / np.linalg.norm(np.linalg.inv(P) + info)
            for P, Q in zip(sol.P_seq[:-1], sol.Q_seq[:-1])]
    errs.append(float(np.linalg.norm(sol.Q_seq[-1] - sol.P_seq[-1])))
    return max(errs)


def random_spd(rng, p):
    L = rng.normal(size=(p, p))
    S = L @ L.T + 0.1 * np.eye(p)
    return S / np.linalg.eigvalsh(S)[-1]


def interior_point(rng, p, cap):
    """Random SPD matrix with spectrum in [0.2 cap, cap], well inside the domain."""
    U, _ = np.linalg.qr(rng.normal(size=(p, p)))
    return (U * rng.uniform(0.2, 1.0, p) * cap) @ U.T


def test_scalar_equivalence(capsys):
    grid = np.linspace(0.05, 5.0, 50)
    t0 = time.perf_counter()
    worst = 0.0
    for a in (0.0, 0.5, 1.0, 6.0):
        model = scalar_model(a, 1.0)
        for D in grid:
            worst = max(worst, abs(srd_stationary(model, D).rate - srd_scalar(a, 1.0, D)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 10.0
    report(capsys, 1, ok, f"max |sdp - closed form| = {worst:.2e} nats over 200 points, "
                          f"{elapsed:.2f} s")
    assert worst <= 1e-6
    assert elapsed < 10.0


def test_counterexample(capsys):
    a, D = 1.0, 1.5
    model = counterexample_model(a)
    rwf, _ = srd_rwf_vector(model, D)
    rep = counterexample_report(a, D, (0.5, 1.0))
    sdp = srd_stationary(model, D).rate
    oracle, _ = split_search(a, D, 1e-5)
    # the rwf target is the closed-form expression itself; its quoted
    # six-digit decimal 0.567486 is off by 4e-6 from 1/2 log(28/9) = 0.567490
    rwf_target = 0.5 * math.log(4 / 3 * a * a + 16 / 9)
    checks = {
        "rwf": abs(rwf - rwf_target) <= 1e-6,
        "split bound": abs(rep.rhs_rate - 0.549306) <= 1e-6,
        "sdp vs oracle": abs(sdp - oracle) <= 1e-4,
        "sdp vs 0.542771": abs(sdp - 0.542771) <= 1e-4,
        "strictly below": sdp < rep.rhs_rate and sdp < rwf,
    }
    flags = [(counterexample_report(x, D, (0.5, 1.0)).contradiction, x * x > 2 / 3)
             for x in np.linspace(0.1, 2.0, 50)]
    checks["threshold"] = all(f == want for f, want in flags)
    ok = all(checks.values())
    report(capsys, 2, ok, f"rwf={rwf:.7f} (|vs 0.567486|={abs(rwf - 0.567486):.1e}), "
                          f"split={rep.rhs_rate:.7f}, sdp={sdp:.7f}, oracle={oracle:.7f}; "
                          f"failed: {[k for k, v in checks.items() if not v]}")
    assert ok


def test_zero_dynamics_coincidence(capsys):
    model = validate_model(np.zeros((2, 2)), np.eye(2), np.eye(2))
    grid = np.linspace(2.0 / 50, 2.0, 50)
    worst = 0.0
    for D in grid:
        sdp = srd_stationary(model, D).rate
        rwf, _ = srd_rwf_vector(model, D)
        wf = iid_waterfilling(np.eye(2), D).rate
        worst = max(worst, abs(sdp - rwf), abs(sdp - wf), abs(rwf - wf))
    ok = worst <= 1e-6
    report(capsys, 3, ok, f"max pairwise difference {worst:.2e} nats over 50 points")
    assert ok


def test_unstable_ordering(capsys, unstable_model):
    grid = np.linspace(0.1, 2.0, 50)
    sdp = [pt.rate for pt in sweep_curve(unstable_model, grid, "stationary_sdp")]
    rwf = [pt.rate for pt in sweep_curve(unstable_model, grid, "rwf_vector")]
    order = all(s <= r for s, r in zip(sdp, rwf))
    floor = min(sdp) >= LOG6 - 1e-6
    gap = srd_rwf_vector(unstable_model, 1.5)[0] - srd_stationary(unstable_model, 1.5).rate
    far = srd_stationary(unstable_model, 1e4).rate
    ok = order and floor and gap > 0.01 and abs(far - LOG6) <= 0.01
    report(capsys, 4, ok, f"sdp<=rwf everywhere: {order}; min sdp - log 6 = "
                          f"{min(sdp) - LOG6:.3e}; gap at 1.5 = {gap:.4f}; "
                          f"rate at 1e4 - log 6 = {far - LOG6:.2e}")
    assert ok


def test_finite_horizon_convergence(capsys, unstable_model, unstable_finite):
    t0 = time.perf_counter()
    ns = (5, 10, 25, 50, 100)
    rates = [unstable_finite(n).rate for n in ns]
    stationary = srd_stationary(unstable_model, 1.0).rate
    elapsed = time.perf_counter() - t0
    gap = abs(rates[-1] - stationary)
    monotone = all(b >= a - 1e-6 for a, b in zip(rates, rates[1:]))
    ok = gap <= 0.01 and monotone and elapsed < 60.0
    table = {n: round(float(r), 6) for n, r in zip(ns, rates)}
    report(capsys, 5, ok, f"R_0,n = {table}, stationary "
                          f"{stationary:.6f}, gap at n=100 = {gap:.5f} (limit 0.01), "
                          f"monotone: {monotone}, {elapsed:.1f} s")
    assert monotone
    assert elapsed < 60.0
    assert gap <= 0.01


def test_lower_bound_chain(capsys, unstable_model, unstable_finite):
    ns = (1, 5, 10, 50)
    slack, params = [], []
    for n in ns:
        sol = unstable_finite(n)
        bp = make_bound_params(unstable_model, 1.0, n, sol.P_seq[0])
        params.append(bp)
        slack.append(sol.rate - lemma4_bound(unstable_model, 1.0, bp))
    eps_dec = all(a.epsilon_n > b.epsilon_n for a, b in zip(params, params[1:]))
    delta_dec = all(a.delta_n > b.delta_n for a, b in zip(params, params[1:]))
    ok = min(slack) >= -1e-8 and eps_dec and delta_dec
    report(capsys, 6, ok, f"min R_0,n - f = {min(slack):.3e}; eps decreasing {eps_dec}, "
                          f"delta decreasing {delta_dec}")
    assert ok


def test_identity_suite(capsys, unstable_model, unstable_finite):
    rng = np.random.default_rng(2024)
    worst_det = 0.0
    for _ in range(100):
        p = int(rng.integers(1, 6))
        A = rng.normal(size=(p, p))
        W = random_spd(rng, p) * rng.uniform(0.5, 3)
        P = random_spd(rng, p) * rng.uniform(0.1, 2)
        lhs = np.linalg.slogdet(A @ P @ A.T + W)[1] - np.linalg.slogdet(P)[1]
        rhs = (np.linalg.slogdet(W)[1]
               + np.linalg.slogdet(np.linalg.inv(P) + A.T @ np.linalg.solve(W, A))[1])
        worst_det = max(worst_det, abs(lhs - rhs) / max(1.0, abs(lhs)))
    general = validate_model([[0.9, 0.5], [-0.3, 1.1]], [[1.0, 0.2], [0.2, 0.6]],
                             [[2.0, 0.4], [0.4, 1.0]])
    solves = [(unstable_model, unstable_finite(n)) for n in (0, 1, 5, 10, 25, 50, 100)]
    solves += [(general, srd_finite_horizon(general, 0.6, n)) for n in (0, 3, 8)]
    worst_q = max(q_recovery_error(m, sol) for m, sol in solves)
    # recover_Q is what every solve uses; recomputing it must be exact
    same = all(np.array_equal(a, b) for m, sol in solves
               for a, b in zip(recover_Q(m, sol.P_seq), sol.Q_seq))
    ok = worst_det <= 1e-10 and worst_q <= 1e-8 and same
    report(capsys, 7, ok, f"determinant identity {worst_det:.2e} (100 instances); "
                          f"Q recovery {worst_q:.2e} over {len(solves)} solves")
    assert ok


def test_gradient_hygiene(capsys):
    rng = np.random.default_rng(77)
    worst, count = 0.0, 0
    for k in range(20):
        family = k % 3
        p = int(rng.integers(1, 4))
        A = rng.normal(size=(p, p)) * rng.uniform(0.3, 2)
        W = random_spd(rng, p) * rng.uniform(0.5, 2)
        X0 = random_spd(rng, p) * rng.uniform(0.5, 2)
        model = validate_model(A, W, X0)
        D = float(rng.uniform(0.5, 3))
        cap = 0.4 * min(D / p, np.linalg.eigvalsh(W)[0], np.linalg.eigvalsh(X0)[0])
        if family == 0:
            prog = stationary_program(model, D)
            point = [interior_point(rng, p, cap)]
        elif family == 1:
            n = int(rng.integers(1, 4))
            prog = finite_horizon_program(model, D, n)
            point = [interior_point(rng, p, cap) for _ in range(n + 1)]
        else:
            prog = stationary_program(model, D, delta=float(rng.uniform(0.01, 0.5)),
                                      epsilon=float(rng.uniform(0, 0.5)))
            point = [interior_point(rng, p, cap)]
        worst = max(worst, gradient_check(prog, point, 1e-6, mu=float(rng.uniform(0.01, 1))))
        count += 1
    ok = worst <= 1e-5
    report(capsys, 8, ok, f"max relative gradient error {worst:.2e} at {count} points")
    assert ok


def test_realization_round_trip(capsys, unstable_model, unstable_finite):
    worst_p, worst_rate = 0.0, 0.0
    for n in (0, 5, 10, 25):
        sol = unstable_finite(n)
        sensor = sensor_from_covariances(unstable_model, sol.P_seq)
        _, posts, _ = run_riccati(unstable_model, sensor)
        worst_p = max(worst_p, max(np.linalg.norm(a - b) / np.linalg.norm(b)
                                   for a, b in zip(posts, sol.P_seq)))
        rate = empirical_information_rate(unstable_model, sensor, sol.P_seq)
        worst_rate = max(worst_rate, abs(rate - sol.rate))
    for model, D in ((scalar_model(1.0, 1.0), 0.5), (counterexample_model(1.0), 1.5),
                     (unstable_model, 1.0)):
        pt = srd_stationary(model, D)
        rate = empirical_information_rate(model, stationary_sensor(model, pt.P_opt), [pt.P_opt])
        worst_rate = max(worst_rate, abs(rate - pt.rate))
    ok = worst_p <= 1e-7 and worst_rate <= 1e-7
    report(capsys, 9, ok, f"covariance round trip {worst_p:.2e}; information rate "
                          f"{worst_rate:.2e}")
    assert ok


def test_monte_carlo(capsys):
    model = scalar_model(1.0, 1.0)
    pt = srd_stationary(model, 0.5)
    sensor = stationary_sensor(model, pt.P_opt)
    cfg = SimulationConfig(trajectories=10_000, horizon=50, seed=42)
    t0 = time.perf_counter()
    first = simulate(model, sensor, [pt.P_opt], cfg)
    second = simulate(model, sensor, [pt.P_opt], cfg)
    elapsed = time.perf_counter() - t0
    window = first.empirical_mse[first.stationary_start:]
    worst_z = max(abs(m - 0.5) / se for m, se in window)
    identical = first.to_csv() == second.to_csv() and first.to_json() == second.to_json()
    ok = worst_z <= 3 and identical and elapsed < 30.0
    report(capsys, 10, ok, f"max |MSE - 0.5|/se = {worst_z:.2f} over steps "
                           f"{first.stationary_start}..49; bit-identical {identical}; "
                           f"{elapsed:.2f} s")
    assert ok
