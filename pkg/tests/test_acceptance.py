"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Heavy fixtures are module scoped so that shared fits run once.
"""

import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from lorenz_esn.esn import (
    EchoStateNetwork,
    ReadoutAccumulator,
    ReservoirConfig,
    build_reservoir,
    drive,
    estimate_spectral_radius,
    solve_readout,
)
from lorenz_esn.lorenz import LorenzParams, default_pair_spec, generate_pair, rk4_step, stack
from lorenz_esn.metrics import (
    FEWSHOT_EDGE_MARGIN,
    bin_edges,
    build_histogram,
    histogram_l2,
    reconstruction_error,
    short_time_rmse,
)
from lorenz_esn.strategies import (
    StrategyConfig,
    count_bound_violations,
    fit_independent,
    run_fewshot,
    run_histogram_forecast,
    run_parametric,
    run_reconstruction,
    warmup_replay_forecast,
    z_bound,
)

from conftest import record
from oracles import histogram_l2_loop, reconstruction_loop, rmse_loop

SEED = 42
CFG = StrategyConfig().with_seed(SEED)


def check(number, title, ok, detail):
    record(number, title, ok, detail)
    assert ok, f"criterion {number} ({title}): {detail}"


@pytest.fixture(scope="module")
def data():
    return {k: generate_pair(default_pair_spec(k), SEED) for k in range(1, 10)}


# 1 ---------------------------------------------------------------------------


def test_c01_ridge_oracle():
    rng = np.random.default_rng(101)
    worst, elapsed = 0.0, 0.0
    for _ in range(20):
        n = int(rng.integers(5, 51))
        S = rng.uniform(-1, 1, (3 * n, n))
        Y = rng.normal(size=(3 * n, 3))
        lam = 10.0 ** rng.uniform(-8, -2)
        acc = ReadoutAccumulator.empty(n).add(S, Y)
        t0 = time.perf_counter()
        W = solve_readout(acc, lam)
        elapsed += time.perf_counter() - t0
        oracle = np.linalg.inv(S.T @ S + lam * np.eye(n)) @ (S.T @ Y)
        worst = max(worst, np.linalg.norm(W - oracle) / np.linalg.norm(oracle))
    check(1, "ridge solve vs explicit inverse", worst < 1e-8 and elapsed < 1.0,
          f"max rel err {worst:.2e} (< 1e-8), {elapsed:.3f}s (< 1s)")


# 2 ---------------------------------------------------------------------------


def test_c02_metric_oracles():
    rng = np.random.default_rng(202)
    worst = {"short_time": 0.0, "histogram": 0.0, "reconstruction": 0.0}
    elapsed = 0.0
    for _ in range(100):
        n = int(rng.integers(20, 120))
        a = rng.normal(size=(n, 3)) * rng.uniform(1, 10, 3)
        b = a + rng.normal(size=(n, 3)) * rng.uniform(0.1, 5)
        t0 = time.perf_counter()
        st = short_time_rmse(a, b)
        edges = bin_edges(a, 41, 0.05)
        hl = histogram_l2(build_histogram(a, edges), build_histogram(b, edges))
        rc = reconstruction_error(a, b)
        elapsed += time.perf_counter() - t0
        worst["short_time"] = max(worst["short_time"], abs(st - rmse_loop(a, b, 20)))
        worst["histogram"] = max(worst["histogram"], abs(hl - histogram_l2_loop(a, b, edges)))
        worst["reconstruction"] = max(worst["reconstruction"], abs(rc - reconstruction_loop(a, b)))
    ok = max(worst.values()) < 1e-12 and elapsed < 1.0
    check(2, "metrics vs scalar loops", ok,
          ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" (< 1e-12), {elapsed:.3f}s (< 1s)")


# 3 ---------------------------------------------------------------------------


def test_c03_rk4_order():
    params = LorenzParams()
    ic = np.array([-8.0, -8.0, 27.0])

    def integrate(dt):
        x = ic.copy()
        for _ in range(int(round(1.0 / dt))):
            x = rk4_step(x, dt, params)
        return x

    t0 = time.perf_counter()
    ref = integrate(0.0005)
    e1 = np.linalg.norm(integrate(0.05) - ref)
    e2 = np.linalg.norm(integrate(0.025) - ref)
    elapsed = time.perf_counter() - t0
    ratio = e1 / e2
    check(3, "RK4 global error ratio", 12 <= ratio <= 20 and elapsed < 5,
          f"ratio {ratio:.2f} (in [12, 20]), {elapsed:.2f}s (< 5s)")


# 4 ---------------------------------------------------------------------------


def _oracle_radius(A, iterations=10_000):
    v = np.ones(A.shape[0])
    for _ in range(iterations):
        w = A @ v
        v = w / np.linalg.norm(w)
    return abs(v @ (A @ v)) / (v @ v)


def test_c04_spectral_scaling():
    built, info = {}, []
    for n in (300, 1000):
        cfg = ReservoirConfig(n_units=n, seed=SEED)
        res = build_reservoir(cfg)
        built[n] = estimate_spectral_radius(res.w_res, 60, seed=cfg.seed)
        # context only: another start vector, and the exact modulus
        fresh = estimate_spectral_radius(res.w_res, 60, seed=987)
        exact = float(np.abs(np.linalg.eigvals(res.dense)).max())
        info.append(f"N={n} fresh-start {fresh:.4f}, exact {exact:.4f}")
    rng = np.random.default_rng(404)
    rel = []
    for _ in range(10):
        A = rng.random((50, 50))
        rel.append(abs(estimate_spectral_radius(A, 60) / _oracle_radius(A) - 1))
    ok = all(abs(r / 1.2 - 1) < 0.01 for r in built.values()) and max(rel) < 0.01
    check(4, "spectral radius scaling", ok,
          f"N=300 {built[300]:.4f}, N=1000 {built[1000]:.4f} (1.2 +/- 1%); 50x50 max rel {max(rel):.1e} (< 1%); "
          + "; ".join(info))


# 5 ---------------------------------------------------------------------------


def test_c05_echo_state_contraction(data):
    X = np.asarray(data[1].train[0])[:1000]
    t0 = time.perf_counter()
    finals = []
    for seed in range(10):
        res = build_reservoir(ReservoirConfig(seed=seed))
        rng = np.random.default_rng(seed)
        ra = rng.uniform(-0.5, 0.5, res.n_units)
        u = rng.standard_normal(res.n_units)
        rb = ra + u / np.linalg.norm(u)
        _, fa = drive(res, X, ra)
        _, fb = drive(res, X, rb)
        finals.append(float(np.linalg.norm(fa - fb)))
    elapsed = time.perf_counter() - t0
    good = sum(d <= 1e-4 for d in finals)
    check(5, "echo-state contraction", good >= 9 and elapsed < 10,
          f"{good}/10 seeds <= 1e-4 (max {max(finals):.1e}), {elapsed:.1f}s (< 10s)")


# 6 ---------------------------------------------------------------------------


def test_c06_exact_synchronization(data):
    X = np.asarray(data[1].train[0])
    model = EchoStateNetwork.from_config(CFG.esn).fit(X)
    _, redriven = drive(build_reservoir(CFG.esn), X[:-1])
    gap = float(np.max(np.abs(model.terminal_state_ - redriven)))

    exact, replay = [], []
    for seed in range(10):
        pair = generate_pair(default_pair_spec(1), seed)
        train, truth = np.asarray(pair.train[0]), np.asarray(pair.truth)
        m = EchoStateNetwork.from_config(CFG.esn.replace(seed=seed)).fit(train)
        exact.append(short_time_rmse(m.forecast(20), truth))
        replay.append(short_time_rmse(warmup_replay_forecast(m, train, 20), truth))
    ok = gap <= 1e-12 and np.mean(exact) < np.mean(replay)
    check(6, "exact terminal-state synchronization", ok,
          f"re-drive gap {gap:.1e} (<= 1e-12); mean 20-step RMSE exact {np.mean(exact):.17g} "
          f"vs replay {np.mean(replay):.17g} (diff {np.mean(replay) - np.mean(exact):.2e})")


# 7 ---------------------------------------------------------------------------

# frozen regression bounds
C07_RMSE_FRACTION = 0.05
C07_HIST_BOUND = 0.05


def test_c07_baseline_quality(data):
    pair = data[1]
    train, truth = np.asarray(pair.train[0]), np.asarray(pair.truth)
    t0 = time.perf_counter()
    model = EchoStateNetwork.from_config(CFG.esn).fit(train)
    forecast = model.forecast(2000)
    elapsed = time.perf_counter() - t0
    rmse = short_time_rmse(forecast, truth)
    limit = C07_RMSE_FRACTION * float(train.std(axis=0).min())
    edges = bin_edges(train)
    hist = histogram_l2(build_histogram(train, edges), build_histogram(forecast, edges))
    ok = rmse < limit and hist < C07_HIST_BOUND and elapsed < 30
    check(7, "pair-1 baseline forecast quality", ok,
          f"20-step RMSE {rmse:.4f} (< {limit:.4f}), hist L2 {hist:.4f} (< {C07_HIST_BOUND}), {elapsed:.1f}s (< 30s)")


# 8 ---------------------------------------------------------------------------


def test_c08_denoising(data):
    parts, ok = [], True
    for k in (2, 4):
        pair = data[k]
        noisy, clean = np.asarray(pair.train[0]), np.asarray(pair.truth)
        denoised = run_reconstruction(noisy, CFG)
        err, raw = reconstruction_error(denoised, clean), reconstruction_error(noisy, clean)
        ok &= err < raw
        parts.append(f"noise {pair.spec.noise_level}: {err:.4f} vs raw {raw:.4f}")
    check(8, "denoising beats identity", ok, "; ".join(parts))


# 9 ---------------------------------------------------------------------------


def test_c09_histogram_selection(data):
    from dataclasses import replace

    train = data[3].train[0]
    sel = run_histogram_forecast(train, CFG, 2000)
    optimal = bool(np.all(sel.scores[sel.index] <= sel.scores))
    zero = run_histogram_forecast(train, replace(CFG, perturbation_sigma=0.0), 2000)
    check(9, "histogram selection optimality", optimal and zero.index == 0,
          f"chosen {sel.index} score {sel.scores[sel.index]:.4f} = min over {len(sel.scores)}; sigma=0 -> index {zero.index}")


# 10 --------------------------------------------------------------------------


def test_c10_fewshot_sweep():
    wins, parts = 0, []
    for rep in range(5):
        pair = generate_pair(default_pair_spec(6), rep)
        train, truth = np.asarray(pair.train[0]), np.asarray(pair.truth)
        cfg = CFG.with_seed(rep)
        sel = run_fewshot(train, cfg, len(truth))
        # score every seed against the held-out truth, not the training histogram used to pick
        edges = bin_edges(train, 41, FEWSHOT_EDGE_MARGIN)
        target = build_histogram(truth, edges)
        held_out = []
        for s in range(cfg.n_seeds):
            m = EchoStateNetwork.from_config(cfg.fewshot_esn.replace(seed=cfg.fewshot_esn.seed + s)).fit(train)
            try:
                held_out.append(histogram_l2(target, build_histogram(m.forecast(len(truth)), edges)))
            except ArithmeticError:
                held_out.append(np.inf)
        best = histogram_l2(target, build_histogram(sel.forecast, edges))
        median = float(np.median(held_out))
        wins += best <= median
        parts.append(f"{best:.3f}/{median:.3f}")
    samples = EchoStateNetwork.from_config(CFG.fewshot_esn).fit(generate_pair(default_pair_spec(6), SEED).train[0]).n_samples_
    check(10, "few-shot sweep dominance", wins >= 4 and samples == 88,
          f"best<=median in {wins}/5 (best/median {', '.join(parts)}); effective samples {samples} (= 88)")


# 11 --------------------------------------------------------------------------


def test_c11_sequential_training(data):
    parts, bounded = [], True
    for k in (8, 9):
        pair = data[k]
        forecast = run_parametric(pair.train, pair.init, CFG, 2000)
        z_max = float(np.asarray(forecast)[:, 2].max())
        limit = z_bound(pair.spec.rho_test)
        bounded &= z_max <= limit
        parts.append(f"rho {pair.spec.rho_test}: z_max {z_max:.1f} (<= {limit:.1f})")

    seqs = [np.asarray(t) for t in data[8].train]
    model = EchoStateNetwork.from_config(CFG.parametric_esn).fit_sequential(seqs)
    states, _ = drive(model.reservoir_, np.concatenate([s[:-1] for s in seqs]))
    skip = CFG.parametric_esn.washout + 1
    S = states[skip:]
    gram = S.T @ S
    gram_gap = float(np.abs(model.accumulator_.gram - gram).max() / np.abs(gram).max())

    pair = data[9]
    rho = pair.spec.rho_test
    I, truth = np.asarray(pair.init), np.asarray(pair.truth)
    edges = bin_edges(stack(pair.train))
    target = build_histogram(truth, edges)
    tally = {"sequential": [0, []], "independent": [0, []]}
    for seed in range(10):
        cfg = CFG.parametric_esn.replace(seed=seed)
        fitted = {
            "sequential": EchoStateNetwork.from_config(cfg).fit_sequential(pair.train),
            "independent": fit_independent(cfg, pair.train),
        }
        for name, m in fitted.items():
            try:
                f = m.forecast(len(truth), m.synchronize(I), I[-1])
                tally[name][0] += count_bound_violations(f, rho)
                tally[name][1].append(histogram_l2(target, build_histogram(f, edges)))
            except ArithmeticError:
                tally[name][0] += len(truth)
                tally[name][1].append(6.0)
    (sv, sh), (iv, ih) = tally["sequential"], tally["independent"]
    dominates = iv > sv or np.mean(ih) > np.mean(sh)
    parts.append(f"Gram rel gap {gram_gap:.1e} (<= 1e-8)")
    parts.append(
        f"rho {rho} over 10 seeds: violations seq {sv} vs indep {iv}, mean hist seq {np.mean(sh):.4f} vs indep {np.mean(ih):.4f}"
    )
    check(11, "sequential-training stability", bounded and gram_gap <= 1e-8 and dominates, "; ".join(parts))


# 12, 13 ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def full_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("full")
    env = {k: v for k, v in os.environ.items() if k != "LORENZ_ESN_DATA_DIR"}
    runs = []
    for i in range(2):
        out = root / f"report{i}.json"
        t0 = time.perf_counter()
        proc = subprocess.run(
            [sys.executable, "-m", "lorenz_esn.cli", "run", "--seed", str(SEED),
             "--data-dir", str(root / "no-data"), "--out", str(out)],
            capture_output=True, text=True, env=env,
        )
        runs.append((proc, out, time.perf_counter() - t0))
    return runs


def test_c12_end_to_end_runtime(full_runs):
    proc, out, wall = full_runs[0]
    report = json.loads(out.read_text()) if out.exists() else {}
    timing_file = out.with_name(out.stem + ".timing.json")
    timing = json.loads(timing_file.read_text()) if timing_file.exists() else {}
    n_evals = report.get("n_evaluations", 0)
    per_pair = timing.get("pair_seconds", {})
    ok = proc.returncode == 0 and n_evals == 12 and len(per_pair) == 9 and wall < 90
    check(12, "end-to-end run under 90 s", ok,
          f"exit {proc.returncode}, {n_evals} evaluations, per-pair timings for {len(per_pair)} pairs, {wall:.1f}s wall (< 90s)")


def test_c13_determinism(full_runs):
    (_, a, _), (_, b, _) = full_runs
    same = a.exists() and b.exists() and a.read_bytes() == b.read_bytes()
    check(13, "byte-identical reports", same, f"{a.name} == {b.name}: {same}")
