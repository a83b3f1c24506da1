"""Benchmark runner: pair data -> strategy -> E1..E12 reports."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

import numpy as np

from .lorenz import PairData, PairSpec, default_pair_spec, generate_pair, load_pair, stack
from .metrics import (
    N_BINS,
    EvalReport,
    bin_edges,
    build_histogram,
    histogram_l2,
    normalize_score,
    reconstruction_error,
    short_time_rmse,
)
from .rng import STREAM_REFERENCE, make_rng
from .strategies import (
    STRATEGY_FOR_PAIR,
    StrategyConfig,
    run_baseline,
    run_fewshot,
    run_histogram_forecast,
    run_parametric,
    run_reconstruction,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DATA_DIR_ENV = "LORENZ_ESN_DATA_DIR"
SCORE_NOTE = (
    "normalized scores use a linear surrogate against naive reference errors "
    "(persistence, random training window, raw noisy input); they are not "
    "comparable with official leaderboard scores"
)

EVALS = {
    1: (("E1", "short_time"), ("E2", "long_time")),
    2: (("E3", "reconstruction"),),
    3: (("E4", "long_time"),),
    4: (("E5", "reconstruction"),),
    5: (("E6", "long_time"),),
    6: (("E7", "short_time"), ("E8", "long_time")),
    7: (("E9", "short_time"), ("E10", "long_time")),
    8: (("E11", "short_time"),),
    9: (("E12", "short_time"),),
}
ALL_PAIRS = tuple(EVALS)


@dataclass
class RunConfig:
    master_seed: int = 42
    pairs: tuple[int, ...] = ALL_PAIRS
    data_dir: str | None = None
    output_path: str | None = None
    # {"*" or "<pair>": {"strategy": {...}, "pair": {...}}}
    overrides: dict = field(default_factory=dict)
    time_budget: float = 90.0
    # replace every prediction by the ground truth (plumbing check)
    oracle: bool = False

    def __post_init__(self):
        self.pairs = tuple(sorted({int(p) for p in self.pairs}))
        if not self.pairs:
            raise ValueError("pairs must be nonempty")
        bad = [p for p in self.pairs if p not in EVALS]
        if bad:
            raise ValueError(f"unknown pair ids {bad}; expected 1..9")
        if int(self.master_seed) < 0:
            raise ValueError("master_seed must be nonnegative")

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)


def _override(config: RunConfig, pair_id: int, section: str) -> dict:
    merged = {}
    for key in ("*", str(pair_id)):
        merged.update(config.overrides.get(key, {}).get(section, {}))
    return merged


def strategy_config(config: RunConfig, pair_id: int) -> StrategyConfig:
    cfg = StrategyConfig().with_seed(config.master_seed)
    changes = dict(_override(config, pair_id, "strategy"))
    for sub in ("esn", "fewshot_esn", "parametric_esn"):
        if sub in changes:
            changes[sub] = getattr(cfg, sub).replace(**changes[sub])
    return replace(cfg, **changes)


def pair_spec(config: RunConfig, pair_id: int) -> PairSpec:
    return replace(default_pair_spec(pair_id), **_override(config, pair_id, "pair"))


def resolve_data_dir(data_dir: str | None) -> str | None:
    return data_dir if data_dir is not None else os.environ.get(DATA_DIR_ENV)


def pair_data(config: RunConfig, pair_id: int) -> PairData:
    """Load ``<data_dir>/pair<k>`` when it exists, otherwise synthesize from the seed."""
    spec = pair_spec(config, pair_id)
    data_dir = resolve_data_dir(config.data_dir)
    if data_dir is not None:
        directory = os.path.join(data_dir, f"pair{pair_id}")
        if os.path.isdir(directory):
            return load_pair(spec, directory)
    return generate_pair(spec, config.master_seed)


def _long_time_reference(train: np.ndarray, truth: np.ndarray, edges, rng) -> float:
    # histogram of a random-phase training window with the truth's length
    n = min(len(truth), len(train))
    start = int(rng.integers(0, len(train) - n + 1))
    return histogram_l2(build_histogram(truth, edges), build_histogram(train[start : start + n], edges))


def _predict(data: PairData, cfg: StrategyConfig) -> tuple[Any, dict]:
    spec = data.spec
    scenario = spec.scenario
    meta: dict = {}
    if scenario == "baseline":
        pred = run_baseline(data.train[0], cfg, len(data.truth))
    elif scenario == "reconstruction":
        pred = run_reconstruction(data.train[0], cfg)
    elif scenario == "noisy_forecast":
        sel = run_histogram_forecast(data.train[0], cfg, len(data.truth))
        pred = sel.forecast
        meta["selected_candidate"] = sel.index
    elif scenario == "fewshot":
        sel = run_fewshot(data.train[0], cfg, len(data.truth))
        pred = sel.forecast
        meta["selected_seed"] = sel.index
    else:
        pred = run_parametric(data.train, data.init, cfg, len(data.truth))
    return pred, meta


def run_pair(pair_id: int, config: RunConfig) -> list[EvalReport]:
    """Run the mapped strategy on one pair and score its evaluations."""
    t0 = time.perf_counter()
    data = pair_data(config, pair_id)
    spec = data.spec
    cfg = strategy_config(config, pair_id)
    if config.oracle:
        pred, meta = data.truth, {"oracle": True}
    else:
        pred, meta = _predict(data, cfg)

    train = stack(data.train)
    truth = np.asarray(data.truth)
    pred = np.asarray(pred)
    last_observed = np.asarray(data.init)[-1] if data.init is not None else train[-1]
    fewshot = spec.scenario == "fewshot"
    esn = {"fewshot": cfg.fewshot_esn, "parametric": cfg.parametric_esn}.get(spec.scenario, cfg.esn)
    metadata = {
        "strategy": STRATEGY_FOR_PAIR[pair_id],
        "scenario": spec.scenario,
        "master_seed": config.master_seed,
        "esn_seed": esn.seed,
        "n_units": esn.n_units,
        "steps": int(len(truth)),
        **meta,
    }

    reports = []
    for eval_id, metric in EVALS[pair_id]:
        if metric == "short_time":
            raw = short_time_rmse(pred, truth)
            ref = short_time_rmse(np.tile(last_observed, (len(truth), 1)), truth)
        elif metric == "long_time":
            margin = cfg.fewshot_edge_margin if fewshot else cfg.edge_margin
            edges = bin_edges(train, N_BINS, margin)
            raw = histogram_l2(build_histogram(truth, edges), build_histogram(pred, edges))
            ref = _long_time_reference(train, truth, edges, make_rng(config.master_seed, pair_id, STREAM_REFERENCE))
        else:
            raw = reconstruction_error(pred, truth)
            ref = reconstruction_error(train, truth)
        reports.append(
            EvalReport(eval_id, pair_id, metric, raw, ref, normalize_score(raw, ref), dict(metadata))
        )
    runtime = time.perf_counter() - t0
    for r in reports:
        r.runtime_seconds = runtime
    return reports


@dataclass
class RunResult:
    report: dict
    timing: dict
    evaluations: list[EvalReport]


def _config_echo(config: RunConfig) -> dict:
    echo = asdict(config)
    echo["pairs"] = list(config.pairs)
    echo.pop("output_path")
    return echo


def run_all(config: RunConfig) -> RunResult:
    """Run every requested pair; a failing pair is recorded, never fatal."""
    t0 = time.perf_counter()
    evaluations, failures, pair_seconds = [], {}, {}
    for pair_id in config.pairs:
        start = time.perf_counter()
        try:
            evaluations.extend(run_pair(pair_id, config))
        except Exception as exc:  # pair isolation
            log.exception("pair %d failed", pair_id)
            failures[str(pair_id)] = f"{type(exc).__name__}: {exc}"
        pair_seconds[str(pair_id)] = time.perf_counter() - start
        log.info("pair %d done in %.1fs", pair_id, pair_seconds[str(pair_id)])
    total = time.perf_counter() - t0

    scores = [e.normalized_score for e in evaluations]
    report = {
        "schema_version": SCHEMA_VERSION,
        "score_note": SCORE_NOTE,
        "master_seed": config.master_seed,
        "config": _config_echo(config),
        "evaluations": [e.to_dict() for e in evaluations],
        "failures": failures,
        "n_evaluations": len(evaluations),
        "mean_normalized_score": float(np.mean(scores)) if scores else None,
    }
    timing = {
        "schema_version": SCHEMA_VERSION,
        "pair_seconds": pair_seconds,
        "total_seconds": total,
        "time_budget": config.time_budget,
        "within_budget": total < config.time_budget,
    }
    return RunResult(report, timing, evaluations)


def timing_path(report_path: str | os.PathLike) -> str:
    root, _ = os.path.splitext(os.fspath(report_path))
    return root + ".timing.json"


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_result(result: RunResult, path: str | os.PathLike) -> tuple[str, str]:
    """Write the deterministic report to ``path`` and wall-clock timings beside it."""
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(dumps(result.report))
    tpath = timing_path(path)
    with open(tpath, "w") as fh:
        fh.write(dumps(result.timing))
    return os.fspath(path), tpath


def format_report(report: dict, timing: dict | None = None) -> str:
    lines = [
        f"master seed {report['master_seed']}  schema v{report['schema_version']}",
        f"{'eval':<5} {'pair':>4} {'metric':<15} {'raw':>12} {'reference':>12} {'score':>8}  strategy",
    ]
    for e in report["evaluations"]:
        lines.append(
            f"{e['eval_id']:<5} {e['pair']:>4} {e['metric']:<15} {e['raw_error']:>12.5g} "
            f"{e['reference_error']:>12.5g} {e['normalized_score']:>8.2f}  {e['metadata']['strategy']}"
        )
    for pair, msg in sorted(report["failures"].items(), key=lambda kv: int(kv[0])):
        lines.append(f"pair {pair} FAILED: {msg}")
    mean = report["mean_normalized_score"]
    lines.append(f"mean normalized score: {'n/a' if mean is None else f'{mean:.2f}'}")
    if timing is not None:
        per_pair = ", ".join(f"{k}:{v:.1f}s" for k, v in sorted(timing["pair_seconds"].items(), key=lambda kv: int(kv[0])))
        lines.append(f"wall clock {timing['total_seconds']:.1f}s (budget {timing['time_budget']:g}s)  [{per_pair}]")
    lines.append(f"note: {report['score_note']}")
    return "\n".join(lines)
