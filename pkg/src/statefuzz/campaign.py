"""Campaign orchestration: budgeted multi-trial runs and their reports.

A campaign runs one scheduling algorithm against one harness for a fixed
number of scheduler iterations, repeated over independent trials. Each
trial derives its own rng seed from the master seed, so identical
configurations produce byte-identical report files. Trials can run in
worker processes; they share nothing but the output directory.

Report files per campaign output directory:

    trial_<k>.csv   change-points of (iteration, branches, coverage_pct,
                    sequences), plus the final row
    trial_<k>.json  the full trial report

`compare_reports` reads one or more such directories and writes
comparison.json (per-algorithm aggregates and pairwise Welch tests on
final coverage) and cases.csv (per-case hit probability per algorithm).
"""

from __future__ import annotations

import csv
import gc
import hashlib
import json
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .coverage import VirginMap, coverage_percent
from .errors import ConfigurationError
from .mcts import POLICY_RANDOM, POLICY_UCT, TreeEngine, UctParams
from .mutation import MutationConfig, load_dictionary
from .protocol import RequestSequence, load_corpus
from .state_machine import (
    SELECT_FAVOR,
    SELECT_RANDOM,
    SELECT_ROUND_ROBIN,
    FlatEngine,
)
from .stats import confidence_interval_95, welch_t_test
from .sut import get_harness

ALGORITHMS: dict[str, tuple] = {
    "aflnet-random": ("flat", SELECT_RANDOM),
    "aflnet-rr": ("flat", SELECT_ROUND_ROBIN),
    "aflnet-favor": ("flat", SELECT_FAVOR),
    "legion-uu": ("tree", (POLICY_UCT, POLICY_UCT)),
    "legion-ur": ("tree", (POLICY_UCT, POLICY_RANDOM)),
    "legion-rr": ("tree", (POLICY_RANDOM, POLICY_RANDOM)),
}


@dataclass
class CampaignConfig:
    algorithm: str
    sut: str
    corpus_dir: str | Path
    iterations: int
    trials: int
    master_seed: int
    out_dir: str | Path
    rho: float = 0.0025
    depth_cap: int = 200
    mutants_per_iteration: int = 20
    dictionary_path: str | Path | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigurationError("master seed must fit in 64 bits")
        if self.mutants_per_iteration < 0:
            raise ConfigurationError("mutants_per_iteration must be >= 0")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")
        get_harness(self.sut)


@dataclass
class TrialReport:
    algorithm: str
    sut: str
    trial: int
    seed: int
    iterations: int
    executions: int
    branches: int
    coverage_pct: float
    sequences: int
    glob_cases: list[int]
    case_exec_counts: dict[str, int]
    series: list[list]
    model: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "sut": self.sut,
            "trial": self.trial,
            "seed": self.seed,
            "iterations": self.iterations,
            "executions": self.executions,
            "branches": self.branches,
            "coverage_pct": self.coverage_pct,
            "sequences": self.sequences,
            "glob_cases": self.glob_cases,
            "case_exec_counts": self.case_exec_counts,
            "series": self.series,
            "model": self.model,
        }


def trial_seed(master_seed: int, trial: int) -> int:
    """Stable 64-bit per-trial seed derived from the master seed."""
    digest = hashlib.sha256(b"%d:%d" % (master_seed, trial)).digest()
    return int.from_bytes(digest[:8], "big")


def build_engine(cfg: CampaignConfig, server, rng):
    kind, detail = ALGORITHMS[cfg.algorithm]
    virgin = VirginMap(server.total_branches, server.map_size)
    if cfg.dictionary_path is not None:
        dictionary = load_dictionary(cfg.dictionary_path)
    else:
        dictionary = server.default_dictionary()
    mutation_cfg = MutationConfig(dictionary=dictionary)
    if kind == "flat":
        return FlatEngine(
            server,
            detail,
            mutation_cfg,
            rng,
            virgin,
            cfg.mutants_per_iteration,
            cfg.depth_cap,
        )
    node_policy, seed_policy = detail
    return TreeEngine(
        server,
        node_policy,
        seed_policy,
        mutation_cfg,
        rng,
        virgin,
        cfg.mutants_per_iteration,
        UctParams(cfg.rho, cfg.depth_cap),
    )


def run_trial(cfg: CampaignConfig, trial: int, corpus: Sequence[RequestSequence]) -> TrialReport:
    """One fully independent trial: own rng, server, model, virgin map."""
    seed = trial_seed(cfg.master_seed, trial)
    rng = random.Random(seed)
    server = get_harness(cfg.sut)
    engine = build_engine(cfg, server, rng)
    virgin = engine.virgin

    def pct() -> float:
        # rounded once here so reports re-serialize byte-identically
        return round(coverage_percent(virgin), 4)

    gc_was_on = gc.isenabled()
    gc.disable()
    try:
        engine.ingest(corpus)
        branches = virgin.covered()
        sequences = len(engine.seen)
        executions = 0
        series = [[0, branches, pct(), sequences]]
        # every branch gain gets a row; sequence-only growth is sampled on a
        # stride so busy trials stay reviewable
        stride = max(1, cfg.iterations // 512)
        next_mark = 1
        for i in range(1, cfg.iterations + 1):
            stats = engine.run_iteration()
            executions += stats.executed
            if stats.new_branches or (stats.new_sequences and i >= next_mark):
                branches = virgin.covered()
                sequences = len(engine.seen)
                series.append([i, branches, pct(), sequences])
                next_mark = i + stride
        if series[-1][0] != cfg.iterations:
            branches = virgin.covered()
            sequences = len(engine.seen)
            series.append([cfg.iterations, branches, pct(), sequences])
    finally:
        if gc_was_on:
            gc.enable()

    return TrialReport(
        algorithm=cfg.algorithm,
        sut=cfg.sut,
        trial=trial,
        seed=seed,
        iterations=cfg.iterations,
        executions=executions,
        branches=branches,
        coverage_pct=pct(),
        sequences=sequences,
        # every glob case owns a branch, so the covered bits name the cases hit
        glob_cases=[
            case["case_id"]
            for case in server.glob_cases()
            if any(virgin.bits >> b & 1 for b in case["branch_ids"])
        ],
        # per-case execution tallies back the significance tests on case depth
        case_exec_counts={str(c): n for c, n in sorted(engine.case_exec_counts.items())},
        series=series,
        model=engine.summary(),
    )


def write_trial_report(report: TrialReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / f"trial_{report.trial}.json"
    json_path.write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    csv_path = out_dir / f"trial_{report.trial}.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "branches", "coverage_pct", "sequences"])
        for iteration, branches, pct, sequences in report.series:
            writer.writerow([iteration, branches, f"{pct:.4f}", sequences])


def _trial_task(args):
    cfg, trial, corpus = args
    return run_trial(cfg, trial, corpus)


def run_campaign(cfg: CampaignConfig, corpus: Sequence[RequestSequence] | None = None) -> list[TrialReport]:
    """Run all trials and write their reports; returns them in trial order."""
    if corpus is None:
        corpus = load_corpus(cfg.corpus_dir)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports: list[TrialReport] = []
    if cfg.jobs == 1 or cfg.trials == 1:
        for trial in range(cfg.trials):
            report = run_trial(cfg, trial, corpus)
            write_trial_report(report, out_dir)
            reports.append(report)
        return reports

    import multiprocessing

    tasks = [(cfg, trial, corpus) for trial in range(cfg.trials)]
    with multiprocessing.Pool(min(cfg.jobs, cfg.trials)) as pool:
        for report in pool.imap_unordered(_trial_task, tasks):
            write_trial_report(report, out_dir)
            reports.append(report)
    reports.sort(key=lambda r: r.trial)
    return reports


def load_reports(report_dir: str | Path) -> list[dict]:
    report_dir = Path(report_dir)
    paths = sorted(report_dir.glob("trial_*.json"), key=lambda p: p.name)
    reports = [json.loads(p.read_text()) for p in paths]
    if not reports:
        raise ConfigurationError(f"no trial reports under {report_dir}")
    return reports


def compare_reports(report_dirs: Sequence[str | Path], out_dir: str | Path) -> dict:
    """Aggregate per-algorithm results and write comparison.json / cases.csv."""
    by_algorithm: dict[str, list[dict]] = {}
    suts = set()
    for directory in report_dirs:
        for report in load_reports(directory):
            by_algorithm.setdefault(report["algorithm"], []).append(report)
            suts.add(report["sut"])
    if len(suts) != 1:
        raise ConfigurationError(f"reports span multiple harnesses: {sorted(suts)}")
    sut = suts.pop()
    cases = get_harness(sut).glob_cases()

    algorithms = sorted(by_algorithm)
    summary: dict = {"sut": sut, "algorithms": {}, "pairwise": []}
    for name in algorithms:
        reports = by_algorithm[name]
        finals = [r["coverage_pct"] for r in reports]
        trials = len(reports)
        case_probability = {}
        for case in cases:
            hits = sum(1 for r in reports if case["case_id"] in r["glob_cases"])
            case_probability[str(case["case_id"])] = round(hits / trials, 6)
        entry = {
            "trials": trials,
            "mean_coverage_pct": round(statistics.fmean(finals), 6),
            "ci_half_width": 0.0,
            "cases": case_probability,
        }
        if trials >= 2:
            ci = confidence_interval_95(finals)
            entry["mean_coverage_pct"] = round(ci.mean, 6)
            entry["ci_half_width"] = round(ci.half_width, 6)
        summary["algorithms"][name] = entry
    for i, a in enumerate(algorithms):
        for b in algorithms[i + 1 :]:
            fa = [r["coverage_pct"] for r in by_algorithm[a]]
            fb = [r["coverage_pct"] for r in by_algorithm[b]]
            if len(fa) < 2 or len(fb) < 2:
                continue
            result = welch_t_test(fa, fb)
            summary["pairwise"].append(
                {
                    "a": a,
                    "b": b,
                    "t": round(result.t, 6),
                    "df": round(result.df, 6),
                    "p": round(result.p, 6),
                    "degenerate": result.degenerate,
                }
            )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "comparison.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n"
    )
    with (out_dir / "cases.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["case_id", "description"] + algorithms)
        for case in cases:
            row = [case["case_id"], case["description"]]
            for name in algorithms:
                row.append(f"{summary['algorithms'][name]['cases'][str(case['case_id'])]:.6f}")
            writer.writerow(row)
    return summary
