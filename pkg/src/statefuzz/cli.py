"""Command line front end.

    statefuzz run --algorithm legion-uu --sut ftp-glob --corpus DIR \\
        --iterations 50000 --trials 5 --seed 42 --out results/uu
    statefuzz compare --reports results/uu results/favor --out results/cmp
"""

from __future__ import annotations

import argparse
import sys

from .campaign import ALGORITHMS, CampaignConfig, compare_reports, run_campaign
from .errors import StateFuzzError
from .sut import HARNESSES


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statefuzz",
        description="Coverage-guided fuzzing of simulated protocol servers "
        "with pluggable state-selection schedulers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one fuzzing campaign")
    run.add_argument("--algorithm", required=True, choices=sorted(ALGORITHMS))
    run.add_argument("--sut", required=True, choices=sorted(HARNESSES))
    run.add_argument("--corpus", required=True, help="directory of .rseq/.txt seeds")
    run.add_argument("--iterations", required=True, type=int)
    run.add_argument("--trials", required=True, type=int)
    run.add_argument("--seed", required=True, type=int, help="64-bit master seed")
    run.add_argument("--out", required=True, help="report output directory")
    run.add_argument("--rho", type=float, default=0.0025)
    run.add_argument("--depth-cap", type=int, default=200)
    run.add_argument("--dict", dest="dictionary", default=None, help="token dictionary file")
    run.add_argument("--mutants-per-iter", type=int, default=20)
    run.add_argument("--jobs", type=int, default=1, help="parallel trial processes")

    compare = sub.add_parser("compare", help="aggregate and compare campaign reports")
    compare.add_argument("--reports", required=True, nargs="+", help="report directories")
    compare.add_argument("--out", required=True, help="comparison output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = CampaignConfig(
                algorithm=args.algorithm,
                sut=args.sut,
                corpus_dir=args.corpus,
                iterations=args.iterations,
                trials=args.trials,
                master_seed=args.seed,
                out_dir=args.out,
                rho=args.rho,
                depth_cap=args.depth_cap,
                dictionary_path=args.dictionary,
                mutants_per_iteration=args.mutants_per_iter,
                jobs=args.jobs,
            )
            reports = run_campaign(cfg)
            for report in reports:
                print(
                    f"trial {report.trial}: {report.branches} branches "
                    f"(coverage {report.coverage_pct:.4f}), {report.sequences} sequences, "
                    f"{report.executions} executions"
                )
            return 0
        summary = compare_reports(args.reports, args.out)
        for name in sorted(summary["algorithms"]):
            entry = summary["algorithms"][name]
            print(
                f"{name}: mean coverage {entry['mean_coverage_pct']:.4f} "
                f"+/- {entry['ci_half_width']:.4f} over {entry['trials']} trials"
            )
        return 0
    except StateFuzzError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
