#!/usr/bin/env python3
"""
Evaluation script for the straggler timing models.

This script compares the closed-form completion times against the Monte Carlo
event simulator for a sweep of K = mn:
1. One-shot coded computation (every worker returns one block)
2. Asynchronous coded computation (every worker returns up to L blocks)
3. The RPIR baseline

It prints both estimates side by side and saves a JSON report.
"""

import sys
import time
import json
import argparse
from pathlib import Path
from datetime import datetime
from typing import Any, Dict, List

# Add the src directory to the path so we can import privcode
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from privcode.core.errors import PrivcodeError
from privcode.core.stragglersim import Convention, DelayModel, event_sim, timing_report
from privcode.utils import default_output_manager


def evaluate_point(N: int, n: int, m: int, M: int, L: int, model: DelayModel,
                   trials: int, seed: int, convention: Convention) -> Dict[str, Any]:
    """Closed-form and simulated times for one geometry."""
    print(f"\nEvaluating N={N}, n={n}, m={m}, L={L} ({trials} trials)...")
    start_time = time.time()

    report = timing_report(N, n, m, M, model, L=L, convention=convention)
    simulated = event_sim(N, n, m, L, model, trials, seed=seed, M=M).means

    return {
        "K": m * n,
        "m": m,
        "L": L,
        "closed_form": {
            "rpir": report.t_rpir,
            "one_shot": report.t_a_one,
            "async": report.t_a_async,
        },
        "simulated": simulated,
        "groupings": report.plan_count,
        "exhaustive": report.exhaustive,
        "processing_time": time.time() - start_time,
    }


def _fmt(value: Any) -> str:
    if value is None or value != value:
        return "-"
    return f"{value:.4f}"


def print_report(results: List[Dict[str, Any]]) -> None:
    print("\nTIMING MODEL COMPARISON:")
    print(f"{'=' * 78}")
    print(f"{'K':<4} {'L':<4} {'one-shot':<22} {'async':<22} {'rpir':<22}")
    print(f"{'':<9} {'closed':<10} {'sim':<11} {'closed':<10} {'sim':<11} {'closed':<10} {'sim':<11}")
    print(f"{'-' * 78}")
    for row in results:
        closed, sim = row["closed_form"], row["simulated"]
        print(
            f"{row['K']:<4} {row['L']:<4} "
            f"{_fmt(closed['one_shot']):<10} {_fmt(sim['one_shot']):<11} "
            f"{_fmt(closed['async']):<10} {_fmt(sim['async']):<11} "
            f"{_fmt(closed['rpir']):<10} {_fmt(sim['rpir']):<11}"
        )


def main():
    parser = argparse.ArgumentParser(description="Compare closed-form and simulated straggler times")
    parser.add_argument("--workers", type=int, default=12, help="Number of workers N")
    parser.add_argument("--groups", type=int, default=2, help="Number of groups n")
    parser.add_argument("--library", type=int, default=4, help="Library size M")
    parser.add_argument("--gamma", type=float, default=0.1, help="Delay shift gamma")
    parser.add_argument("--mu", type=float, default=0.1, help="Straggling parameter mu")
    parser.add_argument("--trials", type=int, default=20000, help="Monte Carlo trials per point")
    parser.add_argument("--seed", type=int, default=0, help="Simulation seed")
    parser.add_argument(
        "--convention",
        choices=[c.value for c in Convention],
        default=Convention.HARMONIC.value,
        help="Order-statistic convention for the closed forms"
    )
    parser.add_argument("--output", "-o", help="Path to save the report JSON")
    args = parser.parse_args()

    try:
        model = DelayModel(gamma=args.gamma, mu=args.mu)
        convention = Convention(args.convention)
        results = []
        for m in range(1, args.workers // args.groups + 1):
            # One block per worker, then as many blocks as m allows
            for L in sorted({1, m}):
                results.append(evaluate_point(
                    args.workers, args.groups, m, args.library, L, model,
                    args.trials, args.seed, convention
                ))
    except PrivcodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)

    print_report(results)

    if not args.output:
        args.output = str(default_output_manager.get_report_path(report_type="timing"))

    report = {
        "timestamp": datetime.now().isoformat(),
        "parameters": {
            "N": args.workers,
            "n": args.groups,
            "M": args.library,
            "gamma": args.gamma,
            "mu": args.mu,
            "trials": args.trials,
            "seed": args.seed,
            "convention": convention.value,
        },
        "results": results,
    }
    with open(args.output, 'w', encoding='utf-8') as f:
        json.dump(report, f, indent=2, default=str)
    print(f"\nReport saved to {args.output}")


if __name__ == "__main__":
    main()
