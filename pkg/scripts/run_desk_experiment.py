"""Desk-scale run of a bundled or custom experiment spec.

Example:
    python3 scripts/run_desk_experiment.py experiment1_la.spec --out results/desk_la
"""

import argparse
import time

from modevo.cli import read_spec
from modevo.evolution import run_experiment


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("spec")
    parser.add_argument("--out", required=True)
    parser.add_argument("--mu", type=int, default=20)
    parser.add_argument("--lambda", dest="lambda_", type=int, default=10)
    parser.add_argument("--generations", type=int, default=30)
    parser.add_argument("--runs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--resume", action="store_true")
    args = parser.parse_args()

    config = read_spec(args.spec).config(mu=args.mu, lambda_=args.lambda_, generations=args.generations,
                                         runs=args.runs, seed=args.seed)
    start = time.perf_counter()
    archives = run_experiment(config, out_dir=args.out, resume=args.resume, workers=args.workers)
    for i, a in enumerate(archives):
        first, last = a.generations[0], a.final
        print(f"run {i:02d} (seed {a.seed}): mean fitness {first.mean_fitness:.4f} -> "
              f"{last.mean_fitness:.4f}, best {last.metric('fitness').max():.4f}")
    print(f"{len(archives)} runs in {time.perf_counter() - start:.0f} s -> {args.out}")


if __name__ == "__main__":
    main()
