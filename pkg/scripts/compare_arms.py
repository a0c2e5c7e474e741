"""Compare two finished experiment directories and write the report tables.

Example:
    python3 scripts/compare_arms.py results/desk_plain results/desk_rough --out results/plain_vs_rough
"""

import argparse
from pathlib import Path

from modevo import analysis
from modevo.evolution import load_archive


def load_arm(root: Path):
    runs = sorted(p for p in (root / "runs").iterdir() if p.is_dir())
    return [load_archive(p) for p in runs]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("arm_a", type=Path)
    parser.add_argument("arm_b", type=Path)
    parser.add_argument("--out", type=Path)
    args = parser.parse_args()

    a, b = load_arm(args.arm_a), load_arm(args.arm_b)
    rows = analysis.compare_final_generation(a, b, paired=len(a) == len(b))
    print(analysis.report_text(rows, f"{args.arm_a.name} vs. {args.arm_b.name}"))
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.csv").write_text(analysis.report_csv(rows))
        arms = {args.arm_a.name: a, args.arm_b.name: b}
        (args.out / "boxplot.csv").write_text(analysis.boxplot_csv(arms))
        for name, arm in arms.items():
            for metric in analysis.REPORT_METRICS:
                series = analysis.progression_series(arm, metric)
                (args.out / f"progression_{name}_{metric}.csv").write_text(analysis.series_csv(series))


if __name__ == "__main__":
    main()
