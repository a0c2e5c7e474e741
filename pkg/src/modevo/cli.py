"""Command line: ``modevo evolve|evaluate|descriptors|analyze``.

Exit codes: 0 success, 1 user error (bad input, bad config, missing file),
2 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
import traceback
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from . import analysis, documents, genome, morphology
from .decoder import decode_brain
from .descriptors import descriptor_vector
from .evolution import EnvironmentConfig, EvolutionConfig, GenerationRecord, load_archive, run_experiment
from .fitness import FitnessBreakdown, evaluate_directed
from .simulation import simulate

SMOKE = {"mu": 8, "lambda_": 4, "generations": 5, "runs": 2}
_SAFE_NAME = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


class UserError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    linear_actuator_enabled: bool = True
    evolution: dict[str, Any] = field(default_factory=dict)
    output: str = "results"

    def __post_init__(self) -> None:
        if not self.name or not _SAFE_NAME.match(self.name):
            raise documents.SchemaError(f"name {self.name!r} is not filesystem-safe", "name")

    def config(self, **overrides: Any) -> EvolutionConfig:
        doc = dict(self.evolution)
        doc.update(overrides)
        doc["environment"] = dataclasses.asdict(self.environment)
        doc["linear_actuator_enabled"] = self.linear_actuator_enabled
        return EvolutionConfig.from_dict(doc)


def parse_spec(text: str) -> ExperimentSpec:
    doc = documents.loads(text, "experiment")
    allowed = {"format_version", "type", "name", "environment", "linear_actuator_enabled",
               "evolution", "output"}
    unknown = sorted(doc.keys() - allowed)
    if unknown:
        raise documents.SchemaError(f"experiment: unknown field {unknown[0]!r}", unknown[0])
    if "name" not in doc:
        raise documents.SchemaError("experiment: missing field 'name'", "name")
    env_doc = doc.get("environment", {})
    env_fields = {f.name for f in dataclasses.fields(EnvironmentConfig)}
    if not isinstance(env_doc, dict):
        raise documents.SchemaError("experiment: environment must be an object", "environment")
    for key in env_doc:
        if key not in env_fields:
            raise documents.SchemaError(f"environment: unknown field {key!r}", key)
    try:
        env = EnvironmentConfig(**env_doc)
    except ValueError as exc:
        raise documents.SchemaError(f"environment: {exc}", "environment") from None
    spec = ExperimentSpec(doc["name"], env, bool(doc.get("linear_actuator_enabled", True)),
                          dict(doc.get("evolution", {})), doc.get("output", "results"))
    spec.config()  # surfaces bad evolution fields now
    return spec


def dump_spec(spec: ExperimentSpec) -> str:
    return documents.dumps({
        "name": spec.name,
        "environment": dataclasses.asdict(spec.environment),
        "linear_actuator_enabled": spec.linear_actuator_enabled,
        "evolution": spec.evolution,
        "output": spec.output,
    }, "experiment")


def bundled_specs() -> list[str]:
    return sorted(p.name for p in resources.files("modevo.specs").iterdir() if p.name.endswith(".spec"))


def read_spec(path: str) -> ExperimentSpec:
    p = Path(path)
    if p.exists():
        return parse_spec(documents.read(p))
    if path in bundled_specs():
        return parse_spec(resources.files("modevo.specs").joinpath(path).read_text("utf-8"))
    raise UserError(f"spec file not found: {path}")


# -- commands ---------------------------------------------------------------

def cmd_evolve(args: argparse.Namespace) -> int:
    spec = read_spec(args.spec)
    overrides: dict[str, Any] = dict(SMOKE) if args.smoke else {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = spec.config(**overrides)
    out = Path(args.out) if args.out else Path(spec.output)
    out.mkdir(parents=True, exist_ok=True)
    documents.write(out / "experiment.spec", dump_spec(spec))

    def progress(run: int, gen: GenerationRecord) -> None:
        best = max(r.fitness for r in gen.rows)
        print(f"run {run:02d} gen {gen.index:4d}  mean fitness {gen.mean_fitness:+.5f}  "
              f"best {best:+.5f}", flush=True)

    archives = run_experiment(config, config.runs, out, resume=args.resume,
                              workers=args.workers, progress=progress)
    print(f"completed {len(archives)} runs in {out / 'runs'}")
    return 0


def _environment(args: argparse.Namespace) -> EnvironmentConfig:
    if args.env == "plain":
        return EnvironmentConfig("plain")
    return EnvironmentConfig("rough", amplitude=args.amplitude, wavelength=args.wavelength,
                             seed=args.seed)


def cmd_evaluate(args: argparse.Namespace) -> int:
    body = morphology.load_body(args.body)
    violations = morphology.validate(body)
    if violations:
        raise UserError("invalid body:\n  " + "\n  ".join(violations))
    brain = genome.deserialize(documents.read(args.brain))
    config = EvolutionConfig(environment=_environment(args))
    if args.duration is not None:
        config = dataclasses.replace(config, sim=dataclasses.replace(config.sim, duration=args.duration))
    weights = decode_brain(brain, body, config.grid_radius)
    traj = simulate(body, weights, config.environment.build(), config.sim, config.cpg)
    if traj.unstable:
        breakdown = FitnessBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)
        print(f"# unstable: {traj.diagnostic}")
    else:
        breakdown = evaluate_directed(traj, config.fitness)
    print(",".join(FitnessBreakdown.CSV_FIELDS))
    print(",".join(repr(v) for v in breakdown.row()))
    print()
    sys.stdout.write(traj.to_csv())
    return 0


def cmd_descriptors(args: argparse.Namespace) -> int:
    body = morphology.load_body(args.body)
    violations = morphology.validate(body)
    if violations:
        raise UserError("invalid body:\n  " + "\n  ".join(violations))
    vec = descriptor_vector(body)
    if args.format == "json":
        print(json.dumps(vec.as_dict(), sort_keys=True))
    else:
        names = list(vec.as_dict())
        print(",".join(names))
        print(",".join(repr(float(v)) if not isinstance(v, int) else str(v)
                       for v in vec.as_dict().values()))
    return 0


def _load_arm(path: str):
    runs = Path(path) / "runs"
    if not runs.is_dir():
        raise UserError(f"{path}: no runs/ directory")
    dirs = sorted(d for d in runs.iterdir() if (d / "config.snapshot").exists())
    if not dirs:
        raise UserError(f"{path}: no runs found")
    archives = [load_archive(d) for d in dirs]
    gens = {len(a.generations) for a in archives}
    if len(gens) != 1:
        raise UserError(f"{path}: runs have different generation counts {sorted(gens)}")
    return archives


def cmd_analyze(args: argparse.Namespace) -> int:
    arm_a, arm_b = _load_arm(args.arm_a), _load_arm(args.arm_b)
    name_a, name_b = Path(args.arm_a).name, Path(args.arm_b).name
    try:
        rows = analysis.compare_final_generation(arm_a, arm_b, paired=not args.unpaired)
    except ValueError as exc:
        raise UserError(str(exc)) from None
    sys.stdout.write(analysis.report_text(rows, f"{name_a} vs. {name_b}"))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(analysis.report_text(rows, f"{name_a} vs. {name_b}"))
        (out / "report.csv").write_text(analysis.report_csv(rows))
        (out / "boxplot.csv").write_text(analysis.boxplot_csv({name_a: arm_a, name_b: arm_b}))
        for arm_name, arm in ((name_a, arm_a), (name_b, arm_b)):
            for metric in ("fitness", "la_count", *analysis.DESCRIPTOR_NAMES):
                series = analysis.progression_series(arm, metric)
                (out / f"progression_{arm_name}_{metric}.csv").write_text(analysis.series_csv(series))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modevo", description="Evolve, evaluate and analyse modular robots.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run an experiment spec (all repetitions)")
    p.add_argument("spec", help="spec file path or bundled spec name, e.g. experiment1_la.spec")
    p.add_argument("--seed", type=int, help="base seed (run i uses seed + i)")
    p.add_argument("--workers", type=int, default=1, help="evaluation processes (output independent of N)")
    p.add_argument("--resume", action="store_true", help="continue from existing checkpoints")
    p.add_argument("--smoke", action="store_true", help="tiny run: mu=8, lambda=4, 5 generations, 2 runs")
    p.add_argument("--out", help="output directory (default: the spec's 'output')")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("evaluate", help="simulate one body + brain and print fitness and trajectory")
    p.add_argument("body", help="body document")
    p.add_argument("brain", help="brain genome document")
    p.add_argument("--env", choices=("plain", "rough"), default="plain")
    p.add_argument("--seed", type=int, default=42, help="rough terrain seed")
    p.add_argument("--amplitude", type=float, default=0.08, help="rough terrain amplitude (m)")
    p.add_argument("--wavelength", type=float, default=0.8, help="rough terrain wavelength (m)")
    p.add_argument("--duration", type=float, help="evaluation time in seconds (default 30)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("descriptors", help="print the eight morphological descriptors of a body")
    p.add_argument("body", help="body document")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_descriptors)

    p = sub.add_parser("analyze", help="compare the final generations of two experiment arms")
    p.add_argument("arm_a", help="output directory of the first arm")
    p.add_argument("arm_b", help="output directory of the second arm")
    p.add_argument("--unpaired", action="store_true", help="rank-sum test instead of signed-rank")
    p.add_argument("--out", help="write report and plot-data CSVs here")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UserError, documents.DocumentError, documents.SchemaError, FileNotFoundError,
            IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
