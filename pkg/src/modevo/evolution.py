"""Steady-state (mu + lambda) evolution with binary tournaments.

Each generation creates ``lambda`` offspring: two independent binary
tournaments pick the parents, the body and brain genomes are each crossed
over and then mutated. Survivors are ``mu`` sequential binary tournaments over
the ``mu + lambda`` pool, each winner leaving the pool. This survivor scheme
is not elitist: the best individual can be lost.

Checkpoint layout of one run::

    <run_dir>/config.snapshot
    <run_dir>/gen_<n>/population.json   genomes and fitness of the survivors
    <run_dir>/gen_<n>/metrics.csv       id, fitness, 8 descriptors, LA count
    <run_dir>/gen_<n>/evaluations.csv   fitness breakdown of every evaluation
    <run_dir>/gen_<n>/best.json         best-of-generation genome documents
    <run_dir>/gen_<n>/state.json        RNG and innovation registries (written last)
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import documents, genome, terrain
from .controller import CpgConfig
from .decoder import (
    BODY_INPUTS,
    BODY_OUTPUTS,
    BRAIN_INPUTS,
    BRAIN_OUTPUTS,
    DecodeLimits,
    decode_body,
    decode_brain,
)
from .descriptors import NAMES as DESCRIPTOR_NAMES
from .descriptors import DescriptorVector, descriptor_vector
from .fitness import ZERO, FitnessBreakdown, FitnessParams, evaluate_directed
from .genome import Cppn, InnovationRegistry, MutationParams
from .morphology import BodyGraph, ModuleKind, count_kind
from .simulation import SimConfig, simulate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnvironmentConfig:
    kind: str = "plain"
    extent: float = terrain.DEFAULT_EXTENT
    cell_size: float = terrain.DEFAULT_CELL
    amplitude: float = terrain.DEFAULT_AMPLITUDE
    wavelength: float = terrain.DEFAULT_WAVELENGTH
    seed: int = 42

    def __post_init__(self) -> None:
        if self.kind not in ("plain", "rough"):
            raise ValueError(f"unknown environment {self.kind!r}")

    def build(self) -> terrain.Heightmap:
        return _heightmap(self)


@functools.lru_cache(maxsize=8)
def _heightmap(env: EnvironmentConfig) -> terrain.Heightmap:
    if env.kind == "plain":
        return terrain.plain(env.extent, env.cell_size)
    return terrain.rough(env.extent, env.amplitude, env.wavelength, env.seed, env.cell_size)


@dataclass(frozen=True)
class EvolutionConfig:
    mu: int = 100
    lambda_: int = 50
    generations: int = 300
    runs: int = 20
    tournament_size: int = 2
    seed: int = 0
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    linear_actuator_enabled: bool = True
    sim: SimConfig = field(default_factory=SimConfig)
    cpg: CpgConfig = field(default_factory=CpgConfig)
    fitness: FitnessParams = field(default_factory=FitnessParams)
    mutation: MutationParams = field(default_factory=MutationParams)
    max_modules: int = 10
    grid_radius: int = 5

    def __post_init__(self) -> None:
        if not self.mu >= self.lambda_ >= 1:
            raise ValueError("need mu >= lambda >= 1")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be at least 2")
        if self.generations < 0 or self.runs < 1:
            raise ValueError("generations must be >= 0 and runs >= 1")

    @property
    def limits(self) -> DecodeLimits:
        return DecodeLimits(self.max_modules, self.grid_radius, self.linear_actuator_enabled)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> EvolutionConfig:
        return _from_dict(cls, doc, "config")


_NESTED = {
    "environment": EnvironmentConfig,
    "sim": SimConfig,
    "cpg": CpgConfig,
    "fitness": FitnessParams,
    "mutation": MutationParams,
}


def _from_dict(cls, doc: dict[str, Any], context: str):
    if not isinstance(doc, dict):
        raise documents.SchemaError(f"{context}: expected an object", context)
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in doc.items():
        if key not in names:
            raise documents.SchemaError(f"{context}: unknown field {key!r}", key)
        if cls is EvolutionConfig and key in _NESTED:
            value = _from_dict(_NESTED[key], value, f"{context}.{key}")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise documents.SchemaError(f"{context}: {exc}") from None


# -- individuals and evaluation -----------------------------------------

@dataclass
class Individual:
    id: int
    body_genome: Cppn
    brain_genome: Cppn
    body: BodyGraph
    fitness: float | None = None
    breakdown: FitnessBreakdown | None = None
    unstable: bool = False
    parents: tuple[int, ...] = ()

    @functools.cached_property
    def descriptors(self) -> DescriptorVector:
        return descriptor_vector(self.body)

    @property
    def la_count(self) -> int:
        return count_kind(self.body, ModuleKind.LINEAR_ACTUATOR)


def make_individual(ident: int, body_genome: Cppn, brain_genome: Cppn, config: EvolutionConfig,
                    parents: tuple[int, ...] = ()) -> Individual:
    return Individual(ident, body_genome, brain_genome, decode_body(body_genome, config.limits),
                      parents=parents)


def evaluate_genomes(body: BodyGraph, brain_genome: Cppn, config: EvolutionConfig
                     ) -> tuple[FitnessBreakdown, bool]:
    """Simulate one robot and score it; an unstable simulation scores zero."""
    weights = decode_brain(brain_genome, body, config.grid_radius)
    traj = simulate(body, weights, config.environment.build(), config.sim, config.cpg)
    if traj.unstable or len(traj) < 2:
        return ZERO, True
    return evaluate_directed(traj, config.fitness), False


def _evaluate_task(task):
    body, brain_genome, config = task
    return evaluate_genomes(body, brain_genome, config)


class Evaluator:
    """Evaluates batches of individuals, optionally across worker processes.

    Results depend only on the individuals, never on the worker count.
    """

    def __init__(self, config: EvolutionConfig, workers: int = 1):
        self.config = config
        self.workers = workers
        self._pool: ProcessPoolExecutor | None = None

    def __enter__(self) -> Evaluator:
        if self.workers > 1:
            self._pool = ProcessPoolExecutor(self.workers)
        return self

    def __exit__(self, *exc) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __call__(self, individuals: Sequence[Individual]) -> None:
        tasks = [(ind.body, ind.brain_genome, self.config) for ind in individuals]
        if self._pool is None:
            results = map(_evaluate_task, tasks)
        else:
            results = self._pool.map(_evaluate_task, tasks)
        for ind, (breakdown, unstable) in zip(individuals, results):
            ind.breakdown = breakdown
            ind.fitness = breakdown.fitness
            ind.unstable = unstable


# -- selection ------------------------------------------------------------

def binary_tournament(pool: Sequence[Individual], rng: np.random.Generator, k: int = 2) -> Individual:
    """Draw k contestants uniformly (with replacement) and return the fittest.

    Ties are broken uniformly at random.
    """
    if not pool:
        raise ValueError("tournament over an empty pool")
    picks = rng.integers(len(pool), size=k)
    best = max(pool[i].fitness for i in picks)
    winners = [i for i in picks if pool[i].fitness == best]
    if len(winners) == 1:
        return pool[winners[0]]
    return pool[winners[int(rng.integers(len(winners)))]]


def select_survivors(pool: list[Individual], mu: int, rng: np.random.Generator,
                     k: int = 2) -> list[Individual]:
    remaining = list(pool)
    survivors = []
    for _ in range(mu):
        winner = binary_tournament(remaining, rng, k)
        remaining.remove(winner)
        survivors.append(winner)
    return sorted(survivors, key=lambda ind: ind.id)


# -- archive --------------------------------------------------------------

@dataclass(frozen=True)
class MetricsRow:
    id: int
    fitness: float
    descriptors: tuple[float, ...]
    la_count: int


@dataclass(frozen=True)
class GenerationRecord:
    index: int
    rows: tuple[MetricsRow, ...]
    evaluations: tuple[tuple[int, FitnessBreakdown], ...]
    best_body: str
    best_brain: str

    @property
    def mean_fitness(self) -> float:
        return float(np.mean([r.fitness for r in self.rows]))

    def metric(self, name: str) -> np.ndarray:
        if name == "fitness":
            return np.array([r.fitness for r in self.rows])
        if name == "la_count":
            return np.array([r.la_count for r in self.rows], dtype=float)
        k = DESCRIPTOR_NAMES.index(name)
        return np.array([r.descriptors[k] for r in self.rows])


@dataclass
class RunArchive:
    config: EvolutionConfig
    seed: int
    generations: list[GenerationRecord] = field(default_factory=list)

    @property
    def final(self) -> GenerationRecord:
        return self.generations[-1]

    def digest(self) -> str:
        h = hashlib.sha256()
        for gen in self.generations:
            h.update(metrics_csv(gen).encode())
        return h.hexdigest()


METRICS_FIELDS = ("id", "fitness", *DESCRIPTOR_NAMES, "la_count")
EVALUATION_FIELDS = ("id", *FitnessBreakdown.CSV_FIELDS)


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def metrics_csv(gen: GenerationRecord) -> str:
    return _csv(METRICS_FIELDS, [(r.id, r.fitness, *r.descriptors, r.la_count) for r in gen.rows])


def evaluations_csv(gen: GenerationRecord) -> str:
    return _csv(EVALUATION_FIELDS, [(i, *b.row()) for i, b in gen.evaluations])


def _parse_metrics(text: str) -> tuple[MetricsRow, ...]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != METRICS_FIELDS:
        raise ValueError(f"unexpected metrics header {header}")
    rows = []
    for rec in reader:
        rows.append(MetricsRow(int(rec[0]), float(rec[1]), tuple(float(v) for v in rec[2:10]),
                               int(rec[10])))
    return tuple(rows)


def _parse_evaluations(text: str) -> tuple[tuple[int, FitnessBreakdown], ...]:
    reader = csv.reader(io.StringIO(text))
    next(reader)
    out = []
    for rec in reader:
        fit, dist, length, delta, pen = (float(v) for v in rec[1:])
        out.append((int(rec[0]), FitnessBreakdown(dist, length, delta, pen, fit)))
    return tuple(out)


def record_generation(index: int, population: Sequence[Individual],
                      evaluated: Sequence[Individual]) -> GenerationRecord:
    rows = tuple(MetricsRow(ind.id, float(ind.fitness), ind.descriptors.values(), ind.la_count)
                 for ind in sorted(population, key=lambda i: i.id))
    evaluations = tuple((ind.id, ind.breakdown) for ind in evaluated)
    best = max(population, key=lambda ind: (ind.fitness, -ind.id))
    return GenerationRecord(index, rows, evaluations, genome.serialize(best.body_genome),
                            genome.serialize(best.brain_genome))


def _population_doc(population: Sequence[Individual]) -> str:
    members = [{
        "id": ind.id,
        "parents": list(ind.parents),
        "fitness": ind.fitness,
        "unstable": ind.unstable,
        "breakdown": dataclasses.asdict(ind.breakdown),
        "body": genome.to_dict(ind.body_genome),
        "brain": genome.to_dict(ind.brain_genome),
    } for ind in population]
    return documents.dumps({"members": members}, "population")


def _load_population(text: str, config: EvolutionConfig) -> list[Individual]:
    doc = documents.loads(text, "population")
    out = []
    for m in doc["members"]:
        ind = make_individual(m["id"], genome.from_dict(m["body"]), genome.from_dict(m["brain"]),
                              config, tuple(m["parents"]))
        ind.breakdown = FitnessBreakdown(**m["breakdown"])
        ind.fitness = m["fitness"]
        ind.unstable = m["unstable"]
        out.append(ind)
    return out


def snapshot(config: EvolutionConfig) -> str:
    return documents.dumps({"config": config.to_dict()}, "config")


def load_snapshot(text: str) -> EvolutionConfig:
    doc = documents.loads(text, "config")
    return EvolutionConfig.from_dict(doc["config"])


def save_generation(run_dir: Path, gen: GenerationRecord, population: Sequence[Individual],
                    state: dict[str, Any]) -> None:
    gen_dir = run_dir / f"gen_{gen.index}"
    try:
        gen_dir.mkdir(parents=True, exist_ok=True)
        documents.write(gen_dir / "population.json", _population_doc(population))
        documents.write(gen_dir / "metrics.csv", metrics_csv(gen))
        documents.write(gen_dir / "evaluations.csv", evaluations_csv(gen))
        documents.write(gen_dir / "best.json", documents.dumps(
            {"body": json.loads(gen.best_body), "brain": json.loads(gen.best_brain)}, "best"))
        documents.write(gen_dir / "state.json", documents.dumps(state, "state"))
    except OSError as exc:
        raise CheckpointError(f"generation {gen.index}: {exc}") from exc


class CheckpointError(OSError):
    pass


def load_archive(run_dir: str | Path) -> RunArchive:
    run_dir = Path(run_dir)
    config = load_snapshot(documents.read(run_dir / "config.snapshot"))
    archive = RunArchive(config, config.seed)
    n = 0
    while (run_dir / f"gen_{n}" / "state.json").exists():
        archive.generations.append(_load_generation(run_dir / f"gen_{n}", n))
        n += 1
    return archive


def _load_generation(gen_dir: Path, index: int) -> GenerationRecord:
    best = documents.loads(documents.read(gen_dir / "best.json"), "best")
    return GenerationRecord(
        index,
        _parse_metrics(documents.read(gen_dir / "metrics.csv")),
        _parse_evaluations(documents.read(gen_dir / "evaluations.csv")),
        documents.dumps({"cppn": best["body"]["cppn"]}, "genome"),
        documents.dumps({"cppn": best["brain"]["cppn"]}, "genome"),
    )


# -- the loop -------------------------------------------------------------

def _rng_state(rng: np.random.Generator) -> dict[str, Any]:
    state = rng.bit_generator.state
    return {"bit_generator": state["bit_generator"],
            "state": {k: int(v) for k, v in state["state"].items()},
            "has_uint32": state["has_uint32"], "uinteger": state["uinteger"]}


def _rng_from_state(state: dict[str, Any]) -> np.random.Generator:
    bitgen = np.random.PCG64()
    bitgen.state = state
    return np.random.Generator(bitgen)


def _offspring(population: Sequence[Individual], next_id: int, config: EvolutionConfig,
               rng: np.random.Generator, body_reg: InnovationRegistry,
               brain_reg: InnovationRegistry) -> list[Individual]:
    children = []
    for k in range(config.lambda_):
        a = binary_tournament(population, rng, config.tournament_size)
        b = binary_tournament(population, rng, config.tournament_size)
        body = genome.crossover(a.body_genome, b.body_genome, a.fitness, b.fitness, rng)
        body = genome.mutate(body, config.mutation, body_reg, rng)
        brain = genome.crossover(a.brain_genome, b.brain_genome, a.fitness, b.fitness, rng)
        brain = genome.mutate(brain, config.mutation, brain_reg, rng)
        children.append(make_individual(next_id + k, body, brain, config, (a.id, b.id)))
    return children


def evolve(config: EvolutionConfig, run_dir: str | Path | None = None, resume: bool = False,
           workers: int = 1, progress: Callable[[GenerationRecord], None] | None = None) -> RunArchive:
    """Run one evolutionary run; checkpoint every generation when ``run_dir`` is set.

    With ``resume`` the run continues from its last complete generation and
    produces exactly the archive an uninterrupted run would have.
    """
    run_dir = Path(run_dir) if run_dir is not None else None
    archive = RunArchive(config, config.seed)
    start = 0
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        snap = snapshot(config)
        snap_path = run_dir / "config.snapshot"
        if resume and snap_path.exists() and documents.read(snap_path) != snap:
            raise CheckpointError(f"{run_dir}: config differs from the checkpointed run")
        documents.write(snap_path, snap)
        if resume:
            archive = load_archive(run_dir)
            archive.config = config
            start = len(archive.generations)

    with Evaluator(config, workers) as evaluate:
        if start == 0:
            rng = np.random.Generator(np.random.PCG64(config.seed))
            body_reg, brain_reg = InnovationRegistry(), InnovationRegistry()
            population = []
            for ident in range(config.mu):
                body = genome.minimal_cppn(BODY_INPUTS, BODY_OUTPUTS, body_reg, rng,
                                           config.mutation.weight_range)
                brain = genome.minimal_cppn(BRAIN_INPUTS, BRAIN_OUTPUTS, brain_reg, rng,
                                            config.mutation.weight_range)
                population.append(make_individual(ident, body, brain, config))
            evaluate(population)
            next_id = config.mu
            _finish_generation(archive, 0, population, population, run_dir, rng, body_reg,
                               brain_reg, next_id, progress)
            start = 1
        else:
            last = run_dir / f"gen_{start - 1}"
            state = documents.loads(documents.read(last / "state.json"), "state")
            rng = _rng_from_state(state["rng"])
            body_reg = InnovationRegistry.from_state(state["body_registry"])
            brain_reg = InnovationRegistry.from_state(state["brain_registry"])
            next_id = state["next_id"]
            population = _load_population(documents.read(last / "population.json"), config)

        for g in range(start, config.generations + 1):
            body_reg.new_epoch()
            brain_reg.new_epoch()
            children = _offspring(population, next_id, config, rng, body_reg, brain_reg)
            next_id += len(children)
            evaluate(children)
            population = select_survivors(population + children, config.mu, rng,
                                          config.tournament_size)
            _finish_generation(archive, g, population, children, run_dir, rng, body_reg,
                               brain_reg, next_id, progress)
    return archive


def _finish_generation(archive, index, population, evaluated, run_dir, rng, body_reg, brain_reg,
                       next_id, progress) -> None:
    record = record_generation(index, population, evaluated)
    archive.generations.append(record)
    if run_dir is not None:
        state = {"rng": _rng_state(rng), "body_registry": body_reg.state(),
                 "brain_registry": brain_reg.state(), "next_id": next_id}
        save_generation(run_dir, record, population, state)
    if progress is not None:
        progress(record)


def run_experiment(config: EvolutionConfig, repetitions: int | None = None,
                   out_dir: str | Path | None = None, resume: bool = False, workers: int = 1,
                   progress: Callable[[int, GenerationRecord], None] | None = None
                   ) -> list[RunArchive]:
    """Independent runs with seeds ``config.seed + i``, stored under ``out_dir/runs/run_<i>``."""
    repetitions = config.runs if repetitions is None else repetitions
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    archives = []
    for i in range(repetitions):
        run_config = dataclasses.replace(config, seed=config.seed + i)
        run_dir = None if out_dir is None else Path(out_dir) / "runs" / f"run_{i:02d}"
        if resume and run_dir is not None and _complete(run_dir, run_config):
            archives.append(load_archive(run_dir))
            continue
        callback = None if progress is None else functools.partial(progress, i)
        archives.append(evolve(run_config, run_dir, resume, workers, callback))
    return archives


def _complete(run_dir: Path, config: EvolutionConfig) -> bool:
    return (run_dir / f"gen_{config.generations}" / "state.json").exists()
