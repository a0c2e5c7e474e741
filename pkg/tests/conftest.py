from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from modevo import genome
from modevo.decoder import BODY_INPUTS, BODY_OUTPUTS, DecodeLimits, decode_body
from modevo.genome import InnovationRegistry, MutationParams
from modevo.morphology import BodyGraph, BodyNode, ModuleKind, node

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

KINDS = [k for k in ModuleKind if k is not ModuleKind.CORE]


@st.composite
def body_nodes(draw, depth: int = 3, kind: ModuleKind | None = None) -> BodyNode:
    kind = kind if kind is not None else draw(st.sampled_from(KINDS))
    rotation = draw(st.sampled_from([0, 90])) if kind is ModuleKind.BRICK else 0
    kids = []
    if depth > 0:
        for slot in kind.child_slots:
            if draw(st.booleans()):
                kids.append((slot, draw(body_nodes(depth - 1))))
    return BodyNode(kind, rotation, tuple(kids))


def body_graphs(depth: int = 3):
    """Well-formed trees; they may still collide or exceed ten modules."""
    return body_nodes(depth, ModuleKind.CORE).map(BodyGraph)


def random_body_genome(seed: int, mutations: int = 20, registry: InnovationRegistry | None = None):
    rng = np.random.default_rng(seed)
    registry = registry if registry is not None else InnovationRegistry()
    params = MutationParams(p_add_connection=0.3, p_add_node=0.2)
    g = genome.minimal_cppn(BODY_INPUTS, BODY_OUTPUTS, registry, rng)
    for _ in range(int(rng.integers(mutations + 1))):
        g = genome.mutate(g, params, registry, rng)
    return g


def random_decoded_body(seed: int, limits: DecodeLimits = DecodeLimits()) -> BodyGraph:
    return decode_body(random_body_genome(seed), limits)


@pytest.fixture
def core_only() -> BodyGraph:
    return BodyGraph()


@pytest.fixture
def chain5() -> BodyGraph:
    return BodyGraph(node("Core", s0=node("Brick", s0=node("Brick", s0=node("Brick", s0=node("Brick"))))))


@pytest.fixture
def plus5() -> BodyGraph:
    return BodyGraph(node("Core", s0=node("Brick"), s1=node("Brick"), s2=node("Brick"), s3=node("Brick")))


@pytest.fixture
def all_kinds10() -> BodyGraph:
    """Ten modules, every kind, vertical growth through a rotated brick."""
    return BodyGraph(node(
        "Core",
        s0=node("HingeHorizontal", s1=node("Brick", 90, s0=node("LinearActuator"))),
        s1=node("HingeVertical", s1=node("Brick", s3=node("LinearActuator"))),
        s2=node("Brick", s0=node("HingeVertical")),
        s3=node("LinearActuator"),
    ))


def synthetic_arm(runs: int, seed: int, shift: dict[str, float] | None = None,
                  generations: int = 3, population: int = 10):
    """Archives with N(0.5, 0.05) metrics; ``shift`` adds a constant per metric."""
    from modevo.descriptors import NAMES
    from modevo.evolution import EvolutionConfig, GenerationRecord, MetricsRow, RunArchive

    shift = shift or {}
    rng = np.random.default_rng(seed)
    archives = []
    for r in range(runs):
        gens = []
        for g in range(generations):
            rows = []
            for i in range(population):
                values = {name: 0.5 + 0.05 * rng.standard_normal() + shift.get(name, 0.0)
                          for name in ("fitness", *NAMES)}
                rows.append(MetricsRow(i, values["fitness"], tuple(values[n] for n in NAMES), 0))
            gens.append(GenerationRecord(g, tuple(rows), (), "", ""))
        archives.append(RunArchive(EvolutionConfig(), r, gens))
    return archives


# -- acceptance report: one PASS/FAIL line per criterion ----------------------

_ACCEPTANCE: dict[int, tuple[str, list[bool], float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    n, title = marker.args
    _, results, seconds = _ACCEPTANCE.get(n, (title, [], 0.0))
    _ACCEPTANCE[n] = (title, results + [report.passed], seconds + report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, results, seconds = _ACCEPTANCE[n]
        verdict = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {verdict}  {title}  ({seconds:.1f} s)")
