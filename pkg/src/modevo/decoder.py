"""Genotype to phenotype mapping for bodies and CPG weights."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .genome import Cppn
from .morphology import (
    IDENTITY_FRAME,
    MAX_MODULES,
    BodyGraph,
    BodyNode,
    Cell,
    ModuleKind,
    child_frame,
    face_step,
    placements,
)

BODY_INPUTS = 3
BODY_OUTPUTS = 6
BRAIN_INPUTS = 6
BRAIN_OUTPUTS = 1

# body CPPN output layout; the Core score is an explicit "leave empty" vote
KIND_ORDER = (
    ModuleKind.CORE,
    ModuleKind.BRICK,
    ModuleKind.HINGE_HORIZONTAL,
    ModuleKind.HINGE_VERTICAL,
    ModuleKind.LINEAR_ACTUATOR,
)
ROTATION_OUTPUT = 5

NEIGHBOURHOOD = 2
WEIGHT_CLAMP = 1.0


@dataclass(frozen=True)
class DecodeLimits:
    max_modules: int = MAX_MODULES
    grid_radius: int = 5
    linear_actuator: bool = True

    def __post_init__(self) -> None:
        if self.max_modules < 1:
            raise ValueError("max_modules must be at least 1")
        if self.grid_radius < 1:
            raise ValueError("grid_radius must be at least 1")


def choose_module(scores, linear_actuator: bool = True) -> tuple[ModuleKind | None, int]:
    """Pick the module kind for one grid query, or None for an empty cell."""
    kind_scores = list(scores[:5])
    if not linear_actuator:
        kind_scores[4] = -np.inf
    best = int(np.argmax(kind_scores))
    if kind_scores[best] <= 0.0 or KIND_ORDER[best] is ModuleKind.CORE:
        return None, 0
    kind = KIND_ORDER[best]
    rotation = 90 if kind is ModuleKind.BRICK and scores[ROTATION_OUTPUT] > 0.0 else 0
    return kind, rotation


def decode_body(genome: Cppn, limits: DecodeLimits = DecodeLimits()) -> BodyGraph:
    """Grow a body breadth-first from the core, querying the CPPN per free slot.

    Each open slot of an already placed module is visited in placement order
    (BFS layer, then slot index). The CPPN sees the target cell's coordinates
    divided by ``grid_radius``. Cells outside the radius, occupied cells and
    cells the CPPN left empty are skipped; growth stops at ``max_modules``.
    """
    if genome.input_count != BODY_INPUTS or genome.output_count != BODY_OUTPUTS:
        raise ValueError("body genome must have 3 inputs and 6 outputs")
    radius = limits.grid_radius
    # mutable build records: [kind, rotation, frame, cell, {slot: child_index}]
    records = [[ModuleKind.CORE, 0, IDENTITY_FRAME, (0, 0, 0), {}]]
    occupied: set[Cell] = {(0, 0, 0)}
    decided: dict[Cell, tuple[ModuleKind | None, int]] = {}
    queue = deque([0])
    while queue and len(records) < limits.max_modules:
        index = queue.popleft()
        kind, _, frame, cell, kids = records[index]
        for slot in kind.child_slots:
            if len(records) >= limits.max_modules:
                break
            step = face_step(frame, kind, slot)
            target = (cell[0] + step[0], cell[1] + step[1], cell[2] + step[2])
            if target in occupied or max(abs(v) for v in target) > radius:
                continue
            if target not in decided:
                scores = genome.evaluate([v / radius for v in target])
                decided[target] = choose_module(scores, limits.linear_actuator)
            new_kind, rotation = decided[target]
            if new_kind is None:
                continue
            new_frame = child_frame(frame, kind, slot, new_kind, rotation)
            records.append([new_kind, rotation, new_frame, target, {}])
            occupied.add(target)
            kids[slot] = len(records) - 1
            queue.append(len(records) - 1)

    def build(i: int) -> BodyNode:
        kind, rotation, _, _, kids = records[i]
        return BodyNode(kind, rotation, tuple((s, build(k)) for s, k in kids.items()))

    return BodyGraph(build(0))


@dataclass(frozen=True)
class JointInfo:
    """An active joint in placement order, with its grid cell."""

    module_index: int
    kind: ModuleKind
    cell: Cell


def active_joints(body: BodyGraph) -> list[JointInfo]:
    return [JointInfo(p.index, p.kind, p.cell) for p in placements(body) if p.kind.is_joint]


def cpg_edges(joints: list[JointInfo], neighbourhood: int = NEIGHBOURHOOD) -> list[tuple[int, int]]:
    """Ordered oscillator pairs within Manhattan distance, self pairs included."""
    edges = []
    for i, a in enumerate(joints):
        for j, b in enumerate(joints):
            if sum(abs(p - q) for p, q in zip(a.cell, b.cell)) <= neighbourhood:
                edges.append((i, j))
    return edges


def decode_brain(genome: Cppn, body: BodyGraph, grid_radius: int = 5,
                 clamp: float = WEIGHT_CLAMP) -> list[tuple[tuple[int, int], float]]:
    if genome.input_count != BRAIN_INPUTS or genome.output_count != BRAIN_OUTPUTS:
        raise ValueError("brain genome must have 6 inputs and 1 output")
    joints = active_joints(body)
    weights = []
    for i, j in cpg_edges(joints):
        a = [v / grid_radius for v in joints[i].cell]
        b = [v / grid_radius for v in joints[j].cell]
        (w,) = genome.evaluate(a + b)
        weights.append(((i, j), float(min(max(w, -clamp), clamp))))
    return weights
