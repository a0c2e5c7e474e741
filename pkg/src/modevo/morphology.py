"""Module set, body trees and their projection onto the integer module grid.

Frame convention
----------------
Every placed module has an integer rotation matrix (its frame) whose columns
are the module's local x, y, z axes in core coordinates. Local +x points away
from the parent (the growth direction), +z is "up". The core sits at the origin
with the identity frame, so its slot 0 faces +x (east).

Lateral slot ``k`` of a Core or Brick faces the local direction obtained by
rotating +x by ``k * 90`` degrees about local z (0: +x, 1: +y, 2: -x, 3: -y).
Hinges and the linear actuator have two slots: 0 towards the parent (local -x)
and 1 away from it (local +x). Non-core modules reserve the parent-facing slot
(Brick slot 2, two-slot modules slot 0) for the incoming link.

A child's frame is the parent frame turned about z to the attachment face.
A Brick rotated by 90 degrees is additionally pitched about its local y axis
so that its front slot points along the former local +z; everything attached
to it therefore grows vertically.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from . import documents

MAX_MODULES = 10

Cell = tuple[int, int, int]


class ModuleKind(str, enum.Enum):
    CORE = "Core"
    BRICK = "Brick"
    HINGE_HORIZONTAL = "HingeHorizontal"
    HINGE_VERTICAL = "HingeVertical"
    LINEAR_ACTUATOR = "LinearActuator"

    @property
    def slot_count(self) -> int:
        return 4 if self in (ModuleKind.CORE, ModuleKind.BRICK) else 2

    @property
    def parent_slot(self) -> int | None:
        if self is ModuleKind.CORE:
            return None
        return 2 if self is ModuleKind.BRICK else 0

    @property
    def child_slots(self) -> tuple[int, ...]:
        return tuple(s for s in range(self.slot_count) if s != self.parent_slot)

    @property
    def is_joint(self) -> bool:
        return self in ACTIVE_JOINTS


ACTIVE_JOINTS = frozenset(
    {ModuleKind.HINGE_HORIZONTAL, ModuleKind.HINGE_VERTICAL, ModuleKind.LINEAR_ACTUATOR}
)

# direction index (multiples of 90 degrees about local z) for each slot
_TWO_SLOT_DIRECTIONS = {0: 2, 1: 0}


def slot_direction(kind: ModuleKind, slot: int) -> int:
    if kind.slot_count == 4:
        return slot
    return _TWO_SLOT_DIRECTIONS[slot]


def _rot_z(quarter_turns: int) -> np.ndarray:
    c, s = [(1, 0), (0, 1), (-1, 0), (0, -1)][quarter_turns % 4]
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.int64)


# pitch that maps local +x onto the former local +z
_PITCH = np.array([[0, 0, -1], [0, 1, 0], [1, 0, 0]], dtype=np.int64)
_UNIT_X = np.array([1, 0, 0], dtype=np.int64)
IDENTITY_FRAME = np.eye(3, dtype=np.int64)


def child_frame(parent_frame: np.ndarray, parent_kind: ModuleKind, slot: int,
                child_kind: ModuleKind, child_rotation: int) -> np.ndarray:
    frame = parent_frame @ _rot_z(slot_direction(parent_kind, slot))
    if child_kind is ModuleKind.BRICK and child_rotation == 90:
        frame = frame @ _PITCH
    return frame


def face_step(parent_frame: np.ndarray, parent_kind: ModuleKind, slot: int) -> Cell:
    """Unit grid step from a parent cell through one of its slots."""
    step = parent_frame @ _rot_z(slot_direction(parent_kind, slot)) @ _UNIT_X
    return (int(step[0]), int(step[1]), int(step[2]))


@dataclass(frozen=True)
class BodyNode:
    kind: ModuleKind
    rotation: int = 0
    children: tuple[tuple[int, BodyNode], ...] = ()

    def __post_init__(self) -> None:
        # canonical child order makes structural equality order-independent
        object.__setattr__(self, "children", tuple(sorted(self.children, key=lambda c: c[0])))

    def child(self, slot: int) -> BodyNode | None:
        for s, node in self.children:
            if s == slot:
                return node
        return None

    def count(self) -> int:
        return 1 + sum(node.count() for _, node in self.children)


@dataclass(frozen=True)
class BodyGraph:
    root: BodyNode = field(default_factory=lambda: BodyNode(ModuleKind.CORE))

    @property
    def module_count(self) -> int:
        return self.root.count()


@dataclass(frozen=True)
class BodyGrid:
    cells: dict[Cell, ModuleKind]
    origin: Cell = (0, 0, 0)


@dataclass(frozen=True)
class Placement:
    """One module of a body as laid out on the grid, in breadth-first order."""

    index: int
    path: str
    node: BodyNode
    cell: Cell
    frame: np.ndarray
    parent: int | None
    slot: int | None

    @property
    def kind(self) -> ModuleKind:
        return self.node.kind


class CollisionError(ValueError):
    def __init__(self, cell: Cell):
        super().__init__(f"cell collision at {cell}")
        self.cell = cell


def node(kind: ModuleKind | str, rotation: int = 0, **children: BodyNode) -> BodyNode:
    """Terse constructor for fixtures: ``node("Brick", s0=node("HingeVertical"))``."""
    kids = tuple((int(key.lstrip("s")), value) for key, value in children.items())
    return BodyNode(ModuleKind(kind), rotation, kids)


def iter_placements(body: BodyGraph) -> Iterator[Placement]:
    """Breadth-first walk from the core (layer order, then slot index).

    Does not check collisions; ``to_grid`` and ``validate`` do.
    """
    root = Placement(0, "root", body.root, (0, 0, 0), IDENTITY_FRAME, None, None)
    queue = deque([root])
    index = 1
    while queue:
        current = queue.popleft()
        yield current
        for slot, kid in current.node.children:
            if slot not in range(current.kind.slot_count):
                continue
            dx, dy, dz = face_step(current.frame, current.kind, slot)
            x, y, z = current.cell
            frame = child_frame(current.frame, current.kind, slot, kid.kind, kid.rotation)
            queue.append(Placement(index, f"{current.path}/{slot}", kid, (x + dx, y + dy, z + dz),
                                   frame, current.index, slot))
            index += 1


def placements(body: BodyGraph) -> list[Placement]:
    return list(iter_placements(body))


def to_grid(body: BodyGraph) -> BodyGrid:
    cells: dict[Cell, ModuleKind] = {}
    for p in iter_placements(body):
        if p.cell in cells:
            raise CollisionError(p.cell)
        cells[p.cell] = p.kind
    return BodyGrid(cells)


def validate(body: BodyGraph) -> list[str]:
    """Return every constraint violation; an empty list means the body is valid."""
    violations: list[str] = []
    if body.root.kind is not ModuleKind.CORE:
        violations.append("root: root module must be Core")

    seen: set[int] = set()
    stack: list[tuple[str, BodyNode, bool]] = [("root", body.root, True)]
    shared = False
    while stack:
        path, current, is_root = stack.pop()
        if id(current) in seen:
            violations.append(f"{path}: node reachable twice (not a tree)")
            shared = True
            continue
        seen.add(id(current))
        if current.kind is ModuleKind.CORE and not is_root:
            violations.append(f"{path}: more than one Core module")
        if current.rotation not in (0, 90):
            violations.append(f"{path}: rotation {current.rotation} not in {{0, 90}}")
        elif current.rotation == 90 and current.kind is not ModuleKind.BRICK:
            violations.append(f"{path}: only Brick may be rotated by 90 degrees")
        slots = [s for s, _ in current.children]
        if len(slots) != len(set(slots)):
            violations.append(f"{path}: slot used by more than one child")
        for slot, kid in current.children:
            if slot == current.kind.parent_slot:
                violations.append(f"{path}: slot {slot} is the parent link")
            elif slot not in range(current.kind.slot_count):
                violations.append(f"{path}: slot {slot} does not exist on {current.kind.value}")
            stack.append((f"{path}/{slot}", kid, False))

    if shared:
        return violations
    count = body.module_count
    if count > MAX_MODULES:
        violations.append(f"root: module_count > {MAX_MODULES} ({count})")

    occupied: dict[Cell, str] = {}
    for p in iter_placements(body):
        if p.cell in occupied:
            violations.append(f"{p.path}: cell collision at {p.cell} with {occupied[p.cell]}")
        else:
            occupied[p.cell] = p.path
    return violations


def is_valid(body: BodyGraph) -> bool:
    return not validate(body)


def count_kind(body: BodyGraph, kind: ModuleKind) -> int:
    return sum(1 for p in iter_placements(body) if p.kind is kind)


# -- serialization -------------------------------------------------------

def _node_to_dict(n: BodyNode) -> dict[str, Any]:
    return {
        "kind": n.kind.value,
        "rotation": n.rotation,
        "children": {str(slot): _node_to_dict(kid) for slot, kid in n.children},
    }


def _node_from_dict(doc: Any, path: str) -> BodyNode:
    if not isinstance(doc, dict):
        raise documents.SchemaError(f"{path}: module must be an object", path)
    documents.require(doc, {"kind", "rotation", "children"}, path)
    try:
        kind = ModuleKind(doc["kind"])
    except ValueError:
        raise documents.SchemaError(f"{path}: unknown module kind {doc['kind']!r}", "kind") from None
    rotation = doc["rotation"]
    if not isinstance(rotation, int) or isinstance(rotation, bool):
        raise documents.SchemaError(f"{path}: rotation must be an integer", "rotation")
    if not isinstance(doc["children"], dict):
        raise documents.SchemaError(f"{path}: children must be an object", "children")
    kids = []
    for key, value in doc["children"].items():
        if not key.isdigit():
            raise documents.SchemaError(f"{path}: slot key {key!r} is not an integer", "children")
        kids.append((int(key), _node_from_dict(value, f"{path}/{key}")))
    return BodyNode(kind, rotation, tuple(kids))


def serialize(body: BodyGraph) -> str:
    return documents.dumps({"root": _node_to_dict(body.root)}, "body")


def deserialize(text: str) -> BodyGraph:
    doc = documents.loads(text, "body")
    documents.require(doc, {"format_version", "type", "root"})
    return BodyGraph(_node_from_dict(doc["root"], "root"))


def load_body(path) -> BodyGraph:
    return deserialize(documents.read(path))


def save_body(body: BodyGraph, path) -> None:
    documents.write(path, serialize(body))
