"""The eight morphological descriptors, computed on the module grid.

With ``m`` modules and "attached faces" meaning tree links (parent plus
children) of a module:

branching        m4 / floor((m - 2) / 3), m4 = modules with 4 attached faces;
                 0 when m < 5
coverage         m / volume of the grid bounding box (cells)
rel_joints       joints with both faces attached / floor((m - 1) / 2), capped
                 at 1 (chains of directly linked joints can exceed the bound)
rel_limbs        non-core leaves / l_max, where l_max = m - 1 for m < 6 and
                 2 * floor((m - 6) / 3) + (m - 6) % 3 + 4 otherwise
rel_limb_length  mean limb length / (m - 1); a limb runs from a leaf up to,
                 not including, the core or the first module with 3+ links
proportion       short / long side of the (x, y) bounding box
absolute_size    m
symmetry         best of the two mirror axes through the core in the (x, y)
                 projection: mirrored off-axis cells that are occupied /
                 off-axis cells (1 when no cell lies off the axis)
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .morphology import MAX_MODULES, BodyGraph, ModuleKind, placements

NAMES = (
    "branching",
    "coverage",
    "rel_joints",
    "rel_limbs",
    "rel_limb_length",
    "proportion",
    "absolute_size",
    "symmetry",
)


@dataclass(frozen=True)
class DescriptorVector:
    branching: float
    coverage: float
    rel_joints: float
    rel_limbs: float
    rel_limb_length: float
    proportion: float
    absolute_size: int
    symmetry: float

    @property
    def size_normalized(self) -> float:
        return self.absolute_size / MAX_MODULES

    def values(self) -> tuple[float, ...]:
        return tuple(float(getattr(self, name)) for name in NAMES)

    def as_dict(self) -> dict[str, float]:
        out = asdict(self)
        out["size_normalized"] = self.size_normalized
        return out


def max_branching(m: int) -> int:
    return (m - 2) // 3 if m >= 5 else 0


def max_joints(m: int) -> int:
    return (m - 1) // 2


def max_limbs(m: int) -> int:
    if m < 6:
        return m - 1
    return 2 * ((m - 6) // 3) + (m - 6) % 3 + 4


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def descriptor_vector(body: BodyGraph) -> DescriptorVector:
    places = placements(body)
    m = len(places)
    links = [0] * m
    for p in places:
        if p.parent is not None:
            links[p.index] += 1
            links[p.parent] += 1

    m4 = sum(1 for k in links if k == 4)
    branching = _ratio(m4, max_branching(m))

    cells = [p.cell for p in places]
    spans = [max(c[a] for c in cells) - min(c[a] for c in cells) + 1 for a in range(3)]
    coverage = m / (spans[0] * spans[1] * spans[2])

    joints = sum(1 for p in places if p.kind.is_joint and links[p.index] == 2)
    rel_joints = min(1.0, _ratio(joints, max_joints(m)))

    leaves = [p for p in places if p.kind is not ModuleKind.CORE and links[p.index] == 1]
    rel_limbs = _ratio(len(leaves), max_limbs(m))

    lengths = []
    for leaf in leaves:
        length, current = 0, leaf
        while current.parent is not None and links[current.index] < 3:
            length += 1
            current = places[current.parent]
        lengths.append(length)
    mean_length = sum(lengths) / len(lengths) if lengths else 0.0
    rel_limb_length = _ratio(mean_length, m - 1)

    proportion = min(spans[0], spans[1]) / max(spans[0], spans[1])

    return DescriptorVector(branching, coverage, rel_joints, rel_limbs, rel_limb_length,
                            proportion, m, symmetry(cells))


def symmetry(cells) -> float:
    flat = {(x, y) for x, y, _ in cells}
    best = 0.0
    for axis in (0, 1):
        off = [c for c in flat if c[1 - axis] != 0]
        if not off:
            return 1.0
        mirrored = sum(1 for c in off if _mirror(c, axis) in flat)
        best = max(best, mirrored / len(off))
    return best


def _mirror(cell: tuple[int, int], axis: int) -> tuple[int, int]:
    x, y = cell
    # axis 0 is the x axis (flip y), axis 1 the y axis (flip x)
    return (x, -y) if axis == 0 else (-x, y)


def descriptor_matrix(population) -> dict[int, DescriptorVector]:
    """Descriptor rows keyed by individual id, in ascending id order.

    ``population`` is an iterable of ``(id, body)`` pairs or of objects with
    ``id`` and ``body`` attributes.
    """
    rows = {}
    for item in population:
        ident, body = (item.id, item.body) if hasattr(item, "body") else item
        rows[ident] = descriptor_vector(body)
    return dict(sorted(rows.items()))
