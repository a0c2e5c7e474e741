"""CPPN genotype with NEAT historical markings.

Node ids: inputs ``[0, n_in)``, outputs ``[n_in, n_in + n_out)``, hidden nodes
above that. Hidden node ids and connection innovation numbers both come from
an :class:`InnovationRegistry`, so identical structural mutations made in the
same generation line up during crossover.

Operators never modify a genome in place; they return a new one.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Sequence

import numpy as np

from . import documents

ACTIVATIONS = ("identity", "sigmoid", "sine", "gaussian", "tanh")


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


_FUNCS = {
    "identity": lambda x: x,
    "sigmoid": _sigmoid,
    "sine": math.sin,
    "gaussian": lambda x: math.exp(-x * x),
    "tanh": math.tanh,
}


def activate(name: str, x: float) -> float:
    try:
        fn = _FUNCS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}") from None
    return fn(x)


@dataclass(frozen=True)
class NodeGene:
    node_id: int
    activation: str = "identity"
    bias: float = 0.0


@dataclass(frozen=True)
class ConnectionGene:
    innovation: int
    src: int
    dst: int
    weight: float
    enabled: bool = True


@dataclass(frozen=True)
class MutationParams:
    p_weight_perturb: float = 0.8
    p_weight_reset: float = 0.1
    p_add_connection: float = 0.05
    p_add_node: float = 0.03
    weight_perturb_sigma: float = 0.5
    weight_range: float = 3.0

    def __post_init__(self) -> None:
        for name in ("p_weight_perturb", "p_weight_reset", "p_add_connection", "p_add_node"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.weight_range <= 0:
            raise ValueError("weight_range must be positive")
        if self.weight_perturb_sigma < 0:
            raise ValueError("weight_perturb_sigma must be non-negative")


@dataclass
class MutationReport:
    weights_changed: int = 0
    nodes_added: int = 0
    connections_added: int = 0
    skipped_cycle: int = 0
    skipped_duplicate: int = 0


class InnovationRegistry:
    """Hands out innovation numbers and hidden node ids.

    An edge (src, dst) keeps one innovation number for the whole run, so no
    two genes of a run describe the same edge. Splits are shared only within
    one epoch (one generation): the same gene split in a later generation gets
    a fresh hidden node. Numbers are never reused.
    """

    def __init__(self, next_innovation: int = 0, next_node: int = 0):
        self.next_innovation = next_innovation
        self.next_node = next_node
        self.epoch = 0
        self._innovations: dict[tuple[int, int], int] = {}
        self._edges: dict[int, tuple[int, int]] = {}
        self._splits: dict[int, tuple[int, int, int]] = {}

    def new_epoch(self) -> None:
        self.epoch += 1
        self._splits.clear()

    def reserve_nodes(self, upto: int) -> None:
        self.next_node = max(self.next_node, upto)

    def connection(self, src: int, dst: int) -> int:
        key = (src, dst)
        if key not in self._innovations:
            self._remember(src, dst, self.next_innovation)
            self.next_innovation += 1
        return self._innovations[key]

    # generation-0 input->output links go through the same table
    initial_connection = connection

    def edge(self, innovation: int) -> tuple[int, int]:
        return self._edges[innovation]

    def split(self, innovation: int) -> tuple[int, int, int]:
        """(new node id, innovation into it, innovation out of it) for an add-node."""
        if innovation not in self._splits:
            src, dst = self._edges[innovation]
            node_id = self.next_node
            self.next_node += 1
            into, out = self.next_innovation, self.next_innovation + 1
            self.next_innovation += 2
            self._remember(src, node_id, into)
            self._remember(node_id, dst, out)
            self._splits[innovation] = (node_id, into, out)
        return self._splits[innovation]

    def _remember(self, src: int, dst: int, innovation: int) -> None:
        self._innovations[(src, dst)] = innovation
        self._edges[innovation] = (src, dst)

    def state(self) -> dict[str, Any]:
        return {
            "next_innovation": self.next_innovation,
            "next_node": self.next_node,
            "epoch": self.epoch,
            "edges": sorted([i, a, b] for i, (a, b) in self._edges.items()),
            "splits": sorted([k, *v] for k, v in self._splits.items()),
        }

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> InnovationRegistry:
        reg = cls(state["next_innovation"], state["next_node"])
        reg.epoch = state["epoch"]
        for i, a, b in state["edges"]:
            reg._remember(a, b, i)
        reg._splits = {k: (n, i, o) for k, n, i, o in state["splits"]}
        return reg


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Cppn:
    input_count: int
    output_count: int
    nodes: tuple[NodeGene, ...]
    connections: tuple[ConnectionGene, ...] = field(default=())

    @property
    def output_ids(self) -> range:
        return range(self.input_count, self.input_count + self.output_count)

    @cached_property
    def _plan(self) -> tuple[list[tuple[int, str, float, list[tuple[int, float]]]], dict[int, int]]:
        order = topological_order(self)
        if order is None:
            raise ValueError("enabled connections contain a cycle")
        incoming: dict[int, list[tuple[int, float]]] = {}
        for c in self.connections:
            if c.enabled:
                incoming.setdefault(c.dst, []).append((c.src, c.weight))
        genes = {n.node_id: n for n in self.nodes}
        plan = []
        for nid in order:
            if nid < self.input_count:
                continue
            gene = genes[nid]
            plan.append((nid, gene.activation, gene.bias, incoming.get(nid, [])))
        return plan, {nid: k for k, nid in enumerate(order)}

    def evaluate(self, inputs: Sequence[float]) -> list[float]:
        if len(inputs) != self.input_count:
            raise DimensionError(f"expected {self.input_count} inputs, got {len(inputs)}")
        values: dict[int, float] = {i: float(v) for i, v in enumerate(inputs)}
        for nid, act, bias, incoming in self._plan[0]:
            total = bias
            for src, weight in incoming:
                total += weight * values[src]
            values[nid] = activate(act, total)
        return [values[o] for o in self.output_ids]

    # gene lookups used by the operators
    def node_ids(self) -> set[int]:
        return {n.node_id for n in self.nodes}

    def innovations(self) -> list[int]:
        return [c.innovation for c in self.connections]


def evaluate(cppn: Cppn, inputs: Sequence[float]) -> list[float]:
    return cppn.evaluate(inputs)


def topological_order(cppn: Cppn) -> list[int] | None:
    """Kahn's algorithm over enabled edges, smallest id first; None on a cycle."""
    ids = sorted(cppn.node_ids())
    indegree = {i: 0 for i in ids}
    out: dict[int, list[int]] = {i: [] for i in ids}
    for c in cppn.connections:
        if c.enabled:
            indegree[c.dst] += 1
            out[c.src].append(c.dst)
    ready = [i for i in ids if indegree[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for dst in out[nid]:
            indegree[dst] -= 1
            if indegree[dst] == 0:
                heapq.heappush(ready, dst)
    return order if len(order) == len(ids) else None


def is_acyclic(cppn: Cppn) -> bool:
    return topological_order(cppn) is not None


def _reaches(edges: dict[int, list[int]], start: int, goal: int) -> bool:
    stack, seen = [start], {start}
    while stack:
        cur = stack.pop()
        if cur == goal:
            return True
        for nxt in edges.get(cur, ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def _enabled_edges(connections) -> dict[int, list[int]]:
    edges: dict[int, list[int]] = {}
    for c in connections:
        if c.enabled:
            edges.setdefault(c.src, []).append(c.dst)
    return edges


def minimal_cppn(input_count: int, output_count: int, registry: InnovationRegistry,
                 rng: np.random.Generator, weight_range: float = 3.0,
                 output_activations: Sequence[str] | None = None) -> Cppn:
    """Fully connected input->output genome with uniform random weights and biases."""
    registry.reserve_nodes(input_count + output_count)
    nodes = [NodeGene(i, "identity", 0.0) for i in range(input_count)]
    for k, o in enumerate(range(input_count, input_count + output_count)):
        if output_activations is None:
            act = ACTIVATIONS[int(rng.integers(len(ACTIVATIONS)))]
        else:
            act = output_activations[k]
        nodes.append(NodeGene(o, act, float(rng.uniform(-1.0, 1.0))))
    conns = []
    for o in range(input_count, input_count + output_count):
        for i in range(input_count):
            conns.append(ConnectionGene(registry.initial_connection(i, o), i, o,
                                        float(rng.uniform(-weight_range, weight_range))))
    conns.sort(key=lambda c: c.innovation)
    return Cppn(input_count, output_count, tuple(nodes), tuple(conns))


def _mutate_weight(w: float, params: MutationParams, rng: np.random.Generator) -> tuple[float, bool]:
    r = rng.random()
    if r < params.p_weight_perturb:
        w = w + rng.normal(0.0, params.weight_perturb_sigma)
    elif r < params.p_weight_perturb + params.p_weight_reset:
        w = rng.uniform(-params.weight_range, params.weight_range)
    else:
        return w, False
    return float(min(max(w, -params.weight_range), params.weight_range)), True


def mutate(cppn: Cppn, params: MutationParams, registry: InnovationRegistry,
           rng: np.random.Generator, report: MutationReport | None = None) -> Cppn:
    """Weight/bias mutation on every gene, then at most one structural mutation."""
    report = report if report is not None else MutationReport()
    conns = []
    for c in cppn.connections:
        w, changed = _mutate_weight(c.weight, params, rng)
        report.weights_changed += changed
        conns.append(replace(c, weight=w) if changed else c)
    nodes = []
    for n in cppn.nodes:
        if n.node_id < cppn.input_count:
            nodes.append(n)
            continue
        b, changed = _mutate_weight(n.bias, params, rng)
        report.weights_changed += changed
        nodes.append(replace(n, bias=b) if changed else n)

    r = rng.random()
    if r < params.p_add_node:
        _add_node(cppn, nodes, conns, params, registry, rng, report)
    elif r < params.p_add_node + params.p_add_connection:
        _add_connection(cppn, nodes, conns, params, registry, rng, report)
    conns.sort(key=lambda c: c.innovation)
    nodes.sort(key=lambda n: n.node_id)
    return Cppn(cppn.input_count, cppn.output_count, tuple(nodes), tuple(conns))


def _add_node(cppn, nodes, conns, params, registry, rng, report) -> None:
    candidates = [k for k, c in enumerate(conns) if c.enabled]
    if not candidates:
        return
    k = candidates[int(rng.integers(len(candidates)))]
    old = conns[k]
    node_id, innov_in, innov_out = registry.split(old.innovation)
    act = ACTIVATIONS[int(rng.integers(len(ACTIVATIONS)))]
    if node_id in {n.node_id for n in nodes}:
        # this genome already split the same gene during this epoch
        report.skipped_duplicate += 1
        return
    conns[k] = replace(old, enabled=False)
    conns.append(ConnectionGene(innov_in, old.src, node_id, 1.0))
    conns.append(ConnectionGene(innov_out, node_id, old.dst, old.weight))
    nodes.append(NodeGene(node_id, act, 0.0))
    report.nodes_added += 1


def _add_connection(cppn, nodes, conns, params, registry, rng, report) -> None:
    ids = sorted(n.node_id for n in nodes)
    outputs = set(cppn.output_ids)
    sources = [i for i in ids if i not in outputs]
    targets = [i for i in ids if i >= cppn.input_count]
    src = sources[int(rng.integers(len(sources)))]
    dst = targets[int(rng.integers(len(targets)))]
    weight = float(rng.uniform(-params.weight_range, params.weight_range))
    if src == dst or any(c.src == src and c.dst == dst for c in conns):
        report.skipped_duplicate += 1
        return
    if _reaches(_enabled_edges(conns), dst, src):
        report.skipped_cycle += 1
        return
    conns.append(ConnectionGene(registry.connection(src, dst), src, dst, weight))
    report.connections_added += 1


def crossover(parent_a: Cppn, parent_b: Cppn, fitness_a: float, fitness_b: float,
              rng: np.random.Generator) -> Cppn:
    """NEAT crossover aligned on innovation numbers.

    Matching genes come from either parent at random; disjoint and excess genes
    come from the fitter parent (each kept with probability 1/2 on a tie).
    An inherited enabled edge that would close a cycle is inherited disabled.
    """
    if (parent_a.input_count, parent_a.output_count) != (parent_b.input_count, parent_b.output_count):
        raise DimensionError("parents have different input/output counts")
    genes_a = {c.innovation: c for c in parent_a.connections}
    genes_b = {c.innovation: c for c in parent_b.connections}
    tie = fitness_a == fitness_b
    a_fitter = fitness_a > fitness_b

    chosen: list[ConnectionGene] = []
    for innov in sorted(genes_a.keys() | genes_b.keys()):
        ga, gb = genes_a.get(innov), genes_b.get(innov)
        if ga is not None and gb is not None:
            chosen.append(ga if rng.random() < 0.5 else gb)
        elif tie:
            if rng.random() < 0.5:
                chosen.append(ga if ga is not None else gb)
        elif ga is not None and a_fitter:
            chosen.append(ga)
        elif gb is not None and not a_fitter:
            chosen.append(gb)

    nodes_a = {n.node_id: n for n in parent_a.nodes}
    nodes_b = {n.node_id: n for n in parent_b.nodes}
    needed = set(range(parent_a.input_count + parent_a.output_count))
    for c in chosen:
        needed.update((c.src, c.dst))
    nodes = []
    for nid in sorted(needed):
        na, nb = nodes_a.get(nid), nodes_b.get(nid)
        if na is not None and nb is not None:
            nodes.append(na if rng.random() < 0.5 else nb)
        else:
            nodes.append(na if na is not None else nb)

    edges: dict[int, list[int]] = {}
    conns = []
    for c in chosen:
        if c.enabled:
            if _reaches(edges, c.dst, c.src):
                c = replace(c, enabled=False)
            else:
                edges.setdefault(c.src, []).append(c.dst)
        conns.append(c)
    return Cppn(parent_a.input_count, parent_a.output_count, tuple(nodes), tuple(conns))


# -- documents -----------------------------------------------------------

def to_dict(cppn: Cppn) -> dict[str, Any]:
    return {
        "inputs": cppn.input_count,
        "outputs": cppn.output_count,
        "nodes": [[n.node_id, n.activation, n.bias] for n in cppn.nodes],
        "connections": [[c.innovation, c.src, c.dst, c.weight, c.enabled] for c in cppn.connections],
    }


def from_dict(doc: dict[str, Any]) -> Cppn:
    documents.require(doc, {"inputs", "outputs", "nodes", "connections"}, "cppn")
    nodes = []
    for entry in doc["nodes"]:
        nid, act, bias = entry
        if act not in ACTIVATIONS:
            raise documents.SchemaError(f"cppn: unknown activation {act!r}", "activation")
        nodes.append(NodeGene(int(nid), act, float(bias)))
    conns = [ConnectionGene(int(i), int(s), int(d), float(w), bool(e))
             for i, s, d, w, e in doc["connections"]]
    cppn = Cppn(int(doc["inputs"]), int(doc["outputs"]), tuple(nodes), tuple(conns))
    ids = cppn.node_ids()
    for c in conns:
        if c.src not in ids or c.dst not in ids:
            raise documents.SchemaError(f"cppn: connection {c.innovation} references a missing node",
                                        "connections")
    if not is_acyclic(cppn):
        raise documents.SchemaError("cppn: enabled connections contain a cycle", "connections")
    return cppn


def serialize(cppn: Cppn) -> str:
    return documents.dumps({"cppn": to_dict(cppn)}, "genome")


def deserialize(text: str) -> Cppn:
    doc = documents.loads(text, "genome")
    documents.require(doc, {"format_version", "type", "cppn"})
    return from_dict(doc["cppn"])
