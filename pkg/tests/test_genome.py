import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modevo import documents, genome
from modevo.genome import (
    ConnectionGene,
    Cppn,
    DimensionError,
    InnovationRegistry,
    MutationParams,
    MutationReport,
    NodeGene,
    crossover,
    is_acyclic,
    minimal_cppn,
    mutate,
)

STRUCTURAL = MutationParams(p_add_connection=0.4, p_add_node=0.3)


def single(weight, n_in=1, act="identity"):
    nodes = tuple(NodeGene(i, "identity", 0.0) for i in range(n_in)) + (NodeGene(n_in, act, 0.0),)
    conns = tuple(ConnectionGene(i, i, n_in, weight) for i in range(n_in))
    return Cppn(n_in, 1, nodes, conns)


def test_identity_passthrough():
    assert single(1.0).evaluate([0.7]) == [0.7]


def test_linear_weight():
    assert single(-2.0).evaluate([0.5]) == [-1.0]


@given(st.floats(-1e3, 1e3))
def test_symmetric_tanh_cancels(x):
    assert single(1.0, n_in=2, act="tanh").evaluate([x, -x]) == [0.0]


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        single(1.0).evaluate([1.0, 2.0])


def test_activation_palette():
    assert genome.activate("sigmoid", 0.0) == 0.5
    assert genome.activate("gaussian", 0.0) == 1.0
    assert genome.activate("sine", math.pi / 2) == 1.0
    with pytest.raises(ValueError):
        genome.activate("relu", 0.0)


def test_zero_params_is_noop():
    reg = InnovationRegistry()
    g = minimal_cppn(3, 6, reg, np.random.default_rng(0))
    zero = MutationParams(0.0, 0.0, 0.0, 0.0)
    assert mutate(g, zero, reg, np.random.default_rng(1)) == g


def test_add_node_on_only_connection():
    reg = InnovationRegistry()
    g = minimal_cppn(1, 1, reg, np.random.default_rng(0))
    report = MutationReport()
    child = mutate(g, MutationParams(0.0, 0.0, 0.0, 1.0), reg, np.random.default_rng(0), report)
    assert report.nodes_added == 1
    assert len(child.nodes) == len(g.nodes) + 1
    assert len(child.connections) == len(g.connections) + 2
    (original,) = [c for c in child.connections if c.innovation == g.connections[0].innovation]
    assert not original.enabled
    # the split keeps the function: in-weight 1, out-weight = original weight
    assert is_acyclic(child)


def test_same_generation_add_connection_shares_innovation():
    reg = InnovationRegistry()
    rng = np.random.default_rng(3)
    base = minimal_cppn(2, 1, reg, rng)
    split = mutate(base, MutationParams(0.0, 0.0, 0.0, 1.0), reg, rng)
    hidden = max(split.node_ids())
    # scripted: two genomes independently add input0 -> hidden in one generation
    a = reg.connection(0, hidden)
    b = reg.connection(0, hidden)
    assert a == b
    reg.new_epoch()
    assert reg.connection(0, hidden) == a  # an edge keeps its number for the run


def test_same_generation_split_shares_node():
    reg = InnovationRegistry()
    g1 = minimal_cppn(1, 1, reg, np.random.default_rng(0))
    g2 = minimal_cppn(1, 1, reg, np.random.default_rng(1))
    always_split = MutationParams(0.0, 0.0, 0.0, 1.0)
    c1 = mutate(g1, always_split, reg, np.random.default_rng(5))
    c2 = mutate(g2, always_split, reg, np.random.default_rng(6))
    assert c1.node_ids() == c2.node_ids()
    assert c1.innovations() == c2.innovations()
    reg.new_epoch()
    c3 = mutate(g1, always_split, reg, np.random.default_rng(7))
    assert c3.node_ids() != c1.node_ids()


def test_crossover_identical_parents_is_identity():
    g = evolved(11)
    assert crossover(g, g, 1.0, 1.0, np.random.default_rng(0)) == g
    assert crossover(g, g, 2.0, 1.0, np.random.default_rng(0)) == g


def test_crossover_excess_from_fitter():
    nodes = (NodeGene(0, "identity", 0.0), NodeGene(1, "identity", 0.0), NodeGene(2, "tanh", 0.0))
    shared = (ConnectionGene(1, 0, 2, 0.5), ConnectionGene(2, 1, 2, 0.5))
    a = Cppn(2, 1, nodes + (NodeGene(3, "sine", 0.0),),
             shared + (ConnectionGene(3, 0, 3, 1.0),))
    b = Cppn(2, 1, nodes, shared)
    for seed in range(20):
        child = crossover(a, b, 2.0, 1.0, np.random.default_rng(seed))
        assert 3 in child.innovations()
        assert 3 not in crossover(a, b, 1.0, 2.0, np.random.default_rng(seed)).innovations()


def test_crossover_replay():
    a, b = evolved(1), evolved(2)

    def children(seed):
        rng = np.random.default_rng(seed)
        return [crossover(a, b, 1.0, 0.5, rng) for _ in range(1000)]

    assert children(42) == children(42)


def test_document_roundtrip():
    g = evolved(5)
    assert genome.deserialize(genome.serialize(g)) == g


def test_document_rejects_cycle():
    nodes = (NodeGene(0, "identity", 0.0), NodeGene(1, "tanh", 0.0), NodeGene(2, "tanh", 0.0))
    conns = (ConnectionGene(0, 0, 1, 1.0), ConnectionGene(1, 1, 2, 1.0), ConnectionGene(2, 2, 1, 1.0))
    text = genome.serialize(Cppn(1, 1, nodes, conns))
    with pytest.raises(documents.SchemaError, match="cycle"):
        genome.deserialize(text)


def test_document_rejects_unknown_activation():
    text = genome.serialize(single(1.0)).replace('"identity"', '"relu"', 1)
    with pytest.raises(documents.SchemaError, match="relu"):
        genome.deserialize(text)


def test_registry_state_roundtrip():
    reg = InnovationRegistry()
    evolved(3, reg)
    clone = InnovationRegistry.from_state(reg.state())
    assert clone.state() == reg.state()


def test_mutation_params_validated():
    with pytest.raises(ValueError):
        MutationParams(p_add_node=1.5)


def evolved(seed, reg=None, steps=30):
    reg = reg if reg is not None else InnovationRegistry()
    rng = np.random.default_rng(seed)
    g = minimal_cppn(3, 2, reg, rng)
    for _ in range(steps):
        g = mutate(g, STRUCTURAL, reg, rng)
    return g


def check_invariants(g: Cppn, edges: dict[int, tuple[int, int]]) -> None:
    assert is_acyclic(g)
    innovations = g.innovations()
    assert len(innovations) == len(set(innovations))
    assert len({(c.src, c.dst) for c in g.connections}) == len(g.connections)
    for c in g.connections:
        assert edges.setdefault(c.innovation, (c.src, c.dst)) == (c.src, c.dst)
        assert c.src in g.node_ids() and c.dst in g.node_ids()


@given(st.integers(0, 2**32 - 1))
def test_operator_sequences_keep_invariants(seed):
    rng = np.random.default_rng(seed)
    reg = InnovationRegistry()
    pool = [minimal_cppn(3, 2, reg, rng) for _ in range(4)]
    edges: dict[int, tuple[int, int]] = {}
    for step in range(40):
        if step % 8 == 0:
            reg.new_epoch()
        i, j = rng.integers(len(pool), size=2)
        if rng.random() < 0.5:
            child = mutate(pool[i], STRUCTURAL, reg, rng)
        else:
            child = crossover(pool[i], pool[j], float(rng.random()), float(rng.random()), rng)
        check_invariants(child, edges)
        pool[int(rng.integers(len(pool)))] = child


@given(st.integers(0, 2**32 - 1), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_evaluate_is_pure(seed, inputs):
    g = evolved(seed % 1000, steps=10)
    assert g.evaluate(inputs) == g.evaluate(inputs)
    fresh = genome.deserialize(genome.serialize(g))
    assert fresh.evaluate(inputs) == g.evaluate(inputs)
