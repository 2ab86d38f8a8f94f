import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_d_separated, brute_pds_lengths, random_dag

from cbmcause.graph import (
    DuplicateNodeId,
    GraphKind,
    Mark,
    MixedGraph,
    NotADag,
    ParseError,
    UnknownNode,
    complete_circle_graph,
    dag_from_parents,
    d_separated,
    edge_notation,
    latent_projection,
    parse_notation,
    pds_path_nodes,
)

MARKS = list(Mark)


def _random_mixed(rng, d, p_edge):
    g = MixedGraph([f"V{i}" for i in range(d)])
    for a, b in itertools.combinations(g.nodes, 2):
        if rng.random() < p_edge:
            g.add_edge(a, b, MARKS[rng.integers(3)], MARKS[rng.integers(3)])
    return g


def test_basic_edge_operations():
    g = MixedGraph(["A", "B", "C"])
    g.add_edge("A", "B", Mark.TAIL, Mark.ARROW)
    assert g.is_directed_edge("A", "B")
    assert g.parents("B") == {"A"}
    assert g.mark_at("B", "A") is Mark.ARROW
    g.set_mark("A", "B", Mark.ARROW)
    assert g.edge("A", "B").symbol == "<->"
    g.remove_edge("B", "A")
    assert not g.has_edge("A", "B")
    with pytest.raises(UnknownNode):
        g.adjacent("Z")
    with pytest.raises(DuplicateNodeId):
        MixedGraph(["A", "A"])


def test_topological_order_and_cycle_detection():
    g = dag_from_parents({"C": ["A", "B"], "B": ["A"]}, ["A", "B", "C"])
    order = g.topological_order()
    assert order.index("A") < order.index("B") < order.index("C")
    assert g.ancestors(["C"]) >= {"A", "B"}
    with pytest.raises(NotADag):
        dag_from_parents({"A": ["C"], "B": ["A"], "C": ["B"]}, ["A", "B", "C"])


def test_d_separation_textbook_cases():
    chain = dag_from_parents({"B": ["A"], "C": ["B"]}, ["A", "B", "C"])
    assert not d_separated(chain, "A", "C")
    assert d_separated(chain, "A", "C", ["B"])
    collider = dag_from_parents({"C": ["A", "B"], "D": ["C"]}, ["A", "B", "C", "D"])
    assert d_separated(collider, "A", "B")
    assert not d_separated(collider, "A", "B", ["C"])
    assert not d_separated(collider, "A", "B", ["D"])


@given(st.integers(0, 2**32 - 1), st.integers(2, 7), st.floats(0.1, 0.8))
def test_d_separation_matches_brute_force(seed, d, p_edge):
    rng = np.random.default_rng(seed)
    dag = random_dag(rng, d, p_edge)
    x, y = rng.choice(dag.nodes, 2, replace=False)
    rest = [v for v in dag.nodes if v not in (x, y)]
    z = [v for v in rest if rng.random() < 0.4]
    assert d_separated(dag, x, y, z) == brute_d_separated(dag, x, y, z)


@given(st.integers(0, 2**32 - 1), st.integers(3, 7), st.floats(0.2, 0.9))
def test_pds_lengths_match_enumeration(seed, d, p_edge):
    rng = np.random.default_rng(seed)
    g = _random_mixed(rng, d, p_edge)
    x, y = rng.choice(g.nodes, 2, replace=False)
    assert pds_path_nodes(g, x, y) == brute_pds_lengths(g, x, y)


def test_pds_counts_nodes():
    # X o-> B <-> C, X and C not adjacent: B is a collider so C is reachable
    g = MixedGraph(["X", "B", "C", "Y"])
    g.add_edge("X", "B", Mark.CIRCLE, Mark.ARROW)
    g.add_edge("B", "C", Mark.ARROW, Mark.ARROW)
    assert pds_path_nodes(g, "X", "Y") == {"B": 2, "C": 3}
    g.set_mark("B", "X", Mark.CIRCLE)
    assert pds_path_nodes(g, "X", "Y") == {"B": 2}


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.floats(0.0, 1.0))
def test_edge_notation_round_trip(seed, d, p_edge):
    rng = np.random.default_rng(seed)
    g = _random_mixed(rng, d, p_edge)
    back = parse_notation(edge_notation(g))
    assert back.nodes == g.nodes
    assert back.kind is g.kind
    for a, b in itertools.combinations(g.nodes, 2):
        assert back.has_edge(a, b) == g.has_edge(a, b)
        if g.has_edge(a, b):
            assert back.mark_at(a, b) is g.mark_at(a, b)
            assert back.mark_at(b, a) is g.mark_at(b, a)


def test_edge_notation_uses_canonical_tokens():
    g = MixedGraph(["A", "B"])
    g.add_edge("A", "B", Mark.ARROW, Mark.TAIL)
    text = edge_notation(g)
    assert "B --> A" in text
    assert "<--" not in text


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_notation("A ==> B\n")
    with pytest.raises(ParseError):
        parse_notation("A --> A\n")
    with pytest.raises(ParseError):
        parse_notation("A --> B\nB <-> A\n")
    with pytest.raises(ParseError):
        parse_notation("# nodes: A\nA --> B\n")
    g = parse_notation("A o-> B\n")
    assert g.kind is GraphKind.PAG and g.mark_at("A", "B") is Mark.CIRCLE


def test_complete_circle_graph():
    g = complete_circle_graph(["A", "B", "C"])
    assert g.n_edges() == 3
    assert all(g.mark_at(a, b) is Mark.CIRCLE for a, b in itertools.permutations(g.nodes, 2))


def test_latent_projection_confounder_and_chain():
    dag = dag_from_parents({"A": ["L"], "B": ["L"], "C": ["B"]}, ["L", "A", "B", "C"])
    mag = latent_projection(dag, ["A", "B", "C"])
    assert mag.edge("A", "B").symbol == "<->"
    assert mag.edge("B", "C").symbol == "-->"
    assert not mag.has_edge("A", "C")


def test_json_round_trip():
    rng = np.random.default_rng(3)
    g = _random_mixed(rng, 5, 0.6)
    back = MixedGraph.from_json(g.to_json())
    assert edge_notation(back) == edge_notation(g)
