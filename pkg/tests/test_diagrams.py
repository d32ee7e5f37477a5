import numpy as np
import pydot
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcqm import diagrams as dg
from mcqm.diagrams import Node, TreeDiagram, contact, fork, leaf, resistor
from mcqm.errors import DiagramError
from mcqm.models import random_problem
from mcqm.perturbation import build_problem, corrections

DISTINCT = [1, 2, 4, 11, 30, 92, 288, 946]
RAW = [1, 2, 6, 22, 90, 394, 1806, 8558]


def test_low_order_diagrams():
    (d1,) = dg.enumerate_diagrams(1)
    assert d1.coefficient == -1 and dg.render(d1) == "R C L"
    d2 = {dg.render(d): d.coefficient for d in dg.enumerate_diagrams(2)}
    assert d2 == {"R C R C L": 1, "R F (R C L) (R C L)": -1}
    d3 = dg.enumerate_diagrams(3)
    assert len(d3) == 4 and dg.expansion_term_count(3) == 6
    assert sorted(abs(d.coefficient) for d in d3) == [1, 1, 2, 2]


def test_count_goldens():
    assert [len(dg.enumerate_diagrams(k)) for k in range(1, 9)] == DISTINCT
    assert [dg.expansion_term_count(k) for k in range(1, 9)] == RAW


def test_expansion_matches_rule_based_enumeration():
    for k in range(1, 8):
        from_rules = [n.key() for n in dg.enumerate_legal_trees(k)]
        assert from_rules == [d.key() for d in dg.enumerate_diagrams(k)]


def test_coefficient_sign_follows_homotopy_count():
    for k in range(1, 7):
        for d in dg.enumerate_diagrams(k):
            assert np.sign(d.coefficient) == (-1) ** d.root.count("R")


def test_order_range():
    for k in (0, 9):
        with pytest.raises(ValueError):
            dg.enumerate_diagrams(k)


def test_every_enumerated_diagram_is_legal():
    for k in range(1, 9):
        for d in dg.enumerate_diagrams(k):
            dg.validate(d.root)
            assert d.order == k
            assert all(n.kind == "L" for n in d.root.walk() if not n.children)


_LEGAL_CHILD = {"R": "C", "C": "R", "F": "R"}


def _replace_child(node, path, new):
    if not path:
        return new
    kids = list(node.children)
    kids[path[0]] = _replace_child(kids[path[0]], path[1:], new)
    return Node(node.kind, tuple(kids))


def _paths(node, prefix=()):
    yield prefix, node
    for i, c in enumerate(node.children):
        yield from _paths(c, prefix + (i,))


def _stub(kind):
    # smallest legal subtree starting with `kind`
    return {"R": resistor(contact(leaf())), "C": contact(leaf()), "L": leaf(),
            "F": fork(resistor(contact(leaf())), resistor(contact(leaf())))}[kind]


def test_mutation_fuzzer_rejects_every_prohibited_pattern(rng):
    trees = [d.root for k in range(1, 6) for d in dg.enumerate_diagrams(k)]
    hits = dict.fromkeys(dg.PROHIBITED, 0)
    for _ in range(400):
        root = trees[rng.integers(len(trees))]
        candidates = [(p, n) for p, n in _paths(root) if n.kind in ("R", "C", "F")]
        path, node = candidates[rng.integers(len(candidates))]
        bad = [pair for pair in dg.PROHIBITED if pair[0] == node.kind]
        parent, child = bad[rng.integers(len(bad))]
        slot = rng.integers(len(node.children))
        mutated = _replace_child(root, path + (int(slot),), _stub(child))
        with pytest.raises(DiagramError, match="prohibited"):
            dg.validate(mutated)
        hits[(parent, child)] += 1
    assert all(hits.values())


def test_structural_rejections():
    with pytest.raises(DiagramError):
        dg.validate(contact(leaf()))
    with pytest.raises(DiagramError):
        dg.validate(Node("R", (Node("C", ()),)))
    with pytest.raises(DiagramError):
        dg.validate(Node("R", (Node("X", (leaf(),)),)))


_kinds = st.sampled_from("RCFL")


@st.composite
def _arbitrary_tree(draw, depth=0):
    kind = draw(_kinds) if depth < 5 else "L"
    arity = {"R": 1, "C": 1, "F": 2, "L": 0}[kind]
    return Node(kind, tuple(draw(_arbitrary_tree(depth + 1)) for _ in range(arity)))


@settings(max_examples=300, deadline=None)
@given(root=_arbitrary_tree())
def test_validate_agrees_with_rules(root):
    legal = (root.kind == "R" and root.count("C") >= 1 and all(
        (n.kind, c.kind) not in dg.PROHIBITED for n in root.walk() for c in n.children))
    if legal:
        dg.validate(root)
    else:
        with pytest.raises(DiagramError):
            dg.validate(root)


def test_two_level_first_diagram(two_level_problem):
    (d1,) = dg.enumerate_diagrams(1)
    out = dg.evaluate_diagram(d1, two_level_problem)
    assert np.allclose(out.vec_theta, [0, -0.5]) and abs(out.scal_c) < 1e-15


def test_chain_vanishes_for_identity_perturbation():
    h0, _ = random_problem(5, 3)
    p = build_problem(h0, np.eye(5))
    chain = next(d for d in dg.enumerate_diagrams(2) if dg.render(d) == "R C R C L")
    assert dg.evaluate_diagram(chain, p).norm() < 1e-13


def test_fork_rooted_diagrams_carry_no_energy(random6):
    for k in range(2, 6):
        for d in dg.enumerate_diagrams(k):
            if not dg.is_energy_contributing(d):
                assert abs(dg.evaluate_diagram(d, random6).scal_c) <= 1e-13


def test_energy_flags():
    assert dg.is_energy_contributing(dg.enumerate_diagrams(1)[0])
    flags = {dg.render(d): dg.is_energy_contributing(d) for d in dg.enumerate_diagrams(3)}
    assert flags["R C R C R C L"] is True
    assert not dg.is_energy_contributing(TreeDiagram(resistor(fork(_stub("R"), _stub("R"))), -1))


def test_diagram_sums_match_recurrence():
    for seed in range(3):
        p = build_problem(*random_problem(6, seed), index=seed)
        series = corrections(p, 6)
        for k in range(1, 7):
            target = series.elements[k - 1]
            assert dg.diagram_sum_check(k, p) <= 1e-11 * max(1.0, target.norm())
            e = dg.diagram_sum(k, p, energy_only=True).scal_c
            assert abs(e - target.scal_c) <= 1e-11 * max(1.0, abs(target.scal_c))


def test_two_level_order_three(two_level_problem):
    p = two_level_problem
    diff = dg.diagram_sum(3, p) - corrections(p, 3).elements[-1]
    assert np.linalg.norm(diff.vec_theta) < 1e-15


def test_zero_perturbation_sums():
    h0, _ = random_problem(4, 1)
    p = build_problem(h0, np.zeros((4, 4)))
    for k in range(1, 5):
        assert dg.diagram_sum(k, p).norm() == 0


def test_render_text_and_dot():
    d2 = [d for d in dg.enumerate_diagrams(2) if d.root.children[0].kind == "F"][0]
    assert dg.render(d2) == "R F (R C L) (R C L)"
    dot = dg.render(d2, "dot")
    assert dot == dg.render(d2, "dot")
    (graph,) = pydot.graph_from_dot_data(dot)
    assert len(graph.get_edges()) == 7
    labels = sorted(n.get_label().strip('"') for n in graph.get_nodes()
                    if n.get_name().startswith("n"))
    assert labels == sorted("RFRCLRCL")
    with pytest.raises(ValueError):
        dg.render(d2, "svg")


def test_all_dot_outputs_parse():
    for k in range(1, 5):
        for d in dg.enumerate_diagrams(k):
            graphs = pydot.graph_from_dot_data(dg.render(d, "dot"))
            names = [n.get_name() for n in graphs[0].get_nodes() if n.get_name().startswith("n")]
            assert len(names) == sum(1 for _ in d.root.walk())


def test_fork_children_are_unordered():
    a, b = _stub("R"), resistor(contact(_stub("R")))
    assert resistor(fork(a, b)).key() == resistor(fork(b, a)).key()
