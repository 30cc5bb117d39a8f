import itertools

import pytest

from amalgam.errors import BudgetExceeded, ParseError, VocabularyMismatch
from amalgam.logic import (
    emit_sentence,
    evaluate,
    parse_sentence,
    parse_sentence_line,
    qf_type,
    sentence_line,
)
from amalgam.structures import Vocabulary, build_structure, enumerate_embeddings

import oracles

GRAPH = Vocabulary.make([("E", 2)])
PURE = Vocabulary.make([])


def graph(domain, edges):
    sym = set()
    for a, b in edges:
        sym.add((a, b))
        sym.add((b, a))
    return build_structure(GRAPH, domain, {"E": sym})


TRIANGLE = graph(("a", "b", "c"), [("a", "b"), ("b", "c"), ("a", "c")])
SYMMETRY = "(forall (x y) (implies (rel E x y) (rel E y x)))"


def test_parse_and_emit_round_trip():
    for text in (
        SYMMETRY,
        "(exists (x) (eq x x))",
        "(forall (x) (exists (y) (and (rel E x y) (not (eq x y)))))",
        "(forall (x y) (or (rel E x y) (not (rel E x y))))",
    ):
        s = parse_sentence(text, GRAPH)
        assert emit_sentence(s) == text
        assert parse_sentence(emit_sentence(s), GRAPH) == s


def test_parse_errors():
    with pytest.raises(ParseError, match="unbound y"):
        parse_sentence("(forall (x) (rel E x y))", GRAPH)
    with pytest.raises(ParseError, match="arity mismatch"):
        parse_sentence("(forall (x) (rel E x))", GRAPH)
    with pytest.raises(ParseError, match="unknown relation"):
        parse_sentence("(forall (x) (rel F x x))", GRAPH)
    with pytest.raises(ParseError, match="prenex"):
        parse_sentence("(forall (x) (and (eq x x) (exists (y) (eq x y))))", GRAPH)
    with pytest.raises(ParseError, match="missing"):
        parse_sentence("(forall (x) (eq x x)", GRAPH)


def test_tagged_lines():
    s = parse_sentence(SYMMETRY, GRAPH, scheme="a")
    line = sentence_line(s)
    assert line.startswith("[a] ")
    assert parse_sentence_line(line, GRAPH) == s


def test_evaluate_examples():
    sym = parse_sentence(SYMMETRY, GRAPH)
    assert evaluate(TRIANGLE, sym) is True
    lonely = graph(("a", "b", "c"), [("a", "b")])
    phi = parse_sentence(
        "(forall (x) (exists (y) (and (rel E x y) (not (eq x y)))))", GRAPH
    )
    assert evaluate(lonely, phi) is False
    assert evaluate(TRIANGLE, phi) is True


def test_evaluate_empty_domain():
    empty = build_structure(GRAPH, [], {})
    assert evaluate(empty, parse_sentence("(forall (x) (rel E x x))", GRAPH)) is True
    assert evaluate(empty, parse_sentence("(exists (x) (eq x x))", GRAPH)) is False


def test_evaluate_budget_cap():
    phi = parse_sentence("(forall (x y z w) (eq x x))", GRAPH)
    with pytest.raises(BudgetExceeded):
        evaluate(TRIANGLE, phi, max_assignments=10)


def test_evaluate_vocabulary_mismatch():
    pure_struct = build_structure(PURE, ["a"], {})
    with pytest.raises(VocabularyMismatch):
        evaluate(pure_struct, parse_sentence(SYMMETRY, GRAPH))


def test_evaluate_agrees_with_naive_oracle():
    # every sentence shape with <= 3 quantifiers over small graphs
    structs = [
        build_structure(GRAPH, [], {}),
        graph(("a",), []),
        graph(("a", "b"), [("a", "b")]),
        graph(("a", "b", "c"), [("a", "b")]),
        TRIANGLE,
    ]
    bodies = [
        "(rel E x y)",
        "(implies (rel E x y) (rel E y z))",
        "(and (not (eq x y)) (rel E x y))",
        "(or (eq x z) (not (rel E y y)))",
    ]
    prefixes = [
        "(forall (x y z) %s)",
        "(forall (x) (exists (y z) %s))",
        "(exists (x y) (forall (z) %s))",
        "(exists (x y z) %s)",
    ]
    for shape, body in itertools.product(prefixes, bodies):
        phi = parse_sentence(shape % body, GRAPH)
        for s in structs:
            assert evaluate(s, phi) == oracles.naive_evaluate(s, phi)


def test_qf_type_examples():
    pure_struct = build_structure(PURE, ["a", "b"], {})
    t = qf_type(pure_struct, ("a", "a"))
    assert t.equality == (0, 0)
    u = qf_type(TRIANGLE, ("a", "b"))
    assert u.equality == (0, 1)
    (name, sat) = u.atoms[0]
    assert name == "E" and set(sat) == {(0, 1), (1, 0)}
    empty_t = qf_type(TRIANGLE, ())
    assert empty_t.length == 0 and empty_t.atoms == (("E", ()),)


def test_qf_type_invariant_under_embedding():
    edge = graph(("x", "y"), [("x", "y")])
    for m in enumerate_embeddings(edge, TRIANGLE):
        f = m.as_dict()
        for t in itertools.product(edge.domain, repeat=2):
            image = tuple(f[e] for e in t)
            assert qf_type(edge, t).key() == qf_type(TRIANGLE, image).key()
