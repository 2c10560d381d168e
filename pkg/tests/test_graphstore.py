import random

import pytest

from netslice.graphstore import (
    ClosureBudgetExceeded,
    Iri,
    Literal,
    Model,
    OWL_INVERSE_OF,
    ParseError,
    RDF_TYPE,
    RDFS_SUBCLASS_OF,
    Triple,
    Var,
    XSD_INTEGER,
    entail,
    integer,
    merge,
    parse_document,
    query_bgp,
    serialize_document,
)
from oracles import bgp_by_assignment, naive_entail

EX = "urn:ex/"


def ex(name):
    return Iri(EX + name)


def t(s, p, o):
    return Triple(ex(s), ex(p), o if isinstance(o, Literal) else ex(o))


def test_parse_single_statement():
    doc = (
        "@prefix t: <http://geni-orca.renci.org/owl/topology.owl#> .\n"
        "<urn:a> t:hasInterface <urn:a-if0> .\n"
    )
    m = parse_document(doc)
    assert len(m) == 1
    only = next(iter(m))
    assert only.subject == Iri("urn:a")
    assert only.predicate == Iri("http://geni-orca.renci.org/owl/topology.owl#hasInterface")
    assert only.object == Iri("urn:a-if0")


def test_parse_missing_object_is_syntax_error():
    with pytest.raises(ParseError) as err:
        parse_document("<urn:a> <urn:p> .\n")
    assert err.value.line == 1


def test_parse_undeclared_prefix():
    with pytest.raises(ParseError, match="undeclared prefix"):
        parse_document("t:a t:p t:b .\n")


def test_parse_literal_subject_rejected():
    with pytest.raises(ParseError, match="subject"):
        parse_document('"lex" <urn:p> <urn:o> .\n')


def test_parse_comments_and_blank_lines():
    doc = "# header\n\n<urn:a> <urn:p> <urn:b> .  # trailing\n"
    assert len(parse_document(doc)) == 1


def test_parse_typed_literal_and_escapes():
    doc = (
        "@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .\n"
        '<urn:a> <urn:p> "5"^^xsd:integer .\n'
        '<urn:a> <urn:q> "line\\nbreak \\"quoted\\"" .\n'
    )
    m = parse_document(doc)
    objs = {o for _t in m for o in [_t.object]}
    assert Literal("5", XSD_INTEGER) in objs
    assert Literal('line\nbreak "quoted"') in objs


def test_serialize_empty_model():
    assert serialize_document(Model()) == ""
    m = Model({"t": "urn:t/"})
    assert serialize_document(m) == "@prefix t: <urn:t/> .\n"


def test_roundtrip_is_fixpoint():
    doc = (
        "@prefix e: <urn:ex/> .\n"
        "@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .\n"
        'e:a e:p "12"^^xsd:integer .\n'
        "e:a e:q e:b .\n"
        '<urn:other:thing> e:q "plain" .\n'
    )
    m = parse_document(doc)
    once = serialize_document(m)
    again = serialize_document(parse_document(once))
    assert once == again
    assert parse_document(once) == m
    assert parse_document(once).prefixes == m.prefixes


def test_serialization_invariant_under_insertion_order():
    rng = random.Random(7)
    triples = [t(f"s{i}", f"p{i % 3}", f"o{i % 5}") for i in range(40)]
    base = Model({"e": EX})
    base.add_all(triples)
    expected = serialize_document(base)
    for _ in range(10):
        shuffled = triples[:]
        rng.shuffle(shuffled)
        m = Model({"e": EX})
        m.add_all(shuffled)
        assert serialize_document(m) == expected


def test_set_semantics_on_re_add():
    m = Model()
    trip = t("a", "p", "b")
    assert m.add(trip)
    assert not m.add(trip)
    assert len(m) == 1


def test_indexes_agree_with_full_rescan():
    rng = random.Random(3)
    m = Model()
    pool = [t(f"s{rng.randrange(6)}", f"p{rng.randrange(4)}", f"o{rng.randrange(6)}") for _ in range(60)]
    for trip in pool:
        m.add(trip)
    for trip in rng.sample(pool, 20):
        m.remove(trip)
    everything = set(m)
    for s in [None, ex("s1"), ex("s2")]:
        for p in [None, ex("p0"), ex("p1")]:
            for o in [None, ex("o3")]:
                got = set(m.match(s, p, o))
                want = {
                    x
                    for x in everything
                    if (s is None or x.subject == s)
                    and (p is None or x.predicate == p)
                    and (o is None or x.object == o)
                }
                assert got == want


def test_merge_identity_and_union_bound():
    a = Model({"e": EX})
    a.add_all([t("a", "p", "b"), t("b", "p", "c")])
    b = Model()
    b.add_all([t("b", "p", "c"), t("c", "p", "d")])
    assert merge([a, Model()]) == a
    merged = merge([a, b])
    assert len(merged) <= len(a) + len(b)
    assert len(merged) == 3


def test_merge_commutative_associative_on_triples():
    ms = []
    for k in range(3):
        m = Model()
        m.add_all([t(f"s{k}{i}", "p", f"o{i}") for i in range(4)])
        ms.append(m)
    assert merge([ms[0], merge([ms[1], ms[2]])]) == merge([merge([ms[0], ms[1]]), ms[2]])
    assert merge([ms[1], ms[0]]) == merge([ms[0], ms[1]])


def test_merge_prefix_conflict_later_wins(caplog):
    a = Model({"x": "urn:one/"})
    b = Model({"x": "urn:two/"})
    with caplog.at_level("WARNING"):
        merged = merge([a, b])
    assert merged.prefixes["x"] == "urn:two/"
    assert any("redefined" in r.message for r in caplog.records)


def test_entail_subclass_chain():
    m = Model()
    A, B, C, x = ex("A"), ex("B"), ex("C"), ex("x")
    m.add(Triple(B, RDFS_SUBCLASS_OF, A))
    m.add(Triple(C, RDFS_SUBCLASS_OF, B))
    m.add(Triple(x, RDF_TYPE, C))
    closed = entail(m)
    assert Triple(x, RDF_TYPE, B) in closed
    assert Triple(x, RDF_TYPE, A) in closed
    assert Triple(C, RDFS_SUBCLASS_OF, A) in closed


def test_entail_inverse_property():
    m = Model()
    has_if, if_of = ex("hasInterface"), ex("interfaceOf")
    n, i = ex("n"), ex("i")
    m.add(Triple(has_if, OWL_INVERSE_OF, if_of))
    m.add(Triple(n, has_if, i))
    closed = entail(m)
    assert Triple(i, if_of, n) in closed
    # symmetry of the declaration itself
    assert Triple(if_of, OWL_INVERSE_OF, has_if) in closed


def test_entail_monotone_and_idempotent():
    m = _random_schema_model(random.Random(11))
    closed = entail(m)
    assert set(m) <= set(closed)
    assert entail(closed) == closed


def _random_schema_model(rng, n_classes=8, n_props=4, n_inst=10):
    m = Model()
    classes = [ex(f"C{i}") for i in range(n_classes)]
    props = [ex(f"prop{i}") for i in range(n_props)]
    insts = [ex(f"i{i}") for i in range(n_inst)]
    for c in classes:
        if rng.random() < 0.7:
            m.add(Triple(c, RDFS_SUBCLASS_OF, rng.choice(classes)))
    for p in props:
        if rng.random() < 0.5:
            m.add(Triple(p, Iri("http://www.w3.org/2000/01/rdf-schema#subPropertyOf"), rng.choice(props)))
        if rng.random() < 0.4:
            m.add(Triple(p, Iri("http://www.w3.org/2000/01/rdf-schema#domain"), rng.choice(classes)))
        if rng.random() < 0.4:
            m.add(Triple(p, Iri("http://www.w3.org/2000/01/rdf-schema#range"), rng.choice(classes)))
        if rng.random() < 0.3:
            m.add(Triple(p, OWL_INVERSE_OF, rng.choice(props)))
    for x in insts:
        if rng.random() < 0.8:
            m.add(Triple(x, RDF_TYPE, rng.choice(classes)))
        if rng.random() < 0.8:
            m.add(Triple(x, rng.choice(props), rng.choice(insts)))
        if rng.random() < 0.2:
            m.add(Triple(x, rng.choice(props), integer(rng.randrange(10))))
    return m


def test_entail_matches_naive_fixpoint_oracle():
    rng = random.Random(20260808)
    for _ in range(25):
        m = _random_schema_model(rng)
        assert set(entail(m)) == naive_entail(m)


def test_entail_budget():
    m = Model()
    classes = [ex(f"C{i}") for i in range(60)]
    for a, b in zip(classes, classes[1:]):
        m.add(Triple(a, RDFS_SUBCLASS_OF, b))
    with pytest.raises(ClosureBudgetExceeded):
        entail(m, budget=10)


def test_query_single_pattern():
    m = Model()
    m.add(t("ServerA", "hasInterface", "ifA"))
    m.add(t("ServerB", "hasInterface", "ifB"))
    got = query_bgp(m, [(ex("ServerA"), ex("hasInterface"), Var("i"))])
    assert got == [{"i": ex("ifA")}]


def test_query_no_match_is_empty():
    m = Model()
    m.add(t("a", "p", "b"))
    assert query_bgp(m, [(ex("zz"), ex("p"), Var("o"))]) == []


def test_query_join_matches_assignment_oracle():
    rng = random.Random(99)
    for _ in range(30):
        m = Model()
        for _ in range(rng.randrange(4, 11)):
            m.add(t(f"s{rng.randrange(4)}", f"p{rng.randrange(3)}", f"o{rng.randrange(4)}"))
        patterns = [
            (Var("x"), ex(f"p{rng.randrange(3)}"), Var("y")),
            (Var("y"), ex(f"p{rng.randrange(3)}"), Var("z")),
            (Var("x"), Var("q"), Var("z")),
        ]
        assert query_bgp(m, patterns) == bgp_by_assignment(m, patterns)


def test_query_unbound_predicate_variable():
    m = Model()
    m.add(t("a", "p", "b"))
    got = query_bgp(m, [(ex("a"), Var("p"), ex("b"))])
    assert got == [{"p": ex("p")}]


def test_parse_substrate_fixture_chain_present():
    from conftest import FIXTURES

    m = parse_document((FIXTURES / "renci.ndl").read_text())
    rnc = "http://geni-orca.renci.org/sites/renci/"
    topo = "http://geni-orca.renci.org/owl/topology.owl#"
    assert Triple(
        Iri(rnc + "Server/A"), Iri(topo + "hasInterface"), Iri(rnc + "Server/A/f1/ethernet")
    ) in m
    assert Triple(
        Iri(rnc + "Server/A/f1/ethernet"), Iri(topo + "linkedTo"), Iri(rnc + "10GB/1/0/ethernet")
    ) in m


def test_merge_request_with_schema_connects_class_hierarchy():
    from conftest import FIXTURES
    from netslice.vocab import RESERVATION, NETWORK_ELEMENT, builtin_schema

    request = parse_document((FIXTURES / "request-pair.ndl").read_text())
    closed = entail(merge([builtin_schema(), request]))
    res = Iri("urn:orca:request:pair/Reservation/1")
    assert Triple(res, RDF_TYPE, RESERVATION) in closed
    # the request's node types now sit inside the schema hierarchy
    node = Iri("urn:orca:request:pair/Node/1")
    assert Triple(node, RDF_TYPE, NETWORK_ELEMENT) in closed


def test_query_fixture_interface():
    from conftest import FIXTURES

    m = parse_document((FIXTURES / "renci.ndl").read_text())
    rnc = "http://geni-orca.renci.org/sites/renci/"
    topo = "http://geni-orca.renci.org/owl/topology.owl#"
    got = query_bgp(m, [(Iri(rnc + "Server/A"), Iri(topo + "hasInterface"), Var("i"))])
    assert got == [{"i": Iri(rnc + "Server/A/f1/ethernet")}]
