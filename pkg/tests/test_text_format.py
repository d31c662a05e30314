import json
import random

import pytest

from core.homomorphism import ucq_equivalent
from core.text_format import (
    ParseError, parse_database, parse_qbf, parse_query, parse_spec, read_text, render, render_qbf,
)
from models.ontology import Dialect, Role, RoleDisjointness, RoleInclusion
from models.query import Database, EqualityAtom, Fact, Schema
from models.spec import SourceLocation, SpecValidationError
from models.verdict import Outcome, Verdict, Witness
from tests.conftest import BASE_MAPPINGS, EL_ONTOLOGY, SCHEMA


def test_parse_spec_with_el_ontology():
    spec = parse_spec(SCHEMA + BASE_MAPPINGS + EL_ONTOLOGY)
    assert len(spec.mappings) == 2
    assert len(spec.ontology.concept_inclusions) == 2
    assert spec.ontology.dialect == Dialect.EL
    assert spec.source_schema == Schema.of(Man=2, Emp=3)


def test_parse_spec_with_empty_ontology_block():
    spec = parse_spec("schema { S/1 }\nmappings { S(x) -> A(x) }\nontology elhi { }\n")
    assert spec.ontology.is_empty


def test_parse_spec_reports_arity_mismatch():
    with pytest.raises(SpecValidationError, match="arity mismatch"):
        parse_spec("schema { Man/2 }\nmappings { Man(x) -> Manager(x) }\n")


def test_parse_spec_attaches_mapping_locations():
    spec = parse_spec("schema { S/1 }\nmappings {\n  S(x) -> A(x)\n}\n")
    assert spec.mappings[0].location == SourceLocation(3, 3)


def test_roles_and_concepts_are_told_apart():
    spec = parse_spec("ontology elhi {\n  r [= s- ;\n  s [= t ;\n  A [= exists r.B ;\n  C [= D\n}\n")
    assert set(spec.ontology.role_inclusions) == {
        RoleInclusion(Role('r'), Role('s', True)), RoleInclusion(Role('s'), Role('t'))}
    assert len(spec.ontology.concept_inclusions) == 2


def test_role_disjointness_and_concept_disjointness():
    spec = parse_spec("ontology dllite {\n  exists r.top [= A ;\n  exists s-.top [= A ;\n"
                      "  r & s [= bot ;\n  A & B [= bot ;\n}\n")
    assert spec.ontology.role_disjointness == (RoleDisjointness(('r', 's')),)
    assert len(spec.ontology.concept_inclusions) == 3


def test_lowercase_pair_without_other_evidence_is_a_role_inclusion():
    with pytest.raises(SpecValidationError, match="role inclusion in EL"):
        parse_spec("ontology el { r [= s }")
    spec = parse_spec("ontology elhi { r [= s ; Emp [= Person }")
    assert spec.ontology.role_inclusions == (RoleInclusion(Role('r'), Role('s')),)
    assert len(spec.ontology.concept_inclusions) == 1


def test_concept_evidence_beats_the_lowercase_reading():
    spec = parse_spec("schema { S/1 }\nmappings { S(x) -> a(x) }\nontology elhi { a [= b }")
    assert not spec.ontology.role_inclusions
    assert len(spec.ontology.concept_inclusions) == 1


def test_single_role_below_bot_is_a_disjointness_statement():
    spec = parse_spec("ontology dllite { exists r.top [= A ; r [= bot }")
    assert spec.ontology.role_disjointness == (RoleDisjointness(('r',)),)
    again = parse_spec(render(spec))
    assert again.ontology.role_disjointness == spec.ontology.role_disjointness


def test_comments_are_ignored():
    spec = parse_spec("# sources\nschema { S/1 } # one relation\nmappings { S(x) -> A(x) }\n")
    assert len(spec.mappings) == 1


def test_parse_query_single_rule(source_query):
    q = source_query("q(x) :- Man(x,y).")
    assert len(q) == 1
    cq = q.disjuncts[0]
    assert cq.answer_vars == ('x',)
    assert cq.quantified_vars == frozenset({'y'})


def test_parse_query_with_equality_and_free_answer_variable():
    q = parse_query("q(x,y,z) :- r(x,y), s(x,z), s(z,u), x = y.", Schema.of(r=2, s=2))
    cq = q.disjuncts[0]
    assert cq.equality_atoms == (EqualityAtom('x', 'y'),)
    assert cq.quantified_vars == frozenset({'u'})


def test_parse_boolean_query():
    q = parse_query("q() :- A(x).", Schema.of(A=1))
    assert q.arity == 0
    assert q.disjuncts[0].quantified_vars == frozenset({'x'})


def test_rules_with_same_head_form_a_union():
    q = parse_query("q(x) :- A(x).\nq(y) :- B(y).\n", Schema.of(A=1, B=1))
    assert len(q) == 2


def test_rules_with_different_arity_are_rejected():
    with pytest.raises(ParseError, match="differs"):
        parse_query("q(x) :- A(x).\nq(x,y) :- r(x,y).\n", Schema.of(A=1, r=2))


def test_undeclared_relation_is_located():
    with pytest.raises(ParseError) as info:
        parse_query("q(x) :- Foo(x).", Schema.of(A=1))
    assert info.value.location == SourceLocation(1, 9)


def test_query_arity_mismatch():
    with pytest.raises(ParseError, match="arity mismatch"):
        parse_query("q(x) :- A(x,x).", Schema.of(A=1))


def test_syntax_error_reports_location_and_expected_tokens():
    with pytest.raises(ParseError) as info:
        parse_query("q(x) :- Man(x,,y).")
    assert info.value.location == SourceLocation(1, 15)
    assert info.value.expected


def test_true_body_and_false_rule():
    q = parse_query("q() :- true.")
    assert len(q) == 1 and not q.disjuncts[0].atoms
    empty = parse_query("q(x) :- false.")
    assert empty.is_empty and empty.arity == 1


def test_render_query_round_trip(source_query):
    q = source_query("q(x) :- Man(x,y).")
    assert ucq_equivalent(parse_query(render(q)), q)


def test_render_empty_union_round_trip():
    q = parse_query(render(parse_query("q(a,b) :- false.")))
    assert q.is_empty and q.arity == 2


def test_render_spec_sorts_mappings_and_round_trips(ontology_spec):
    text = render(ontology_spec)
    assert text.index("-> Employee(x)") < text.index("-> Manager(x)") < text.index("-> manages(x,y)")
    again = parse_spec(text)
    assert set(again.mappings) == set(ontology_spec.mappings)
    assert set(again.ontology.axioms) == set(ontology_spec.ontology.axioms)
    assert again.source_schema == ontology_spec.source_schema
    assert render(again) == text


def test_parse_and_render_database():
    db = parse_database("facts { Man(m,d), Emp(e,d,o) }", Schema.of(Man=2, Emp=3))
    assert db == Database.of(Fact('Man', ('m', 'd')), Fact('Emp', ('e', 'd', 'o')))
    assert parse_database(render(db)) == db


def test_database_outside_schema_is_rejected():
    with pytest.raises(ParseError, match="undeclared relation"):
        parse_database("facts { Boss(a) }", Schema.of(Man=2))


def test_verdict_renders_as_json():
    witness = Witness(Database.of(Fact('Man', ('a', 'b'))), ('a',), frozenset({('a',)}), frozenset(), True)
    data = json.loads(render(Verdict(Outcome.NO, witness=witness)))
    assert data['verdict'] == 'no'
    assert data['witness']['tuple'] == ['a']
    assert data['witness']['database'] == ['Man(a,b)']
    assert data['witness']['validated'] is True


QBF_TEXT = """c a small formula
p cnf 4 2
a 1 0
e 2 3 4 0
1 -2 3 0
-1 2 4 0
"""


def test_parse_qbf():
    phi = parse_qbf(QBF_TEXT)
    assert phi.universal_vars == ('x1',)
    assert phi.existential_vars == ('x2', 'x3', 'x4')
    assert len(phi.clauses) == 2
    assert not phi.clauses[0][1].positive


def test_render_qbf_round_trip():
    phi = parse_qbf(QBF_TEXT)
    assert parse_qbf(render_qbf(phi)) == phi
    assert render_qbf(phi).startswith("p cnf 4 2\na 1 0\ne 2 3 4 0\n")


def test_qbf_header_must_match_clauses():
    with pytest.raises(ParseError, match="declares 3 clauses"):
        parse_qbf(QBF_TEXT.replace("p cnf 4 2", "p cnf 4 3"))


def test_invalid_utf8_is_located(tmp_path):
    path = tmp_path / "bad.obda"
    path.write_bytes(b"schema {\n  S/1 \xff }\n")
    with pytest.raises(ParseError) as info:
        read_text(path)
    assert info.value.location == SourceLocation(2, 7)


def test_parsing_is_total_on_token_soup():
    rng = random.Random(7)
    tokens = ["q", "(", ")", "x", "y", ",", ":-", ".", "=", "R", "true", "false", "$"]
    for _ in range(300):
        text = ' '.join(rng.choice(tokens) for _ in range(rng.randint(0, 12)))
        try:
            parse_query(text)
        except ParseError as e:
            assert str(e)
