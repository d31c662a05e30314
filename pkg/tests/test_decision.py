import pytest

from core.decision import (
    DecisionError, InclusionStatus, backward_inclusion, expressible, forward_inclusion, verify,
)
from core.homomorphism import ucq_equivalent
from core.mapping_manager import apply_forward_ucq
from core.oracle import compare_on_database
from core.rewriting import RewritingBudget
from core.text_format import parse_query, parse_spec
from models.verdict import Outcome

DLLITE_SPEC = """
schema { S/1 T/1 }
mappings { S(x) -> A(x) ; T(x) -> B(x) }
ontology dllite { A [= B }
"""


def assert_validated(spec, source, verdict):
    witness = verdict.witness
    assert witness is not None and witness.validated
    realization = apply_forward_ucq(spec.mappings, source)
    assert compare_on_database(spec, source, realization, witness.database) is not None


def test_manager_projection_is_not_expressible_without_manager_mapping(base_spec, source_query):
    q_s = source_query("q(x) :- Man(x,y).")
    verdict = expressible(base_spec, q_s)
    assert verdict.outcome == Outcome.NO
    assert verdict.bounds.strategy == 'empty-ontology'
    assert_validated(base_spec, q_s, verdict)


def test_manager_mapping_makes_projection_expressible(manager_spec, source_query):
    verdict = expressible(manager_spec, source_query("q(x) :- Man(x,y)."))
    assert verdict.outcome == Outcome.YES
    assert ucq_equivalent(verdict.realization, parse_query("q(x) :- Manager(x)."))
    assert verdict.bounds.exhaustive


def test_ontology_breaks_employee_projection(manager_spec, ontology_spec, source_query):
    q_s = source_query("q(x) :- Emp(x,y,z).")
    assert expressible(manager_spec, q_s).outcome == Outcome.YES
    verdict = expressible(ontology_spec, q_s)
    assert verdict.outcome == Outcome.NO
    assert verdict.bounds.strategy == 'rooted-pseudo-tree'
    assert verdict.bounds.required['max_abox_size'] == 2
    assert_validated(ontology_spec, q_s, verdict)
    assert any(f.relation == 'Man' for f in verdict.witness.database.facts)


def test_join_is_expressible_with_ontology(ontology_spec, source_query):
    q_s = source_query("q(x,y) :- Man(x,z), Emp(y,z,u).")
    verdict = expressible(ontology_spec, q_s)
    assert verdict.outcome == Outcome.YES
    assert verdict.bounds.required['max_core'] == 2


def test_join_is_realized_by_manages(ontology_spec, source_query):
    q_s = source_query("q(x,y) :- Man(x,z), Emp(y,z,u).")
    verdict = verify(ontology_spec, q_s, parse_query("q(x,y) :- manages(x,y)."))
    assert verdict.outcome == Outcome.YES
    assert ucq_equivalent(verdict.realization, parse_query("q(x,y) :- manages(x,y)."))


def test_forward_failure_is_reported_with_witness(base_spec, source_query):
    q_s = source_query("q(x,y) :- Man(x,z), Emp(y,z,u).")
    wrong = parse_query("q(x,y) :- manages(x,y), Employee(x).")
    assert forward_inclusion(base_spec, q_s, parse_query("q(x,y) :- manages(x,y)."))
    assert not forward_inclusion(base_spec, q_s, wrong)
    verdict = verify(base_spec, q_s, wrong)
    assert verdict.outcome == Outcome.NO
    assert verdict.bounds.strategy == 'forward'
    assert verdict.witness.validated


def test_verify_rejects_arity_mismatch(base_spec, source_query):
    with pytest.raises(DecisionError, match="arity mismatch"):
        verify(base_spec, source_query("q(x) :- Man(x,y)."), parse_query("q(x,y) :- manages(x,y)."))


def test_verify_rejects_target_outside_schema(base_spec, source_query):
    with pytest.raises(DecisionError, match="outside its schema"):
        verify(base_spec, source_query("q(x) :- Man(x,y)."), parse_query("q(x) :- Boss(x)."))


def test_small_budget_gives_unknown(ontology_spec, source_query):
    q_s = source_query("q(x) :- Emp(x,y,z).")
    verdict = expressible(ontology_spec, q_s, RewritingBudget(max_abox_size=0))
    assert verdict.outcome == Outcome.UNKNOWN
    assert verdict.bounds.effective['max_abox_size'] == 0
    assert not verdict.bounds.exhaustive


def test_dllite_counterexample_found_through_canonical_aboxes():
    spec = parse_spec(DLLITE_SPEC)
    q_s = parse_query("q(x) :- T(x).", spec.source_schema)
    verdict = expressible(spec, q_s)
    assert verdict.outcome == Outcome.NO
    assert verdict.bounds.strategy == 'dllite-canonical'
    assert verdict.witness.database.relations == {'S'}


def test_dllite_yes_needs_an_exhaustive_budget():
    spec = parse_spec(DLLITE_SPEC)
    q_s = parse_query("q(x) :- S(x).\nq(x) :- T(x).", spec.source_schema)
    assert expressible(spec, q_s).outcome == Outcome.UNKNOWN
    assert expressible(spec, q_s, RewritingBudget(exhaustive=True)).outcome == Outcome.YES


def test_thread_pool_finds_the_same_failure(ontology_spec, source_query):
    q_s = source_query("q(x) :- Emp(x,y,z).")
    q_t = parse_query("q(x) :- Employee(x).")
    serial = backward_inclusion(ontology_spec, q_s, q_t)
    parallel = backward_inclusion(ontology_spec, q_s, q_t, jobs=3)
    assert serial.status == parallel.status == InclusionStatus.FAILS
    assert serial.witness.database == parallel.witness.database


def test_pruning_keeps_the_verdict(ontology_spec, source_query):
    q_s = source_query("q(x,y) :- Man(x,z), Emp(y,z,u).")
    q_t = parse_query("q(x,y) :- manages(x,y).")
    plain = backward_inclusion(ontology_spec, q_s, q_t)
    pruned = backward_inclusion(ontology_spec, q_s, q_t, prune_subsumed=True)
    assert plain.status == pruned.status == InclusionStatus.HOLDS
    assert pruned.bounds.candidates_checked == plain.bounds.candidates_checked


def test_dllite_size_bound_follows_the_configured_value():
    spec = parse_spec(DLLITE_SPEC)
    q_s = parse_query("q(x) :- S(x), T(x).", spec.source_schema)
    large = expressible(spec, q_s, RewritingBudget(max_abox_size=20, exhaustive=True))
    assert large.outcome == Outcome.NO
    assert large.bounds.required['max_abox_size'] == 4
    assert large.bounds.effective['max_abox_size'] == 20

    derived = expressible(spec, q_s, RewritingBudget(exhaustive=True))
    assert derived.bounds.effective['max_abox_size'] == 4

    small = expressible(spec, q_s, RewritingBudget(max_abox_size=3))
    assert small.bounds.effective['max_abox_size'] == 3
    assert any("below the required 4" in note for note in small.bounds.notes)
