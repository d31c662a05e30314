import random
from dataclasses import replace

import pytest

from core.decision import expressible
from core.mapping_manager import apply_forward_ucq
from core.oracle import (
    OracleError, Profile, brute_force_realization_check, compare_on_database, default_max_domain,
    default_max_facts, random_instance, weaken,
)
from core.rewriting import RewritingBudget, required_budget
from core.text_format import parse_database, parse_query, parse_spec
from models.spec import validate_spec
from models.verdict import Outcome


def test_compare_reports_disagreement(base_spec, source_query):
    q_s = source_query("q(x) :- Emp(x,y,z).")
    database = parse_database("facts { Emp(e,d,o) }")
    assert compare_on_database(base_spec, q_s, parse_query("q(x) :- Employee(x)."), database) is None
    witness = compare_on_database(base_spec, q_s, parse_query("q(x) :- manages(y,x)."), database)
    assert witness.answer == ('e',)
    assert witness.source_answers == {('e',)}
    assert witness.certain_answers == frozenset()


def test_inconsistent_images_can_be_skipped():
    spec = parse_spec("schema { S/1 T/1 }\nmappings { S(x) -> A(x) ; T(x) -> B(x) }\n"
                      "ontology dllite { A & B [= bot }\n")
    q_s = parse_query("q(x) :- S(x).", spec.source_schema)
    q_t = parse_query("q(x) :- A(x).")
    database = parse_database("facts { S(a), T(b), T(a) }")
    assert compare_on_database(spec, q_s, q_t, database) is not None
    assert compare_on_database(spec, q_s, q_t, database, consistent_only=True) is None


def test_brute_force_finds_counterexample(ontology_spec, source_query):
    q_s = source_query("q(x) :- Emp(x,y,z).")
    result = brute_force_realization_check(ontology_spec, q_s, parse_query("q(x) :- Employee(x)."), 2)
    assert not result.consistent
    assert result.counterexample.database.relations == {'Man'}


def test_brute_force_agrees_on_realization(manager_spec, source_query):
    q_s = source_query("q(x) :- Man(x,y).")
    result = brute_force_realization_check(manager_spec, q_s, parse_query("q(x) :- Manager(x)."), 3)
    assert result.consistent
    assert result.databases_checked > 1
    assert "consistent up to 3" in str(result)


def test_brute_force_rejects_empty_domain(manager_spec, source_query):
    with pytest.raises(OracleError):
        brute_force_realization_check(manager_spec, source_query("q(x) :- Man(x,y)."),
                                      parse_query("q(x) :- Manager(x)."), 0)


def test_default_limits(source_query):
    q_s = source_query("q(x,y) :- Man(x,z), Emp(y,z,u).")
    assert default_max_facts(q_s) == 3
    assert default_max_domain(q_s) == 6


def test_unknown_profile():
    with pytest.raises(OracleError, match="unknown profile"):
        Profile.preset('huge')


@pytest.mark.parametrize('name', ['tiny', 'rooted', 'unrooted'])
def test_random_instances_are_valid_and_reproducible(name):
    profile = Profile.preset(name)
    for seed in range(20):
        spec, query = random_instance(seed, profile)
        assert validate_spec(spec) == []
        assert (spec, query) == random_instance(seed, profile)
        assert query.arity <= profile.max_answer_vars


def test_weaken_keeps_a_subset_of_axioms():
    spec, _ = random_instance(4, Profile(max_cis=3))
    weaker = weaken(spec, random.Random(0))
    assert set(weaker.ontology.axioms) <= set(spec.ontology.axioms)
    assert weaker.mappings == spec.mappings


TINY = RewritingBudget(max_abox_size=3, max_core=1, max_outdegree=1, max_depth=1)
ROOTED_TINY = replace(Profile.preset('tiny'), rooted=True)


@pytest.mark.slow
def test_decision_agrees_with_oracle_on_random_instances():
    outcomes = set()
    for seed in range(200):
        spec, q_s = random_instance(seed, ROOTED_TINY)
        realization = apply_forward_ucq(spec.mappings, q_s)
        budget, _ = required_budget(spec, q_s, realization)
        verdict = expressible(spec, q_s, budget)
        if verdict.outcome == Outcome.UNKNOWN:
            continue
        outcomes.add(verdict.outcome)
        oracle = brute_force_realization_check(spec, q_s, realization, default_max_domain(q_s),
                                               default_max_facts(q_s))
        if verdict.outcome == Outcome.NO:
            assert compare_on_database(spec, q_s, realization, verdict.witness.database) is not None, seed
        else:
            assert oracle.consistent, seed
    assert outcomes == {Outcome.YES, Outcome.NO}


@pytest.mark.slow
def test_yes_survives_weakening_the_ontology():
    profile = Profile.preset('tiny')
    for seed in range(100):
        spec, q_s = random_instance(seed, profile)
        if expressible(spec, q_s, TINY).outcome != Outcome.YES:
            continue
        weaker = weaken(spec, random.Random(seed))
        assert expressible(weaker, q_s, TINY).outcome != Outcome.NO, seed


MID_SIZE = Profile(max_relations=3, max_mappings=6, max_cis=5, max_query_vars=4, max_query_atoms=3, rooted=True)
BOUNDED = RewritingBudget(max_abox_size=6, max_core=2, max_outdegree=1, max_depth=1, max_choices=500)


@pytest.mark.slow
def test_bounded_run_on_mid_size_instances_reports_its_bounds():
    for seed in range(10):
        spec, q_s = random_instance(seed, MID_SIZE)
        verdict = expressible(spec, q_s, BOUNDED)
        bounds = verdict.bounds
        assert verdict.outcome in set(Outcome), seed
        assert bounds is not None and bounds.strategy, seed
        if bounds.strategy == 'rooted-pseudo-tree':
            assert bounds.required and bounds.effective, seed
            assert bounds.effective['max_abox_size'] <= BOUNDED.max_abox_size, seed
        if verdict.outcome == Outcome.YES:
            assert bounds.exhaustive and not bounds.truncated, seed
