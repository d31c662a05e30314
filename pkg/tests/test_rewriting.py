import random

import pytest

from core.homomorphism import iter_homomorphisms, ucq_equivalent
from core.mapping_manager import apply_forward_ucq
from core.oracle import Profile, random_ontology
from core.reasoner import OMQ
from core.rewriting import (
    PseudoTreeAbox, RewritingBudget, RewritingError, canonical_rewriting_dllite, canonical_size_bound,
    dependency_graph, effective_budget, enumerate_pseudo_tree_aboxes, frontier_closure, relevant_schema,
    required_budget,
)
from core.text_format import parse_database, parse_query, parse_spec
from models.ontology import Dialect
from models.query import CQ, Database, Fact, RelationalAtom, Schema


def ontology(text, dialect='dllite'):
    return parse_spec(f"ontology {dialect} {{ {text} }}").ontology


def test_budget_rejects_negative_limits():
    with pytest.raises(RewritingError):
        RewritingBudget(max_core=-1)
    with pytest.raises(RewritingError):
        RewritingBudget(max_choices=0)


def test_budget_covers_componentwise():
    assert RewritingBudget().covers(RewritingBudget(max_abox_size=2, max_core=1, max_outdegree=0, max_depth=0))
    assert not RewritingBudget(max_depth=0).covers(RewritingBudget(max_depth=1))


def test_canonical_rewriting_for_concept_inclusion():
    omq = OMQ(ontology("A [= B"), Schema.of(A=1, B=1), parse_query("q(x) :- B(x)."))
    rewriting = canonical_rewriting_dllite(omq, 1)
    assert len(rewriting) == 2
    assert ucq_equivalent(rewriting, parse_query("q(x) :- A(x).\nq(x) :- B(x)."))


def test_canonical_rewriting_through_existential():
    omq = OMQ(ontology("A [= exists r.top"), Schema.of(A=1, r=2), parse_query("q(x) :- r(x,y)."))
    rewriting = canonical_rewriting_dllite(omq, 1)
    assert ucq_equivalent(rewriting, parse_query("q(x) :- A(x).\nq(x) :- r(x,y)."))


def test_canonical_rewriting_needs_dllite_and_positive_bound():
    query = parse_query("q(x) :- B(x).")
    with pytest.raises(RewritingError, match="DL-Lite"):
        canonical_rewriting_dllite(OMQ(ontology("A [= B", 'elhi'), Schema.of(A=1), query), 1)
    with pytest.raises(RewritingError, match="at least 1"):
        canonical_rewriting_dllite(OMQ(ontology("A [= B"), Schema.of(A=1), query), 0)


def test_single_core_constant_candidate():
    budget = RewritingBudget(max_abox_size=1, max_core=1, max_outdegree=0, max_depth=0)
    found = list(enumerate_pseudo_tree_aboxes(Schema.of(A=1), budget, arity=1))
    assert len(found) == 1
    candidate, tuples = found[0]
    assert candidate.abox == Database.of(Fact('A', ('c1',)))
    assert tuples == [('c1',)]


def test_zero_size_budget_enumerates_nothing():
    budget = RewritingBudget(max_abox_size=0)
    assert list(enumerate_pseudo_tree_aboxes(Schema.of(A=1, r=2), budget, arity=1)) == []


def test_pseudo_tree_candidates_respect_budget():
    budget = RewritingBudget(max_abox_size=3, max_core=1, max_outdegree=1, max_depth=2)
    found = list(enumerate_pseudo_tree_aboxes(Schema.of(A=1, r=2), budget, arity=1))
    assert found
    for candidate, tuples in found:
        assert len(candidate) <= 3
        assert len(candidate.core_constants) <= 1
        assert max(candidate.depths.values()) <= 2
        assert all(t[0] in candidate.core_constants for t in tuples)
    assert any(max(c.depths.values()) == 2 for c, _ in found)


def test_frontier_closure_cuts_and_closes():
    tree = Database.of(Fact('r', ('c1', 't1')), Fact('r', ('t1', 't2')))
    candidate = PseudoTreeAbox(Database.of(Fact('A', ('c1',))), ('c1',), (('c1', tree),),
                               {'c1': 0, 't1': 1, 't2': 2}, 1, 2)
    closed = frontier_closure(candidate, 1, Schema.of(A=1, r=2))
    assert closed == parse_database("facts { A(c1), r(c1,t1), A(t1), r(t1,t1) }")
    with pytest.raises(RewritingError):
        frontier_closure(candidate, -1, Schema.of(A=1, r=2))


def test_relevant_schema_drops_unrelated_relations():
    o = ontology("A [= B", 'elhi')
    kept = relevant_schema(o, Schema.of(A=1, B=1, C=1), parse_query("q(x) :- B(x)."))
    assert kept == Schema.of(A=1, B=1)
    assert dependency_graph(o).has_edge('A', 'B')


def test_required_budget_for_unary_target(ontology_spec, source_query):
    q_s = source_query("q(x) :- Emp(x,y,z).")
    budget, theoretical = required_budget(ontology_spec, q_s, apply_forward_ucq(ontology_spec.mappings, q_s))
    assert (budget.max_core, budget.max_outdegree, budget.max_depth, budget.max_abox_size) == (1, 0, 0, 2)
    assert budget.exhaustive
    assert theoretical > budget.max_abox_size


def test_required_budget_for_join(ontology_spec, source_query):
    q_s = source_query("q(x,y) :- Man(x,z), Emp(y,z,u).")
    budget, _ = required_budget(ontology_spec, q_s, parse_query("q(x,y) :- manages(x,y)."))
    assert budget.max_core == 2
    assert budget.max_abox_size == 5


def test_effective_budget_never_exceeds_requirement():
    required = RewritingBudget(max_abox_size=2, max_core=1, max_outdegree=0, max_depth=0)
    effective = effective_budget(RewritingBudget(max_abox_size=10, max_core=1, max_depth=3), required)
    assert effective.to_dict() == {'max_abox_size': 2, 'max_core': 1, 'max_outdegree': 0, 'max_depth': 0}


def test_unset_abox_size_resolves_to_the_requirement():
    required = RewritingBudget(max_abox_size=4, max_core=1, max_outdegree=0, max_depth=0)
    assert RewritingBudget().covers(required)
    assert effective_budget(RewritingBudget(), required).max_abox_size == 4
    with pytest.raises(RewritingError, match="resolved"):
        list(enumerate_pseudo_tree_aboxes(Schema.of(A=1), RewritingBudget()))


def test_canonical_size_bound_defaults_the_rewriting():
    omq = OMQ(ontology("A [= B"), Schema.of(A=1, B=1), parse_query("q(x) :- B(x)."))
    assert canonical_size_bound(omq.ontology, omq.query) == 2
    assert ucq_equivalent(canonical_rewriting_dllite(omq), canonical_rewriting_dllite(omq, 2))
    clash = ontology("A [= B ; r & s [= bot")
    assert canonical_size_bound(clash, omq.query) == 2 * 3 + 1


def test_trees_map_into_their_frontier_closure():
    schema = Schema.of(A=1, r=2)
    budget = RewritingBudget(max_abox_size=4, max_core=1, max_outdegree=1, max_depth=3)
    checked = 0
    for candidate, _ in enumerate_pseudo_tree_aboxes(schema, budget, arity=1):
        atoms = [RelationalAtom(f.relation, f.args) for f in candidate.abox.facts]
        fixed = {c: c for c in candidate.core_constants}
        for depth in range(1, candidate.depth + 1):
            closed = frontier_closure(candidate, depth, schema)
            assert next(iter_homomorphisms(atoms, closed.facts, fixed), None) is not None, candidate
            checked += 1
    assert checked


def _one_atom_query(rng):
    shape = rng.randrange(3)
    if shape == 0:
        atom = RelationalAtom(rng.choice('AB'), ('x',))
    elif shape == 1:
        atom = RelationalAtom('r', ('x', 'y'))
    else:
        atom = RelationalAtom('r', ('y', 'x'))
    return CQ.create(('x',), [atom])


@pytest.mark.slow
def test_canonical_rewriting_is_stable_past_the_size_bound():
    profile = Profile(dialect=Dialect.DLLITE, concept_names=('A', 'B'), role_names=('r',))
    schema = Schema.of(A=1, B=1, r=2)
    for seed in range(20):
        rng = random.Random(seed)
        o = random_ontology(rng, profile, count=rng.randint(0, 1))
        query = _one_atom_query(rng)
        omq = OMQ(o, relevant_schema(o, schema, query), query)
        bound = max(canonical_size_bound(o, query), 1)
        at_bound = canonical_rewriting_dllite(omq, bound)
        assert ucq_equivalent(at_bound, canonical_rewriting_dllite(omq, bound + 1)), seed
