import random

import pytest

from core.homomorphism import (
    HomomorphismError, cq_contained, evaluate, find_cq_hom, has_answer, iter_homomorphisms, minimize_ucq,
    ucq_contained, ucq_equivalent,
)
from core.text_format import parse_query
from models.query import CQ, UCQ, Database, Fact, RelationalAtom, view_as_database


def q(text):
    return parse_query(text).disjuncts[0]


def facts(*specs):
    return Database.of(*(Fact(name, tuple(args)) for name, *args in specs))


def test_iter_homomorphisms_follows_a_path():
    atoms = [RelationalAtom('r', ('x', 'y')), RelationalAtom('r', ('y', 'z'))]
    found = list(iter_homomorphisms(atoms, facts(('r', 'a', 'b'), ('r', 'b', 'c'))))
    assert found == [{'x': 'a', 'y': 'b', 'z': 'c'}]


def test_iter_homomorphisms_respects_fixed_and_prune():
    atoms = [RelationalAtom('A', ('x',))]
    target = facts(('A', 'a'), ('A', 'b'))
    assert list(iter_homomorphisms(atoms, target, fixed={'x': 'b'})) == [{'x': 'b'}]
    pruned = iter_homomorphisms(atoms, target, prune=lambda assign: assign.get('x') == 'a')
    assert list(pruned) == [{'x': 'b'}]


def test_cycle_is_contained_in_edge():
    cycle = q("q(x) :- r(x,y), r(y,x).")
    edge = q("q(x) :- r(x,y).")
    assert cq_contained(cycle, edge)
    assert not cq_contained(edge, cycle)
    assert find_cq_hom(edge, cycle)['y'] == 'y'


def test_containment_modulo_equalities():
    with_equality = q("q(x,y) :- r(x,y), x = y.")
    loop = q("q(x,y) :- r(x,x).")
    assert cq_contained(with_equality, loop)
    assert not cq_contained(loop, with_equality)


def test_containment_rejects_arity_mismatch():
    with pytest.raises(HomomorphismError):
        cq_contained(q("q(x) :- A(x)."), q("q(x,y) :- r(x,y)."))


def test_empty_union_is_contained_in_everything():
    empty = UCQ.unsatisfiable(1)
    edge = parse_query("q(x) :- r(x,y).")
    assert ucq_contained(empty, edge)
    assert not ucq_contained(edge, empty)
    assert ucq_equivalent(empty, parse_query("q(x) :- false."))


def test_minimize_drops_contained_disjuncts():
    u = parse_query("q(x) :- r(x,y), r(y,x).\nq(x) :- r(x,y).\nq(x) :- A(x).")
    minimal = minimize_ucq(u)
    assert len(minimal) == 2
    assert ucq_equivalent(minimal, u)


def test_evaluate_over_active_domain():
    d = facts(('r', 'a', 'b'), ('r', 'b', 'c'))
    assert evaluate(q("q(x) :- r(x,y)."), d) == {('a',), ('b',)}
    assert evaluate(q("q() :- r(x,y), r(y,z)."), d) == {()}
    assert evaluate(q("q() :- r(x,x)."), d) == frozenset()


def test_unconstrained_answer_variable_ranges_over_domain():
    d = facts(('A', 'a'), ('B', 'b'))
    query = q("q(x,z) :- A(x).")
    assert evaluate(query, d) == {('a', 'a'), ('a', 'b')}
    assert evaluate(query, d, domain={'a'}) == {('a', 'a')}


def test_has_answer_accepts_foreign_constants():
    d = facts(('A', 'a'))
    query = q("q(x,y) :- A(x).")
    assert has_answer(query, d, ('a', 'zz'))
    assert not has_answer(query, d, ('zz', 'a'))
    with pytest.raises(HomomorphismError):
        has_answer(query, d, ('a',))


def _random_cq(rng, arity):
    variables = ['x', 'y', 'z', 'u']
    atoms = []
    for _ in range(rng.randint(1, 3)):
        if rng.random() < 0.3:
            atoms.append(RelationalAtom('A', (rng.choice(variables),)))
        else:
            atoms.append(RelationalAtom('r', (rng.choice(variables), rng.choice(variables))))
    used = sorted({t for a in atoms for t in a.args})
    return CQ.create(tuple(rng.choice(used) for _ in range(arity)), atoms)


def test_containment_agrees_with_canonical_database():
    rng = random.Random(11)
    for _ in range(200):
        p, r = _random_cq(rng, 1), _random_cq(rng, 1)
        frozen = view_as_database(p)
        expected = p.answer_vars in evaluate(r, frozen, domain=p.variables)
        assert cq_contained(p, r) == expected


def test_containment_implies_answer_inclusion():
    rng = random.Random(5)
    for _ in range(100):
        p, r = _random_cq(rng, 1), _random_cq(rng, 1)
        if not cq_contained(p, r):
            continue
        d = Database(frozenset(
            Fact('r', (rng.choice('abc'), rng.choice('abc'))) for _ in range(4)) | {Fact('A', ('a',))})
        assert evaluate(p, d) <= evaluate(r, d)
