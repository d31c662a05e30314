"""Homomorphism search, containment and evaluation of (U)CQs"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

from models.query import CQ, UCQ, Database, Fact, RelationalAtom, UnionFind, as_ucq, quotient

logger = logging.getLogger(__name__)

Assignment = Dict[str, str]


class HomomorphismError(Exception):
    """Homomorphism and containment errors"""
    pass


@dataclass
class Homomorphism:
    """Total map from the variables of a CQ to terms of the target"""
    assignment: Dict[str, str] = field(default_factory=dict)

    def __getitem__(self, var: str) -> str:
        return self.assignment[var]

    def __len__(self) -> int:
        return len(self.assignment)


class FactIndex:
    """Facts grouped by (relation, arity)"""

    def __init__(self, facts: Iterable[Fact]):
        self._by_key: Dict[Tuple[str, int], List[Tuple[str, ...]]] = {}
        for fact in facts:
            self._by_key.setdefault((fact.relation, fact.arity), []).append(fact.args)
        for rows in self._by_key.values():
            rows.sort()

    def rows(self, atom: RelationalAtom) -> List[Tuple[str, ...]]:
        return self._by_key.get((atom.relation, atom.arity), [])

    def terms(self) -> Set[str]:
        found = set()
        for rows in self._by_key.values():
            for row in rows:
                found.update(row)
        return found


def _extend(atom: RelationalAtom, row: Tuple[str, ...], assign: Assignment) -> Optional[List[str]]:
    """Bind the variables of atom to row; returns the newly bound variables or None on clash"""
    added = []
    for var, value in zip(atom.args, row):
        bound = assign.get(var)
        if bound is None:
            assign[var] = value
            added.append(var)
        elif bound != value:
            for v in added:
                del assign[v]
            return None
    return added


def iter_homomorphisms(atoms: Sequence[RelationalAtom], target: Union[FactIndex, Iterable[Fact]],
                       fixed: Optional[Assignment] = None,
                       prune: Optional[Callable[[Assignment], bool]] = None) -> Iterator[Assignment]:
    """
    Enumerate assignments mapping every atom into the target facts

    Atoms are matched most-constrained-first: the next atom is the one with
    the most bound variables, ties broken by the number of candidate rows.

    Args:
        atoms: Relational atoms to match
        target: Fact index or iterable of facts
        fixed: Variables whose image is already determined
        prune: Called on each partial assignment; returning True cuts the branch

    Yields:
        Assignments defined on every variable of atoms (and of fixed)
    """
    index = target if isinstance(target, FactIndex) else FactIndex(target)
    assign: Assignment = dict(fixed or {})
    pending = list(dict.fromkeys(atoms))

    def score(atom: RelationalAtom) -> Tuple[int, int]:
        bound = sum(1 for v in atom.args if v in assign)
        return (-bound, len(index.rows(atom)))

    def search() -> Iterator[Assignment]:
        if prune is not None and prune(assign):
            return
        if not pending:
            yield dict(assign)
            return
        best = min(range(len(pending)), key=lambda i: score(pending[i]))
        atom = pending.pop(best)
        for row in index.rows(atom):
            added = _extend(atom, row, assign)
            if added is None:
                continue
            yield from search()
            for var in added:
                del assign[var]
        pending.insert(best, atom)

    yield from search()


def find_cq_hom(q2: CQ, q1: CQ) -> Optional[Homomorphism]:
    """
    Find a homomorphism from q2 to q1

    Relational atoms and equality atoms of q2 are matched modulo the
    equivalence closure of the equality atoms of q1, and answer variables
    map positionally.

    Args:
        q2: Source CQ
        q1: Target CQ

    Returns:
        Homomorphism defined on all variables of q2, or None if none exists

    Raises:
        HomomorphismError: If the arities differ
    """
    if q1.arity != q2.arity:
        raise HomomorphismError(f"arity mismatch: {q2.arity} vs {q1.arity}")

    target_uf = UnionFind((e.left, e.right) for e in q1.equality_atoms)
    facts = [a.rename(target_uf.mapping(a.args)) for a in q1.relational_atoms]

    source_uf = UnionFind((e.left, e.right) for e in q2.equality_atoms)
    cls = source_uf.mapping(q2.variables)

    fixed: Assignment = {}
    for x2, x1 in zip(q2.answer_vars, q1.answer_vars):
        target = target_uf.find(x1)
        if fixed.setdefault(cls[x2], target) != target:
            return None

    atoms = [a.rename(cls) for a in q2.relational_atoms]
    fallback = min(q1.variables) if q1.variables else None
    for assign in iter_homomorphisms(atoms, facts, fixed):
        result = {}
        for var in q2.variables:
            image = assign.get(cls[var])
            result[var] = image if image is not None else (fallback or var)
        return Homomorphism(result)
    return None


def cq_contained(q1: CQ, q2: CQ) -> bool:
    """q1 is contained in q2 iff there is a homomorphism from q2 to q1"""
    return find_cq_hom(q2, q1) is not None


def ucq_contained(u1: Union[CQ, UCQ], u2: Union[CQ, UCQ]) -> bool:
    """Every disjunct of u1 is contained in some disjunct of u2"""
    u1, u2 = as_ucq(u1), as_ucq(u2)
    if u1.arity != u2.arity:
        raise HomomorphismError(f"arity mismatch: {u1.arity} vs {u2.arity}")
    return all(any(cq_contained(p, q) for q in u2.disjuncts) for p in u1.disjuncts)


def ucq_equivalent(u1: Union[CQ, UCQ], u2: Union[CQ, UCQ]) -> bool:
    return ucq_contained(u1, u2) and ucq_contained(u2, u1)


def minimize_ucq(u: UCQ) -> UCQ:
    """Drop every disjunct that is contained in another kept disjunct"""
    kept: List[CQ] = []
    for cq in u.disjuncts:
        if any(cq_contained(cq, other) for other in kept):
            continue
        kept = [other for other in kept if not cq_contained(other, cq)]
        kept.append(cq)
    logger.debug("minimized UCQ from %d to %d disjuncts", len(u.disjuncts), len(kept))
    return UCQ(tuple(kept), u.arity)


def evaluate(u: Union[CQ, UCQ], d: Database,
             domain: Optional[Iterable[str]] = None) -> FrozenSet[Tuple[str, ...]]:
    """
    Compute ans_u(d)

    Answer variables that do not occur in atoms range over the domain.

    Args:
        u: Query to evaluate
        d: Database
        domain: Candidate answer constants; defaults to adom(d). Tuples using
            other constants are discarded.

    Returns:
        Set of answer tuples
    """
    u = as_ucq(u)
    index = FactIndex(d.facts)
    allowed = frozenset(domain) if domain is not None else d.adom
    ordered = sorted(allowed)
    answers: Set[Tuple[str, ...]] = set()

    for cq in u.disjuncts:
        reduced, _ = quotient(cq)
        classes = list(dict.fromkeys(reduced.answer_vars))
        in_atoms = set()
        for atom in reduced.relational_atoms:
            in_atoms.update(atom.args)
        bound_classes = [c for c in classes if c in in_atoms]
        free_classes = [c for c in classes if c not in in_atoms]
        seen: Set[Tuple[str, ...]] = set()

        def prune(assign: Assignment) -> bool:
            for c in bound_classes:
                value = assign.get(c)
                if value is not None and value not in allowed:
                    return True
            if all(c in assign for c in bound_classes):
                return tuple(assign[c] for c in bound_classes) in seen
            return False

        for assign in iter_homomorphisms(reduced.relational_atoms, index, prune=prune):
            key = tuple(assign[c] for c in bound_classes)
            if key in seen:
                continue
            seen.add(key)
            for free in itertools.product(ordered, repeat=len(free_classes)):
                image = dict(zip(bound_classes, key))
                image.update(zip(free_classes, free))
                answers.add(tuple(image[c] for c in reduced.answer_vars))
    return frozenset(answers)


def has_answer(u: Union[CQ, UCQ], d: Database, answer: Sequence[str]) -> bool:
    """Check a single candidate tuple; constants of answer need not occur in d"""
    u = as_ucq(u)
    if len(answer) != u.arity:
        raise HomomorphismError(f"tuple of length {len(answer)} for query of arity {u.arity}")
    index = FactIndex(d.facts)
    for cq in u.disjuncts:
        reduced, _ = quotient(cq)
        fixed: Assignment = {}
        if any(fixed.setdefault(x, a) != a for x, a in zip(reduced.answer_vars, answer)):
            continue
        for _ in iter_homomorphisms(reduced.relational_atoms, index, fixed):
            return True
    return False
