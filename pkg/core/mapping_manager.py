"""Forward and backward application of GAV mappings"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from core.homomorphism import evaluate
from models.query import (
    CQ, UCQ, Database, EqualityAtom, Fact, RelationalAtom, Schema, as_ucq, quotient, view_as_cq,
    view_as_database,
)
from models.spec import GavMapping

logger = logging.getLogger(__name__)

FRESH_PREFIX = '_f'

Match = Tuple[Dict[str, str], Tuple[EqualityAtom, ...]]


class MappingError(Exception):
    """Mapping application errors"""
    pass


def suitable(mapping: GavMapping, fact: Fact) -> Optional[Dict[str, str]]:
    """
    Most general unifier of a mapping head with a fact

    Args:
        mapping: GAV mapping
        fact: Fact over sch(M)

    Returns:
        Map from head variables to constants, or None if not unifiable
    """
    head = mapping.head
    if head.relation != fact.relation or head.arity != fact.arity:
        return None
    sigma: Dict[str, str] = {}
    for var, constant in zip(head.args, fact.args):
        if sigma.setdefault(var, constant) != constant:
            return None
    return sigma


def unify_head(mapping: GavMapping, atom: RelationalAtom) -> Optional[Match]:
    """
    Unify a mapping head with a query atom

    Returns:
        (map from head variables to the query variable at their first position,
        equalities between query variables under a repeated head variable), or
        None if relation or arity differ
    """
    head = mapping.head
    if head.relation != atom.relation or head.arity != atom.arity:
        return None
    sigma: Dict[str, str] = {}
    equalities = []
    for var, term in zip(head.args, atom.args):
        bound = sigma.setdefault(var, term)
        if bound != term:
            equalities.append(EqualityAtom(bound, term))
    return sigma, tuple(equalities)


def _match_fact(mapping: GavMapping, fact: Fact) -> Optional[Match]:
    sigma = suitable(mapping, fact)
    return None if sigma is None else (sigma, ())


def apply_forward_db(mappings: Sequence[GavMapping], d: Database,
                     schema: Optional[Schema] = None) -> Database:
    """
    Compute M(D) = { R(a) | D satisfies phi(a, b) for some phi(x, y) -> R(x) }

    Args:
        mappings: GAV mappings
        d: Source database
        schema: Source schema to check d against, if given

    Returns:
        ABox over sch(M)

    Raises:
        MappingError: If d does not conform to the schema
    """
    if schema is not None:
        problems = d.conforms_to(schema)
        if problems:
            raise MappingError(f"database does not match source schema: {'; '.join(problems)}")
    facts = set()
    for mapping in mappings:
        body = CQ.create(mapping.head.args, mapping.body)
        for row in evaluate(body, d):
            facts.add(Fact(mapping.head.relation, row))
    return Database(frozenset(facts))


def apply_forward_query(mappings: Sequence[GavMapping], q: CQ) -> CQ:
    """
    Compute M(q)

    The query is quotiented by its equality atoms, read as a database and
    mapped forward; the result keeps the answer variables of q and gets its
    equality atoms back.
    """
    reduced, _ = quotient(q)
    abox = apply_forward_db(mappings, view_as_database(reduced))
    return CQ.create(q.answer_vars, set(abox.facts) | set(q.equality_atoms))


def apply_forward_ucq(mappings: Sequence[GavMapping], u) -> UCQ:
    u = as_ucq(u)
    return UCQ(tuple(apply_forward_query(mappings, cq) for cq in u.disjuncts), u.arity)


@dataclass(frozen=True)
class BackwardChoice:
    """One suitable mapping per fact, with the equalities their heads impose"""
    selection: Tuple[Tuple[Fact, GavMapping], ...]
    equalities: Tuple[EqualityAtom, ...] = ()


class BackwardExpansion:
    """
    Streams the disjuncts of M-(A): one per choice of suitable mappings

    Each body-only variable of a chosen mapping is sent to a fresh constant
    _f0, _f1, ...; the counter is shared across facts and choices and
    restarts with every iteration so output is reproducible.
    """

    def __init__(self, mappings: Sequence[GavMapping], facts: Iterable[Fact],
                 finish: Callable[[Database, BackwardChoice], CQ], avoid: Iterable[str] = (),
                 max_choices: Optional[int] = None, unify: bool = False):
        self.facts: List[Fact] = sorted(set(facts))
        self.options: List[List[Tuple[GavMapping, Dict[str, str], Tuple[EqualityAtom, ...]]]] = []
        match = unify_head if unify else _match_fact
        for fact in self.facts:
            found = []
            for mapping in mappings:
                matched = match(mapping, fact)
                if matched is not None:
                    found.append((mapping, *matched))
            self.options.append(found)
        self._finish = finish
        self._avoid = set(avoid)
        for fact in self.facts:
            self._avoid.update(fact.args)
        self.max_choices = max_choices
        self.truncated = False

    @property
    def choice_count(self) -> int:
        return math.prod(len(options) for options in self.options)

    @property
    def is_empty(self) -> bool:
        """True if some fact has no suitable mapping (the unsatisfiable query)"""
        return any(not options for options in self.options)

    def _fresh(self) -> Iterator[str]:
        for n in itertools.count():
            name = f"{FRESH_PREFIX}{n}"
            if name not in self._avoid:
                yield name

    def iter_choices(self) -> Iterator[Tuple[BackwardChoice, Database]]:
        """Yield each choice with the source database it produces"""
        self.truncated = False
        fresh = self._fresh()
        for number, combination in enumerate(itertools.product(*self.options)):
            if self.max_choices is not None and number >= self.max_choices:
                self.truncated = True
                logger.info("backward expansion truncated after %d choices", number)
                return
            produced = set()
            equalities = []
            for mapping, sigma, imposed in combination:
                equalities.extend(imposed)
                extended = dict(sigma)
                for var in sorted(mapping.existential_vars):
                    extended[var] = next(fresh)
                produced.update(atom.rename(extended) for atom in mapping.body)
            choice = BackwardChoice(tuple((f, m) for f, (m, _, _) in zip(self.facts, combination)),
                                    tuple(equalities))
            yield choice, Database(frozenset(produced))

    def databases(self) -> Iterator[Database]:
        for _, database in self.iter_choices():
            yield database

    def __iter__(self) -> Iterator[CQ]:
        for choice, database in self.iter_choices():
            yield self._finish(database, choice)

    def to_ucq(self, arity: int) -> UCQ:
        return UCQ(tuple(self), arity)


def apply_backward(mappings: Sequence[GavMapping], abox: Database, answer: Sequence[str] = (),
                   max_choices: Optional[int] = None) -> BackwardExpansion:
    """
    M-(A, a): disjuncts are the chosen mapping bodies viewed as CQs with answer tuple a

    Args:
        mappings: GAV mappings
        abox: ABox over sch(M)
        answer: Tuple over adom(abox)
        max_choices: Optional cap on the number of streamed choices

    Returns:
        BackwardExpansion; empty (is_empty) if some fact has no suitable mapping
    """
    answer = tuple(answer)
    missing = set(answer) - abox.adom
    if missing:
        raise MappingError(f"answer constants not in ABox: {sorted(missing)}")
    return BackwardExpansion(mappings, abox.facts, lambda db, _: view_as_cq(db, answer),
                             avoid=answer, max_choices=max_choices)


def apply_backward_query(mappings: Sequence[GavMapping], q: CQ,
                         max_choices: Optional[int] = None) -> BackwardExpansion:
    """
    M-(q) for a CQ over sch(M), keeping its answer variables and equality atoms

    The CQ is quotiented by its equalities before its atoms are unified with
    mapping heads; a head variable repeated at two positions adds the equality
    of the query variables found there.
    """
    reduced, _ = quotient(q)
    equalities = set(q.equality_atoms)

    def finish(db: Database, choice: BackwardChoice) -> CQ:
        return CQ.create(q.answer_vars, set(db.facts) | equalities | set(choice.equalities))

    return BackwardExpansion(mappings, reduced.relational_atoms, finish,
                             avoid=q.variables, max_choices=max_choices, unify=True)


def apply_backward_ucq(mappings: Sequence[GavMapping], u, max_choices: Optional[int] = None) -> UCQ:
    """Materialize M-(u) for a UCQ over sch(M)"""
    u = as_ucq(u)
    disjuncts = []
    for cq in u.disjuncts:
        disjuncts.extend(apply_backward_query(mappings, cq, max_choices))
    return UCQ(tuple(disjuncts), u.arity)
