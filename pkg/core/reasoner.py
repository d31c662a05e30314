"""
Ontology reasoning for DL-Lite and ELHI

Both dialects are brought into one normal form and answered by a type-based
saturation engine. The anonymous part of the universal model below an
element depends only on the element's seed (the concept names it is created
with), so types are computed once per seed and memoized.
"""

import itertools
import logging
import threading
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx

from core.homomorphism import evaluate, has_answer
from models.ontology import (
    Bottom, Concept, ConceptInclusion, ConceptName, Conjunction, Dialect, Existential, Ontology,
    Role, RoleDisjointness, RoleInclusion, Top, conjuncts,
)
from models.query import CQ, UCQ, Database, Fact, Schema, as_ucq, quotient, query_hypergraph

logger = logging.getLogger(__name__)

TOP_NAME = '_top'
BOT_NAME = '_bot'
FRESH_CONCEPT_PREFIX = '_N'
ANONYMOUS_PREFIX = '_n'


class ReasonerError(Exception):
    """Reasoning errors"""
    pass


@dataclass(frozen=True, order=True)
class ConjunctionRule:
    """A1 & ... & An [= B"""
    premise: FrozenSet[str]
    conclusion: str

    def __str__(self) -> str:
        return f"{' & '.join(sorted(self.premise))} [= {self.conclusion}"


@dataclass(frozen=True, order=True)
class ExistsRight:
    """A [= exists r.B"""
    lhs: str
    role: Role
    filler: str

    def __str__(self) -> str:
        return f"{self.lhs} [= exists {self.role}.{self.filler}"


@dataclass(frozen=True, order=True)
class ExistsLeft:
    """exists r.A [= B"""
    role: Role
    filler: str
    rhs: str

    def __str__(self) -> str:
        return f"exists {self.role}.{self.filler} [= {self.rhs}"


@dataclass(frozen=True)
class NormalFormOntology:
    """Ontology in normal form; top is the name _top, bottom the name _bot"""
    conjunction_rules: Tuple[ConjunctionRule, ...] = ()
    exists_right: Tuple[ExistsRight, ...] = ()
    exists_left: Tuple[ExistsLeft, ...] = ()
    role_inclusions: Tuple[RoleInclusion, ...] = ()
    role_disjointness: Tuple[RoleDisjointness, ...] = ()
    concept_names: FrozenSet[str] = frozenset()
    role_names: FrozenSet[str] = frozenset()
    fresh_names: FrozenSet[str] = frozenset()
    _super_roles: Dict[Role, FrozenSet[Role]] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        graph = nx.DiGraph()
        for name in self.role_names:
            graph.add_nodes_from((Role(name), Role(name, True)))
        for ri in self.role_inclusions:
            graph.add_edge(ri.lhs, ri.rhs)
            graph.add_edge(ri.lhs.inv(), ri.rhs.inv())
        closure = {role: frozenset(nx.descendants(graph, role) | {role}) for role in graph.nodes}
        object.__setattr__(self, '_super_roles', closure)

    def super_roles(self, role: Role) -> FrozenSet[Role]:
        """All s with r [=* s, closed under inversion"""
        return self._super_roles.get(role, frozenset((role,)))

    def is_hidden(self, name: str) -> bool:
        return name in (TOP_NAME, BOT_NAME) or name in self.fresh_names

    def all_concept_names(self) -> FrozenSet[str]:
        return self.concept_names | self.fresh_names

    def __str__(self) -> str:
        lines = [str(a) for a in (*self.conjunction_rules, *self.exists_right, *self.exists_left,
                                  *self.role_inclusions, *self.role_disjointness)]
        return '\n'.join(lines)


class _Normalizer:
    """Structural transformation with fresh names _N0, _N1, ..."""

    def __init__(self, ontology: Ontology):
        self.concepts, self.roles = ontology.signature()
        self.taken = set(self.concepts) | set(self.roles) | {TOP_NAME, BOT_NAME}
        self.counter = itertools.count()
        self.fresh: List[str] = []
        self.conj: List[ConjunctionRule] = []
        self.right: List[ExistsRight] = []
        self.left: List[ExistsLeft] = []

    def new_name(self) -> str:
        while True:
            name = f"{FRESH_CONCEPT_PREFIX}{next(self.counter)}"
            if name not in self.taken:
                self.taken.add(name)
                self.fresh.append(name)
                return name

    @staticmethod
    def atom_name(concept: Concept) -> Optional[str]:
        if isinstance(concept, ConceptName):
            return concept.name
        if isinstance(concept, Top):
            return TOP_NAME
        if isinstance(concept, Bottom):
            return BOT_NAME
        return None

    def left_name(self, concept: Concept) -> str:
        """A name X with concept [= X"""
        simple = self.atom_name(concept)
        if simple is not None:
            return simple
        name = self.new_name()
        if isinstance(concept, Conjunction):
            premise = frozenset(self.left_name(c) for c in conjuncts(concept))
            self.conj.append(ConjunctionRule(premise, name))
        else:
            self.left.append(ExistsLeft(concept.role, self.left_name(concept.filler), name))
        return name

    def right_name(self, concept: Concept) -> str:
        """A name X with X [= concept"""
        simple = self.atom_name(concept)
        if simple is not None:
            return simple
        name = self.new_name()
        self.include([name], concept)
        return name

    def single(self, premise: Sequence[str]) -> str:
        names = frozenset(premise)
        if len(names) == 1:
            return next(iter(names))
        name = self.new_name()
        self.conj.append(ConjunctionRule(names, name))
        return name

    def include(self, premise: Sequence[str], rhs: Concept):
        for part in conjuncts(rhs):
            simple = self.atom_name(part)
            if simple == TOP_NAME:
                continue
            if simple is not None:
                self.conj.append(ConjunctionRule(frozenset(premise), simple))
                continue
            filler = self.right_name(part.filler)
            self.right.append(ExistsRight(self.single(premise), part.role, filler))

    def add(self, ci: ConceptInclusion):
        parts = conjuncts(ci.lhs)
        rhs = self.atom_name(ci.rhs)
        if len(parts) == 1 and isinstance(parts[0], Existential) and rhs is not None:
            if rhs != TOP_NAME:
                self.left.append(ExistsLeft(parts[0].role, self.left_name(parts[0].filler), rhs))
            return
        self.include([self.left_name(p) for p in parts], ci.rhs)

    def result(self, ontology: Ontology) -> NormalFormOntology:
        for ci in ontology.concept_inclusions:
            self.add(ci)
        return NormalFormOntology(
            conjunction_rules=tuple(dict.fromkeys(self.conj)),
            exists_right=tuple(dict.fromkeys(self.right)),
            exists_left=tuple(dict.fromkeys(self.left)),
            role_inclusions=tuple(ontology.role_inclusions),
            role_disjointness=tuple(ontology.role_disjointness),
            concept_names=frozenset(self.concepts),
            role_names=frozenset(self.roles),
            fresh_names=frozenset(self.fresh),
        )


def _to_normal_form(ontology: Ontology) -> NormalFormOntology:
    return _Normalizer(ontology).result(ontology)


def normalize(ontology: Ontology) -> NormalFormOntology:
    """
    Convert an EL or ELHI ontology to normal form

    Args:
        ontology: EL or ELHI ontology

    Returns:
        Conservative extension in normal form

    Raises:
        ReasonerError: For DL-Lite input, which the Reasoner converts on its own
    """
    if ontology.dialect == Dialect.DLLITE:
        raise ReasonerError("normalize expects an EL or ELHI ontology; DL-Lite is handled natively")
    return _to_normal_form(ontology)


def role_entailed(nf: NormalFormOntology, r: Role, s: Role) -> bool:
    return s in nf.super_roles(r)


@dataclass(frozen=True)
class OMQ:
    """Ontology-mediated query (ontology, ABox schema, query)"""
    ontology: Ontology
    schema: Schema
    query: UCQ


@dataclass(frozen=True)
class SaturationResult:
    """
    Outcome of ABox saturation

    abox holds the entailed atomic facts over adom(A) using only names of the
    input; types and role_sets keep the internal view used for unraveling.
    """
    abox: Database
    consistent: bool
    types: Dict[str, FrozenSet[str]] = field(default_factory=dict, compare=False)
    role_sets: Dict[Tuple[str, str], FrozenSet[Role]] = field(default_factory=dict, compare=False)

    @property
    def is_inconsistent(self) -> bool:
        return not self.consistent


Seed = FrozenSet[str]


class Reasoner:
    """
    Saturation, universal models and certain answers for one ontology

    Instances are safe to share between threads: the seed tables and the
    subsumption memo are guarded by a lock.
    """

    def __init__(self, ontology: Union[Ontology, NormalFormOntology]):
        if isinstance(ontology, NormalFormOntology):
            self.ontology: Optional[Ontology] = None
            self.normal_form = ontology
        else:
            self.ontology = ontology
            self.normal_form = _to_normal_form(ontology)
        nf = self.normal_form
        self.trivial = not (nf.conjunction_rules or nf.exists_right or nf.exists_left
                            or nf.role_inclusions or nf.role_disjointness)
        self._demands: Dict[str, List[ExistsRight]] = {}
        for axiom in nf.exists_right:
            self._demands.setdefault(axiom.lhs, []).append(axiom)
        self._lock = threading.RLock()
        self._seed_types: Dict[Seed, FrozenSet[str]] = {}
        self._subsumption: Dict[Seed, FrozenSet[str]] = {}

    # type engine

    def _close(self, names: Set[str]):
        changed = True
        while changed:
            changed = False
            for rule in self.normal_form.conjunction_rules:
                if rule.conclusion not in names and rule.premise <= names:
                    names.add(rule.conclusion)
                    changed = True

    def _violates(self, roles: FrozenSet[Role]) -> bool:
        for rd in self.normal_form.role_disjointness:
            for inverse in (False, True):
                if all(Role(name, inverse) in roles for name in rd.roles):
                    return True
        return False

    def _child_seed(self, parent: Iterable[str], role: Role, filler: str) -> Seed:
        parent = set(parent)
        supers = self.normal_form.super_roles(role)
        seed = {TOP_NAME, filler}
        for axiom in self.normal_form.exists_left:
            if axiom.filler in parent and axiom.role.inv() in supers:
                seed.add(axiom.rhs)
        return frozenset(seed)

    def _up(self, role: Role, child: FrozenSet[str]) -> Set[str]:
        supers = self.normal_form.super_roles(role)
        found = set()
        for axiom in self.normal_form.exists_left:
            if axiom.filler in child and axiom.role in supers:
                found.add(axiom.rhs)
        if BOT_NAME in child or self._violates(supers):
            found.add(BOT_NAME)
        return found

    def _children(self, names: Iterable[str]) -> List[Tuple[Role, Seed]]:
        """Anonymous successors demanded by a type, one per (role, seed)"""
        names = set(names)
        found = {}
        for name in sorted(names):
            for axiom in self._demands.get(name, ()):
                found[(axiom.role, self._child_seed(names, axiom.role, axiom.filler))] = None
        return sorted(found, key=lambda item: (item[0], sorted(item[1])))

    def seed_type(self, seed: Iterable[str]) -> FrozenSet[str]:
        """Saturated type of an anonymous element created with the given seed"""
        root = frozenset(seed) | {TOP_NAME}
        with self._lock:
            if root not in self._seed_types:
                self._compute_seed_types(root)
            return self._seed_types[root]

    def _compute_seed_types(self, root: Seed):
        local: Dict[Seed, Set[str]] = {root: set(root)}
        changed = True
        while changed:
            changed = False
            for seed in list(local):
                names = local[seed]
                before = len(names)
                self._close(names)
                for role, child in self._children(names):
                    known = self._seed_types.get(child)
                    if known is None:
                        if child not in local:
                            local[child] = set(child)
                            changed = True
                        known = frozenset(local[child])
                    names |= self._up(role, known)
                self._close(names)
                if len(names) != before:
                    changed = True
        for seed, names in local.items():
            self._seed_types[seed] = frozenset(names)
        logger.debug("seed table holds %d types", len(self._seed_types))

    # public reasoning services

    def role_entailed(self, r: Role, s: Role) -> bool:
        return role_entailed(self.normal_form, r, s)

    def subsumes(self, premise: Iterable[str], concept: str) -> bool:
        """O |= B1 & ... & Bk [= A, including vacuously for unsatisfiable premises"""
        key = frozenset(premise) | {TOP_NAME}
        with self._lock:
            names = self._subsumption.get(key)
            if names is None:
                names = self.seed_type(key)
                self._subsumption[key] = names
        return concept in names or BOT_NAME in names

    def saturate_abox(self, abox: Database, extra_constants: Iterable[str] = ()) -> SaturationResult:
        """
        Compute the atomic facts entailed by the ABox and the ontology

        Args:
            abox: ABox; facts that are neither unary nor binary are carried along
            extra_constants: Constants outside adom(abox) treated as isolated elements

        Returns:
            SaturationResult; consistent is False if bottom is derived somewhere
            or a role disjointness statement is violated
        """
        constants = sorted(abox.adom | set(extra_constants))
        types: Dict[str, Set[str]] = {c: {TOP_NAME} for c in constants}
        role_sets: Dict[Tuple[str, str], Set[Role]] = {}
        for fact in abox.facts:
            if fact.arity == 1:
                types[fact.args[0]].add(fact.relation)
            elif fact.arity == 2:
                a, b = fact.args
                role = Role(fact.relation)
                role_sets.setdefault((a, b), set()).update(self.normal_form.super_roles(role))
                role_sets.setdefault((b, a), set()).update(self.normal_form.super_roles(role.inv()))
        frozen_roles = {pair: frozenset(roles) for pair, roles in role_sets.items()}
        successors: Dict[str, List[Tuple[str, FrozenSet[Role]]]] = {}
        for (a, b), roles in frozen_roles.items():
            successors.setdefault(a, []).append((b, roles))

        changed = True
        while changed:
            changed = False
            for constant in constants:
                names = types[constant]
                before = len(names)
                self._close(names)
                for other, roles in successors.get(constant, ()):
                    for axiom in self.normal_form.exists_left:
                        if axiom.role in roles and axiom.filler in types[other]:
                            names.add(axiom.rhs)
                for role, child in self._children(names):
                    names |= self._up(role, self.seed_type(child))
                self._close(names)
                if len(names) != before:
                    changed = True

        consistent = BOT_NAME not in self.seed_type({TOP_NAME})
        consistent = consistent and all(BOT_NAME not in names for names in types.values())
        consistent = consistent and not any(self._violates(roles) for roles in frozen_roles.values())

        facts: Set[Fact] = set(abox.facts)
        for constant, names in types.items():
            facts.update(Fact(n, (constant,)) for n in names if not self.normal_form.is_hidden(n))
        for (a, b), roles in frozen_roles.items():
            facts.update(Fact(r.name, (a, b)) for r in roles if not r.inverse)
        return SaturationResult(Database(frozenset(facts)), consistent,
                                {c: frozenset(n) for c, n in types.items()}, frozen_roles)

    def is_consistent(self, abox: Database) -> bool:
        return self.saturate_abox(abox).consistent

    def _visible(self, names: Iterable[str]) -> List[str]:
        return sorted(n for n in names if not self.normal_form.is_hidden(n))

    def _unravel(self, roots: Sequence[Tuple[str, FrozenSet[str]]], depth: int,
                 avoid: Iterable[str]) -> Set[Fact]:
        """Anonymous facts below the given elements up to depth edges"""
        taken = set(avoid)
        counter = itertools.count(1)

        def fresh() -> str:
            while True:
                name = f"{ANONYMOUS_PREFIX}{next(counter)}"
                if name not in taken:
                    return name

        facts: Set[Fact] = set()
        frontier = list(roots)
        for _ in range(depth):
            following = []
            for element, names in frontier:
                for role, child in self._children(names):
                    node = fresh()
                    child_type = self.seed_type(child)
                    for sup in sorted(self.normal_form.super_roles(role)):
                        pair = (node, element) if sup.inverse else (element, node)
                        facts.add(Fact(sup.name, pair))
                    facts.update(Fact(n, (node,)) for n in self._visible(child_type))
                    following.append((node, child_type))
            frontier = following
        return facts

    def universal_model(self, abox: Database, depth: int,
                        extra_constants: Iterable[str] = ()) -> Database:
        """
        Unravel the universal model to the given depth below the ABox constants

        Raises:
            ReasonerError: If the ABox is inconsistent with the ontology
        """
        if depth < 0:
            raise ReasonerError(f"unravel depth must be nonnegative, got {depth}")
        saturation = self.saturate_abox(abox, extra_constants)
        if saturation.is_inconsistent:
            raise ReasonerError("ABox is inconsistent with the ontology")
        return self._model_from(saturation, depth)

    def _model_from(self, saturation: SaturationResult, depth: int) -> Database:
        roots = sorted(saturation.types.items())
        anonymous = self._unravel(roots, depth, saturation.types)
        return Database(frozenset(saturation.abox.facts | anonymous))

    def reachable_seed_types(self, saturation: SaturationResult) -> List[FrozenSet[str]]:
        """Types of the anonymous elements reachable from the constants, plus the top type"""
        seen: Dict[Seed, FrozenSet[str]] = {}
        pending: List[FrozenSet[str]] = [self.seed_type({TOP_NAME})]
        pending.extend(saturation.types.values())
        while pending:
            names = pending.pop()
            for _, child in self._children(names):
                if child not in seen:
                    seen[child] = self.seed_type(child)
                    pending.append(seen[child])
        ordered = [self.seed_type({TOP_NAME})]
        ordered.extend(seen[s] for s in sorted(seen, key=sorted))
        return list(dict.fromkeys(ordered))

    def _boolean_holds(self, component: CQ, model: Database, saturation: SaturationResult,
                       cache: Dict[FrozenSet[str], Database]) -> bool:
        if has_answer(component, model, ()):
            return True
        depth = len(component.variables)
        for names in self.reachable_seed_types(saturation):
            tree = cache.get(names)
            if tree is None:
                root = f"{ANONYMOUS_PREFIX}0"
                facts = self._unravel([(root, names)], depth, ())
                facts.update(Fact(n, (root,)) for n in self._visible(names))
                tree = cache[names] = Database(frozenset(facts))
            if has_answer(component, tree, ()):
                return True
        return False

    def _split(self, cq: CQ) -> Tuple[CQ, List[CQ]]:
        """Split a quotiented CQ into its answer part and its answer-free components"""
        graph = query_hypergraph(cq)
        answer = set(cq.answer_vars)
        free_parts = []
        answer_atoms = []
        for component in nx.connected_components(graph):
            atoms = [a for a in cq.relational_atoms if a.terms() & component]
            if component & answer:
                answer_atoms.extend(atoms)
            elif atoms:
                free_parts.append(CQ.create((), atoms))
        return CQ.create(cq.answer_vars, answer_atoms), free_parts

    def certain_answers(self, query: Union[CQ, UCQ], abox: Database,
                        domain: Optional[Iterable[str]] = None) -> FrozenSet[Tuple[str, ...]]:
        """
        Certain answers of a (U)CQ over an ABox

        Args:
            query: Query over the ABox vocabulary
            abox: ABox
            domain: Candidate answer constants; defaults to adom(abox). Constants
                outside adom(abox) are isolated elements.

        Returns:
            Set of tuples over the domain; all tuples if the ABox is inconsistent
        """
        u = as_ucq(query)
        domain = frozenset(abox.adom if domain is None else domain)
        if self.trivial:
            return evaluate(u, abox, domain)
        saturation = self.saturate_abox(abox, domain - abox.adom)
        if saturation.is_inconsistent:
            return frozenset(itertools.product(sorted(domain), repeat=u.arity))
        answers: Set[Tuple[str, ...]] = set()
        models: Dict[int, Database] = {}
        trees: Dict[FrozenSet[str], Database] = {}
        for cq in u.disjuncts:
            reduced, _ = quotient(cq)
            main, free_parts = self._split(reduced)
            depth = len(reduced.variables)
            if depth not in models:
                models[depth] = self._model_from(saturation, depth)
            model = models[depth]
            if not all(self._boolean_holds(part, model, saturation, trees) for part in free_parts):
                continue
            answers |= evaluate(main, model, domain)
        return frozenset(answers)

    def entails_tuple(self, query: Union[CQ, UCQ], abox: Database, answer: Sequence[str]) -> bool:
        """Decide whether a tuple is a certain answer; foreign constants are isolated elements"""
        u = as_ucq(query)
        answer = tuple(answer)
        if len(answer) != u.arity:
            raise ReasonerError(f"tuple of length {len(answer)} for query of arity {u.arity}")
        if self.trivial:
            return has_answer(u, abox, answer)
        saturation = self.saturate_abox(abox, set(answer) - abox.adom)
        if saturation.is_inconsistent:
            return True
        trees: Dict[FrozenSet[str], Database] = {}
        for cq in u.disjuncts:
            reduced, _ = quotient(cq)
            main, free_parts = self._split(reduced)
            model = self._model_from(saturation, len(reduced.variables))
            if not has_answer(main, model, answer):
                continue
            if all(self._boolean_holds(part, model, saturation, trees) for part in free_parts):
                return True
        return False


def saturate_abox(ontology: Union[Ontology, NormalFormOntology], abox: Database) -> SaturationResult:
    return Reasoner(ontology).saturate_abox(abox)


def subsumes(ontology: Union[Ontology, NormalFormOntology], premise: Iterable[str], concept: str) -> bool:
    return Reasoner(ontology).subsumes(premise, concept)


def universal_model(ontology: Union[Ontology, NormalFormOntology], abox: Database, depth: int) -> Database:
    return Reasoner(ontology).universal_model(abox, depth)


def certain_answers(omq: OMQ, abox: Database) -> FrozenSet[Tuple[str, ...]]:
    """
    Certain answers of an OMQ

    Raises:
        ReasonerError: If the ABox uses relations outside the OMQ schema
    """
    problems = abox.conforms_to(omq.schema)
    if problems:
        raise ReasonerError(f"ABox does not match OMQ schema: {'; '.join(problems)}")
    return Reasoner(omq.ontology).certain_answers(omq.query, abox)
