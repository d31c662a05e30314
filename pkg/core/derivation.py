"""Derivation-tree search: an independent route to the entailed atomic facts of an ABox"""

import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from core.reasoner import BOT_NAME, TOP_NAME, NormalFormOntology, Reasoner
from models.ontology import Role
from models.query import Database, Fact

logger = logging.getLogger(__name__)

CONTEXT_PREFIX = '_ctx'

Label = Tuple[str, str]
Link = Tuple[str, Role, str, str]


@dataclass(frozen=True)
class DerivationTree:
    """Node labelled (element, concept name) with the subtrees justifying it"""
    constant: str
    concept: str
    rule: str
    children: Tuple['DerivationTree', ...] = ()

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)

    def __str__(self) -> str:
        return f"{self.concept}({self.constant})"


class DerivationSearch:
    """
    Least fixpoint over labels (e, A), e a constant or an anonymous context

    Rules applied directly to the normal form:
      fact         A(a) is in the ABox
      top          every element is labelled _top
      conjunction  A1 & ... & An [= B with every (e, Ai) derived
      edge         exists s.C [= D, r(a, b) in the ABox with r [=* s and (b, C) derived
      successor    (e, A) with A [= exists r.B opens the context of the seed
                   {_top, B} plus every D with exists s.C [= D, inv(r) [=* s and
                   (e, C) derived; D reaches e when exists s.C [= D, r [=* s
                   and C is derived in the context
      seed         members of a context seed

    Contexts are shared between elements with the same role and seed. The
    first justification found for each label is kept, so trees are well founded.
    """

    def __init__(self, reasoner: Reasoner, abox: Database):
        self.reasoner = reasoner
        self.abox = abox
        self._why: Dict[Label, Tuple[str, Tuple[Label, ...]]] = {}
        self._labels: Dict[str, Set[str]] = {}
        self._contexts: Dict[FrozenSet[str], str] = {}
        self._links: Dict[Link, None] = {}
        self._run()

    @property
    def normal_form(self) -> NormalFormOntology:
        return self.reasoner.normal_form

    def _edges(self) -> List[Tuple[str, Role, str]]:
        edges = []
        for fact in self.abox.sorted_facts():
            if fact.arity == 2:
                a, b = fact.args
                edges.append((a, Role(fact.relation), b))
                edges.append((b, Role(fact.relation, True), a))
        return edges

    def _add(self, element: str, concept: str, rule: str, premises: Tuple[Label, ...] = ()) -> bool:
        if concept in self._labels[element]:
            return False
        self._labels[element].add(concept)
        self._why[(element, concept)] = (rule, premises)
        return True

    def _context(self, seed: FrozenSet[str]) -> str:
        name = self._contexts.get(seed)
        if name is None:
            name = self._contexts[seed] = f"{CONTEXT_PREFIX}{len(self._contexts)}"
            self._labels[name] = set()
            for concept in sorted(seed):
                self._add(name, concept, 'top' if concept == TOP_NAME else 'seed')
        return name

    def _disjoint(self, roles: FrozenSet[Role]) -> bool:
        for statement in self.normal_form.role_disjointness:
            if all(Role(n) in roles for n in statement.roles):
                return True
            if all(Role(n, True) in roles for n in statement.roles):
                return True
        return False

    def _conjunction_step(self, element: str) -> bool:
        changed = False
        for rule in self.normal_form.conjunction_rules:
            if rule.premise <= self._labels[element]:
                premises = tuple((element, p) for p in sorted(rule.premise))
                changed |= self._add(element, rule.conclusion, 'conjunction', premises)
        return changed

    def _edge_step(self, edges: List[Tuple[str, Role, str]]) -> bool:
        changed = False
        for a, role, b in edges:
            supers = self.normal_form.super_roles(role)
            for axiom in self.normal_form.exists_left:
                if axiom.role in supers and axiom.filler in self._labels[b]:
                    changed |= self._add(a, axiom.rhs, 'edge', ((b, axiom.filler),))
        return changed

    def _open_successors(self, element: str) -> bool:
        changed = False
        for axiom in self.normal_form.exists_right:
            if axiom.lhs not in self._labels[element]:
                continue
            backwards = self.normal_form.super_roles(axiom.role.inv())
            seed = {TOP_NAME, axiom.filler}
            seed.update(left.rhs for left in self.normal_form.exists_left
                        if left.role in backwards and left.filler in self._labels[element])
            link = (element, axiom.role, self._context(frozenset(seed)), axiom.lhs)
            if link not in self._links:
                self._links[link] = None
                changed = True
        return changed

    def _successor_step(self) -> bool:
        changed = False
        for element, role, context, trigger in list(self._links):
            supers = self.normal_form.super_roles(role)
            for axiom in self.normal_form.exists_left:
                if axiom.role in supers and axiom.filler in self._labels[context]:
                    premises = ((element, trigger), (context, axiom.filler))
                    changed |= self._add(element, axiom.rhs, 'successor', premises)
            if BOT_NAME in self._labels[context]:
                changed |= self._add(element, BOT_NAME, 'successor', ((element, trigger), (context, BOT_NAME)))
            elif self._disjoint(supers):
                changed |= self._add(element, BOT_NAME, 'successor', ((element, trigger),))
        return changed

    def _run(self):
        for c in sorted(self.abox.adom):
            self._labels[c] = set()
            self._add(c, TOP_NAME, 'top')
        for fact in self.abox.sorted_facts():
            if fact.arity == 1:
                self._add(fact.args[0], fact.relation, 'fact')
        edges = self._edges()

        changed = True
        while changed:
            changed = False
            for element in list(self._labels):
                changed |= self._conjunction_step(element)
                changed |= self._open_successors(element)
            changed |= self._edge_step(edges)
            changed |= self._successor_step()
        self.derived = {c: frozenset(self._labels[c]) for c in sorted(self.abox.adom)}
        logger.debug("derivation search labelled %d pairs over %d contexts",
                     len(self._why), len(self._contexts))

    def holds(self, constant: str, concept: str) -> bool:
        return (constant, concept) in self._why

    def tree(self, constant: str, concept: str) -> Optional[DerivationTree]:
        if not self.holds(constant, concept):
            return None
        built: Dict[Label, DerivationTree] = {}

        def build(label: Label) -> DerivationTree:
            if label not in built:
                rule, premises = self._why[label]
                built[label] = DerivationTree(label[0], label[1], rule, tuple(build(p) for p in premises))
            return built[label]

        return build((constant, concept))

    def facts(self) -> Database:
        """Entailed concept and role facts over adom(A), hidden names left out"""
        nf = self.normal_form
        found = set(self.abox.facts)
        for c, names in self.derived.items():
            found.update(Fact(n, (c,)) for n in names if not nf.is_hidden(n))
        for a, role, b in self._edges():
            for sup in nf.super_roles(role):
                if not sup.inverse:
                    found.add(Fact(sup.name, (a, b)))
        return Database(frozenset(found))


def has_derivation_tree(reasoner: Reasoner, abox: Database, constant: str, concept: str) -> bool:
    return DerivationSearch(reasoner, abox).holds(constant, concept)
