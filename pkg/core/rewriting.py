"""
Finite rewritings and rewriting-witness enumerators

DL-Lite OMQs get the canonical rewriting of bounded size; ELHI OMQs are
explored through pseudo tree-shaped ABoxes whose trees are cut off and
closed at a frontier depth.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx

from core.canonical import StructureIndex, enumerate_databases
from core.reasoner import BOT_NAME, OMQ, Reasoner, _to_normal_form
from models.ontology import Bottom, Dialect, Ontology, conjuncts
from models.query import CQ, UCQ, Database, Fact, Schema, as_ucq, fresh_names, size, view_as_cq
from models.spec import ObdaSpec

logger = logging.getLogger(__name__)

CORE_PREFIX = 'c'
TREE_PREFIX = 't'


class RewritingError(Exception):
    """Rewriting construction errors"""
    pass


@dataclass(frozen=True)
class RewritingBudget:
    """
    Search limits; exhaustive means the limits meet the completeness requirement

    max_abox_size None means the size the instance requires for completeness.
    """
    max_abox_size: Optional[int] = None
    max_core: int = 2
    max_outdegree: int = 1
    max_depth: int = 1
    max_choices: Optional[int] = None
    exhaustive: bool = False

    def __post_init__(self):
        for name in ('max_abox_size', 'max_core', 'max_outdegree', 'max_depth'):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise RewritingError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.max_choices is not None and self.max_choices < 1:
            raise RewritingError(f"max_choices must be positive, got {self.max_choices}")

    def covers(self, required: 'RewritingBudget') -> bool:
        size_ok = self.max_abox_size is None or self.max_abox_size >= (required.max_abox_size or 0)
        return (size_ok and self.max_core >= required.max_core
                and self.max_outdegree >= required.max_outdegree and self.max_depth >= required.max_depth)

    def to_dict(self) -> Dict[str, Optional[int]]:
        return {
            'max_abox_size': self.max_abox_size,
            'max_core': self.max_core,
            'max_outdegree': self.max_outdegree,
            'max_depth': self.max_depth,
        }


@dataclass(frozen=True)
class PseudoTreeAbox:
    """
    Core ABox plus tree-shaped ABoxes hanging off core constants

    depths maps every constant to its distance from the core (0 on the core).
    """
    core: Database
    core_constants: Tuple[str, ...]
    trees: Tuple[Tuple[str, Database], ...] = ()
    depths: Dict[str, int] = field(default_factory=dict, compare=False)
    outdegree: int = 0
    depth: int = 0

    @property
    def abox(self) -> Database:
        facts = set(self.core.facts)
        for _, tree in self.trees:
            facts |= tree.facts
        return Database(frozenset(facts))

    def __len__(self) -> int:
        return len(self.abox)


# labels, then children as (role, inverse, subtree); all sorted
TreeShape = Tuple[Tuple[str, ...], Tuple[Tuple[str, bool, 'TreeShape'], ...]]


def _shape_size(shape: TreeShape) -> int:
    labels, children = shape
    return len(labels) + sum(1 + _shape_size(child) for _, _, child in children)


def _shape_depth(shape: TreeShape) -> int:
    return max((1 + _shape_depth(child) for _, _, child in shape[1]), default=0)


def _subsets(items: Sequence[str], limit: int) -> Iterator[Tuple[str, ...]]:
    for n in range(0, min(len(items), limit) + 1):
        yield from itertools.combinations(items, n)


def _tree_shapes(concepts: Tuple[str, ...], roles: Tuple[str, ...], depth: int, outdegree: int,
                 max_size: int, memo: Dict[Tuple[int, int, bool], List[TreeShape]],
                 root: bool = False) -> List[TreeShape]:
    """All unordered labelled trees within the limits; root trees carry no labels"""
    key = (depth, max_size, root)
    if key in memo:
        return memo[key]
    shapes: List[TreeShape] = []
    label_choices = [()] if root else list(_subsets(concepts, max_size))
    for labels in label_choices:
        remaining = max_size - len(labels)
        if depth == 0 or outdegree == 0 or remaining < 1:
            shapes.append((labels, ()))
            continue
        below = _tree_shapes(concepts, roles, depth - 1, outdegree, remaining - 1, memo)
        edges = [(role, inverse, child) for role in roles for inverse in (False, True) for child in below]
        edges.sort(key=repr)
        for count in range(0, outdegree + 1):
            for children in itertools.combinations_with_replacement(edges, count):
                if sum(1 + _shape_size(c) for _, _, c in children) <= remaining:
                    shapes.append((labels, children))
    memo[key] = shapes
    return shapes


def _materialize(shape: TreeShape, root: str, names: Iterator[str], depth: int,
                 facts: Set[Fact], depths: Dict[str, int]):
    labels, children = shape
    facts.update(Fact(label, (root,)) for label in labels)
    for role, inverse, child in children:
        node = next(names)
        depths[node] = depth + 1
        facts.add(Fact(role, (node, root) if inverse else (root, node)))
        _materialize(child, node, names, depth + 1, facts, depths)


def _core_tuples(constants: Sequence[str], arity: int, abox: Database,
                 index: StructureIndex) -> List[Tuple[str, ...]]:
    tuples = []
    for candidate in itertools.product(sorted(constants), repeat=arity):
        if index.add(abox, candidate):
            tuples.append(candidate)
    return tuples


def enumerate_pseudo_tree_aboxes(schema: Schema, budget: RewritingBudget,
                                 arity: int = 0) -> Iterator[Tuple[PseudoTreeAbox, List[Tuple[str, ...]]]]:
    """
    Yield pseudo tree-shaped ABoxes up to isomorphism with their candidate tuples

    Args:
        schema: DL schema (unary and binary relations are used)
        budget: Limits on core size, outdegree, depth and total facts
        arity: Length of the candidate tuples, drawn from the core constants

    Yields:
        (PseudoTreeAbox, tuples over its core constants, isomorphic pairs removed)
    """
    if budget.max_abox_size is None:
        raise RewritingError("pseudo tree enumeration needs a resolved ABox size")
    if budget.max_abox_size == 0:
        return
    concepts = tuple(sorted(schema.concept_names))
    roles = tuple(sorted(schema.role_names))
    dl_schema = schema.restrict(concepts + roles)
    shapes_memo: Dict[Tuple[int, int, bool], List[TreeShape]] = {}
    pairs = StructureIndex()
    count = 0

    for core in enumerate_databases(dl_schema, budget.max_core, budget.max_abox_size, CORE_PREFIX):
        used = sorted(core.adom, key=lambda c: (len(c), c))
        for extra in range(0, budget.max_core - len(used) + 1):
            core_constants = used + fresh_names(CORE_PREFIX, extra, used, start=len(used) + 1)
            remaining = budget.max_abox_size - len(core)
            root_shapes = _tree_shapes(concepts, roles, budget.max_depth, budget.max_outdegree,
                                       remaining, shapes_memo, root=True)
            options = []
            for constant in core_constants:
                allowed = root_shapes if constant in used else [s for s in root_shapes if s[1]]
                options.append(allowed)
            for assignment in itertools.product(*options):
                if sum(_shape_size(s) for s in assignment) > remaining:
                    continue
                names = iter(fresh_names(TREE_PREFIX, budget.max_abox_size, core_constants))
                depths = {c: 0 for c in core_constants}
                trees = []
                for constant, shape in zip(core_constants, assignment):
                    facts: Set[Fact] = set()
                    _materialize(shape, constant, names, 0, facts, depths)
                    if facts:
                        trees.append((constant, Database(frozenset(facts))))
                candidate = PseudoTreeAbox(core, tuple(core_constants), tuple(trees), depths,
                                           budget.max_outdegree,
                                           max((_shape_depth(s) for s in assignment), default=0))
                abox = candidate.abox
                tuples = _core_tuples(core_constants, arity, abox, pairs)
                if not tuples:
                    continue
                count += 1
                yield candidate, tuples
    logger.debug("enumerated %d pseudo tree-shaped ABoxes", count)


def frontier_closure(candidate: PseudoTreeAbox, frontier_depth: int, schema: Schema) -> Database:
    """
    Cut the trees at frontier_depth and close the frontier

    Facts with a constant deeper than frontier_depth are dropped; every
    constant at exactly frontier_depth gets A(a) for every concept name and
    r(a, a) for every role name of the schema.

    Raises:
        RewritingError: If frontier_depth is negative
    """
    if frontier_depth < 0:
        raise RewritingError(f"frontier depth must be nonnegative, got {frontier_depth}")

    def distance(constant: str) -> int:
        return candidate.depths.get(constant, 0)

    facts = {f for f in candidate.abox.facts if all(distance(a) <= frontier_depth for a in f.args)}
    for constant in candidate.depths:
        if distance(constant) == frontier_depth:
            facts.update(Fact(name, (constant,)) for name in schema.concept_names)
            facts.update(Fact(name, (constant, constant)) for name in schema.role_names)
    return Database(frozenset(facts))


def iter_canonical_pairs(reasoner: Reasoner, schema: Schema, query: Union[CQ, UCQ],
                         size_bound: int, max_domain: Optional[int] = None
                         ) -> Iterator[Tuple[Database, Tuple[str, ...]]]:
    """
    Stream the (A, a) pairs of the canonical rewriting

    Every ABox with at most size_bound facts is visited up to isomorphism,
    and every certain answer over adom(A) is paired with it.
    """
    u = as_ucq(query)
    max_arity = max((arity for _, arity in schema.relations), default=1)
    domain = max_domain if max_domain is not None else size_bound * max_arity
    pairs = StructureIndex()
    for abox in enumerate_databases(schema, domain, size_bound, CORE_PREFIX):
        answers = reasoner.certain_answers(u, abox)
        for answer in sorted(answers):
            if pairs.add(abox, answer):
                yield abox, answer


def canonical_size_bound(ontology: Ontology, query: Union[CQ, UCQ]) -> int:
    """
    Largest disjunct the canonical rewriting needs

    |q| + |O| * |q| facts for the query atoms. Inconsistent ABoxes answer every
    tuple over their domain, so the largest bottom premise gets the same
    allowance plus one fact per answer constant.
    """
    u = as_ucq(query)
    factor = 1 + len(ontology.axioms)
    atoms = max((len(cq.relational_atoms) for cq in u), default=0)
    clash = [len(rd.roles) for rd in ontology.role_disjointness]
    clash.extend(len(conjuncts(ci.lhs)) for ci in ontology.concept_inclusions if isinstance(ci.rhs, Bottom))
    bound = atoms * factor
    if clash:
        bound = max(bound, max(clash) * factor + u.arity)
    return bound


def canonical_rewriting_dllite(omq: OMQ, size_bound: Optional[int] = None) -> UCQ:
    """
    Canonical UCQ-rewriting with CQs of at most size_bound facts

    Without a size_bound the canonical_size_bound of the OMQ is used.

    Raises:
        RewritingError: If the ontology is not DL-Lite or the bound is not positive
    """
    if omq.ontology.dialect != Dialect.DLLITE:
        raise RewritingError(f"canonical rewriting needs a DL-Lite ontology, got {omq.ontology.dialect.value}")
    if size_bound is None:
        size_bound = max(canonical_size_bound(omq.ontology, omq.query), 1)
    if size_bound < 1:
        raise RewritingError(f"size bound must be at least 1, got {size_bound}")
    reasoner = Reasoner(omq.ontology)
    disjuncts = [view_as_cq(abox, answer)
                 for abox, answer in iter_canonical_pairs(reasoner, omq.schema, omq.query, size_bound)]
    return UCQ(tuple(disjuncts), omq.query.arity)


def dependency_graph(ontology: Ontology) -> nx.DiGraph:
    """Edges u -> v whenever a fact over u can help derive a fact over v"""
    nf = _to_normal_form(ontology)
    graph = nx.DiGraph()
    for rule in nf.conjunction_rules:
        graph.add_edges_from((p, rule.conclusion) for p in rule.premise)
    for axiom in nf.exists_right:
        graph.add_edges_from(((axiom.lhs, axiom.role.name), (axiom.lhs, axiom.filler)))
    for axiom in nf.exists_left:
        graph.add_edges_from(((axiom.role.name, axiom.rhs), (axiom.filler, axiom.rhs)))
    for ri in nf.role_inclusions:
        graph.add_edge(ri.lhs.name, ri.rhs.name)
    return graph


def relevant_schema(ontology: Ontology, schema: Schema, query: Union[CQ, UCQ]) -> Schema:
    """
    Restrict a schema to relations that can influence the query or consistency

    A relation is kept if a query relation, bottom or a role in a
    disjointness statement is reachable from it in the dependency graph.
    """
    graph = dependency_graph(ontology)
    targets = set(as_ucq(query).relations) | {BOT_NAME}
    for rd in ontology.role_disjointness:
        targets.update(rd.roles)
    influencing = set(targets)
    for target in targets:
        if target in graph:
            influencing |= nx.ancestors(graph, target)
    return schema.restrict(n for n in schema.names if n in influencing)


def _max_vars(query: Union[CQ, UCQ]) -> int:
    return max((len(cq.variables) for cq in as_ucq(query)), default=0)


def required_budget(spec: ObdaSpec, source_query: Union[CQ, UCQ],
                    target_query: Union[CQ, UCQ]) -> Tuple[RewritingBudget, int]:
    """
    Completeness parameters for the rooted pseudo-tree search

    Returns:
        (budget meeting the structural requirements, theoretical size bound
        |q_t| + |q_t| * |O|^(|q_s|+1))
    """
    nf = _to_normal_form(spec.ontology)
    schema = spec.mapping_schema()
    concepts, roles = len(schema.concept_names), len(schema.role_names)
    core = _max_vars(target_query)
    outdegree = len(nf.exists_left)
    depth = _max_vars(source_query) if outdegree else 0
    role_atoms = max((sum(1 for a in cq.relational_atoms if a.arity == 2) for cq in as_ucq(target_query)),
                     default=0)
    tree_nodes = sum(outdegree ** level for level in range(1, depth + 1))
    total = role_atoms + core * concepts + core * tree_nodes * (1 + concepts + roles)
    budget = RewritingBudget(max_abox_size=max(total, 1), max_core=core, max_outdegree=outdegree,
                             max_depth=depth, exhaustive=True)
    q_t, q_s = size(as_ucq(target_query)), size(as_ucq(source_query))
    theoretical = q_t + q_t * spec.ontology.size() ** (q_s + 1)
    return budget, theoretical


def effective_budget(budget: RewritingBudget, required: RewritingBudget) -> RewritingBudget:
    """Never search beyond what completeness requires"""
    return replace(budget,
                   max_abox_size=(required.max_abox_size if budget.max_abox_size is None
                                  else min(budget.max_abox_size, required.max_abox_size)),
                   max_core=min(budget.max_core, required.max_core),
                   max_outdegree=min(budget.max_outdegree, required.max_outdegree),
                   max_depth=min(budget.max_depth, required.max_depth))
