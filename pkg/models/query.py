"""Query and database data models for obda-express"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import networkx as nx


class QueryError(Exception):
    """Malformed query or database objects"""
    pass


@dataclass(frozen=True)
class Schema:
    """A set of relation names with associated arities"""
    relations: Tuple[Tuple[str, int], ...] = ()

    def __post_init__(self):
        names = [name for name, _ in self.relations]
        if len(names) != len(set(names)):
            raise QueryError(f"Duplicate relation names in schema: {sorted(names)}")
        for name, arity in self.relations:
            if arity < 0:
                raise QueryError(f"Negative arity for relation {name}")
        object.__setattr__(self, 'relations', tuple(sorted(self.relations)))

    @staticmethod
    def of(**arities: int) -> 'Schema':
        """Build a schema from keyword arguments, e.g. Schema.of(Man=2, Emp=3)"""
        return Schema(tuple(arities.items()))

    @staticmethod
    def from_dict(arities: Dict[str, int]) -> 'Schema':
        return Schema(tuple(arities.items()))

    def to_dict(self) -> Dict[str, int]:
        return dict(self.relations)

    def arity(self, name: str) -> Optional[int]:
        for relation, arity in self.relations:
            if relation == name:
                return arity
        return None

    def __contains__(self, name: str) -> bool:
        return self.arity(name) is not None

    def __len__(self) -> int:
        return len(self.relations)

    @property
    def names(self) -> FrozenSet[str]:
        return frozenset(name for name, _ in self.relations)

    @property
    def is_dl_schema(self) -> bool:
        """True if only unary and binary relations are used"""
        return all(arity in (1, 2) for _, arity in self.relations)

    @property
    def concept_names(self) -> Tuple[str, ...]:
        return tuple(name for name, arity in self.relations if arity == 1)

    @property
    def role_names(self) -> Tuple[str, ...]:
        return tuple(name for name, arity in self.relations if arity == 2)

    def union(self, other: 'Schema') -> 'Schema':
        merged = dict(self.relations)
        for name, arity in other.relations:
            if merged.get(name, arity) != arity:
                raise QueryError(f"Relation {name} used with arities {merged[name]} and {arity}")
            merged[name] = arity
        return Schema.from_dict(merged)

    def restrict(self, names: Iterable[str]) -> 'Schema':
        keep = set(names)
        return Schema(tuple((n, a) for n, a in self.relations if n in keep))


@dataclass(frozen=True, order=True)
class RelationalAtom:
    """R(z1,...,zn); over a database the arguments are constants (a fact)"""
    relation: str
    args: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'args', tuple(self.args))

    @property
    def arity(self) -> int:
        return len(self.args)

    def rename(self, mapping: Dict[str, str]) -> 'RelationalAtom':
        return RelationalAtom(self.relation, tuple(mapping.get(t, t) for t in self.args))

    def terms(self) -> FrozenSet[str]:
        return frozenset(self.args)

    def __str__(self) -> str:
        return f"{self.relation}({','.join(self.args)})"


@dataclass(frozen=True, order=True)
class EqualityAtom:
    """z1 = z2"""
    left: str
    right: str

    def rename(self, mapping: Dict[str, str]) -> 'EqualityAtom':
        return EqualityAtom(mapping.get(self.left, self.left), mapping.get(self.right, self.right))

    def terms(self) -> FrozenSet[str]:
        return frozenset((self.left, self.right))

    def __str__(self) -> str:
        return f"{self.left} = {self.right}"


Atom = Union[RelationalAtom, EqualityAtom]
Fact = RelationalAtom


def _atom_key(atom: Atom) -> tuple:
    if isinstance(atom, RelationalAtom):
        return (0, atom.relation, atom.args)
    return (1, atom.left, atom.right)


class UnionFind:
    """Union-find over terms; the representative of a class is its least member"""

    def __init__(self, pairs: Iterable[Tuple[str, str]] = ()):
        self._parent: Dict[str, str] = {}
        for left, right in pairs:
            self.union(left, right)

    def find(self, term: str) -> str:
        parent = self._parent.get(term, term)
        if parent == term:
            return term
        root = self.find(parent)
        self._parent[term] = root
        return root

    def union(self, left: str, right: str):
        a, b = self.find(left), self.find(right)
        if a == b:
            return
        if b < a:
            a, b = b, a
        self._parent[b] = a

    def mapping(self, terms: Iterable[str]) -> Dict[str, str]:
        return {t: self.find(t) for t in terms}


@dataclass(frozen=True)
class CQ:
    """Conjunctive query q(x) = exists y. phi(x, y) with relational and equality atoms"""
    answer_vars: Tuple[str, ...]
    quantified_vars: FrozenSet[str]
    atoms: FrozenSet[Atom]

    def __post_init__(self):
        object.__setattr__(self, 'answer_vars', tuple(self.answer_vars))
        object.__setattr__(self, 'quantified_vars', frozenset(self.quantified_vars))
        object.__setattr__(self, 'atoms', frozenset(self.atoms))
        clash = set(self.answer_vars) & self.quantified_vars
        if clash:
            raise QueryError(f"Variables both answer and quantified: {sorted(clash)}")
        used = set()
        for atom in self.atoms:
            used |= atom.terms()
        stray = used - set(self.answer_vars) - self.quantified_vars
        if stray:
            raise QueryError(f"Variables not declared: {sorted(stray)}")

    @staticmethod
    def create(answer_vars: Sequence[str], atoms: Iterable[Atom]) -> 'CQ':
        """
        Create a CQ whose quantified variables are all non-answer variables of the atoms

        Args:
            answer_vars: Answer variables in order (may not occur in atoms)
            atoms: Relational and equality atoms

        Returns:
            CQ instance
        """
        atoms = frozenset(atoms)
        used = set()
        for atom in atoms:
            used |= atom.terms()
        return CQ(tuple(answer_vars), frozenset(used - set(answer_vars)), atoms)

    @property
    def arity(self) -> int:
        return len(self.answer_vars)

    @property
    def relational_atoms(self) -> Tuple[RelationalAtom, ...]:
        return tuple(sorted(a for a in self.atoms if isinstance(a, RelationalAtom)))

    @property
    def equality_atoms(self) -> Tuple[EqualityAtom, ...]:
        return tuple(sorted(a for a in self.atoms if isinstance(a, EqualityAtom)))

    @property
    def variables(self) -> FrozenSet[str]:
        return frozenset(self.answer_vars) | self.quantified_vars

    @property
    def relations(self) -> FrozenSet[str]:
        return frozenset(a.relation for a in self.relational_atoms)

    def sorted_atoms(self) -> List[Atom]:
        return sorted(self.atoms, key=_atom_key)

    def rename(self, mapping: Dict[str, str]) -> 'CQ':
        """Apply an injective variable renaming"""
        return CQ(
            tuple(mapping.get(v, v) for v in self.answer_vars),
            frozenset(mapping.get(v, v) for v in self.quantified_vars),
            frozenset(a.rename(mapping) for a in self.atoms),
        )

    def __str__(self) -> str:
        body = ', '.join(str(a) for a in self.sorted_atoms()) or 'true'
        return f"q({','.join(self.answer_vars)}) :- {body}."


@dataclass(frozen=True)
class UCQ:
    """Union of CQs sharing their arity; no disjuncts denotes the unsatisfiable query"""
    disjuncts: Tuple[CQ, ...]
    arity: int = -1

    def __post_init__(self):
        object.__setattr__(self, 'disjuncts', tuple(self.disjuncts))
        arity = self.arity
        if arity < 0:
            if not self.disjuncts:
                raise QueryError("An empty UCQ needs an explicit arity")
            arity = self.disjuncts[0].arity
            object.__setattr__(self, 'arity', arity)
        for cq in self.disjuncts:
            if cq.arity != arity:
                raise QueryError(f"Disjunct arity {cq.arity} differs from UCQ arity {arity}")

    @staticmethod
    def of(*disjuncts: CQ) -> 'UCQ':
        return UCQ(tuple(disjuncts))

    @staticmethod
    def unsatisfiable(arity: int) -> 'UCQ':
        return UCQ((), arity)

    @property
    def is_empty(self) -> bool:
        return not self.disjuncts

    @property
    def relations(self) -> FrozenSet[str]:
        names = frozenset()
        for cq in self.disjuncts:
            names |= cq.relations
        return names

    def __iter__(self) -> Iterator[CQ]:
        return iter(self.disjuncts)

    def __len__(self) -> int:
        return len(self.disjuncts)

    def __str__(self) -> str:
        return '\n'.join(str(cq) for cq in self.disjuncts)


def as_ucq(query: Union[CQ, UCQ]) -> UCQ:
    return query if isinstance(query, UCQ) else UCQ.of(query)


@dataclass(frozen=True)
class Database:
    """A set of facts; an ABox when the schema is a DL schema"""
    facts: FrozenSet[Fact] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, 'facts', frozenset(self.facts))

    @staticmethod
    def of(*facts: Fact) -> 'Database':
        return Database(frozenset(facts))

    @property
    def adom(self) -> FrozenSet[str]:
        constants = set()
        for fact in self.facts:
            constants.update(fact.args)
        return frozenset(constants)

    @property
    def relations(self) -> FrozenSet[str]:
        return frozenset(f.relation for f in self.facts)

    def sorted_facts(self) -> List[Fact]:
        return sorted(self.facts)

    def conforms_to(self, schema: Schema) -> List[str]:
        """Return a list of problems with respect to the schema"""
        problems = []
        for fact in self.sorted_facts():
            arity = schema.arity(fact.relation)
            if arity is None:
                problems.append(f"undeclared relation {fact.relation} in {fact}")
            elif arity != fact.arity:
                problems.append(f"arity mismatch in {fact}: expected {arity}")
        return problems

    def union(self, other: 'Database') -> 'Database':
        return Database(self.facts | other.facts)

    def rename(self, mapping: Dict[str, str]) -> 'Database':
        return Database(frozenset(f.rename(mapping) for f in self.facts))

    def __len__(self) -> int:
        return len(self.facts)

    def __iter__(self) -> Iterator[Fact]:
        return iter(self.sorted_facts())

    def __str__(self) -> str:
        return '{' + ', '.join(str(f) for f in self.sorted_facts()) + '}'


ABox = Database


def fresh_names(prefix: str, count: int, avoid: Iterable[str], start: int = 1) -> List[str]:
    """Generate count names prefix<i> that do not collide with avoid"""
    taken = set(avoid)
    names = []
    index = start
    while len(names) < count:
        candidate = f"{prefix}{index}"
        if candidate not in taken:
            names.append(candidate)
            taken.add(candidate)
        index += 1
    return names


def quotient(q: CQ) -> Tuple[CQ, Dict[str, str]]:
    """
    Merge the equality classes of a CQ

    Every variable is replaced by the least member of its class and the
    equality atoms are dropped.

    Args:
        q: CQ possibly containing equality atoms

    Returns:
        Tuple of (quotient CQ without equality atoms, variable -> representative)
    """
    uf = UnionFind((e.left, e.right) for e in q.equality_atoms)
    rep = uf.mapping(q.variables)
    atoms = frozenset(a.rename(rep) for a in q.relational_atoms)
    answer = tuple(rep[v] for v in q.answer_vars)
    used = set(answer)
    for atom in atoms:
        used |= atom.terms()
    return CQ(answer, frozenset(used - set(answer)), atoms), rep


def view_as_cq(d: Database, answer: Sequence[str]) -> CQ:
    """
    Read a database with an answer tuple as a CQ

    Constants become quantified variables, and fresh answer variables x1..xn
    are tied to the tuple by equality atoms.

    Raises:
        QueryError: If an answer constant is not in the active domain
    """
    adom = d.adom
    for constant in answer:
        if constant not in adom:
            raise QueryError(f"answer constant not in domain: {constant}")
    answer_vars = fresh_names('x', len(answer), adom)
    atoms = set(d.facts)
    atoms.update(EqualityAtom(x, a) for x, a in zip(answer_vars, answer))
    return CQ(tuple(answer_vars), adom, frozenset(atoms))


def view_as_database(q: CQ) -> Database:
    """Read variables as constants of the same name and drop equality atoms"""
    return Database(frozenset(q.relational_atoms))


def query_hypergraph(q: CQ) -> nx.Graph:
    """Graph on the variables of q where the variables of each relational atom form a clique"""
    graph = nx.Graph()
    graph.add_nodes_from(q.variables)
    for atom in q.relational_atoms:
        terms = list(dict.fromkeys(atom.args))
        graph.add_edges_from((terms[0], t) for t in terms[1:])
    return graph


def is_rooted(query: Union[CQ, UCQ]) -> bool:
    """True if every variable is reachable from an answer variable in the query hypergraph"""
    if isinstance(query, UCQ):
        return all(is_rooted(cq) for cq in query.disjuncts)
    graph = query_hypergraph(query)
    reached = set()
    for x in query.answer_vars:
        reached |= nx.node_connected_component(graph, x)
    return reached >= set(graph.nodes)


def query_radius(query: Union[CQ, UCQ]) -> int:
    """Largest variable count among the disjuncts (bounds match distance from answers)"""
    return max((len(cq.variables) for cq in as_ucq(query)), default=0)


def size(obj) -> int:
    """
    Number of symbols needed to write an object, names counting as one

    Supports CQ, UCQ, Database and any object with a size() method.
    """
    if isinstance(obj, UCQ):
        return sum(size(cq) for cq in obj.disjuncts) + max(len(obj.disjuncts) - 1, 0)
    if isinstance(obj, CQ):
        total = 1 + len(obj.answer_vars)
        for atom in obj.atoms:
            total += 1 + atom.arity if isinstance(atom, RelationalAtom) else 3
        return total
    if isinstance(obj, Database):
        return sum(1 + f.arity for f in obj.facts)
    return obj.size()
