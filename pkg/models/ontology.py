"""Description logic ontology models for obda-express"""

from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Iterator, List, Tuple, Union


class Dialect(Enum):
    """Supported ontology languages"""
    DLLITE = "dllite"
    EL = "el"
    ELHI = "elhi"

    @staticmethod
    def parse(text: str) -> 'Dialect':
        normalized = text.strip().lower().replace('-', '').replace('_', '')
        for dialect in Dialect:
            if dialect.value == normalized:
                return dialect
        raise ValueError(f"Unknown dialect: {text}")


@dataclass(frozen=True, order=True)
class Role:
    """A role name or its inverse r-"""
    name: str
    inverse: bool = False

    def inv(self) -> 'Role':
        return Role(self.name, not self.inverse)

    def __str__(self) -> str:
        return f"{self.name}-" if self.inverse else self.name


@dataclass(frozen=True, order=True)
class Top:
    def __str__(self) -> str:
        return "top"


@dataclass(frozen=True, order=True)
class Bottom:
    def __str__(self) -> str:
        return "bot"


@dataclass(frozen=True, order=True)
class ConceptName:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Conjunction:
    operands: Tuple['Concept', ...]

    def __str__(self) -> str:
        return ' & '.join(_wrap(c) for c in self.operands)


@dataclass(frozen=True, order=True)
class Existential:
    """exists r.C, with r possibly inverse"""
    role: Role
    filler: 'Concept'

    def __str__(self) -> str:
        return f"exists {self.role}.{_wrap(self.filler)}"


Concept = Union[Top, Bottom, ConceptName, Conjunction, Existential]

TOP = Top()
BOTTOM = Bottom()


def _wrap(concept: Concept) -> str:
    if isinstance(concept, Conjunction):
        return f"({concept})"
    return str(concept)


def conjuncts(concept: Concept) -> List[Concept]:
    """Flatten nested conjunctions"""
    if isinstance(concept, Conjunction):
        result = []
        for operand in concept.operands:
            result.extend(conjuncts(operand))
        return result
    return [concept]


def subconcepts(concept: Concept) -> Iterator[Concept]:
    yield concept
    if isinstance(concept, Conjunction):
        for operand in concept.operands:
            yield from subconcepts(operand)
    elif isinstance(concept, Existential):
        yield from subconcepts(concept.filler)


def concept_size(concept: Concept) -> int:
    if isinstance(concept, Conjunction):
        return sum(concept_size(c) for c in concept.operands) + len(concept.operands) - 1
    if isinstance(concept, Existential):
        return 2 + concept_size(concept.filler)
    return 1


def is_basic(concept: Concept) -> bool:
    """Concept name, top, bottom or exists r.top (r possibly inverse)"""
    if isinstance(concept, (ConceptName, Top, Bottom)):
        return True
    return isinstance(concept, Existential) and isinstance(concept.filler, Top)


@dataclass(frozen=True, order=True)
class ConceptInclusion:
    lhs: Concept
    rhs: Concept

    def __str__(self) -> str:
        return f"{self.lhs} [= {self.rhs}"


@dataclass(frozen=True, order=True)
class RoleInclusion:
    """r [= s or r [= s-; the left-hand side may be inverse after normalization"""
    lhs: Role
    rhs: Role

    def __str__(self) -> str:
        return f"{self.lhs} [= {self.rhs}"


@dataclass(frozen=True, order=True)
class RoleDisjointness:
    """r1 & ... & rn [= bot"""
    roles: Tuple[str, ...]

    def __str__(self) -> str:
        return f"{' & '.join(self.roles)} [= bot"


Axiom = Union[ConceptInclusion, RoleInclusion, RoleDisjointness]


@dataclass(frozen=True)
class Ontology:
    """A finite set of concept inclusions, role inclusions and role disjointness statements"""
    dialect: Dialect = Dialect.ELHI
    concept_inclusions: Tuple[ConceptInclusion, ...] = ()
    role_inclusions: Tuple[RoleInclusion, ...] = ()
    role_disjointness: Tuple[RoleDisjointness, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'concept_inclusions', tuple(self.concept_inclusions))
        object.__setattr__(self, 'role_inclusions', tuple(self.role_inclusions))
        object.__setattr__(self, 'role_disjointness', tuple(self.role_disjointness))

    @staticmethod
    def empty(dialect: Dialect = Dialect.ELHI) -> 'Ontology':
        return Ontology(dialect)

    @property
    def is_empty(self) -> bool:
        return not (self.concept_inclusions or self.role_inclusions or self.role_disjointness)

    @property
    def axioms(self) -> List[Axiom]:
        return [*self.concept_inclusions, *self.role_inclusions, *self.role_disjointness]

    def signature(self) -> Tuple[FrozenSet[str], FrozenSet[str]]:
        """
        Names used by the ontology

        Returns:
            Tuple of (concept names, role names)
        """
        concepts, roles = set(), set()
        for ci in self.concept_inclusions:
            for side in (ci.lhs, ci.rhs):
                for sub in subconcepts(side):
                    if isinstance(sub, ConceptName):
                        concepts.add(sub.name)
                    elif isinstance(sub, Existential):
                        roles.add(sub.role.name)
        for ri in self.role_inclusions:
            roles.update((ri.lhs.name, ri.rhs.name))
        for rd in self.role_disjointness:
            roles.update(rd.roles)
        return frozenset(concepts), frozenset(roles)

    def with_axioms(self, *axioms: Axiom) -> 'Ontology':
        """Return a copy extended by the given axioms"""
        cis = list(self.concept_inclusions)
        ris = list(self.role_inclusions)
        rds = list(self.role_disjointness)
        for axiom in axioms:
            if isinstance(axiom, ConceptInclusion):
                cis.append(axiom)
            elif isinstance(axiom, RoleInclusion):
                ris.append(axiom)
            else:
                rds.append(axiom)
        return Ontology(self.dialect, tuple(cis), tuple(ris), tuple(rds))

    def dialect_violations(self) -> List[str]:
        """Describe every statement that the declared dialect does not allow"""
        problems = []
        if self.dialect == Dialect.DLLITE:
            for ci in self.concept_inclusions:
                if not all(is_basic(c) for c in conjuncts(ci.lhs)) or not is_basic(ci.rhs):
                    problems.append(f"non-basic concept in DL-Lite inclusion: {ci}")
            for ri in self.role_inclusions:
                if ri.lhs.inverse:
                    problems.append(f"inverse on left of DL-Lite role inclusion: {ri}")
            return problems
        for ci in self.concept_inclusions:
            for side in (ci.lhs, ci.rhs):
                for sub in subconcepts(side):
                    if isinstance(sub, Bottom):
                        problems.append(f"bot not allowed in {self.dialect.value}: {ci}")
                    if (self.dialect == Dialect.EL and isinstance(sub, Existential)
                            and sub.role.inverse):
                        problems.append(f"inverse role in EL: {ci}")
        if self.dialect == Dialect.EL:
            problems.extend(f"role inclusion in EL: {ri}" for ri in self.role_inclusions)
        problems.extend(f"role disjointness in {self.dialect.value}: {rd}"
                        for rd in self.role_disjointness)
        for ri in self.role_inclusions:
            if ri.lhs.inverse:
                problems.append(f"inverse on left of role inclusion: {ri}")
        return problems

    def size(self) -> int:
        total = 0
        for ci in self.concept_inclusions:
            total += concept_size(ci.lhs) + concept_size(ci.rhs) + 1
        total += 3 * len(self.role_inclusions)
        for rd in self.role_disjointness:
            total += 2 * len(rd.roles)
        return total

    def __str__(self) -> str:
        return '\n'.join(str(a) for a in self.axioms)
