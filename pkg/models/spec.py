"""OBDA specification data models for obda-express"""

from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Tuple

from models.ontology import Ontology
from models.query import RelationalAtom, Schema


class SpecValidationError(Exception):
    """Raised when a specification violates its invariants"""

    def __init__(self, diagnostics: List['Diagnostic']):
        self.diagnostics = diagnostics
        super().__init__('; '.join(str(d) for d in diagnostics))


@dataclass(frozen=True)
class SourceLocation:
    """1-based position in a text file"""
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    """A violated invariant and where it was found"""
    message: str
    where: str = ''
    location: Optional[SourceLocation] = None

    def __str__(self) -> str:
        prefix = f"{self.location}: " if self.location else ''
        suffix = f" (in {self.where})" if self.where else ''
        return f"{prefix}{self.message}{suffix}"


@dataclass(frozen=True, order=True)
class GavMapping:
    """phi(x, y) -> psi(x): a CQ body over the source schema and a single target atom"""
    body: Tuple[RelationalAtom, ...]
    head: RelationalAtom
    location: Optional[SourceLocation] = field(default=None, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, 'body', tuple(sorted(set(self.body))))

    @property
    def head_vars(self) -> FrozenSet[str]:
        return self.head.terms()

    @property
    def body_vars(self) -> FrozenSet[str]:
        terms = set()
        for atom in self.body:
            terms |= atom.terms()
        return frozenset(terms)

    @property
    def existential_vars(self) -> FrozenSet[str]:
        return self.body_vars - self.head_vars

    def size(self) -> int:
        return sum(1 + a.arity for a in self.body) + 1 + self.head.arity

    def __str__(self) -> str:
        return f"{', '.join(str(a) for a in self.body)} -> {self.head}"


@dataclass(frozen=True)
class ObdaSpec:
    """The triple (ontology, mappings, source schema)"""
    ontology: Ontology
    mappings: Tuple[GavMapping, ...]
    source_schema: Schema

    def __post_init__(self):
        object.__setattr__(self, 'mappings', tuple(self.mappings))

    def mapping_schema(self) -> Schema:
        """sch(M): the head relations of the mappings"""
        arities = {}
        for mapping in self.mappings:
            arities.setdefault(mapping.head.relation, mapping.head.arity)
        return Schema.from_dict(arities)

    def target_schema(self) -> Schema:
        """sch(M) together with the ontology signature, as a DL schema"""
        concepts, roles = self.ontology.signature()
        arities = {name: 1 for name in concepts}
        arities.update({name: 2 for name in roles})
        arities.update(self.mapping_schema().to_dict())
        return Schema.from_dict(arities)

    def with_mappings(self, *mappings: GavMapping) -> 'ObdaSpec':
        return ObdaSpec(self.ontology, self.mappings + tuple(mappings), self.source_schema)

    def with_ontology(self, ontology: Ontology) -> 'ObdaSpec':
        return ObdaSpec(ontology, self.mappings, self.source_schema)

    def size(self) -> int:
        return self.ontology.size() + sum(m.size() for m in self.mappings)


def validate_spec(spec: ObdaSpec) -> List[Diagnostic]:
    """
    Check all invariants of an OBDA specification

    Args:
        spec: Specification to check

    Returns:
        List of diagnostics, empty if the specification is well-formed
    """
    diagnostics = []
    schema = spec.source_schema
    head_arities = {}

    for mapping in spec.mappings:
        where = str(mapping)
        if not mapping.body:
            diagnostics.append(Diagnostic("mapping with empty body", where, mapping.location))
        for atom in mapping.body:
            arity = schema.arity(atom.relation)
            if arity is None:
                diagnostics.append(Diagnostic(
                    f"relation {atom.relation} not in source schema", where, mapping.location))
            elif arity != atom.arity:
                diagnostics.append(Diagnostic(
                    f"arity mismatch for {atom.relation}: expected {arity}, got {atom.arity}",
                    where, mapping.location))
        missing = mapping.head_vars - mapping.body_vars
        if missing:
            diagnostics.append(Diagnostic(
                f"head var not in body: {', '.join(sorted(missing))}", where, mapping.location))
        if mapping.head.arity not in (1, 2):
            diagnostics.append(Diagnostic(
                f"head relation {mapping.head.relation} must be unary or binary",
                where, mapping.location))
        previous = head_arities.setdefault(mapping.head.relation, mapping.head.arity)
        if previous != mapping.head.arity:
            diagnostics.append(Diagnostic(
                f"head relation {mapping.head.relation} used with arities {previous} "
                f"and {mapping.head.arity}", where, mapping.location))

    for problem in spec.ontology.dialect_violations():
        diagnostics.append(Diagnostic(problem, 'ontology'))

    concepts, roles = spec.ontology.signature()
    for name in sorted(concepts & roles):
        diagnostics.append(Diagnostic(f"name {name} used as both concept and role", 'ontology'))
    for name in sorted(concepts):
        if head_arities.get(name, 1) != 1:
            diagnostics.append(Diagnostic(f"concept name {name} is a binary mapping head", 'ontology'))
    for name in sorted(roles):
        if head_arities.get(name, 2) != 2:
            diagnostics.append(Diagnostic(f"role name {name} is a unary mapping head", 'ontology'))

    return diagnostics
