"""
Brute-force realization oracle and random instance generation

The oracle checks a candidate realization database by database and can
only refute; random instances feed the property suites.
"""

import logging
import random
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

from core.canonical import enumerate_databases
from core.homomorphism import evaluate
from core.mapping_manager import apply_forward_db
from core.reasoner import Reasoner
from models.ontology import (
    TOP, ConceptInclusion, ConceptName, Conjunction, Dialect, Existential, Ontology, Role,
    RoleDisjointness, RoleInclusion,
)
from models.query import CQ, UCQ, Database, RelationalAtom, Schema, as_ucq, is_rooted
from models.spec import GavMapping, ObdaSpec, validate_spec
from models.verdict import Witness

logger = logging.getLogger(__name__)


class OracleError(Exception):
    """Oracle and generator errors"""
    pass


@dataclass(frozen=True)
class OracleResult:
    """Either a counterexample or agreement on every database within the limits"""
    max_domain: int
    max_facts: int
    databases_checked: int
    counterexample: Optional[Witness] = None

    @property
    def consistent(self) -> bool:
        return self.counterexample is None

    def __str__(self) -> str:
        if self.counterexample is None:
            return f"consistent up to {self.max_domain} constants and {self.max_facts} facts"
        return f"counterexample {self.counterexample.database} at {self.counterexample.answer}"


def compare_on_database(spec: ObdaSpec, source_query: Union[CQ, UCQ], target_query: Union[CQ, UCQ],
                        database: Database, reasoner: Optional[Reasoner] = None,
                        consistent_only: bool = False,
                        prefer: Optional[Sequence[str]] = None) -> Optional[Witness]:
    """
    Compare ans_{q_s}(D) with the certain answers of q_t over M(D)

    Both sides range over adom(D). A tuple named by prefer is reported if it
    is one of the disagreements.

    Returns:
        Witness for the first disagreement, or None if the answers coincide
        (or M(D) is inconsistent and consistent_only is set)
    """
    reasoner = reasoner or Reasoner(spec.ontology)
    abox = apply_forward_db(spec.mappings, database)
    if consistent_only and not reasoner.is_consistent(abox):
        return None
    source = evaluate(source_query, database)
    certain = reasoner.certain_answers(target_query, abox, database.adom)
    if source == certain:
        return None
    disagreements = sorted(source ^ certain)
    chosen = tuple(prefer) if prefer is not None and tuple(prefer) in disagreements else disagreements[0]
    return Witness(database, chosen, source, certain, validated=True)


def default_max_facts(source_query: Union[CQ, UCQ]) -> int:
    return max((len(cq.relational_atoms) for cq in as_ucq(source_query)), default=0) + 1


def default_max_domain(source_query: Union[CQ, UCQ]) -> int:
    return max((len(cq.variables) for cq in as_ucq(source_query)), default=0) + 2


def brute_force_realization_check(spec: ObdaSpec, source_query: Union[CQ, UCQ],
                                  target_query: Union[CQ, UCQ], max_domain: int,
                                  max_facts: Optional[int] = None, consistent_only: bool = False,
                                  reasoner: Optional[Reasoner] = None) -> OracleResult:
    """
    Search all small source databases for a disagreement

    Args:
        spec: OBDA specification
        source_query: q_s over the source schema
        target_query: q_t over sch(M)
        max_domain: Largest active domain to try
        max_facts: Largest number of facts; defaults to the largest disjunct of q_s plus one

    Returns:
        OracleResult; a counterexample is definitive, agreement is not a proof

    Raises:
        OracleError: If max_domain is not positive
    """
    if max_domain < 1:
        raise OracleError(f"max_domain must be at least 1, got {max_domain}")
    if max_facts is None:
        max_facts = default_max_facts(source_query)
    reasoner = reasoner or Reasoner(spec.ontology)
    checked = 0
    for database in enumerate_databases(spec.source_schema, max_domain, max_facts):
        checked += 1
        witness = compare_on_database(spec, source_query, target_query, database, reasoner, consistent_only)
        if witness is not None:
            logger.info("oracle found a counterexample after %d databases", checked)
            return OracleResult(max_domain, max_facts, checked, witness)
    logger.debug("oracle checked %d databases", checked)
    return OracleResult(max_domain, max_facts, checked)


@dataclass(frozen=True)
class Profile:
    """Size limits for random instances"""
    max_relations: int = 3
    max_arity: int = 2
    max_mappings: int = 4
    max_cis: int = 3
    max_query_vars: int = 4
    max_query_atoms: int = 3
    concept_names: Tuple[str, ...] = ('A', 'B', 'C')
    role_names: Tuple[str, ...] = ('r', 's')
    dialect: Dialect = Dialect.ELHI
    rooted: bool = False
    max_answer_vars: int = 1

    @staticmethod
    def preset(name: str) -> 'Profile':
        presets = {
            'tiny': Profile(max_relations=2, max_mappings=3, max_cis=2, max_query_vars=3,
                            max_query_atoms=2),
            'rooted': Profile(rooted=True, max_query_vars=3, max_query_atoms=2),
            'unrooted': Profile(rooted=False, max_answer_vars=0),
        }
        if name not in presets:
            raise OracleError(f"unknown profile {name}; expected one of {sorted(presets)}")
        return presets[name]


def _random_atom(rng: random.Random, schema: Schema, variables: Sequence[str]) -> RelationalAtom:
    name, arity = rng.choice(schema.relations)
    return RelationalAtom(name, tuple(rng.choice(variables) for _ in range(arity)))


def _random_role(rng: random.Random, profile: Profile, allow_inverse: bool) -> Role:
    return Role(rng.choice(profile.role_names), allow_inverse and rng.random() < 0.3)


def _random_concept_name(rng: random.Random, profile: Profile) -> ConceptName:
    return ConceptName(rng.choice(profile.concept_names))


def random_ontology(rng: random.Random, profile: Profile, count: Optional[int] = None) -> Ontology:
    """Dialect-respecting ontology with up to max_cis statements"""
    count = rng.randint(0, profile.max_cis) if count is None else count
    dialect = profile.dialect
    inverse = dialect != Dialect.EL
    axioms = []
    for _ in range(count):
        kind = rng.randrange(5 if dialect != Dialect.EL else 4)
        a, b = _random_concept_name(rng, profile), _random_concept_name(rng, profile)
        if dialect == Dialect.DLLITE:
            basic = [a, Existential(_random_role(rng, profile, True), TOP)]
            if kind == 0:
                axioms.append(ConceptInclusion(rng.choice(basic), b))
            elif kind == 1:
                axioms.append(ConceptInclusion(a, Existential(_random_role(rng, profile, True), TOP)))
            elif kind == 2:
                axioms.append(ConceptInclusion(Conjunction((a, rng.choice(basic))), b))
            elif kind == 3:
                r = _random_role(rng, profile, False)
                axioms.append(RoleInclusion(r, _random_role(rng, profile, True)))
            else:
                names = sorted(set(rng.sample(profile.role_names, min(2, len(profile.role_names)))))
                axioms.append(RoleDisjointness(tuple(names)))
            continue
        if kind == 0:
            axioms.append(ConceptInclusion(a, b))
        elif kind == 1:
            axioms.append(ConceptInclusion(a, Existential(_random_role(rng, profile, inverse), b)))
        elif kind == 2:
            axioms.append(ConceptInclusion(Existential(_random_role(rng, profile, inverse), a), b))
        elif kind == 3:
            c = _random_concept_name(rng, profile)
            axioms.append(ConceptInclusion(Conjunction((a, c)), b))
        else:
            axioms.append(RoleInclusion(_random_role(rng, profile, False), _random_role(rng, profile, True)))
    return Ontology(dialect).with_axioms(*axioms)


def _random_cq(rng: random.Random, schema: Schema, profile: Profile, arity: int) -> CQ:
    for _ in range(50):
        variables = [f"v{i}" for i in range(rng.randint(max(arity, 1), profile.max_query_vars))]
        atoms = {_random_atom(rng, schema, variables) for _ in range(rng.randint(1, profile.max_query_atoms))}
        used = sorted({v for atom in atoms for v in atom.args})
        if len(used) < arity:
            continue
        cq = CQ.create(tuple(rng.sample(used, arity)), atoms)
        if profile.rooted and not is_rooted(cq):
            continue
        return cq
    raise OracleError("could not generate a query within the profile limits")


def random_instance(seed: int, profile: Optional[Profile] = None) -> Tuple[ObdaSpec, UCQ]:
    """
    Generate a valid specification and a source query, deterministically in seed

    Returns:
        (ObdaSpec passing validate_spec, single-disjunct UCQ over the source schema)
    """
    profile = profile or Profile()
    rng = random.Random(seed)
    relations = {f"S{i}": rng.randint(1, profile.max_arity)
                 for i in range(1, rng.randint(1, profile.max_relations) + 1)}
    source = Schema.from_dict(relations)
    mappings = []
    for _ in range(rng.randint(1, profile.max_mappings)):
        if rng.random() < 0.5:
            head = RelationalAtom(rng.choice(profile.concept_names), ('x',))
        else:
            head = RelationalAtom(rng.choice(profile.role_names), ('x', 'y'))
        variables = list(head.args) + ['z']
        body = {_random_atom(rng, source, variables) for _ in range(rng.randint(1, 2))}
        covered = {v for atom in body for v in atom.args}
        for var in head.args:
            if var not in covered:
                name, arity = rng.choice(source.relations)
                body.add(RelationalAtom(name, tuple([var] * arity)))
        mappings.append(GavMapping(tuple(body), head))
    spec = ObdaSpec(random_ontology(rng, profile), tuple(dict.fromkeys(mappings)), source)
    problems = validate_spec(spec)
    if problems:
        raise OracleError(f"generated an invalid specification: {problems[0]}")
    low = 1 if profile.rooted else 0
    arity = rng.randint(low, max(profile.max_answer_vars, low))
    return spec, UCQ.of(_random_cq(rng, source, profile, arity))


def weaken(spec: ObdaSpec, rng: random.Random) -> ObdaSpec:
    """Drop a random subset of the ontology statements (O1 contains O2)"""
    kept = [axiom for axiom in spec.ontology.axioms if rng.random() < 0.5]
    return spec.with_ontology(Ontology(spec.ontology.dialect).with_axioms(*kept))
