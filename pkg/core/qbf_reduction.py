"""
Hard instances from forall-exists 3CNF formulas

The generated specification has an empty ontology and a Boolean source
query that is expressible exactly when the formula is true.
"""

import itertools
import logging
from typing import Dict, List, Sequence, Tuple

from models.ontology import Ontology
from models.qbf import Literal, QbfFormula
from models.query import CQ, UCQ, RelationalAtom, Schema
from models.spec import GavMapping, ObdaSpec

logger = logging.getLogger(__name__)

Z_RELATION = 'Z'
POSITIVE = 'p'
NEGATIVE = 'n'
Z0, Z1 = 'z0', 'z1'


class QbfError(Exception):
    """QBF reduction errors"""
    pass


def _token(literal: Literal) -> str:
    return literal.var if literal.positive else f"n{literal.var}"


def relation_name(tokens: Sequence[str]) -> str:
    return 'C_' + '_'.join(tokens)


def _open_positions(tokens: Sequence[str]) -> List[str]:
    """The n/p tokens in order; their count is the arity"""
    return [t for t in tokens if t in (POSITIVE, NEGATIVE)]


def clause_atom(phi: QbfFormula, clause: Sequence[Literal]) -> RelationalAtom:
    tokens, args = [], []
    for literal in clause:
        if phi.is_universal(literal.var):
            tokens.append(_token(literal))
        else:
            tokens.append(POSITIVE if literal.positive else NEGATIVE)
            args.append(literal.var)
    return RelationalAtom(relation_name(tokens), tuple(args))


def _all_token_triples(phi: QbfFormula) -> List[Tuple[str, ...]]:
    universe = [POSITIVE, NEGATIVE]
    for var in phi.universal_vars:
        universe.extend((var, f"n{var}"))
    return list(itertools.product(universe, repeat=3))


def _clause_token_triples(phi: QbfFormula) -> List[Tuple[str, ...]]:
    found = {}
    for clause in phi.clauses:
        tokens = tuple(_token(l) if phi.is_universal(l.var) else (POSITIVE if l.positive else NEGATIVE)
                       for l in clause)
        found[tokens] = None
    return list(found)


def template_body(triples: Sequence[Tuple[str, ...]], var: str, value: bool) -> List[RelationalAtom]:
    """
    Template part present when the universal variable var takes value

    An atom C_u(v) is included if the literal made true by the value occurs
    in u, or some open position holding z0 is n, or some open position
    holding z1 is p. All four Z atoms over {z0, z1} are added.
    """
    satisfied = var if value else f"n{var}"
    atoms = []
    for tokens in triples:
        open_positions = _open_positions(tokens)
        for args in itertools.product((Z0, Z1), repeat=len(open_positions)):
            if (satisfied in tokens
                    or any(a == Z0 and u == NEGATIVE for a, u in zip(args, open_positions))
                    or any(a == Z1 and u == POSITIVE for a, u in zip(args, open_positions))):
                atoms.append(RelationalAtom(relation_name(tokens), args))
    atoms.extend(RelationalAtom(Z_RELATION, pair) for pair in itertools.product((Z0, Z1), repeat=2))
    return atoms


def qbf_to_instance(phi: QbfFormula, full_schema: bool = False) -> Tuple[ObdaSpec, UCQ]:
    """
    Build the specification and the Boolean source query for a formula

    Args:
        phi: forall-exists formula with a 3CNF matrix
        full_schema: Generate every C relation over the token universe rather
            than only those occurring in clauses

    Returns:
        (ObdaSpec with empty ontology, Boolean UCQ q_s)

    Raises:
        QbfError: If the formula violates the reduction preconditions
    """
    problems = phi.problems()
    if problems:
        raise QbfError(f"formula not reducible: {'; '.join(problems)}")

    triples = _all_token_triples(phi) if full_schema else _clause_token_triples(phi)
    arities: Dict[str, int] = {relation_name(t): len(_open_positions(t)) for t in triples}
    arities[Z_RELATION] = 2
    schema = Schema.from_dict(arities)

    y0, y1 = phi.existential_vars[0], phi.existential_vars[1]
    atoms = [clause_atom(phi, clause) for clause in phi.clauses]
    atoms.append(RelationalAtom(Z_RELATION, (y0, y1)))
    source_query = CQ.create((), atoms)

    renaming = {var: f"v_{var}" for var in phi.existential_vars}
    renaming.update({y0: Z0, y1: Z1})
    primed = [atom.rename(renaming) for atom in atoms]

    mappings = []
    for var in phi.universal_vars:
        head = RelationalAtom(f"r_{var}", (Z0, Z1))
        mappings.append(GavMapping(tuple(primed), head))
        mappings.append(GavMapping(tuple(template_body(triples, var, False)), head))
        mappings.append(GavMapping(tuple(template_body(triples, var, True)), head))
    logger.debug("reduction: %d relations, %d mappings", len(schema), len(mappings))
    return ObdaSpec(Ontology.empty(), tuple(mappings), schema), UCQ.of(source_query)


def _satisfied(clauses: Sequence[Sequence[Literal]], assignment: Dict[str, bool]) -> bool:
    return all(any(assignment[l.var] == l.positive for l in clause) for clause in clauses)


def qbf_brute_eval(phi: QbfFormula) -> bool:
    """Truth of forall x exists y psi by trying every assignment"""
    for outer in itertools.product((False, True), repeat=len(phi.universal_vars)):
        assignment = dict(zip(phi.universal_vars, outer))
        found = False
        for inner in itertools.product((False, True), repeat=len(phi.existential_vars)):
            assignment.update(zip(phi.existential_vars, inner))
            if _satisfied(phi.clauses, assignment):
                found = True
                break
        if not found:
            return False
    return True
