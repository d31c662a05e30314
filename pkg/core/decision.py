"""
Expressibility and verification

A candidate q_t realizes q_s iff q_s is contained in M-(q_r) (forward) and
M-(q_r) is contained in q_s (backward), where q_r is a rewriting of the OMQ
(O, sch(M), q_t). The forward check is exact; the backward check searches
for an ABox whose certain answers produce a source query that q_s does not
map into.
"""

import itertools
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from core.canonical import StructureIndex
from core.homomorphism import has_answer
from core.mapping_manager import apply_backward, apply_backward_query, apply_forward_query, apply_forward_ucq
from core.oracle import brute_force_realization_check, compare_on_database, default_max_domain
from core.reasoner import Reasoner
from core.rewriting import (
    RewritingBudget, effective_budget, enumerate_pseudo_tree_aboxes, frontier_closure,
    canonical_size_bound, iter_canonical_pairs, relevant_schema, required_budget,
)
from models.ontology import Dialect
from models.query import (
    CQ, UCQ, Database, Fact, Schema, as_ucq, fresh_names, is_rooted, quotient, view_as_cq,
    view_as_database,
)
from models.spec import ObdaSpec
from models.verdict import BoundsReport, Outcome, Verdict, Witness

logger = logging.getLogger(__name__)

REPAIR_PREFIX = '_g'
WITNESS_UNCONFIRMED = 'witness_unconfirmed'


class DecisionError(Exception):
    """Decision procedure errors"""
    pass


class InclusionStatus(Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNKNOWN = "unknown"


@dataclass
class InclusionResult:
    """Outcome of the backward inclusion check"""
    status: InclusionStatus
    bounds: BoundsReport
    witness: Optional[Witness] = None


@dataclass
class DecisionContext:
    """Everything a decision run shares between its phases"""
    spec: ObdaSpec
    source_query: UCQ
    target_query: UCQ
    budget: RewritingBudget
    reasoner: Reasoner
    consistent_only: bool = False
    jobs: int = 1
    prune_subsumed: bool = False
    notes: List[str] = field(default_factory=list)


Candidate = Tuple[Database, Tuple[str, ...]]


def _check_query(query: UCQ, schema: Schema, label: str):
    for cq in query.disjuncts:
        for atom in cq.relational_atoms:
            arity = schema.arity(atom.relation)
            if arity is None:
                raise DecisionError(f"{label} uses relation {atom.relation} outside its schema")
            if arity != atom.arity:
                raise DecisionError(f"{label} uses {atom.relation} with arity {atom.arity}, expected {arity}")


def _context(spec: ObdaSpec, source_query, target_query, budget: Optional[RewritingBudget],
             reasoner: Optional[Reasoner], **options) -> DecisionContext:
    q_s, q_t = as_ucq(source_query), as_ucq(target_query)
    if q_s.arity != q_t.arity:
        raise DecisionError(f"arity mismatch: source query has {q_s.arity}, target query has {q_t.arity}")
    _check_query(q_s, spec.source_schema, "source query")
    _check_query(q_t, spec.target_schema(), "target query")
    return DecisionContext(spec, q_s, q_t, budget or RewritingBudget(),
                           reasoner or Reasoner(spec.ontology), **options)


# witnesses

def _repairs(ctx: DecisionContext, database: Database, answer: Sequence[str]) -> Iterator[Database]:
    """Extend a database by one source fact carrying the answer constants it lacks"""
    missing = list(dict.fromkeys(a for a in answer if a not in database.adom))
    for name, arity in ctx.spec.source_schema.relations:
        if arity < len(missing) or (not missing and arity == 0):
            continue
        filler = fresh_names(REPAIR_PREFIX, arity - len(missing), database.adom | set(answer))
        yield Database(database.facts | {Fact(name, tuple(missing + filler))})


def confirm_witness(ctx: DecisionContext, database: Database, answer: Sequence[str]) -> Optional[Witness]:
    """
    Re-validate a candidate counterexample end to end

    If the answer constants do not all occur in the database, single-fact
    repairs are tried; failing that, a bounded oracle search.

    Returns:
        Validated witness, or None if none could be confirmed
    """
    answer = tuple(answer)
    q_s, q_t = ctx.source_query, ctx.target_query
    if set(answer) <= database.adom:
        witness = compare_on_database(ctx.spec, q_s, q_t, database, ctx.reasoner, ctx.consistent_only, answer)
        if witness is not None:
            return witness
    else:
        for repaired in _repairs(ctx, database, answer):
            witness = compare_on_database(ctx.spec, q_s, q_t, repaired, ctx.reasoner, ctx.consistent_only, answer)
            if witness is not None:
                return witness
    logger.warning("candidate witness %s did not re-validate; trying the oracle", database)
    max_domain = max(default_max_domain(q_s), len(database.adom | set(answer)))
    result = brute_force_realization_check(ctx.spec, q_s, q_t, max_domain,
                                           consistent_only=ctx.consistent_only, reasoner=ctx.reasoner)
    return result.counterexample


def _as_candidate(p: CQ) -> Candidate:
    reduced, _ = quotient(p)
    return view_as_database(reduced), reduced.answer_vars


# forward direction

def _forward_failure(ctx: DecisionContext) -> Optional[Candidate]:
    for cq in ctx.source_query.disjuncts:
        image = apply_forward_query(ctx.spec.mappings, cq)
        reduced, _ = quotient(image)
        abox, answer = view_as_database(reduced), reduced.answer_vars
        if not ctx.reasoner.entails_tuple(ctx.target_query, abox, answer):
            logger.debug("forward inclusion fails on disjunct %s", cq)
            return _as_candidate(cq)
    return None


def forward_inclusion(spec: ObdaSpec, source_query: Union[CQ, UCQ], target_query: Union[CQ, UCQ],
                      reasoner: Optional[Reasoner] = None) -> bool:
    """
    Decide whether q_s is contained in M-(q_r) for a rewriting q_r of (O, sch(M), q_t)

    Uses that q is contained in M-(r) iff M(q) is contained in r: each
    disjunct of q_s is mapped forward, read as an ABox, and its answer tuple
    tested for being certain.
    """
    ctx = _context(spec, source_query, target_query, None, reasoner)
    return _forward_failure(ctx) is None


# backward direction

def _empty_ontology_candidates(ctx: DecisionContext, report: BoundsReport) -> Iterator[Candidate]:
    for cq in ctx.target_query.disjuncts:
        expansion = apply_backward_query(ctx.spec.mappings, cq, ctx.budget.max_choices)
        for p in expansion:
            yield _as_candidate(p)
        report.truncated = report.truncated or expansion.truncated


def _abox_candidates(ctx: DecisionContext, pairs: Iterator[Candidate], report: BoundsReport) -> Iterator[Candidate]:
    for abox, answer in pairs:
        expansion = apply_backward(ctx.spec.mappings, abox, answer, ctx.budget.max_choices)
        for database in expansion.databases():
            yield database, answer
        report.truncated = report.truncated or expansion.truncated


def _dllite_pairs(ctx: DecisionContext, report: BoundsReport) -> Iterator[Candidate]:
    schema = relevant_schema(ctx.spec.ontology, ctx.spec.mapping_schema(), ctx.target_query)
    required = canonical_size_bound(ctx.spec.ontology, ctx.target_query)
    bound = required if ctx.budget.max_abox_size is None else ctx.budget.max_abox_size
    report.required = {'max_abox_size': required}
    report.effective = {'max_abox_size': bound}
    if bound < required:
        ctx.notes.append(f"canonical size bound {bound} is below the required {required}")
    for abox, answer in iter_canonical_pairs(ctx.reasoner, schema, ctx.target_query, bound):
        if ctx.consistent_only and not ctx.reasoner.is_consistent(abox):
            continue
        yield abox, answer


def _pseudo_tree_pairs(ctx: DecisionContext, budget: RewritingBudget, closure: bool) -> Iterator[Candidate]:
    mapping_schema = ctx.spec.mapping_schema()
    schema = relevant_schema(ctx.spec.ontology, mapping_schema, ctx.target_query)
    seen = StructureIndex()
    for candidate, tuples in enumerate_pseudo_tree_aboxes(schema, budget, ctx.target_query.arity):
        if closure and budget.max_depth > 0:
            abox = frontier_closure(candidate, budget.max_depth, schema)
        else:
            abox = candidate.abox
        if ctx.consistent_only and not ctx.reasoner.is_consistent(abox):
            continue
        certain = ctx.reasoner.certain_answers(ctx.target_query, abox)
        for answer in tuples:
            if answer in certain and seen.add(abox, answer):
                yield abox, answer


def _holds(ctx: DecisionContext, candidate: Candidate) -> bool:
    database, answer = candidate
    return has_answer(ctx.source_query, database, answer)


def _search(ctx: DecisionContext, candidates: Iterator[Candidate], report: BoundsReport) -> Optional[Candidate]:
    """
    Return the first candidate (in stream order) into which q_s does not map

    With jobs > 1 candidates are checked in windows on a thread pool; a
    cancellation event stops the remaining checks of a window once a failure
    is known, and the earliest failure of the window wins.
    """
    passed: List[CQ] = []

    def subsumed(candidate: Candidate) -> bool:
        if not ctx.prune_subsumed:
            return False
        database, answer = candidate
        return any(has_answer(p, database, answer) for p in passed)

    def remember(candidate: Candidate):
        if ctx.prune_subsumed and set(candidate[1]) <= candidate[0].adom:
            passed.append(view_as_cq(*candidate))

    if ctx.jobs <= 1:
        for candidate in candidates:
            report.candidates_checked += 1
            if subsumed(candidate):
                continue
            if not _holds(ctx, candidate):
                return candidate
            remember(candidate)
        return None

    cancel = threading.Event()

    def check(candidate: Candidate) -> Optional[bool]:
        if cancel.is_set():
            return None
        result = _holds(ctx, candidate)
        if not result:
            cancel.set()
        return result

    with ThreadPoolExecutor(max_workers=ctx.jobs) as pool:
        while True:
            window = list(itertools.islice(candidates, ctx.jobs * 4))
            if not window:
                return None
            window = [c for c in window if not subsumed(c)]
            outcomes = list(pool.map(check, window))
            for candidate, outcome in zip(window, outcomes):
                report.candidates_checked += 1
                if outcome is False:
                    return candidate
                if outcome is None:
                    # cancelled after an earlier failure in this window
                    if not _holds(ctx, candidate):
                        return candidate
                remember(candidate)


def _strategy(ctx: DecisionContext) -> str:
    if ctx.spec.ontology.is_empty:
        return 'empty-ontology'
    if ctx.spec.ontology.dialect == Dialect.DLLITE:
        return 'dllite-canonical'
    if is_rooted(ctx.source_query):
        return 'rooted-pseudo-tree'
    return 'unrooted-bounded'


def _backward(ctx: DecisionContext) -> InclusionResult:
    strategy = _strategy(ctx)
    report = BoundsReport(strategy=strategy, exhaustive=False)
    if strategy == 'empty-ontology':
        candidates = _empty_ontology_candidates(ctx, report)
        complete = True
    elif strategy == 'dllite-canonical':
        candidates = _abox_candidates(ctx, _dllite_pairs(ctx, report), report)
        complete = ctx.budget.exhaustive
    else:
        required, theoretical = required_budget(ctx.spec, ctx.source_query, ctx.target_query)
        report.required = required.to_dict()
        report.theoretical_bound = theoretical
        if strategy == 'rooted-pseudo-tree':
            budget = effective_budget(ctx.budget, required)
            complete = budget.covers(required) or ctx.budget.exhaustive
        else:
            budget = ctx.budget
            if budget.max_abox_size is None:
                budget = replace(budget, max_abox_size=required.max_abox_size)
            complete = ctx.budget.exhaustive
        report.effective = budget.to_dict()
        candidates = _abox_candidates(
            ctx, _pseudo_tree_pairs(ctx, budget, strategy == 'rooted-pseudo-tree'), report)

    failure = _search(ctx, candidates, report)
    if failure is not None:
        witness = confirm_witness(ctx, *failure)
        report.exhaustive = complete and not report.truncated
        if witness is None:
            report.notes = tuple(ctx.notes + [WITNESS_UNCONFIRMED])
            return InclusionResult(InclusionStatus.UNKNOWN, report)
        report.notes = tuple(ctx.notes)
        return InclusionResult(InclusionStatus.FAILS, report, witness)

    report.exhaustive = complete and not report.truncated
    report.notes = tuple(ctx.notes)
    logger.debug("backward search checked %d candidates (%s)", report.candidates_checked, strategy)
    status = InclusionStatus.HOLDS if report.exhaustive else InclusionStatus.UNKNOWN
    return InclusionResult(status, report)


def backward_inclusion(spec: ObdaSpec, source_query: Union[CQ, UCQ], target_query: Union[CQ, UCQ],
                       budget: Optional[RewritingBudget] = None, *, reasoner: Optional[Reasoner] = None,
                       consistent_only: bool = False, jobs: int = 1,
                       prune_subsumed: bool = False) -> InclusionResult:
    """
    Decide whether M-(q_r) is contained in q_s

    Args:
        spec: OBDA specification
        source_query: q_s over the source schema
        target_query: q_t over sch(M)
        budget: Search limits; defaults to RewritingBudget()
        consistent_only: Ignore ABoxes that are inconsistent with the ontology
        jobs: Worker threads for the candidate checks
        prune_subsumed: Skip candidates contained in one that already passed

    Returns:
        InclusionResult; FAILS always carries a validated witness

    Raises:
        DecisionError: On schema or arity violations
    """
    ctx = _context(spec, source_query, target_query, budget, reasoner, consistent_only=consistent_only,
                   jobs=jobs, prune_subsumed=prune_subsumed)
    return _backward(ctx)


def _verdict(ctx: DecisionContext, check_forward: bool, realization: Optional[UCQ]) -> Verdict:
    if check_forward:
        failure = _forward_failure(ctx)
        if failure is not None:
            witness = confirm_witness(ctx, *failure)
            report = BoundsReport(strategy='forward', exhaustive=True)
            if witness is None:
                report.notes = (WITNESS_UNCONFIRMED,)
                return Verdict(Outcome.UNKNOWN, bounds=report)
            return Verdict(Outcome.NO, witness=witness, bounds=report)
    result = _backward(ctx)
    if result.status == InclusionStatus.HOLDS:
        return Verdict(Outcome.YES, realization=realization, bounds=result.bounds)
    if result.status == InclusionStatus.FAILS:
        return Verdict(Outcome.NO, witness=result.witness, bounds=result.bounds)
    return Verdict(Outcome.UNKNOWN, bounds=result.bounds)


def verify(spec: ObdaSpec, source_query: Union[CQ, UCQ], target_query: Union[CQ, UCQ],
           budget: Optional[RewritingBudget] = None, *, reasoner: Optional[Reasoner] = None,
           consistent_only: bool = False, jobs: int = 1, prune_subsumed: bool = False) -> Verdict:
    """
    Decide whether q_t is a realization of q_s

    Returns:
        Verdict: YES if both inclusions hold, NO with a validated witness if
        either fails, UNKNOWN if the budget ran out first

    Raises:
        DecisionError: On arity mismatch or schema violations
    """
    ctx = _context(spec, source_query, target_query, budget, reasoner, consistent_only=consistent_only,
                   jobs=jobs, prune_subsumed=prune_subsumed)
    return _verdict(ctx, True, ctx.target_query)


def expressible(spec: ObdaSpec, source_query: Union[CQ, UCQ], budget: Optional[RewritingBudget] = None, *,
                reasoner: Optional[Reasoner] = None, consistent_only: bool = False, jobs: int = 1,
                prune_subsumed: bool = False) -> Verdict:
    """
    Decide whether q_s has a realization; if so, M(q_s) is one

    The forward inclusion always holds for M(q_s), so only the backward
    inclusion is searched.
    """
    q_s = as_ucq(source_query)
    _check_query(q_s, spec.source_schema, "source query")
    realization = apply_forward_ucq(spec.mappings, q_s)
    ctx = _context(spec, q_s, realization, budget, reasoner, consistent_only=consistent_only,
                   jobs=jobs, prune_subsumed=prune_subsumed)
    return _verdict(ctx, False, realization)
