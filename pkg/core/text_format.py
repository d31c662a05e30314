"""
Text format for specifications, queries, databases and QBF instances

Parsing goes through a lark LALR grammar; rendering is deterministic so that
rendered output reparses to an isomorphic object.
"""

import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple, Union

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken

from models.ontology import (
    BOTTOM, TOP, ConceptInclusion, ConceptName, Conjunction, Dialect, Existential, Ontology, Role,
    RoleDisjointness, RoleInclusion,
)
from models.qbf import Literal, QbfFormula
from models.query import CQ, UCQ, Database, EqualityAtom, QueryError, RelationalAtom, Schema
from models.spec import GavMapping, ObdaSpec, SourceLocation, SpecValidationError, validate_spec
from models.verdict import Verdict

logger = logging.getLogger(__name__)


class ParseError(Exception):
    """Syntax or well-formedness error with its position in the input"""

    def __init__(self, message: str, location: Optional[SourceLocation] = None,
                 expected: Tuple[str, ...] = ()):
        self.message = message
        self.location = location
        self.expected = tuple(sorted(expected))
        text = f"{location}: {message}" if location else message
        if self.expected:
            text += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(text)


GRAMMAR = r"""
    spec: block*
    ?block: schema_block | mappings_block | ontology_block

    schema_block: "schema" "{" (rel_decl ","?)* "}"
    rel_decl: NAME "/" INT

    mappings_block: "mappings" "{" (mapping ";"?)* "}"
    mapping: atom_list "->" atom
    atom_list: atom ("," atom)*
    atom: NAME "(" [term ("," term)*] ")"
    ?term: NAME | INT

    ontology_block: "ontology" NAME "{" (axiom ";"?)* "}"
    axiom: expr "[=" expr
    ?expr: unit ("&" unit)*  -> conj
    ?unit: "top"                    -> top
         | "bot"                    -> bot
         | NAME                     -> name
         | NAME "-"                 -> inverse
         | "exists" role "." unit   -> exists
         | "(" expr ")"
    role: NAME
        | NAME "-" -> inverse_role

    query: rule+
    rule: NAME "(" [NAME ("," NAME)*] ")" ":-" body "."
    body: literal ("," literal)*
    ?literal: atom
            | NAME "=" NAME -> equality
            | "true"        -> true
            | "false"       -> false

    facts: "facts" "{" (atom (","|";")?)* "}"

    COMMENT: /#[^\n]*/
    %import common.CNAME -> NAME
    %import common.INT
    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

QBF_GRAMMAR = r"""
    qbf: header (QUANT | SIGNED)*
    header: "p" "cnf" SIGNED SIGNED

    QUANT: "a" | "e"
    SIGNED: /-?[0-9]+/
    COMMENT: /^c(?:[ \t][^\n]*)?$/m
    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

_parser = Lark(GRAMMAR, start=['spec', 'query', 'facts'], parser='lalr', propagate_positions=True)
_qbf_parser = Lark(QBF_GRAMMAR, start='qbf', parser='lalr')


def _location(meta_or_token) -> Optional[SourceLocation]:
    line = getattr(meta_or_token, 'line', None)
    column = getattr(meta_or_token, 'column', None)
    if line is None or column is None:
        return None
    return SourceLocation(line, column)


def _syntax_error(e: UnexpectedInput) -> ParseError:
    location = SourceLocation(e.line, e.column) if e.line and e.line > 0 else None
    if isinstance(e, UnexpectedToken):
        expected = e.accepts or e.expected
        found = 'end of input' if e.token.type == '$END' else repr(str(e.token))
        return ParseError(f"unexpected {found}", location, tuple(expected))
    if isinstance(e, UnexpectedCharacters):
        return ParseError(f"unexpected character {e.char!r}", location, tuple(e.allowed or ()))
    if isinstance(e, UnexpectedEOF):
        return ParseError("unexpected end of input", location, tuple(e.expected))
    return ParseError(str(e), location)


def _parse_tree(text: str, start: str, parser: Lark = _parser):
    try:
        return parser.parse(text, start=start) if parser is _parser else parser.parse(text)
    except UnexpectedInput as e:
        raise _syntax_error(e) from e


def read_text(path: Union[str, Path]) -> str:
    """
    Read a UTF-8 input file

    Raises:
        ParseError: If the file cannot be read or holds invalid UTF-8
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from e
    try:
        return data.decode('utf-8')
    except UnicodeDecodeError as e:
        prefix = data[:e.start]
        line = prefix.count(b'\n') + 1
        column = e.start - (prefix.rfind(b'\n') + 1) + 1
        raise ParseError(f"invalid UTF-8 byte 0x{data[e.start]:02x} in {path}",
                         SourceLocation(line, column)) from e


# Concept expressions stay raw until every name is classified as concept or role
_Raw = tuple


@v_args(inline=True)
class _SpecTransformer(Transformer):
    """Tree to model objects; ontology expressions are left raw for the role pass"""

    def __init__(self):
        super().__init__()
        self.atom_locations: Dict[RelationalAtom, SourceLocation] = {}

    def rel_decl(self, name, arity):
        return str(name), int(arity)

    def schema_block(self, *decls):
        return 'schema', list(decls)

    @v_args(meta=True)
    def atom(self, meta, children):
        name, *args = children
        atom = RelationalAtom(str(name), tuple(str(a) for a in args if a is not None))
        location = _location(meta)
        if location:
            self.atom_locations.setdefault(atom, location)
        return atom

    def atom_list(self, *atoms):
        return list(atoms)

    @v_args(meta=True)
    def mapping(self, meta, children):
        body, head = children
        return GavMapping(tuple(body), head, _location(meta))

    def mappings_block(self, *mappings):
        return 'mappings', list(mappings)

    def top(self):
        return ('top',)

    def bot(self):
        return ('bot',)

    def name(self, name):
        return ('name', str(name))

    def inverse(self, name):
        return ('inv', str(name))

    def role(self, name):
        return Role(str(name))

    def inverse_role(self, name):
        return Role(str(name), True)

    def exists(self, role, filler):
        return ('exists', role, filler)

    def conj(self, *operands):
        return ('and', operands) if len(operands) > 1 else operands[0]

    @v_args(meta=True)
    def axiom(self, meta, children):
        lhs, rhs = children
        return lhs, rhs, _location(meta)

    def ontology_block(self, dialect, *axioms):
        return 'ontology', (str(dialect), list(axioms))

    def spec(self, *blocks):
        return list(blocks)

    def equality(self, left, right):
        return EqualityAtom(str(left), str(right))

    def true(self):
        return True

    def false(self):
        return False

    def body(self, *literals):
        return list(literals)

    @v_args(meta=True)
    def rule(self, meta, children):
        name, *rest = children
        body = rest[-1]
        head = tuple(str(v) for v in rest[:-1] if v is not None)
        return str(name), head, body, _location(meta)

    def query(self, *rules):
        return list(rules)

    def facts(self, *atoms):
        return list(atoms)


def _names(raw: _Raw, kind: str) -> Set[str]:
    tag = raw[0]
    if tag == kind:
        return {raw[1]}
    if tag == 'and':
        return set().union(*(_names(op, kind) for op in raw[1]))
    if tag == 'exists':
        found = _names(raw[2], kind)
        if kind == 'role':
            found.add(raw[1].name)
        return found
    return set()


def _role_shaped(lhs: _Raw, rhs: _Raw) -> bool:
    """r [= s, r & s [= bot and r [= bot read as role statements when r, s are roles"""
    if lhs[0] in ('name', 'inv') and rhs[0] in ('name', 'inv'):
        return True
    if rhs[0] != 'bot':
        return False
    return lhs[0] == 'name' or (lhs[0] == 'and' and all(op[0] == 'name' for op in lhs[1]))


def _classify(axioms: List[tuple], head_arities: Dict[str, int]) -> Set[str]:
    """
    Role names of an ontology block

    A name is a role if it is a binary head, used in an existential or with
    an inverse, or shares a role-shaped statement with a role. A name is a
    concept if it is a unary head or occurs in any other statement. Names
    left open by both rules are roles when they start with a lowercase letter.
    """
    roles = {name for name, arity in head_arities.items() if arity == 2}
    concepts = {name for name, arity in head_arities.items() if arity == 1}
    shaped = []
    for lhs, rhs, _ in axioms:
        roles |= _names(lhs, 'role') | _names(rhs, 'role') | _names(lhs, 'inv') | _names(rhs, 'inv')
        names = _names(lhs, 'name') | _names(rhs, 'name') | _names(lhs, 'inv') | _names(rhs, 'inv')
        if _role_shaped(lhs, rhs):
            shaped.append(names)
        else:
            concepts |= _names(lhs, 'name') | _names(rhs, 'name')

    def spread() -> None:
        changed = True
        while changed:
            changed = False
            for names in shaped:
                if names & roles and not names <= roles:
                    roles.update(names)
                    changed = True

    spread()
    for names in shaped:
        if not names & (roles | concepts) and all(n[:1].islower() for n in names):
            roles.update(names)
            spread()
    return roles


def _concept(raw: _Raw, roles: Set[str], location: Optional[SourceLocation]):
    tag = raw[0]
    if tag == 'top':
        return TOP
    if tag == 'bot':
        return BOTTOM
    if tag == 'name':
        if raw[1] in roles:
            raise ParseError(f"role {raw[1]} used as a concept", location)
        return ConceptName(raw[1])
    if tag == 'inv':
        raise ParseError(f"inverse role {raw[1]}- used as a concept", location)
    if tag == 'and':
        return Conjunction(tuple(_concept(op, roles, location) for op in raw[1]))
    return Existential(raw[1], _concept(raw[2], roles, location))


def _axiom(lhs: _Raw, rhs: _Raw, roles: Set[str], location: Optional[SourceLocation]):
    def role_of(raw):
        return Role(raw[1], raw[0] == 'inv')

    if lhs[0] in ('name', 'inv') and rhs[0] in ('name', 'inv') and lhs[1] in roles:
        return RoleInclusion(role_of(lhs), role_of(rhs))
    if lhs[0] == 'name' and rhs[0] == 'bot' and lhs[1] in roles:
        return RoleDisjointness((lhs[1],))
    if (lhs[0] == 'and' and rhs[0] == 'bot'
            and all(op[0] == 'name' and op[1] in roles for op in lhs[1])):
        return RoleDisjointness(tuple(sorted(op[1] for op in lhs[1])))
    return ConceptInclusion(_concept(lhs, roles, location), _concept(rhs, roles, location))


def _build_ontology(block, head_arities: Dict[str, int]) -> Ontology:
    dialect_name, axioms = block
    try:
        dialect = Dialect.parse(dialect_name)
    except ValueError as e:
        raise ParseError(str(e), None, tuple(d.value for d in Dialect)) from e
    roles = _classify(axioms, head_arities)
    return Ontology(dialect).with_axioms(*(_axiom(lhs, rhs, roles, loc) for lhs, rhs, loc in axioms))


def parse_spec(text: str) -> ObdaSpec:
    """
    Parse a specification with schema, mappings and ontology blocks

    Returns:
        Validated ObdaSpec

    Raises:
        ParseError: On syntax errors, duplicate blocks or declarations
        SpecValidationError: If the specification violates its invariants
    """
    blocks = _SpecTransformer().transform(_parse_tree(text, 'spec'))
    seen: Dict[str, object] = {}
    for kind, content in blocks:
        if kind in seen:
            raise ParseError(f"duplicate {kind} block")
        seen[kind] = content

    arities: Dict[str, int] = {}
    for name, arity in seen.get('schema', []):
        if name in arities:
            raise ParseError(f"relation {name} declared twice")
        arities[name] = arity
    mappings = tuple(seen.get('mappings', []))
    head_arities = {m.head.relation: m.head.arity for m in mappings}
    ontology = _build_ontology(seen['ontology'], head_arities) if 'ontology' in seen else Ontology.empty()

    spec = ObdaSpec(ontology, mappings, Schema.from_dict(arities))
    diagnostics = validate_spec(spec)
    if diagnostics:
        raise SpecValidationError(diagnostics)
    logger.debug("parsed spec: %d relations, %d mappings, %d axioms",
                 len(arities), len(mappings), len(ontology.axioms))
    return spec


def _check_atoms(atoms, schema: Optional[Schema], locations: Dict[RelationalAtom, SourceLocation]):
    if schema is None:
        return
    for atom in atoms:
        arity = schema.arity(atom.relation)
        if arity is None:
            raise ParseError(f"undeclared relation {atom.relation}", locations.get(atom))
        if arity != atom.arity:
            raise ParseError(f"arity mismatch for {atom.relation}: expected {arity}, got {atom.arity}",
                             locations.get(atom))


def parse_query(text: str, schema: Optional[Schema] = None) -> UCQ:
    """
    Parse Datalog-style rules into a UCQ

    Every rule is one disjunct. A rule whose body is `false` contributes no
    disjunct but fixes the arity, so the empty UCQ can be written down.

    Args:
        text: Rules of the form q(x) :- body.
        schema: Relations the bodies may use; None skips the check

    Raises:
        ParseError: On syntax errors, undeclared relations, arity mismatches
            or rules with differing heads
    """
    transformer = _SpecTransformer()
    rules = transformer.transform(_parse_tree(text, 'query'))
    head_name, arity = rules[0][0], len(rules[0][1])
    disjuncts = []
    for name, head, body, location in rules:
        if name != head_name or len(head) != arity:
            raise ParseError(f"rule head {name}/{len(head)} differs from {head_name}/{arity}", location)
        if False in body:
            continue
        atoms = [lit for lit in body if not isinstance(lit, bool)]
        _check_atoms([a for a in atoms if isinstance(a, RelationalAtom)], schema, transformer.atom_locations)
        try:
            disjuncts.append(CQ.create(head, atoms))
        except QueryError as e:
            raise ParseError(str(e), location) from e
    return UCQ(tuple(disjuncts), arity)


def parse_database(text: str, schema: Optional[Schema] = None) -> Database:
    """
    Parse a facts { ... } block

    Raises:
        ParseError: On syntax errors or facts outside the schema
    """
    transformer = _SpecTransformer()
    atoms = transformer.transform(_parse_tree(text, 'facts'))
    _check_atoms(atoms, schema, transformer.atom_locations)
    return Database(frozenset(atoms))


class _QbfTransformer(Transformer):
    def header(self, children):
        return int(children[0]), int(children[1])

    def qbf(self, children):
        return children[0], [str(t) for t in children[1:]]


def _qbf_rows(items: List[str]) -> List[Tuple[str, List[int]]]:
    """Split the token stream at each 0 into quantifier blocks and clauses"""
    rows, kind, ids = [], None, []
    for item in items:
        if item in ('a', 'e'):
            if kind is not None or ids:
                raise ParseError(f"quantifier block '{item}' starts inside an unterminated line")
            kind = item
        elif item.lstrip('-') == '0':
            rows.append((kind or 'clause', ids))
            kind, ids = None, []
        else:
            if kind is not None and item.startswith('-'):
                raise ParseError(f"negative variable {item} in quantifier block")
            ids.append(int(item))
    if kind is not None or ids:
        raise ParseError("last line is not terminated by 0")
    return rows


def parse_qbf(text: str) -> QbfFormula:
    """
    Parse a QDIMACS-style forall-exists formula

    Variable i is named x<i>. A single `a` block must precede a single `e` block.

    Raises:
        ParseError: On syntax errors, a mismatched header or a bad prefix
    """
    (declared_vars, declared_clauses), items = _QbfTransformer().transform(
        _parse_tree(text, 'qbf', _qbf_parser))
    rows = _qbf_rows(items)
    prefix = [(kind, ids) for kind, ids in rows if kind in ('a', 'e')]
    clauses = [ids for kind, ids in rows if kind == 'clause']
    if [kind for kind, _ in prefix] != ['a', 'e']:
        raise ParseError("expected one universal block followed by one existential block")
    if len(clauses) != declared_clauses:
        raise ParseError(f"header declares {declared_clauses} clauses, found {len(clauses)}")
    used = {abs(i) for ids in clauses for i in ids} | {i for _, ids in prefix for i in ids}
    if used and max(used) > declared_vars:
        raise ParseError(f"variable {max(used)} exceeds declared count {declared_vars}")
    return QbfFormula(
        tuple(f"x{i}" for i in prefix[0][1]),
        tuple(f"x{i}" for i in prefix[1][1]),
        tuple(tuple(Literal(f"x{abs(i)}", i > 0) for i in ids) for ids in clauses),
    )


def render_qbf(phi: QbfFormula) -> str:
    """Render in the format read by parse_qbf, numbering variables x<i> by i"""
    ordered = list(phi.universal_vars) + list(phi.existential_vars)
    if all(re.fullmatch(r'x[1-9][0-9]*', v) for v in ordered):
        number = {v: int(v[1:]) for v in ordered}
    else:
        number = {v: i for i, v in enumerate(ordered, start=1)}
    lines = [f"p cnf {max(number.values(), default=0)} {len(phi.clauses)}",
             ' '.join(['a'] + [str(number[v]) for v in phi.universal_vars] + ['0']),
             ' '.join(['e'] + [str(number[v]) for v in phi.existential_vars] + ['0'])]
    for clause in phi.clauses:
        lines.append(' '.join([str(number[l.var] if l.positive else -number[l.var]) for l in clause] + ['0']))
    return '\n'.join(lines) + '\n'


def render_query(query: Union[CQ, UCQ]) -> str:
    if isinstance(query, CQ):
        return f"{query}\n"
    if query.is_empty:
        head = ','.join(f"x{i}" for i in range(1, query.arity + 1))
        return f"q({head}) :- false.\n"
    return ''.join(f"{cq}\n" for cq in sorted(query.disjuncts, key=str))


def render_database(database: Database) -> str:
    lines = ['facts {'] + [f"  {fact}" for fact in database.sorted_facts()] + ['}']
    return '\n'.join(lines) + '\n'


def render_spec(spec: ObdaSpec) -> str:
    lines = ['schema {'] + [f"  {name}/{arity}" for name, arity in spec.source_schema.relations] + ['}', '']
    lines.append('mappings {')
    ordered = sorted(spec.mappings, key=lambda m: (str(m.head), [str(a) for a in m.body]))
    lines.extend(f"  {m} ;" for m in ordered)
    lines.extend(['}', ''])
    lines.append(f"ontology {spec.ontology.dialect.value} {{")
    lines.extend(f"  {axiom} ;" for axiom in sorted(spec.ontology.axioms, key=str))
    lines.append('}')
    return '\n'.join(lines) + '\n'


def verdict_json(verdict: Verdict) -> str:
    return json.dumps(verdict.to_dict(render_query=lambda q: render_query(q).strip()), indent=2)


def render(obj) -> str:
    """
    Deterministic text for a spec, query, database, formula or verdict

    Raises:
        TypeError: For unsupported objects
    """
    if isinstance(obj, ObdaSpec):
        return render_spec(obj)
    if isinstance(obj, (CQ, UCQ)):
        return render_query(obj)
    if isinstance(obj, Database):
        return render_database(obj)
    if isinstance(obj, QbfFormula):
        return render_qbf(obj)
    if isinstance(obj, Verdict):
        return verdict_json(obj)
    raise TypeError(f"cannot render {type(obj).__name__}")
