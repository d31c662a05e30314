"""Quantified Boolean formula model used by the hardness instance generator"""

import re
from dataclasses import dataclass
from typing import Tuple

# letters and digits only; the reduction joins names with _ and writes -x as nx
VARIABLE_NAME = re.compile(r'[A-Za-z][A-Za-z0-9]*')
RESERVED_NAMES = ('p', 'n')


@dataclass(frozen=True, order=True)
class Literal:
    var: str
    positive: bool = True

    def __str__(self) -> str:
        return self.var if self.positive else f"-{self.var}"


Clause = Tuple[Literal, Literal, Literal]


@dataclass(frozen=True)
class QbfFormula:
    """forall x0..xn exists y0..ym psi, psi in 3CNF"""
    universal_vars: Tuple[str, ...]
    existential_vars: Tuple[str, ...]
    clauses: Tuple[Clause, ...]

    def __post_init__(self):
        object.__setattr__(self, 'universal_vars', tuple(self.universal_vars))
        object.__setattr__(self, 'existential_vars', tuple(self.existential_vars))
        object.__setattr__(self, 'clauses', tuple(tuple(c) for c in self.clauses))

    def problems(self) -> Tuple[str, ...]:
        """Violations of the reduction preconditions"""
        issues = []
        if len(self.universal_vars) < 1:
            issues.append("at least one universal variable is required")
        if len(self.existential_vars) < 2:
            issues.append("at least two existential variables are required")
        overlap = set(self.universal_vars) & set(self.existential_vars)
        if overlap:
            issues.append(f"variables quantified twice: {sorted(overlap)}")
        known = set(self.universal_vars) | set(self.existential_vars)
        for var in sorted(known):
            if not VARIABLE_NAME.fullmatch(var) or var in RESERVED_NAMES:
                issues.append(f"variable name {var!r} is not usable in relation names")
            elif var.startswith('n') and var[1:] in known:
                issues.append(f"variable {var} clashes with the negation of {var[1:]}")
        for index, clause in enumerate(self.clauses):
            if len(clause) != 3:
                issues.append(f"clause {index} has {len(clause)} literals, expected 3")
            for literal in clause:
                if literal.var not in known:
                    issues.append(f"clause {index} uses unquantified variable {literal.var}")
        return tuple(issues)

    def is_universal(self, var: str) -> bool:
        return var in self.universal_vars

    def __str__(self) -> str:
        prefix = ' '.join(f"A{x}" for x in self.universal_vars)
        prefix += ' ' + ' '.join(f"E{y}" for y in self.existential_vars)
        matrix = ' & '.join('(' + ' | '.join(str(l) for l in c) + ')' for c in self.clauses)
        return f"{prefix} . {matrix}"
