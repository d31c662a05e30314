"""Decision outcome models for obda-express"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Optional, Tuple

from models.query import UCQ, Database


class Outcome(Enum):
    """Three-valued decision outcome"""
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"

    @property
    def exit_code(self) -> int:
        return {Outcome.YES: 0, Outcome.NO: 1, Outcome.UNKNOWN: 2}[self]


AnswerSet = FrozenSet[Tuple[str, ...]]


@dataclass(frozen=True)
class Witness:
    """A source database on which the source query and the certain answers disagree"""
    database: Database
    answer: Tuple[str, ...]
    source_answers: AnswerSet = frozenset()
    certain_answers: AnswerSet = frozenset()
    validated: bool = False

    def to_dict(self) -> dict:
        return {
            'database': [str(f) for f in self.database.sorted_facts()],
            'tuple': list(self.answer),
            'source_answers': [list(t) for t in sorted(self.source_answers)],
            'certain_answers': [list(t) for t in sorted(self.certain_answers)],
            'validated': self.validated,
        }


@dataclass
class BoundsReport:
    """Budgets that were used and whether they cover the completeness bound"""
    strategy: str
    exhaustive: bool
    effective: Dict[str, int] = field(default_factory=dict)
    required: Dict[str, int] = field(default_factory=dict)
    theoretical_bound: Optional[int] = None
    candidates_checked: int = 0
    truncated: bool = False
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        data: Dict[str, Any] = {
            'strategy': self.strategy,
            'exhaustive': self.exhaustive,
            'effective': dict(sorted(self.effective.items())),
            'required': dict(sorted(self.required.items())),
            'candidates_checked': self.candidates_checked,
            'truncated': self.truncated,
        }
        if self.theoretical_bound is not None:
            data['theoretical_bound'] = self.theoretical_bound
        if self.notes:
            data['notes'] = list(self.notes)
        return data


@dataclass
class Verdict:
    """Outcome of an expressibility or verification run"""
    outcome: Outcome
    realization: Optional[UCQ] = None
    witness: Optional[Witness] = None
    bounds: Optional[BoundsReport] = None

    @property
    def exit_code(self) -> int:
        return self.outcome.exit_code

    def to_dict(self, render_query=str) -> dict:
        """
        Convert to the JSON shape of the verdict format

        Args:
            render_query: Function rendering the realization as query text
        """
        data: Dict[str, Any] = {'verdict': self.outcome.value}
        if self.realization is not None:
            data['realization'] = render_query(self.realization)
        if self.witness is not None:
            data['witness'] = self.witness.to_dict()
        if self.bounds is not None:
            data['bounds'] = self.bounds.to_dict()
        return data
