"""Three-valued decision results with an audit trail."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any


class Answer(str, enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass
class Verdict:
    """Outcome of a decision or verification routine.

    ``notes`` holds one string per clause that was checked, in order, so a
    report can show exactly which test settled the answer. A ``YES`` carries
    a witness that re-verifies; a ``NO`` carries a finite refutation in
    ``witness`` or in the last note.
    """

    answer: Answer
    witness: Any = None
    notes: list[str] = field(default_factory=list)

    @property
    def yes(self) -> bool:
        return self.answer is Answer.YES

    @property
    def no(self) -> bool:
        return self.answer is Answer.NO

    def __bool__(self) -> bool:
        return self.yes

    @classmethod
    def from_checks(cls, checks: list[tuple[str, bool]], witness: Any = None) -> "Verdict":
        notes = [f"{label}: {'ok' if ok else 'FAIL'}" for label, ok in checks]
        ok = all(flag for _, flag in checks)
        return cls(Answer.YES if ok else Answer.NO, witness, notes)


def yes(witness: Any = None, *notes: str) -> Verdict:
    return Verdict(Answer.YES, witness, list(notes))


def no(witness: Any = None, *notes: str) -> Verdict:
    return Verdict(Answer.NO, witness, list(notes))


def unknown(*notes: str) -> Verdict:
    return Verdict(Answer.UNKNOWN, None, list(notes))
