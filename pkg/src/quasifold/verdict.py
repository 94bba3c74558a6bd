"""Three-valued answers for semi-decidable questions."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any


class Verdict(enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Decision:
    """A verdict plus an optional witness (for Yes, and for No where one exists).

    Deliberately not usable as a bool: callers must look at ``verdict`` so that
    Unknown is never silently read as No.
    """

    verdict: Verdict
    witness: Any = None
    detail: str = ""

    @classmethod
    def yes(cls, witness: Any = None, detail: str = "") -> Decision:
        return cls(Verdict.YES, witness, detail)

    @classmethod
    def no(cls, witness: Any = None, detail: str = "") -> Decision:
        return cls(Verdict.NO, witness, detail)

    @classmethod
    def unknown(cls, witness: Any = None, detail: str = "") -> Decision:
        return cls(Verdict.UNKNOWN, witness, detail)

    @property
    def is_yes(self) -> bool:
        return self.verdict is Verdict.YES

    @property
    def is_no(self) -> bool:
        return self.verdict is Verdict.NO

    @property
    def is_unknown(self) -> bool:
        return self.verdict is Verdict.UNKNOWN

    def __bool__(self):
        raise TypeError("Decision is three-valued; inspect .verdict instead of truth-testing")
