"""The efficiency-adjusted variant: rerun TRDA with consenting
interrupters truncated away, round after round, until no consenting
interrupter pair remains.

Truncations accumulate on working copies of the choice functions; the
original problem is never modified, and welfare comparisons elsewhere must
use the original choice functions. The final round's matching is the
mechanism's output; the full round log is kept for audits and golden
tests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .da import DaTrace, InterrupterPair, detect_interrupters
from .dynamic import DynamicProblem, run_trda
from .model import Matching, TeacherId, s_truncate


@dataclass(frozen=True)
class ConsentProfile:
    """Which teachers waive their priority when they interrupt."""

    teachers: tuple[TeacherId, ...]
    consents: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.consents) != len(self.teachers):
            raise ValueError("one consent flag per teacher required")

    @classmethod
    def all_of(cls, teachers: tuple[TeacherId, ...]) -> "ConsentProfile":
        return cls(teachers, (True,) * len(teachers))

    @classmethod
    def none_of(cls, teachers: tuple[TeacherId, ...]) -> "ConsentProfile":
        return cls(teachers, (False,) * len(teachers))

    @classmethod
    def of(cls, teachers: tuple[TeacherId, ...], consenting: set[str]) -> "ConsentProfile":
        return cls(teachers, tuple(t.label in consenting for t in teachers))

    def consenting_set(self) -> frozenset[TeacherId]:
        return frozenset(
            t for t, flag in zip(self.teachers, self.consents) if flag
        )


@dataclass(frozen=True)
class TreadaRound:
    """One round: the problem actually run (with truncations applied so
    far), its trace and matching, and the pairs truncated afterwards."""

    number: int
    problem: DynamicProblem
    trace: DaTrace
    matching: Matching
    truncated: tuple[InterrupterPair, ...]


@dataclass(frozen=True)
class TreadaLog:
    rounds: tuple[TreadaRound, ...]

    @property
    def final(self) -> TreadaRound:
        return self.rounds[-1]


def run_treada(
    problem: DynamicProblem, consent: ConsentProfile
) -> tuple[Matching, TreadaLog]:
    """Round 0 is TRDA; each later round truncates every consenting
    interrupter pair found at the last interrupted step of the previous
    trace and reruns.

    Terminates within |I| * |S| rounds: every round removes at least one
    (teacher, school) possibility for good.
    """
    if consent.teachers != problem.teachers:
        raise ValueError("consent profile must cover exactly the roster")
    consenting = consent.consenting_set()

    rounds = []
    current = problem
    number = 0
    while True:
        matching, trace = run_trda(current)
        _, pairs = detect_interrupters(trace, consenting)
        rounds.append(TreadaRound(number, current, trace, matching, pairs))
        if not pairs:
            break
        choices = list(current.choices)
        for pair in pairs:
            choices[pair.teacher.index] = s_truncate(
                choices[pair.teacher.index], pair.school
            )
        current = replace(current, choices=tuple(choices))
        number += 1

    log = TreadaLog(tuple(rounds))
    return log.final.matching, log
