"""School priorities: profiles, tenure-derived priorities, the
lexicographic-by-tenure property, and cross-period consistency."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import QuotaExceededByTenure
from .model import SchoolId, TeacherId, ValidationReport, Violation


@dataclass(frozen=True)
class PriorityProfile:
    """A strict priority list per school, most preferred first.

    Each list must rank every teacher of the problem; schools have no
    notion of unacceptable teachers here.
    """

    schools: tuple[SchoolId, ...]
    order: tuple[tuple[TeacherId, ...], ...]

    def __post_init__(self) -> None:
        if len(self.order) != len(self.schools):
            raise ValueError("one priority list per school required")
        for school, listing in zip(self.schools, self.order):
            if len(set(listing)) != len(listing):
                raise ValueError(f"priority list of {school.label} has duplicates")

    def ranking_of(self, school: SchoolId | int) -> tuple[TeacherId, ...]:
        k = school.index if isinstance(school, SchoolId) else school
        return self.order[k]

    def rank_arrays(self, n_teachers: int) -> list[list[int]]:
        """rank_arrays[school][teacher_index] = position, 0 is best."""
        arrays = []
        for listing in self.order:
            ranks = [n_teachers] * n_teachers
            for pos, teacher in enumerate(listing):
                ranks[teacher.index] = pos
            arrays.append(ranks)
        return arrays


class DerivedPriorityProfile(PriorityProfile):
    """Priorities after lifting each school's tenured teachers to the top."""


def derive_priorities(problem) -> DerivedPriorityProfile:
    """Lift the teachers inherited at each school above everyone else.

    Within the tenured block and within the rest, the original period
    priority order is kept. Raises :class:`QuotaExceededByTenure` when the
    inherited matching overfills a school.
    """
    derived = []
    for k, school in enumerate(problem.schools):
        bit = 1 << k
        tenured = [
            t for t in problem.priorities.ranking_of(k) if problem.previous[t.index] & bit
        ]
        if len(tenured) > problem.quotas[k]:
            raise QuotaExceededByTenure(
                f"{school.label} inherits {len(tenured)} teachers, quota {problem.quotas[k]}"
            )
        others = [
            t for t in problem.priorities.ranking_of(k) if not problem.previous[t.index] & bit
        ]
        derived.append(tuple(tenured + others))
    return DerivedPriorityProfile(problem.schools, tuple(derived))


def is_lexicographic_by_tenure(
    priorities: PriorityProfile, employed: Iterable[TeacherId]
) -> tuple[bool, Optional[tuple[SchoolId, TeacherId, TeacherId]]]:
    """Do all employed teachers outrank all others at every school?

    Returns ``(True, None)`` or ``(False, witness)`` where the witness is
    the first (school, employed, entering) triple, in reading order, with
    the entering teacher ranked above the employed one.
    """
    employed_set = frozenset(employed)
    for school, listing in zip(priorities.schools, priorities.order):
        first_entering: Optional[TeacherId] = None
        for teacher in listing:
            if teacher in employed_set:
                if first_entering is not None:
                    return False, (school, teacher, first_entering)
            elif first_entering is None:
                first_entering = teacher
    return True, None


def first_cohort_inversion(
    priorities: PriorityProfile, stage_of: dict[TeacherId, int]
) -> Optional[tuple[SchoolId, TeacherId, TeacherId]]:
    """First place where a later cohort outranks an earlier one, if any.

    ``stage_of`` maps each teacher to her cohort position (0 earliest).
    Generalizes the lexicographic-by-tenure check to ordered cohorts.
    """
    for school, listing in zip(priorities.schools, priorities.order):
        latest_seen: Optional[TeacherId] = None
        for teacher in listing:
            if latest_seen is not None and stage_of[teacher] < stage_of[latest_seen]:
                return (school, teacher, latest_seen)
            if latest_seen is None or stage_of[teacher] > stage_of[latest_seen]:
                latest_seen = teacher
    return None


def validate_priority_consistency(economy) -> ValidationReport:
    """Relative priority between two teachers must not change across the
    periods in which both are present."""
    violations = []
    seen: dict[tuple[int, TeacherId, TeacherId], int] = {}
    for period_index, period in enumerate(economy.periods, start=1):
        arrays = period.priorities.rank_arrays(
            max(t.index for t in period.teachers) + 1 if period.teachers else 0
        )
        for k, school in enumerate(economy.schools):
            ranks = arrays[k]
            roster = sorted(period.teachers, key=lambda t: t.index)
            for a_pos, i in enumerate(roster):
                for j in roster[a_pos + 1 :]:
                    above = ranks[i.index] < ranks[j.index]
                    key = (k, i, j)
                    if key not in seen:
                        seen[key] = period_index if above else -period_index
                    else:
                        was_above = seen[key] > 0
                        if was_above != above:
                            violations.append(
                                Violation(
                                    "priority-consistency",
                                    (school.label, i.label, j.label),
                                    f"order of {i.label},{j.label} at {school.label} flips "
                                    f"between periods {abs(seen[key])} and {period_index}",
                                )
                            )
    return ValidationReport(tuple(violations))
