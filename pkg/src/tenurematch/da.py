"""Teacher-proposing deferred acceptance over choice functions, with a
complete step trace, plus interrupter detection on traces.

Teachers propose simultaneously each step to their choice from the schools
that have not yet rejected them; each school keeps the best q_s of its
proposers and current holds in one atomic selection. The trace records
every step, including the final one without rejections, so it matches the
step tables used for golden comparisons. Step numbers are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import (
    ChoiceFunction,
    Matching,
    SchoolId,
    SchoolSet,
    TeacherId,
)
from .priority import PriorityProfile


@dataclass(frozen=True)
class StaticProblem:
    """Teachers with validated choice functions, schools with quotas, and
    one priority list per school (original or derived)."""

    teachers: tuple[TeacherId, ...]
    schools: tuple[SchoolId, ...]
    choices: tuple[ChoiceFunction, ...]
    priorities: PriorityProfile
    quotas: tuple[int, ...]

    def __post_init__(self) -> None:
        n, m = len(self.teachers), len(self.schools)
        if len(self.choices) != n:
            raise ValueError("one choice function per teacher required")
        if len(self.quotas) != m:
            raise ValueError("one quota per school required")
        for j, teacher in enumerate(self.teachers):
            if teacher.index != j:
                raise ValueError(f"teacher {teacher.label} misindexed at {j}")
        for cf in self.choices:
            if cf.n_schools != m:
                raise ValueError(
                    f"choice function over {cf.n_schools} schools in a market of {m}"
                )
        for k, school in enumerate(self.schools):
            if school.index != k:
                raise ValueError(f"school {school.label} misindexed at {k}")
        roster = frozenset(self.teachers)
        for school, listing in zip(self.schools, self.priorities.order):
            if frozenset(listing) != roster:
                raise ValueError(
                    f"priority list of {school.label} does not rank exactly the roster"
                )
        for q in self.quotas:
            if q < 0:
                raise ValueError("negative quota")


@dataclass(frozen=True)
class DaStep:
    """One step: who proposed where, and what each school did about it.

    Teacher sets are bitmasks over teacher indices; ``proposals`` is one
    school mask per teacher.
    """

    proposals: tuple[SchoolSet, ...]
    held_before: tuple[int, ...]
    held_after: tuple[int, ...]
    rejections: tuple[int, ...]


@dataclass(frozen=True)
class DaTrace:
    problem: StaticProblem
    steps: tuple[DaStep, ...]

    def matching(self) -> Matching:
        held = self.steps[-1].held_after if self.steps else ()
        assigned = [0] * len(self.problem.teachers)
        for k, mask in enumerate(held):
            bit = 1 << k
            j = 0
            while mask:
                if mask & 1:
                    assigned[j] |= bit
                mask >>= 1
                j += 1
        return Matching(self.problem.teachers, self.problem.schools, tuple(assigned))


@dataclass(frozen=True)
class InterrupterPair:
    """Teacher i held school s from some step, was rejected later, and s
    rejected somebody else while i was holding it."""

    teacher: TeacherId
    school: SchoolId
    held_from_step: int
    rejected_at_step: int


def run_da(problem: StaticProblem) -> tuple[Matching, DaTrace]:
    """Run deferred acceptance to quiescence.

    Terminates because rejection sets only grow. An empty teacher roster
    yields a zero-step trace.
    """
    n = len(problem.teachers)
    m = len(problem.schools)
    if n == 0:
        trace = DaTrace(problem, ())
        return Matching((), problem.schools, ()), trace

    ranks = problem.priorities.rank_arrays(n)
    full_offer = (1 << m) - 1
    rejected_by = [0] * n  # school mask per teacher
    held = [0] * m  # teacher mask per school
    steps = []

    while True:
        proposals = tuple(
            problem.choices[j].table[full_offer & ~rejected_by[j]] for j in range(n)
        )
        held_before = tuple(held)
        pools = list(held)
        for j, offer in enumerate(proposals):
            bit_j = 1 << j
            k = 0
            while offer:
                if offer & 1:
                    pools[k] |= bit_j
                offer >>= 1
                k += 1

        new_held = []
        rejections = []
        for k in range(m):
            pool = pools[k]
            members = []
            mask = pool
            j = 0
            while mask:
                if mask & 1:
                    members.append(j)
                mask >>= 1
                j += 1
            if len(members) > problem.quotas[k]:
                members.sort(key=ranks[k].__getitem__)
                members = members[: problem.quotas[k]]
            kept = 0
            for j in members:
                kept |= 1 << j
            new_held.append(kept)
            rejections.append(pool & ~kept)

        held = new_held
        steps.append(
            DaStep(proposals, held_before, tuple(new_held), tuple(rejections))
        )
        if not any(rejections):
            break
        for k, rej in enumerate(rejections):
            bit_k = 1 << k
            j = 0
            while rej:
                if rej & 1:
                    rejected_by[j] |= bit_k
                rej >>= 1
                j += 1

    trace = DaTrace(problem, tuple(steps))
    return trace.matching(), trace


def find_interrupter_pairs(trace: DaTrace) -> tuple[InterrupterPair, ...]:
    """All interrupter pairs of a completed trace, in (teacher, school,
    step) reading order.

    (i, s) qualifies when i held s from step p through p'-1, s rejected i
    at p', and s rejected some other teacher at a step in [p, p'-1].
    """
    problem = trace.problem
    pairs = []
    for j, teacher in enumerate(problem.teachers):
        bit_j = 1 << j
        for k, school in enumerate(problem.schools):
            first_held: Optional[int] = None
            rejected_at: Optional[int] = None
            for step_no, step in enumerate(trace.steps, start=1):
                if step.held_after[k] & bit_j and first_held is None:
                    first_held = step_no
                if step.rejections[k] & bit_j:
                    rejected_at = step_no
                    break
            if first_held is None or rejected_at is None or rejected_at <= first_held:
                continue
            window = trace.steps[first_held - 1 : rejected_at - 1]
            if any(step.rejections[k] & ~bit_j for step in window):
                pairs.append(
                    InterrupterPair(teacher, school, first_held, rejected_at)
                )
    return tuple(pairs)


def detect_interrupters(
    trace: DaTrace, consenting: frozenset[TeacherId] | set[TeacherId]
) -> tuple[Optional[int], tuple[InterrupterPair, ...]]:
    """Interrupter pairs of consenting teachers at the last step where one
    is rejected by the school she interrupts for.

    Returns ``(None, ())`` when no consenting interrupter exists.
    """
    candidates = [p for p in find_interrupter_pairs(trace) if p.teacher in consenting]
    if not candidates:
        return None, ()
    last = max(p.rejected_at_step for p in candidates)
    chosen = tuple(
        sorted(
            (p for p in candidates if p.rejected_at_step == last),
            key=lambda p: (p.teacher.index, p.school.index),
        )
    )
    return last, chosen
