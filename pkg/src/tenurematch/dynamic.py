"""Dynamic problems and the tenure-respecting mechanisms built on DA.

A dynamic problem is a static one plus the inherited matching from the
previous period, already restricted to the teachers still present. The
tenure-respecting DA (TRDA) derives priorities that lift each school's
inherited teachers to the top and runs plain DA. The cohort-sequential
procedure places teachers in entry order against residual capacities; it
reproduces TRDA exactly when earlier cohorts outrank later ones
everywhere, and refuses to run otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .da import DaTrace, StaticProblem, run_da
from .errors import InvalidProblem, NotLexicographicByTenure
from .model import (
    ChoiceFunction,
    Matching,
    SchoolId,
    SchoolSet,
    TeacherId,
    validate_choice_function,
)
from .priority import PriorityProfile, derive_priorities, first_cohort_inversion


@dataclass(frozen=True)
class DynamicProblem:
    """One period: roster, choice functions, priorities, quotas, and the
    inherited matching (one school mask per teacher, 0 for entrants).

    Construction checks that the inherited matching fits the quotas; it
    places no restriction on how a teacher's choice function treats her
    inherited schools. Tenure means an inherited school never rejects
    her, not that she must keep applying to it. Full choice-function
    validation is separate, see :func:`validate_problem`.
    """

    teachers: tuple[TeacherId, ...]
    schools: tuple[SchoolId, ...]
    choices: tuple[ChoiceFunction, ...]
    priorities: PriorityProfile
    quotas: tuple[int, ...]
    previous: tuple[SchoolSet, ...]

    def __post_init__(self) -> None:
        n, m = len(self.teachers), len(self.schools)
        if len(self.choices) != n or len(self.previous) != n:
            raise InvalidProblem("choices and previous matching must cover the roster")
        if len(self.quotas) != m:
            raise InvalidProblem("one quota per school required")
        for j, teacher in enumerate(self.teachers):
            if teacher.index != j:
                raise InvalidProblem(f"teacher {teacher.label} misindexed at {j}")
        for k, school in enumerate(self.schools):
            if school.index != k:
                raise InvalidProblem(f"school {school.label} misindexed at {k}")
        for cf in self.choices:
            if cf.n_schools != m:
                raise InvalidProblem(
                    f"choice function over {cf.n_schools} schools in a market of {m}"
                )
        for j, mask in enumerate(self.previous):
            if mask >> m:
                raise InvalidProblem(
                    f"inherited assignment of {self.teachers[j].label} names unknown schools"
                )
        roster = frozenset(self.teachers)
        for school, listing in zip(self.schools, self.priorities.order):
            if frozenset(listing) != roster:
                raise InvalidProblem(
                    f"priority list of {school.label} does not rank exactly the roster"
                )
        for k in range(m):
            bit = 1 << k
            load = sum(1 for mask in self.previous if mask & bit)
            if load > self.quotas[k]:
                raise InvalidProblem(
                    f"inherited matching overfills {self.schools[k].label}"
                )

    @property
    def employed(self) -> frozenset[TeacherId]:
        """Teachers carrying a nonempty assignment into this period."""
        return frozenset(
            t for t, prev in zip(self.teachers, self.previous) if prev
        )

    def previous_matching(self) -> Matching:
        return Matching(self.teachers, self.schools, self.previous)

    def static(self, priorities: PriorityProfile) -> StaticProblem:
        return StaticProblem(
            self.teachers, self.schools, self.choices, priorities, self.quotas
        )


def validate_problem(problem: DynamicProblem) -> None:
    """Run the full choice-function validation over the roster.

    Cheap structural checks already ran at construction; this one costs
    4^|S| per teacher and is meant for the ingestion boundary.
    """
    for teacher, cf in zip(problem.teachers, problem.choices):
        report = validate_choice_function(cf)
        if not report.ok:
            first = report.violations[0]
            raise InvalidProblem(
                f"choice function of {teacher.label} violates "
                f"{first.property_name}: {first.detail}"
            )


def related_static_problem(problem: DynamicProblem) -> StaticProblem:
    """The static problem under tenure-derived priorities."""
    return problem.static(derive_priorities(problem))


def run_trda(problem: DynamicProblem) -> tuple[Matching, DaTrace]:
    """Tenure-respecting deferred acceptance: DA under derived priorities."""
    return run_da(related_static_problem(problem))


def run_cohort_da(
    problem: DynamicProblem, cohorts: Sequence[Sequence[TeacherId]]
) -> Matching:
    """Place cohorts sequentially, earlier entrants first, each against the
    capacities the previous cohorts left behind.

    ``cohorts`` must partition the roster in entry order. Requires every
    teacher of an earlier cohort to outrank every teacher of a later one
    at every school (the lexicographic-by-tenure structure); otherwise the
    equivalence with TRDA has no basis and
    :class:`NotLexicographicByTenure` is raised.
    """
    flat = [t for cohort in cohorts for t in cohort]
    if sorted(flat, key=lambda t: t.index) != list(problem.teachers) or len(flat) != len(
        set(flat)
    ):
        raise InvalidProblem("cohorts must partition the roster")
    stage_of = {
        t: stage for stage, cohort in enumerate(cohorts) for t in cohort
    }
    inversion = first_cohort_inversion(problem.priorities, stage_of)
    if inversion is not None:
        school, victim, offender = inversion
        raise NotLexicographicByTenure(
            f"{offender.label} (later cohort) outranks {victim.label} at {school.label}",
            witness=inversion,
        )

    residual = list(problem.quotas)
    placed: dict[TeacherId, SchoolSet] = {}
    for cohort in cohorts:
        members = sorted(cohort, key=lambda t: t.index)
        if not members:
            continue
        reindex = {t: j for j, t in enumerate(members)}
        sub_teachers = tuple(
            TeacherId(j, t.label) for j, t in enumerate(members)
        )
        sub_priorities = PriorityProfile(
            problem.schools,
            tuple(
                tuple(sub_teachers[reindex[t]] for t in listing if t in reindex)
                for listing in problem.priorities.order
            ),
        )
        try:
            sub_problem = DynamicProblem(
                sub_teachers,
                problem.schools,
                tuple(problem.choices[t.index] for t in members),
                sub_priorities,
                tuple(residual),
                tuple(problem.previous[t.index] for t in members),
            )
        except InvalidProblem as exc:
            raise InvalidProblem(
                "earlier cohorts consumed seats this cohort's holders carry"
            ) from exc
        matching, _ = run_trda(sub_problem)
        for sub_t, original in zip(sub_teachers, members):
            mask = matching.of(sub_t)
            placed[original] = mask
            for k in range(len(problem.schools)):
                if mask & (1 << k):
                    residual[k] -= 1

    assigned = tuple(placed[t] for t in problem.teachers)
    return Matching(problem.teachers, problem.schools, assigned)
