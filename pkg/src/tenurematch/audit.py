"""Definition-level verifiers and exhaustive oracles.

Everything here is written directly from the definitions, independent of
how the mechanisms compute their outputs, so these functions can serve as
ground truth for them. The enumeration oracles are guarded: past the size
bounds they raise rather than silently sampling.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import product
from typing import Iterator, Optional

from .dynamic import DynamicProblem
from .errors import DomainTooLarge, InvalidProblem, NotStableInput
from .model import (
    Matching,
    SchoolId,
    TeacherId,
    validate_matching,
    weakly_improves,
)
from .priority import PriorityProfile

ENUM_MAX_TEACHERS = 6
ENUM_MAX_SCHOOLS = 5


class ClaimKind(Enum):
    Justified = "justified"
    Unjustified = "unjustified"


@dataclass(frozen=True)
class Claim:
    """Teacher ``claimant`` wants ``school``, currently holding the
    lower-priority ``displaced``. Justified unless the displaced teacher
    is tenured there."""

    claimant: TeacherId
    school: SchoolId
    displaced: TeacherId
    kind: ClaimKind


@dataclass(frozen=True)
class StabilityVerdict:
    individually_rational: bool
    dynamically_rational: bool
    non_wasteful: bool
    claims: tuple[Claim, ...]
    dynamically_stable: bool

    def __post_init__(self) -> None:
        expected = (
            self.dynamically_rational
            and self.non_wasteful
            and all(c.kind is ClaimKind.Unjustified for c in self.claims)
        )
        if self.dynamically_stable != expected:
            raise ValueError("verdict flag inconsistent with its components")


def _require_feasible(problem, mu: Matching) -> None:
    report = validate_matching(problem, mu)
    if not report.ok:
        first = report.violations[0]
        raise InvalidProblem(f"infeasible matching: {first.detail}")


def find_claims(problem: DynamicProblem, mu: Matching) -> tuple[Claim, ...]:
    """Every (claimant, school, displaced) triple satisfying the claim
    definition under the period priorities, each classified."""
    _require_feasible(problem, mu)
    ranks = problem.priorities.rank_arrays(len(problem.teachers))
    claims = []
    for i, teacher in enumerate(problem.teachers):
        mine = mu.assigned[i]
        cf = problem.choices[i]
        for k, school in enumerate(problem.schools):
            bit = 1 << k
            if mine & bit:
                continue
            if not cf.table[mine | bit] & bit:
                continue
            my_rank = ranks[k][i]
            for j, other in enumerate(problem.teachers):
                if mu.assigned[j] & bit and ranks[k][j] > my_rank:
                    tenured = bool(problem.previous[j] & bit)
                    claims.append(
                        Claim(
                            teacher,
                            school,
                            other,
                            ClaimKind.Unjustified if tenured else ClaimKind.Justified,
                        )
                    )
    return tuple(claims)


def is_individually_rational(problem, mu: Matching) -> bool:
    return all(
        cf.table[mask] == mask for cf, mask in zip(problem.choices, mu.assigned)
    )


def is_dynamically_rational(problem: DynamicProblem, mu: Matching) -> bool:
    """Individually rational, and no continuing teacher would rather keep
    her previous assignment (weak Blair improvement)."""
    _require_feasible(problem, mu)
    if not is_individually_rational(problem, mu):
        return False
    return all(
        cf.table[mask | prev] == mask
        for cf, mask, prev in zip(problem.choices, mu.assigned, problem.previous)
        if prev
    )


def is_nonwasteful(problem, mu: Matching) -> bool:
    """Whenever a teacher wants to add a school, that school is full."""
    _require_feasible(problem, mu)
    m = len(problem.schools)
    loads = [0] * m
    for mask in mu.assigned:
        for k in range(m):
            if mask & (1 << k):
                loads[k] += 1
    for cf, mine in zip(problem.choices, mu.assigned):
        for k in range(m):
            bit = 1 << k
            if mine & bit:
                continue
            if cf.table[mine | bit] & bit and loads[k] < problem.quotas[k]:
                return False
    return True


def is_dynamically_stable(problem: DynamicProblem, mu: Matching) -> StabilityVerdict:
    """Dynamic rationality, non-wastefulness, and no justified claims."""
    individually_rational = is_individually_rational(problem, mu)
    dynamically_rational = is_dynamically_rational(problem, mu)
    non_wasteful = is_nonwasteful(problem, mu)
    claims = find_claims(problem, mu)
    stable = (
        dynamically_rational
        and non_wasteful
        and all(c.kind is ClaimKind.Unjustified for c in claims)
    )
    return StabilityVerdict(
        individually_rational, dynamically_rational, non_wasteful, claims, stable
    )


def is_statically_stable(
    problem, mu: Matching, priorities: Optional[PriorityProfile] = None
) -> bool:
    """Static stability: individually rational, non-wasteful, and no
    claims at all under the given priorities.

    With a dynamic problem and its derived priorities this is the other
    side of the dynamic/static equivalence; the check itself never looks
    at the inherited matching.
    """
    _require_feasible(problem, mu)
    if priorities is None:
        priorities = problem.priorities
    if not is_individually_rational(problem, mu):
        return False
    if not is_nonwasteful(problem, mu):
        return False
    ranks = priorities.rank_arrays(len(problem.teachers))
    for i in range(len(problem.teachers)):
        mine = mu.assigned[i]
        cf = problem.choices[i]
        for k in range(len(problem.schools)):
            bit = 1 << k
            if mine & bit or not cf.table[mine | bit] & bit:
                continue
            my_rank = ranks[k][i]
            for j in range(len(problem.teachers)):
                if mu.assigned[j] & bit and ranks[k][j] > my_rank:
                    return False
    return True


def _check_enum_guard(problem) -> None:
    if len(problem.teachers) > ENUM_MAX_TEACHERS or len(problem.schools) > ENUM_MAX_SCHOOLS:
        raise DomainTooLarge(
            f"enumeration over {len(problem.teachers)} teachers x "
            f"{len(problem.schools)} schools exceeds the "
            f"{ENUM_MAX_TEACHERS}x{ENUM_MAX_SCHOOLS} guard"
        )


def enumerate_matchings(problem) -> Iterator[Matching]:
    """Every feasible matching exactly once.

    A matching is a choice, per school, of at most q_s teachers; those
    choices are independent, so the stream is the cartesian product of
    per-school rosters.
    """
    _check_enum_guard(problem)
    n = len(problem.teachers)
    m = len(problem.schools)
    per_school = []
    for k in range(m):
        options = [
            mask for mask in range(1 << n) if bin(mask).count("1") <= problem.quotas[k]
        ]
        per_school.append(options)
    for combo in product(*per_school):
        assigned = [0] * n
        for k, teacher_mask in enumerate(combo):
            bit = 1 << k
            j = 0
            mask = teacher_mask
            while mask:
                if mask & 1:
                    assigned[j] |= bit
                mask >>= 1
                j += 1
        yield Matching(problem.teachers, problem.schools, tuple(assigned))


def count_matchings_closed_form(problem) -> int:
    """Independent per-school count; cross-checks the enumeration."""
    from math import comb

    n = len(problem.teachers)
    total = 1
    for q in problem.quotas:
        total *= sum(comb(n, k) for k in range(min(q, n) + 1))
    return total


def enumerate_dynamically_stable(problem: DynamicProblem) -> list[Matching]:
    return [
        mu
        for mu in enumerate_matchings(problem)
        if is_dynamically_stable(problem, mu).dynamically_stable
    ]


def is_blair_efficient(
    problem: DynamicProblem, mu: Matching
) -> tuple[bool, Optional[Matching]]:
    """No feasible matching weakly improves every teacher and strictly
    improves one, under the original choice functions.

    Returns ``(True, None)`` or ``(False, witness)``.
    """
    for nu in enumerate_matchings(problem):
        some_strict = False
        dominates = True
        for cf, theirs, ours in zip(problem.choices, nu.assigned, mu.assigned):
            if theirs == ours:
                continue
            if cf.table[theirs | ours] == theirs:
                some_strict = True
            else:
                dominates = False
                break
        if dominates and some_strict:
            return False, nu
    return True, None


def unjustified_claim_pairs(
    problem: DynamicProblem, mu: Matching
) -> frozenset[tuple[TeacherId, SchoolId]]:
    """The set U(mu): unjustified claims collapsed to (claimant, school)
    pairs, the unit the minimality comparison works with."""
    return frozenset(
        (c.claimant, c.school)
        for c in find_claims(problem, mu)
        if c.kind is ClaimKind.Unjustified
    )


def minimality_of_unjustified_claims(problem: DynamicProblem, mu: Matching) -> bool:
    """No dynamically stable matching has a strictly smaller set of
    unjustified (claimant, school) pairs."""
    verdict = is_dynamically_stable(problem, mu)
    if not verdict.dynamically_stable:
        raise NotStableInput("minimality is defined for dynamically stable matchings")
    ours = unjustified_claim_pairs(problem, mu)
    if not ours:
        return True
    for nu in enumerate_dynamically_stable(problem):
        theirs = unjustified_claim_pairs(problem, nu)
        if theirs < ours:
            return False
    return True


def blair_dominates_weakly(problem: DynamicProblem, mu: Matching, nu: Matching) -> bool:
    """Per-teacher weak Blair improvement of mu over nu, original choice
    functions."""
    return all(
        weakly_improves(cf, a, b)
        for cf, a, b in zip(problem.choices, mu.assigned, nu.assigned)
    )
