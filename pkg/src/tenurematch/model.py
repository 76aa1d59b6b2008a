"""Core domain types: teachers, schools, school subsets, choice functions,
subset preferences, matchings, and the Blair partial order.

School subsets are plain ints used as bitmasks over school indices (bit k
set means the school with index k is in the set). Choice functions are
dense lookup tables over all 2^|S| subsets, so a choice is a single list
index. Everything here is immutable and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence

from .errors import SubstitutabilityViolation, UnknownAgent

# Dense tables double in size with every school; 2^16 entries is the most
# we are willing to hold per teacher.
MAX_SCHOOLS = 16

SchoolSet = int


@dataclass(frozen=True)
class TeacherId:
    """A teacher: positional index within a problem plus a display label."""

    index: int
    label: str

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class SchoolId:
    """A school: positional index within a problem plus a display label."""

    index: int
    label: str

    def __str__(self) -> str:
        return self.label


def school_set(indices: Iterable[int]) -> SchoolSet:
    """Build a subset mask from school indices."""
    mask = 0
    for k in indices:
        mask |= 1 << k
    return mask


def set_members(mask: SchoolSet) -> tuple[int, ...]:
    """School indices contained in the mask, ascending."""
    out = []
    k = 0
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return tuple(out)


def set_labels(mask: SchoolSet, schools: Sequence[SchoolId]) -> tuple[str, ...]:
    return tuple(schools[k].label for k in set_members(mask))


def subsets_of(mask: SchoolSet) -> Iterator[SchoolSet]:
    """All subsets of the mask, including the empty set and the mask itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


@dataclass(frozen=True)
class Violation:
    """One failed property with the witness that breaks it."""

    property_name: str
    witness: tuple
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class ChoiceFunction:
    """A total choice function as a dense table over all subsets of S.

    ``table[A]`` is the chosen subset for offer mask ``A``. Construction
    enforces only that the table is total and selects subsets of the offer;
    path independence is checked separately by
    :func:`validate_choice_function`, because invalid tables are legitimate
    data for the validator itself.
    """

    n_schools: int
    table: tuple[SchoolSet, ...]

    def __post_init__(self) -> None:
        if not 0 <= self.n_schools <= MAX_SCHOOLS:
            raise ValueError(f"school count {self.n_schools} outside 0..{MAX_SCHOOLS}")
        if len(self.table) != 1 << self.n_schools:
            raise ValueError(
                f"table has {len(self.table)} entries, expected {1 << self.n_schools}"
            )
        for offered, chosen in enumerate(self.table):
            if chosen & ~offered:
                raise ValueError(
                    f"choice {chosen:b} is not a subset of the offer {offered:b}"
                )

    def choose(self, offered: SchoolSet) -> SchoolSet:
        return self.table[offered]

    def acceptable_schools(self) -> SchoolSet:
        """Mask of schools s with s in C({s})."""
        mask = 0
        for k in range(self.n_schools):
            bit = 1 << k
            if self.table[bit] == bit:
                mask |= bit
        return mask


def choose(cf: ChoiceFunction, offered: SchoolSet) -> SchoolSet:
    """C(offered). The offer must be a subset of the school universe.

    >>> cf = ChoiceFunction(1, (0, 1))
    >>> choose(cf, 0b1)
    1
    """
    if offered >> cf.n_schools:
        raise ValueError(f"offer {offered:b} outside the school universe")
    return cf.table[offered]


def validate_choice_function(cf: ChoiceFunction) -> ValidationReport:
    """Check substitutability, consistency, and path independence.

    Returns every violation found, each with a witness pair of subsets.
    An empty report is equivalent to path independence. Cost grows as
    4^|S|; intended for the small instances this library works with.
    """
    violations = []
    n = cf.n_schools
    full = 1 << n
    table = cf.table

    # substitutability: s chosen from A stays chosen when some other
    # school is removed from A
    for a in range(full):
        chosen = table[a]
        rest = a
        while rest:
            s_bit = rest & -rest
            rest ^= s_bit
            if not chosen & s_bit:
                continue
            others = a & ~s_bit
            while others:
                r_bit = others & -others
                others ^= r_bit
                smaller = a & ~r_bit
                if not table[smaller] & s_bit:
                    violations.append(
                        Violation(
                            "substitutability",
                            (a, smaller),
                            f"school bit {s_bit:b} chosen from {a:b} "
                            f"but dropped at {smaller:b}",
                        )
                    )

    # consistency: C(A) <= B <= A implies C(B) = C(A)
    for a in range(full):
        chosen = table[a]
        free = a & ~chosen
        for extra in subsets_of(free):
            b = chosen | extra
            if b == a:
                continue
            if table[b] != chosen:
                violations.append(
                    Violation(
                        "consistency",
                        (a, b),
                        f"C({a:b})={chosen:b} but C({b:b})={table[b]:b}",
                    )
                )

    # path independence, the defining equation
    for a in range(full):
        ca = table[a]
        for b in range(full):
            if table[a | b] != table[ca | b]:
                violations.append(
                    Violation(
                        "path-independence",
                        (a, b),
                        f"C({a:b} | {b:b}) != C(C({a:b}) | {b:b})",
                    )
                )

    return ValidationReport(tuple(violations))


class BlairOrdering(Enum):
    """Outcome of comparing two subsets under a teacher's Blair order."""

    StrictlyBetter = "strictly_better"
    StrictlyWorse = "strictly_worse"
    Equal = "equal"
    Incomparable = "incomparable"


def blair_compare(cf: ChoiceFunction, a: SchoolSet, b: SchoolSet) -> BlairOrdering:
    """Compare a against b: a is weakly better when a = C(a | b).

    >>> cf = ChoiceFunction(2, (0, 1, 2, 2))  # always prefers school 1
    >>> blair_compare(cf, 0b10, 0b01)
    <BlairOrdering.StrictlyBetter: 'strictly_better'>
    """
    if a == b:
        return BlairOrdering.Equal
    joined = cf.table[a | b]
    if joined == a:
        return BlairOrdering.StrictlyBetter
    if joined == b:
        return BlairOrdering.StrictlyWorse
    return BlairOrdering.Incomparable


def weakly_improves(cf: ChoiceFunction, a: SchoolSet, b: SchoolSet) -> bool:
    """a Blair-weakly-better than b: equal or strictly better."""
    return a == b or cf.table[a | b] == a


def s_truncate(cf: ChoiceFunction, school: SchoolId | int) -> ChoiceFunction:
    """The s-truncation: choices are made as if s were never offered.

    Preserves path independence and is idempotent.
    """
    k = school.index if isinstance(school, SchoolId) else school
    if not 0 <= k < cf.n_schools:
        raise ValueError(f"school index {k} outside the universe")
    drop = ~(1 << k)
    table = tuple(cf.table[a & drop] for a in range(len(cf.table)))
    return ChoiceFunction(cf.n_schools, table)


@dataclass(frozen=True)
class SubsetPreference:
    """A strict order over school subsets, best first.

    The ranking must contain the empty set. Subsets missing from the
    ranking are unacceptable: they sit below the empty set, ordered among
    themselves by their mask value so that worst/best selections stay
    deterministic. Entries listed after the empty set are declared
    unacceptable explicitly; they are never chosen either.
    """

    n_schools: int
    ranking: tuple[SchoolSet, ...]

    def __post_init__(self) -> None:
        if len(set(self.ranking)) != len(self.ranking):
            raise ValueError("ranking contains duplicates")
        if 0 not in self.ranking:
            raise ValueError("ranking must contain the empty set")
        full = 1 << self.n_schools
        for mask in self.ranking:
            if not 0 <= mask < full:
                raise ValueError(f"subset {mask:b} outside the school universe")

    def position(self, mask: SchoolSet) -> tuple[int, int]:
        """Sort key: listed subsets by list position, the rest below."""
        try:
            return (0, self.ranking.index(mask))
        except ValueError:
            return (1, mask)

    def prefers(self, a: SchoolSet, b: SchoolSet) -> bool:
        """True when a is strictly preferred to b."""
        return a != b and self.position(a) < self.position(b)

    def best(self, options: Iterable[SchoolSet]) -> SchoolSet:
        return min(options, key=self.position)

    def worst(self, options: Iterable[SchoolSet]) -> SchoolSet:
        return max(options, key=self.position)


def induce_choice(pref: SubsetPreference) -> ChoiceFunction:
    """Choice function induced by a subset preference: the best-ranked
    subset of the offer wins.

    Induced tables are always consistent; substitutability can fail, in
    which case the report is inadmissible and this raises
    :class:`SubstitutabilityViolation` with a witness.

    >>> p = SubsetPreference(2, (0b11, 0b01, 0b10, 0))
    >>> induce_choice(p).choose(0b11)
    3
    """
    n = pref.n_schools
    # entries ranked below the empty set are never the max of any offer
    effective = pref.ranking[: pref.ranking.index(0) + 1]
    table = []
    for offered in range(1 << n):
        for mask in effective:
            if mask & ~offered == 0:
                table.append(mask)
                break
    cf = ChoiceFunction(n, tuple(table))
    report = validate_choice_function(cf)
    if not report.ok:
        first = report.violations[0]
        raise SubstitutabilityViolation(
            f"induced choice violates {first.property_name}: {first.detail}",
            witness=first.witness,
        )
    return cf


@dataclass(frozen=True)
class Matching:
    """Assignment of school subsets to teachers.

    ``assigned[j]`` is the school mask of ``teachers[j]``. The school-side
    view is derived on demand, so the two sides can never disagree.
    """

    teachers: tuple[TeacherId, ...]
    schools: tuple[SchoolId, ...]
    assigned: tuple[SchoolSet, ...]

    def __post_init__(self) -> None:
        if len(self.assigned) != len(self.teachers):
            raise ValueError("one assignment per teacher required")

    def of(self, teacher: TeacherId) -> SchoolSet:
        j = teacher.index
        if j >= len(self.teachers) or self.teachers[j] != teacher:
            raise UnknownAgent(f"{teacher.label} is not on this matching's roster")
        return self.assigned[j]

    def school_members(self, school: SchoolId | int) -> tuple[TeacherId, ...]:
        k = school.index if isinstance(school, SchoolId) else school
        bit = 1 << k
        return tuple(t for t, mask in zip(self.teachers, self.assigned) if mask & bit)

    def by_teacher(self) -> dict[TeacherId, SchoolSet]:
        return dict(zip(self.teachers, self.assigned))

    def by_school(self) -> dict[SchoolId, tuple[TeacherId, ...]]:
        return {s: self.school_members(s) for s in self.schools}

    def is_empty(self) -> bool:
        return all(mask == 0 for mask in self.assigned)


def empty_matching(teachers: Sequence[TeacherId], schools: Sequence[SchoolId]) -> Matching:
    return Matching(tuple(teachers), tuple(schools), (0,) * len(teachers))


def validate_matching(problem, mu: Matching) -> ValidationReport:
    """Check matching conditions against a problem's roster and quotas.

    Conditions (i) assignments within S, (iii) quotas respected. The
    bilateral conditions (ii)/(iv) hold structurally in this encoding.
    Raises :class:`UnknownAgent` when the matching's roster differs from
    the problem's.
    """
    if mu.teachers != problem.teachers or mu.schools != problem.schools:
        raise UnknownAgent("matching roster does not match the problem roster")
    violations = []
    full = 1 << len(problem.schools)
    for teacher, mask in zip(mu.teachers, mu.assigned):
        if not 0 <= mask < full:
            violations.append(
                Violation(
                    "assignment-in-universe",
                    (teacher.label, mask),
                    f"{teacher.label} assigned {mask:b}, outside the school universe",
                )
            )
    for k, school in enumerate(problem.schools):
        bit = 1 << k
        load = sum(1 for mask in mu.assigned if mask & bit)
        if load > problem.quotas[k]:
            violations.append(
                Violation(
                    "quota",
                    (school.label, load),
                    f"{school.label} holds {load} teachers, quota {problem.quotas[k]}",
                )
            )
    return ValidationReport(tuple(violations))
