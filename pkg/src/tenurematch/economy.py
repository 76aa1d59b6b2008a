"""Multi-period economies and the manipulation laboratory.

An economy fixes the population flow, the priorities, the quotas, the
initial matching, and a mechanism, then produces one matching per
period. On top of the simulator sit the strategic tools: option sets
(all assignments a teacher can end up with while the co-reports range
over a domain) and the search for dynamic manipulations, classified by
obviousness.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Union

from .da import DaTrace
from .domains import canonical_preference, enumerate_path_independent
from .dynamic import DynamicProblem, run_cohort_da, run_trda
from .errors import DomainTooLarge, InvalidProblem, UnknownAgent
from .model import (
    ChoiceFunction,
    Matching,
    SchoolId,
    SchoolSet,
    SubsetPreference,
    TeacherId,
    induce_choice,
)
from .priority import PriorityProfile, validate_priority_consistency
from .treada import ConsentProfile, TreadaLog, run_treada

MECHANISMS = ("trda", "treada", "cohort")

#: Sentinel for "every substitutable report there is", up to outcome
#: equivalence. Only available while the subset lattice stays small.
EXHAUSTIVE = "exhaustive"

_INDUCED: dict[tuple[int, tuple[int, ...]], ChoiceFunction] = {}


def _induced(pref: SubsetPreference) -> ChoiceFunction:
    key = (pref.n_schools, pref.ranking)
    cf = _INDUCED.get(key)
    if cf is None:
        cf = induce_choice(pref)
        _INDUCED[key] = cf
    return cf


@dataclass(frozen=True)
class PeriodSpec:
    """One period of an economy: who is present, how schools rank them,
    and the reports of those entering now.

    ``teachers`` lists the present teachers in ascending index order
    using economy-wide ids. ``entrants`` pairs each first-time teacher
    with her declared preference; reports are never revised later.
    """

    teachers: tuple[TeacherId, ...]
    priorities: PriorityProfile
    entrants: tuple[tuple[TeacherId, SubsetPreference], ...]

    def entrant_map(self) -> dict[TeacherId, SubsetPreference]:
        return dict(self.entrants)


@dataclass(frozen=True)
class Economy:
    """A population flow plus a mechanism.

    ``initial`` is the inherited matching before the first period,
    given sparsely as (teacher, school set) pairs over first-period
    teachers. ``consent`` only matters when ``mechanism`` is
    ``"treada"``: either ``"all"``, ``"none"``, or a set of labels.
    """

    schools: tuple[SchoolId, ...]
    quotas: tuple[int, ...]
    initial: tuple[tuple[TeacherId, SchoolSet], ...]
    periods: tuple[PeriodSpec, ...]
    mechanism: str = "trda"
    consent: Union[str, frozenset[str]] = "all"

    def __post_init__(self) -> None:
        m = len(self.schools)
        if len(self.quotas) != m:
            raise InvalidProblem("one quota per school required")
        for k, school in enumerate(self.schools):
            if school.index != k:
                raise InvalidProblem(f"school {school.label} misindexed at {k}")
        if any(q < 0 for q in self.quotas):
            raise InvalidProblem("quotas must be nonnegative")
        if not self.periods:
            raise InvalidProblem("an economy needs at least one period")
        if self.mechanism not in MECHANISMS:
            raise InvalidProblem(f"unknown mechanism {self.mechanism!r}")

        label_of: dict[int, str] = {}
        declared: set[int] = set()
        for number, period in enumerate(self.periods, start=1):
            last = -1
            for teacher in period.teachers:
                if teacher.index <= last:
                    raise InvalidProblem(
                        f"period {number} roster must ascend by teacher index"
                    )
                last = teacher.index
                if label_of.setdefault(teacher.index, teacher.label) != teacher.label:
                    raise InvalidProblem(
                        f"teacher index {teacher.index} reused for a different label"
                    )
            roster = frozenset(period.teachers)
            if period.priorities.schools != self.schools:
                raise InvalidProblem(
                    f"period {number} priorities cover the wrong schools"
                )
            for school, listing in zip(self.schools, period.priorities.order):
                if frozenset(listing) != roster:
                    raise InvalidProblem(
                        f"period {number} priority list of {school.label} "
                        "does not rank exactly the roster"
                    )
            fresh = {t.index for t in period.teachers} - declared
            entrant_ids = [t.index for t in self._entrant_teachers(period)]
            if len(set(entrant_ids)) != len(entrant_ids):
                raise InvalidProblem(f"period {number} declares a teacher twice")
            if set(entrant_ids) != fresh:
                raise InvalidProblem(
                    f"period {number} entrants must be exactly the first-time "
                    "teachers of the period"
                )
            for teacher, pref in period.entrants:
                if pref.n_schools != m:
                    raise InvalidProblem(
                        f"report of {teacher.label} covers {pref.n_schools} "
                        f"schools, expected {m}"
                    )
                _induced(pref)
            declared |= fresh
        indices = sorted(label_of)
        if indices != list(range(len(indices))):
            raise InvalidProblem("teacher indices must be contiguous from zero")

        first = frozenset(self.periods[0].teachers)
        loads = [0] * m
        last_idx = -1
        for teacher, mask in self.initial:
            if teacher.index <= last_idx:
                raise InvalidProblem("initial matching must ascend by teacher index")
            last_idx = teacher.index
            if teacher not in first:
                raise InvalidProblem(
                    f"{teacher.label} holds an initial assignment but is not "
                    "present in period 1"
                )
            if mask <= 0 or mask >> m:
                raise InvalidProblem(
                    f"initial assignment of {teacher.label} is not a nonempty "
                    "set of known schools"
                )
            for k in range(m):
                if mask & (1 << k):
                    loads[k] += 1
        for k, school in enumerate(self.schools):
            if loads[k] > self.quotas[k]:
                raise InvalidProblem(f"initial matching overfills {school.label}")

        if isinstance(self.consent, str):
            if self.consent not in ("all", "none"):
                raise InvalidProblem(
                    "consent must be 'all', 'none', or a set of labels"
                )
        else:
            object.__setattr__(self, "consent", frozenset(self.consent))
            known = {label for label in label_of.values()}
            stray = set(self.consent) - known
            if stray:
                raise InvalidProblem(f"consent names unknown teachers: {sorted(stray)}")

        report = validate_priority_consistency(self)
        if not report.ok:
            raise InvalidProblem(report.violations[0].detail)

    @staticmethod
    def _entrant_teachers(period: PeriodSpec) -> tuple[TeacherId, ...]:
        return tuple(t for t, _ in period.entrants)

    @cached_property
    def teacher_universe(self) -> tuple[TeacherId, ...]:
        """Every teacher appearing in some period, ascending by index."""
        seen: dict[int, TeacherId] = {}
        for period in self.periods:
            for teacher in period.teachers:
                seen.setdefault(teacher.index, teacher)
        return tuple(seen[i] for i in sorted(seen))

    @cached_property
    def _entry(self) -> dict[TeacherId, int]:
        entry: dict[TeacherId, int] = {}
        for number, period in enumerate(self.periods, start=1):
            for teacher, _ in period.entrants:
                entry[teacher] = number
        return entry

    @cached_property
    def _declared(self) -> dict[TeacherId, SubsetPreference]:
        out: dict[TeacherId, SubsetPreference] = {}
        for period in self.periods:
            out.update(period.entrants)
        return out

    @cached_property
    def _by_label(self) -> dict[str, TeacherId]:
        return {t.label: t for t in self.teacher_universe}

    def resolve(self, teacher: Union[TeacherId, str]) -> TeacherId:
        if isinstance(teacher, TeacherId):
            if teacher in self._entry:
                return teacher
            raise UnknownAgent(f"teacher {teacher.label} is not in this economy")
        found = self._by_label.get(teacher)
        if found is None:
            raise UnknownAgent(f"teacher {teacher} is not in this economy")
        return found

    def entry_period(self, teacher: Union[TeacherId, str]) -> int:
        return self._entry[self.resolve(teacher)]

    def preference_of(self, teacher: Union[TeacherId, str]) -> SubsetPreference:
        return self._declared[self.resolve(teacher)]

    def initial_assignment(self, teacher: Union[TeacherId, str]) -> SchoolSet:
        t = self.resolve(teacher)
        for held, mask in self.initial:
            if held == t:
                return mask
        return 0


@dataclass(frozen=True)
class PeriodOutcome:
    """What one simulated period produced, with the problem it solved."""

    period: int
    problem: DynamicProblem
    matching: Matching
    trace: Optional[Union[DaTrace, TreadaLog]]


def _consent_profile(economy: Economy, teachers: tuple[TeacherId, ...]) -> ConsentProfile:
    if economy.consent == "all":
        return ConsentProfile.all_of(teachers)
    if economy.consent == "none":
        return ConsentProfile.none_of(teachers)
    return ConsentProfile.of(teachers, set(economy.consent))


def _run_simulation(
    economy: Economy,
    tables: Sequence[ChoiceFunction],
    upto: Optional[int],
    want_traces: bool,
) -> list[PeriodOutcome]:
    horizon = len(economy.periods) if upto is None else upto
    carry: dict[TeacherId, SchoolSet] = dict(economy.initial)
    joined: dict[TeacherId, int] = {t: 0 for t, _ in economy.initial}
    outcomes: list[PeriodOutcome] = []
    for number, period in enumerate(economy.periods[:horizon], start=1):
        members = period.teachers
        locals_ = tuple(TeacherId(j, t.label) for j, t in enumerate(members))
        local_of = dict(zip(members, locals_))
        problem = DynamicProblem(
            locals_,
            economy.schools,
            tuple(tables[t.index] for t in members),
            PriorityProfile(
                economy.schools,
                tuple(
                    tuple(local_of[t] for t in listing)
                    for listing in period.priorities.order
                ),
            ),
            economy.quotas,
            tuple(carry.get(t, 0) for t in members),
        )
        trace: Optional[Union[DaTrace, TreadaLog]]
        if economy.mechanism == "trda":
            matching, trace = run_trda(problem)
        elif economy.mechanism == "treada":
            matching, log = run_treada(problem, _consent_profile(economy, locals_))
            trace = log
        else:
            stages = sorted({joined.get(t, number) for t in members})
            cohorts = [
                [local_of[t] for t in members if joined.get(t, number) == stage]
                for stage in stages
            ]
            matching = run_cohort_da(problem, cohorts)
            trace = None
        carry = {}
        for t, local in zip(members, locals_):
            mask = matching.of(local)
            if mask:
                carry[t] = mask
                joined.setdefault(t, number)
        outcomes.append(
            PeriodOutcome(number, problem, matching, trace if want_traces else None)
        )
    return outcomes


def _report_tables(
    economy: Economy,
    overrides: Optional[Mapping[Union[TeacherId, str], SubsetPreference]],
) -> list[ChoiceFunction]:
    prefs = dict(economy._declared)
    if overrides:
        for key, pref in overrides.items():
            teacher = economy.resolve(key)
            if pref.n_schools != len(economy.schools):
                raise InvalidProblem(
                    f"override for {teacher.label} covers the wrong school count"
                )
            prefs[teacher] = pref
    return [_induced(prefs[t]) for t in economy.teacher_universe]


def simulate_detailed(
    economy: Economy,
    overrides: Optional[Mapping[Union[TeacherId, str], SubsetPreference]] = None,
    upto: Optional[int] = None,
) -> list[PeriodOutcome]:
    """Run the economy period by period, keeping problems and traces.

    ``overrides`` substitutes entry reports by teacher; everything else
    is taken as declared. The inherited matching of each period is the
    previous outcome restricted to the current roster, so departures
    free capacity and an absent teacher loses her standing.
    """
    return _run_simulation(economy, _report_tables(economy, overrides), upto, True)


def simulate(
    economy: Economy,
    overrides: Optional[Mapping[Union[TeacherId, str], SubsetPreference]] = None,
) -> list[tuple[int, Matching]]:
    """The matching the mechanism produces at each period."""
    return [
        (out.period, out.matching)
        for out in _run_simulation(economy, _report_tables(economy, overrides), None, False)
    ]


# An adversary co-report assignment, one preference per non-focal
# teacher, keyed by label and sorted for reproducibility.
AdversaryAssignment = tuple[tuple[str, SubsetPreference], ...]


@dataclass(frozen=True)
class OptionSet:
    """Assignments a teacher can reach at one period, over a domain of
    co-reports.

    ``witnesses`` pairs every outcome with one full co-report
    assignment producing it. ``exhaustive`` records whether the domain
    covered every substitutable report up to outcome equivalence.
    """

    teacher: TeacherId
    period: int
    outcomes: frozenset[SchoolSet]
    exhaustive: bool
    witnesses: tuple[tuple[SchoolSet, AdversaryAssignment], ...]

    def witness_for(self, outcome: SchoolSet) -> AdversaryAssignment:
        for mask, assignment in self.witnesses:
            if mask == outcome:
                return assignment
        raise KeyError(outcome)


class Obviousness(Enum):
    NOT_OBVIOUS = "not-obvious"
    OBVIOUS_BY_WORST = "obvious-by-worst"
    OBVIOUS_BY_BEST = "obvious-by-best"


@dataclass(frozen=True)
class ComparisonWitness:
    """One side of a worst/worst or best/best comparison."""

    outcome: SchoolSet
    assignment: AdversaryAssignment


@dataclass(frozen=True)
class ManipulationCertificate:
    worst_truthful: ComparisonWitness
    worst_misreport: ComparisonWitness
    best_truthful: ComparisonWitness
    best_misreport: ComparisonWitness


@dataclass(frozen=True)
class ManipulationFinding:
    """A profitable misreport, with the evidence.

    ``gained`` versus ``truthful`` is the period-``period`` comparison
    under truthful co-reports that makes the misreport a dynamic
    manipulation in the first place. The obviousness verdict compares
    worst and best option-set outcomes under the teacher's true
    preference; with a sampled domain (``exhaustive`` false) a verdict
    is evidence over that domain only.
    """

    teacher: TeacherId
    true_preference: SubsetPreference
    misreport: SubsetPreference
    period: int
    gained: SchoolSet
    truthful: SchoolSet
    obviousness: Obviousness
    exhaustive: bool
    certificate: ManipulationCertificate


class _Domain:
    """Parsed adversary domain: a shared pool or explicit profiles."""

    def __init__(
        self,
        economy: Economy,
        spec: Union[str, Sequence[SubsetPreference], Sequence[Mapping]],
    ) -> None:
        m = len(economy.schools)
        self.exhaustive = False
        self.profiles: Optional[list[dict[TeacherId, SubsetPreference]]] = None
        self.pool: Optional[list[SubsetPreference]] = None
        if isinstance(spec, str):
            if spec != EXHAUSTIVE:
                raise InvalidProblem(f"unknown adversary domain {spec!r}")
            if m > 3:
                raise DomainTooLarge(
                    f"exhaustive report domain is unavailable for {m} schools"
                )
            self.exhaustive = True
            self.pool = [canonical_preference(cf) for cf in enumerate_path_independent(m)]
            return
        entries = list(spec)
        if not entries:
            raise InvalidProblem("adversary domain must be nonempty")
        if isinstance(entries[0], SubsetPreference):
            for pref in entries:
                if not isinstance(pref, SubsetPreference) or pref.n_schools != m:
                    raise InvalidProblem("adversary pool must hold reports over S")
            self.pool = _class_representatives(entries)
            return
        self.profiles = []
        for entry in entries:
            profile = {
                economy.resolve(key): pref for key, pref in dict(entry).items()
            }
            for pref in profile.values():
                if pref.n_schools != m:
                    raise InvalidProblem("profile report covers the wrong school count")
            self.profiles.append(profile)


def _class_representatives(prefs: Iterable[SubsetPreference]) -> list[SubsetPreference]:
    """One report per induced choice function, first occurrence kept.

    Mechanism outcomes read reports only through the induced choice
    function, so collapsing outcome-equivalent reports changes no
    option set.
    """
    reps: dict[tuple[int, ...], SubsetPreference] = {}
    for pref in prefs:
        reps.setdefault(_induced(pref).table, pref)
    return list(reps.values())


class _SimulationCache:
    """Memo of full-horizon runs keyed by everyone's induced tables."""

    def __init__(self, economy: Economy) -> None:
        self.economy = economy
        self.runs: dict[tuple[tuple[int, ...], ...], list[dict[int, SchoolSet]]] = {}

    def outcomes(self, tables: Sequence[ChoiceFunction]) -> list[dict[int, SchoolSet]]:
        key = tuple(cf.table for cf in tables)
        hit = self.runs.get(key)
        if hit is None:
            sim = _run_simulation(self.economy, tables, None, False)
            hit = [
                {
                    t.index: out.matching.assigned[j]
                    for j, t in enumerate(
                        self.economy.periods[out.period - 1].teachers
                    )
                }
                for out in sim
            ]
            self.runs[key] = hit
        return hit


def _assignment_of(
    economy: Economy,
    focal: TeacherId,
    reports: Mapping[TeacherId, SubsetPreference],
) -> AdversaryAssignment:
    return tuple(
        sorted(
            (t.label, reports[t])
            for t in economy.teacher_universe
            if t != focal
        )
    )


def _option_set(
    economy: Economy,
    focal: TeacherId,
    report: SubsetPreference,
    period: int,
    domain: _Domain,
    cache: _SimulationCache,
) -> OptionSet:
    if not 1 <= period <= len(economy.periods):
        raise InvalidProblem(f"economy has no period {period}")
    if focal not in economy.periods[period - 1].teachers:
        raise UnknownAgent(
            f"{focal.label} is not present at period {period}"
        )
    base = dict(economy._declared)
    base[focal] = report
    found: dict[SchoolSet, AdversaryAssignment] = {}

    def record(reports: Mapping[TeacherId, SubsetPreference]) -> None:
        tables = [_induced(reports[t]) for t in economy.teacher_universe]
        mask = cache.outcomes(tables)[period - 1][focal.index]
        if mask not in found:
            found[mask] = _assignment_of(economy, focal, reports)

    if domain.profiles is not None:
        for profile in domain.profiles:
            if focal in profile:
                raise InvalidProblem(
                    f"adversary profile must not assign the focal teacher "
                    f"{focal.label}"
                )
            reports = dict(base)
            reports.update(profile)
            record(reports)
    else:
        # Reports of teachers entering after the evaluation period
        # cannot reach it; pinning them at their declarations loses no
        # outcome and keeps the product small.
        varied = [
            t
            for t in economy.teacher_universe
            if t != focal and economy.entry_period(t) <= period
        ]
        candidate_sets = [list(domain.pool) for _ in varied]
        for point in itertools.product(*candidate_sets):
            reports = dict(base)
            reports.update(zip(varied, point))
            record(reports)

    return OptionSet(
        teacher=focal,
        period=period,
        outcomes=frozenset(found),
        exhaustive=domain.exhaustive,
        witnesses=tuple(sorted(found.items())),
    )


def option_set(
    economy: Economy,
    teacher: Union[TeacherId, str],
    report: SubsetPreference,
    period: int,
    adversary_domain: Union[str, Sequence[SubsetPreference], Sequence[Mapping]],
) -> OptionSet:
    """Assignments ``teacher`` can end up with at ``period`` when she
    files ``report`` and the co-reports range over the domain.

    The domain is either a pool of reports (co-reports take the full
    cartesian product over the pool), a list of explicit co-report
    profiles, or ``"exhaustive"`` for every substitutable report, which
    needs at most three schools.
    """
    focal = economy.resolve(teacher)
    domain = _Domain(economy, adversary_domain)
    return _option_set(
        economy, focal, report, period, domain, _SimulationCache(economy)
    )


def _classify(
    true_pref: SubsetPreference, truthful: OptionSet, deviated: OptionSet
) -> tuple[Obviousness, ManipulationCertificate]:
    worst_true = true_pref.worst(truthful.outcomes)
    worst_dev = true_pref.worst(deviated.outcomes)
    best_true = true_pref.best(truthful.outcomes)
    best_dev = true_pref.best(deviated.outcomes)
    if true_pref.prefers(worst_dev, worst_true):
        verdict = Obviousness.OBVIOUS_BY_WORST
    elif true_pref.prefers(best_dev, best_true):
        verdict = Obviousness.OBVIOUS_BY_BEST
    else:
        verdict = Obviousness.NOT_OBVIOUS
    certificate = ManipulationCertificate(
        worst_truthful=ComparisonWitness(worst_true, truthful.witness_for(worst_true)),
        worst_misreport=ComparisonWitness(worst_dev, deviated.witness_for(worst_dev)),
        best_truthful=ComparisonWitness(best_true, truthful.witness_for(best_true)),
        best_misreport=ComparisonWitness(best_dev, deviated.witness_for(best_dev)),
    )
    return verdict, certificate


def find_dynamic_manipulations(
    economy: Economy,
    teacher: Union[TeacherId, str],
    misreport_domain: Union[str, Sequence[SubsetPreference]],
    adversary_domain: Union[str, Sequence[SubsetPreference], Sequence[Mapping]],
) -> list[ManipulationFinding]:
    """Every profitable misreport of ``teacher``, one finding per
    (misreport class, gaining period), each with an obviousness verdict.

    A misreport counts as a dynamic manipulation when, with everyone
    else truthful, it strictly improves the teacher's assignment at
    some period from her entry on. Worst and best comparisons are then
    taken over option sets computed on ``adversary_domain``.
    """
    focal = economy.resolve(teacher)
    true_pref = economy.preference_of(focal)
    true_table = _induced(true_pref).table
    if isinstance(misreport_domain, str):
        if misreport_domain != EXHAUSTIVE:
            raise InvalidProblem(f"unknown misreport domain {misreport_domain!r}")
        m = len(economy.schools)
        if m > 3:
            raise DomainTooLarge(
                f"exhaustive report domain is unavailable for {m} schools"
            )
        candidates = [canonical_preference(cf) for cf in enumerate_path_independent(m)]
    else:
        candidates = _class_representatives(misreport_domain)
    candidates = [p for p in candidates if _induced(p).table != true_table]

    domain = _Domain(economy, adversary_domain)
    cache = _SimulationCache(economy)
    baseline = cache.outcomes(_report_tables(economy, None))
    entry = economy.entry_period(focal)
    truthful_options: dict[int, OptionSet] = {}

    findings: list[ManipulationFinding] = []
    for misreport in candidates:
        deviated = cache.outcomes(_report_tables(economy, {focal: misreport}))
        for period in range(entry, len(economy.periods) + 1):
            if focal not in economy.periods[period - 1].teachers:
                continue
            gained = deviated[period - 1][focal.index]
            truthful = baseline[period - 1][focal.index]
            if not true_pref.prefers(gained, truthful):
                continue
            if period not in truthful_options:
                truthful_options[period] = _option_set(
                    economy, focal, true_pref, period, domain, cache
                )
            deviated_options = _option_set(
                economy, focal, misreport, period, domain, cache
            )
            verdict, certificate = _classify(
                true_pref, truthful_options[period], deviated_options
            )
            findings.append(
                ManipulationFinding(
                    teacher=focal,
                    true_preference=true_pref,
                    misreport=misreport,
                    period=period,
                    gained=gained,
                    truthful=truthful,
                    obviousness=verdict,
                    exhaustive=domain.exhaustive,
                    certificate=certificate,
                )
            )
    return findings


def find_obvious_manipulations(
    economy: Economy,
    teacher: Union[TeacherId, str],
    misreport_domain: Union[str, Sequence[SubsetPreference]],
    adversary_domain: Union[str, Sequence[SubsetPreference], Sequence[Mapping]],
) -> list[ManipulationFinding]:
    """The dynamic manipulations whose worst or best option-set outcome
    beats truth-telling's under the true preference."""
    return [
        finding
        for finding in find_dynamic_manipulations(
            economy, teacher, misreport_domain, adversary_domain
        )
        if finding.obviousness is not Obviousness.NOT_OBVIOUS
    ]
