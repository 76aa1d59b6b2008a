"""Deterministic instance families behind the theorem checks.

Three generators and one search live here. ``grid_problems`` yields
single-period problems covering every path-independent choice function
in every roster slot, every priority order, every quota mix in {1, 2},
and every feasible inherited matching; cells whose full product is small
are expanded completely, larger cells are sampled on coprime strides so
that each slot still cycles through its whole domain. ``random_problem``
draws one seeded instance at sizes beyond the exhaustive range.
``tenure_economies`` rejection-samples multi-period economies that stay
lexicographic by tenure at every period the mechanism realizes.

``obvious_manipulation_search`` is the exhaustive no-obvious-manipulation
check for one economy structure. It quantifies over every substitutable
true preference up to comparison signature, every path-independent
misreport class, and every co-report class profile, sharing one
simulation memo across all of them. True-preference profiles whose own
truthful run breaks the employed-outrank-everyone priority condition at
some period fall outside the covered economy family and are skipped;
misreports and option-set co-reports stay unrestricted.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from random import Random
from typing import Iterator, Sequence

from .domains import (
    canonical_preference,
    enumerate_path_independent,
    order_signatures,
    random_choice_function,
    random_substitutable_preference,
)
from .dynamic import DynamicProblem
from .economy import Economy, PeriodSpec, _SimulationCache, simulate_detailed
from .errors import DomainTooLarge, TenureMatchError
from .model import ChoiceFunction, SchoolId, TeacherId, induce_choice
from .priority import (
    PriorityProfile,
    first_cohort_inversion,
    is_lexicographic_by_tenure,
)

GRID_MAX_TEACHERS = 3
GRID_MAX_SCHOOLS = 3

# Cells whose (choice, priority, quota) product stays under this bound
# are expanded in full, inherited matchings included.
_FULL_CELL_CAP = 600

# Instance budgets for the strided cells. Each is a multiple of the
# priority-profile count of its cell, so priorities cycle completely.
_STRIDED_BUDGET = {(3, 2): 1728, (2, 3): 2448, (3, 3): 2160}


def _teacher_ids(n: int) -> tuple[TeacherId, ...]:
    return tuple(TeacherId(j, f"i{j + 1}") for j in range(n))


def _school_ids(m: int) -> tuple[SchoolId, ...]:
    return tuple(SchoolId(k, f"s{k + 1}") for k in range(m))


def _fixed_points(cf: ChoiceFunction) -> list[int]:
    return [mask for mask in range(1 << cf.n_schools) if cf.table[mask] == mask]


def _feasible(previous: Sequence[int], quotas: Sequence[int]) -> bool:
    for k, quota in enumerate(quotas):
        bit = 1 << k
        if sum(1 for mask in previous if mask & bit) > quota:
            return False
    return True


def _repair_previous(previous: list[int], quotas: Sequence[int]) -> tuple[int, ...]:
    # Overfull schools shed their highest-indexed holders.
    for k, quota in enumerate(quotas):
        bit = 1 << k
        holders = [j for j, mask in enumerate(previous) if mask & bit]
        while len(holders) > quota:
            previous[holders.pop()] &= ~bit
    return tuple(previous)


def _coprime_strides(modulus: int, count: int) -> list[int]:
    out = []
    step = 1
    while len(out) < count:
        if math.gcd(step, modulus) == 1:
            out.append(step)
        step += 1
    return out


def _cell_instances(n: int, m: int) -> Iterator[tuple[str, DynamicProblem]]:
    teachers = _teacher_ids(n)
    schools = _school_ids(m)
    cfs = enumerate_path_independent(m)
    count = len(cfs)
    perms = list(itertools.permutations(teachers))
    quota_space = list(itertools.product((1, 2), repeat=m))
    combos = count**n * len(perms) ** m * len(quota_space)
    index = 0
    size = 1 << m
    if combos <= _FULL_CELL_CAP:
        for choice in itertools.product(cfs, repeat=n):
            for quotas in quota_space:
                kept = [
                    prev
                    for prev in itertools.product(range(size), repeat=n)
                    if _feasible(prev, quotas)
                ]
                for mix in itertools.product(perms, repeat=m):
                    priorities = PriorityProfile(schools, mix)
                    for prev in kept:
                        yield (
                            f"grid{n}x{m}#{index}",
                            DynamicProblem(
                                teachers, schools, choice, priorities, quotas, prev
                            ),
                        )
                        index += 1
        return
    budget = _STRIDED_BUDGET[(n, m)]
    strides = _coprime_strides(count, n)
    prio_total = len(perms) ** m
    for r in range(budget):
        choice = tuple(cfs[(r * strides[j] + j) % count] for j in range(n))
        mix_index = r % prio_total
        mix = tuple(
            perms[(mix_index // len(perms) ** k) % len(perms)] for k in range(m)
        )
        quotas = quota_space[(r * 5 + 1) % len(quota_space)]
        prev = [(r * 7 + 5 * j) % size for j in range(n)]
        yield (
            f"grid{n}x{m}#{r}",
            DynamicProblem(
                teachers,
                schools,
                choice,
                PriorityProfile(schools, mix),
                quotas,
                _repair_previous(prev, quotas),
            ),
        )


def grid_problems() -> Iterator[tuple[str, DynamicProblem]]:
    """Labelled single-period problems over every roster and school
    count up to three, deterministic across runs."""
    for n in range(1, GRID_MAX_TEACHERS + 1):
        for m in range(1, GRID_MAX_SCHOOLS + 1):
            yield from _cell_instances(n, m)


def random_problem(
    n_teachers: int, n_schools: int, rng: Random, max_quota: int = 2
) -> DynamicProblem:
    """One seeded instance: random path-independent choice functions,
    shuffled priorities, quotas in 1..max_quota, and an arbitrary
    inherited matching trimmed to fit the quotas."""
    teachers = _teacher_ids(n_teachers)
    schools = _school_ids(n_schools)
    choice = tuple(random_choice_function(n_schools, rng) for _ in teachers)
    quotas = tuple(rng.randint(1, max_quota) for _ in schools)
    order = []
    for _ in schools:
        listing = list(teachers)
        rng.shuffle(listing)
        order.append(tuple(listing))
    previous = [rng.randrange(1 << n_schools) for _ in teachers]
    return DynamicProblem(
        teachers,
        schools,
        choice,
        PriorityProfile(schools, tuple(order)),
        quotas,
        _repair_previous(previous, quotas),
    )


def _tenure_candidate(
    rng: Random, max_schools: int, max_periods: int
) -> Economy | None:
    m = rng.randint(1, max_schools)
    schools = _school_ids(m)
    quotas = tuple(rng.randint(1, 2) for _ in schools)
    horizon = rng.randint(1, max_periods)

    teachers: list[TeacherId] = []
    prefs: dict[TeacherId, object] = {}

    def enroll() -> TeacherId:
        teacher = TeacherId(len(teachers), f"i{len(teachers) + 1}")
        teachers.append(teacher)
        prefs[teacher] = random_substitutable_preference(m, rng)
        return teacher

    first_roster = [enroll() for _ in range(rng.randint(1, 3))]

    loads = [0] * m
    initial: list[tuple[TeacherId, int]] = []
    for teacher in first_roster:
        if rng.random() >= 0.8:
            continue
        table = induce_choice(prefs[teacher]).table
        room = [
            mask
            for mask in range(1, 1 << m)
            if table[mask] == mask
            and all(
                loads[k] + 1 <= quotas[k] for k in range(m) if mask >> k & 1
            )
        ]
        if not room:
            continue
        mask = rng.choice(room)
        initial.append((teacher, mask))
        for k in range(m):
            if mask >> k & 1:
                loads[k] += 1

    tenured = {teacher for teacher, _ in initial}
    # Every school ranks the initially matched block on top; later
    # entrants are appended at the bottom, so relative orders never
    # flip across periods.
    orders: list[list[TeacherId]] = []
    for _ in schools:
        top = [t for t in first_roster if t in tenured]
        bottom = [t for t in first_roster if t not in tenured]
        rng.shuffle(top)
        rng.shuffle(bottom)
        orders.append(top + bottom)

    roster = list(first_roster)
    periods = [
        PeriodSpec(
            tuple(roster),
            PriorityProfile(schools, tuple(tuple(o) for o in orders)),
            tuple((t, prefs[t]) for t in roster),
        )
    ]
    for _ in range(horizon - 1):
        stayers = [t for t in roster if rng.random() < 0.85]
        entrants = [enroll() for _ in range(rng.randint(0, 2))]
        roster = stayers + entrants
        for order in orders:
            order[:] = [t for t in order if t in set(stayers)]
            tail = list(entrants)
            rng.shuffle(tail)
            order.extend(tail)
        periods.append(
            PeriodSpec(
                tuple(roster),
                PriorityProfile(schools, tuple(tuple(o) for o in orders)),
                tuple((t, prefs[t]) for t in entrants),
            )
        )
    try:
        return Economy(schools, quotas, tuple(initial), tuple(periods))
    except TenureMatchError:
        return None


def _realizes_tenure_order(economy: Economy) -> bool:
    try:
        outcomes = simulate_detailed(economy)
    except TenureMatchError:
        return False
    joined = {teacher: 0 for teacher, _ in economy.initial}
    for out in outcomes:
        spec = economy.periods[out.period - 1]
        employed = {
            teacher
            for teacher, held in zip(spec.teachers, out.problem.previous)
            if held
        }
        ok, _ = is_lexicographic_by_tenure(spec.priorities, employed)
        if not ok:
            return False
        stage_of = {t: joined.get(t, out.period) for t in spec.teachers}
        if first_cohort_inversion(spec.priorities, stage_of) is not None:
            return False
        for teacher, mask in zip(spec.teachers, out.matching.assigned):
            if mask:
                joined.setdefault(teacher, out.period)
    return True


def tenure_economies(
    count: int, seed: int, max_schools: int = 4, max_periods: int = 3
) -> list[Economy]:
    """Seeded economies that are lexicographic by tenure along their own
    run: employed teachers outrank everyone else at every period, and no
    earlier-joining teacher sits below a later joiner anywhere.

    Candidates are drawn freely and rejected unless the realized run
    keeps both properties, so departures and unlucky inheritances never
    smuggle in an inversion.
    """
    master = Random(seed)
    out: list[Economy] = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 400 * count:
            raise RuntimeError("tenure economy sampling stalled")
        economy = _tenure_candidate(
            Random(master.getrandbits(64)), max_schools, max_periods
        )
        if economy is not None and _realizes_tenure_order(economy):
            out.append(economy)
    return out


@dataclass(frozen=True)
class SweepViolation:
    """One obvious manipulation uncovered by the exhaustive search."""

    structure: str
    mechanism: str
    teacher: str
    true_ranking: tuple[int, ...]
    misreport_ranking: tuple[int, ...]
    period: int
    kind: str


def _identity_preference(m: int):
    return canonical_preference(ChoiceFunction(m, tuple(range(1 << m))))


def _structure(
    name: str,
    m: int,
    quotas: Sequence[int],
    initial_masks: Sequence[int],
    extra_first: int,
    entrant_count: int,
    rotation: int,
) -> tuple[str, Economy]:
    schools = _school_ids(m)
    holders = len(initial_masks)
    first_count = holders + extra_first
    teachers = _teacher_ids(first_count + entrant_count)
    placeholder = _identity_preference(m)
    first = teachers[:first_count]
    entrants = teachers[first_count:]

    def order_for(k: int, blocks: Sequence[Sequence[TeacherId]]) -> tuple[TeacherId, ...]:
        out: list[TeacherId] = []
        for block in blocks:
            if block:
                shift = (rotation + k) % len(block)
                out.extend(list(block[shift:]) + list(block[:shift]))
        return tuple(out)

    blocks = [teachers[:holders], teachers[holders:first_count]]
    prio = PriorityProfile(
        schools, tuple(order_for(k, blocks) for k in range(m))
    )
    periods = [PeriodSpec(first, prio, tuple((t, placeholder) for t in first))]
    if entrants:
        blocks_late = blocks + [entrants]
        prio_late = PriorityProfile(
            schools, tuple(order_for(k, blocks_late) for k in range(m))
        )
        periods.append(
            PeriodSpec(teachers, prio_late, tuple((t, placeholder) for t in entrants))
        )
    initial = tuple(
        (teachers[j], mask) for j, mask in enumerate(initial_masks) if mask
    )
    return name, Economy(schools, tuple(quotas), initial, tuple(periods))


def manipulation_structures() -> list[tuple[str, Economy]]:
    """The economy structures the no-obvious-manipulation sweep covers.

    Entry reports are placeholders; the search itself ranges over every
    substitutable report. Priorities put initially matched teachers
    first and second-period entrants last, so the employed-outrank-
    everyone condition holds at the first period by construction; at
    later periods it depends on who the truthful run leaves employed,
    and the search checks it per true-preference profile.
    """
    specs = [
        ("m1 tenured pair", 1, (1,), (1,), 1, 0, 0),
        ("m1 tenured pair, entrant", 1, (1,), (1,), 0, 1, 0),
        ("m1 wide trio", 1, (2,), (1,), 1, 1, 0),
        ("m1 open trio", 1, (1,), (), 2, 1, 0),
        ("m2 open pair, entrant", 2, (1, 1), (), 1, 1, 0),
        ("m2 tenured pair", 2, (1, 1), (1,), 1, 0, 0),
        ("m2 tenured pair, entrant", 2, (1, 1), (1,), 0, 1, 0),
        ("m2 tenured pair, entrant, rotated", 2, (1, 1), (1,), 0, 1, 1),
        ("m2 dual holder, entrant", 2, (1, 1), (3,), 0, 1, 0),
        ("m2 trio, one tenured", 2, (1, 1), (1,), 1, 1, 0),
        ("m2 trio, one tenured, rotated", 2, (1, 1), (1,), 1, 1, 1),
        ("m2 trio, two tenured", 2, (1, 1), (1, 2), 0, 1, 0),
        ("m2 trio, shared school", 2, (2, 1), (1, 1), 0, 1, 0),
        ("m2 trio, single period", 2, (1, 1), (1,), 2, 0, 0),
        ("m2 trio, crowded", 2, (1, 2), (2,), 1, 1, 1),
        ("m2 open trio", 2, (1, 1), (), 2, 1, 0),
        ("m3 tenured pair", 3, (1, 1, 1), (1,), 1, 0, 0),
        ("m3 tenured pair, entrant", 3, (1, 1, 1), (1,), 0, 1, 0),
        ("m3 dual holder, entrant", 3, (2, 1, 1), (3,), 0, 1, 0),
        ("m3 pair, both tenured", 3, (1, 1, 1), (1, 2), 0, 0, 0),
        ("m3 trio, one tenured", 3, (1, 1, 1), (1,), 1, 1, 0),
    ]
    return [_structure(*spec) for spec in specs]


def obvious_manipulation_search(
    structure: str,
    economy: Economy,
    mechanisms: Sequence[str] = ("trda", "treada"),
) -> list[SweepViolation]:
    """Search one structure exhaustively for obvious manipulations.

    For every teacher, every substitutable true preference up to
    comparison signature, and every path-independent misreport class, a
    misreport counts as found when some co-report class profile makes it
    profitable at a period and the worst or the best option-set outcome
    at that period improves under the true preference. Option sets are
    taken over every co-report class, which quotients the full
    substitutable domain without changing any outcome. True-preference
    profiles whose truthful run leaves some school ranking a non-employed
    teacher above an employed one are outside the covered family and do
    not witness profitability. An empty result is exhaustive evidence
    for the structure.
    """
    m = len(economy.schools)
    if m > 3:
        raise DomainTooLarge(
            f"exhaustive manipulation sweep is unavailable for {m} schools"
        )
    classes = enumerate_path_independent(m)
    signatures = order_signatures(m)
    universe = economy.teacher_universe
    slot = {teacher: j for j, teacher in enumerate(universe)}
    initial_holders = {
        teacher for teacher, mask in economy.initial if mask
    }
    all_classes = list(range(len(classes)))

    violations: list[SweepViolation] = []
    for mechanism in mechanisms:
        variant = replace(economy, mechanism=mechanism)
        cache = _SimulationCache(variant)
        lex_memo: dict[tuple[int, ...], bool] = {}

        def lex_ok(class_ids: tuple[int, ...]) -> bool:
            hit = lex_memo.get(class_ids)
            if hit is not None:
                return hit
            run = cache.outcomes([classes[ci] for ci in class_ids])
            hit = True
            for t, spec in enumerate(economy.periods, start=1):
                if t == 1:
                    employed = {
                        x for x in spec.teachers if x in initial_holders
                    }
                else:
                    prior = run[t - 2]
                    employed = {
                        x for x in spec.teachers if prior.get(x.index, 0)
                    }
                ok, _ = is_lexicographic_by_tenure(spec.priorities, employed)
                if not ok:
                    hit = False
                    break
            lex_memo[class_ids] = hit
            return hit

        for focal in universe:
            f = slot[focal]
            entry = economy.entry_period(focal)
            present = [
                p
                for p in range(entry, len(economy.periods) + 1)
                if focal in economy.periods[p - 1].teachers
            ]
            others = [t for t in universe if t is not focal]
            profiles = list(
                itertools.product(all_classes, repeat=len(others))
            )

            def full_tuple(ci: int, profile: tuple[int, ...]) -> tuple[int, ...]:
                ids = [0] * len(universe)
                ids[f] = ci
                for t, other_ci in zip(others, profile):
                    ids[slot[t]] = other_ci
                return tuple(ids)

            outcomes: dict[int, list[tuple[int, ...]]] = {}
            for ci in all_classes:
                rows = []
                for profile in profiles:
                    run = cache.outcomes(
                        [classes[x] for x in full_tuple(ci, profile)]
                    )
                    rows.append(
                        tuple(run[p - 1][focal.index] for p in present)
                    )
                outcomes[ci] = rows
            options = {
                (ci, pi): frozenset(row[pi] for row in outcomes[ci])
                for ci in outcomes
                for pi in range(len(present))
            }
            for true_ci in all_classes:
                covered = [
                    row
                    for row, profile in enumerate(profiles)
                    if lex_ok(full_tuple(true_ci, profile))
                ]
                if not covered:
                    continue
                pair_sets: dict[tuple[int, int], set[tuple[int, int]]] = {}
                for dev_ci in all_classes:
                    if dev_ci == true_ci:
                        continue
                    for pi in range(len(present)):
                        pair_sets[(dev_ci, pi)] = {
                            (outcomes[true_ci][row][pi], outcomes[dev_ci][row][pi])
                            for row in covered
                        }
                for true_pref in signatures[classes[true_ci].table]:
                    rank = [true_pref.position(x) for x in range(1 << m)]
                    for dev_ci in all_classes:
                        if dev_ci == true_ci:
                            continue
                        for pi, period in enumerate(present):
                            pairs = pair_sets[(dev_ci, pi)]
                            if not any(
                                rank[gained] < rank[kept]
                                for kept, gained in pairs
                            ):
                                continue
                            truth = options[(true_ci, pi)]
                            dev = options[(dev_ci, pi)]
                            worst_truth = max(truth, key=rank.__getitem__)
                            worst_dev = max(dev, key=rank.__getitem__)
                            if rank[worst_dev] < rank[worst_truth]:
                                kind = "worst"
                            else:
                                best_truth = min(truth, key=rank.__getitem__)
                                best_dev = min(dev, key=rank.__getitem__)
                                if rank[best_dev] < rank[best_truth]:
                                    kind = "best"
                                else:
                                    continue
                            violations.append(
                                SweepViolation(
                                    structure=structure,
                                    mechanism=mechanism,
                                    teacher=focal.label,
                                    true_ranking=true_pref.ranking,
                                    misreport_ranking=canonical_preference(
                                        classes[dev_ci]
                                    ).ranking,
                                    period=period,
                                    kind=kind,
                                )
                            )
    return violations
