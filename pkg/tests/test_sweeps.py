"""Instance generators and the exhaustive no-obvious-manipulation sweep."""

from collections import Counter
from dataclasses import replace
from random import Random

import pytest

from tenurematch.domains import random_substitutable_preference
from tenurematch.economy import (
    EXHAUSTIVE,
    Economy,
    PeriodSpec,
    find_obvious_manipulations,
    simulate_detailed,
)
from tenurematch.errors import DomainTooLarge, TenureMatchError
from tenurematch.priority import (
    PriorityProfile,
    first_cohort_inversion,
    is_lexicographic_by_tenure,
)
from tenurematch.sweeps import (
    grid_problems,
    manipulation_structures,
    obvious_manipulation_search,
    random_problem,
    tenure_economies,
)

from helpers import make_schools, make_teachers

# Frozen census of the single-period grid. Full cells carry their whole
# (choice, priority, quota, inheritance) product; strided cells carry
# their fixed budgets.
GRID_CELL_SIZES = {
    "grid1x1": 8,
    "grid1x2": 96,
    "grid1x3": 2240,
    "grid2x1": 56,
    "grid2x2": 7056,
    "grid2x3": 2448,
    "grid3x1": 528,
    "grid3x2": 1728,
    "grid3x3": 2160,
}


def test_grid_census_and_feasibility():
    grid = list(grid_problems())
    labels = [label for label, _ in grid]
    assert len(grid) == sum(GRID_CELL_SIZES.values()) == 16320
    assert len(set(labels)) == len(labels)
    assert Counter(label.split("#")[0] for label in labels) == GRID_CELL_SIZES
    for label, problem in grid:
        for k, quota in enumerate(problem.quotas):
            bit = 1 << k
            held = sum(1 for mask in problem.previous if mask & bit)
            assert held <= quota, label


def test_grid_is_deterministic():
    assert list(grid_problems()) == list(grid_problems())


def test_random_problem_is_seed_deterministic():
    first = random_problem(5, 4, Random(9))
    again = random_problem(5, 4, Random(9))
    other = random_problem(5, 4, Random(10))
    assert first == again
    assert first != other
    assert len(first.teachers) == 5
    assert len(first.schools) == 4
    for k, quota in enumerate(first.quotas):
        bit = 1 << k
        assert sum(1 for mask in first.previous if mask & bit) <= quota


def _truthful_run_stays_lexicographic(economy):
    """The covered-economy condition, recomputed from the public API."""
    try:
        outcomes = simulate_detailed(economy)
    except TenureMatchError:
        return False
    for out in outcomes:
        spec = economy.periods[out.period - 1]
        employed = {
            t for t, held in zip(spec.teachers, out.problem.previous) if held
        }
        ok, _ = is_lexicographic_by_tenure(spec.priorities, employed)
        if not ok:
            return False
    return True


def test_tenure_economies_realize_their_advertised_order():
    economies = tenure_economies(12, seed=31)
    assert len(economies) == 12
    assert economies == tenure_economies(12, seed=31)
    for economy in economies:
        assert _truthful_run_stays_lexicographic(economy)
        joined = {t: 0 for t, _ in economy.initial}
        for out in simulate_detailed(economy):
            spec = economy.periods[out.period - 1]
            stage = {t: joined.get(t, out.period) for t in spec.teachers}
            assert first_cohort_inversion(spec.priorities, stage) is None
            for t, mask in zip(spec.teachers, out.matching.assigned):
                if mask:
                    joined.setdefault(t, out.period)


def test_manipulation_structures_cover_the_family():
    structures = manipulation_structures()
    assert len(structures) == 21
    names = [name for name, _ in structures]
    assert len(set(names)) == len(names)
    for name, economy in structures:
        holders = {t for t, mask in economy.initial if mask}
        ok, witness = is_lexicographic_by_tenure(
            economy.periods[0].priorities, holders
        )
        assert ok, (name, witness)
        if len(economy.periods) == 2:
            first = set(economy.periods[0].teachers)
            for listing in economy.periods[1].priorities.order:
                tail = [t not in first for t in listing]
                # entrants only ever trail the incumbent block
                assert tail == sorted(tail), name


def test_sweep_guard_refuses_four_schools():
    schools = make_schools(4)
    (teacher,) = make_teachers(1)
    report = random_substitutable_preference(4, Random(0))
    economy = Economy(
        schools,
        (1, 1, 1, 1),
        (),
        (
            PeriodSpec(
                (teacher,),
                PriorityProfile(schools, ((teacher,),) * 4),
                ((teacher, report),),
            ),
        ),
    )
    with pytest.raises(DomainTooLarge):
        obvious_manipulation_search("wide", economy)


SMALL_STRUCTURES = ["m1 tenured pair", "m1 tenured pair, entrant", "m2 tenured pair"]


def test_sweep_clears_the_small_structures():
    by_name = dict(manipulation_structures())
    for name in SMALL_STRUCTURES:
        assert obvious_manipulation_search(name, by_name[name]) == []


def test_sweep_verdict_matches_the_point_search():
    """A clean sweep must hold pointwise: sampled covered instances of a
    cleared structure admit no obvious manipulation for any teacher."""
    by_name = dict(manipulation_structures())
    rng = Random(5)
    for name in SMALL_STRUCTURES:
        base = by_name[name]
        assert obvious_manipulation_search(name, base) == []
        m = len(base.schools)
        produced = 0
        for _ in range(200):
            if produced == 3:
                break
            prefs = {
                t: random_substitutable_preference(m, rng)
                for t in base.teacher_universe
            }
            periods = tuple(
                PeriodSpec(
                    spec.teachers,
                    spec.priorities,
                    tuple((t, prefs[t]) for t, _ in spec.entrants),
                )
                for spec in base.periods
            )
            try:
                instance = replace(base, periods=periods)
            except TenureMatchError:
                continue
            if not _truthful_run_stays_lexicographic(instance):
                continue
            produced += 1
            for mechanism in ("trda", "treada"):
                variant = replace(instance, mechanism=mechanism)
                if not _truthful_run_stays_lexicographic(variant):
                    continue
                for teacher in variant.teacher_universe:
                    assert (
                        find_obvious_manipulations(
                            variant, teacher.label, EXHAUSTIVE, EXHAUSTIVE
                        )
                        == []
                    ), (name, mechanism, teacher.label)
        assert produced == 3, name
