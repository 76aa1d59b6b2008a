"""Deferred acceptance over choice functions, traces, interrupters."""

import pytest
from hypothesis import given, settings, strategies as st
from random import Random

from tenurematch import (
    DaTrace,
    Matching,
    StaticProblem,
    detect_interrupters,
    find_interrupter_pairs,
    is_statically_stable,
    random_choice_function,
    run_da,
    run_trda,
)

from helpers import cf_of, make_schools, make_teachers, priorities_by_index


def _static(m, quotas, choices, listings):
    teachers = make_teachers(len(choices))
    schools = make_schools(m)
    return StaticProblem(
        teachers,
        schools,
        tuple(choices),
        priorities_by_index(schools, teachers, *listings),
        tuple(quotas),
    )


def _random_static(n, m, rng):
    teachers = make_teachers(n)
    schools = make_schools(m)
    listings = []
    for _ in range(m):
        order = list(range(n))
        rng.shuffle(order)
        listings.append(tuple(order))
    return StaticProblem(
        teachers,
        schools,
        tuple(random_choice_function(m, rng) for _ in range(n)),
        priorities_by_index(schools, teachers, *listings),
        tuple(rng.randint(1, 2) for _ in range(m)),
    )


def test_construction_checks_alignment():
    teachers = make_teachers(2)
    schools = make_schools(1)
    with pytest.raises(ValueError):
        StaticProblem(
            teachers,
            schools,
            (cf_of(1, 1),),
            priorities_by_index(schools, teachers, (0, 1)),
            (1,),
        )
    with pytest.raises(ValueError):
        StaticProblem(
            teachers,
            schools,
            (cf_of(1, 1), cf_of(1, 1)),
            priorities_by_index(schools, teachers, (0,)),
            (1,),
        )


def test_empty_roster_gives_a_zero_step_trace():
    problem = StaticProblem(
        (), make_schools(1), (), priorities_by_index(make_schools(1), (), ()), (1,)
    )
    matching, trace = run_da(problem)
    assert trace.steps == ()
    assert matching.teachers == ()


def test_single_seat_contest():
    problem = _static(1, (1,), [cf_of(1, 1), cf_of(1, 1)], [(1, 0)])
    matching, trace = run_da(problem)
    assert matching.assigned == (0, 1)
    # step 1: both propose, i1 rejected; step 2: quiet
    assert len(trace.steps) == 2
    assert trace.steps[0].rejections == (0b01,)
    assert trace.steps[1].rejections == (0,)


def test_set_valued_choices_fill_multiple_schools():
    wants_both = cf_of(2, 3, 1, 2)
    problem = _static(2, (1, 1), [wants_both], [(0,), (0,)])
    matching, _ = run_da(problem)
    assert matching.assigned == (3,)


def test_displacement_cascade_reassigns_the_loser():
    second_choice = cf_of(2, 1, 2)
    problem = _static(
        2, (1, 1), [second_choice, cf_of(2, 1)], [(1, 0), (0, 1)]
    )
    matching, trace = run_da(problem)
    # i2 takes s1, pushing i1 to s2
    assert matching.assigned == (2, 1)
    assert trace.steps[0].rejections[0] == 0b01


def test_trace_matching_matches_returned_matching():
    rng = Random(5)
    for _ in range(40):
        problem = _random_static(rng.randint(1, 4), rng.randint(1, 3), rng)
        matching, trace = run_da(problem)
        assert trace.matching().assigned == matching.assigned


def test_rejected_teachers_never_return():
    rng = Random(6)
    for _ in range(40):
        problem = _random_static(rng.randint(1, 4), rng.randint(1, 3), rng)
        _, trace = run_da(problem)
        rejected = [0] * len(problem.teachers)
        for step in trace.steps:
            for j in range(len(problem.teachers)):
                assert step.proposals[j] & rejected[j] == 0
            for k, rej in enumerate(step.rejections):
                mask, j = rej, 0
                while mask:
                    if mask & 1:
                        rejected[j] |= 1 << k
                    mask >>= 1
                    j += 1


def test_held_teachers_keep_proposing():
    # substitutability means a school never loses a proposer it holds
    rng = Random(7)
    for _ in range(40):
        problem = _random_static(rng.randint(1, 4), rng.randint(1, 3), rng)
        _, trace = run_da(problem)
        for before, after in zip(trace.steps, trace.steps[1:]):
            for k in range(len(problem.schools)):
                mask, j = before.held_after[k], 0
                while mask:
                    if mask & 1:
                        assert after.proposals[j] & (1 << k)
                    mask >>= 1
                    j += 1


@settings(max_examples=60)
@given(st.integers(min_value=0, max_value=5000))
def test_outputs_are_statically_stable(seed):
    rng = Random(seed)
    problem = _random_static(rng.randint(1, 4), rng.randint(1, 3), rng)
    matching, _ = run_da(problem)
    assert is_statically_stable(problem, matching)


def test_interrupter_pairs_on_the_worked_example(example1_doc):
    _, trace = run_trda(example1_doc.model)
    pairs = find_interrupter_pairs(trace)
    flat = {(p.teacher.label, p.school.label) for p in pairs}
    assert ("i4", "s4") in flat
    the_pair = next(p for p in pairs if p.teacher.label == "i4" and p.school.label == "s4")
    assert the_pair.held_from_step == 2
    assert the_pair.rejected_at_step == 5


def test_detect_interrupters_respects_consent(example1_doc):
    problem = example1_doc.model
    _, trace = run_trda(problem)
    consenting = {t for t in problem.teachers if t.label != "i4"}
    last, pairs = detect_interrupters(trace, consenting)
    assert pairs == () or all(p.teacher.label != "i4" for p in pairs)

    last_all, pairs_all = detect_interrupters(trace, set(problem.teachers))
    assert last_all == 5
    assert [(p.teacher.label, p.school.label) for p in pairs_all] == [("i4", "s4")]


def test_detect_interrupters_empty_without_candidates():
    problem = _static(1, (1,), [cf_of(1, 1)], [(0,)])
    _, trace = run_da(problem)
    assert detect_interrupters(trace, {problem.teachers[0]}) == (None, ())
