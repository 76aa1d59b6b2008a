"""Stability verdicts, claims, enumeration, and Blair efficiency."""

import pytest
from random import Random

from tenurematch import (
    ClaimKind,
    DomainTooLarge,
    Matching,
    NotStableInput,
    StabilityVerdict,
    blair_dominates_weakly,
    count_matchings_closed_form,
    enumerate_dynamically_stable,
    enumerate_matchings,
    find_claims,
    is_blair_efficient,
    is_dynamically_stable,
    minimality_of_unjustified_claims,
    random_problem,
    run_trda,
    unjustified_claim_pairs,
)

from helpers import make_schools, make_teachers, problem


def _mu(prob, *masks):
    return Matching(prob.teachers, prob.schools, tuple(masks))


def test_individual_rationality_flags_unwanted_seats():
    prob = problem(2, (1, 1), [(1,)], [(0,), (0,)], (0,))
    verdict = is_dynamically_stable(prob, _mu(prob, 2))
    assert not verdict.individually_rational
    assert not verdict.dynamically_stable


def test_dynamic_rationality_compares_against_the_inherited_seat():
    # i1 held s1 but is handed the strictly worse s2
    prob = problem(2, (1, 1), [(1, 2)], [(0,), (0,)], (1,))
    verdict = is_dynamically_stable(prob, _mu(prob, 2))
    assert verdict.individually_rational
    assert not verdict.dynamically_rational


def test_waste_is_an_unfilled_wanted_seat():
    prob = problem(1, (1,), [(1,)], [(0,)], (0,))
    verdict = is_dynamically_stable(prob, _mu(prob, 0))
    assert not verdict.non_wasteful
    assert verdict.individually_rational


def test_claims_distinguish_tenure():
    # s1 ranks i1 over i2; i2 holds the seat without tenure, so the claim
    # is justified; once i2 inherited it, the same claim loses force
    entrant_holds = problem(1, (1,), [(1,), (1,)], [(0, 1)], (0, 0))
    mu = _mu(entrant_holds, 0, 1)
    claims = find_claims(entrant_holds, mu)
    assert [(c.claimant.label, c.school.label, c.displaced.label, c.kind) for c in claims] == [
        ("i1", "s1", "i2", ClaimKind.Justified)
    ]
    verdict = is_dynamically_stable(entrant_holds, mu)
    assert not verdict.dynamically_stable

    tenured_holds = problem(1, (1,), [(1,), (1,)], [(0, 1)], (0, 1))
    claims = find_claims(tenured_holds, mu)
    assert [c.kind for c in claims] == [ClaimKind.Unjustified]
    verdict = is_dynamically_stable(tenured_holds, mu)
    assert verdict.dynamically_stable


def test_unjustified_claim_pairs_collapse_duplicates():
    # both seats of s1 stay with tenured holders; i1 claims once per seat
    prob = problem(1, (2,), [(1,), (1,), (1,)], [(0, 1, 2)], (0, 1, 1))
    mu = _mu(prob, 0, 1, 1)
    pairs = unjustified_claim_pairs(prob, mu)
    assert {(t.label, s.label) for t, s in pairs} == {("i1", "s1")}
    assert len(find_claims(prob, mu)) == 2


def test_verdict_consistency_is_enforced():
    with pytest.raises(ValueError):
        StabilityVerdict(
            individually_rational=True,
            dynamically_rational=True,
            non_wasteful=True,
            claims=(),
            dynamically_stable=False,
        )


def test_matching_counts_agree_with_the_closed_form():
    rng = Random(31)
    for _ in range(12):
        prob = random_problem(rng.randint(1, 3), rng.randint(1, 3), rng)
        listed = sum(1 for _ in enumerate_matchings(prob))
        assert listed == count_matchings_closed_form(prob)


def test_enumeration_is_guarded():
    teachers = make_teachers(7)
    schools = make_schools(1)
    prob = problem(1, (1,), [(1,)] * 7, [tuple(range(7))], (0,) * 7)
    with pytest.raises(DomainTooLarge):
        next(enumerate_matchings(prob))
    with pytest.raises(DomainTooLarge):
        enumerate_dynamically_stable(prob)


def test_stable_enumeration_contains_the_mechanism_outcome():
    rng = Random(32)
    for _ in range(25):
        prob = random_problem(rng.randint(1, 3), rng.randint(1, 3), rng)
        matching, _ = run_trda(prob)
        stable = enumerate_dynamically_stable(prob)
        assert matching.assigned in [mu.assigned for mu in stable]


def test_blair_efficiency_of_a_sole_stable_matching():
    prob = problem(1, (1,), [(1,), (1,)], [(0, 1)], (0, 0))
    matching, _ = run_trda(prob)
    efficient, witness = is_blair_efficient(prob, matching)
    assert efficient
    assert witness is None


def test_blair_inefficiency_produces_a_dominating_witness(example1_doc):
    prob = example1_doc.model
    matching, _ = run_trda(prob)
    efficient, witness = is_blair_efficient(prob, matching)
    assert not efficient
    assert witness is not None
    assert blair_dominates_weakly(prob, witness, matching)
    assert witness.assigned != matching.assigned


def test_weak_dominance_is_reflexive_and_detects_strictness(example1_doc):
    prob = example1_doc.model
    matching, _ = run_trda(prob)
    assert blair_dominates_weakly(prob, matching, matching)


def test_minimality_requires_a_stable_input():
    prob = problem(1, (1,), [(1,), (1,)], [(0, 1)], (0, 0))
    unstable = _mu(prob, 0, 1)
    with pytest.raises(NotStableInput):
        minimality_of_unjustified_claims(prob, unstable)


def test_minimality_on_the_worked_example(example1_doc):
    prob = example1_doc.model
    matching, _ = run_trda(prob)
    assert minimality_of_unjustified_claims(prob, matching)
