"""Small builders shared across the test modules."""

from tenurematch import (
    ChoiceFunction,
    DynamicProblem,
    PriorityProfile,
    SchoolId,
    SubsetPreference,
    TeacherId,
    induce_choice,
)


def make_teachers(n):
    return tuple(TeacherId(j, f"i{j + 1}") for j in range(n))


def make_schools(m):
    return tuple(SchoolId(k, f"s{k + 1}") for k in range(m))


def pref(m, *ranking):
    """A subset preference; the empty set is appended when left out."""
    ranking = list(ranking)
    if 0 not in ranking:
        ranking.append(0)
    return SubsetPreference(m, tuple(ranking))


def cf_of(m, *ranking):
    return induce_choice(pref(m, *ranking))


def priorities_by_index(schools, teachers, *listings):
    """One listing of teacher indices per school."""
    return PriorityProfile(
        schools, tuple(tuple(teachers[j] for j in listing) for listing in listings)
    )


def seat(matching, label):
    """Assignment of the teacher with this label, roster-safe."""
    for t, mask in zip(matching.teachers, matching.assigned):
        if t.label == label:
            return mask
    raise KeyError(label)


def problem(m, quotas, choices, listings, previous):
    """A single-period problem with labelled agents from index data.

    ``choices`` maps each teacher to either a ChoiceFunction or a
    ranking tuple fed through ``pref``; ``listings`` is one priority
    index list per school.
    """
    teachers = make_teachers(len(choices))
    schools = make_schools(m)
    built = tuple(
        c if isinstance(c, ChoiceFunction) else cf_of(m, *c) for c in choices
    )
    return DynamicProblem(
        teachers,
        schools,
        built,
        priorities_by_index(schools, teachers, *listings),
        tuple(quotas),
        tuple(previous),
    )
