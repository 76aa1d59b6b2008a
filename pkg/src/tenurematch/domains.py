"""Enumerated and randomly generated choice-function domains.

The exhaustive domains back the theorem sweeps: every path-independent
choice function over up to three schools, and every substitutable subset
preference over the same range. The preference domain is large (tens of
thousands of orders at three schools) and is cached to disk after first
generation; the choice-function domain is small enough to rebuild on
demand.

Random generation uses the union-of-linear-orders construction: each of a
handful of rankings over individual schools picks its top available
school, and the choice is the union of the picks. Such functions are
always path-independent, and every path-independent function arises this
way, so sampling covers the whole space.
"""

from __future__ import annotations

import json
import os
from functools import lru_cache
from itertools import combinations, permutations
from pathlib import Path
from random import Random
from typing import Optional, Sequence

from .errors import DomainTooLarge
from .model import (
    ChoiceFunction,
    SubsetPreference,
    blair_compare,
    BlairOrdering,
    induce_choice,
)

EXHAUSTIVE_MAX_SCHOOLS = 3


def _pi_filter(n: int, table: Sequence[int]) -> bool:
    for a in range(1 << n):
        ca = table[a]
        for b in range(1 << n):
            if table[a | b] != table[ca | b]:
                return False
    return True


@lru_cache(maxsize=None)
def enumerate_path_independent(n: int) -> tuple[ChoiceFunction, ...]:
    """All path-independent choice functions over n schools, in a fixed
    deterministic order. Guarded at three schools: the raw selection-table
    space is 2^(n * 2^(n-1)).
    """
    if n > EXHAUSTIVE_MAX_SCHOOLS:
        raise DomainTooLarge(
            f"exhaustive choice-function domain requested for {n} schools, "
            f"guard is {EXHAUSTIVE_MAX_SCHOOLS}"
        )
    masks = range(1 << n)
    options_per_mask = []
    for a in masks:
        subs = []
        b = a
        while True:
            subs.append(b)
            if b == 0:
                break
            b = (b - 1) & a
        options_per_mask.append(tuple(sorted(subs)))

    found = []
    table = [0] * (1 << n)

    def fill(idx: int) -> None:
        if idx == 1 << n:
            if _pi_filter(n, table):
                found.append(ChoiceFunction(n, tuple(table)))
            return
        for choice in options_per_mask[idx]:
            table[idx] = choice
            fill(idx + 1)

    fill(0)
    return tuple(found)


def _cache_dir() -> Path:
    root = os.environ.get("XDG_CACHE_HOME") or os.path.join(
        os.path.expanduser("~"), ".cache"
    )
    return Path(root) / "tenurematch"


@lru_cache(maxsize=None)
def enumerate_substitutable_preferences(n: int) -> tuple[SubsetPreference, ...]:
    """Every strict order over subset families (empty set included) whose
    induced choice function is path-independent.

    Results are cached on disk under the user cache directory because the
    three-school domain takes a noticeable moment to build.
    """
    if n > EXHAUSTIVE_MAX_SCHOOLS:
        raise DomainTooLarge(
            f"exhaustive preference domain requested for {n} schools, "
            f"guard is {EXHAUSTIVE_MAX_SCHOOLS}"
        )
    cache_file = _cache_dir() / f"substitutable_prefs_{n}.json"
    if cache_file.exists():
        try:
            rankings = json.loads(cache_file.read_text())
            return tuple(SubsetPreference(n, tuple(r)) for r in rankings)
        except (ValueError, OSError):
            pass  # stale or corrupt cache, rebuild

    admissible = {cf.table for cf in enumerate_path_independent(n)}
    nonempty = [m for m in range(1, 1 << n)]
    out = []
    for k in range(len(nonempty) + 1):
        for family in combinations(nonempty, k):
            elems = (0,) + family
            for perm in permutations(elems):
                table = []
                for offered in range(1 << n):
                    for mask in perm:
                        if mask & ~offered == 0:
                            table.append(mask)
                            break
                if tuple(table) in admissible:
                    out.append(SubsetPreference(n, perm))
    try:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        cache_file.write_text(json.dumps([list(p.ranking) for p in out]))
    except OSError:
        pass  # cache is an optimization, not a requirement
    return tuple(out)


def canonical_preference(cf: ChoiceFunction) -> SubsetPreference:
    """A subset preference inducing the given choice function.

    The ranking lists the function's chosen sets in an order extending the
    Blair order (better sets first), with the empty set last. Works for
    any path-independent function; the induced table equals the original.
    """
    chosen = sorted(set(cf.table))
    better_count = {}
    for a in chosen:
        better_count[a] = sum(
            1
            for b in chosen
            if b != a and blair_compare(cf, a, b) is BlairOrdering.StrictlyBetter
        )
    ranking = sorted(chosen, key=lambda a: (-better_count[a], a != 0, a))
    if 0 in ranking:
        ranking.remove(0)
    ranking.append(0)
    return SubsetPreference(cf.n_schools, tuple(ranking))


@lru_cache(maxsize=None)
def order_signatures(n: int) -> dict:
    """Group the exhaustive preference domain by what outcome comparisons
    can see, keyed by induced choice table.

    Two preferences with the same ranking up to and including the empty
    set order every chosen set and the empty set identically; entries
    ranked past the empty set can never win a comparison against a kept
    outcome, so such preferences agree on every better-than verdict that
    involves at least one individually rational side. One representative
    per prefix is kept, with its ranking truncated at the empty set.
    """
    groups: dict = {}
    seen = set()
    for pref in enumerate_substitutable_preferences(n):
        cut = pref.ranking.index(0)
        prefix = pref.ranking[: cut + 1]
        if prefix in seen:
            continue
        seen.add(prefix)
        rep = SubsetPreference(n, prefix)
        groups.setdefault(induce_choice(rep).table, []).append(rep)
    return {table: tuple(reps) for table, reps in groups.items()}


def random_choice_function(n: int, rng: Random, max_orders: Optional[int] = None) -> ChoiceFunction:
    """A random path-independent choice function over n schools.

    Built as a union of maximizers: each sampled ranking over schools
    (possibly truncated to make some schools unacceptable to it) selects
    its best offered school, and the choice is the union. One-order
    samples give singleton-valued functions; more orders give set-valued
    ones.
    """
    if max_orders is None:
        max_orders = max(2, n)
    count = rng.randint(1, max_orders)
    orders = []
    for _ in range(count):
        ranking = list(range(n))
        rng.shuffle(ranking)
        cutoff = rng.randint(0, n)
        orders.append(ranking[:cutoff])
    table = []
    for offered in range(1 << n):
        chosen = 0
        for ranking in orders:
            for school in ranking:
                if offered & (1 << school):
                    chosen |= 1 << school
                    break
        table.append(chosen)
    return ChoiceFunction(n, tuple(table))


def random_substitutable_preference(n: int, rng: Random) -> SubsetPreference:
    """A random substitutable preference: the canonical preference of a
    random path-independent choice function."""
    return canonical_preference(random_choice_function(n, rng))
