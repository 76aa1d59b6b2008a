"""Scenario files and canonical serialization.

A scenario is a JSON document (extension ``.scenario``) describing
either a single-period problem or a multi-period economy. Parsing is
strict: unknown ids, missing priority entries, and malformed reports
are rejected with field-precise messages. Emission is canonical, the
same object always serializes to the same bytes, so traces and reports
can be compared against golden files.

School subsets are written as label arrays sorted by label. A report
is either ``preference`` (subsets listed best first; listing may omit
the empty set, which then sits right after the last entry, and every
unlisted subset ranks below empty) or ``table`` (one row per subset of
S mapping the offered set to the chosen set).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence, Union

from .da import DaTrace
from .domains import canonical_preference
from .dynamic import DynamicProblem, validate_problem
from .economy import Economy, ManipulationFinding, PeriodSpec
from .errors import TenureMatchError
from .model import (
    ChoiceFunction,
    Matching,
    SchoolId,
    SchoolSet,
    SubsetPreference,
    TeacherId,
    induce_choice,
    set_labels,
)
from .priority import PriorityProfile
from .treada import TreadaLog

SCHEMA_VERSION = 1


class ParseError(TenureMatchError):
    """The document is not a well-formed scenario."""


class SchemaVersionMismatch(ParseError):
    """The document declares a schema this reader does not speak."""


class ValidationError(TenureMatchError):
    """The document parsed but does not describe a valid model."""


@dataclass(frozen=True)
class ScenarioDocument:
    """A parsed scenario: the model plus the surrounding configuration."""

    kind: str
    model: Union[Economy, DynamicProblem]
    mechanism: str
    consent: Union[str, frozenset[str]]
    expectations: Optional[dict]


def _fail(path: str, message: str) -> ParseError:
    return ParseError(f"{path}: {message}")


def _expect(value: Any, kind: type, path: str, what: str) -> Any:
    if not isinstance(value, kind):
        raise _fail(path, f"expected {what}")
    return value


def _get(obj: Mapping, key: str, path: str) -> Any:
    if key not in obj:
        raise _fail(path, f"missing key {key!r}")
    return obj[key]


class _Schools:
    def __init__(self, raw: Any, path: str) -> None:
        entries = _expect(raw, list, path, "an array of schools")
        if not entries:
            raise _fail(path, "at least one school required")
        self.ids: list[SchoolId] = []
        self.quotas: list[int] = []
        self.by_label: dict[str, SchoolId] = {}
        for k, entry in enumerate(entries):
            here = f"{path}[{k}]"
            entry = _expect(entry, dict, here, "an object")
            label = _expect(_get(entry, "label", here), str, f"{here}.label", "a string")
            quota = _get(entry, "quota", here)
            if not isinstance(quota, int) or isinstance(quota, bool) or quota < 0:
                raise _fail(f"{here}.quota", "expected a nonnegative integer")
            if label in self.by_label:
                raise _fail(f"{here}.label", f"duplicate school {label}")
            school = SchoolId(k, label)
            self.ids.append(school)
            self.quotas.append(quota)
            self.by_label[label] = school

    def mask(self, raw: Any, path: str) -> SchoolSet:
        labels = _expect(raw, list, path, "an array of school labels")
        mask = 0
        for label in labels:
            school = self.by_label.get(label) if isinstance(label, str) else None
            if school is None:
                raise _fail(path, f"unknown school {label!r}")
            bit = 1 << school.index
            if mask & bit:
                raise _fail(path, f"school {label} repeated")
            mask |= bit
        return mask

    def subset_labels(self, mask: SchoolSet) -> list[str]:
        return sorted(set_labels(mask, self.ids))


def _parse_preference(raw: Any, schools: _Schools, path: str) -> SubsetPreference:
    entries = _expect(raw, list, path, "an array of school subsets, best first")
    ranking: list[SchoolSet] = []
    seen: set[SchoolSet] = set()
    for pos, subset in enumerate(entries):
        mask = schools.mask(subset, f"{path}[{pos}]")
        if mask in seen:
            raise _fail(f"{path}[{pos}]", "subset listed twice")
        seen.add(mask)
        ranking.append(mask)
    if 0 not in seen:
        ranking.append(0)
    try:
        return SubsetPreference(len(schools.ids), tuple(ranking))
    except TenureMatchError as exc:
        raise _fail(path, str(exc))


def _parse_table(raw: Any, schools: _Schools, path: str) -> ChoiceFunction:
    rows = _expect(raw, dict, path, "an object with one row per subset")
    m = len(schools.ids)
    table = [None] * (1 << m)
    for key, value in rows.items():
        here = f"{path}[{key!r}]"
        labels = [] if key == "" else key.split(",")
        offered = schools.mask(labels, here)
        if table[offered] is not None:
            raise _fail(here, "offered set repeated")
        table[offered] = schools.mask(value, here)
    missing = [i for i, row in enumerate(table) if row is None]
    if missing:
        raise _fail(
            path,
            f"missing row for offered set "
            f"{{{','.join(schools.subset_labels(missing[0]))}}}",
        )
    try:
        return ChoiceFunction(m, tuple(table))
    except TenureMatchError as exc:
        raise _fail(path, str(exc))


def _parse_report(raw: Any, schools: _Schools, path: str) -> tuple[SubsetPreference, ChoiceFunction]:
    entry = _expect(raw, dict, path, "an object with 'preference' or 'table'")
    if ("preference" in entry) == ("table" in entry):
        raise _fail(path, "exactly one of 'preference' or 'table' required")
    if "preference" in entry:
        pref = _parse_preference(entry["preference"], schools, f"{path}.preference")
        try:
            return pref, induce_choice(pref)
        except TenureMatchError as exc:
            raise ValidationError(f"{path}.preference: {exc}")
    cf = _parse_table(entry["table"], schools, f"{path}.table")
    return canonical_preference(cf), cf


def _parse_priorities(
    raw: Any,
    schools: _Schools,
    by_label: Mapping[str, TeacherId],
    path: str,
) -> PriorityProfile:
    entry = _expect(raw, dict, path, "an object keyed by school label")
    for label in entry:
        if label not in schools.by_label:
            raise _fail(path, f"unknown school {label!r}")
    order: list[tuple[TeacherId, ...]] = []
    for school in schools.ids:
        here = f"{path}.{school.label}"
        if school.label not in entry:
            raise ValidationError(f"{here}: priority list missing")
        listing = _expect(entry[school.label], list, here, "an array of teacher labels")
        ranked: list[TeacherId] = []
        seen: set[str] = set()
        for label in listing:
            teacher = by_label.get(label) if isinstance(label, str) else None
            if teacher is None:
                raise ValidationError(f"{here}: unknown teacher {label!r}")
            if label in seen:
                raise ValidationError(f"{here}: teacher {label} listed twice")
            seen.add(label)
            ranked.append(teacher)
        left_out = set(by_label) - seen
        if left_out:
            raise ValidationError(
                f"{here}: teacher {sorted(left_out)[0]} missing from the "
                f"priority list of {school.label}"
            )
        order.append(tuple(ranked))
    return PriorityProfile(tuple(schools.ids), tuple(order))


def _parse_mechanism(doc: Mapping, path: str) -> tuple[str, Union[str, frozenset[str]]]:
    mechanism = doc.get("mechanism", "trda")
    if mechanism not in ("trda", "treada", "cohort"):
        raise _fail(f"{path}.mechanism", f"unknown mechanism {mechanism!r}")
    consent = doc.get("consent", "all")
    if isinstance(consent, list):
        for label in consent:
            _expect(label, str, f"{path}.consent", "teacher labels")
        consent = frozenset(consent)
    elif consent not in ("all", "none"):
        raise _fail(f"{path}.consent", "expected 'all', 'none', or a label array")
    return mechanism, consent


def _parse_problem(doc: Mapping, schools: _Schools) -> DynamicProblem:
    labels = _expect(_get(doc, "teachers", "$"), list, "$.teachers", "an array of labels")
    teachers: list[TeacherId] = []
    by_label: dict[str, TeacherId] = {}
    for j, label in enumerate(labels):
        label = _expect(label, str, f"$.teachers[{j}]", "a string")
        if label in by_label:
            raise _fail(f"$.teachers[{j}]", f"duplicate teacher {label}")
        teacher = TeacherId(j, label)
        teachers.append(teacher)
        by_label[label] = teacher

    choices_raw = _expect(_get(doc, "choices", "$"), dict, "$.choices", "an object")
    for label in choices_raw:
        if label not in by_label:
            raise _fail("$.choices", f"unknown teacher {label!r}")
    choices: list[ChoiceFunction] = []
    for teacher in teachers:
        if teacher.label not in choices_raw:
            raise ValidationError(f"$.choices: no report for {teacher.label}")
        _, cf = _parse_report(choices_raw[teacher.label], schools, f"$.choices.{teacher.label}")
        choices.append(cf)

    priorities = _parse_priorities(
        _get(doc, "priorities", "$"), schools, by_label, "$.priorities"
    )

    previous_raw = _expect(doc.get("previous", {}), dict, "$.previous", "an object")
    previous = [0] * len(teachers)
    for label, subset in previous_raw.items():
        teacher = by_label.get(label)
        if teacher is None:
            raise _fail("$.previous", f"unknown teacher {label!r}")
        previous[teacher.index] = schools.mask(subset, f"$.previous.{label}")

    try:
        problem = DynamicProblem(
            tuple(teachers),
            tuple(schools.ids),
            tuple(choices),
            priorities,
            tuple(schools.quotas),
            tuple(previous),
        )
        validate_problem(problem)
    except TenureMatchError as exc:
        raise ValidationError(str(exc))
    return problem


def _parse_economy(
    doc: Mapping,
    schools: _Schools,
    mechanism: str,
    consent: Union[str, frozenset[str]],
) -> Economy:
    periods_raw = _expect(_get(doc, "periods", "$"), list, "$.periods", "an array")
    if not periods_raw:
        raise _fail("$.periods", "at least one period required")

    by_label: dict[str, TeacherId] = {}
    rosters: list[list[TeacherId]] = []
    for t, period_raw in enumerate(periods_raw, start=1):
        here = f"$.periods[{t - 1}]"
        period_raw = _expect(period_raw, dict, here, "an object")
        labels = _expect(
            _get(period_raw, "teachers", here), list, f"{here}.teachers", "an array"
        )
        roster: list[TeacherId] = []
        seen: set[str] = set()
        for label in labels:
            label = _expect(label, str, f"{here}.teachers", "teacher labels")
            if label in seen:
                raise _fail(f"{here}.teachers", f"duplicate teacher {label}")
            seen.add(label)
            teacher = by_label.get(label)
            if teacher is None:
                teacher = TeacherId(len(by_label), label)
                by_label[label] = teacher
            roster.append(teacher)
        rosters.append(roster)

    periods: list[PeriodSpec] = []
    declared: set[str] = set()
    for t, (period_raw, roster) in enumerate(zip(periods_raw, rosters), start=1):
        here = f"$.periods[{t - 1}]"
        roster_sorted = tuple(sorted(roster, key=lambda x: x.index))
        local = {teacher.label: teacher for teacher in roster}
        priorities = _parse_priorities(
            _get(period_raw, "priorities", here), schools, local, f"{here}.priorities"
        )
        entrants_raw = _expect(
            period_raw.get("entrants", {}), dict, f"{here}.entrants", "an object"
        )
        fresh = {teacher.label for teacher in roster} - declared
        if set(entrants_raw) != fresh:
            odd = sorted(set(entrants_raw) ^ fresh)[0]
            raise ValidationError(
                f"{here}.entrants: must declare exactly the first-time teachers "
                f"of the period (check {odd})"
            )
        entrants = tuple(
            (local[label], _parse_report(entrants_raw[label], schools, f"{here}.entrants.{label}")[0])
            for label in sorted(entrants_raw, key=lambda l: local[l].index)
        )
        declared |= fresh
        periods.append(PeriodSpec(roster_sorted, priorities, entrants))

    initial_raw = _expect(doc.get("initial", {}), dict, "$.initial", "an object")
    initial: list[tuple[TeacherId, SchoolSet]] = []
    for label, subset in initial_raw.items():
        teacher = by_label.get(label)
        if teacher is None:
            raise _fail("$.initial", f"unknown teacher {label!r}")
        initial.append((teacher, schools.mask(subset, f"$.initial.{label}")))
    initial.sort(key=lambda pair: pair[0].index)

    try:
        return Economy(
            tuple(schools.ids),
            tuple(schools.quotas),
            tuple(initial),
            tuple(periods),
            mechanism,
            consent,
        )
    except TenureMatchError as exc:
        raise ValidationError(str(exc))


def parse_document(text: str) -> ScenarioDocument:
    """Parse and validate a scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}")
    doc = _expect(doc, dict, "$", "a JSON object")
    schema = _get(doc, "schema", "$")
    if schema != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"$.schema: document says {schema!r}, this reader speaks {SCHEMA_VERSION}"
        )
    kind = _get(doc, "kind", "$")
    if kind not in ("problem", "economy"):
        raise _fail("$.kind", "expected 'problem' or 'economy'")
    schools = _Schools(_get(doc, "schools", "$"), "$.schools")
    mechanism, consent = _parse_mechanism(doc, "$")
    expectations = doc.get("expect")
    if expectations is not None:
        expectations = _expect(expectations, dict, "$.expect", "an object")
    if kind == "problem":
        model: Union[Economy, DynamicProblem] = _parse_problem(doc, schools)
    else:
        model = _parse_economy(doc, schools, mechanism, consent)
    return ScenarioDocument(kind, model, mechanism, consent, expectations)


def parse_scenario(text: str) -> Union[Economy, DynamicProblem]:
    """The model described by a scenario document."""
    return parse_document(text).model


def canonical_json(payload: Any) -> str:
    """Stable rendering: sorted keys, two-space indent, one trailing
    newline. Equal payloads give equal bytes."""
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def _labels_of(mask: SchoolSet, schools: Sequence[SchoolId]) -> list[str]:
    return sorted(set_labels(mask, schools))


def _teacher_labels(mask: int, teachers: Sequence[TeacherId]) -> list[str]:
    return sorted(t.label for t in teachers if mask & (1 << t.index))


def matching_payload(matching: Matching) -> dict:
    return {
        "assignments": {
            t.label: _labels_of(matching.assigned[t.index], matching.schools)
            for t in matching.teachers
        }
    }


def preference_payload(pref: SubsetPreference, schools: Sequence[SchoolId]) -> list[list[str]]:
    return [_labels_of(mask, schools) for mask in pref.ranking]


def table_payload(cf: ChoiceFunction, schools: Sequence[SchoolId]) -> dict:
    return {
        ",".join(_labels_of(offered, schools)): _labels_of(cf.table[offered], schools)
        for offered in range(1 << cf.n_schools)
    }


def trace_payload(trace: DaTrace) -> dict:
    problem = trace.problem
    steps = []
    for number, step in enumerate(trace.steps, start=1):
        steps.append(
            {
                "step": number,
                "proposals": {
                    t.label: _labels_of(step.proposals[t.index], problem.schools)
                    for t in problem.teachers
                    if step.proposals[t.index]
                },
                "held": {
                    s.label: _teacher_labels(step.held_after[s.index], problem.teachers)
                    for s in problem.schools
                },
                "rejected": {
                    s.label: _teacher_labels(step.rejections[s.index], problem.teachers)
                    for s in problem.schools
                },
            }
        )
    return {
        "format": "da-trace/1",
        "teachers": [t.label for t in problem.teachers],
        "schools": [s.label for s in problem.schools],
        "quotas": list(problem.quotas),
        "steps": steps,
        "matching": matching_payload(trace.matching()),
    }


def treada_payload(log: TreadaLog) -> dict:
    rounds = []
    for r in log.rounds:
        rounds.append(
            {
                "round": r.number,
                "trace": trace_payload(r.trace),
                "matching": matching_payload(r.matching),
                "truncations": [
                    {
                        "teacher": pair.teacher.label,
                        "school": pair.school.label,
                        "held_from_step": pair.held_from_step,
                        "rejected_at_step": pair.rejected_at_step,
                    }
                    for pair in r.truncated
                ],
            }
        )
    return {
        "format": "treada-log/1",
        "rounds": rounds,
        "final_matching": matching_payload(log.final.matching),
    }


def _assignment_payload(assignment, schools: Sequence[SchoolId]) -> dict:
    return {
        label: preference_payload(pref, schools) for label, pref in assignment
    }


def finding_payload(finding: ManipulationFinding, schools: Sequence[SchoolId]) -> dict:
    def witness(side) -> dict:
        return {
            "outcome": _labels_of(side.outcome, schools),
            "co_reports": _assignment_payload(side.assignment, schools),
        }

    return {
        "teacher": finding.teacher.label,
        "period": finding.period,
        "true_preference": preference_payload(finding.true_preference, schools),
        "misreport": preference_payload(finding.misreport, schools),
        "gained": _labels_of(finding.gained, schools),
        "truthful": _labels_of(finding.truthful, schools),
        "obviousness": finding.obviousness.value,
        "exhaustive": finding.exhaustive,
        "certificate": {
            "worst_truthful": witness(finding.certificate.worst_truthful),
            "worst_misreport": witness(finding.certificate.worst_misreport),
            "best_truthful": witness(finding.certificate.best_truthful),
            "best_misreport": witness(finding.certificate.best_misreport),
        },
    }


def emit_trace(obj: Union[DaTrace, TreadaLog, Mapping]) -> str:
    """Canonical text for a trace, a full log, or an assembled report."""
    if isinstance(obj, DaTrace):
        payload: Any = trace_payload(obj)
    elif isinstance(obj, TreadaLog):
        payload = treada_payload(obj)
    elif isinstance(obj, Mapping):
        payload = obj
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return canonical_json(payload)


def _economy_payload(economy: Economy) -> dict:
    periods = []
    declared: set[TeacherId] = set()
    for period in economy.periods:
        entrants = {
            teacher.label: {"preference": preference_payload(pref, economy.schools)}
            for teacher, pref in period.entrants
        }
        periods.append(
            {
                "teachers": [t.label for t in period.teachers],
                "priorities": {
                    school.label: [t.label for t in listing]
                    for school, listing in zip(economy.schools, period.priorities.order)
                },
                "entrants": entrants,
            }
        )
        declared.update(t for t, _ in period.entrants)
    payload = {
        "schema": SCHEMA_VERSION,
        "kind": "economy",
        "schools": [
            {"label": s.label, "quota": q}
            for s, q in zip(economy.schools, economy.quotas)
        ],
        "mechanism": economy.mechanism,
        "consent": (
            economy.consent
            if isinstance(economy.consent, str)
            else sorted(economy.consent)
        ),
        "initial": {
            t.label: _labels_of(mask, economy.schools) for t, mask in economy.initial
        },
        "periods": periods,
    }
    return payload


def _problem_payload(problem: DynamicProblem) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "kind": "problem",
        "schools": [
            {"label": s.label, "quota": q}
            for s, q in zip(problem.schools, problem.quotas)
        ],
        "teachers": [t.label for t in problem.teachers],
        "choices": {
            t.label: {"table": table_payload(cf, problem.schools)}
            for t, cf in zip(problem.teachers, problem.choices)
        },
        "priorities": {
            school.label: [t.label for t in listing]
            for school, listing in zip(problem.schools, problem.priorities.order)
        },
        "previous": {
            t.label: _labels_of(mask, problem.schools)
            for t, mask in zip(problem.teachers, problem.previous)
            if mask
        },
    }


def emit_scenario(obj: Union[ScenarioDocument, Economy, DynamicProblem]) -> str:
    """Canonical scenario text; parsing it back gives an equal model."""
    expectations = None
    if isinstance(obj, ScenarioDocument):
        expectations = obj.expectations
        obj = obj.model
    if isinstance(obj, Economy):
        payload = _economy_payload(obj)
    elif isinstance(obj, DynamicProblem):
        payload = _problem_payload(obj)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    if expectations is not None:
        payload["expect"] = expectations
    return canonical_json(payload)
