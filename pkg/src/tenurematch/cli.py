"""Command-line surface.

Subcommands: run, audit, manipulate, enumerate, validate. Human
summaries go to standard output; canonical machine output is written
only through ``--out``. Exit codes: 0 success, 1 a requested check
failed or an obvious manipulation was found, 2 usage or scenario
errors, 3 an oracle guard was exceeded, 4 a manipulation search over a
sampled domain came back empty (inconclusive).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from random import Random
from typing import Optional, Sequence, Union

from . import scenario as sc
from .audit import (
    enumerate_dynamically_stable,
    enumerate_matchings,
    count_matchings_closed_form,
    is_blair_efficient,
    is_dynamically_stable,
    minimality_of_unjustified_claims,
    blair_dominates_weakly,
)
from .domains import random_substitutable_preference
from .dynamic import DynamicProblem, run_cohort_da, run_trda
from .economy import (
    EXHAUSTIVE,
    Economy,
    Obviousness,
    find_dynamic_manipulations,
    simulate_detailed,
)
from .errors import DomainTooLarge, NotStableInput, TenureMatchError
from .model import Matching, set_labels
from .treada import ConsentProfile, run_treada

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_GUARD = 3
EXIT_INCONCLUSIVE = 4

CHECKS = ("stability", "constrained-efficiency", "claim-minimality", "efficiency")


def _color_enabled() -> bool:
    return sys.stdout.isatty() and not os.environ.get("NO_COLOR")


def _verdict_word(passed: bool) -> str:
    word = "PASS" if passed else "FAIL"
    if _color_enabled():
        code = "32" if passed else "31"
        return f"\x1b[{code}m{word}\x1b[0m"
    return word


def _write_out(path: Optional[str], text: str) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")


def _matching_line(matching: Matching) -> str:
    if not matching.teachers:
        return "(empty)"
    parts = []
    for t in matching.teachers:
        labels = sorted(set_labels(matching.assigned[t.index], matching.schools))
        parts.append(f"{t.label}:{{{','.join(labels)}}}")
    return "  ".join(parts)


def _consent_flag(value: str) -> Union[str, frozenset[str]]:
    if value in ("all", "none"):
        return value
    return frozenset(part for part in value.split(",") if part)


def _load(path: str) -> sc.ScenarioDocument:
    text = Path(path).read_text(encoding="utf-8")
    return sc.parse_document(text)


def _problem_consent(problem: DynamicProblem, consent) -> ConsentProfile:
    if consent == "all":
        return ConsentProfile.all_of(problem.teachers)
    if consent == "none":
        return ConsentProfile.none_of(problem.teachers)
    return ConsentProfile.of(problem.teachers, set(consent))


def _cohorts_by_tenure(problem: DynamicProblem) -> list[list]:
    employed = [t for t, prev in zip(problem.teachers, problem.previous) if prev]
    entering = [t for t, prev in zip(problem.teachers, problem.previous) if not prev]
    return [cohort for cohort in (employed, entering) if cohort]


def _run_problem(problem: DynamicProblem, mechanism: str, consent):
    """Returns (final matching, machine payload)."""
    if mechanism == "trda":
        matching, trace = run_trda(problem)
        return matching, sc.trace_payload(trace)
    if mechanism == "treada":
        matching, log = run_treada(problem, _problem_consent(problem, consent))
        return matching, sc.treada_payload(log)
    matching = run_cohort_da(problem, _cohorts_by_tenure(problem))
    return matching, {"format": "matching/1", **sc.matching_payload(matching)}


def cmd_run(args: argparse.Namespace) -> int:
    doc = _load(args.scenario)
    mechanism = args.mechanism or doc.mechanism
    consent = _consent_flag(args.consent) if args.consent else doc.consent
    if isinstance(doc.model, DynamicProblem):
        matching, payload = _run_problem(doc.model, mechanism, consent)
        print(f"{mechanism}: {_matching_line(matching)}")
        _write_out(args.out, sc.canonical_json(payload))
        return EXIT_OK
    economy = replace(doc.model, mechanism=mechanism, consent=consent)
    outcomes = simulate_detailed(economy)
    periods = []
    for out in outcomes:
        print(f"period {out.period} ({mechanism}): {_matching_line(out.matching)}")
        entry = {
            "period": out.period,
            "matching": sc.matching_payload(out.matching),
        }
        if out.trace is not None:
            entry["trace"] = (
                sc.treada_payload(out.trace)
                if hasattr(out.trace, "rounds")
                else sc.trace_payload(out.trace)
            )
        periods.append(entry)
    _write_out(args.out, sc.canonical_json({"format": "run/1", "periods": periods}))
    return EXIT_OK


def _audit_problem(problem: DynamicProblem, matching: Matching, checks) -> tuple[bool, dict]:
    results = {}
    all_passed = True
    for check in checks:
        if check == "stability":
            verdict = is_dynamically_stable(problem, matching)
            passed = verdict.dynamically_stable
            detail = {
                "individually_rational": verdict.individually_rational,
                "dynamically_rational": verdict.dynamically_rational,
                "non_wasteful": verdict.non_wasteful,
                "claims": [
                    {
                        "claimant": c.claimant.label,
                        "school": c.school.label,
                        "displaced": c.displaced.label,
                        "kind": c.kind.value,
                    }
                    for c in verdict.claims
                ],
                "dynamically_stable": verdict.dynamically_stable,
            }
        elif check == "constrained-efficiency":
            stable = enumerate_dynamically_stable(problem)
            dominator = None
            for nu in stable:
                if (
                    blair_dominates_weakly(problem, nu, matching)
                    and nu.assigned != matching.assigned
                    and not blair_dominates_weakly(problem, matching, nu)
                ):
                    dominator = nu
                    break
            passed = dominator is None
            detail = {
                "stable_count": len(stable),
                "dominated_by": None
                if dominator is None
                else sc.matching_payload(dominator)["assignments"],
            }
        elif check == "claim-minimality":
            try:
                passed = minimality_of_unjustified_claims(problem, matching)
                detail = {"minimal": passed}
            except NotStableInput as exc:
                passed = False
                detail = {"error": str(exc)}
        elif check == "efficiency":
            passed, witness = is_blair_efficient(problem, matching)
            detail = {
                "efficient": passed,
                "dominated_by": None
                if witness is None
                else sc.matching_payload(witness)["assignments"],
            }
        else:
            raise TenureMatchError(f"unknown check {check!r}")
        results[check] = {"passed": passed, **detail}
        all_passed = all_passed and passed
    return all_passed, results


def cmd_audit(args: argparse.Namespace) -> int:
    doc = _load(args.scenario)
    checks = [c for c in args.check.split(",") if c]
    for check in checks:
        if check not in CHECKS:
            print(f"error: unknown check {check!r} (pick from {', '.join(CHECKS)})")
            return EXIT_USAGE
    mechanism = args.mechanism or doc.mechanism
    consent = _consent_flag(args.consent) if args.consent else doc.consent

    sections = []
    if isinstance(doc.model, DynamicProblem):
        matching, _ = _run_problem(doc.model, mechanism, consent)
        passed, results = _audit_problem(doc.model, matching, checks)
        sections.append(("", doc.model, matching, passed, results))
    else:
        economy = replace(doc.model, mechanism=mechanism, consent=consent)
        for out in simulate_detailed(economy):
            passed, results = _audit_problem(out.problem, out.matching, checks)
            sections.append(
                (f"period {out.period}: ", out.problem, out.matching, passed, results)
            )

    payload_sections = []
    all_passed = True
    for prefix, _, matching, passed, results in sections:
        for check in checks:
            print(f"{prefix}{check}: {_verdict_word(results[check]['passed'])}")
        payload_sections.append(
            {
                "scope": prefix.rstrip(": ") or "problem",
                "matching": sc.matching_payload(matching),
                "checks": results,
            }
        )
        all_passed = all_passed and passed
    _write_out(
        args.out,
        sc.canonical_json(
            {"format": "audit/1", "mechanism": mechanism, "sections": payload_sections}
        ),
    )
    return EXIT_OK if all_passed else EXIT_CHECK_FAILED


def _domain_from_file(path: str, schools: sc._Schools):
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise sc.ParseError(f"{path}: expected an object")
    if "profiles" in raw:
        profiles = raw["profiles"]
        if not isinstance(profiles, list) or not profiles:
            raise sc.ParseError(f"{path}: 'profiles' must be a nonempty array")
        parsed = []
        for k, entry in enumerate(profiles):
            if not isinstance(entry, dict):
                raise sc.ParseError(f"{path}: profiles[{k}] must be an object")
            parsed.append(
                {
                    label: sc._parse_preference(pref, schools, f"profiles[{k}].{label}")
                    for label, pref in entry.items()
                }
            )
        return parsed, len(parsed)
    key = "pool" if "pool" in raw else "misreports"
    if key not in raw or not isinstance(raw[key], list) or not raw[key]:
        raise sc.ParseError(f"{path}: expected 'profiles', 'pool', or 'misreports'")
    pool = [
        sc._parse_preference(entry, schools, f"{key}[{k}]")
        for k, entry in enumerate(raw[key])
    ]
    return pool, len(pool)


def cmd_manipulate(args: argparse.Namespace) -> int:
    doc = _load(args.scenario)
    if not isinstance(doc.model, Economy):
        print("error: manipulate needs a multi-period economy scenario")
        return EXIT_USAGE
    economy = doc.model
    if args.mechanism or args.consent:
        economy = replace(
            economy,
            mechanism=args.mechanism or economy.mechanism,
            consent=_consent_flag(args.consent) if args.consent else economy.consent,
        )
    schools = sc._Schools(
        [{"label": s.label, "quota": q} for s, q in zip(economy.schools, economy.quotas)],
        "$.schools",
    )

    if args.exhaustive:
        if args.misreport_file or args.adversary_file or args.samples:
            print("error: --exhaustive excludes files and sampling")
            return EXIT_USAGE
        misreports = EXHAUSTIVE
        adversaries = EXHAUSTIVE
        mis_meta = {"kind": "exhaustive"}
        adv_meta = {"kind": "exhaustive"}
    else:
        rng = Random(args.seed) if args.seed is not None else None
        n = len(economy.schools)
        if args.misreport_file:
            misreports, size = _domain_from_file(args.misreport_file, schools)
            mis_meta = {"kind": "file", "size": size}
        elif args.samples:
            misreports = [random_substitutable_preference(n, rng) for _ in range(args.samples)]
            mis_meta = {"kind": "sampled", "size": args.samples, "seed": args.seed}
        else:
            print("error: provide --exhaustive, --misreport-file, or --samples")
            return EXIT_USAGE
        if args.adversary_file:
            adversaries, size = _domain_from_file(args.adversary_file, schools)
            adv_meta = {"kind": "file", "size": size}
        elif args.samples:
            adversaries = [
                random_substitutable_preference(n, rng) for _ in range(args.samples)
            ]
            adv_meta = {"kind": "sampled", "size": args.samples, "seed": args.seed}
        else:
            print("error: provide --exhaustive, --adversary-file, or --samples")
            return EXIT_USAGE

    findings = find_dynamic_manipulations(economy, args.teacher, misreports, adversaries)
    obvious = [f for f in findings if f.obviousness is not Obviousness.NOT_OBVIOUS]
    exhaustive = args.exhaustive

    for finding in findings:
        gained = ",".join(sorted(set_labels(finding.gained, economy.schools))) or "-"
        truthful = ",".join(sorted(set_labels(finding.truthful, economy.schools))) or "-"
        print(
            f"{finding.teacher.label} period {finding.period}: "
            f"{{{gained}}} over {{{truthful}}} ({finding.obviousness.value})"
        )
    print(
        f"{len(findings)} dynamic manipulation(s), {len(obvious)} obvious, "
        f"domains {'exhaustive' if exhaustive else 'sampled/explicit'}"
    )
    _write_out(
        args.out,
        sc.canonical_json(
            {
                "format": "manipulation/1",
                "teacher": args.teacher,
                "mechanism": economy.mechanism,
                "misreport_domain": mis_meta,
                "adversary_domain": adv_meta,
                "findings": [sc.finding_payload(f, economy.schools) for f in findings],
                "obvious_count": len(obvious),
            }
        ),
    )
    if obvious:
        return EXIT_CHECK_FAILED
    return EXIT_OK if exhaustive else EXIT_INCONCLUSIVE


def cmd_enumerate(args: argparse.Namespace) -> int:
    doc = _load(args.scenario)
    if not isinstance(doc.model, DynamicProblem):
        print("error: enumerate needs a single-period problem scenario")
        return EXIT_USAGE
    problem = doc.model
    if args.what == "matchings":
        count = count_matchings_closed_form(problem)
        listed = sum(1 for _ in enumerate_matchings(problem))
        print(f"{listed} feasible matchings (closed form {count})")
        _write_out(
            args.out,
            sc.canonical_json(
                {"format": "enumerate/1", "what": "matchings", "count": listed}
            ),
        )
        return EXIT_OK
    stable = enumerate_dynamically_stable(problem)
    print(f"{len(stable)} dynamically stable matching(s)")
    for matching in stable:
        print(f"  {_matching_line(matching)}")
    _write_out(
        args.out,
        sc.canonical_json(
            {
                "format": "enumerate/1",
                "what": "stable",
                "count": len(stable),
                "matchings": [sc.matching_payload(mu) for mu in stable],
            }
        ),
    )
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        doc = _load(args.scenario)
    except sc.ValidationError as exc:
        print(f"invalid: {exc}")
        return EXIT_CHECK_FAILED
    model = doc.model
    if isinstance(model, DynamicProblem):
        print(
            f"ok: problem with {len(model.teachers)} teachers, "
            f"{len(model.schools)} schools"
        )
    else:
        print(
            f"ok: economy with {len(model.teacher_universe)} teachers, "
            f"{len(model.schools)} schools, {len(model.periods)} period(s)"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tenurematch",
        description="Dynamic many-to-many school choice with tenured positions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, mechanism: bool = True) -> None:
        p.add_argument("scenario", help="path to a .scenario file")
        if mechanism:
            p.add_argument(
                "--mechanism", choices=("trda", "treada", "cohort"), default=None
            )
            p.add_argument(
                "--consent",
                default=None,
                help="'all', 'none', or comma-separated teacher labels",
            )
        p.add_argument("--out", default=None, help="write canonical JSON here")

    p_run = sub.add_parser("run", help="run the mechanism and print matchings")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_audit = sub.add_parser("audit", help="check mechanism output")
    add_common(p_audit)
    p_audit.add_argument(
        "--check",
        default="stability",
        help=f"comma-separated subset of: {', '.join(CHECKS)}",
    )
    p_audit.set_defaults(func=cmd_audit)

    p_man = sub.add_parser("manipulate", help="search for dynamic manipulations")
    add_common(p_man)
    p_man.add_argument("--teacher", required=True, help="label of the focal teacher")
    p_man.add_argument(
        "--exhaustive",
        action="store_true",
        help="search every substitutable report (|S| <= 3)",
    )
    p_man.add_argument("--misreport-file", default=None)
    p_man.add_argument("--adversary-file", default=None)
    p_man.add_argument("--samples", type=int, default=None)
    p_man.add_argument("--seed", type=int, default=None)
    p_man.set_defaults(func=cmd_manipulate)

    p_enum = sub.add_parser("enumerate", help="enumerate matchings or the stable set")
    add_common(p_enum, mechanism=False)
    p_enum.add_argument("--what", choices=("matchings", "stable"), default="stable")
    p_enum.set_defaults(func=cmd_enumerate)

    p_val = sub.add_parser("validate", help="parse and fully validate a scenario")
    p_val.add_argument("scenario", help="path to a .scenario file")
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "samples", None) is not None and args.seed is None:
        parser.error("--samples requires --seed")
    try:
        return args.func(args)
    except DomainTooLarge as exc:
        print(f"guard exceeded: {exc}")
        return EXIT_GUARD
    except (sc.ParseError, sc.ValidationError) as exc:
        print(f"scenario error: {exc}")
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}")
        return EXIT_USAGE
    except TenureMatchError as exc:
        print(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
