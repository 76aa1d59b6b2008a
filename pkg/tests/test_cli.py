"""Command line driver, exercised in process."""

import json
import re

import pytest
from importlib.resources import files

from tenurematch import PeriodSpec, PriorityProfile, emit_scenario
from tenurematch.cli import main
from tenurematch.economy import Economy
from tenurematch.model import TeacherId

from helpers import make_schools, pref


@pytest.fixture
def example1(tmp_path):
    path = tmp_path / "example1.scenario"
    path.write_text((files("tenurematch") / "scenarios" / "example1.scenario").read_text())
    return str(path)


@pytest.fixture
def section5(tmp_path):
    path = tmp_path / "section5.scenario"
    path.write_text((files("tenurematch") / "scenarios" / "section5.scenario").read_text())
    return str(path)


@pytest.fixture
def small_economy(tmp_path):
    # three entrants contest two schools in a single period
    teachers = tuple(TeacherId(j, f"i{j + 1}") for j in range(3))
    schools = make_schools(2)
    spec = PeriodSpec(
        teachers,
        PriorityProfile(schools, (teachers, (teachers[1], teachers[2], teachers[0]))),
        (
            (teachers[0], pref(2, 1, 2)),
            (teachers[1], pref(2, 1, 2)),
            (teachers[2], pref(2, 2, 1)),
        ),
    )
    eco = Economy(schools, (1, 1), (), (spec,))
    path = tmp_path / "small.scenario"
    path.write_text(emit_scenario(eco))
    return str(path)


def test_run_problem(example1, capsys, tmp_path):
    out = tmp_path / "run.json"
    assert main(["run", example1, "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "i1" in stdout and "s2" in stdout
    payload = json.loads(out.read_text())
    assert payload["matching"]["assignments"]["i1"] == ["s2"]
    assert out.read_text().endswith("\n")


def test_run_with_the_truncating_mechanism(example1, capsys):
    assert main(["run", example1, "--mechanism", "treada"]) == 0
    stdout = capsys.readouterr().out
    assert "s4" in stdout


def test_run_economy_prints_every_period(section5, capsys):
    assert main(["run", section5]) == 0
    stdout = capsys.readouterr().out
    assert "period 1" in stdout and "period 2" in stdout


def test_audit_stability_passes(example1, capsys):
    assert main(["audit", example1]) == 0
    assert "stability: PASS" in capsys.readouterr().out


def test_audit_efficiency_fails_on_the_worked_example(example1, capsys):
    assert main(["audit", example1, "--check", "efficiency"]) == 1
    assert "efficiency: FAIL" in capsys.readouterr().out


def test_audit_claim_minimality_of_the_base_mechanism(example1, capsys):
    assert main(["audit", example1, "--check", "claim-minimality"]) == 0
    assert "claim-minimality: PASS" in capsys.readouterr().out


def test_audit_shows_the_stability_efficiency_tradeoff(example1, capsys):
    # the truncating variant buys constrained efficiency and pays in
    # stability on this instance
    code = main(
        ["audit", example1, "--mechanism", "treada", "--check", "constrained-efficiency"]
    )
    assert code == 0
    assert "constrained-efficiency: PASS" in capsys.readouterr().out

    code = main(["audit", example1, "--mechanism", "treada", "--check", "stability"])
    assert code == 1
    assert "stability: FAIL" in capsys.readouterr().out


def test_audit_rejects_unknown_checks(example1, capsys):
    assert main(["audit", example1, "--check", "vibes"]) == 2


def test_manipulate_exhaustive_clean(small_economy, capsys):
    code = main(["manipulate", small_economy, "--teacher", "i1", "--exhaustive"])
    assert code == 0
    assert "0 dynamic manipulation(s), 0 obvious" in capsys.readouterr().out


def test_manipulate_sampled_clean_is_inconclusive(small_economy, capsys):
    code = main(
        ["manipulate", small_economy, "--teacher", "i1", "--samples", "4", "--seed", "7"]
    )
    assert code == 4


def test_manipulate_sampling_is_seed_deterministic(small_economy, capsys):
    argv = ["manipulate", small_economy, "--teacher", "i2", "--samples", "6", "--seed", "11"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first


def test_manipulate_finds_the_known_deviation(section5, tmp_path, capsys):
    raw = json.loads((files("tenurematch") / "scenarios" / "section5.scenario").read_text())
    expect = raw["expect"]
    mis = tmp_path / "mis.json"
    mis.write_text(json.dumps({"misreports": [expect["misreport"]["preference"]]}))
    adv = tmp_path / "adv.json"
    adv.write_text(json.dumps({"profiles": [{}, expect["adversary"]]}))
    out = tmp_path / "findings.json"
    code = main(
        [
            "manipulate",
            section5,
            "--teacher",
            "i4",
            "--misreport-file",
            str(mis),
            "--adversary-file",
            str(adv),
            "--out",
            str(out),
        ]
    )
    assert code == 1
    stdout = capsys.readouterr().out
    assert "i4 period 2: {s3} over {s1} (obvious-by-worst)" in stdout
    payload = json.loads(out.read_text())
    assert payload["obvious_count"] == 1
    assert payload["findings"][0]["period"] == 2


def test_manipulate_exhaustive_refuses_four_schools(section5, capsys):
    code = main(["manipulate", section5, "--teacher", "i4", "--exhaustive"])
    assert code == 3
    assert "guard exceeded" in capsys.readouterr().out


def test_manipulate_samples_require_a_seed(small_economy, capsys):
    with pytest.raises(SystemExit) as info:
        main(["manipulate", small_economy, "--teacher", "i1", "--samples", "5"])
    assert info.value.code == 2


def test_manipulate_needs_a_domain(small_economy, capsys):
    assert main(["manipulate", small_economy, "--teacher", "i1"]) == 2


def test_enumerate_matchings_agree_with_the_closed_form(example1, capsys):
    assert main(["enumerate", example1, "--what", "matchings"]) == 0
    line = capsys.readouterr().out.strip()
    listed, closed = (int(tok) for tok in re.findall(r"\d+", line))
    assert listed == closed


def test_enumerate_stable_set(example1, capsys, tmp_path):
    out = tmp_path / "stable.json"
    assert main(["enumerate", example1, "--what", "stable", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["count"] >= 1
    assert "dynamically stable" in capsys.readouterr().out


def test_validate_accepts_the_bundled_scenarios(example1, section5, capsys):
    assert main(["validate", example1]) == 0
    assert main(["validate", section5]) == 0
    stdout = capsys.readouterr().out
    assert stdout.count("ok:") == 2


def test_validate_flags_semantic_problems(tmp_path, capsys):
    raw = json.loads((files("tenurematch") / "scenarios" / "example1.scenario").read_text())
    del raw["priorities"]["s4"]
    bad = tmp_path / "bad.scenario"
    bad.write_text(json.dumps(raw))
    assert main(["validate", str(bad)]) == 1
    assert "invalid:" in capsys.readouterr().out


def test_validate_reports_malformed_files_as_usage(tmp_path, capsys):
    mangled = tmp_path / "mangled.scenario"
    mangled.write_text("{ not json")
    assert main(["validate", str(mangled)]) == 2
    assert main(["validate", str(tmp_path / "absent.scenario")]) == 2


def test_run_rejects_mismatched_scenario_kind(section5, capsys):
    assert main(["enumerate", section5]) == 2
