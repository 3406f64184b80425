import json

import pytest

from crkernel.errors import ConfigError
from crkernel.harness import (
    default_config,
    emit_report,
    parse_config,
    parse_structured_report,
    run_scenarios,
)
from crkernel import cli


def small_config(**overrides):
    doc = {
        "seed": 0,
        "jet_order": 6,
        "scenarios": [
            {
                "name": "geo",
                "chart": {"model": "heisenberg", "n": 1},
                "checks": ["christoffel_table", "princ_symb_id"],
                "tolerances": {"absolute": 1e-10, "relative": 0.0},
            }
        ],
    }
    doc.update(overrides)
    return doc


def test_empty_scenarios_empty_reports():
    cfg = parse_config({"scenarios": []})
    assert run_scenarios(cfg) == []


def test_duplicate_scenario_name_rejected():
    doc = small_config()
    doc["scenarios"] = doc["scenarios"] * 2
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(doc)


def test_unknown_keys_rejected():
    doc = small_config()
    doc["plotting"] = True
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_config(doc)
    doc = small_config()
    doc["scenarios"][0]["chart"]["foo"] = 1
    with pytest.raises(ConfigError, match=r"scenarios\[0\].chart"):
        parse_config(doc)


def test_unknown_check_rejected():
    doc = small_config()
    doc["scenarios"][0]["checks"] = ["no_such_check"]
    with pytest.raises(ConfigError, match="unknown check"):
        parse_config(doc)


def test_tolerances_must_be_positive():
    doc = small_config()
    doc["scenarios"][0]["tolerances"] = {"absolute": 0.0, "relative": 0.0}
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_jet_order_floor_for_expansion_checks():
    doc = small_config(jet_order=3)
    doc["scenarios"][0]["checks"] = ["b1_two_routes"]
    doc["scenarios"][0]["symbol"] = {"kind": "identity"}
    with pytest.raises(ConfigError, match="jet_order"):
        parse_config(doc)


def test_perturbed_needs_order_six():
    doc = small_config(jet_order=5)
    doc["scenarios"][0]["chart"] = {"model": "perturbed", "n": 1, "r_synth": 0.3}
    with pytest.raises(ConfigError, match="jet_order"):
        parse_config(doc)


def test_reports_deterministic_and_filterable():
    cfg = parse_config(small_config())
    blob1 = emit_report(run_scenarios(cfg, timings=False))
    blob2 = emit_report(run_scenarios(cfg, timings=False))
    assert blob1 == blob2
    assert run_scenarios(cfg, name_filter="nomatch-*") == []
    assert len(run_scenarios(cfg, name_filter="ge*")) == 1


def test_structured_round_trip_bit_exact():
    cfg = parse_config(small_config())
    reports = run_scenarios(cfg, timings=False)
    blob = emit_report(reports, "structured")
    parsed = parse_structured_report(blob)
    assert parsed[0]["scenario"] == "geo"
    for rec, orig in zip(parsed[0]["records"], reports[0].records):
        assert rec["route_a"] == orig.route_a
        assert rec["route_b"] == orig.route_b
        assert rec["abs_deviation"] == orig.abs_deviation
        assert rec["tolerance"] == orig.tolerance
        assert rec["passed"] == orig.passed


def test_csv_header_and_rows():
    cfg = parse_config(small_config())
    blob = emit_report(run_scenarios(cfg, timings=False), "csv")
    lines = blob.decode().strip().splitlines()
    assert lines[0] == (
        "scenario,check_id,route_a,route_b,abs_deviation,rel_deviation,"
        "tolerance,passed,wall_time_s"
    )
    assert len(lines) == 3
    assert lines[1].startswith("geo,christoffel_table,")


def test_empty_reports_still_valid_documents():
    assert json.loads(emit_report([], "structured")) == {"reports": []}
    assert emit_report([], "csv").decode().strip().count("\n") == 0


def test_unknown_format_rejected():
    with pytest.raises(ConfigError):
        emit_report([], "yaml")


def test_multiplication_reference_check_runs():
    doc = small_config()
    doc["scenarios"][0]["symbol"] = {"kind": "multiplication", "seed": 3}
    doc["scenarios"][0]["checks"] = ["b0_leading", "b1_two_routes", "b1_reference"]
    doc["scenarios"][0]["tolerances"] = {"absolute": 1e-12, "relative": 1e-10}
    reports = run_scenarios(parse_config(doc), timings=False)
    assert reports[0].all_passed


def test_default_config_covers_every_check_kind():
    cfg = default_config()
    seen = {c for s in cfg["scenarios"] for c in s.checks}
    from crkernel.harness import CHECKS

    missing = set(CHECKS) - seen - {"b1_reference"}
    assert "b1_two_routes" in seen
    assert "quadrature_leading" in seen
    assert not missing - {"b1_reference"}


# -- CLI ------------------------------------------------------------------------------------


def write_config(tmp_path, doc):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_cli_pass_exit_zero(tmp_path, capsys):
    path = write_config(tmp_path, small_config())
    out = tmp_path / "report.json"
    code = cli.main(["--config", path, "--strict", "--out", str(out), "--no-timings"])
    assert code == 0
    assert json.loads(out.read_text())["reports"][0]["scenario"] == "geo"


def test_cli_config_error_exit_two(tmp_path, capsys):
    path = write_config(tmp_path, {"nonsense": 1})
    assert cli.main(["--config", path]) == 2
    bad_json = tmp_path / "broken.json"
    bad_json.write_text("{ not json")
    assert cli.main(["--config", str(bad_json)]) == 2
    assert cli.main(["--config", "/no/such/file.json"]) == 2


def test_cli_strict_failure_exit_one(tmp_path, capsys):
    doc = small_config()
    doc["scenarios"][0]["checks"] = ["kohn_point_formula"]
    doc["scenarios"][0]["tolerances"] = {"absolute": 1e-30, "relative": 0.0}
    path = write_config(tmp_path, doc)
    assert cli.main(["--config", path]) == 0  # non-strict records the failure
    assert cli.main(["--config", path, "--strict"]) == 1


def test_cli_numerical_error_exit_three(tmp_path, capsys):
    doc = {
        "seed": 0,
        "jet_order": 6,
        "oracle": {"cutoff_radius": 3.0},
        "scenarios": [
            {
                "name": "quad",
                "chart": {"model": "heisenberg", "n": 1},
                "checks": ["quadrature_leading"],
                "tolerances": {"absolute": 0.0, "relative": 1e-2},
                "params": {"num_amplitudes": 1},
            }
        ],
    }
    path = write_config(tmp_path, doc)
    assert cli.main(["--config", path]) == 3


def test_cli_filter_and_csv(tmp_path, capsys):
    path = write_config(tmp_path, small_config())
    code = cli.main(["--config", path, "--format", "csv", "--filter", "geo", "--no-timings"])
    assert code == 0
    captured = capsys.readouterr()
    assert captured.out.splitlines()[0].startswith("scenario,check_id")


def test_cli_seed_and_jet_order_overrides(tmp_path, capsys):
    path = write_config(tmp_path, small_config())
    assert cli.main(["--config", path, "--seed", "7", "--jet-order", "5", "--no-timings"]) == 0
    out = capsys.readouterr().out
    doc = json.loads(out)
    env = doc["reports"][0]["environment"]
    assert env["seed"] == "7"
    assert env["jet_order"] == "5"
