import csv
import json

import pytest

from app.exceptions import ChartCoverageError, NumericalDomainError, ScenarioError
from app.main import EXIT_NUMERICAL, EXIT_OK, EXIT_SCENARIO, main, run_scenario
from app.parser.scenario_parser import parse_scenario


def _flat_radius(**overrides):
    doc = {
        "name": "flat_radius",
        "seed": 1,
        "model": {"name": "flat_torus"},
        "domain": {"resolution": 0.5},
        "task": {"task": "radius-field", "s": 0.6},
        "output": {"format": "csv"},
    }
    doc.update(overrides)
    return doc


def test_radius_field_csv(write_scenario, tmp_path):
    out = tmp_path / "reports"
    assert main(["--config", str(write_scenario(_flat_radius())), "--out", str(out)]) == EXIT_OK

    with open(out / "flat_radius.csv", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 16
    assert list(rows[0]) == ["x0", "x1", "x2", "x3", "radius"]
    assert {float(r["radius"]) for r in rows} == {0.6}

    summary = json.loads((out / "flat_radius.summary.json").read_text(encoding="utf-8"))
    assert summary["task"] == "radius-field"
    assert summary["summary"]["cutoff_points"] == 16
    assert summary["summary"]["lipschitz"]["constant"] == 0.0
    assert summary["rows"] == []


def test_gauss_bonnet_json(write_scenario, tmp_path):
    doc = {
        "name": "s4_gb",
        "seed": 0,
        "model": {"name": "sphere4", "params": {"radius": 1.0}},
        "domain": {"resolution": 0.4},
        "task": {"task": "gauss-bonnet"},
    }
    out = tmp_path / "reports"
    assert main(["--config", str(write_scenario(doc)), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "s4_gb.json").read_text(encoding="utf-8"))
    assert report["summary"]["euler_rounded"] == 2
    assert report["model"] == "sphere4(radius=1.0)"


def test_yaml_scenario(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text(
        "name: flat_yaml\nseed: 3\nmodel:\n  name: flat_torus\ndomain:\n  resolution: 0.5\n"
        "task:\n  task: radius-field\n  s: 0.6\n",
        encoding="utf-8",
    )
    sc = parse_scenario(path)
    assert sc.task.task == "radius-field"
    assert sc.output.format == "json"


@pytest.mark.parametrize("doc", [
    _flat_radius(bogus=1),
    _flat_radius(task={"task": "radius-field", "s": 0.6, "extra": True}),
    _flat_radius(task={"task": "cover", "k": 1.0, "l": 1.2}),
    _flat_radius(model={"name": "klein_bottle"}),
    {k: v for k, v in _flat_radius().items() if k != "seed"},
])
def test_invalid_scenario_writes_nothing(write_scenario, tmp_path, doc):
    out = tmp_path / "reports"
    assert main(["--config", str(write_scenario(doc)), "--out", str(out)]) == EXIT_SCENARIO
    assert not out.exists()


def test_schema_error_names_key_path(write_scenario):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(write_scenario(_flat_radius(task={"task": "cover", "k": 1.0, "l": 1.2})))
    assert info.value.key.startswith("task")
    assert info.value.key.endswith("k")


def test_noncompact_full_region_is_numerical_error(write_scenario, tmp_path):
    doc = {
        "name": "h4_gb",
        "seed": 0,
        "model": {"name": "hyperbolic4"},
        "domain": {"resolution": 0.5},
        "task": {"task": "gauss-bonnet"},
    }
    out = tmp_path / "reports"
    config = write_scenario(doc)
    assert main(["--config", str(config), "--out", str(out)]) == EXIT_NUMERICAL
    assert not out.exists()
    with pytest.raises(NumericalDomainError) as info:
        run_scenario(config, out)
    assert info.value.module == "models"
    assert info.value.key == "domain.region"


def test_ball_past_coverage_names_radii(write_scenario, tmp_path):
    doc = {
        "name": "warped_scan",
        "seed": 0,
        "model": {"name": "warped_s1s3", "params": {"warp": 0.3}},
        "domain": {"resolution": 1.0},
        "task": {"task": "epsreg-scan", "radii": [2.0], "points": [[1.57, 1.0, 1.0, 1.0]]},
    }
    with pytest.raises(ChartCoverageError) as info:
        run_scenario(write_scenario(doc), tmp_path / "reports")
    assert info.value.key == "task.radii"
    assert "key=task.radii" in str(info.value)


def test_unwritable_output(write_scenario, tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")
    assert main(["--config", str(write_scenario(_flat_radius())), "--out", str(blocker / "sub")]) == EXIT_NUMERICAL


def test_threads_must_be_positive(write_scenario, tmp_path):
    assert main(["--config", str(write_scenario(_flat_radius())), "--out", str(tmp_path), "--threads", "0"]) == EXIT_SCENARIO


def test_reruns_are_byte_identical(write_scenario, tmp_path):
    config = str(write_scenario(_flat_radius()))
    assert main(["--config", config, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["--config", config, "--out", str(tmp_path / "b"), "--threads", "2"]) == EXIT_OK
    for name in ("flat_radius.csv", "flat_radius.summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_epsreg_scan_jsonl(write_scenario, tmp_path):
    doc = {
        "name": "flat_scan",
        "seed": 0,
        "model": {"name": "flat_torus"},
        "domain": {"resolution": 0.5},
        "task": {"task": "epsreg-scan", "radii": [0.1, 0.2], "points": [[0.0, 0.0, 0.0, 0.0]], "volume_grid": [[0.2, 0.1]]},
        "output": {"format": "jsonl"},
    }
    out = tmp_path / "reports"
    assert main(["--config", str(write_scenario(doc)), "--out", str(out)]) == EXIT_OK
    lines = (out / "flat_scan.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert all(json.loads(line)["satisfied"] for line in lines)
    summary = json.loads((out / "flat_scan.summary.json").read_text(encoding="utf-8"))
    assert summary["summary"]["all_satisfied"]
    assert summary["summary"]["volume_comparison_passes"]
