import csv
import json

import jsonschema
import pytest

from conftest import make_dataset
from credamp.amplify import AnalysisConfig, baseline_analysis, stratified_delta
from credamp.bootstrap import BootstrapConfig
from credamp.report import CSV_FILES, REPORT_SCHEMA, AmplificationReport, emit_report, load_report


@pytest.fixture(scope="module")
def report():
    data = make_dataset(300, 900, verified=[True, False] * 600)
    cfg = AnalysisConfig(bootstrap=BootstrapConfig(iterations=150, seed=1))
    base = baseline_analysis(data, cfg)
    deltas = [stratified_delta(data, "verified", cfg, base)]
    return AmplificationReport(base, cfg.to_dict(), deltas, inputs=[{"role": "posts", "name": "p", "sha256": "0"}])


def test_json_report_matches_schema(tmp_path, report):
    path = tmp_path / "out" / "report.json"
    assert emit_report(report, "json", path) == [path]
    doc = load_report(path)
    jsonschema.validate(doc, REPORT_SCHEMA)
    assert doc["metadata"]["seed"] == 1
    assert doc["metadata"]["tool"] == "credamp"
    assert len(doc["baseline"]["stratum_matrix"]) == 16
    assert not list(path.parent.glob(".*tmp"))


def test_csv_bundle(tmp_path, report):
    out = tmp_path / "bundle"
    written = emit_report(report, "csv", out)
    assert sorted(p.name for p in written) == sorted([*CSV_FILES, "metadata.json"])
    with open(out / "baseline_distribution.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 150 and float(rows[0]["pct_diff"]) == pytest.approx(report.baseline.run.pct_diff[0])
    with open(out / "stratum_matrix.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 16
    with open(out / "deltas.csv") as fh:
        assert [r["value"] for r in csv.DictReader(fh)] == ["true", "false"]
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["metadata"]["config"]["iterations"] == 150


def test_report_is_deterministic(tmp_path, report):
    emit_report(report, "json", tmp_path / "a.json")
    emit_report(report, "json", tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_unwritable_path_names_path(tmp_path, report):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit_report(report, "json", blocker / "report.json")


def test_unknown_format(tmp_path, report):
    with pytest.raises(ValueError):
        emit_report(report, "xml", tmp_path / "r")


def test_json_round_trip(tmp_path, report):
    path = tmp_path / "r.json"
    emit_report(report, "json", path)
    assert load_report(path) == json.loads(json.dumps(report.to_dict()))
