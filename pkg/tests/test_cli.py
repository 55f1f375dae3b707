from __future__ import annotations

import json
from pathlib import Path

import pytest

from rankfraud import cli

PIPELINE = ("ingest", "detect", "embed", "expand-labels", "train", "attribute", "deanonymize", "eval", "validate", "benchmark")
SMALL = [
    "--set", "synth.n_workers=3", "--set", "synth.n_products=8",
    "--set", "walk.gamma=3", "--set", "walk.walk_len=10", "--set", "walk.dims=8",
]


def run_all(out: Path) -> dict[str, bytes]:
    assert cli.main(["synth", *SMALL, "--out", str(out)]) == 0
    data = [
        "--corpus", str(out / "reviews.jsonl"),
        "--attributions", str(out / "attributions.jsonl"),
        "--groundtruth", str(out / "groundtruth.jsonl"),
    ]
    for command in PIPELINE:
        assert cli.main([command, *SMALL, *data, "--out", str(out)]) == 0, command
    assert cli.main(["detect", *SMALL, *data, "--out", str(out), "--algorithm", "dsg"]) == 0
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if not p.name.endswith(".manifest.json")}


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    first = run_all(out)
    second = run_all(out)
    return out, first, second


def test_rerun_is_byte_identical(pipeline):
    _, first, second = pipeline
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], name


def test_every_command_writes_a_manifest_naming_the_config_hash(pipeline):
    out, first, _ = pipeline
    for command in ("synth", *PIPELINE):
        manifest = json.loads((out / f"{command}.manifest.json").read_text())
        assert set(manifest) >= {"config", "config_hash", "seed", "versions", "outputs", "created_utc"}
        for name in manifest["outputs"]:
            if name.endswith(".json") and name in first:
                assert json.loads(first[name])["config_hash"] == manifest["config_hash"]


def keys(obj):
    if isinstance(obj, dict):
        return {k: keys(v) for k, v in obj.items() if k != "products"} | {"products": keys(obj["products"][0])} if "products" in obj else {k: keys(v) for k, v in obj.items()}
    return type(obj).__name__


def test_detect_reports_share_a_schema(pipeline):
    _, first, _ = pipeline
    mc = json.loads(first["detect_mcdense.json"])
    dsg = json.loads(first["detect_dsg.json"])
    assert keys(mc) == keys(dsg)
    assert mc["algorithm"] == "mcdense" and dsg["algorithm"] == "dsg"


def test_benchmark_report_parses(pipeline):
    _, first, _ = pipeline
    report = json.loads(first["benchmark.json"])
    assert set(report["detection"]) == {"mcdense", "dsg"}
    assert report["attribution"]["instance_loo"]["topk_accuracy"]["top1"] is not None


def test_deanonymize_recovers_planted_workers(pipeline):
    out, first, _ = pipeline
    report = json.loads(first["deanonymize.json"])
    gt = {}
    for line in (out / "groundtruth.jsonl").read_text().splitlines():
        rec = json.loads(line)
        gt[rec["product_id"]] = set(rec["workers"])
    hits = [bool(gt[p["product_id"]] & set(p["workers"])) for p in report["products"] if gt[p["product_id"]]]
    assert sum(hits) >= 0.9 * len(hits)


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"]


def test_usage_errors_exit_1(capsys, tmp_path):
    assert cli.main(["no-such-command"]) == 1
    assert error_of(capsys)["type"] == "usage"
    assert cli.main(["ingest", "--set", "bogus.key=1", "--out", str(tmp_path)]) == 1
    assert "bogus.key" in error_of(capsys)["message"]
    assert cli.main(["ingest", "--out", str(tmp_path)]) == 1
    assert "paths.corpus" in error_of(capsys)["message"]


def test_data_errors_exit_2(capsys, tmp_path):
    assert cli.main(["ingest", "--corpus", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text(
        '{"review_id": "r1", "account_id": "a", "product_id": "P", "text": "x", "rating": 5, "timestamp": 1}\n'
        '{"review_id": "r2", "account_id": "b", "product_id": "P", "text": "x", "rating": 7, "timestamp": 2}\n'
    )
    assert cli.main(["ingest", "--corpus", str(bad), "--out", str(tmp_path)]) == 2
    err = error_of(capsys)
    assert err["type"] == "data" and "2" in err["message"]


def test_internal_errors_exit_3(capsys, tmp_path, monkeypatch):
    def boom(run):
        raise RuntimeError("unexpected")

    monkeypatch.setitem(cli.COMMANDS, "ingest", (boom, "x"))
    assert cli.main(["ingest", "--out", str(tmp_path)]) == 3
    assert error_of(capsys)["type"] == "internal"


def test_config_file_from_environment(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "rf.conf"
    cfg.write_text("# small scenario\nsynth.n_workers = 2\nsynth.n_products = 3\n")
    monkeypatch.setenv("RANKFRAUD_CONFIG", str(cfg))
    assert cli.main(["synth", "--out", str(tmp_path / "o")]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    manifest = json.loads((tmp_path / "o" / "synth.manifest.json").read_text())
    assert manifest["config"]["synth.n_workers"] == 2
    assert summary["config_hash"] == manifest["config_hash"]
