import csv
import json

import pytest

from syndial.cli import main

MOCK_SCRIPT = "mts20_script.json"


@pytest.fixture
def paths(fixtures_dir, tmp_path):
    return {"corpus": str(fixtures_dir / "mts20.csv"), "script": str(fixtures_dir / MOCK_SCRIPT), "out": tmp_path}


def _mock(paths):
    return ["--backend", "mock", "--mock-script", paths["script"]]


def _generate(paths, *extra):
    return main(["generate", "--input", paths["corpus"], "--output", str(paths["out"] / "t.jsonl"), *_mock(paths), *extra])


def test_generate_evaluate_report_with_figures(paths):
    out = paths["out"]
    assert _generate(paths, "--ledger", str(out / "ledger.jsonl")) == 0
    assert main(["evaluate", "--corpus", paths["corpus"], "--traces", str(out / "t.jsonl"),
                 "--report", str(out / "report.csv"), "--json", str(out / "report.json"), *_mock(paths)]) == 0
    assert main(["report", "--traces", str(out / "t.jsonl"), "--kind", "iterations", "--out", str(out / "it.csv")]) == 0
    assert main(["report", "--traces", str(out / "t.jsonl"), "--kind", "cost",
                 "--ledger", str(out / "ledger.jsonl"), "--out", str(out / "cost.csv")]) == 0
    for name in ("report", "it", "cost"):
        assert (out / f"{name}.csv").exists()
        assert (out / f"{name}.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert json.loads((out / "report.json").read_text())["skipped_factuality"] == 1
    cost = list(csv.DictReader(open(out / "cost.csv")))
    assert cost[0]["system"] == "SynDial" and int(cost[0]["max_calls_per_note"]) <= 3


def test_no_figures_flag(paths):
    out = paths["out"]
    assert _generate(paths) == 0
    assert main(["report", "--traces", str(out / "t.jsonl"), "--out", str(out / "it.csv"), "--no-figures"]) == 0
    assert not (out / "it.png").exists()


def test_robustness_and_sweep(paths):
    out = paths["out"]
    assert main(["robustness", "--input", paths["corpus"], "--runs", "2", "--out", str(out / "rob.csv"), *_mock(paths)]) == 0
    assert main(["sweep", "--input", paths["corpus"], "--alphas", "0,0.5,1", "--out", str(out / "sw.csv"), *_mock(paths)]) == 0
    assert [r["alpha"] for r in csv.DictReader(open(out / "sw.csv"))] == ["0.000000", "0.500000", "1.000000"]
    assert (out / "rob.png").exists() and (out / "sw.png").exists()


def test_usage_errors_exit_1(paths, capsys):
    assert main([]) == 1
    assert main(["generate", "--bogus"]) == 1
    assert main(["generate", "--input", paths["corpus"]]) == 1  # no --output
    assert main(["generate", "--input", paths["corpus"], "--output", "x", "--backend", "mock"]) == 1
    assert _generate(paths, "--threshold", "1.5") == 1
    assert main(["sweep", "--input", paths["corpus"], "--alphas", "a,b", *_mock(paths)]) == 1


def test_backend_failure_exits_2(paths, tmp_path, monkeypatch):
    script = tmp_path / "empty.json"
    script.write_text("[]")
    code = main(["generate", "--input", paths["corpus"], "--output", str(tmp_path / "t.jsonl"),
                 "--backend", "mock", "--mock-script", str(script)])
    assert code == 2
    # a missing API key is an auth failure
    monkeypatch.delenv("SYNDIAL_API_KEY", raising=False)
    code = main(["generate", "--input", paths["corpus"], "--output", str(tmp_path / "t2.jsonl"),
                 "--base-url", "http://127.0.0.1:9", "--max-retries", "0"])
    assert code == 2


def test_data_errors_exit_3(paths, tmp_path):
    assert _generate(dict(paths, corpus=str(tmp_path / "missing.csv"))) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("ID,text\n1,hello\n")
    assert _generate(dict(paths, corpus=str(bad))) == 3
    dup = tmp_path / "dup.csv"
    dup.write_text("ID,section_text\n1,a\n1,b\n")
    assert _generate(dict(paths, corpus=str(dup))) == 3
    norefs = tmp_path / "norefs.csv"
    norefs.write_text("ID,section_text\n1,a\n")
    assert _generate(dict(paths, corpus=str(norefs)), "--alpha", "0.3") == 3


def test_config_file_sets_defaults_and_flags_win(paths, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(f"input: {paths['corpus']}\nbackend: mock\nmock-script: {paths['script']}\nthreshold: 1.0\n")
    out = tmp_path / "t.jsonl"
    assert main(["generate", "--config", str(cfg), "--output", str(out)]) == 0
    traces = [json.loads(line) for line in open(out)]
    assert all(t["generate_calls"] == 3 for t in traces)

    assert main(["generate", "--config", str(cfg), "--output", str(out), "--threshold", "0"]) == 0
    assert all(json.loads(line)["generate_calls"] == 1 for line in open(out))

    cfg_json = tmp_path / "cfg.json"
    cfg_json.write_text(json.dumps({"input": paths["corpus"], "backend": "mock", "mock_script": paths["script"]}))
    assert main(["generate", "--config", str(cfg_json), "--output", str(out)]) == 0
    (tmp_path / "broken.json").write_text("{")
    assert main(["generate", "--config", str(tmp_path / "broken.json")]) == 1
