import json
import subprocess
import sys

import pytest

from permlab.cli import build_parser, main

from conftest import CORPUS, SCENARIOS, corpus_dirs


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_registry_show(capsys):
    d = run_json(capsys, "registry", "show", "nfc")
    assert (d["web_api"], d["prompted"]) == ("Web NFC API", "yes")


def test_registry_list_category(capsys):
    rows = run_json(capsys, "registry", "list", "--category", "sensor")
    assert len(rows) == 4
    assert len(run_json(capsys, "registry", "list")) == 33


@pytest.mark.parametrize("argv", [
    ["registry", "show", "nope"],
    ["registry", "list", "--category", "gadgets"],
    ["matrix", "diff", "x", "y"],
    ["matrix", "show", "--target", "android-netscape"],
    ["fingerprint", "plan", "--targets", "android", "--max", "0"],
    ["fingerprint", "plan", "--targets", "android-netscape"],
    ["simulate", "--scenario", "no-such-scenario.json"],
    ["scan"],
    ["frobnicate"],
    ["--concurrency", "0", "registry", "list"],
])
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err


def test_matrix_show(capsys):
    d = run_json(capsys, "matrix", "show", "--target", "android-brave")
    assert len(d["cells"]) == 33
    assert d["cells"]["accelerometer"] == "d"


def test_matrix_diff(capsys):
    d = run_json(capsys, "matrix", "diff", "desktop-chrome", "desktop-edge")
    assert {"descriptor": "midi", "a": "g", "b": "p"} in d["differences"]


def test_table_format(capsys):
    code, out, _ = run(capsys, "--format", "table", "matrix", "show", "--target", "android-brave")
    assert code == 0
    assert any(line.split() == ["accelerometer", "d"] for line in out.splitlines())


def test_fingerprint_classify(capsys, tmp_path):
    obs = tmp_path / "obs.json"
    obs.write_text(json.dumps({"context": "tab", "states": {"accelerometer": "denied"}}))
    d = run_json(capsys, "fingerprint", "classify", "--observation", str(obs))
    assert d["exact"] == ["android-brave"]
    assert len(d["ranked"]) == 9


@pytest.mark.parametrize("text", ["{", '{"states": {"nfc": "sometimes"}}', '{"states": {"warp-drive": "denied"}}'])
def test_fingerprint_classify_malformed(capsys, tmp_path, text):
    obs = tmp_path / "obs.json"
    obs.write_text(text)
    assert run(capsys, "fingerprint", "classify", "--observation", str(obs))[0] == 2


def test_fingerprint_classify_missing_file(capsys, tmp_path):
    assert run(capsys, "fingerprint", "classify", "--observation", str(tmp_path / "none.json"))[0] == 2


def test_fingerprint_plan(capsys):
    d = run_json(capsys, "fingerprint", "plan", "--targets", "android", "--max", "4")
    assert d["verified"] is True
    assert 1 <= len(d["probes"]) <= 4
    assert d["residual_groups"] == []


def test_fingerprint_plan_tab_is_not_verified(capsys):
    d = run_json(capsys, "fingerprint", "plan", "--targets", "android", "--context", "tab")
    assert d["verified"] is False
    assert ["android-chrome", "android-edge"] in d["residual_groups"]


def test_fingerprint_plan_explicit_ids(capsys):
    d = run_json(capsys, "fingerprint", "plan", "--targets", "desktop-chrome,desktop-edge")
    assert d["probes"] == ["midi"] and d["verified"]


def test_simulate_leakage_origin(capsys):
    d = run_json(capsys, "simulate", "--scenario", str(SCENARIOS / "leakage_origin.json"))
    assert d["passed"]
    last = d["events"][-2]
    assert (last["actor"], last["outcome"], last["inherited"]) == ("pwa2", "granted", True)


def test_simulate_bundled_name(capsys):
    d = run_json(capsys, "simulate", "--scenario", "leakage_perapp.json")
    assert d["passed"]
    assert [e["outcome"] for e in d["events"] if e["actor"] == "pwa2"][-1] == "prompt"


def test_simulate_failing_expectation(capsys, tmp_path):
    sc = tmp_path / "s.json"
    sc.write_text(json.dumps({
        "config": {"target": "android-chrome"},
        "actors": [{"label": "a", "origin": "https://o.example"}],
        "events": [{"actor": "a", "kind": "query", "descriptor": "camera", "expect": "granted"}],
    }))
    code, out, err = run(capsys, "simulate", "--scenario", str(sc))
    assert code == 1
    assert json.loads(out)["failures"] == [0]
    assert "[0]" in err


def test_simulate_invalid_scenario(capsys, tmp_path):
    sc = tmp_path / "s.json"
    sc.write_text(json.dumps({"config": {"target": "android-netscape"}}))
    assert run(capsys, "simulate", "--scenario", str(sc))[0] == 2


def test_scan_fixture_corpus(capsys, tmp_path, expected_corpus):
    out = tmp_path / "report.json"
    argv = ["scan", "--out", str(out)]
    for d in corpus_dirs():
        argv += ["--fixture-dir", str(d)]
    code, stdout, _ = run(capsys, *argv)
    assert code == 0 and stdout == ""
    report = json.loads(out.read_text())
    assert set(report) == {"origin_reports", "aggregate"}
    agg = report["aggregate"]
    assert [[r["descriptor"], r["count"]] for r in agg["descriptor_ranking"]] == expected_corpus["aggregate"]["descriptor_ranking"]
    for rep in report["origin_reports"]:
        assert set(rep) >= {"origin", "apps", "multi_pwa", "usages", "shared_risk_descriptors"}


def test_scan_deterministic(capsys):
    argv = ["scan"] + [a for d in corpus_dirs() for a in ("--fixture-dir", str(d))]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_scan_unreachable_is_partial(capsys):
    code, out, err = run(
        capsys, "--timeout-secs", "2", "scan", "--url", "http://127.0.0.1:9/",
        "--fixture-dir", str(CORPUS / "b1-shop"),
    )
    assert code == 1
    report = json.loads(out)
    failures = [f for r in report["origin_reports"] for f in r["failures"]]
    assert failures and failures[0]["kind"] == "unreachable"
    assert "partial" in err


def test_scan_bad_fixture(capsys, tmp_path):
    assert run(capsys, "scan", "--fixture-dir", str(tmp_path))[0] == 2


def test_bad_registry_override(capsys, tmp_path):
    bad = tmp_path / "r.json"
    bad.write_text(json.dumps({"descriptors": []}))
    assert run(capsys, "--registry", str(bad), "registry", "list")[0] == 2
    assert run(capsys, "--matrix", str(tmp_path / "missing.json"), "matrix", "show", "--target", "x")[0] == 2


def test_data_dir_env_override(capsys, tmp_path, monkeypatch, registry_doc):
    doc = json.loads(json.dumps(registry_doc))
    for d in doc["descriptors"]:
        if d["name"] == "nfc":
            d["web_api"] = "Overridden NFC"
    (tmp_path / "registry.json").write_text(json.dumps(doc))
    monkeypatch.setenv("PERMLAB_DATA_DIR", str(tmp_path))
    assert run_json(capsys, "registry", "show", "nfc")["web_api"] == "Overridden NFC"


def test_help_exits_zero(capsys):
    assert run(capsys, "--help")[0] == 0


def test_parser_dispatch():
    args = build_parser().parse_args(["registry", "show", "nfc"])
    assert callable(args.func)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "permlab", "registry", "show", "camera"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["name"] == "camera"
