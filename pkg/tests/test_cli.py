import json
import subprocess
import sys

import pytest

from ddcocycle import cli
from ddcocycle import signs as S

FAST = ["--suite", "su2-cocycle", "--suite", "behrend-xu"]


def run(tmp_path, *args, name="out.json"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def test_default_config_passes(tmp_path):
    code, out = run(tmp_path, "--suite", "su2-cocycle")
    assert code == cli.EXIT_PASS
    report = json.loads(out.read_text())
    assert report["pass"] is True
    assert report["schema"] == "1"
    assert [s["name"] for s in report["suites"]] == ["su2-cocycle"]


def test_report_layout(tmp_path):
    _, out = run(tmp_path, *FAST)
    report = json.loads(out.read_text())
    assert set(report) == {"schema", "global", "config", "frozen_signs", "suites", "pass"}
    assert report["global"]["wall_time"] is None
    assert set(report["global"]["versions"]) >= {"ddcocycle", "numpy", "scipy"}
    assert report["config"]["seed"] == 0 and report["config"]["samples"] == 200
    for key, entry in report["frozen_signs"].items():
        assert entry["value"] == S.FROZEN[key] and entry["provenance"]
    for suite in report["suites"]:
        for row in suite["entries"]:
            assert row["anchor"]
            assert {"identity", "probes", "max_residual", "tolerance", "signs", "pass"} <= set(row)
    su2 = report["suites"][0]
    assert su2["signs"]["chern d'/d'' relative sign"]["frozen"] == S.CHERN
    assert su2["controls"] and all(c["rejected"] for c in su2["controls"])


def test_tight_tolerance_fails_with_residuals(tmp_path):
    code, out = run(tmp_path, "--suite", "su2-cocycle", "--tol-fd", "1e-15")
    assert code == cli.EXIT_FAIL
    report = json.loads(out.read_text())
    rows = report["suites"][0]["entries"]
    assert any(not r["pass"] and r["max_residual"] > 1e-15 for r in rows)


def test_same_seed_gives_identical_bytes(tmp_path):
    _, a = run(tmp_path, *FAST, "--seed", "3", name="a.json")
    _, b = run(tmp_path, *FAST, "--seed", "3", name="b.json")
    assert a.read_bytes() == b.read_bytes()
    _, c = run(tmp_path, *FAST, "--seed", "4", name="c.json")
    assert c.read_bytes() != a.read_bytes()


def test_markdown_report(tmp_path):
    code, out = run(tmp_path, "--suite", "behrend-xu", "--report", "md", name="r.md")
    text = out.read_text()
    assert code == 0
    assert text.startswith("# Verification report")
    assert "| identity | anchor |" in text
    assert "natural section reproduces the Behrend-Xu form" in text


@pytest.mark.parametrize("args", [["--samples", "0"], ["--fd-step", "-1"], ["--tol-fd", "0"]])
def test_bad_values_are_config_errors(args, capsys):
    assert cli.main(["--suite", "su2-cocycle", *args]) == cli.EXIT_CONFIG
    assert "verify:" in capsys.readouterr().err


def test_unknown_suite_is_rejected_by_the_parser():
    with pytest.raises(SystemExit) as exc:
        cli.main(["--suite", "nonsense"])
    assert exc.value.code == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "verify.ini"
    cfg.write_text("[verify]\nseed = 5\nsamples = 40\nsuites = su2-cocycle behrend-xu\nreport = md\n")
    config = cli.make_config(["--config", str(cfg), "--samples", "30"])
    assert config.seed == 5
    assert config.samples == 30
    assert config.suites == ("su2-cocycle", "behrend-xu")
    assert config.report == "md"


@pytest.mark.parametrize("text", ["[other]\nseed = 1\n", "[verify]\ncolour = blue\n", "[verify]\nseed = x\n",
                                  "not an ini file"])
def test_broken_config_files(tmp_path, text):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(text)
    assert cli.main(["--config", str(cfg)]) == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert cli.main(["--config", str(tmp_path / "absent.ini")]) == cli.EXIT_CONFIG


def test_sign_disagreement_exit_code(tmp_path, monkeypatch):
    monkeypatch.setitem(S.FROZEN, "chern d'/d'' relative sign", -S.CHERN)
    code, out = run(tmp_path, "--suite", "su2-cocycle")
    assert code == cli.EXIT_SIGN
    report = json.loads(out.read_text())
    assert "sign probe" in report["suites"][0]["error"]


def test_timing_is_opt_in(tmp_path):
    _, out = run(tmp_path, "--suite", "behrend-xu", "--timing")
    assert json.loads(out.read_text())["global"]["wall_time"] >= 0


def test_stdout_report(capsys):
    assert cli.main(["--suite", "behrend-xu", "--samples", "20"]) == 0
    assert json.loads(capsys.readouterr().out)["pass"] is True


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ddcocycle", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "--suite" in proc.stdout
