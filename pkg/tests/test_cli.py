import json
import math
import shutil
import subprocess
import sys

import pytest

from mtl.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_gen_then_fit_and_train(tmp_path, capsys):
    data = tmp_path / "tree.csv"
    code, out, _ = run_cli(capsys, "gen", "tree", "--out", str(data), "--h", "2",
                           "--n-per-leaf", "40", "--k-vars", "2", "--p", "2", "--normalize")
    assert code == 0 and json.loads(out)["rows"] == 160
    assert data.exists() and (tmp_path / "tree.meta.json").exists()

    code, out, _ = run_cli(capsys, "fit", str(data), "--kernel", "relu_bias", "--ridge", "1e-6")
    res = json.loads(out)
    assert code == 0 and set(res) >= {"train_rmse", "test_rmse", "complexity"}
    assert res["train_rmse"] < res["test_rmse"] and not res["normalized_inputs"]

    net = tmp_path / "net.bin"
    code, out, _ = run_cli(capsys, "train", str(data), "--width", "64", "--epochs", "3",
                           "--save", str(net))
    assert code == 0 and json.loads(out)["epochs"] == 3
    assert net.read_bytes()[:4] == b"MTL1"


def test_fit_normalizes_raw_rows(tmp_path, capsys):
    data = tmp_path / "grav.csv"
    run_cli(capsys, "gen", "gravity", "--out", str(data), "--k", "2", "--n", "120")
    code, out, _ = run_cli(capsys, "fit", str(data))
    assert code == 0 and json.loads(out)["normalized_inputs"]


def test_gen_seed_flag_beats_env_and_config(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "n": 50, "d": 6, "s": 2}))
    paths = {}
    for name, extra, env in (("a", ["--seed", "4"], "9"), ("b", [], "4"), ("c", [], None)):
        if env is None:
            monkeypatch.delenv("MTL_SEED", raising=False)
        else:
            monkeypatch.setenv("MTL_SEED", env)
        paths[name] = tmp_path / f"{name}.csv"
        assert run_cli(capsys, "gen", "parity", "--config", str(cfg), "--out",
                       str(paths[name]), *extra)[0] == 0
    assert paths["a"].read_text() == paths["b"].read_text() != paths["c"].read_text()
    assert len(paths["c"].read_text().splitlines()) == 51


def test_bound_kinds(capsys):
    code, out, _ = run_cli(capsys, "bound", '{"kind": "univariate", "g": [0, 1]}',
                           "--eps", "0.1", "--delta", "0.36787944117144233")
    res = json.loads(out)
    assert code == 0 and res["sqrt_M"] == pytest.approx(1.0) and res["sample_complexity"] == 200
    code, out, _ = run_cli(capsys, "bound", '{"kind": "tree", "d": 4, "h": 2}')
    assert json.loads(out)["M"] == pytest.approx(32)
    code, out, _ = run_cli(capsys, "bound", '{"kind": "gravity", "k": 400, "R": 10, "eps": 0.01}')
    assert math.isfinite(json.loads(out)["log10_sqrt_M"])


def test_bound_errors_exit_two(capsys):
    code, _, err = run_cli(capsys, "bound", '{"kind": "nope"}')
    assert code == 2 and "unknown bound kind" in err
    code, _, err = run_cli(capsys, "bound", "{not json")
    assert code == 2


def test_program_subcommand(tmp_path, capsys):
    src = tmp_path / "p.sexp"
    src.write_text("(switch (dir 1 0) 0.0 0.2 (const 0) (const 1)) ; threshold on x1\n")
    code, out, _ = run_cli(capsys, "program", str(src), "--certify", "--lower",
                           "--eval", "0.6", "0.8")
    res = json.loads(out)
    assert code == 0 and res["value"] == 1.0
    assert abs(res["lowered_value"] - 1.0) <= 1e-2
    assert res["certificate"]["degree"] == res["lowered"]["degree"]
    code, out, _ = run_cli(capsys, "program", str(src), "--eval", "0.05", "0.99874921777")
    assert json.loads(out)["value"] is None


def test_program_syntax_error_reports_offset(tmp_path, capsys):
    src = tmp_path / "bad.sexp"
    src.write_text("(switch)")
    code, _, err = run_cli(capsys, "program", str(src))
    assert code == 2 and "offset 0" in err


def test_validate_quick(tmp_path, capsys):
    out = tmp_path / "v.json"
    code, _, _ = run_cli(capsys, "validate", "--quick", "--out", str(out))
    reports = json.loads(out.read_text())
    assert code == 0 and reports and all(r["passed"] for r in reports)


def test_exp_smoke_writes_outputs(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "exp", "complexity_probe", "--preset", "smoke",
                           "--out", str(tmp_path), "--set", "degrees=[1,2]", "--trials", "2")
    res = json.loads(out)
    assert code == 0 and res["completed"] and res["preset"] == "smoke"
    assert {a["x"] for a in res["aggregates"]} == {1, 2}
    for f in ("complexity_probe_report.json", "complexity_probe_trials.csv",
              "complexity_probe_plot_data.csv", "complexity_probe_sqrt_complexity.svg"):
        assert (tmp_path / f).exists()


def test_exp_config_file_and_bad_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "parity_control", "preset": "smoke", "trials": 1}))
    code, out, _ = run_cli(capsys, "exp", "--config", str(cfg), "--out", str(tmp_path),
                           "--no-figures")
    assert code == 0 and json.loads(out)["experiment"] == "parity_control"
    assert not list(tmp_path.glob("*.svg"))
    code, _, err = run_cli(capsys, "exp", "tree", "--preset", "smoke", "--set", "bogus=1")
    assert code == 2 and "bogus" in err


def test_exp_exit_code_reflects_failed_trials(tmp_path, capsys):
    # more WHERE columns than the table can filter on fails inside the trial
    code, out, _ = run_cli(capsys, "exp", "sql", "--preset", "smoke", "--out", str(tmp_path),
                           "--set", "widths=[20]", "--trials", "1", "--no-figures")
    assert code == 1 and json.loads(out)["failed_trials"]


@pytest.mark.skipif(shutil.which("mtl") is None, reason="console script not installed")
def test_console_script_entry_point():
    res = subprocess.run(["mtl", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("mtl ")
    res = subprocess.run([sys.executable, "-m", "mtl.cli", "bound", '{"kind": "tree", "d": 2, "h": 1}'],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["M"] == pytest.approx(2)
