import json
import os

import pytest

from main import EXIT_FAILED, EXIT_INVALID, EXIT_OK, main
from test_cases.conftest import fixture_path
from utils.logger_config import DelayShareLogger


def test_validate_ok(capsys):
    assert main(["validate", fixture_path("example2.json")]) == EXIT_OK
    assert "valid, n=5, immediate precedences=4" in capsys.readouterr().out


def test_validate_cycle(tmp_path, capsys):
    doc = json.loads(open(fixture_path("example2.json")).read())
    doc["activities"][0]["predecessors"] = ["5"]
    path = tmp_path / "cycle.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", str(path)]) == EXIT_INVALID
    assert "invalid" in capsys.readouterr().out


def test_unparsable_file_is_invalid(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{")
    assert main(["validate", str(path)]) == EXIT_INVALID
    assert main(["allocate", str(path)]) == EXIT_INVALID


def test_duration(capsys):
    assert main(["duration", fixture_path("example2.json")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "makespan: 7.00000   delay cost: 0.50000" in out
    assert "makespan: 6.00000   delay cost: 0.00000" in out


def test_allocate_det(capsys, tmp_path):
    out_path = tmp_path / "sh.json"
    assert main(["allocate", fixture_path("example2.json"), "--rule", "det",
                 "--out", str(out_path)]) == EXIT_OK
    assert "0.27083" in capsys.readouterr().out
    payload = json.loads(out_path.read_text())
    assert [row["activity"] for row in payload["activities"]] == ["1", "2", "3", "4", "5"]
    assert payload["total"] == pytest.approx(0.5)
    assert payload["meta"]["rule"] == "det"


def test_allocate_stoch_csv(tmp_path):
    out_path = tmp_path / "ssh.csv"
    code = main(["allocate", fixture_path("example1.json"), "--m", "200", "--m1", "200",
                 "--seed", "4", "--survey", "50", "--out", str(out_path)])
    assert code == EXIT_OK
    lines = out_path.read_text().splitlines()
    assert lines[0] == "activity,payment,std_error,rel_err_pct"
    assert len(lines) == 3


def test_allocation_output_does_not_depend_on_workers(tmp_path):
    outputs = []
    for workers in ("1", "3"):
        out_path = tmp_path / f"alloc_{workers}.json"
        code = main(["allocate", fixture_path("example2.json"), "--m", "600", "--m1", "200",
                     "--seed", "9", "--workers", workers, "--out", str(out_path)])
        assert code == EXIT_OK
        outputs.append(out_path.read_bytes())
    assert outputs[0] == outputs[1]


def test_seed_from_environment(tmp_path, monkeypatch):
    outputs = []
    for how in ("flag", "env"):
        out_path = tmp_path / f"{how}.json"
        args = ["allocate", fixture_path("example1.json"), "--m", "100", "--m1", "100",
                "--out", str(out_path)]
        if how == "flag":
            args += ["--seed", "21"]
        else:
            monkeypatch.setenv("DELAYSHARE_SEED", "21")
        assert main(args) == EXIT_OK
        outputs.append(out_path.read_bytes())
    assert outputs[0] == outputs[1]


def test_invalid_arguments():
    assert main(["allocate", fixture_path("example1.json"), "--m", "0"]) == EXIT_INVALID
    assert main(["allocate", fixture_path("example1.json"), "--workers", "-2"]) == EXIT_INVALID


def test_experiment(tmp_path, capsys):
    outdir = tmp_path / "study"
    code = main(["experiment", fixture_path("example2.json"), "--runs", "6", "--m", "40",
                 "--m1", "60", "--seed", "3", "--outdir", str(outdir)])
    assert code == EXIT_OK
    assert "mean SSh:" in capsys.readouterr().out
    for name in ("run_info.json", "study_summary.json", "summary.csv", "sign_table.csv",
                 "density_grid.csv", "density_samples.csv", "study_log.log"):
        assert os.path.exists(outdir / name), name
    summary = json.loads((outdir / "study_summary.json").read_text())
    assert summary["runs"] == 6
    assert summary["max_efficiency_gap"] < 1e-9
    assert DelayShareLogger.get_log_file() == os.path.join(str(outdir), "study_log.log")
    assert "CONDITIONAL STUDY STARTED" in (outdir / "study_log.log").read_text()


def test_experiment_impossible_delay(tmp_path):
    code = main(["experiment", fixture_path("example1.json"), "--delta", "50", "--runs", "2",
                 "--outdir", str(tmp_path / "never")])
    assert code == EXIT_FAILED


def test_duration_example1(capsys):
    assert main(["duration", fixture_path("example1.json")]) == EXIT_OK
    assert "makespan: 7.00000   delay cost: 1.00000" in capsys.readouterr().out
    assert main(["duration", fixture_path("example1.json"), "--delta", "9"]) == EXIT_OK
    assert "delay cost: 0.00000" in capsys.readouterr().out


def test_allocate_stoch_example1(tmp_path):
    out_path = tmp_path / "ssh.json"
    code = main(["allocate", fixture_path("example1.json"), "--m", "4000", "--m1", "4000",
                 "--seed", "12", "--out", str(out_path)])
    assert code == EXIT_OK
    payload = json.loads(out_path.read_text())
    payments = [row["payment"] for row in payload["activities"]]
    assert payments == pytest.approx([0.31666, 0.68333], abs=0.05)
    assert payload["meta"]["method"] == "sampled"


def test_experiment_single_run(tmp_path):
    outdir = tmp_path / "one"
    code = main(["experiment", fixture_path("example1.json"), "--runs", "1", "--m", "20",
                 "--m1", "30", "--outdir", str(outdir)])
    assert code == EXIT_OK
    summary = json.loads((outdir / "study_summary.json").read_text())
    assert summary["runs"] == 1
    assert sum(summary["mean_alloc"].values()) == pytest.approx(summary["mean_cost"])
