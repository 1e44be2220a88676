import json
import logging
import math
import os

import numpy as np
import pytest

from fovtopp.cli import EXIT_INFEASIBLE, EXIT_INVALID, EXIT_IO, EXIT_OK, main
from fovtopp.utils.consts import LOG_ENV_VAR, PACKAGE_LOGGER, get_log_level
from fovtopp.utils.custom_logging.custom_logging_formatters import CustomJSONFormatter

from .fixture_setup import G, bang_bang_time, behind_document, fov_ahead_document, straight_line_document, write_document


def _close_package_handlers():
    package_logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(package_logger.handlers):
        handler.close()
        package_logger.removeHandler(handler)


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    _close_package_handlers()


def _run(capsys, *argv):
    status = main(list(argv))
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    return status, summary


@pytest.fixture
def line_input(tmp_path):
    return write_document(tmp_path, straight_line_document(c_total_max=3 * G, eta=6.0))


def test_solve_writes_artifacts(tmp_path, capsys, line_input):
    out = tmp_path / "out"
    status, summary = _run(capsys, "solve", "--input", line_input, "--out-dir", str(out), "--grid-n", "250")
    assert status == EXIT_OK
    assert summary["status"] == "ok"
    assert summary["settings"]["grid_n"] == 250
    assert summary["overrides"]["grid_n"] == 250
    assert summary["stage1_time"] == pytest.approx(bang_bang_time(10.0, 3 * G), rel=0.02)
    assert summary["total_time"] >= summary["stage1_time"] - 1e-9
    for name in ("trajectory.json", "profile_stage1.csv", "profile_stage2.csv", "report.json",
                 "speed_profile_plotdata.csv"):
        assert (out / name).exists()
    assert not (out / "trajectory.csv").exists()

    report = json.loads((out / "report.json").read_text())
    assert report["summary"]["violations"] == summary["violations"]
    profile = (out / "profile_stage1.csv").read_text().splitlines()
    assert profile[0] == "s,h,l"
    assert len(profile) == 252


def test_solve_writes_run_log(tmp_path, capsys, line_input):
    out = tmp_path / "out"
    _run(capsys, "solve", "--input", line_input, "--out-dir", str(out), "--grid-n", "100")
    _close_package_handlers()
    records = [json.loads(line) for line in (out / "logs" / "solve.jsonl").read_text().splitlines()]
    assert records
    assert {"level", "message", "timestamp", "logger"} <= set(records[0])
    assert any(r["message"].startswith("solved:") for r in records)


def test_both_formats_are_reproducible(tmp_path, capsys, line_input):
    texts = []
    for run in ("a", "b"):
        out = tmp_path / run
        status, _ = _run(capsys, "solve", "--input", line_input, "--out-dir", str(out), "--grid-n", "100",
                         "--format", "both")
        assert status == EXIT_OK
        assert (out / "trajectory.json").exists()
        texts.append((out / "trajectory.csv").read_bytes())
    assert texts[0] == texts[1]


def test_verify_round_trip(tmp_path, capsys, line_input):
    out = tmp_path / "out"
    _run(capsys, "solve", "--input", line_input, "--out-dir", str(out), "--grid-n", "100", "--format", "csv")
    checked = tmp_path / "checked"
    status, summary = _run(capsys, "verify", "--input", line_input, "--trajectory", str(out / "trajectory.csv"),
                           "--out-dir", str(checked), "--grid-n", "100")
    assert status == EXIT_OK
    assert summary["status"] == "ok"
    assert (checked / "report.json").exists()


def test_invalid_cone_half_angle(tmp_path, capsys):
    doc = straight_line_document(grid_n=50, attitude=[((0.0, 10.0), (0.0, 0.0, 1.0), 2.0)])
    status, summary = _run(capsys, "solve", "--input", write_document(tmp_path, doc), "--out-dir", str(tmp_path))
    assert status == EXIT_INVALID
    assert summary["status"] == "invalid"
    assert summary["field"] == "attitude[0].beta"
    assert summary["total_time"] is None


def test_missing_input_flag(tmp_path, capsys):
    status, summary = _run(capsys, "solve", "--out-dir", str(tmp_path))
    assert status == EXIT_INVALID
    assert summary["field"] == "input"


def test_landmark_behind_is_infeasible(tmp_path, capsys):
    status, summary = _run(capsys, "solve", "--input", write_document(tmp_path, behind_document(grid_n=50)),
                           "--out-dir", str(tmp_path))
    assert status == EXIT_INFEASIBLE
    assert summary["status"] == "infeasible"
    assert summary["stage"] == 1
    assert summary["phase"] == "backward"
    assert not (tmp_path / "trajectory.json").exists()


def test_unreadable_input(tmp_path, capsys):
    status, summary = _run(capsys, "solve", "--input", str(tmp_path / "missing.json"), "--out-dir", str(tmp_path))
    assert status == EXIT_IO
    assert summary["status"] == "io_error"


def test_oracle_dp(tmp_path, capsys):
    path = write_document(tmp_path, straight_line_document(grid_n=40))
    status, summary = _run(capsys, "oracle-dp", "--input", path, "--out-dir", str(tmp_path),
                           "--h-levels", "400", "--h-cap", "180")
    assert status == EXIT_OK
    assert summary["relative_gap"] < 0.05
    assert summary["total_time"] >= summary["stage1_time"] - 1e-9
    assert (tmp_path / "profile_dp.csv").exists()
    assert (tmp_path / "profile_stage1.csv").exists()


def test_oracle_probes(tmp_path, capsys):
    path = write_document(tmp_path, fov_ahead_document(grid_n=20))
    status, summary = _run(capsys, "oracle-probes", "--input", path, "--out-dir", str(tmp_path),
                           "--trials", "300", "--seed", "4")
    assert status == EXIT_OK
    assert summary["disagreements"] == 0
    probes = json.loads((tmp_path / "probes.json").read_text())
    assert probes["equivalence"]["trials"] == 300
    assert probes["convexity"]
    assert all(entry["convex"] in (True, None) for entry in probes["convexity"])


def test_oracle_probes_without_problem(tmp_path, capsys):
    status, summary = _run(capsys, "oracle-probes", "--out-dir", str(tmp_path), "--trials", "100")
    assert status == EXIT_OK
    assert summary["probes"]["convexity"] == []


@pytest.mark.parametrize("value, level", [(None, "INFO"), ("debug", "DEBUG"), ("ERROR", "ERROR"),
                                          ("chatty", "INFO")])
def test_log_level_from_environment(monkeypatch, value, level):
    if value is None:
        monkeypatch.delenv(LOG_ENV_VAR, raising=False)
    else:
        monkeypatch.setenv(LOG_ENV_VAR, value)
    assert get_log_level() == level


@pytest.mark.parametrize("level, shown", [("error", False), ("debug", True)])
def test_stderr_level_follows_environment(tmp_path, capsys, monkeypatch, line_input, level, shown):
    monkeypatch.setenv(LOG_ENV_VAR, level)
    assert main(["solve", "--input", line_input, "--out-dir", str(tmp_path), "--grid-n", "100"]) == EXIT_OK
    _close_package_handlers()
    assert ("solved:" in capsys.readouterr().err) == shown
    assert os.path.exists(tmp_path / "logs" / "solve.jsonl")
    assert math.isfinite(json.loads((tmp_path / "report.json").read_text())["summary"]["max_nonholonomy"])


def test_json_formatter_fields():
    record = logging.LogRecord("fovtopp.solver", logging.INFO, __file__, 12, "stage %d complete", (1,), None,
                               func="solve")
    record.grid_n = np.int64(50)
    doc = json.loads(CustomJSONFormatter().format(record))
    assert doc["level"] == "INFO"
    assert doc["message"] == "stage 1 complete"
    assert doc["logger"] == "fovtopp.solver"
    assert doc["function"] == "solve"
    assert doc["line"] == 12
    assert doc["grid_n"] == 50
    assert "msg" not in doc and "args" not in doc
