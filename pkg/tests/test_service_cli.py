import csv
import json
import threading
import warnings

import pytest
import yaml

with warnings.catch_warnings():
    warnings.simplefilter("ignore")  # test client import warns about its httpx backend
    from fastapi.testclient import TestClient

from filelock import FileLock

from hullopt import cli, service
from hullopt.pipeline import open_run

from conftest import tiny_config_dict


@pytest.fixture
def client():
    return TestClient(service.app, raise_server_exceptions=False)


def call(capsys, *argv):
    """Run the CLI with --json and return (exit code, parsed stdout or None)."""
    code = cli.dispatch([*argv, "--json"])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


# -- service --------------------------------------------------------------------------------


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200 and r.json()["status"] == "ok"


def test_missing_run_dir_is_client_error(client, tmp_path):
    r = client.post("/runs/fit", json={"run_dir": str(tmp_path / "nope")})
    assert r.status_code == 400 and r.json()["error"] == "ConfigError"


def test_schema_validation(client, tmp_path):
    r = client.post("/runs/sample", json={"run_dir": str(tmp_path), "count": 0})
    assert r.status_code == 422


def test_busy_run_dir(client, tmp_path, tiny_config_file):
    root = tmp_path / "r"
    assert client.post("/runs/init", json={"run_dir": str(root), "config_path": str(tiny_config_file)}).status_code == 200
    held = threading.Event()
    release = threading.Event()

    def hold():
        with FileLock(str(root / ".lock")):
            held.set()
            release.wait(10)

    t = threading.Thread(target=hold)
    t.start()
    held.wait(10)
    try:
        r = client.post("/runs/sample", json={"run_dir": str(root)})
        assert r.status_code == 409 and r.json()["error"] == "RunBusy"
    finally:
        release.set()
        t.join()


def test_nonfinite_values_serialised():
    import numpy as np
    out = service.jsonable({"a": np.float64("inf"), "b": np.arange(2), "c": np.bool_(True)})
    assert out == {"a": "inf", "b": [0, 1], "c": True}


# -- CLI exit codes ----------------------------------------------------------------------------


def test_init_creates_config_copy(tmp_path, tiny_config_file, capsys):
    root = tmp_path / "r"
    code, out = call(capsys, "init", str(root), "--config", str(tiny_config_file))
    assert code == 0 and out["result"]["n_params"] == 5
    saved = yaml.safe_load((root / "config.yaml").read_text())
    assert saved["pipeline"]["initial_samples"] == 8
    assert (root / "manifest.json").exists()
    # a second init without --overwrite is refused
    assert cli.dispatch(["init", str(root), "--config", str(tiny_config_file)]) == 1
    assert cli.dispatch(["init", str(root), "--config", str(tiny_config_file), "--overwrite"]) == 0


def test_usage_errors_exit_one(tmp_path, capsys):
    assert cli.dispatch(["bogus", str(tmp_path)]) == 1
    assert cli.dispatch(["fit", str(tmp_path), "--unknown-flag"]) == 1
    assert cli.dispatch(["crossval", str(tmp_path), "--ranks", "4,x"]) == 1
    assert cli.dispatch([]) == 1
    assert "usage" in capsys.readouterr().err


def test_domain_error_exits_one(tmp_path, capsys):
    assert cli.dispatch(["fit", str(tmp_path / "missing")]) == 1
    assert "ConfigError" in capsys.readouterr().err


def test_internal_error_exits_two(tmp_path, tiny_config_file, monkeypatch, capsys):
    root = tmp_path / "r"
    assert cli.dispatch(["init", str(root), "--config", str(tiny_config_file)]) == 0

    def boom(state, *a):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(service, "op_sample", boom)
    assert cli.dispatch(["sample", str(root)]) == 2
    assert "solver exploded" in capsys.readouterr().err


def test_unreachable_server_exits_two(tmp_path):
    assert cli.dispatch(["fit", str(tmp_path), "--server", "http://127.0.0.1:9"]) == 2


def test_overrides_reach_the_configuration(tmp_path, tiny_config_file, capsys):
    root = tmp_path / "r"
    call(capsys, "init", str(root), "--config", str(tiny_config_file))
    code, out = call(capsys, "run", str(root), "--max-steps", "1", "--seed", "7", "--max-iters", "3",
                     "--params-target", "8")
    assert code == 0
    cfg = open_run(root).config
    assert cfg.seed == 7 and cfg.bo.max_iters == 3 and cfg.reparam.schedule == [8]


# -- end-to-end through the CLI ------------------------------------------------------------


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    cfg = base / "tiny.yaml"
    cfg.write_text(yaml.safe_dump(tiny_config_dict(), sort_keys=False))
    root = base / "run"
    assert cli.dispatch(["run", str(root), "--config", str(cfg)]) == 0
    return root, cfg


def test_run_then_report_is_idempotent(cli_run):
    root, _ = cli_run
    rep = root / "reports"
    names = ("stage_table.csv", "hifi_history.csv", "singular_values.csv")
    first = {n: (rep / n).read_bytes() for n in names}
    assert cli.dispatch(["report", str(root)]) == 0
    assert cli.dispatch(["report", str(root)]) == 0
    assert {n: (rep / n).read_bytes() for n in names} == first
    with open(rep / "stage_table.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["stage"] == "initial" and rows[-1]["n_params"] == "7"


def test_crossval_command(cli_run, capsys):
    root, _ = cli_run
    code, out = call(capsys, "crossval", str(root), "--folds", "5", "--ranks", "4,6,8")
    assert code == 0
    with open(out["result"]["csv"]) as fh:
        rows = list(csv.DictReader(fh))
    assert {int(r["rank"]) for r in rows} == {4, 6, 8}
    assert {int(r["fold"]) for r in rows} == set(range(5))
    assert (root / "reports" / "crossval_summary.csv").exists()


def test_run_equals_scripted_stage_sequence(cli_run, tmp_path, capsys):
    root_ref, cfg = cli_run
    root = tmp_path / "manual"
    code, _ = call(capsys, "init", str(root), "--config", str(cfg))
    assert code == 0
    seq = ["sample", "solve", "fit"]
    for name in seq:
        code, _ = call(capsys, name, str(root))
        assert code == 0
    schedule = open_run(root).config.reparam.schedule
    for stage in range(len(schedule) + 1):
        code, out = call(capsys, "moo", str(root))
        assert code == 0
        if out["result"]["selected"]:
            call(capsys, "fit", str(root))
        for name in ("bo", "pds"):
            code, out = call(capsys, name, str(root))
            assert code == 0
            if out["result"]["validated"]:
                call(capsys, "fit", str(root))
        if stage < len(schedule):
            code, out = call(capsys, "reparam", str(root))
            assert code == 0 and out["result"]["applied"]
    manual = [e.key for e in open_run(root).visible_db()]
    ref = [e.key for e in open_run(root_ref).visible_db()]
    assert manual == ref
