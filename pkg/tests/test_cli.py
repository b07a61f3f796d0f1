import json
import os
import subprocess
import sys

import pytest

from pedeval.cli import main


def read_out(config_path, name):
    with open(config_path) as f:
        out_dir = json.load(f)["output_dir"]
    with open(os.path.join(out_dir, name), "rb") as f:
        return f.read()


class TestEvaluate:
    def test_writes_all_artifacts(self, demo_config, capsys):
        config = demo_config()
        assert main(["evaluate", "--config", config]) == 0
        out_dir = json.loads(open(config).read())["output_dir"]
        names = sorted(os.listdir(out_dir))
        assert names == ["curve_fppi.csv", "curve_gdpi.csv",
                         "fp_categories.json", "gt_categories.json",
                         "report.json"]
        captured = capsys.readouterr()
        assert "operating point" in captured.out

    def test_runs_are_byte_identical(self, demo_config):
        config = demo_config()
        assert main(["evaluate", "--config", config]) == 0
        first = {n: read_out(config, n) for n in
                 ("report.json", "curve_fppi.csv", "curve_gdpi.csv",
                  "gt_categories.json", "fp_categories.json")}
        assert main(["evaluate", "--config", config]) == 0
        second = {n: read_out(config, n) for n in first}
        assert first == second

    def test_scalar_metric_matches_report(self, demo_config, capsys):
        config = demo_config()
        assert main(["evaluate", "--config", config,
                     "--metric", "flamr_ghost", "--category", "B"]) == 0
        printed = capsys.readouterr().out.strip()
        report = json.loads(read_out(config, "report.json"))
        assert printed == repr(report["metrics"]["flamr_ghost"]["B"])

    def test_missing_mask_exits_1_and_names_frame(self, demo_config, tmp_path,
                                                  capsys):
        empty = tmp_path / "no_masks"
        empty.mkdir()
        config = demo_config(mask_dir=str(empty))
        assert main(["evaluate", "--config", config]) == 1
        assert "scene_000100" in capsys.readouterr().err

    def test_missing_config_file_exits_2(self, capsys):
        assert main(["evaluate", "--config", "/nope/run.json"]) == 2

    def test_invalid_config_value_exits_2(self, demo_config, capsys):
        config = demo_config(metrics={"c_min": 2.0})
        assert main(["evaluate", "--config", config]) == 2

    def test_corrupt_detections_exit_1(self, demo_config, tmp_path, capsys):
        bad = tmp_path / "d.json"
        bad.write_text('[{"frame_id": "scene_000100", "detections": '
                       '[{"x1": 0, "y1": 0, "x2": 5, "y2": 5, "score": 0}]}]')
        config = demo_config(detections=str(bad))
        assert main(["evaluate", "--config", config]) == 1


class TestCategorize:
    def test_prints_cardinality_table(self, demo_config, capsys):
        config = demo_config()
        assert main(["categorize", "--config", config]) == 0
        out = capsys.readouterr().out
        for key in ("F", "B", "E", "C", "A", "ignored", "residual_candidates"):
            assert key in out
        out_dir = json.loads(open(config).read())["output_dir"]
        assert os.listdir(out_dir) == ["gt_categories.json"]

    def test_empty_dataset_gives_zero_table(self, tmp_path, capsys):
        (tmp_path / "gt.json").write_text("[]")
        (tmp_path / "d.json").write_text("[]")
        masks = tmp_path / "masks"
        masks.mkdir()
        config = tmp_path / "c.json"
        config.write_text(json.dumps({
            "ground_truth": str(tmp_path / "gt.json"),
            "detections": str(tmp_path / "d.json"),
            "mask_dir": str(masks),
            "output_dir": str(tmp_path / "out"),
        }))
        assert main(["categorize", "--config", str(config)]) == 0
        doc = json.loads((tmp_path / "out" / "gt_categories.json").read_text())
        assert all(v == 0 for v in doc["cardinalities"].values())


class TestValidate:
    def test_clean_fixture(self, demo_config, capsys):
        assert main(["validate", "--config", demo_config()]) == 0
        assert "ok" in capsys.readouterr().out

    def test_dimension_mismatch_reported(self, demo_config, demo_fixture,
                                         tmp_path, capsys):
        import numpy as np
        from pedeval.ingestion import write_pgm

        broken = tmp_path / "masks"
        broken.mkdir()
        for name in os.listdir(demo_fixture["mask_dir"]):
            src = os.path.join(demo_fixture["mask_dir"], name)
            dst = str(broken / name)
            with open(src, "rb") as f:
                data = f.read()
            with open(dst, "wb") as f:
                f.write(data)
        write_pgm(str(broken / "scene_000100_instance.pgm"),
                  np.zeros((8, 8), dtype=int))
        config = demo_config(mask_dir=str(broken))
        assert main(["validate", "--config", config]) == 1
        assert "error" in capsys.readouterr().out


class TestFixtureCommand:
    def test_writes_runnable_dataset(self, tmp_path, capsys):
        out = tmp_path / "demo"
        assert main(["fixture", "--out", str(out), "--frames", "3",
                     "--seed", "11"]) == 0
        assert main(["evaluate", "--config", str(out / "config.json")]) == 0


class TestConsoleScript:
    def test_entry_point_help(self):
        result = subprocess.run(
            [sys.executable, "-m", "pedeval.cli", "--help"],
            capture_output=True, text=True)
        assert result.returncode == 0
        assert "evaluate" in result.stdout


@pytest.fixture(scope="module")
def live_server():
    import socket
    import threading
    import time

    import uvicorn

    from pedeval.service import app

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


class TestRemoteClient:
    def test_remote_run_matches_local_run(self, demo_config, live_server):
        local_cfg = demo_config()
        assert main(["evaluate", "--config", local_cfg]) == 0
        local = read_out(local_cfg, "report.json")

        remote_cfg = demo_config()
        doc = json.loads(open(remote_cfg).read())
        doc["output_dir"] = doc["output_dir"] + "_remote"
        open(remote_cfg, "w").write(json.dumps(doc))
        assert main(["evaluate", "--config", remote_cfg,
                     "--server", live_server]) == 0
        remote = read_out(remote_cfg, "report.json")
        assert local == remote

    def test_remote_config_error_maps_to_exit_2(self, demo_config,
                                                live_server, capsys):
        config = demo_config(ground_truth="/missing/gt.json")
        assert main(["evaluate", "--config", config,
                     "--server", live_server]) == 2


@pytest.fixture(autouse=True)
def _isolate_server_env(monkeypatch):
    monkeypatch.delenv("PEDEVAL_SERVER", raising=False)
