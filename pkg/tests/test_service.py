import json

import pytest
from fastapi.testclient import TestClient

from pedeval import __version__
from pedeval.config import load_config
from pedeval.service import app, clear_dataset_cache


@pytest.fixture
def client():
    clear_dataset_cache()
    return TestClient(app)


def request_body(config_path, **overrides):
    cfg = load_config(config_path).model_dump(mode="json")
    cfg.update(overrides)
    return {"config": cfg}


class TestHealth:
    def test_reports_version(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "version": __version__}


class TestEvaluate:
    def test_returns_all_artifacts(self, client, demo_fixture):
        resp = client.post("/evaluate", json=request_body(demo_fixture["config"]))
        assert resp.status_code == 200
        body = resp.json()
        assert body["ok"]
        assert set(body["artifacts"]) == {"report.json", "gt_categories.json",
                                          "fp_categories.json",
                                          "curve_fppi.csv", "curve_gdpi.csv"}
        report = json.loads(body["artifacts"]["report.json"])
        assert report["dataset"]["frames"] == 5
        assert body["summary"]["flamr"] == report["metrics"]["flamr"]

    def test_output_formats_limit_artifacts(self, client, demo_fixture):
        resp = client.post("/evaluate", json=request_body(
            demo_fixture["config"], output_formats=["csv"]))
        assert set(resp.json()["artifacts"]) == {"curve_fppi.csv",
                                                 "curve_gdpi.csv"}

    def test_repeated_requests_hit_cache_and_agree(self, client, demo_fixture):
        body = request_body(demo_fixture["config"])
        first = client.post("/evaluate", json=body).json()
        second = client.post("/evaluate", json=body).json()
        assert first == second

    def test_missing_input_is_config_error(self, client, demo_fixture):
        resp = client.post("/evaluate", json=request_body(
            demo_fixture["config"], ground_truth="/does/not/exist.json"))
        assert resp.status_code == 400
        assert resp.json()["detail"]["kind"] == "config"

    def test_corrupt_ground_truth_is_data_error(self, client, demo_fixture,
                                                tmp_path):
        bad = tmp_path / "gt.json"
        bad.write_text("not json at all")
        resp = client.post("/evaluate", json=request_body(
            demo_fixture["config"], ground_truth=str(bad)))
        assert resp.status_code == 400
        assert resp.json()["detail"]["kind"] == "data"

    def test_invalid_threshold_rejected_by_schema(self, client, demo_fixture):
        body = request_body(demo_fixture["config"])
        body["config"]["categorizer"]["crowd_share"] = 1.5
        resp = client.post("/evaluate", json=body)
        assert resp.status_code == 422  # pydantic validation


class TestCategorize:
    def test_cardinalities_present(self, client, demo_fixture):
        resp = client.post("/categorize",
                           json=request_body(demo_fixture["config"]))
        assert resp.status_code == 200
        body = resp.json()
        counts = body["cardinalities"]
        assert set(counts) >= {"F", "B", "E", "C", "A", "ignored",
                               "reasonable", "total_non_ignored"}
        assert counts["total_non_ignored"] == sum(
            counts[k] for k in ("F", "B", "E", "C", "A"))
        assert set(body["artifacts"]) == {"gt_categories.json"}


class TestValidate:
    def test_clean_fixture_passes(self, client, demo_fixture):
        resp = client.post("/validate", json=request_body(demo_fixture["config"]))
        assert resp.status_code == 200
        assert resp.json()["ok"]

    def test_broken_mask_reported_as_error(self, client, demo_fixture,
                                           tmp_path):
        mask_dir = tmp_path / "masks"
        mask_dir.mkdir()
        resp = client.post("/validate", json=request_body(
            demo_fixture["config"], mask_dir=str(mask_dir)))
        assert resp.status_code == 200
        body = resp.json()
        assert not body["ok"]
        assert any(d["level"] == "error" for d in body["diagnostics"])
