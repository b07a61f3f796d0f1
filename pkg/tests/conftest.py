"""Shared fixtures: a small on-disk dataset generated from seeded scenes."""

import json

import pytest

from pedeval.synth import random_scene, render, write_fixture

DEMO_SEED = 100
DEMO_FRAMES = 5


@pytest.fixture(scope="session")
def demo_fixture(tmp_path_factory):
    """Five seeded scenes written in the ingestion formats, plus run config."""
    root = tmp_path_factory.mktemp("demo")
    scenes = [render(random_scene(DEMO_SEED + i)) for i in range(DEMO_FRAMES)]
    paths = write_fixture(str(root), scenes)
    paths["root"] = str(root)
    paths["scenes"] = scenes
    return paths


@pytest.fixture
def demo_config(demo_fixture, tmp_path):
    """Copy of the demo run config with a test-local output directory."""
    def make(**overrides):
        with open(demo_fixture["config"]) as f:
            doc = json.load(f)
        doc["output_dir"] = str(tmp_path / "out")
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(doc.get(key), dict):
                doc[key].update(value)
            else:
                doc[key] = value
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc, indent=2))
        return str(path)
    return make
