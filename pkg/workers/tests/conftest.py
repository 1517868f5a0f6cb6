"""Shared fixtures and PNG helpers for the worker tests."""

import json
import sys

import numpy as np
import pytest
from PIL import Image


def write_png(path, seed=0, h=24, w=20):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 256, size=(h, w, 3)).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")
    return arr


def read_png(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


@pytest.fixture
def scripted_config(tmp_path):
    """Write scripted 'checkpoints' plus a config serving all five tasks.

    Returns (config_path, weights_dir). Checkpoint files carry short text
    tags so tests can confirm which file a load actually touched.
    """
    wdir = tmp_path / "weights"
    wdir.mkdir()
    (wdir / "identity.txt").write_text("identity-tag")
    (wdir / "denoise15.txt").write_text("alpha")
    (wdir / "denoise25.txt").write_text("beta")
    (wdir / "x2.txt").write_text("x2-tag")
    (wdir / "detect.txt").write_text("detect-tag")
    (wdir / "crash.txt").write_text("crash-tag")
    config = {
        "device": "cpu",
        "tasks": {
            "fbcnn": {"family": "scripted-identity", "weights": str(wdir / "identity.txt")},
            "restormer-denoise": {
                "family": "scripted-denoise",
                "weights": {
                    "15": str(wdir / "denoise15.txt"),
                    "25": str(wdir / "denoise25.txt"),
                },
            },
            "swinfir-x2": {"family": "scripted-x2", "weights": str(wdir / "x2.txt")},
            "detect-trufor": {"family": "scripted-detect", "weights": str(wdir / "detect.txt")},
            "detect-earlyfusion": {
                "family": "scripted-detect",
                "weights": str(wdir / "detect.txt"),
            },
            # non-canonical task: exercises the inference-failure path
            "crash-test": {"family": "scripted-crash", "weights": str(wdir / "crash.txt")},
        },
    }
    path = tmp_path / "registry.json"
    path.write_text(json.dumps(config, indent=2))
    return path, wdir


@pytest.fixture
def worker_command(scripted_config):
    config_path, _ = scripted_config
    return [sys.executable, "-m", "modelworkers", "--config", str(config_path)]
