# Copyright 2026 The mtsplit Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Smoke tests for the Python module and the command-line tool."""

import json
import os
import socket
import subprocess
import time

import numpy as np
import pytest

import mtsplit

CLI = os.environ.get("MTSPLIT_CLI")
CONFIGS = os.environ.get("MTSPLIT_CONFIGS", os.path.join(os.path.dirname(__file__), "..", "..", "configs"))


def small_config(out_dir):
    return {
        "seed": 2,
        "dataset": {"kind": "synthetic_classification", "num_samples": 48, "test_samples": 16},
        "tasks": [
            {"task_id": "shape", "kind": "classification", "num_outputs": 2},
            {"task_id": "color", "kind": "classification", "num_outputs": 2},
        ],
        "weights": {"omega": 0.001},
        "regime": {"kind": "task_privacy_only", "phase1_epochs": 1},
        "training": {"batch_size": 16, "learning_rate": 1e-3},
        "runtime": {"key": "smoke", "task_id": "shape", "timeout_seconds": 20},
        "output": {"dir": str(out_dir)},
    }


def test_accountant_matches_itself_and_calibrates():
    eps = mtsplit.compute_epsilon(0.01, 1.1, 1000, 1e-5)
    assert 0 < eps < 10
    assert mtsplit.compute_epsilon(0.01, 1.1, 0, 1e-5) == 0
    sigma = mtsplit.calibrate_sigma(0.01, 4.0, 1000, 1e-5)
    assert mtsplit.compute_epsilon(0.01, sigma, 1000, 1e-5) <= 4.0 + 1e-9
    with pytest.raises(mtsplit.CalibrationError):
        mtsplit.calibrate_sigma(0.01, 1e-9, 1000, 1e-5)
    with pytest.raises(mtsplit.ConfigError):
        mtsplit.calibrate_sigma(0.01, 1e-9, 1000, 1e-5)  # calibration is a config error


def test_clipping_bounds_every_row():
    rng = np.random.default_rng(0)
    g = rng.normal(scale=3.0, size=(50, 20)).astype(np.float32)
    clipped = mtsplit.clip_per_sample(g, 1.2)
    norms = np.linalg.norm(clipped.astype(np.float64), axis=1)
    assert np.all(norms <= 1.2 + 1e-6)
    small = g / 100
    assert np.array_equal(mtsplit.clip_per_sample(small, 1.2), small)
    agg = mtsplit.noisy_aggregate(clipped, 0.0, 1.2, 1)
    assert np.allclose(agg, clipped.mean(axis=0), atol=1e-6)


def test_similarity_of_identical_maps_is_one():
    x = np.random.default_rng(1).random((2, 3, 32, 32), dtype=np.float32)
    assert mtsplit.similarity(x, x) == pytest.approx(1.0, abs=1e-6)
    assert mtsplit.similarity(x, 1 - x) < 0.5


def test_wire_round_trip_and_errors():
    t = np.arange(24, dtype=np.float32).reshape(2, 3, 2, 2)
    frame = mtsplit.encode_message(mtsplit.MSG_FORWARD_FEATURES, 9, 4, [t])
    assert frame[:4] == b"MM01"
    assert len(frame) == 27 + 2 + 16 + 96
    msg = mtsplit.decode_message(frame)
    assert msg["type_name"] == "FORWARD_FEATURES"
    assert (msg["session_id"], msg["batch_index"]) == (9, 4)
    assert np.array_equal(msg["tensors"][0], t)
    bad = bytearray(frame)
    bad[100] ^= 1  # payload byte
    with pytest.raises(mtsplit.CorruptionError):
        mtsplit.decode_message(bytes(bad))
    with pytest.raises(mtsplit.IncompleteError):
        mtsplit.decode_message(frame[:-1])
    half = mtsplit.decode_message(mtsplit.encode_message(2, 1, 0, [t], dtype="f16"))
    assert np.array_equal(half["tensors"][0], t)


def test_synthetic_pair_shapes():
    images, labels = mtsplit.generate_classification_pair(20, 3)
    assert images.shape == (20, 3, 32, 32)
    assert set(labels) == {"shape", "color"}
    assert 0.0 <= images.min() and images.max() <= 1.0


def test_config_normalization_and_errors(tmp_path):
    cfg = small_config(tmp_path)
    full = mtsplit.normalize_config(cfg)
    assert mtsplit.normalize_config(full) == full
    cfg["dp"] = {"sigma": 1}
    with pytest.raises(mtsplit.ConfigError, match="dp.sigma"):
        mtsplit.normalize_config(cfg)


def test_train_and_interchange(tmp_path):
    report = mtsplit.train(small_config(tmp_path / "run"))
    assert report["status"] == "completed"
    assert [t["metric"] for t in report["tasks"]] == ["accuracy", "accuracy"]
    table = mtsplit.eval_interchange(tmp_path / "run" / "checkpoint.mmck", tmp_path / "eval")
    assert len(table["cells"]) == 4
    assert mtsplit.exit_code_for("budget-exhausted") == 4


needs_cli = pytest.mark.skipif(not CLI, reason="command-line tool path not provided")


def run_cli(*args, **kw):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, timeout=120, **kw)


@needs_cli
def test_cli_exit_codes(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(small_config(tmp_path / "run")))
    r = run_cli("accountant", "--q", 0.01, "--sigma", 1.1, "--steps", 1000, "--delta", 1e-5)
    assert r.returncode == 0
    assert float(r.stdout) == pytest.approx(mtsplit.compute_epsilon(0.01, 1.1, 1000, 1e-5))
    r = run_cli("train", "--config", cfg_path, "--dp.sigma=1")
    assert r.returncode == 2 and "dp.sigma" in r.stderr
    r = run_cli("train", "--config", cfg_path)
    assert r.returncode == 0, r.stderr
    ck = tmp_path / "run" / "checkpoint.mmck"
    data = bytearray(ck.read_bytes())
    data[len(data) // 2] ^= 1
    bad = tmp_path / "bad.mmck"
    bad.write_bytes(bytes(data))
    r = run_cli("eval-interchange", "--checkpoint", bad, "--out", tmp_path / "e")
    assert r.returncode == 3 and "corruption" in r.stderr


@needs_cli
def test_cli_budget_exit(tmp_path):
    cfg = small_config(tmp_path / "run")
    cfg["dp"] = {"clip_threshold": 1.0, "noise_multiplier": 0.7, "target_epsilon": 2.0,
                 "target_delta": 1e-5}
    cfg["regime"] = {"kind": "input_obfuscation_only", "phase1_epochs": 30}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    r = run_cli("train", "--config", cfg_path)
    assert r.returncode == 4, r.stderr
    assert json.loads((tmp_path / "run" / "report.json").read_text())["status"] == "budget_exhausted"


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@needs_cli
def test_cli_serve_consume_loopback(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(small_config(tmp_path)))
    port = free_port()
    server = subprocess.Popen(
        [CLI, "serve", "--config", str(cfg_path), f"--runtime.listen=127.0.0.1:{port}",
         f"--output.dir={tmp_path / 'p'}"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    time.sleep(0.2)
    r = run_cli("consume", "--config", cfg_path, f"--runtime.connect=127.0.0.1:{port}",
                f"--output.dir={tmp_path / 'c'}")
    server.wait(timeout=120)
    assert r.returncode == 0, r.stderr
    assert server.returncode == 0
    p = json.loads((tmp_path / "p" / "session.json").read_text())
    c = json.loads((tmp_path / "c" / "session.json").read_text())
    assert p["batches"] == c["batches"] == 3
    assert (tmp_path / "p" / "rtt_summary.csv").exists()


@needs_cli
def test_example_configs_parse():
    names = sorted(n for n in os.listdir(CONFIGS) if n.endswith(".json"))
    assert names
    for name in names:
        with open(os.path.join(CONFIGS, name)) as f:
            mtsplit.normalize_config(json.load(f))
