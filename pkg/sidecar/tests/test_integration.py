"""Full-pipeline check: the main package's search CLI driving a model
served by this sidecar over TCP."""

import json
import re
import subprocess
import sys
import time

import numpy as np
import pytest

from freqshort.cli import main as freqshort_main
from freqshort.datasets import make_band_spec, planted_spec_to_dict


@pytest.fixture
def served_reference(tmp_path):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(7)))
    dim = 16 * 16
    np.savez(
        tmp_path / "weights.npz",
        weights=(rng.standard_normal((dim, 2)) / np.sqrt(dim)).astype(np.float32),
        bias=rng.standard_normal(2).astype(np.float32),
        input_shape=np.asarray((1, 16, 16)),
    )
    spec = tmp_path / "model.json"
    spec.write_text(json.dumps({"kind": "linear-npz", "weights": "weights.npz"}))
    proc = subprocess.Popen(
        [sys.executable, "-m", "freqshort_sidecar.cli", "serve",
         "--model", str(spec), "--listen", "127.0.0.1:0"],
        stderr=subprocess.PIPE, text=True,
    )
    deadline = time.time() + 30
    line = ""
    while time.time() < deadline:
        line = proc.stderr.readline()
        if "listening on" in line:
            break
    match = re.search(r"listening on ([\d.]+):(\d+)", line)
    assert match
    yield match.group(1), int(match.group(2))
    proc.terminate()
    proc.wait(timeout=10)


def test_search_cli_against_remote_endpoint(tmp_path, served_reference):
    host, port = served_reference
    spec = make_band_spec(num_classes=2, image_size=16,
                          train_per_class=10, test_per_class=10, seed=5)
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps(planted_spec_to_dict(spec)))
    data = tmp_path / "data"
    assert freqshort_main(["synth", "--spec", str(spec_file), "--out", str(data)]) == 0

    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "p": 0.6, "N": 2, "seed": 3,
        "stages": [{"patch_size": 4, "B": 4}, {"patch_size": 2, "B": 4}],
    }))
    out = tmp_path / "run"
    code = freqshort_main([
        "search", "--config", str(config), "--dataset", str(data),
        "--endpoint", f"remote:{host}:{port}",
        "--image-size", "16", "--channels", "1", "--out", str(out),
    ])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    # the class-count probe bypasses the counter; the search budget is exact
    assert summary["images_evaluated"] == summary["eval_set_size"] * 8
    assert (out / "dfms.dfm").exists()
