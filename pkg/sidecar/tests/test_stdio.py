"""Serving over standard I/O pipes instead of a socket."""

import json
import subprocess
import sys

import numpy as np

from freqshort.protocol import RemoteClassifier

from .conftest import make_linear_model


def test_stdio_session(tmp_path):
    model = make_linear_model(input_shape=(1, 8, 8), classes=3, seed=7)
    np.savez(tmp_path / "weights.npz", weights=model.weights, bias=model.bias,
             input_shape=np.asarray(model.input_shape))
    spec = tmp_path / "model.json"
    spec.write_text(json.dumps({"kind": "linear-npz", "weights": "weights.npz"}))

    proc = subprocess.Popen(
        [sys.executable, "-m", "freqshort_sidecar.cli", "serve",
         "--model", str(spec), "--stdio"],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE,
    )
    try:
        client = RemoteClassifier.over_pipes(proc.stdout, proc.stdin, timeout=30.0)
        batch = np.random.default_rng(1).random((3, 1, 8, 8)).astype(np.float32)
        logits = client.predict(batch)
        assert np.array_equal(logits.astype(np.float32), model.predict(batch))
    finally:
        proc.stdin.close()
        proc.wait(timeout=10)
