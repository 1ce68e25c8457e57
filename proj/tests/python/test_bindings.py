"""Smoke tests for the Python bindings: math primitives plus a miniature
generate/train/evaluate round trip."""

import json
import math
import pathlib
import shutil
import sys
import tempfile

import simsc


def check_math():
    probs = simsc.softmax([0.2, -0.4, 1.1, 0.0], beta=1.0)
    assert abs(sum(probs) - 1.0) < 1e-12
    sharp = simsc.softmax([0.2, -0.4, 1.1, 0.0], beta=0.02)
    assert max(sharp) > max(probs)
    assert sharp.index(max(sharp)) == 2

    assert simsc.temperature_regularizer(0.1) == 0.0
    assert abs(simsc.temperature_regularizer(0.05) - math.log(2.0)) < 1e-12
    assert simsc.temperature_regularizer(0.5) == 0.0

    scores = [0.0] * 64
    scores[3 * 8 + 5] = 5.0
    row, col = simsc.kernel_soft_argmax(scores, 8, 8, sigma=2.0, beta_eval=0.05)
    assert abs(row - 3.0) < 0.3 and abs(col - 5.0) < 0.3

    assert simsc.pck([(0.0, 0.0), (10.0, 0.0)], [(0.0, 0.0), (0.0, 0.0)], 0.1, 64.0) == 0.5


def check_pipeline(root):
    data = root / "data"
    simsc.generate_split(5, 6, 3, 2, str(data))
    doc = json.loads((data / "train.json").read_text())
    assert len(doc["pairs"]) == 6

    pair = simsc.generate_pair(9)
    assert len(pair["keypoints_a"]) == len(pair["keypoints_b"]) >= 4
    assert len(pair["image_a"]) == 64 * 64
    assert pair["warp_kind"] in ("affine", "thin_perturbation")

    cfg = json.dumps({"mode": "learned_mlp", "epochs": 1, "seed": 2})
    out_a = root / "run_a"
    summary = simsc.train(cfg, str(data), str(out_a))
    assert not summary["diverged"]
    assert summary["epochs_run"] == 1
    assert 0.0 < summary["final_beta_trn"] <= 1.0
    assert (out_a / "weights_final" / "manifest.json").is_file()

    summary_b = simsc.train(cfg, str(data), str(root / "run_b"))
    assert summary_b["final_loss"] == summary["final_loss"]  # bitwise determinism

    res = simsc.evaluate(str(out_a / "weights_final"), str(data / "val.json"),
                         beta_eval=0.05)
    assert res["convention"] == "img"
    assert len(res["per_alpha"]) == 3
    assert all(0.0 <= v <= 1.0 for v in res["per_alpha"])

    swept = simsc.evaluate(str(out_a / "weights_final"), str(data / "val.json"),
                           alphas=[0.1], convention="kps", beta_eval=0.02,
                           aggregate="keypoints")
    assert len(swept["per_alpha"]) == 1


def main():
    root = pathlib.Path(tempfile.mkdtemp(prefix="simsc_py_"))
    try:
        check_math()
        check_pipeline(root)
    finally:
        shutil.rmtree(root, ignore_errors=True)
    print("bindings smoke: all checks passed")


if __name__ == "__main__":
    sys.exit(main())
