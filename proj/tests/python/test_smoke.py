import json

import numpy as np
import pytest

import mmfuse


def test_auc_and_ci_examples():
    assert mmfuse.auc_roc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    mean, low, high = mmfuse.mean_ci([0.9, 1.0, 1.0, 0.9, 0.9])
    assert mean == pytest.approx(0.94)
    assert low == pytest.approx(0.8920, abs=1e-4)
    assert high == pytest.approx(0.9880, abs=1e-4)


def test_eer_and_confusion():
    e = mmfuse.eer_point([0.2, 0.4, 0.6, 0.8], [0, 1, 0, 1])
    assert e["threshold"] == 0.6
    assert e["fpr"] == e["fnr"] == 0.5
    c = mmfuse.confusion_metrics([0.9, 0.1, 0.7, 0.2], [1, 0, 0, 1])
    assert c["accuracy"] == 0.5


def test_errors_carry_their_kind():
    with pytest.raises(mmfuse.Error) as info:
        mmfuse.auc_roc([0.1, 0.2], [0, 0])
    assert info.value.kind == "SingleClass"


def test_folds_keep_subjects_together():
    ids = [f"s{i}" for i in range(20)]
    labels = [1 if i < 5 else 0 for i in range(20)]
    folds = mmfuse.make_folds(ids, labels, 5, 3)
    assert sorted(folds) == sorted(ids)
    assert folds == mmfuse.make_folds(ids, labels, 5, 3)
    positives = [sum(1 for s, f in folds.items() if f == k and labels[ids.index(s)]) for k in range(5)]
    assert positives == [1] * 5


def test_generate_returns_arrays():
    d = mmfuse.generate(n_subjects=8, images_per_subject=[2, 2], image_size=[16, 16], seed=4)
    assert len(d["subjects"]) == 8
    assert len(d["images"]) == 16
    px = d["images"][0]["pixels"]
    assert isinstance(px, np.ndarray) and px.shape == (16, 16)
    assert 0.0 <= px.min() and px.max() <= 1.0


def test_train_report_ablate_explain(tmp_path):
    cfg = {
        "seed": 2,
        "k": 3,
        "output_dir": str(tmp_path / "run"),
        "synth": {"n_subjects": 12, "images_per_subject": [2, 2], "image_size": [16, 16]},
        "model": {"encoder": {"name": "tiny_cnn", "embedding_dim": 4, "input_size": [16, 16]}},
        "train": {"epochs": 1},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    assert mmfuse.load_config(str(path), ["train.epochs=2"])["train"]["epochs"] == 2
    run_dir = mmfuse.train(str(path))
    metrics = json.loads((run_dir / "metrics.json").read_text())
    assert set(metrics) == {"MULTIMODAL", "IMAGE_ONLY", "CLINICAL_ONLY"}
    assert "MULTIMODAL" in mmfuse.report(str(run_dir))
    summary = mmfuse.ablate(str(run_dir))
    assert summary["image"]["mean"] + summary["clinical"]["mean"] == pytest.approx(1.0)
    written = mmfuse.explain(str(run_dir), ["S001_0"])
    assert any(str(p).endswith("S001_0_cam.png") for p in written)
    with pytest.raises(mmfuse.Error):
        mmfuse.train(str(path))
