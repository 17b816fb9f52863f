"""End-to-end smoke tests for the python bindings.

Everything runs on deliberately tiny configurations; the goal is wiring, not
model quality.
"""

import json

import numpy as np
import pytest

import scenegen

TINY_SYNTH = {"lat_res": 4, "surface_samples": 128, "view_size": 16, "views": 2}
TINY_MODEL = {
    "dim": 32,
    "heads": 4,
    "blocks": 2,
    "lat_res": 4,
    "registers": 2,
    "freq_dim": 16,
    "ffn_mult": 2,
    "view_size": 16,
    "patch": 8,
    "view_layers": 1,
    "geo_layers": 1,
    "max_views": 4,
    "pos_head_layers": 2,
    "decoder_hidden": 16,
}


@pytest.fixture(scope="module")
def scene():
    return scenegen.generate_scene(1234, 3, TINY_SYNTH)


@pytest.fixture(scope="module")
def model():
    return scenegen.Model.create(TINY_MODEL, seed=7)


def test_scene_shape(scene):
    assert scene.num_assets == 3
    assert scene.num_views == 2
    assert scene.d_scene > 0
    cloud = scene.surface(0)
    assert cloud.shape == (128, 3)
    pose0 = scene.pose(0)
    # The first asset is the query: exact identity placement.
    np.testing.assert_array_equal(pose0, [0, 0, 0, 1, 0, 0, 0, 1])
    assert scene.scene_cloud().shape == (3 * 128, 3)
    assert scene.latent_cells(1) > 0


def test_generation_is_deterministic():
    a = scenegen.generate_scene(99, 2, TINY_SYNTH)
    b = scenegen.generate_scene(99, 2, TINY_SYNTH)
    np.testing.assert_array_equal(a.scene_cloud(), b.scene_cloud())
    np.testing.assert_array_equal(a.pose(1), b.pose(1))


def test_corpus_roundtrip(tmp_path, scene):
    path = str(tmp_path / "corpus.sgcorp")
    scenegen.save_corpus(path, [scene])
    back = scenegen.load_corpus(path)
    assert len(back) == 1
    # The on-disk corpus stores clouds as float32, so expect its rounding.
    np.testing.assert_allclose(back[0].surface(2), scene.surface(2), rtol=0, atol=1e-6)


def test_chamfer_and_fscore():
    rng = np.random.default_rng(3)
    cloud = rng.uniform(-1, 1, size=(64, 3))
    assert scenegen.chamfer(cloud, cloud) == 0.0
    assert scenegen.fscore(cloud, cloud, tau=0.1) == 100.0
    shifted = cloud + [10.0, 0.0, 0.0]
    assert scenegen.fscore(cloud, shifted, tau=0.1) == 0.0
    assert scenegen.chamfer(cloud, shifted) == pytest.approx(20.0, rel=0.2)


def test_registration_recovers_rotation():
    rng = np.random.default_rng(4)
    src = rng.uniform(-0.5, 0.5, size=(256, 3))
    angle = np.deg2rad(15.0)
    rot = np.array(
        [
            [np.cos(angle), -np.sin(angle), 0.0],
            [np.sin(angle), np.cos(angle), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    dst = src @ rot.T + [0.05, -0.02, 0.03]
    for solve in (scenegen.register_icp, scenegen.register_filterreg):
        reg = solve(src, dst)
        aligned = src @ np.asarray(_quat_matrix(reg["q"])).T + reg["t"]
        assert scenegen.chamfer(aligned, dst) < 1e-4


def _quat_matrix(q):
    w, x, y, z = q
    return [
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ]


def test_train_sample_evaluate(tmp_path, model, scene):
    corpus = [scenegen.generate_scene(500 + i, 2, TINY_SYNTH) for i in range(2)]
    iou = scenegen.train_decoder(model, corpus, epochs=2, lr=3e-3, seed=1)
    assert 0.0 <= iou <= 1.0

    trainer = scenegen.Trainer(
        model, {"lr": 1e-3, "batch_size": 2, "epochs": 1, "seed": 5, "trainable": "all",
                "collision_res": 16}
    )
    records = trainer.train_epoch(corpus)
    assert len(records) == 1  # one batch of two 2-asset scenes
    assert np.isfinite(records[0]["total"])
    assert trainer.step == 1

    sampled = scenegen.sample_scene(model, scene, views=[0], config={"steps": 2, "seed": 3})
    assert sampled.num_assets == scene.num_assets
    assert sampled.cloud(0).shape[1] == 3
    assert sampled.pose(0).shape == (8,)
    assert 0.0 <= scenegen.shell_iou(sampled, scene, 0) <= 1.0

    out = tmp_path / "sampled"
    sampled.write(str(out))
    assert (out / "poses.json").exists()
    poses = json.loads((out / "poses.json").read_text())
    assert len(poses["poses"]) == scene.num_assets

    report = scenegen.evaluate_scene(
        sampled, scene, {"registration": "icp", "eval_points": 128, "reg_points": 64,
                         "max_iters": 10, "collision_res": 16}
    )
    assert "cd_s" in report and np.isfinite(report["cd_s"])


def test_self_evaluation_is_perfect(scene):
    report = scenegen.evaluate_self(
        scene, {"registration": "icp", "eval_points": 128, "reg_points": 64, "max_iters": 10,
                "collision_res": 16}
    )
    assert report["fscore_s"] == 100.0
    assert report["cd_s"] < 1e-9


def test_sampling_is_deterministic(model, scene):
    cfg = {"steps": 2, "seed": 11}
    a = scenegen.sample_scene(model, scene, views=[0], config=cfg)
    b = scenegen.sample_scene(model, scene, views=[0], config=cfg)
    np.testing.assert_array_equal(a.cloud(1), b.cloud(1))
    np.testing.assert_array_equal(a.pose(1), b.pose(1))


def test_model_checkpoint_roundtrip(tmp_path, model, scene):
    path = str(tmp_path / "weights.sgck")
    model.save(path, dtype="f4")
    back = scenegen.Model.load(path)
    assert back.param_count == model.param_count
    assert back.config == model.config


def test_cli_passthrough(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"synth": TINY_SYNTH}))
    out = tmp_path / "data"
    code = scenegen.run_cli(
        ["gen-data", "--config", str(cfg), "--seed", "3", "--scenes", "1",
         "--min-assets", "2", "--max-assets", "2", "--out", str(out)]
    )
    assert code == 0
    assert (out / "corpus.sgcorp").exists()
    assert (out / "manifest.json").exists()


def test_config_validation_raises():
    with pytest.raises(ValueError):
        scenegen.Trainer(scenegen.Model.create(TINY_MODEL, seed=1), {"trainable": "everything"})
