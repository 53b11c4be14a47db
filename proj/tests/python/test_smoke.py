"""End-to-end smoke tests for the Python bindings.

The extension module is located through PYTHONPATH (ctest points it at the
CMake build tree; an installed wheel works the same way).
"""

import numpy as np
import pytest

dp = pytest.importorskip("_depthpatch")


@pytest.fixture(scope="module")
def dataset():
    return dp.generate_synthetic_scenes(8, 42)


def test_synthetic_scenes_shape(dataset):
    assert len(dataset.train) == 6
    assert len(dataset.test) == 2
    scene = dataset.train[0]
    img = scene.image
    assert img.shape == (64, 64, 3)
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert len(scene.detections) >= 1
    assert scene.gt_disparity.shape == (64, 64)


def test_determinism():
    a = dp.generate_synthetic_scenes(4, 7)
    b = dp.generate_synthetic_scenes(4, 7)
    assert np.array_equal(a.train[0].image, b.train[0].image)


def test_analytic_model_predict_and_gradient():
    model = dp.AnalyticDepthModel()
    img = np.full((64, 64, 3), 0.4)
    d = model.predict(img)
    assert d.shape == (64, 64)
    assert np.allclose(d, 0.4)

    upstream = np.zeros((64, 64))
    upstream[32, 32] = 1.0
    grad = model.gradient_wrt_image(img, upstream)
    assert grad.shape == (64, 64, 3)
    assert grad[32, 32, 1] == pytest.approx(0.587 / 25.0)


def test_masks_and_compositing(dataset):
    scene = dataset.train[0]
    det = scene.detections[0]
    placement = dp.place_patch_geometry(det, 0.4, 64, 64)
    masks = dp.build_masks(64, 64, det, placement)
    assert masks.focus_mask.sum() == det.box.area()
    assert np.all(masks.focus_mask[masks.patch_mask > 0] == 1)

    patch = dp.Patch.random(8, 3)
    result = dp.apply_all(scene.image, patch, [det])
    adv = result.adv_image
    assert adv.shape == scene.image.shape
    changed = np.any(adv != scene.image, axis=2)
    assert changed.sum() > 0


def test_losses_and_metrics():
    d_t = np.zeros((32, 32))
    d_adv = np.full((32, 32), 0.5)
    m_p = np.zeros((32, 32), dtype=np.uint8)
    m_p[10:20, 10:20] = 1
    m_f = np.zeros((32, 32), dtype=np.uint8)
    m_f[5:25, 5:25] = 1

    assert dp.loss_d1(d_t, d_adv, m_p) == pytest.approx(0.5)
    assert dp.loss_d2(d_t, d_adv, m_f, m_p) == pytest.approx(0.5)
    assert dp.loss_depth(0.5, 0.2) == pytest.approx(0.45)

    patch = dp.Patch(4, 0.5)
    assert dp.loss_tv(patch) == 0.0
    assert dp.loss_total([0.4], patch) == pytest.approx(0.4)

    d = np.zeros((32, 32))
    assert dp.compute_ed(d, d_adv, m_f) == pytest.approx(0.5)
    assert dp.compute_ra(d, d_adv, m_f) == pytest.approx(1.0)
    assert dp.compute_mse(d, d_adv) == pytest.approx(0.25)


def test_train_patch_smoke(dataset):
    model = dp.AnalyticDepthModel()
    cfg = dp.AttackConfig()
    cfg.epochs = 2
    cfg.patch_side = 8
    cfg.batch_size = 2
    cfg.seed = 5
    result = dp.train_patch(dataset, model, cfg)
    pixels = result.patch.pixels
    assert pixels.shape == (8, 8, 3)
    assert pixels.min() >= 0.0 and pixels.max() <= 1.0
    assert result.log.n_epochs == 2

    report = dp.evaluate_patch(model, dataset.test, result.patch)
    assert 0.0 <= report.e_d <= 1.0
    assert 0.0 <= report.r_a <= 1.0


def test_defense_identity():
    img = np.random.default_rng(0).uniform(size=(64, 64, 3))
    spec = dp.DefenseSpec(dp.DefenseKind.gaussian_noise, 0.0)
    out = dp.apply_defense(img, spec)
    assert np.array_equal(out, img)

    jpeg = dp.apply_defense(img, dp.DefenseSpec(dp.DefenseKind.jpeg, 90))
    assert jpeg.min() >= 0.0 and jpeg.max() <= 1.0


def test_pfm_round_trip(tmp_path):
    m = np.random.default_rng(1).uniform(size=(16, 16)).astype(np.float32).astype(np.float64)
    path = str(tmp_path / "d.pfm")
    dp.write_disparity(m, path)
    back = dp.read_disparity(path)
    assert np.array_equal(back, m)


def test_errors_translate():
    with pytest.raises(ValueError):
        dp.read_png("/nonexistent/image.png")
