import hashlib

import numpy as np
import pytest

from gridverify import BreakMask, Configuration, SceneModel, apply_break, render_scene, ssim
from gridverify.netpbm import read_pgm
from gridverify.scene import generate_dataset, line_column


def test_centered_configuration_gives_center_stripe():
    img = render_scene(Configuration(d=-1.685, theta=0.0))
    lit_cols = {int(c) for _, c in zip(*np.nonzero(img))}
    assert lit_cols == {7, 8}
    assert np.all(img[:, 7] == 255) and np.all(img[:, 8] == 255)


def test_zero_yaw_rows_identical():
    img = render_scene(Configuration(d=-2.2, theta=0.0))
    assert all((row == img[0]).all() for row in img)


def test_bottom_row_column_monotone_in_d():
    cols = []
    for d in np.linspace(-3.0, -0.37, 100):
        img = render_scene(Configuration(d, 0.05))
        cols.append(line_column(img, 15))
    assert all(c is not None for c in cols)
    assert all(b >= a for a, b in zip(cols, cols[1:]))
    assert cols[-1] > cols[0]


def test_bottom_row_column_affine_fit():
    ds = np.linspace(-3.0, -0.37, 100)
    cols = np.array([line_column(render_scene(Configuration(d, 0.0)), 15) for d in ds])
    slope, icept = np.polyfit(ds, cols, 1)
    pred = slope * ds + icept
    r2 = 1 - np.sum((cols - pred) ** 2) / np.sum((cols - cols.mean()) ** 2)
    assert r2 > 0.99


def test_off_frame_line_yields_empty_image():
    img = render_scene(Configuration(d=50.0, theta=0.0))
    assert img.sum() == 0


def test_theta_drifts_line_across_rows():
    img = render_scene(Configuration(d=-1.685, theta=0.15))
    bottom = line_column(img, 15)
    top = line_column(img, 0)
    assert top is not None and bottom is not None
    assert top > bottom


def test_apply_break_zero_width_is_identity():
    img = render_scene(Configuration(-1.0, 0.02))
    assert np.array_equal(apply_break(img, BreakMask(0.0)), img)


def test_apply_break_idempotent():
    img = render_scene(Configuration(-1.0, 0.02))
    mask = BreakMask(4.0)
    once = apply_break(img, mask)
    assert np.array_equal(apply_break(once, mask), once)


def test_apply_break_full_width_erases_band():
    img = np.full((16, 16), 255, dtype=np.uint8)
    out = apply_break(img, BreakMask(16.0))
    rows, cols = np.indices(img.shape)
    band = np.abs(rows + cols - 15.0) < 8.0
    assert (out[band] == 0).all()
    assert (out[~band] == 255).all()


def test_apply_break_monotone_pixel_removal():
    img = render_scene(Configuration(-1.685, 0.0))
    removed = []
    for w in np.linspace(0, 16, 30):
        out = apply_break(img, BreakMask(float(w)))
        removed.append(int(img.sum() - out.sum()))
    assert all(b >= a for a, b in zip(removed, removed[1:]))


def _dir_digest(path):
    h = hashlib.sha256()
    for f in sorted(path.iterdir()):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()


def test_dataset_reproducible_from_seed(tmp_path):
    a = generate_dataset(10, tmp_path / "a", break_prob=0.5, seed=33)
    b = generate_dataset(10, tmp_path / "b", break_prob=0.5, seed=33)
    assert _dir_digest(a) == _dir_digest(b)
    c = generate_dataset(10, tmp_path / "c", break_prob=0.5, seed=34)
    assert _dir_digest(a) != _dir_digest(c)


def test_dataset_labels_within_ranges(tmp_path):
    out = generate_dataset(
        50, tmp_path / "ds", d_range=(-2.0, -1.0), theta_range=(0.0, 0.1), seed=1
    )
    rows = (out / "labels.csv").read_text().splitlines()
    assert rows[0] == "index,d,theta,break_w"
    assert len(rows) == 51
    for line in rows[1:]:
        _, d, theta, w = line.split(",")
        assert -2.0 <= float(d) <= -1.0
        assert 0.0 <= float(theta) <= 0.1
        assert float(w) == 0.0


def test_dataset_break_fraction_binomial(tmp_path):
    out = generate_dataset(10_000, tmp_path / "ds", break_prob=0.5, seed=7)
    rows = (out / "labels.csv").read_text().splitlines()[1:]
    frac = sum(1 for r in rows if float(r.split(",")[3]) > 0) / len(rows)
    assert 0.47 <= frac <= 0.53


def test_dataset_rerender_from_labels_byte_identical(tmp_path):
    out = generate_dataset(25, tmp_path / "ds", break_prob=0.6, seed=11)
    rows = (out / "labels.csv").read_text().splitlines()[1:]
    for line in rows:
        idx, d, theta, w = line.split(",")
        img = render_scene(Configuration(float(d), float(theta)))
        if float(w) > 0:
            img = apply_break(img, BreakMask(float(w)))
        stored = read_pgm(out / ("img_%06d.pgm" % int(idx)))
        assert np.array_equal(stored, img)


def test_ssim_identity_is_one():
    rng = np.random.default_rng(0)
    x = rng.random((16, 16))
    assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)


def test_ssim_symmetric():
    rng = np.random.default_rng(1)
    a, b = rng.random((16, 16)), rng.random((16, 16))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_ssim_inverted_half_image_negative():
    x = np.zeros((16, 16))
    x[:, 8:] = 1.0
    assert ssim(x, 1.0 - x) < 0.0


def test_ssim_accepts_uint8():
    img = render_scene(Configuration(-1.0, 0.0))
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)


def test_ssim_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        ssim(np.zeros((16, 16)), np.zeros((16, 15)))


def test_ssim_range_bounded():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a, b = rng.random((16, 16)), rng.random((16, 16))
        assert -1.0 <= ssim(a, b) <= 1.0


def test_scene_model_validation():
    with pytest.raises(ValueError):
        SceneModel(lateral_gain=-1.0)
    with pytest.raises(ValueError):
        SceneModel(thickness=0.5)
    with pytest.raises(ValueError):
        BreakMask(-1.0)
