import numpy as np
import pytest

from stereomatch.census import census_cost_volume, census_transform
from stereomatch.exceptions import GenerationError
from stereomatch.image_io import DisparityMap, GrayImage
from stereomatch.synth import (
    SceneSpec,
    disparity_field,
    extract_triples,
    generate,
    load_scene_config,
    write_scene,
)


def visibility_oracle(disp):
    """Pixel-by-pixel: (y, x) is visible if no left pixel with a larger disparity maps onto x - d."""
    h, w = disp.shape
    vis = np.zeros((h, w), bool)
    for y in range(h):
        for x in range(w):
            d = int(disp[y, x])
            target = x - d
            if target < 0:
                continue
            vis[y, x] = all(
                not (x2 - int(disp[y, x2]) == target and int(disp[y, x2]) > d) for x2 in range(w)
            )
    return vis


def test_identity_scene():
    left, right, truth = generate(SceneSpec(48, 32, terrain="constant", disparity=0))
    assert right == left
    assert truth.valid.all() and not truth.data.any()


def test_constant_shift():
    left, right, truth = generate(SceneSpec(48, 32, terrain="constant", disparity=5))
    assert np.array_equal(right.data[:, :-5], left.data[:, 5:])
    assert not truth.valid[:, :5].any() and truth.valid[:, 5:].all()


def _field(spec):
    """Replay the generator's rng draws to recover the full disparity field."""
    rng = np.random.default_rng(spec.rng_seed)
    rng.integers(0, 256, size=(spec.height, spec.width))
    rng.integers(0, 256, size=(spec.height, spec.width))
    return disparity_field(spec, rng)


def test_blocks_occlusion_band():
    spec = SceneSpec(64, 48, terrain="blocks", n_blocks=1, disparity=3, block_disparity=9, rng_seed=4)
    _, _, truth = generate(spec)
    field = _field(spec)
    assert np.array_equal(truth.valid, visibility_oracle(field))
    assert np.array_equal(truth.data[truth.valid], field[truth.valid])
    rows = np.nonzero((field == 9).any(axis=1))[0]
    x0 = int(np.argmax(field[rows[0]] == 9))
    assert x0 >= 9, "seed should place the block away from the left edge"
    # background pixels just left of the block are hidden by a band of width 9 - 3
    assert not truth.valid[rows, x0 - 6 : x0].any()
    assert truth.valid[rows, x0 - 7].all()


def test_census_zero_at_truth():
    left, right, truth = generate(SceneSpec(64, 64, rng_seed=2))
    cv = census_cost_volume(census_transform(left), census_transform(right), 16).costs
    h, w = truth.shape
    ys, xs = np.nonzero(truth.valid)
    dv = truth.data[ys, xs].astype(int)
    r = 4
    inner = (ys >= r) & (ys < h - r) & (xs - dv >= r) & (xs < w - r)
    # a window that straddles an occluded or disoccluded neighbour is not pure shift
    ys, xs, dv = ys[inner], xs[inner], dv[inner]
    clean = [
        i for i in range(ys.size)
        if (truth.valid[ys[i] - r : ys[i] + r + 1, xs[i] - r : xs[i] + r + 1]
            & (truth.data[ys[i] - r : ys[i] + r + 1, xs[i] - r : xs[i] + r + 1] == dv[i])).all()
    ]
    assert len(clean) > 1000
    assert np.all(cv[ys[clean], xs[clean], dv[clean]] == 0)


def test_ramp_fractional_truth():
    left, right, truth = generate(SceneSpec(64, 16, terrain="ramp", disparity=2, block_disparity=6))
    v = truth.data[truth.valid]
    assert v.min() >= 2 and v.max() == 6
    assert np.any(v != np.round(v))
    assert not truth.valid[:, :2].any()


def test_radiometric_distortion_and_range():
    _, right, _ = generate(SceneSpec(32, 32, gain=1.2, bias=0.05, noise_sigma=0.02))
    assert right.data.min() >= 0 and right.data.max() <= 1
    assert np.array_equal(np.rint(right.data * 255), right.data * 255)


def test_generate_is_pure():
    s = SceneSpec(40, 40, noise_sigma=0.05, rng_seed=9)
    a, b = generate(s), generate(s)
    assert all(x == y for x, y in zip(a, b))


def test_triples():
    left, right, truth = generate(SceneSpec(64, 64, rng_seed=1))
    t1 = extract_triples(left, right, truth, 200, rng_seed=5)
    t2 = extract_triples(left, right, truth, 200, rng_seed=5)
    assert len(t1) == 200
    for a, b in zip(t1, t2):
        assert np.array_equal(a.reference, b.reference) and np.array_equal(a.negative, b.negative)
    for t in t1:
        assert 2 <= abs(t.negative_disparity - t.true_disparity) <= 8
        assert t.reference.shape == t.positive.shape == t.negative.shape == (9, 9)


def test_positive_equals_reference_at_zero_disparity():
    left, right, truth = generate(SceneSpec(40, 40, terrain="constant", disparity=0))
    for t in extract_triples(left, right, truth, 50):
        assert np.array_equal(t.reference, t.positive)


def test_triples_need_valid_area():
    img = GrayImage(np.zeros((20, 20)))
    truth = DisparityMap(np.zeros((20, 20), np.float32), np.zeros((20, 20), bool))
    with pytest.raises(GenerationError):
        extract_triples(img, img, truth, 5)


def test_spec_validation():
    with pytest.raises(ValueError):
        SceneSpec(terrain="hills")
    with pytest.raises(ValueError):
        SceneSpec(disparity=20, d_max=16)


def test_config_file(tmp_path):
    p = tmp_path / "scene.cfg"
    p.write_text("# demo\nwidth = 40\nheight=30\nterrain = constant  # flat\ndisparity = 3\ngain=1.1\n")
    s = load_scene_config(p)
    assert (s.width, s.height, s.terrain, s.disparity, s.gain) == (40, 30, "constant", 3.0, 1.1)
    p.write_text("colour = red\n")
    with pytest.raises(ValueError):
        load_scene_config(p)
    paths = write_scene(*generate(SceneSpec(16, 16, terrain="constant", disparity=1)), tmp_path / "s")
    assert all(v.exists() for v in paths.values())
