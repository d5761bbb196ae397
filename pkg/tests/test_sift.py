import json
import math

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from motifsift import kernels, sift, synth
from motifsift.errors import ParameterError, SizeError
from motifsift.sift import Keypoint, SiftParams

from conftest import gaussian_blob

# frozen after the blob, ramp, rotation and gain oracles below passed
GOLDEN_COUNTS = {
    synth.Family.CHEVRON: 497,
    synth.Family.DIAGONAL_TWILL: 597,
    synth.Family.SYMMETRIC_DIAMOND: 2242,
}


def test_params_defaults_and_length():
    p = SiftParams()
    assert p.descriptor_length == 128
    assert (p.base_sigma, p.intervals_per_octave, p.contrast_threshold, p.edge_ratio_threshold) == (1.6, 3, 0.03, 10.0)


@pytest.mark.parametrize("bad", [dict(intervals_per_octave=0), dict(base_sigma=0.0),
                                 dict(orientation_peak_ratio=1.5), dict(descriptor_clip=-1.0),
                                 dict(assumed_camera_sigma=-0.1), dict(contrast_threshold=0.0)])
def test_params_validation(bad):
    with pytest.raises(ParameterError):
        SiftParams(**bad)


def test_params_roundtrip_with_disabled_edge_test():
    p = SiftParams(edge_ratio_threshold=math.inf, contrast_threshold=0.02)
    d = json.loads(json.dumps(p.to_dict()))
    assert d["edge_ratio_threshold"] is None
    assert SiftParams.from_dict(d) == p
    with pytest.raises(ParameterError):
        SiftParams.from_dict({"bogus": 1})


def test_octave_sizes_64():
    ss = sift.build_scale_space(np.zeros((64, 64)))
    assert [g[0].shape for g in ss.gaussians] == [(128, 128), (64, 64), (32, 32), (16, 16)]
    for g, d in zip(ss.gaussians, ss.dog):
        assert len(g) == 6 and len(d) == 5


def test_octave_halving_floor():
    ss = sift.build_scale_space(np.zeros((37, 53)), SiftParams(upsample_first_octave=False))
    shapes = [g[0].shape for g in ss.gaussians]
    for a, b in zip(shapes, shapes[1:]):
        assert b == (a[0] // 2, a[1] // 2)
    assert min(shapes[-1]) >= 16 and min(shapes[-1]) // 2 < 16


def test_sigma_schedule():
    ss = sift.build_scale_space(np.zeros((64, 64)))
    assert np.allclose(ss.sigmas[1], [1.6 * 2 ** (i / 3) for i in range(6)])
    assert np.allclose(ss.sigmas[0], [0.8 * 2 ** (i / 3) for i in range(6)])


def test_incremental_blur_reaches_target_sigma():
    # an impulse blurred through the layer chain has the variance of the schedule
    img = np.zeros((96, 96))
    img[48, 48] = 1.0
    ss = sift.build_scale_space(img, SiftParams(upsample_first_octave=False, assumed_camera_sigma=0.0))
    ys, xs = np.mgrid[0:96, 0:96]
    for layer, target in zip(ss.gaussians[0], ss.sigmas[0]):
        w = layer / layer.sum()
        var = (w * (xs - 48) ** 2).sum()
        assert abs(math.sqrt(var) - target) < 0.05 * target


def test_constant_image_has_zero_dog_and_no_features():
    img = np.full((64, 80), 0.4)
    ss = sift.build_scale_space(img)
    assert all(np.allclose(d, 0.0, atol=1e-12) for d in ss.dog)
    assert sift.detect_keypoints(ss) == []
    assert sift.extract(img) == []


def test_too_small():
    with pytest.raises(SizeError):
        sift.extract(np.zeros((15, 40)))


def _dense_dog_optimum(img):
    # brute-force scan of |DoG| over position and a fine scale grid, with an
    # independent Gaussian filter
    k = 2 ** (1 / 3)
    best = (0.0, None, None)
    for s in np.geomspace(1.0, 20.0, 121):
        d = gaussian_filter(img, s * k, mode="nearest") - gaussian_filter(img, s, mode="nearest")
        i = np.unravel_index(np.argmax(np.abs(d)), d.shape)
        if abs(d[i]) > best[0]:
            best = (abs(d[i]), s, (i[1], i[0]))
    return best[1], best[2]


@pytest.mark.parametrize("sigma_b,size", [(4.0, 128), (8.0, 160)])
def test_blob_oracle(sigma_b, size):
    img = gaussian_blob(size, sigma_b, amplitude=0.8)
    c = (size - 1) / 2
    s_opt, (ox, oy) = _dense_dog_optimum(img)
    assert math.hypot(ox - c, oy - c) <= 1.0
    near = [f.keypoint for f in sift.extract(img) if math.hypot(f.keypoint.x - c, f.keypoint.y - c) <= 2.0]
    assert near
    assert any(s_opt / 1.5 <= k.sigma <= s_opt * 1.5 for k in near)
    assert any(sigma_b / 1.5 <= k.sigma <= sigma_b * 1.5 for k in near)


def _centre_sigma(sigma_b, size):
    c = (size - 1) / 2
    kps = sift.detect_keypoints(sift.build_scale_space(gaussian_blob(size, sigma_b, amplitude=0.8)))
    return min(kps, key=lambda k: math.hypot(k.x - c, k.y - c)).sigma


def test_blob_scale_equivariance():
    ratio = _centre_sigma(8.0, 160) / _centre_sigma(4.0, 128)
    assert 2 * 0.75 <= ratio <= 2 * 1.25


def test_edge_rejection():
    ys, xs = np.mgrid[0:128, 0:128]
    img = np.where(xs + 0.3 * ys > 70, 0.8, 0.2)
    dist = lambda k: abs(k.x + 0.3 * k.y - 70) / math.hypot(1, 0.3)
    with_test = sift.detect_keypoints(sift.build_scale_space(img))
    without = sift.detect_keypoints(sift.build_scale_space(img, SiftParams(edge_ratio_threshold=math.inf)))
    assert not [k for k in with_test if dist(k) <= 2.0]
    kept = {(k.x, k.y) for k in with_test}
    removed = [k for k in without if (k.x, k.y) not in kept]
    assert removed
    # DoG responses of a step sit on its side lobes, about one sigma out
    assert all(dist(k) <= 2.0 + 1.5 * k.sigma for k in removed)


def _ramp(angle_deg, size=64):
    a = math.radians(angle_deg)
    ys, xs = np.mgrid[0:size, 0:size].astype(float)
    c = (size - 1) / 2
    return 0.5 + 0.005 * ((xs - c) * math.cos(a) + (ys - c) * math.sin(a))


def _kp_at(ss, octave, layer, x, y):
    sigma = ss.sigmas[octave][layer]
    f, off = ss.octave_factor(octave), ss.octave_offset()
    return Keypoint(x * f + off, y * f + off, sigma, 0.0, 0.1, octave, layer)


def _oracle_histogram(mag, ang, x, y, sigma_w, radius, nbins=36):
    hist = np.zeros(nbins)
    xi, yi = int(math.floor(x + 0.5)), int(math.floor(y + 0.5))
    for yy in range(yi - radius, yi + radius + 1):
        for xx in range(xi - radius, xi + radius + 1):
            if 1 <= yy < mag.shape[0] - 1 and 1 <= xx < mag.shape[1] - 1:
                w = math.exp(-((xx - xi) ** 2 + (yy - yi) ** 2) / (2 * sigma_w ** 2))
                hist[int(math.floor(ang[yy, xx] * nbins / (2 * math.pi) + 0.5)) % nbins] += w * mag[yy, xx]
    return hist


def _angle_diff(a, b):
    d = (a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def test_orientation_of_ramp():
    ss = sift.build_scale_space(_ramp(30.0))
    kp = _kp_at(ss, 1, 1, 32.0, 32.0)
    oriented = sift.assign_orientations(kp, ss)
    assert len(oriented) >= 1
    x, y, s = ss.to_octave(kp)
    mag, ang = ss.gradients(1, 1)
    hist = _oracle_histogram(mag, ang, x, y, 1.5 * s, int(round(4.5 * s)))
    assert np.allclose(hist, kernels.active().orientation_histogram(mag, ang, x, y, 1.5 * s, int(round(4.5 * s)), 36))
    assert abs(np.argmax(hist) * 10.0 - 30.0) <= 10.0
    assert any(_angle_diff(k.orientation, math.radians(30)) <= math.radians(10) for k in oriented)


def test_orientation_follows_90_degree_rotation(diamond):
    patch = diamond[100:228, 300:428]
    rot = np.rot90(patch)  # (x, y) -> (y, W-1-x), directions turn by -90 degrees
    a, b = sift.build_scale_space(patch), sift.build_scale_space(rot)
    checked = 0
    for (x, y) in [(60.0, 60.0), (50.0, 70.0), (72.0, 58.0)]:
        kpa = _kp_at(a, 1, 2, x, y)
        kpb = Keypoint(kpa.y, 127 - kpa.x, kpa.sigma, 0.0, 0.1, 1, 2)
        oa = sift.assign_orientations(kpa, a)
        ob = sift.assign_orientations(kpb, b)
        xa_, ya_, sa = a.to_octave(kpa)
        ma, an = a.gradients(1, 2)
        top = _oracle_histogram(ma, an, xa_, ya_, 1.5 * sa, int(round(4.5 * sa)))
        dominant = np.argmax(top) * 2 * math.pi / 36
        best_a = min(oa, key=lambda k: _angle_diff(k.orientation, dominant))
        best_b = min(ob, key=lambda k: _angle_diff(k.orientation, best_a.orientation - math.pi / 2))
        assert _angle_diff(best_b.orientation, best_a.orientation - math.pi / 2) <= math.radians(10)
        checked += 1
    assert checked == 3


def test_descriptor_invariants(diamond):
    feats = sift.extract(diamond)
    D = sift.descriptor_matrix(feats)
    assert D.shape[1] == 128
    assert np.allclose(np.linalg.norm(D, axis=1), 1.0, atol=1e-6)
    assert D.min() >= 0.0 and D.max() <= 1.0
    h, w = diamond.shape
    for f in feats:
        k = f.keypoint
        assert 0 <= k.x < w and 0 <= k.y < h
        assert abs(k.response) >= 0.03
        assert 0 <= k.orientation < 2 * math.pi


def test_clipped_components_bounded(small_motif):
    ss = sift.build_scale_space(small_motif)
    n = 0
    for kp in sift.detect_keypoints(ss)[:50]:
        for o in sift.assign_orientations(kp, ss):
            raw = sift.raw_descriptor(o, ss)
            if raw is None:
                continue
            assert sift.clip_descriptor(raw, 0.2).max() <= 0.2 + 1e-9
            n += 1
    assert n > 20


def test_gain_invariance_at_fixed_keypoints(diamond):
    feats = sift.extract(diamond)
    ss = sift.build_scale_space(diamond * 0.6)
    d = []
    for f in feats:
        g = sift.compute_descriptor(f.keypoint, ss)
        d.append(np.linalg.norm(g.descriptor - f.descriptor))
    assert np.mean(np.array(d) < 0.05) >= 0.95


def test_rotation_repeatability(chevron):
    h, w = chevron.shape
    rot = np.rot90(chevron)
    a = [f.keypoint for f in sift.extract(chevron)]
    b = [f.keypoint for f in sift.extract(rot)]
    bx = np.array([[k.x, k.y, k.sigma] for k in b])
    hits = 0
    for k in a:
        x, y = k.y, w - 1 - k.x
        dd = np.hypot(bx[:, 0] - x, bx[:, 1] - y)
        ok = (dd <= 2.0) & (np.abs(np.log2(bx[:, 2] / k.sigma)) <= 1.0)
        hits += bool(ok.any())
    assert hits / len(a) >= 0.5


def test_determinism_and_order(chevron):
    a, b = sift.extract(chevron), sift.extract(chevron)
    assert a == b
    keys = [(f.keypoint.octave, f.keypoint.layer, f.keypoint.y, f.keypoint.x, f.keypoint.orientation) for f in a]
    assert keys == sorted(keys)


@pytest.mark.parametrize("family", list(GOLDEN_COUNTS))
def test_golden_counts(family):
    img = synth.generate_motif(synth.MotifSpec(family))
    assert len(sift.extract(img)) == GOLDEN_COUNTS[family]


def test_feature_json_roundtrip(tmp_path, small_motif):
    feats = sift.extract(small_motif)
    p = SiftParams(edge_ratio_threshold=math.inf)
    path = tmp_path / "f.json"
    sift.save_features(path, feats, p)
    data = json.loads(path.read_text())
    assert set(data["features"][0]) >= {"x", "y", "sigma", "orientation", "response", "descriptor"}
    back, params = sift.load_features(path)
    assert back == feats and params == p


def test_window_outside_image_is_dropped(small_motif):
    ss = sift.build_scale_space(small_motif)
    far = Keypoint(-500.0, -500.0, 2.0, 0.0, 0.1, 0, 1)
    assert sift.compute_descriptor(far, ss) is None
