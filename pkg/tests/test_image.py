import math

import numpy as np
import pytest

from motifsift import image, kernels
from motifsift.errors import DimensionError, GeometryError, InputError, ParameterError


def test_as_image_clamps_and_validates():
    out = image.as_image([[-0.5, 0.5], [1.5, 1.0]])
    assert out.dtype == np.float64
    assert np.array_equal(out, [[0.0, 0.5], [1.0, 1.0]])
    with pytest.raises(DimensionError):
        image.as_image(np.zeros(5))
    with pytest.raises(DimensionError):
        image.as_image(np.zeros((0, 3)))
    with pytest.raises(ParameterError):
        image.as_image([[np.nan, 0.0]])


def test_grayscale_rec601():
    r = np.full((2, 2), 1.0)
    z = np.zeros((2, 2))
    assert np.allclose(image.to_grayscale(r, z, z), 0.299)
    assert np.allclose(image.to_grayscale(r, r, r), 1.0)
    with pytest.raises(DimensionError):
        image.to_grayscale(r, z, np.zeros((3, 2)))


def _bilinear_oracle(img, new_w, new_h):
    # direct evaluation of the pixel-centre mapping, one sample at a time
    h, w = img.shape
    out = np.zeros((new_h, new_w))
    for j in range(new_h):
        for i in range(new_w):
            sx = min(max((i + 0.5) * w / new_w - 0.5, 0.0), w - 1.0)
            sy = min(max((j + 0.5) * h / new_h - 0.5, 0.0), h - 1.0)
            x0, y0 = int(math.floor(sx)), int(math.floor(sy))
            x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
            fx, fy = sx - x0, sy - y0
            out[j, i] = (img[y0, x0] * (1 - fx) * (1 - fy) + img[y0, x1] * fx * (1 - fy)
                         + img[y1, x0] * (1 - fx) * fy + img[y1, x1] * fx * fy)
    return out


def test_resize_ramp_matches_oracle():
    ramp = np.tile(np.linspace(0.0, 1.0, 4), (4, 1))
    got = image.resize_bilinear(ramp, 2, 4)
    assert got.shape == (4, 2)
    assert np.max(np.abs(got - _bilinear_oracle(ramp, 2, 4))) < 1e-6


@pytest.mark.parametrize("shape", [(7, 5, 13, 9), (10, 10, 20, 20), (9, 16, 4, 3)])
def test_resize_random_matches_oracle(rng, shape):
    h, w, nh, nw = shape
    img = rng.random((h, w))
    assert np.max(np.abs(image.resize_bilinear(img, nw, nh) - _bilinear_oracle(img, nw, nh))) < 1e-12


def test_resize_rejects_bad_size():
    with pytest.raises(DimensionError):
        image.resize_bilinear(np.zeros((4, 4)), 0, 3)


def test_gaussian_kernel_formula():
    k = image.gaussian_kernel(2.0)
    r = math.ceil(3 * 2.0)
    raw = np.exp(-np.arange(-r, r + 1) ** 2 / (2 * 4.0))
    assert k.size == 2 * r + 1
    assert np.allclose(k, raw / raw.sum(), atol=1e-15)


def test_impulse_response_is_the_kernel():
    img = np.zeros((33, 33))
    img[16, 16] = 1.0
    out = image.gaussian_blur(img, 2.0)
    k = image.gaussian_kernel(2.0)
    r = (k.size - 1) // 2
    assert abs(out[16, 16] - k[r] * k[r]) < 1e-9
    assert abs(out[16, 19] - k[r] * k[r + 3]) < 1e-9
    assert abs(out[14, 17] - k[r + 2] * k[r + 1]) < 1e-9
    assert abs(out.sum() - 1.0) < 1e-9


def test_blur_sigma_zero_is_copy(rng):
    img = rng.random((8, 9))
    out = image.gaussian_blur(img, 0.0)
    assert np.array_equal(out, img) and out is not img
    with pytest.raises(ParameterError):
        image.gaussian_blur(img, -1.0)


def test_blur_constant_image_unchanged():
    img = np.full((20, 30), 0.37)
    assert np.allclose(image.gaussian_blur(img, 3.0), 0.37, atol=1e-12)


@pytest.mark.parametrize("quality,tol", [(100, 2 / 255), (75, 4 / 255)])
def test_jpeg_constant_image(quality, tol):
    out = image.jpeg_roundtrip(np.full((32, 48), 0.5), quality)
    assert np.max(np.abs(out - 0.5)) <= tol + 1e-12


def test_jpeg_texture_psnr(rng):
    base = image.gaussian_blur(rng.random((96, 128)), 1.5)
    out = image.jpeg_roundtrip(base, 75)
    mse = np.mean((out - base) ** 2)
    assert 10 * math.log10(1.0 / mse) > 25


@pytest.mark.parametrize("q", [0, 101, 50.5])
def test_jpeg_bad_quality(q):
    with pytest.raises(ParameterError):
        image.jpeg_roundtrip(np.zeros((8, 8)), q)


def test_homography_normalisation():
    H = image.normalize_homography(2.0 * np.eye(3))
    assert np.array_equal(H, np.eye(3))
    with pytest.raises(GeometryError):
        image.normalize_homography(np.zeros((3, 3)))
    with pytest.raises(GeometryError):
        image.warp_homography(np.zeros((4, 4)), np.diag([1.0, 0.0, 1.0]))


def test_warp_identity_and_translation(rng):
    img = rng.random((20, 24))
    assert np.allclose(image.warp_homography(img, np.eye(3)), img)
    T = np.array([[1.0, 0, 3], [0, 1.0, 2], [0, 0, 1]])
    out = image.warp_homography(img, T)
    assert np.allclose(out[2:, 3:], img[:-2, :-3])
    assert np.all(out[:2, :] == 0) and np.all(out[:, :3] == 0)


def _rotation_about_centre(deg, w, h):
    cx, cy = (w - 1) / 2, (h - 1) / 2
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, cx - c * cx + s * cy], [s, c, cy - s * cx - c * cy], [0, 0, 1]])


def test_warp_rotation_composition(rng):
    img = image.gaussian_blur(rng.random((40, 40)), 1.0)
    R90 = _rotation_about_centre(90, 40, 40)
    twice = image.warp_homography(image.warp_homography(img, R90), R90)
    direct = image.warp_homography(img, _rotation_about_centre(180, 40, 40))
    assert np.max(np.abs(twice - direct)) <= 2 / 255
    # and 90 degrees on a square grid is a lossless transpose-flip
    assert np.allclose(image.warp_homography(img, R90), np.rot90(img, -1), atol=1e-9)


def test_apply_homography_points():
    H = np.array([[2.0, 0, 1], [0, 3.0, -1], [0, 0, 1]])
    pts = image.apply_homography(H, [[0, 0], [1, 2]])
    assert np.allclose(pts, [[1, -1], [3, 5]])


def test_read_write_roundtrip(tmp_path, rng):
    img = np.round(rng.random((12, 17)) * 255) / 255
    path = tmp_path / "x.png"
    image.write_image(path, img)
    assert np.array_equal(image.read_image(path), img)


def test_read_rgb_and_16bit(tmp_path):
    from PIL import Image as PILImage
    rgb = np.zeros((4, 5, 3), dtype=np.uint8)
    rgb[..., 0] = 255
    PILImage.fromarray(rgb).save(tmp_path / "rgb.png")
    assert np.allclose(image.read_image(tmp_path / "rgb.png"), 0.299)
    deep = np.full((4, 5), 65535, dtype=np.uint16)
    PILImage.fromarray(deep).save(tmp_path / "deep.png")
    assert np.allclose(image.read_image(tmp_path / "deep.png"), 1.0)


def test_read_missing_and_corrupt(tmp_path):
    with pytest.raises(InputError):
        image.read_image(tmp_path / "nope.png")
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(InputError):
        image.read_image(bad)


def test_blur_uses_active_backend(rng):
    img = rng.random((30, 40))
    outs = []
    for name in kernels.available():
        with kernels.using(name):
            outs.append(image.gaussian_blur(img, 1.7))
    for o in outs[1:]:
        assert np.allclose(o, outs[0], atol=1e-12)
