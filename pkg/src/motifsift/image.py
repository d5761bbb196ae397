"""Pixel-level primitives.

Images are 2-D ``float64`` numpy arrays of shape ``(height, width)`` holding
luminance in ``[0, 1]``. Homographies are 3x3 arrays normalised so that
``H[2, 2] == 1``. Pixel ``(x, y)`` has its centre at integer coordinates.
"""
import io
import math
import os

import numpy as np
from PIL import Image as PILImage

from . import kernels
from .errors import CodecError, DimensionError, GeometryError, InputError, ParameterError

REC601 = (0.299, 0.587, 0.114)


def as_image(samples):
    """Validate and return ``samples`` as a clamped float64 image."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D grid, got shape {arr.shape}")
    if np.any(np.isnan(arr)):
        raise ParameterError("image contains NaN samples")
    return np.clip(arr, 0.0, 1.0)


def to_grayscale(r, g, b):
    r, g, b = (np.asarray(c, dtype=np.float64) for c in (r, g, b))
    if not (r.shape == g.shape == b.shape):
        raise DimensionError(f"channel shapes differ: {r.shape}, {g.shape}, {b.shape}")
    if r.ndim != 2:
        raise DimensionError("channels must be 2-D grids")
    return np.clip(REC601[0] * r + REC601[1] * g + REC601[2] * b, 0.0, 1.0)


def _axis_weights(n_src, n_dst):
    scale = n_src / n_dst
    pos = (np.arange(n_dst) + 0.5) * scale - 0.5
    pos = np.clip(pos, 0.0, n_src - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_src - 1)
    frac = pos - i0
    return i0, i1, frac


def resize_bilinear(img, new_w, new_h):
    """Bilinear resize with pixel-centre alignment and border clamping."""
    if new_w < 1 or new_h < 1:
        raise DimensionError(f"target size must be positive, got {new_w}x{new_h}")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    x0, x1, fx = _axis_weights(w, int(new_w))
    y0, y1, fy = _axis_weights(h, int(new_h))
    rows = img[:, x0] * (1.0 - fx) + img[:, x1] * fx
    out = rows[y0, :] * (1.0 - fy)[:, None] + rows[y1, :] * fy[:, None]
    return np.clip(out, 0.0, 1.0)


def gaussian_kernel(sigma):
    """Normalised 1-D Gaussian truncated at ceil(3 sigma) taps per side."""
    radius = int(math.ceil(3.0 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img, sigma):
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    img = np.asarray(img, dtype=np.float64)
    if sigma == 0:
        return img.copy()
    out = kernels.active().separable_blur(img, gaussian_kernel(sigma))
    return np.clip(out, 0.0, 1.0)


def to_uint8(img):
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def jpeg_roundtrip(img, quality):
    """Encode to baseline JPEG at ``quality`` and decode back."""
    if not (isinstance(quality, (int, np.integer)) and 1 <= quality <= 100):
        raise ParameterError(f"JPEG quality must be an integer in 1..100, got {quality!r}")
    buf = io.BytesIO()
    try:
        PILImage.fromarray(to_uint8(img)).save(buf, format="JPEG", quality=int(quality))
        buf.seek(0)
        with PILImage.open(buf) as decoded:
            arr = np.asarray(decoded.convert("L"), dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise CodecError(f"JPEG round-trip failed at quality {quality}: {exc}") from exc
    return arr / 255.0


def normalize_homography(H):
    H = np.asarray(H, dtype=np.float64).reshape(3, 3)
    if not np.all(np.isfinite(H)):
        raise GeometryError("homography has non-finite coefficients")
    if abs(H[2, 2]) > 1e-15:
        H = H / H[2, 2]
    if abs(np.linalg.det(H)) <= 1e-12:
        raise GeometryError("homography is singular")
    return H


def apply_homography(H, pts):
    """Map an (N, 2) array of (x, y) points through ``H``."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    w = H[2, 0] * pts[:, 0] + H[2, 1] * pts[:, 1] + H[2, 2]
    x = (H[0, 0] * pts[:, 0] + H[0, 1] * pts[:, 1] + H[0, 2]) / w
    y = (H[1, 0] * pts[:, 0] + H[1, 1] * pts[:, 1] + H[1, 2]) / w
    return np.stack([x, y], axis=1)


def warp_homography(img, H):
    """Inverse-map every output pixel through ``H`` and sample bilinearly.

    Samples whose source position falls outside the source pixel extent
    become black.
    """
    img = np.asarray(img, dtype=np.float64)
    H = normalize_homography(H)
    Hinv = np.linalg.inv(H)
    h, w = img.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    den = Hinv[2, 0] * xs + Hinv[2, 1] * ys + Hinv[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = (Hinv[0, 0] * xs + Hinv[0, 1] * ys + Hinv[0, 2]) / den
        sy = (Hinv[1, 0] * xs + Hinv[1, 1] * ys + Hinv[1, 2]) / den
    valid = np.isfinite(sx) & np.isfinite(sy) & (den > 0)
    valid &= (sx >= -0.5) & (sx <= w - 0.5) & (sy >= -0.5) & (sy <= h - 0.5)
    sx = np.where(valid, np.clip(sx, 0.0, w - 1), 0.0)
    sy = np.where(valid, np.clip(sy, 0.0, h - 1), 0.0)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    out = (img[y0, x0] * (1.0 - fx) * (1.0 - fy) + img[y0, x1] * fx * (1.0 - fy)
           + img[y1, x0] * (1.0 - fx) * fy + img[y1, x1] * fx * fy)
    out[~valid] = 0.0
    return np.clip(out, 0.0, 1.0)


def read_image(path):
    """Read a PNG or JPEG file as a grayscale image (RGB goes through Rec.601)."""
    try:
        with PILImage.open(path) as im:
            im.load()
            if im.mode in ("RGB", "RGBA", "P", "CMYK", "YCbCr"):
                rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
                return to_grayscale(rgb[..., 0], rgb[..., 1], rgb[..., 2])
            if im.mode in ("I;16", "I;16B", "I"):
                return as_image(np.asarray(im, dtype=np.float64) / 65535.0)
            return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read image {os.fspath(path)!r}: {exc}") from exc


def write_image(path, img, quality=95):
    """Write an 8-bit grayscale PNG, or JPEG when the suffix says so."""
    suffix = os.path.splitext(os.fspath(path))[1].lower()
    fmt = "JPEG" if suffix in (".jpg", ".jpeg") else "PNG"
    kwargs = {"quality": int(quality)} if fmt == "JPEG" else {}
    try:
        PILImage.fromarray(to_uint8(img)).save(path, format=fmt, **kwargs)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot write image {os.fspath(path)!r}: {exc}") from exc

