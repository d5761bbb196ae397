"""Five deformation families, each on a five-level intensity schedule.

Level 1 is always the identity parameterisation; level 5 is the most
intense. Geometric families carry an exact ground-truth homography that maps
template pixel coordinates to deformed-image coordinates.
"""
import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ParameterError
from .image import gaussian_blur, jpeg_roundtrip, normalize_homography, warp_homography

LEVELS = (1, 2, 3, 4, 5)


class Kind(str, Enum):
    BLUR = "Blur"
    COMPRESSION = "Compression"
    LIGHT = "Light"
    ZOOM_ROTATION = "ZoomRotation"
    VIEWPOINT = "Viewpoint"

    @property
    def label(self):
        """Spelling used in report row labels."""
        return "Zoom_Rotation" if self is Kind.ZOOM_ROTATION else self.value

    @property
    def geometric(self):
        return self in (Kind.ZOOM_ROTATION, Kind.VIEWPOINT)

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).replace("_", "").replace("-", "").replace("+", "").lower()
        aliases = {"jpeg": cls.COMPRESSION, "illumination": cls.LIGHT, "zoom": cls.ZOOM_ROTATION}
        if key in aliases:
            return aliases[key]
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ParameterError(f"unknown deformation kind {name!r}; expected one of {[k.value for k in cls]}")


BLUR_SIGMA = (0.0, 2.0, 4.0, 6.0, 8.0)
JPEG_QUALITY = (100, 94, 88, 81, 75)
LIGHT_GAIN = (1.000, 0.825, 0.650, 0.475, 0.300)
ZOOM_ROTATION = ((0.0, 1.0), (11.25, 0.875), (22.5, 0.75), (33.75, 0.625), (45.0, 0.5))
VIEWPOINT_TILT = (0.0, 15.0, 30.0, 45.0, 60.0)


@dataclass(frozen=True)
class DeformationSpec:
    kind: Kind
    level: int
    params: dict

    def to_dict(self):
        return {"kind": self.kind.value, "level": self.level, "params": dict(self.params)}


@dataclass(frozen=True, eq=False)
class DeformedImage:
    image: np.ndarray
    ground_truth: np.ndarray
    spec: DeformationSpec

    def sidecar(self):
        d = self.spec.to_dict()
        d["H"] = [float(v) for v in self.ground_truth.ravel()]
        return d


def schedule(kind, level):
    kind = Kind.parse(kind)
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)) or not 1 <= level <= 5:
        raise ParameterError(f"level must be an integer in 1..5, got {level!r}")
    i = int(level) - 1
    if kind is Kind.BLUR:
        params = {"sigma": BLUR_SIGMA[i]}
    elif kind is Kind.COMPRESSION:
        params = {"quality": JPEG_QUALITY[i]}
    elif kind is Kind.LIGHT:
        params = {"gain": LIGHT_GAIN[i]}
    elif kind is Kind.ZOOM_ROTATION:
        angle, scale = ZOOM_ROTATION[i]
        params = {"angle": angle, "scale": scale}
    else:
        params = {"tilt": VIEWPOINT_TILT[i]}
    return DeformationSpec(kind, int(level), params)


def zoom_rotation_homography(angle_deg, scale, width, height):
    """Rotation by ``angle_deg`` and isotropic ``scale`` about the image centre."""
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    T = np.array([[1.0, 0.0, cx], [0.0, 1.0, cy], [0.0, 0.0, 1.0]])
    Tinv = np.array([[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]])
    R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    S = np.diag([scale, scale, 1.0])
    return T @ R @ S @ Tinv


def _tilt_map(pts, tilt_deg, width, height):
    # planar mat rotated about its vertical axis, pinhole camera at d = f = 2*width
    t = math.radians(tilt_deg)
    f = d = 2.0 * width
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    x = pts[:, 0] - cx
    y = pts[:, 1] - cy
    den = d + x * math.sin(t)
    return np.stack([f * x * math.cos(t) / den + cx, f * y / den + cy], axis=1)


def ground_truth_viewpoint(tilt, width, height):
    if not 0 <= tilt < 90:
        raise ParameterError(f"tilt must lie in [0, 90) degrees, got {tilt}")
    if tilt == 0:
        return np.eye(3)
    corners = np.array([[0.0, 0.0], [width - 1.0, 0.0], [width - 1.0, height - 1.0], [0.0, height - 1.0]])
    mapped = _tilt_map(corners, tilt, width, height)
    # exact 4-point solve with h33 = 1
    A, b = [], []
    for (x, y), (u, v) in zip(corners, mapped):
        A.append([x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y])
        b.append(u)
        A.append([0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y])
        b.append(v)
    h = np.linalg.solve(np.array(A), np.array(b))
    return normalize_homography(np.append(h, 1.0))


def ground_truth(spec, width, height):
    if spec.kind is Kind.ZOOM_ROTATION:
        return zoom_rotation_homography(spec.params["angle"], spec.params["scale"], width, height)
    if spec.kind is Kind.VIEWPOINT:
        return ground_truth_viewpoint(spec.params["tilt"], width, height)
    return np.eye(3)


def apply(img, spec):
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    kind, p = spec.kind, spec.params
    H = ground_truth(spec, w, h)
    if kind is Kind.BLUR:
        out = gaussian_blur(img, p["sigma"])
    elif kind is Kind.COMPRESSION:
        out = jpeg_roundtrip(img, int(p["quality"]))
    elif kind is Kind.LIGHT:
        out = img.copy() if p["gain"] == 1.0 else np.clip(img * p["gain"], 0.0, 1.0)
    elif np.array_equal(H, np.eye(3)):
        out = img.copy()
    else:
        out = warp_homography(img, H)
    return DeformedImage(out, H, spec)


def save_sidecar(path, deformed):
    with open(path, "w") as fh:
        json.dump(deformed.sidecar(), fh, indent=2)
