"""SIFT: Gaussian scale space, DoG extrema, orientations and 128-d descriptors.

Coordinates follow the pixel-centre convention of :mod:`motifsift.image`.
Keypoint positions and scales are reported in original-image pixels; the
per-octave working values are recovered with :meth:`ScaleSpace.to_octave`.
"""
import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ParameterError, SizeError
from .image import as_image, gaussian_blur, resize_bilinear

MIN_OCTAVE_SIZE = 16
# keeps the 3x3x3 neighbourhood and derivative stencils inside the DoG layer
IMAGE_BORDER = 5


@dataclass(frozen=True)
class SiftParams:
    intervals_per_octave: int = 3
    base_sigma: float = 1.6
    assumed_camera_sigma: float = 0.5
    upsample_first_octave: bool = True
    contrast_threshold: float = 0.03
    # math.inf disables the edge (Hessian ratio) test entirely
    edge_ratio_threshold: float = 10.0
    orientation_bins: int = 36
    orientation_peak_ratio: float = 0.8
    descriptor_grid_width: int = 4
    descriptor_orientation_bins: int = 8
    descriptor_clip: float = 0.2
    max_refine_iterations: int = 5

    def __post_init__(self):
        counts = ("intervals_per_octave", "orientation_bins", "descriptor_grid_width",
                  "descriptor_orientation_bins", "max_refine_iterations")
        for name in counts:
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} must be >= 1")
        for name in ("base_sigma", "contrast_threshold", "edge_ratio_threshold", "descriptor_clip"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0")
        if self.assumed_camera_sigma < 0:
            raise ParameterError("assumed_camera_sigma must be >= 0")
        if not 0 < self.orientation_peak_ratio <= 1:
            raise ParameterError("orientation_peak_ratio must lie in (0, 1]")

    @property
    def descriptor_length(self):
        return self.descriptor_grid_width ** 2 * self.descriptor_orientation_bins

    def to_dict(self):
        d = dataclasses.asdict(self)
        if math.isinf(d["edge_ratio_threshold"]):
            d["edge_ratio_threshold"] = None
        return d

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown SIFT parameters: {sorted(unknown)}")
        if "edge_ratio_threshold" in data and data["edge_ratio_threshold"] is None:
            data["edge_ratio_threshold"] = math.inf
        return cls(**data)


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    sigma: float
    orientation: float
    response: float
    octave: int
    layer: int


@dataclass(frozen=True, eq=False)
class Feature:
    keypoint: Keypoint
    descriptor: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Feature):
            return NotImplemented
        return self.keypoint == other.keypoint and np.array_equal(self.descriptor, other.descriptor)

    __hash__ = None


@dataclass
class ScaleSpace:
    """Gaussian layers and their differences, one list entry per octave.

    ``sigmas[o][i]`` is the absolute blur of ``gaussians[o][i]`` in
    original-image pixels.
    """
    gaussians: list
    sigmas: list
    dog: list
    params: SiftParams
    image_shape: tuple
    upsampled: bool
    _gradients: dict = field(default_factory=dict, repr=False)

    @property
    def n_octaves(self):
        return len(self.gaussians)

    def octave_factor(self, octave):
        """Original-image pixels per octave pixel."""
        return 2.0 ** octave * (0.5 if self.upsampled else 1.0)

    def octave_offset(self):
        return -0.25 if self.upsampled else 0.0

    def to_original(self, octave, x, y, sigma):
        f = self.octave_factor(octave)
        off = self.octave_offset()
        return x * f + off, y * f + off, sigma * f

    def to_octave(self, kp):
        f = self.octave_factor(kp.octave)
        off = self.octave_offset()
        return (kp.x - off) / f, (kp.y - off) / f, kp.sigma / f

    def gradients(self, octave, layer):
        """Central-difference gradient magnitude and angle in [0, 2*pi)."""
        key = (octave, layer)
        if key not in self._gradients:
            img = self.gaussians[octave][layer]
            dx = np.zeros_like(img)
            dy = np.zeros_like(img)
            dx[:, 1:-1] = img[:, 2:] - img[:, :-2]
            dy[1:-1, :] = img[2:, :] - img[:-2, :]
            mag = np.hypot(dx, dy)
            ang = np.mod(np.arctan2(dy, dx), 2.0 * math.pi)
            self._gradients[key] = (mag, ang)
        return self._gradients[key]


def build_scale_space(img, p=None):
    p = p or SiftParams()
    img = as_image(img)
    h, w = img.shape
    if min(h, w) < MIN_OCTAVE_SIZE:
        raise SizeError(f"image {w}x{h} is smaller than the {MIN_OCTAVE_SIZE} px minimum")
    s = p.intervals_per_octave
    if p.upsample_first_octave:
        base = resize_bilinear(img, 2 * w, 2 * h)
        blur_have = 2.0 * p.assumed_camera_sigma
    else:
        base = img.copy()
        blur_have = p.assumed_camera_sigma
    init = math.sqrt(max(p.base_sigma ** 2 - blur_have ** 2, 0.01))
    base = gaussian_blur(base, init)

    # per-octave relative sigmas and the incremental blurs between them
    rel = [p.base_sigma * 2.0 ** (i / s) for i in range(s + 3)]
    incr = [math.sqrt(rel[i] ** 2 - rel[i - 1] ** 2) for i in range(1, s + 3)]
    o_shift = -1 if p.upsample_first_octave else 0

    gaussians, sigmas, dogs = [], [], []
    octave = 0
    while min(base.shape) >= MIN_OCTAVE_SIZE:
        layers = [base]
        for inc in incr:
            layers.append(gaussian_blur(layers[-1], inc))
        gaussians.append(layers)
        sigmas.append([p.base_sigma * 2.0 ** (octave + o_shift + i / s) for i in range(s + 3)])
        dogs.append(np.diff(np.stack(layers), axis=0))
        nxt = layers[s]
        hh, ww = nxt.shape[0] // 2, nxt.shape[1] // 2
        base = nxt[0:2 * hh:2, 0:2 * ww:2].copy()
        octave += 1
    return ScaleSpace(gaussians, sigmas, dogs, p, (h, w), p.upsample_first_octave)


def detect_keypoints(ss, p=None):
    """DoG extrema, refined to subpixel accuracy; orientation left at 0."""
    p = p or ss.params
    k = kernels.active()
    s = p.intervals_per_octave
    h, w = ss.image_shape
    out = []
    for octave, dog in enumerate(ss.dog):
        layers, ys, xs = [], [], []
        for layer in range(1, s + 1):
            cy, cx = k.extrema_candidates(dog, layer, IMAGE_BORDER, 0.5 * p.contrast_threshold)
            layers.append(np.full(cy.shape, layer, dtype=np.intp))
            ys.append(cy)
            xs.append(cx)
        if not any(len(c) for c in ys):
            continue
        rows = k.refine_candidates(dog, np.concatenate(layers), np.concatenate(ys), np.concatenate(xs),
                                   IMAGE_BORDER, p.contrast_threshold, p.edge_ratio_threshold,
                                   p.max_refine_iterations)
        seen = set()
        for l, iy, ix, ox, oy, os_, value in rows.tolist():
            anchor = (int(l), int(iy), int(ix))
            # several candidates can converge onto one anchor
            if anchor in seen:
                continue
            seen.add(anchor)
            sigma_oct = p.base_sigma * 2.0 ** ((l + os_) / s)
            x, y, sigma = ss.to_original(octave, ix + ox, iy + oy, sigma_oct)
            if not (0.0 <= x < w and 0.0 <= y < h):
                continue
            out.append(Keypoint(x, y, sigma, 0.0, value, octave, int(l)))
    return out


def assign_orientations(kp, ss, p=None):
    p = p or ss.params
    x, y, sigma_oct = ss.to_octave(kp)
    mag, ang = ss.gradients(kp.octave, kp.layer)
    sigma_w = 1.5 * sigma_oct
    radius = int(round(3.0 * sigma_w))
    n = p.orientation_bins
    hist = kernels.active().orientation_histogram(mag, ang, x, y, sigma_w, radius, n)
    top = int(np.argmax(hist))
    peak = hist[top]
    if peak <= 0:
        return [dataclasses.replace(kp, orientation=0.0)]
    ring = np.concatenate((hist[-1:], hist, hist[:1]))
    left, right = ring[:-2], ring[2:]
    # the global maximum always counts, other bins must be strict local peaks
    is_peak = (hist > left) & (hist > right)
    is_peak[top] = True
    result = []
    for i in np.nonzero(is_peak & (hist >= p.orientation_peak_ratio * peak))[0].tolist():
        l, c, r = hist[i - 1], hist[i], hist[(i + 1) % n]
        denom = l - 2.0 * c + r
        shift = 0.5 * (l - r) / denom if denom != 0 else 0.0
        theta = math.fmod(2.0 * math.pi * (i + shift) / n, 2.0 * math.pi)
        if theta < 0:
            theta += 2.0 * math.pi
        if theta >= 2.0 * math.pi:
            theta = 0.0
        result.append(dataclasses.replace(kp, orientation=theta))
    return result


def raw_descriptor(kp, ss, p=None):
    """Unnormalised trilinear gradient histogram, or None if no sample fell in the window."""
    p = p or ss.params
    x, y, sigma_oct = ss.to_octave(kp)
    mag, ang = ss.gradients(kp.octave, kp.layer)
    d = p.descriptor_grid_width
    hist_width = 3.0 * sigma_oct
    radius = int(round(hist_width * math.sqrt(2.0) * (d + 1) * 0.5))
    radius = min(radius, int(math.hypot(*mag.shape)))
    vec, count = kernels.active().descriptor_histogram(
        mag, ang, x, y, kp.orientation, hist_width, radius, d, p.descriptor_orientation_bins)
    if count == 0:
        return None
    return vec


def clip_descriptor(raw, clip):
    """First normalisation plus clipping; the input to the final renormalisation."""
    norm = math.sqrt(raw @ raw)
    if not norm > 0:
        return None
    return np.minimum(raw / norm, clip)


def normalize_descriptor(raw, clip):
    clipped = clip_descriptor(raw, clip)
    if clipped is None:
        return None
    return clipped / math.sqrt(clipped @ clipped)


def compute_descriptor(kp, ss, p=None):
    """Feature for an oriented keypoint, or None when it has to be dropped."""
    p = p or ss.params
    raw = raw_descriptor(kp, ss, p)
    if raw is None:
        return None
    desc = normalize_descriptor(raw, p.descriptor_clip)
    if desc is None:
        return None
    return Feature(kp, desc)


def _order(f):
    k = f.keypoint
    return (k.octave, k.layer, k.y, k.x, k.orientation)


def extract(img, p=None):
    p = p or SiftParams()
    ss = build_scale_space(img, p)
    features = []
    for kp in detect_keypoints(ss, p):
        for oriented in assign_orientations(kp, ss, p):
            feat = compute_descriptor(oriented, ss, p)
            if feat is not None:
                features.append(feat)
    features.sort(key=_order)
    return features


def descriptor_matrix(features):
    if not features:
        return np.zeros((0, SiftParams().descriptor_length))
    return np.stack([f.descriptor for f in features])


def keypoint_array(features):
    """(N, 2) array of (x, y) positions."""
    if not features:
        return np.zeros((0, 2))
    return np.array([(f.keypoint.x, f.keypoint.y) for f in features], dtype=np.float64)


def features_to_dict(features, p=None):
    p = p or SiftParams()
    return {
        "params": p.to_dict(),
        "features": [
            {
                "x": f.keypoint.x,
                "y": f.keypoint.y,
                "sigma": f.keypoint.sigma,
                "orientation": f.keypoint.orientation,
                "response": f.keypoint.response,
                "octave": f.keypoint.octave,
                "layer": f.keypoint.layer,
                "descriptor": [float(v) for v in f.descriptor],
            }
            for f in features
        ],
    }


def features_from_dict(data):
    params = SiftParams.from_dict(data.get("params"))
    features = []
    for row in data["features"]:
        kp = Keypoint(float(row["x"]), float(row["y"]), float(row["sigma"]),
                      float(row["orientation"]), float(row["response"]),
                      int(row.get("octave", 0)), int(row.get("layer", 0)))
        features.append(Feature(kp, np.asarray(row["descriptor"], dtype=np.float64)))
    return features, params


def save_features(path, features, p=None):
    with open(path, "w") as fh:
        json.dump(features_to_dict(features, p), fh)


def load_features(path):
    with open(path) as fh:
        return features_from_dict(json.load(fh))
