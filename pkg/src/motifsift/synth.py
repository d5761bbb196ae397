"""Deterministic two-tone motif imagery in the spirit of plaited mats.

Every family renders a binary pattern that is mapped to the tones
``0.5 -/+ contrast/2`` and framed by rows of alternating twill.
"""
import dataclasses
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ParameterError
from .image import gaussian_blur


class Family(str, Enum):
    CHEVRON = "Chevron"
    DIAGONAL_TWILL = "DiagonalTwill"
    SYMMETRIC_DIAMOND = "SymmetricDiamond"
    REPETITIVE_TILE = "RepetitiveTile"
    NON_GEOMETRIC = "NonGeometric"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).replace("_", "").replace("-", "").lower()
        for fam in cls:
            if fam.value.lower() == key:
                return fam
        raise ParameterError(f"unknown motif family {name!r}; expected one of {[f.value for f in cls]}")


GEOMETRIC_FAMILIES = (Family.CHEVRON, Family.DIAGONAL_TWILL, Family.SYMMETRIC_DIAMOND, Family.REPETITIVE_TILE)


@dataclass(frozen=True)
class MotifSpec:
    family: Family = Family.CHEVRON
    width: int = 800
    height: int = 355
    period: int = 16
    contrast: float = 0.8
    border_rows: int = 2
    seed: int = 0
    smooth: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if self.width < 64 or self.height < 64:
            raise ParameterError(f"motif canvas must be at least 64x64, got {self.width}x{self.height}")
        if self.period < 4:
            raise ParameterError(f"period must be >= 4 px, got {self.period}")
        if not 0 < self.contrast <= 1:
            raise ParameterError(f"contrast must lie in (0, 1], got {self.contrast}")
        if self.border_rows < 0:
            raise ParameterError("border_rows must be >= 0")

    @property
    def strip(self):
        """Thickness of one twill frame row in pixels."""
        return max(2, self.period // 2)

    @property
    def frame_width(self):
        return self.border_rows * self.strip

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["family"] = self.family.value
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown motif fields: {sorted(unknown)}")
        return cls(**data)


def _centred_grid(w, h):
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return xs + 0.5 - w / 2.0, ys + 0.5 - h / 2.0


def _chevron(spec, rng):
    xc, yc = _centred_grid(spec.width, spec.height)
    # bands at roughly 27 degrees, folded about the vertical midline
    return np.floor((0.5 * np.abs(xc) + yc) / (spec.period / 2.0)).astype(np.int64) % 2


def _twill(spec, rng):
    ys, xs = np.mgrid[0:spec.height, 0:spec.width]
    # repeats every `period` steps along the (1, 1) diagonal
    return ((xs + ys) // spec.period) % 2


def _diamond(spec, rng):
    xc, yc = _centred_grid(spec.width, spec.height)
    ax, ay = np.abs(xc), np.abs(yc)
    rings = np.floor((ax + ay) / (spec.period / 2.0)).astype(np.int64)
    blocks = np.floor(np.maximum(ax, ay) / (2.0 * spec.period)).astype(np.int64)
    return (rings + blocks) % 2


def _random_cell(rng, m):
    while True:
        cell = rng.integers(0, 2, size=(m, m))
        if 0 < cell.sum() < m * m:
            return cell


def _tile(cell, step, w, h):
    ys, xs = np.mgrid[0:h, 0:w]
    m = cell.shape[0]
    return cell[(ys // step) % m, (xs // step) % m]


def _repetitive(spec, rng):
    m = 4
    step = max(1, spec.period // m)
    outer = _tile(_random_cell(rng, m), step, spec.width, spec.height)
    inner = _tile(_random_cell(rng, m), step, spec.width, spec.height)
    ys, xs = np.mgrid[0:spec.height, 0:spec.width]
    # central "pulau" field carries the second tile
    pulau = ((xs >= spec.width // 4) & (xs < 3 * spec.width // 4)
             & (ys >= spec.height // 4) & (ys < 3 * spec.height // 4))
    return np.where(pulau, inner, outer)


def _value_noise(rng, w, h, spacing):
    gw, gh = w // spacing + 2, h // spacing + 2
    grid = rng.random((gh, gw))
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    gx, gy = xs / spacing, ys / spacing
    x0, y0 = np.floor(gx).astype(np.intp), np.floor(gy).astype(np.intp)
    tx, ty = gx - x0, gy - y0
    tx = tx * tx * (3.0 - 2.0 * tx)
    ty = ty * ty * (3.0 - 2.0 * ty)
    top = grid[y0, x0] * (1 - tx) + grid[y0, x0 + 1] * tx
    bot = grid[y0 + 1, x0] * (1 - tx) + grid[y0 + 1, x0 + 1] * tx
    return top * (1 - ty) + bot * ty


def _nongeometric(spec, rng):
    field = _value_noise(rng, spec.width, spec.height, 2 * spec.period)
    field = field + 0.5 * _value_noise(rng, spec.width, spec.height, spec.period)
    blobs = field > np.median(field)
    # figure and ground differ only in strip direction (weft- vs warp-dominant),
    # so the motif carries no flat-toned regions
    strip = max(2, spec.period // 2)
    ys, xs = np.mgrid[0:spec.height, 0:spec.width]
    return np.where(blobs, (ys // strip) % 2, (xs // strip) % 2)


_RENDERERS = {
    Family.CHEVRON: _chevron,
    Family.DIAGONAL_TWILL: _twill,
    Family.SYMMETRIC_DIAMOND: _diamond,
    Family.REPETITIVE_TILE: _repetitive,
    Family.NON_GEOMETRIC: _nongeometric,
}


def frame_mask(spec):
    """True on pixels that belong to the twill frame."""
    ys, xs = np.mgrid[0:spec.height, 0:spec.width]
    dist = np.minimum(np.minimum(xs, spec.width - 1 - xs), np.minimum(ys, spec.height - 1 - ys))
    return dist < spec.frame_width


def _frame(spec):
    w, h, strip = spec.width, spec.height, spec.strip
    ys, xs = np.mgrid[0:h, 0:w]
    dx = np.minimum(xs, w - 1 - xs)
    dy = np.minimum(ys, h - 1 - ys)
    dist = np.minimum(dx, dy)
    row = dist // strip
    along = np.where(dy <= dx, xs, ys)
    # alternate the twill phase from one frame row to the next
    return ((along + row * (strip // 2)) // strip + row) % 2


def generate_motif(spec):
    rng = np.random.default_rng(spec.seed)
    pattern = _RENDERERS[spec.family](spec, rng)
    if spec.border_rows:
        pattern = np.where(frame_mask(spec), _frame(spec), pattern)
    lo, hi = 0.5 - spec.contrast / 2.0, 0.5 + spec.contrast / 2.0
    img = np.where(pattern.astype(bool), hi, lo).astype(np.float64)
    if spec.smooth:
        img = gaussian_blur(img, 0.5)
    return img


DEFAULT_CLASSES = (
    ("chevron", MotifSpec(Family.CHEVRON, seed=0)),
    ("diagonal_twill", MotifSpec(Family.DIAGONAL_TWILL, seed=0)),
    ("symmetric_diamond", MotifSpec(Family.SYMMETRIC_DIAMOND, seed=0)),
    ("repetitive_tile_1", MotifSpec(Family.REPETITIVE_TILE, seed=1)),
    ("repetitive_tile_2", MotifSpec(Family.REPETITIVE_TILE, seed=2)),
    ("non_geometric_1", MotifSpec(Family.NON_GEOMETRIC, seed=1)),
    ("non_geometric_2", MotifSpec(Family.NON_GEOMETRIC, seed=2)),
)


def save_spec(path, spec):
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
