"""Deformation-robustness benchmark: retained positive matches per cell.

A cell is one (class, deformation kind, level, threshold) combination. The
template is matched against its deformed copy and the number of template
features whose nearest query descriptor lies within the threshold is
reported as a percentage of the template feature count.
"""
import csv
import dataclasses
import json
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import deform, synth
from .deform import Kind
from .errors import (DegenerateCellError, DegenerateGeometryError, EmptySelectionError,
                     InputError, InsufficientDataError, ParameterError)
from .image import as_image, read_image, write_image
from .matching import (DEFAULT_THRESHOLDS, match_features, matches_from_neighbors,
                       nearest_neighbors, ransac_homography)
from .sift import SiftParams, descriptor_matrix, extract

log = logging.getLogger(__name__)

CSV_COLUMNS = ("class", "kind", "level", "threshold", "template_features", "query_features",
               "positive_matches", "retained_pct", "ransac_inliers", "seed")


@dataclass(frozen=True)
class BenchmarkRecord:
    class_name: str
    kind: Kind
    level: int
    threshold: float
    template_features: int
    query_features: int
    positive_matches: int
    retained_pct: float
    ransac_inliers: Optional[int] = None
    seed: int = 0

    @property
    def label(self):
        """Row label in the ``<Kind>-<level>_sift <threshold>`` grammar."""
        return f"{self.kind.label}-{self.level}_sift {format_threshold(self.threshold)}"

    def __eq__(self, other):
        if not isinstance(other, BenchmarkRecord):
            return NotImplemented
        a, b = dataclasses.astuple(self), dataclasses.astuple(other)
        # NaN marks a degenerate cell; two degenerate cells compare equal
        return all(x == y or (isinstance(x, float) and isinstance(y, float)
                              and math.isnan(x) and math.isnan(y)) for x, y in zip(a, b))

    __hash__ = None


def format_threshold(t):
    return f"{float(t):g}"


def retained_percentage(positive, template_count):
    return 100.0 * positive / template_count


def cell_seed(suite_seed, class_name, kind, level):
    """Per-cell RANSAC seed, a pure function of the cell identity."""
    key = f"{int(suite_seed)}|{class_name}|{Kind.parse(kind).value}|{int(level)}"
    return zlib.crc32(key.encode("utf-8"))


@dataclass(frozen=True)
class RansacConfig:
    enabled: bool = True
    seed: int = 0
    iterations: int = 1000
    inlier_threshold: float = 3.0


@dataclass(frozen=True)
class ClassSource:
    name: str
    path: Optional[str] = None
    motif: Optional[synth.MotifSpec] = None

    def load(self):
        if self.motif is not None:
            return synth.generate_motif(self.motif)
        try:
            return read_image(self.path)
        except InputError as exc:
            raise InputError(f"class {self.name!r}: {exc}") from exc


@dataclass(frozen=True)
class SuiteConfig:
    classes: tuple
    kinds: tuple = tuple(Kind)
    levels: tuple = deform.LEVELS
    thresholds: tuple = DEFAULT_THRESHOLDS
    sift: SiftParams = field(default_factory=SiftParams)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    csv: Optional[str] = None
    markdown: Optional[str] = None
    deformed_dir: Optional[str] = None
    viz_dir: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(Kind.parse(k) for k in self.kinds))
        object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if not (self.classes and self.kinds and self.levels and self.thresholds):
            raise ParameterError("a suite needs at least one class, kind, level and threshold")
        if list(self.thresholds) != sorted(self.thresholds):
            raise ParameterError(f"thresholds must be sorted ascending, got {list(self.thresholds)}")
        if any(not t > 0 for t in self.thresholds):
            raise ParameterError("thresholds must be > 0")
        for lv in self.levels:
            if not 1 <= lv <= 5:
                raise ParameterError(f"levels must lie in 1..5, got {lv}")
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise ParameterError("class names must be unique")

    @classmethod
    def from_dict(cls, data, base_dir="."):
        data = dict(data)
        classes = []
        for i, entry in enumerate(data.pop("classes", [])):
            name = entry.get("name") or f"class_{i}"
            if "motif" in entry:
                classes.append(ClassSource(name, motif=synth.MotifSpec.from_dict(entry["motif"])))
            elif "path" in entry:
                classes.append(ClassSource(name, path=os.path.join(base_dir, entry["path"])))
            else:
                raise ParameterError(f"class entry {name!r} needs a 'path' or a 'motif'")
        outputs = data.pop("outputs", {}) or {}
        kw = {
            "classes": tuple(classes),
            "sift": SiftParams.from_dict(data.pop("sift", None)),
            "ransac": RansacConfig(**(data.pop("ransac", None) or {})),
            "csv": outputs.get("csv"),
            "markdown": outputs.get("markdown"),
            "deformed_dir": outputs.get("deformed_dir"),
            "viz_dir": outputs.get("viz_dir"),
        }
        for key in ("kinds", "levels", "thresholds", "jobs"):
            if key in data:
                kw[key] = data.pop(key)
        data.pop("name", None)
        data.pop("description", None)
        if data:
            raise ParameterError(f"unknown suite config keys: {sorted(data)}")
        return cls(**kw)


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {os.fspath(path)!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config {os.fspath(path)!r} is not valid JSON: {exc}") from exc
    return SuiteConfig.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


def default_config_path():
    return os.path.join(os.path.dirname(__file__), "data", "default_synth.json")


# ------------------------------------------------------------------ cells

def _ransac_count(matches, tpos, qpos, seed, rc):
    try:
        v = ransac_homography(matches, tpos, qpos, rc.iterations, rc.inlier_threshold, seed)
    except (InsufficientDataError, DegenerateGeometryError):
        return 0
    return len(v.inliers)


def run_cell(template, class_name, spec, threshold, p=None, ransac_seed=None):
    """Evaluate one cell from scratch.

    ``ransac_seed`` switches on RANSAC verification with that seed.
    """
    p = p or SiftParams()
    template = as_image(template)
    tfeat = extract(template, p)
    if not tfeat:
        raise DegenerateCellError(class_name)
    query = deform.apply(template, spec).image
    qfeat = extract(query, p)
    matches = match_features(tfeat, qfeat, threshold)
    inliers = None
    if ransac_seed is not None:
        inliers = _ransac_count(matches, tfeat, qfeat, ransac_seed, RansacConfig(seed=ransac_seed))
    return BenchmarkRecord(class_name, spec.kind, spec.level, float(threshold), len(tfeat), len(qfeat),
                           len(matches), retained_percentage(len(matches), len(tfeat)), inliers,
                           int(ransac_seed or 0))


@dataclass
class _Packed:
    # features reduced to arrays so they pickle cheaply across processes
    desc: np.ndarray
    pos: np.ndarray
    sigma: np.ndarray

    @classmethod
    def of(cls, features):
        return cls(descriptor_matrix(features),
                   np.array([(f.keypoint.x, f.keypoint.y) for f in features]).reshape(-1, 2),
                   np.array([f.keypoint.sigma for f in features], dtype=np.float64))

    def __len__(self):
        return len(self.desc)


def _degenerate_records(name, spec, thresholds, seed):
    return [BenchmarkRecord(name, spec.kind, spec.level, t, 0, 0, 0, math.nan, None, seed)
            for t in thresholds]


def _evaluate_image(task):
    """All threshold cells for one deformed image; nearest neighbours are shared."""
    name, template, tpack, spec, cfg = task
    seed = cell_seed(cfg.ransac.seed, name, spec.kind, spec.level)
    deformed = deform.apply(template, spec)
    if cfg.deformed_dir:
        stem = os.path.join(cfg.deformed_dir, f"{name}_{spec.kind.value}-{spec.level}")
        write_image(stem + ".png", deformed.image)
        deform.save_sidecar(stem + ".json", deformed)
    if tpack is None:
        log.warning("class %s has no template features; cell %s-%d recorded as degenerate",
                    name, spec.kind.value, spec.level)
        return _degenerate_records(name, spec, cfg.thresholds, seed)
    # extraction is deterministic, so an unchanged image reuses the template features
    if np.array_equal(deformed.image, template):
        qpack = tpack
    else:
        qpack = _Packed.of(extract(deformed.image, cfg.sift))
    idx, dist = nearest_neighbors(tpack.desc, qpack.desc)
    out = []
    for t in cfg.thresholds:
        matches = matches_from_neighbors(idx, dist, t)
        inliers = None
        if cfg.ransac.enabled:
            inliers = _ransac_count(matches, tpack.pos, qpack.pos, seed, cfg.ransac)
        if cfg.viz_dir:
            composite = render_matches(template, deformed.image, matches,
                                       np.column_stack([tpack.pos, tpack.sigma]),
                                       np.column_stack([qpack.pos, qpack.sigma]))
            write_image(os.path.join(cfg.viz_dir, viz_name(name, spec.kind, spec.level, t)), composite)
        out.append(BenchmarkRecord(name, spec.kind, spec.level, t, len(tpack), len(qpack), len(matches),
                                   retained_percentage(len(matches), len(tpack)), inliers, seed))
    return out


def viz_name(class_name, kind, level, threshold):
    return f"{class_name}_{Kind.parse(kind).value}-{int(level)}_t{format_threshold(threshold)}.png"


def _template(source, p):
    img = source.load()
    feats = extract(img, p)
    return img, (_Packed.of(feats) if feats else None)


def run_suite(cfg):
    """Records for every class x kind x level x threshold, in that order."""
    for d in (cfg.deformed_dir, cfg.viz_dir):
        if d:
            os.makedirs(d, exist_ok=True)
    jobs = max(1, int(cfg.jobs or 1))
    pool = ProcessPoolExecutor(jobs) if jobs > 1 else None
    try:
        mapper = pool.map if pool else map
        templates = list(mapper(_template, cfg.classes, [cfg.sift] * len(cfg.classes)))
        tasks = [(src.name, img, tpack, deform.schedule(kind, level), cfg)
                 for src, (img, tpack) in zip(cfg.classes, templates)
                 for kind in cfg.kinds for level in cfg.levels]
        # map preserves task order, which is the published record order
        records = [r for batch in mapper(_evaluate_image, tasks) for r in batch]
    finally:
        if pool:
            pool.shutdown()
    return records


# ------------------------------------------------------------- aggregation

def select(records, kind=None, threshold=None, level=None, class_name=None):
    out = []
    for r in records:
        if kind is not None and r.kind is not Kind.parse(kind):
            continue
        if threshold is not None and not math.isclose(r.threshold, float(threshold), abs_tol=1e-12):
            continue
        if level is not None and r.level != int(level):
            continue
        if class_name is not None and r.class_name != class_name:
            continue
        out.append(r)
    return out


def aggregate(records, kind, threshold, level):
    """Mean retained percentage over classes for one (kind, threshold, level)."""
    chosen = select(records, kind, threshold, level)
    if not chosen:
        raise EmptySelectionError(f"no records for kind={kind} threshold={threshold} level={level}")
    vals = [r.retained_pct for r in chosen if not math.isnan(r.retained_pct)]
    return float(np.mean(vals)) if vals else math.nan


# ------------------------------------------------------------ visualisation

_LINE = (0.1, 1.0, 0.2)
_CIRCLE = (1.0, 0.85, 0.1)


def _kp_rows(kps):
    if isinstance(kps, np.ndarray):
        arr = np.asarray(kps, dtype=np.float64)
        if arr.ndim == 2 and arr.shape[1] >= 3:
            return arr[:, :3]
        arr = arr.reshape(-1, 2)
        return np.column_stack([arr, np.ones(len(arr))])
    rows = []
    for k in kps:
        k = getattr(k, "keypoint", k)
        rows.append((k.x, k.y, k.sigma))
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def _plot(canvas, xs, ys, colour):
    h, w = canvas.shape[:2]
    xi = np.floor(np.asarray(xs) + 0.5).astype(np.intp)
    yi = np.floor(np.asarray(ys) + 0.5).astype(np.intp)
    ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    canvas[yi[ok], xi[ok]] = colour


def draw_line(canvas, p0, p1, colour=_LINE):
    (x0, y0), (x1, y1) = p0, p1
    n = int(math.ceil(max(abs(x1 - x0), abs(y1 - y0)))) + 1
    t = np.linspace(0.0, 1.0, n + 1)
    _plot(canvas, x0 + t * (x1 - x0), y0 + t * (y1 - y0), colour)


def draw_circle(canvas, centre, radius, colour=_CIRCLE):
    n = max(8, int(math.ceil(2 * math.pi * radius * 2)))
    a = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    _plot(canvas, centre[0] + radius * np.cos(a), centre[1] + radius * np.sin(a), colour)


def render_matches(template, query, matches, template_kps, query_kps, radius_scale=2.0):
    """Side-by-side RGB composite with matched keypoints circled and joined.

    Circle radius is ``radius_scale * sigma``.
    """
    a, b = as_image(template), as_image(query)
    h = max(a.shape[0], b.shape[0])
    w1 = a.shape[1]
    canvas = np.zeros((h, w1 + b.shape[1], 3))
    canvas[:a.shape[0], :w1] = a[..., None]
    canvas[:b.shape[0], w1:] = b[..., None]
    tk, qk = _kp_rows(template_kps), _kp_rows(query_kps)
    for m in matches:
        tx, ty, ts = tk[m.source_index]
        qx, qy, qs = qk[m.target_index]
        draw_circle(canvas, (tx, ty), max(1.0, radius_scale * ts))
        draw_circle(canvas, (qx + w1, qy), max(1.0, radius_scale * qs))
    for m in matches:
        tx, ty, _ = tk[m.source_index]
        qx, qy, _ = qk[m.target_index]
        draw_line(canvas, (tx, ty), (qx + w1, qy))
    return canvas


# ----------------------------------------------------------------- reports

def _csv_row(r):
    return [r.class_name, r.kind.value, r.level, repr(float(r.threshold)), r.template_features,
            r.query_features, r.positive_matches, repr(float(r.retained_pct)),
            "" if r.ransac_inliers is None else r.ransac_inliers, r.seed]


def _markdown(records):
    lines = ["# Retained positive matches", ""]
    groups = {}
    for r in records:
        groups.setdefault(r.class_name, []).append(r)
    classes = list(groups)
    if len(classes) > 1:
        keys = []
        for r in records:
            k = (r.kind, r.level, r.threshold)
            if k not in keys:
                keys.append(k)
        mean_rows = []
        for kind, level, t in keys:
            pct = aggregate(records, kind, t, level)
            mean_rows.append((f"{kind.label}-{level}_sift {format_threshold(t)}", pct))
        groups_out = [(c, [(r.label, r.retained_pct) for r in groups[c]]) for c in classes]
        groups_out.append(("mean over classes", mean_rows))
    else:
        groups_out = [(c, [(r.label, r.retained_pct) for r in groups[c]]) for c in classes]
    for title, rows in groups_out:
        lines += [f"## {title}", "", "| Deformation | % of retained positive matches |", "|---|---|"]
        for label, pct in rows:
            val = "n/a" if math.isnan(pct) else f"{pct:.2f}%"
            lines.append(f"| {label} | {val} |")
        lines.append("")
    return "\n".join(lines)


def write_report(records, fmt, path):
    records = list(records)
    if not records:
        raise EmptySelectionError("no records to report")
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                w.writerows(_csv_row(r) for r in records)
        elif fmt in ("markdown", "md"):
            with open(path, "w") as fh:
                fh.write(_markdown(records))
        else:
            raise ParameterError(f"unknown report format {fmt!r}; use 'csv' or 'markdown'")
    except OSError as exc:
        raise InputError(f"cannot write report {os.fspath(path)!r}: {exc}") from exc


def read_records(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise InputError(f"{os.fspath(path)!r} does not have the benchmark CSV header")
            rows = list(reader)
    except OSError as exc:
        raise InputError(f"cannot read records {os.fspath(path)!r}: {exc}") from exc
    try:
        return [BenchmarkRecord(row["class"], Kind.parse(row["kind"]), int(row["level"]),
                                float(row["threshold"]), int(row["template_features"]),
                                int(row["query_features"]), int(row["positive_matches"]),
                                float(row["retained_pct"]),
                                int(row["ransac_inliers"]) if row["ransac_inliers"] else None,
                                int(row["seed"]))
                for row in rows]
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed benchmark row in {os.fspath(path)!r}: {exc}") from exc
