"""Nearest-neighbour descriptor matching and RANSAC homography verification."""
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import DegenerateGeometryError, InsufficientDataError, ParameterError
from .image import apply_homography
from .sift import descriptor_matrix

DEFAULT_THRESHOLDS = (0.2, 0.4, 0.6, 0.8)

# float32 squared-distance error bound for unit-norm descriptors, with margin;
# candidates inside it are re-ranked on exact float64 distances
_SHORTLIST_SLACK = 5e-5
_CHUNK_ROWS = 1024

class Match(NamedTuple):
    source_index: int
    target_index: int
    distance: float


@dataclass
class VerifiedMatches:
    homography: np.ndarray
    inliers: list
    inlier_threshold: float
    seed: int
    inlier_indices: list = None

    def to_dict(self, matches=None):
        d = {"H": [float(v) for v in self.homography.ravel()],
             "inliers": list(self.inlier_indices or []),
             "seed": int(self.seed)}
        if matches is not None:
            d["matches"] = matches_to_rows(matches)
        return d


def _as_matrix(features):
    if isinstance(features, np.ndarray):
        arr = np.asarray(features, dtype=np.float64)
        return arr if arr.ndim == 2 else arr.reshape(len(arr), -1)
    return descriptor_matrix(list(features))


def nearest_neighbors(source, target):
    """Index and exact Euclidean distance of each source row's nearest target row.

    Ties go to the lowest target index.
    """
    a = _as_matrix(source)
    b = _as_matrix(target)
    if len(a) == 0 or len(b) == 0:
        return np.zeros(len(a), dtype=np.intp), np.full(len(a), np.inf)
    # duplicate descriptors are common on periodic texture; rank distinct ones
    # and report each by its lowest index
    ub, first = np.unique(b, axis=0, return_index=True)
    a32, ub32 = a.astype(np.float32), ub.astype(np.float32)
    bb = (ub32 * ub32).sum(1)
    idx = np.empty(len(a), dtype=np.intp)
    dist = np.empty(len(a))
    for start in range(0, len(a), _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, len(a))
        blk = a32[start:stop]
        d2 = (blk * blk).sum(1)[:, None] + bb[None, :] - 2.0 * (blk @ ub32.T)
        rows, cols = np.nonzero(d2 <= (d2.min(axis=1) + _SHORTLIST_SLACK)[:, None])
        exact = ((a[start + rows] - ub[cols]) ** 2).sum(1)
        orig = first[cols]
        # per row: smallest exact distance, then lowest target index
        order = np.lexsort((orig, exact, rows))
        keep = np.ones(len(order), dtype=bool)
        keep[1:] = rows[order][1:] != rows[order][:-1]
        pick = order[keep]
        idx[start + rows[pick]] = orig[pick]
        dist[start + rows[pick]] = np.sqrt(exact[pick])
    return idx, dist


def second_nearest_distance(source, target):
    a = _as_matrix(source)
    b = _as_matrix(target)
    if len(b) < 2:
        return np.full(len(a), np.inf)
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * (a @ b.T)
    part = np.partition(d2, 1, axis=1)[:, 1]
    return np.sqrt(np.maximum(part, 0.0))


def matches_from_neighbors(idx, dist, threshold, ratio=None, second=None):
    keep = dist < threshold
    if ratio is not None:
        keep &= dist < ratio * second
    return [Match(int(i), int(idx[i]), float(dist[i])) for i in np.nonzero(keep)[0]]


def match_features(source, target, threshold, ratio=None):
    """Threshold-criterion matches: each source feature's nearest target, kept
    when the descriptor distance is below ``threshold``.

    ``ratio`` optionally adds the nearest/second-nearest test on top.
    """
    if not threshold > 0:
        raise ParameterError(f"threshold must be > 0, got {threshold}")
    idx, dist = nearest_neighbors(source, target)
    second = second_nearest_distance(source, target) if ratio is not None else None
    return matches_from_neighbors(idx, dist, threshold, ratio, second)


def matches_to_rows(matches):
    return [{"src": m.source_index, "dst": m.target_index, "dist": m.distance} for m in matches]


def matches_from_rows(rows):
    return [Match(int(r["src"]), int(r["dst"]), float(r["dist"])) for r in rows]


def save_matches(path, matches, verified=None):
    data = verified.to_dict(matches) if verified is not None else {"matches": matches_to_rows(matches)}
    with open(path, "w") as fh:
        json.dump(data, fh)


# ---------------------------------------------------------------- homographies

def _normalization(pts):
    centre = pts.mean(axis=0)
    rms = np.sqrt(((pts - centre) ** 2).sum(axis=1).mean())
    s = np.sqrt(2.0) / rms if rms > 0 else 1.0
    return np.array([[s, 0.0, -s * centre[0]], [0.0, s, -s * centre[1]], [0.0, 0.0, 1.0]])


def _dlt_rows(src, dst):
    n = len(src)
    x, y = src[:, 0], src[:, 1]
    u, v = dst[:, 0], dst[:, 1]
    zeros, ones = np.zeros(n), np.ones(n)
    r1 = np.stack([-x, -y, -ones, zeros, zeros, zeros, u * x, u * y, u], axis=1)
    r2 = np.stack([zeros, zeros, zeros, -x, -y, -ones, v * x, v * y, v], axis=1)
    return np.concatenate([r1, r2], axis=0)


def _finish(H):
    if not np.all(np.isfinite(H)) or abs(H[2, 2]) < 1e-15:
        return None
    H = H / H[2, 2]
    if abs(np.linalg.det(H)) <= 1e-12:
        return None
    return H


def estimate_homography(src, dst):
    """Hartley-normalised DLT; least squares for more than four points."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if len(src) < 4:
        raise InsufficientDataError("a homography needs at least 4 correspondences")
    Ts, Td = _normalization(src), _normalization(dst)
    ps = apply_homography(Ts, src)
    pd = apply_homography(Td, dst)
    _, _, vt = np.linalg.svd(_dlt_rows(ps, pd), full_matrices=False)
    Hn = vt[-1].reshape(3, 3)
    H = _finish(np.linalg.inv(Td) @ Hn @ Ts)
    if H is None:
        raise DegenerateGeometryError("correspondences do not determine a homography")
    return H


def _collinear(p4, tol=1e-6):
    """Per sample, whether any three of its four points are (nearly) collinear."""
    out = np.zeros(len(p4), dtype=bool)
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        ab = p4[:, j] - p4[:, i]
        ac = p4[:, k] - p4[:, i]
        area = np.abs(ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])
        scale = np.maximum(np.abs(ab).max(1), np.abs(ac).max(1))
        scale = np.maximum(scale, 1e-12)
        out |= area <= tol * scale * scale
    return out


def _batched_minimal(src4, dst4):
    """Normalised DLT on a stack of 4-point samples, shape (K, 4, 2) each."""
    cs, cd = src4.mean(axis=1, keepdims=True), dst4.mean(axis=1, keepdims=True)
    rs = np.sqrt(((src4 - cs) ** 2).sum(-1).mean(-1))
    rd = np.sqrt(((dst4 - cd) ** 2).sum(-1).mean(-1))
    ss = np.where(rs > 0, np.sqrt(2.0) / np.where(rs > 0, rs, 1.0), 1.0)
    sd = np.where(rd > 0, np.sqrt(2.0) / np.where(rd > 0, rd, 1.0), 1.0)
    ps = (src4 - cs) * ss[:, None, None]
    pd = (dst4 - cd) * sd[:, None, None]
    x, y = ps[..., 0], ps[..., 1]
    u, v = pd[..., 0], pd[..., 1]
    z, o = np.zeros_like(x), np.ones_like(x)
    r1 = np.stack([-x, -y, -o, z, z, z, u * x, u * y, u], axis=-1)
    r2 = np.stack([z, z, z, -x, -y, -o, v * x, v * y, v], axis=-1)
    A = np.concatenate([r1, r2], axis=1)
    _, _, vt = np.linalg.svd(A)
    Hn = vt[:, -1, :].reshape(-1, 3, 3)
    k = len(src4)
    Ts = np.zeros((k, 3, 3))
    Ts[:, 0, 0] = Ts[:, 1, 1] = ss
    Ts[:, 0, 2] = -ss * cs[:, 0, 0]
    Ts[:, 1, 2] = -ss * cs[:, 0, 1]
    Ts[:, 2, 2] = 1.0
    Tdi = np.zeros((k, 3, 3))
    Tdi[:, 0, 0] = Tdi[:, 1, 1] = 1.0 / sd
    Tdi[:, 0, 2] = cd[:, 0, 0]
    Tdi[:, 1, 2] = cd[:, 0, 1]
    Tdi[:, 2, 2] = 1.0
    return Tdi @ Hn @ Ts


def _reprojection_errors(H, src, dst):
    with np.errstate(divide="ignore", invalid="ignore"):
        proj = apply_homography(H, src)
        err = np.hypot(proj[:, 0] - dst[:, 0], proj[:, 1] - dst[:, 1])
    return np.where(np.isfinite(err), err, np.inf)


def _distinct_samples(rng, n, iterations):
    idx = rng.integers(0, n, size=(iterations, 4))
    while True:
        s = np.sort(idx, axis=1)
        bad = np.nonzero((np.diff(s, axis=1) == 0).any(axis=1))[0]
        if len(bad) == 0:
            return idx
        idx[bad] = rng.integers(0, n, size=(len(bad), 4))


def _points(kps):
    if isinstance(kps, np.ndarray):
        return np.asarray(kps, dtype=np.float64).reshape(-1, 2)
    out = []
    for k in kps:
        k = getattr(k, "keypoint", k)
        out.append((k.x, k.y))
    return np.array(out, dtype=np.float64).reshape(-1, 2)


def ransac_homography(matches, source_kps, target_kps, iterations=1000, inlier_threshold=3.0, seed=0):
    """Robust homography from putative matches.

    ``source_kps``/``target_kps`` are keypoints, features, or (N, 2) arrays
    of positions indexed by the matches.
    """
    matches = list(matches)
    if len(matches) < 4:
        raise InsufficientDataError(f"RANSAC needs at least 4 matches, got {len(matches)}")
    sp = _points(source_kps)
    tp = _points(target_kps)
    src = sp[[m.source_index for m in matches]]
    dst = tp[[m.target_index for m in matches]]
    n = len(matches)
    rng = np.random.default_rng(seed)
    samples = _distinct_samples(rng, n, int(iterations))

    ok = ~(_collinear(src[samples]) | _collinear(dst[samples]))
    if not ok.any():
        raise DegenerateGeometryError("every RANSAC sample was collinear")
    Hs = _batched_minimal(src[samples[ok]], dst[samples[ok]])
    h22 = Hs[:, 2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        Hs = Hs / h22[:, None, None]
        valid = np.isfinite(Hs).all(axis=(1, 2)) & (np.abs(h22) >= 1e-15)
        valid &= np.abs(np.linalg.det(np.where(valid[:, None, None], Hs, np.eye(3)))) > 1e-12
    if not valid.any():
        raise DegenerateGeometryError("no RANSAC sample produced a valid homography")
    Hs = Hs[valid]

    counts = kernels.active().consensus_counts(Hs, src, dst, float(inlier_threshold))
    # first sample with the largest consensus wins
    best_H = Hs[int(np.argmax(counts))]

    H = best_H
    mask = _reprojection_errors(H, src, dst) <= inlier_threshold
    # least-squares polish; keep it only while consensus does not shrink
    for _ in range(5):
        if mask.sum() < 4:
            break
        try:
            H_ls = estimate_homography(src[mask], dst[mask])
        except DegenerateGeometryError:
            break
        new_mask = _reprojection_errors(H_ls, src, dst) <= inlier_threshold
        if new_mask.sum() < mask.sum():
            break
        converged = np.array_equal(new_mask, mask)
        H, mask = H_ls, new_mask
        if converged:
            break

    inlier_idx = [int(i) for i in np.nonzero(mask)[0]]
    return VerifiedMatches(H, [matches[i] for i in inlier_idx], float(inlier_threshold), int(seed), inlier_idx)
