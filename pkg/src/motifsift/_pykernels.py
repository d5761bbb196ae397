"""Pure numpy implementations of the hot SIFT kernels.

These mirror ``_ckernels.pyx`` one to one and serve as the fallback when the
compiled extension is unavailable. All arrays are float64.
"""
import math

import numpy as np

TWO_PI = 2.0 * math.pi


def separable_blur(img, kernel):
    """Rows then columns, edge-clamped borders."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    r = (kernel.size - 1) // 2
    h, w = img.shape

    padded = np.pad(img, ((0, 0), (r, r)), mode="edge")
    tmp = np.zeros_like(img)
    for k in range(kernel.size):
        tmp += kernel[k] * padded[:, k:k + w]

    padded = np.pad(tmp, ((r, r), (0, 0)), mode="edge")
    out = np.zeros_like(img)
    for k in range(kernel.size):
        out += kernel[k] * padded[k:k + h, :]
    return out


def extrema_candidates(dog, layer, border, threshold):
    """Pixels of ``dog[layer]`` that are 26-neighbourhood extrema above ``threshold``."""
    n_layers, h, w = dog.shape
    b = max(int(border), 1)
    if h - 2 * b <= 0 or w - 2 * b <= 0:
        return np.empty(0, np.intp), np.empty(0, np.intp)
    centre = dog[layer, b:h - b, b:w - b]
    hi = np.full(centre.shape, -np.inf)
    lo = np.full(centre.shape, np.inf)
    for dl in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dl == 0 and dy == 0 and dx == 0:
                    continue
                nb = dog[layer + dl, b + dy:h - b + dy, b + dx:w - b + dx]
                np.maximum(hi, nb, out=hi)
                np.minimum(lo, nb, out=lo)
    strong = np.abs(centre) > threshold
    mask = strong & (((centre > 0) & (centre >= hi)) | ((centre < 0) & (centre <= lo)))
    ys, xs = np.nonzero(mask)
    return ys + b, xs + b


def _derivatives(dog, l, y, x):
    v = dog[l, y, x]
    c = dog[l]
    p = dog[l - 1]
    n = dog[l + 1]
    gx = 0.5 * (c[y, x + 1] - c[y, x - 1])
    gy = 0.5 * (c[y + 1, x] - c[y - 1, x])
    gs = 0.5 * (n[y, x] - p[y, x])
    dxx = c[y, x + 1] + c[y, x - 1] - 2.0 * v
    dyy = c[y + 1, x] + c[y - 1, x] - 2.0 * v
    dss = n[y, x] + p[y, x] - 2.0 * v
    dxy = 0.25 * (c[y + 1, x + 1] - c[y + 1, x - 1] - c[y - 1, x + 1] + c[y - 1, x - 1])
    dxs = 0.25 * (n[y, x + 1] - n[y, x - 1] - p[y, x + 1] + p[y, x - 1])
    dys = 0.25 * (n[y + 1, x] - n[y - 1, x] - p[y + 1, x] + p[y - 1, x])
    return v, gx, gy, gs, dxx, dyy, dss, dxy, dxs, dys


def _solve_offset(gx, gy, gs, dxx, dyy, dss, dxy, dxs, dys):
    # adjugate of the symmetric Hessian; returns None when singular
    a00 = dyy * dss - dys * dys
    a01 = dxs * dys - dxy * dss
    a02 = dxy * dys - dxs * dyy
    a11 = dxx * dss - dxs * dxs
    a12 = dxy * dxs - dxx * dys
    a22 = dxx * dyy - dxy * dxy
    det = dxx * a00 + dxy * a01 + dxs * a02
    if det == 0.0:
        return None
    ox = -(a00 * gx + a01 * gy + a02 * gs) / det
    oy = -(a01 * gx + a11 * gy + a12 * gs) / det
    os_ = -(a02 * gx + a12 * gy + a22 * gs) / det
    return ox, oy, os_


def refine_candidates(dog, layers, ys, xs, border, contrast, edge_ratio, max_iter):
    """Quadratic subpixel refinement with re-anchoring and stability rejection.

    Returns an (M, 7) array of rows ``layer, y, x, off_x, off_y, off_s, value``
    where ``layer, y, x`` is the final integer anchor.
    """
    dog = np.ascontiguousarray(dog, dtype=np.float64)
    n_layers, h, w = dog.shape
    check_edge = math.isfinite(edge_ratio)
    edge_limit = (edge_ratio + 1.0) ** 2 / edge_ratio if check_edge else 0.0
    rows = []
    for l, y, x in zip(np.asarray(layers).tolist(), np.asarray(ys).tolist(), np.asarray(xs).tolist()):
        converged = False
        for _ in range(max_iter):
            d = _derivatives(dog, l, y, x)
            off = _solve_offset(*d[1:])
            if off is None:
                break
            ox, oy, os_ = off
            if abs(ox) <= 0.5 and abs(oy) <= 0.5 and abs(os_) <= 0.5:
                converged = True
                break
            x += int(math.floor(ox + 0.5))
            y += int(math.floor(oy + 0.5))
            l += int(math.floor(os_ + 0.5))
            if l < 1 or l > n_layers - 2 or y < border or y >= h - border or x < border or x >= w - border:
                break
        if not converged:
            continue
        v, gx, gy, gs, dxx, dyy, dss, dxy, dxs, dys = d
        value = v + 0.5 * (gx * ox + gy * oy + gs * os_)
        if abs(value) < contrast:
            continue
        if check_edge:
            tr = dxx + dyy
            det = dxx * dyy - dxy * dxy
            if det <= 0.0 or tr * tr >= edge_limit * det:
                continue
        rows.append((l, y, x, ox, oy, os_, value))
    if not rows:
        return np.empty((0, 7))
    return np.array(rows, dtype=np.float64)


def orientation_histogram(mag, ang, x, y, sigma_w, radius, nbins):
    h, w = mag.shape
    xi = int(math.floor(x + 0.5))
    yi = int(math.floor(y + 0.5))
    y0, y1 = max(yi - radius, 1), min(yi + radius, h - 2)
    x0, x1 = max(xi - radius, 1), min(xi + radius, w - 2)
    hist = np.zeros(nbins)
    if y0 > y1 or x0 > x1:
        return hist
    dy = (np.arange(y0, y1 + 1) - yi).astype(np.float64)
    dx = (np.arange(x0, x1 + 1) - xi).astype(np.float64)
    denom = 2.0 * sigma_w * sigma_w
    weight = np.exp(-(dy * dy) / denom)[:, None] * np.exp(-(dx * dx) / denom)[None, :]
    m = mag[y0:y1 + 1, x0:x1 + 1] * weight
    b = np.floor(ang[y0:y1 + 1, x0:x1 + 1] * (nbins / TWO_PI) + 0.5).astype(np.intp) % nbins
    return np.bincount(b.ravel(), weights=m.ravel(), minlength=nbins)


def descriptor_histogram(mag, ang, x, y, theta, hist_width, radius, d, n):
    """Raw (unnormalised) d*d*n gradient histogram and the number of samples used."""
    h, w = mag.shape
    xi = int(math.floor(x + 0.5))
    yi = int(math.floor(y + 0.5))
    y0, y1 = max(yi - radius, 1), min(yi + radius, h - 2)
    x0, x1 = max(xi - radius, 1), min(xi + radius, w - 2)
    out = np.zeros(d * d * n)
    if y0 > y1 or x0 > x1:
        return out, 0
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    yy, xx = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    oy = yy - y
    ox = xx - x
    c_rot = (ox * cos_t + oy * sin_t) / hist_width
    r_rot = (-ox * sin_t + oy * cos_t) / hist_width
    rbin = r_rot + 0.5 * d - 0.5
    cbin = c_rot + 0.5 * d - 0.5
    keep = (rbin > -1) & (rbin < d) & (cbin > -1) & (cbin < d)
    count = int(keep.sum())
    if count == 0:
        return out, 0
    rbin, cbin = rbin[keep], cbin[keep]
    # the window weight depends only on |offset|, so it factors per axis
    wscale = hist_width * hist_width * 0.5 * d * d
    gy = np.exp(-(oy[:, 0] ** 2) / wscale)
    gx = np.exp(-(ox[0, :] ** 2) / wscale)
    weight = (gy[:, None] * gx[None, :])[keep]
    m = mag[yy[keep], xx[keep]] * weight
    rel = ang[yy[keep], xx[keep]] - theta
    rel = np.where(rel < 0, rel + TWO_PI, np.where(rel >= TWO_PI, rel - TWO_PI, rel))
    obin = rel * (n / TWO_PI)

    r0 = np.floor(rbin)
    c0 = np.floor(cbin)
    o0 = np.floor(obin)
    fr, fc, fo = rbin - r0, cbin - c0, obin - o0
    r0 = r0.astype(np.intp) + 1
    c0 = c0.astype(np.intp) + 1
    o0 = o0.astype(np.intp) % n
    o1 = (o0 + 1) % n

    hist = np.zeros((d + 2, d + 2, n))
    for dr, wr in ((0, 1.0 - fr), (1, fr)):
        for dc, wc in ((0, 1.0 - fc), (1, fc)):
            v = m * wr * wc
            np.add.at(hist, (r0 + dr, c0 + dc, o0), v * (1.0 - fo))
            np.add.at(hist, (r0 + dr, c0 + dc, o1), v * fo)
    return hist[1:d + 1, 1:d + 1, :].ravel(), count


def consensus_counts(Hs, src, dst, threshold):
    """Per homography in ``Hs`` (K, 3, 3), how many ``src`` points land within
    ``threshold`` of their ``dst`` partner."""
    Hs = np.asarray(Hs, dtype=np.float64)
    sx, sy = src[:, 0][None, :], src[:, 1][None, :]
    u, v = dst[:, 0][None, :], dst[:, 1][None, :]
    t2 = threshold * threshold
    counts = np.empty(len(Hs), dtype=np.intp)
    chunk = max(1, 2_000_000 // max(len(src), 1))
    for start in range(0, len(Hs), chunk):
        H = Hs[start:start + chunk]
        c = [H[:, i, j][:, None] for i in range(3) for j in range(3)]
        w = c[6] * sx + c[7] * sy + c[8]
        # |p/w - q| <= t  <=>  |p - q w|^2 <= t^2 w^2, without the division
        ex = c[0] * sx + c[1] * sy + c[2] - u * w
        ey = c[3] * sx + c[4] * sy + c[5] - v * w
        ok = (ex * ex + ey * ey <= t2 * (w * w)) & (w != 0.0)
        counts[start:start + chunk] = ok.sum(axis=1)
    return counts
