# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SIFT kernels. Semantics match ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, floor, fabs, cos, sin, isfinite, M_PI

cnp.import_array()

cdef double TWO_PI = 2.0 * M_PI


def separable_blur(img, kernel):
    cdef const double[:, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef const double[::1] k = np.ascontiguousarray(kernel, dtype=np.float64)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef Py_ssize_t nk = k.shape[0], r = (nk - 1) // 2
    tmp_arr = np.zeros((h, w))
    out_arr = np.zeros((h, w))
    line_arr = np.empty(max(h, w) + 2 * r)
    col_arr = np.empty(w)
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] out = out_arr
    cdef double[::1] line = line_arr
    cdef double[::1] acc = col_arr
    cdef Py_ssize_t y, x, t, yy
    cdef double s, kt
    with nogil:
        # horizontal pass over an edge-padded copy of each row
        for y in range(h):
            for x in range(w + 2 * r):
                t = x - r
                if t < 0:
                    t = 0
                elif t >= w:
                    t = w - 1
                line[x] = src[y, t]
            for x in range(w):
                s = 0.0
                for t in range(nk):
                    s = s + k[t] * line[x + t]
                tmp[y, x] = s
        # vertical pass, accumulated row by row so the inner loop is contiguous
        for y in range(h):
            for x in range(w):
                acc[x] = 0.0
            for t in range(nk):
                yy = y + t - r
                if yy < 0:
                    yy = 0
                elif yy >= h:
                    yy = h - 1
                kt = k[t]
                for x in range(w):
                    acc[x] = acc[x] + kt * tmp[yy, x]
            for x in range(w):
                out[y, x] = acc[x]
    return out_arr


def extrema_candidates(dog_arr, int layer, int border, double threshold):
    cdef const double[:, :, ::1] dog = np.ascontiguousarray(dog_arr, dtype=np.float64)
    cdef Py_ssize_t h = dog.shape[1], w = dog.shape[2]
    cdef Py_ssize_t b = border if border > 1 else 1
    cdef Py_ssize_t y, x
    cdef int dl, dy, dx
    cdef double v, nb
    cdef bint is_max, is_min
    ys = []
    xs = []
    for y in range(b, h - b):
        for x in range(b, w - b):
            v = dog[layer, y, x]
            if not fabs(v) > threshold:
                continue
            is_max = v > 0
            is_min = v < 0
            for dl in range(-1, 2):
                for dy in range(-1, 2):
                    for dx in range(-1, 2):
                        if dl == 0 and dy == 0 and dx == 0:
                            continue
                        nb = dog[layer + dl, y + dy, x + dx]
                        if nb > v:
                            is_max = False
                        if nb < v:
                            is_min = False
                    if not (is_max or is_min):
                        break
                if not (is_max or is_min):
                    break
            if is_max or is_min:
                ys.append(y)
                xs.append(x)
    return np.array(ys, dtype=np.intp), np.array(xs, dtype=np.intp)


cdef inline void _derivs(const double[:, :, ::1] D, Py_ssize_t l, Py_ssize_t y, Py_ssize_t x, double* o) noexcept nogil:
    cdef double v = D[l, y, x]
    o[0] = v
    o[1] = 0.5 * (D[l, y, x + 1] - D[l, y, x - 1])
    o[2] = 0.5 * (D[l, y + 1, x] - D[l, y - 1, x])
    o[3] = 0.5 * (D[l + 1, y, x] - D[l - 1, y, x])
    o[4] = D[l, y, x + 1] + D[l, y, x - 1] - 2.0 * v
    o[5] = D[l, y + 1, x] + D[l, y - 1, x] - 2.0 * v
    o[6] = D[l + 1, y, x] + D[l - 1, y, x] - 2.0 * v
    o[7] = 0.25 * (D[l, y + 1, x + 1] - D[l, y + 1, x - 1] - D[l, y - 1, x + 1] + D[l, y - 1, x - 1])
    o[8] = 0.25 * (D[l + 1, y, x + 1] - D[l + 1, y, x - 1] - D[l - 1, y, x + 1] + D[l - 1, y, x - 1])
    o[9] = 0.25 * (D[l + 1, y + 1, x] - D[l + 1, y - 1, x] - D[l - 1, y + 1, x] + D[l - 1, y - 1, x])


cdef inline bint _solve(double* d, double* off) noexcept nogil:
    cdef double gx = d[1], gy = d[2], gs = d[3]
    cdef double dxx = d[4], dyy = d[5], dss = d[6], dxy = d[7], dxs = d[8], dys = d[9]
    cdef double a00 = dyy * dss - dys * dys
    cdef double a01 = dxs * dys - dxy * dss
    cdef double a02 = dxy * dys - dxs * dyy
    cdef double a11 = dxx * dss - dxs * dxs
    cdef double a12 = dxy * dxs - dxx * dys
    cdef double a22 = dxx * dyy - dxy * dxy
    cdef double det = dxx * a00 + dxy * a01 + dxs * a02
    if det == 0.0:
        return False
    off[0] = -(a00 * gx + a01 * gy + a02 * gs) / det
    off[1] = -(a01 * gx + a11 * gy + a12 * gs) / det
    off[2] = -(a02 * gx + a12 * gy + a22 * gs) / det
    return True


def refine_candidates(dog_arr, layers, ys, xs, int border, double contrast, double edge_ratio, int max_iter):
    cdef const double[:, :, ::1] D = np.ascontiguousarray(dog_arr, dtype=np.float64)
    cdef const Py_ssize_t[::1] L0 = np.ascontiguousarray(layers, dtype=np.intp)
    cdef const Py_ssize_t[::1] Y0 = np.ascontiguousarray(ys, dtype=np.intp)
    cdef const Py_ssize_t[::1] X0 = np.ascontiguousarray(xs, dtype=np.intp)
    cdef Py_ssize_t nl = D.shape[0], h = D.shape[1], w = D.shape[2]
    cdef Py_ssize_t m = L0.shape[0], i, l, y, x, kept = 0
    cdef int it
    cdef bint converged, check_edge = isfinite(edge_ratio)
    cdef double edge_limit = (edge_ratio + 1.0) * (edge_ratio + 1.0) / edge_ratio if check_edge else 0.0
    cdef double d[10]
    cdef double off[3]
    cdef double value, tr, det
    out_arr = np.empty((m, 7))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(m):
            l = L0[i]
            y = Y0[i]
            x = X0[i]
            converged = False
            for it in range(max_iter):
                _derivs(D, l, y, x, d)
                if not _solve(d, off):
                    break
                if fabs(off[0]) <= 0.5 and fabs(off[1]) <= 0.5 and fabs(off[2]) <= 0.5:
                    converged = True
                    break
                x += <Py_ssize_t>floor(off[0] + 0.5)
                y += <Py_ssize_t>floor(off[1] + 0.5)
                l += <Py_ssize_t>floor(off[2] + 0.5)
                if l < 1 or l > nl - 2 or y < border or y >= h - border or x < border or x >= w - border:
                    break
            if not converged:
                continue
            value = d[0] + 0.5 * (d[1] * off[0] + d[2] * off[1] + d[3] * off[2])
            if fabs(value) < contrast:
                continue
            if check_edge:
                tr = d[4] + d[5]
                det = d[4] * d[5] - d[7] * d[7]
                if det <= 0.0 or tr * tr >= edge_limit * det:
                    continue
            out[kept, 0] = l
            out[kept, 1] = y
            out[kept, 2] = x
            out[kept, 3] = off[0]
            out[kept, 4] = off[1]
            out[kept, 5] = off[2]
            out[kept, 6] = value
            kept += 1
    return out_arr[:kept].copy()


def orientation_histogram(mag_arr, ang_arr, double x, double y, double sigma_w, int radius, int nbins):
    cdef const double[:, ::1] mag = np.ascontiguousarray(mag_arr, dtype=np.float64)
    cdef const double[:, ::1] ang = np.ascontiguousarray(ang_arr, dtype=np.float64)
    cdef Py_ssize_t h = mag.shape[0], w = mag.shape[1]
    cdef Py_ssize_t xi = <Py_ssize_t>floor(x + 0.5), yi = <Py_ssize_t>floor(y + 0.5)
    cdef Py_ssize_t yy, xx, b
    cdef double denom = 2.0 * sigma_w * sigma_w, scale = nbins / TWO_PI, wy
    cdef Py_ssize_t t
    hist_arr = np.zeros(nbins)
    gauss_arr = np.empty(2 * radius + 1)
    cdef double[::1] hist = hist_arr
    cdef double[::1] gauss = gauss_arr
    with nogil:
        for t in range(2 * radius + 1):
            gauss[t] = exp(-((t - radius) * (t - radius)) / denom)
        for yy in range(yi - radius, yi + radius + 1):
            if yy < 1 or yy > h - 2:
                continue
            wy = gauss[yy - yi + radius]
            for xx in range(xi - radius, xi + radius + 1):
                if xx < 1 or xx > w - 2:
                    continue
                b = <Py_ssize_t>floor(ang[yy, xx] * scale + 0.5) % nbins
                if b < 0:
                    b += nbins
                hist[b] += mag[yy, xx] * (wy * gauss[xx - xi + radius])
    return hist_arr


def descriptor_histogram(mag_arr, ang_arr, double x, double y, double theta, double hist_width,
                         int radius, int d, int n):
    cdef const double[:, ::1] mag = np.ascontiguousarray(mag_arr, dtype=np.float64)
    cdef const double[:, ::1] ang = np.ascontiguousarray(ang_arr, dtype=np.float64)
    cdef Py_ssize_t h = mag.shape[0], w = mag.shape[1]
    cdef Py_ssize_t xi = <Py_ssize_t>floor(x + 0.5), yi = <Py_ssize_t>floor(y + 0.5)
    cdef Py_ssize_t yy, xx, r0, c0, o0, o1, count = 0
    cdef double cos_t = cos(theta), sin_t = sin(theta)
    cdef double ox, oy, c_rot, r_rot, rbin, cbin, obin, wgt, m, fr, fc, fo, rel, v
    cdef double half = 0.5 * d
    cdef double gauss_denom = 0.5 * d * d
    cdef double oscale = n / TWO_PI
    cdef double wscale = hist_width * hist_width * gauss_denom
    cdef Py_ssize_t t
    hist_arr = np.zeros((d + 2, d + 2, n))
    gy_arr = np.empty(2 * radius + 1)
    gx_arr = np.empty(2 * radius + 1)
    cdef double[:, :, ::1] hist = hist_arr
    cdef double[::1] gy = gy_arr
    cdef double[::1] gx = gx_arr
    with nogil:
        # the window weight depends only on |offset|, so it factors per axis
        for t in range(2 * radius + 1):
            oy = yi - radius + t - y
            ox = xi - radius + t - x
            gy[t] = exp(-(oy * oy) / wscale)
            gx[t] = exp(-(ox * ox) / wscale)
        for yy in range(yi - radius, yi + radius + 1):
            if yy < 1 or yy > h - 2:
                continue
            for xx in range(xi - radius, xi + radius + 1):
                if xx < 1 or xx > w - 2:
                    continue
                oy = yy - y
                ox = xx - x
                c_rot = (ox * cos_t + oy * sin_t) / hist_width
                r_rot = (-ox * sin_t + oy * cos_t) / hist_width
                rbin = r_rot + half - 0.5
                cbin = c_rot + half - 0.5
                if not (rbin > -1 and rbin < d and cbin > -1 and cbin < d):
                    continue
                count += 1
                wgt = gy[yy - yi + radius] * gx[xx - xi + radius]
                m = mag[yy, xx] * wgt
                rel = ang[yy, xx] - theta
                if rel < 0:
                    rel += TWO_PI
                elif rel >= TWO_PI:
                    rel -= TWO_PI
                obin = rel * oscale
                fr = floor(rbin)
                fc = floor(cbin)
                fo = floor(obin)
                r0 = <Py_ssize_t>fr + 1
                c0 = <Py_ssize_t>fc + 1
                o0 = <Py_ssize_t>fo % n
                o1 = (o0 + 1) % n
                fr = rbin - fr
                fc = cbin - fc
                fo = obin - fo
                v = m * (1.0 - fr) * (1.0 - fc)
                hist[r0, c0, o0] += v * (1.0 - fo)
                hist[r0, c0, o1] += v * fo
                v = m * (1.0 - fr) * fc
                hist[r0, c0 + 1, o0] += v * (1.0 - fo)
                hist[r0, c0 + 1, o1] += v * fo
                v = m * fr * (1.0 - fc)
                hist[r0 + 1, c0, o0] += v * (1.0 - fo)
                hist[r0 + 1, c0, o1] += v * fo
                v = m * fr * fc
                hist[r0 + 1, c0 + 1, o0] += v * (1.0 - fo)
                hist[r0 + 1, c0 + 1, o1] += v * fo
    if count == 0:
        return np.zeros(d * d * n), 0
    return np.ascontiguousarray(hist_arr[1:d + 1, 1:d + 1, :]).ravel(), count


def consensus_counts(Hs_arr, src_arr, dst_arr, double threshold):
    cdef const double[:, :, ::1] Hs = np.ascontiguousarray(Hs_arr, dtype=np.float64)
    cdef const double[:, ::1] src = np.ascontiguousarray(src_arr, dtype=np.float64)
    cdef const double[:, ::1] dst = np.ascontiguousarray(dst_arr, dtype=np.float64)
    cdef Py_ssize_t k, i, nh = Hs.shape[0], n = src.shape[0]
    cdef double t2 = threshold * threshold
    cdef double h00, h01, h02, h10, h11, h12, h20, h21, h22, x, y, w, ex, ey
    cdef Py_ssize_t c
    counts_arr = np.empty(nh, dtype=np.intp)
    cdef Py_ssize_t[::1] counts = counts_arr
    with nogil:
        for k in range(nh):
            h00 = Hs[k, 0, 0]; h01 = Hs[k, 0, 1]; h02 = Hs[k, 0, 2]
            h10 = Hs[k, 1, 0]; h11 = Hs[k, 1, 1]; h12 = Hs[k, 1, 2]
            h20 = Hs[k, 2, 0]; h21 = Hs[k, 2, 1]; h22 = Hs[k, 2, 2]
            c = 0
            for i in range(n):
                x = src[i, 0]
                y = src[i, 1]
                w = h20 * x + h21 * y + h22
                ex = h00 * x + h01 * y + h02 - dst[i, 0] * w
                ey = h10 * x + h11 * y + h12 - dst[i, 1] * w
                if w != 0.0 and ex * ex + ey * ey <= t2 * (w * w):
                    c += 1
            counts[k] = c
    return counts_arr
