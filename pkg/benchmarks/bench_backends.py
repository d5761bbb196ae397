"""Time the compiled kernels against the pure-numpy fallback.

    python benchmarks/bench_backends.py [--repeat N]

Runs feature extraction, the individual hot kernels and a RANSAC consensus
pass on a default synthetic motif under each available backend, checks that
both produce the same features, and prints a timing table.
"""
import argparse
import time

import numpy as np

from motifsift import kernels, matching, synth
from motifsift.image import gaussian_kernel
from motifsift.sift import build_scale_space, descriptor_matrix, extract


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(img):
    ss = build_scale_space(img)
    dog = ss.dog[0]
    mag, ang = ss.gradients(0, 1)
    k = gaussian_kernel(2.0)
    rng = np.random.default_rng(0)
    src = rng.uniform(0, 800, (2000, 2))
    dst = src + rng.normal(0, 1, src.shape)
    Hs = np.tile(np.eye(3), (1000, 1, 1)) + rng.normal(0, 1e-3, (1000, 3, 3))
    ys = rng.integers(20, mag.shape[0] - 20, 500)
    xs = rng.integers(20, mag.shape[1] - 20, 500)

    def orient(kk):
        for y, x in zip(ys, xs):
            kk.orientation_histogram(mag, ang, float(x), float(y), 3.0, 9, 36)

    def desc(kk):
        for y, x in zip(ys, xs):
            kk.descriptor_histogram(mag, ang, float(x), float(y), 0.5, 6.0, 21, 4, 8)

    return {
        "extract (800x355 motif)": lambda kk: extract(img),
        "separable_blur sigma=2": lambda kk: kk.separable_blur(ss.gaussians[0][0], k),
        "extrema_candidates": lambda kk: kk.extrema_candidates(dog, 1, 5, 0.015),
        "orientation_histogram x500": orient,
        "descriptor_histogram x500": desc,
        "consensus_counts 1000x2000": lambda kk: kk.consensus_counts(Hs, src, dst, 3.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    img = synth.generate_motif(synth.MotifSpec(synth.Family.SYMMETRIC_DIAMOND))
    backends = kernels.available()
    results, features = {}, {}
    for name in backends:
        with kernels.using(name):
            kk = kernels.active()
            for label, fn in cases(img).items():
                results.setdefault(label, {})[name] = best_of(lambda: fn(kk), args.repeat)
            features[name] = extract(img)
    header = f"{'kernel':32s}" + "".join(f"{b:>12s}" for b in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10s}"
    print(header)
    for label, row in results.items():
        line = f"{label:32s}" + "".join(f"{row[b]:11.4f}s" for b in backends)
        if "python" in row and "cython" in row:
            line += f"{row['python'] / row['cython']:9.1f}x"
        print(line)
    if len(features) > 1:
        a, b = (descriptor_matrix(f) for f in features.values())
        same = a.shape == b.shape and np.allclose(a, b, atol=1e-9)
        print(f"features agree across backends: {same} ({len(a)} vs {len(b)})")


if __name__ == "__main__":
    main()
