"""Time the compiled kernels against the numpy fallback on VoxNet-lite shapes.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from voxgrad.kernels import available_backends

SHAPES = {
    # name: (input N,C,D,H,W), (weight K,C,k,k,k)
    "conv1 32^3": ((16, 1, 32, 32, 32), (8, 1, 3, 3, 3)),
    "conv2 16^3": ((16, 8, 16, 16, 16), (16, 8, 3, 3, 3)),
    "res 8^3": ((16, 16, 8, 8, 8), (16, 16, 3, 3, 3)),
}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = available_backends()
    rng = np.random.default_rng(0)
    rows = []
    for name, (xs, ws) in SHAPES.items():
        x = rng.standard_normal(xs)
        w = rng.standard_normal(ws)
        b = rng.standard_normal(ws[0])
        for be_name, k in backends.items():
            out = k.conv3d_forward(x, w, b, 1, 1)
            g = rng.standard_normal(out.shape)
            rows.append((name, "conv fwd", be_name, best_of(lambda: k.conv3d_forward(x, w, b, 1, 1), args.repeat)))
            rows.append((name, "conv bwd", be_name, best_of(lambda: k.conv3d_backward(x, w, g, 1, 1), args.repeat)))
            rows.append((name, "pool fwd", be_name, best_of(lambda: k.maxpool3d_forward(x, 2, 2), args.repeat)))
    pts = rng.standard_normal((16 * 1024, 32))
    pw = rng.standard_normal((32, 64))
    for be_name, k in backends.items():
        rows.append(("points 16x1024", "pointwise", be_name, best_of(lambda: k.pointwise_linear(pts, pw), args.repeat)))

    base = {(r[0], r[1]): r[3] for r in rows if r[2] == "python"}
    print(f"{'shape':<16} {'kernel':<10} {'backend':<9} {'seconds':>9} {'speedup':>8}")
    for shape, kern, be, t in rows:
        ref = base.get((shape, kern))
        sp = f"{ref / t:7.1f}x" if ref else "-"
        print(f"{shape:<16} {kern:<10} {be:<9} {t:9.4f} {sp:>8}")


if __name__ == "__main__":
    main()
