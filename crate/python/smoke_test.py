"""Smoke test for the lidarplace_py extension module.

Build and run from the repository root:

    cargo build --release -p lidarplace-python --features extension-module
    cp target/release/liblidarplace_py.so python/lidarplace_py.so
    python3 python/smoke_test.py
"""

import math
import os
import random
import struct
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import lidarplace_py as lp  # noqa: E402


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    rng = random.Random(0)

    # spherical transform of (2, 2, 2) and back
    cloud = lp.PointCloud([[2.0, 2.0, 2.0]], [10.0], "demo")
    r, theta, phi = cloud.to_spherical("hdl64e").points[0]
    assert close(r, 3.4641, 1e-3) and close(theta, 45.0, 1e-9) and close(phi, 54.7356, 1e-3)
    back = cloud.to_spherical("hdl64e").to_cartesian().points[0]
    assert all(close(a, 2.0, 1e-9) for a in back)

    # binary scan loading
    pts = [[rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-2, 5)] for _ in range(2000)]
    inten = [float(rng.randint(0, 255)) for _ in pts]
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "000007.bin")
        with open(path, "wb") as fh:
            for p, i in zip(pts, inten):
                fh.write(struct.pack("<4f", p[0], p[1], p[2], i))
        scan = lp.PointCloud.load_xyzi(path)
    assert len(scan) == 2000 and scan.source_id == "000007"

    # equalization is rank preserving and lands in [0, 1]
    eq = lp.equalize(inten)
    assert all(0.0 <= v <= 1.0 for v in eq)
    order = sorted(range(len(inten)), key=lambda i: inten[i])
    assert all(eq[a] <= eq[b] for a, b in zip(order, order[1:]))

    # preprocessing and descriptors
    cfg = lp.Config("coords.mode = spherical\nsensor.preset = hdl64e\nquantize.steps = 0.1, 2.0, 1.875\n")
    assert lp.Config(cfg.to_text()).hash() == cfg.hash()
    pre = cfg.preprocess(scan)
    assert pre.frame == "spherical"
    net = lp.Network("desk", seed=3)
    d1 = net.describe(pre, cfg)
    d2 = net.describe(pre, cfg)
    assert len(d1) == net.output_dim == 64 and d1 == d2
    assert close(math.sqrt(sum(v * v for v in d1)), 1.0, 1e-9)
    assert lp.occupied_voxels(pre, [0.1, 2.0, 1.875]) > 0

    # evaluation and clustering
    rows = [(f"e{i}", [float(i), 0.0], (float(i), 0.0)) for i in range(20)]
    assert lp.recall_at(rows, rows, 1, threshold=0.5) == 1.0
    assert lp.recall_at(rows, rows, "1%") == 1.0
    far = [("q", [0.0, 0.0], (1e4, 0.0))]
    assert lp.recall_at(far, rows) is None
    assert lp.smooth_ap([0.9, 0.1], [True, False], tau=1e-4) > 0.999
    labels, centroids = lp.kmeans([[0.0], [0.1], [10.0], [10.1]], 2, seed=1)
    assert labels[0] == labels[1] != labels[2] == labels[3] and len(centroids) == 2

    try:
        lp.kmeans([[0.0]], 2)
    except ValueError:
        pass
    else:
        raise AssertionError("k > n must raise")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
