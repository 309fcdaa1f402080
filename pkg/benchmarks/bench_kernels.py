"""Timing comparison of the compiled and pure-numpy kernel paths.

The path is chosen at import time from EIGENFRAC_JIT, so the outer
process spawns one child per path and merges their reports:

    python3 benchmarks/bench_kernels.py
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

REPEAT = 5


def _workloads():
    from eigenfrac.mesh import DomainSpec, build_structured_mesh

    mesh = build_structured_mesh(DomainSpec(), 0.01, pad=0.05)
    ids = np.arange(mesh.n_tri, dtype=np.int64)
    rng = np.random.default_rng(0)
    pts = rng.random((200_000, 2))
    segs = rng.random((20, 4))
    cloud = rng.random((40, 2))
    return mesh, ids, pts, segs, cloud


def _time(fn, *args):
    best = np.inf
    for _ in range(REPEAT):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def run_inner():
    from eigenfrac import kernels
    from eigenfrac.jit import JIT_ENABLED

    mesh, ids, pts, segs, cloud = _workloads()
    target = mesh.tri_xy[mesh.n_tri // 2]
    path = "jit" if JIT_ENABLED else "numpy"

    cases = (
        ("tri_dists_to_tri", kernels.tri_dists_to_tri,
         (mesh.tri_xy, ids, target)),
        ("tri_dists_to_segment", kernels.tri_dists_to_segment,
         (mesh.tri_xy, ids, np.array([0.2, 0.5]), np.array([0.8, 0.5]))),
        ("raster_union_of_disks", kernels.raster_union_of_disks,
         (cloud, 0.05, -0.1, -0.1, 0.001, 1300, 1300)),
        ("points_near_segments", kernels.points_near_segments,
         (pts, segs, 0.02)),
    )
    for name, fn, args in cases:
        fn(*args)  # warm-up (and jit compilation)
        print(f"ROW,{name},{path},{_time(fn, *args):.6f}", flush=True)


def run_outer():
    rows = {}
    for flag, path in (("1", "jit"), ("0", "numpy")):
        env = dict(os.environ, EIGENFRAC_JIT=flag)
        out = subprocess.run([sys.executable, __file__, "--inner"],
                             env=env, capture_output=True, text=True,
                             check=True).stdout
        for line in out.splitlines():
            if line.startswith("ROW,"):
                _, name, p, sec = line.split(",")
                rows.setdefault(name, {})[p] = float(sec)

    print(f"{'kernel':<24} {'jit [s]':>10} {'numpy [s]':>10} {'speedup':>8}")
    for name, r in rows.items():
        speed = r["numpy"] / r["jit"] if r["jit"] > 0 else float("inf")
        print(f"{name:<24} {r['jit']:>10.4f} {r['numpy']:>10.4f} "
              f"{speed:>7.1f}x")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--inner", action="store_true",
                    help="time the current import path and emit rows")
    if ap.parse_args().inner:
        run_inner()
    else:
        run_outer()
