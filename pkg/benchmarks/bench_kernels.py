"""Time the compiled and numpy kernels on the same dumbbell mesh.

    python benchmarks/bench_kernels.py [--eps 0.0125] [--repeat 5]
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np
import scipy.sparse as sp

from dumbbell.geometry import DumbbellSpec, assemble_dumbbell
from dumbbell.kernels import backend
from dumbbell.mesh import MeshParams, triangulate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, default=0.0125)
    ap.add_argument("--h-bulk", type=float, default=0.02)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)

    geom = assemble_dumbbell(DumbbellSpec.symmetric_rectangles(), args.eps, args.eps)
    mesh = triangulate(geom, MeshParams(h_bulk=args.h_bulk))
    nodes, tris = mesh.nodes, mesh.triangles
    rng = np.random.default_rng(0)
    u = rng.standard_normal(mesh.n_nodes)
    pts = np.column_stack([rng.uniform(-2.5, 2.5, 2000), rng.uniform(-0.9, 0.9, 2000)])
    pts = pts[mesh.contains(pts)]
    from scipy.spatial import cKDTree

    _, start = cKDTree(mesh.centroids()).query(pts)
    start = start.astype(np.int64)
    nbr = mesh.neighbors()

    results = {"n_nodes": mesh.n_nodes, "n_triangles": mesh.n_triangles, "kernels": {}}
    for name in ("python", "cython"):
        try:
            k = backend(name)
        except ImportError:
            print(f"{name} backend unavailable")
            continue
        r = {}
        r["assemble_p1"], asm = best_of(lambda: k.assemble_p1(nodes, tris), args.repeat)
        rows, cols, vals = asm[:3]
        K = sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_nodes,) * 2)
        K.sum_duplicates()
        K.sort_indices()
        A = (K + sp.diags(asm[3])).tocsr()
        ip, ix = A.indptr.astype(np.int32), A.indices.astype(np.int32)
        kip, kix = K.indptr.astype(np.int32), K.indices.astype(np.int32)
        r["stiffness_apply"], _ = best_of(lambda: k.stiffness_apply(kip, kix, K.data, u), args.repeat)
        b = A @ u
        r["pcg_jacobi"], (x, it, _) = best_of(
            lambda: k.pcg_jacobi(ip, ix, A.data, b, np.zeros_like(b), 1e-10, 5000), args.repeat
        )
        r["pcg_iterations"] = int(it)
        r["walk_locate"], _ = best_of(lambda: k.walk_locate(nodes, tris, nbr, start, pts, 1e-10, 100000), args.repeat)
        results["kernels"][name] = r

    if args.json:
        print(json.dumps(results, indent=2))
        return
    print(f"mesh: {results['n_nodes']} nodes, {results['n_triangles']} triangles")
    names = ["assemble_p1", "stiffness_apply", "pcg_jacobi", "walk_locate"]
    ks = results["kernels"]
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in ks) + ("     speedup" if len(ks) == 2 else ""))
    for n in names:
        line = f"{n:<18}" + "".join(f"{ks[b][n] * 1e3:>10.2f}ms" for b in ks)
        if len(ks) == 2:
            line += f"{ks['python'][n] / ks['cython'][n]:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
