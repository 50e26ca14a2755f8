"""Pure numpy implementations of the compiled kernels.

Each function returns the same arrays (same order, same dtypes) as its
counterpart in ``_ckernels``; results agree to roundoff.
"""

from __future__ import annotations

import numpy as np


def assemble_p1(nodes: np.ndarray, tris: np.ndarray):
    """Element stiffness triplets, lumped mass, signed areas and basis gradients.

    ``rows/cols/vals`` hold 9 entries per triangle in row-major local order.
    """
    p = nodes[tris]  # (nt, 3, 2)
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    area = 0.5 * det
    bx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / det[:, None]
    by = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / det[:, None]
    grads = np.stack([bx, by], axis=2)
    local = area[:, None, None] * (bx[:, :, None] * bx[:, None, :] + by[:, :, None] * by[:, None, :])
    rows = np.repeat(tris, 3, axis=1).reshape(-1).astype(np.int64)
    cols = np.tile(tris, (1, 3)).reshape(-1).astype(np.int64)
    mass = np.zeros(nodes.shape[0])
    np.add.at(mass, tris.reshape(-1), np.repeat(area / 3.0, 3))
    return rows, cols, local.reshape(-1), mass, area, grads


def stiffness_apply(indptr, indices, data, u):
    """K u evaluated as sum_j K_ij (u_j - u_i); exact for Neumann K with zero row sums."""
    n = indptr.size - 1
    row = np.repeat(np.arange(n), np.diff(indptr))
    terms = np.where(indices != row, data * (u[indices] - u[row]), 0.0)
    out = np.zeros(n)
    np.add.at(out, row, terms)
    return out


def pcg_jacobi(indptr, indices, data, b, x0, rtol, maxiter):
    """Jacobi-preconditioned CG; returns ``(x, iterations, relative residual)``."""
    import scipy.sparse as sp

    n = b.size
    A = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    d = A.diagonal()
    dinv = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 1.0)
    x = np.array(x0, dtype=float, copy=True)
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    bnorm = np.linalg.norm(b) or 1.0
    rnorm = np.linalg.norm(r)
    it = 0
    while rnorm > rtol * bnorm and it < maxiter:
        q = A @ p
        pq = p @ q
        if pq == 0.0:
            break
        a = rz / pq
        x += a * p
        r -= a * q
        z = dinv * r
        rz_new = r @ z
        rnorm = np.linalg.norm(r)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    return x, it, rnorm / bnorm


def walk_locate(nodes, tris, neighbors, start, points, tol, max_steps):
    """Visibility walk from ``start[q]`` toward each point.

    ``neighbors[t, a]`` is the triangle across the edge opposite local vertex
    ``a`` (-1 on the boundary). Returns ``(triangle or -1, barycentrics)``.
    """
    found = np.full(points.shape[0], -1, dtype=np.int64)
    bary = np.zeros((points.shape[0], 3))
    for q, (px, py) in enumerate(points):
        t = int(start[q])
        for _ in range(max_steps):
            (x0, y0), (x1, y1), (x2, y2) = nodes[tris[t]]
            det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            l0 = ((x1 - px) * (y2 - py) - (x2 - px) * (y1 - py)) / det
            l1 = ((x2 - px) * (y0 - py) - (x0 - px) * (y2 - py)) / det
            lam = (l0, l1, 1.0 - l0 - l1)
            worst = int(np.argmin(lam))
            if lam[worst] >= -tol:
                found[q] = t
                bary[q] = lam
                break
            if neighbors[t, worst] < 0:
                break
            t = int(neighbors[t, worst])
    return found, bary
