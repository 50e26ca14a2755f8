# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: P1 assembly, difference-form stiffness action,
Jacobi-preconditioned CG on CSR matrices, and walking point location.

Semantics match ``_pykernels`` exactly; see that module for documentation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def assemble_p1(const double[:, ::1] nodes, const cnp.int64_t[:, ::1] tris):
    cdef Py_ssize_t nt = tris.shape[0], nn = nodes.shape[0]
    cdef Py_ssize_t t, a, b, k
    cdef cnp.int64_t i0, i1, i2
    cdef double x0, y0, x1, y1, x2, y2, det, area
    cdef double bx[3]
    cdef double by[3]
    rows_a = np.empty(9 * nt, dtype=np.int64)
    cols_a = np.empty(9 * nt, dtype=np.int64)
    vals_a = np.empty(9 * nt, dtype=np.float64)
    mass_a = np.zeros(nn, dtype=np.float64)
    areas_a = np.empty(nt, dtype=np.float64)
    grads_a = np.empty((nt, 3, 2), dtype=np.float64)
    cdef cnp.int64_t[::1] rows = rows_a
    cdef cnp.int64_t[::1] cols = cols_a
    cdef double[::1] vals = vals_a
    cdef double[::1] mass = mass_a
    cdef double[::1] areas = areas_a
    cdef double[:, :, ::1] grads = grads_a
    cdef cnp.int64_t idx[3]
    for t in range(nt):
        i0 = tris[t, 0]; i1 = tris[t, 1]; i2 = tris[t, 2]
        x0 = nodes[i0, 0]; y0 = nodes[i0, 1]
        x1 = nodes[i1, 0]; y1 = nodes[i1, 1]
        x2 = nodes[i2, 0]; y2 = nodes[i2, 1]
        det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        area = 0.5 * det
        areas[t] = area
        bx[0] = (y1 - y2) / det; by[0] = (x2 - x1) / det
        bx[1] = (y2 - y0) / det; by[1] = (x0 - x2) / det
        bx[2] = (y0 - y1) / det; by[2] = (x1 - x0) / det
        idx[0] = i0; idx[1] = i1; idx[2] = i2
        k = 9 * t
        for a in range(3):
            grads[t, a, 0] = bx[a]
            grads[t, a, 1] = by[a]
            mass[idx[a]] += area / 3.0
            for b in range(3):
                rows[k] = idx[a]
                cols[k] = idx[b]
                vals[k] = area * (bx[a] * bx[b] + by[a] * by[b])
                k += 1
    return rows_a, cols_a, vals_a, mass_a, areas_a, grads_a


def stiffness_apply(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
                    const double[::1] data, const double[::1] u):
    cdef Py_ssize_t n = indptr.shape[0] - 1, i, p
    cdef cnp.int32_t j
    cdef double acc, ui
    out_a = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_a
    for i in range(n):
        acc = 0.0
        ui = u[i]
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j != i:
                acc += data[p] * (u[j] - ui)
        out[i] = acc
    return out_a


cdef inline void _csr_matvec(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
                             const double[::1] data, double[::1] x, double[::1] y) noexcept nogil:
    cdef Py_ssize_t n = indptr.shape[0] - 1, i, p
    cdef double acc
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        y[i] = acc


def pcg_jacobi(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices, const double[::1] data,
               const double[::1] b, double[::1] x0, double rtol, Py_ssize_t maxiter):
    cdef Py_ssize_t n = b.shape[0], i, p, it = 0
    x_a = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] x = x_a
    r_a = np.empty(n); z_a = np.empty(n); pp_a = np.empty(n); q_a = np.empty(n); dinv_a = np.empty(n)
    cdef double[::1] r = r_a
    cdef double[::1] z = z_a
    cdef double[::1] pv = pp_a
    cdef double[::1] q = q_a
    cdef double[::1] dinv = dinv_a
    cdef double bnorm = 0.0, rnorm, rz, rz_new, alpha, beta, pq, d
    with nogil:
        for i in range(n):
            d = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                if indices[p] == i:
                    d = data[p]
            dinv[i] = 1.0 / d if d > 0 else 1.0
            bnorm += b[i] * b[i]
        bnorm = sqrt(bnorm)
        _csr_matvec(indptr, indices, data, x, q)
        rz = 0.0
        rnorm = 0.0
        for i in range(n):
            r[i] = b[i] - q[i]
            z[i] = dinv[i] * r[i]
            pv[i] = z[i]
            rz += r[i] * z[i]
            rnorm += r[i] * r[i]
        rnorm = sqrt(rnorm)
        if bnorm == 0.0:
            bnorm = 1.0
        while rnorm > rtol * bnorm and it < maxiter:
            _csr_matvec(indptr, indices, data, pv, q)
            pq = 0.0
            for i in range(n):
                pq += pv[i] * q[i]
            if pq == 0.0:
                break
            alpha = rz / pq
            rz_new = 0.0
            rnorm = 0.0
            for i in range(n):
                x[i] += alpha * pv[i]
                r[i] -= alpha * q[i]
                z[i] = dinv[i] * r[i]
                rz_new += r[i] * z[i]
                rnorm += r[i] * r[i]
            rnorm = sqrt(rnorm)
            beta = rz_new / rz
            rz = rz_new
            for i in range(n):
                pv[i] = z[i] + beta * pv[i]
            it += 1
    return x_a, it, rnorm / bnorm


def walk_locate(const double[:, ::1] nodes, const cnp.int64_t[:, ::1] tris,
                const cnp.int64_t[:, ::1] neighbors, const cnp.int64_t[::1] start,
                const double[:, ::1] points, double tol, Py_ssize_t max_steps):
    cdef Py_ssize_t npt = points.shape[0], q, step, worst
    cdef cnp.int64_t t
    cdef double px, py, x0, y0, x1, y1, x2, y2, det, l0, l1, l2, lmin
    found_a = np.full(npt, -1, dtype=np.int64)
    bary_a = np.zeros((npt, 3), dtype=np.float64)
    cdef cnp.int64_t[::1] found = found_a
    cdef double[:, ::1] bary = bary_a
    for q in range(npt):
        px = points[q, 0]; py = points[q, 1]
        t = start[q]
        for step in range(max_steps):
            x0 = nodes[tris[t, 0], 0]; y0 = nodes[tris[t, 0], 1]
            x1 = nodes[tris[t, 1], 0]; y1 = nodes[tris[t, 1], 1]
            x2 = nodes[tris[t, 2], 0]; y2 = nodes[tris[t, 2], 1]
            det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            l0 = ((x1 - px) * (y2 - py) - (x2 - px) * (y1 - py)) / det
            l1 = ((x2 - px) * (y0 - py) - (x0 - px) * (y2 - py)) / det
            l2 = 1.0 - l0 - l1
            lmin = l0; worst = 0
            if l1 < lmin:
                lmin = l1; worst = 1
            if l2 < lmin:
                lmin = l2; worst = 2
            if lmin >= -tol:
                found[q] = t
                bary[q, 0] = l0; bary[q, 1] = l1; bary[q, 2] = l2
                break
            if neighbors[t, worst] < 0:
                break
            t = neighbors[t, worst]
    return found_a, bary_a
