# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: windowed SSIM scan, 8-connected labelling, 5-point CG."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def ssim_scan(patch, background, ys, xs, double c1, double c2):
    cdef const double[:, ::1] P = np.ascontiguousarray(patch, dtype=np.float64)
    cdef const double[:, ::1] B = np.ascontiguousarray(background, dtype=np.float64)
    cdef const cnp.intp_t[::1] Y = np.ascontiguousarray(ys, dtype=np.intp)
    cdef const cnp.intp_t[::1] X = np.ascontiguousarray(xs, dtype=np.intp)
    cdef Py_ssize_t h = P.shape[0], w = P.shape[1]
    cdef Py_ssize_t ny = Y.shape[0], nx = X.shape[0]
    cdef Py_ssize_t i, j, u, v, y0, x0
    cdef double n = <double>(h * w)
    cdef double mu_p = 0.0, var_p = 0.0, mu_w, var_w, cov, d, dp
    cdef double[:, ::1] pc = np.empty((h, w), dtype=np.float64)
    out = np.empty((ny, nx), dtype=np.float64)
    cdef double[:, ::1] O = out

    for u in range(h):
        for v in range(w):
            mu_p += P[u, v]
    mu_p /= n
    for u in range(h):
        for v in range(w):
            pc[u, v] = P[u, v] - mu_p
            var_p += pc[u, v] * pc[u, v]
    var_p /= n

    with nogil:
        for i in range(ny):
            y0 = Y[i]
            for j in range(nx):
                x0 = X[j]
                mu_w = 0.0
                for u in range(h):
                    for v in range(w):
                        mu_w += B[y0 + u, x0 + v]
                mu_w /= n
                var_w = 0.0
                cov = 0.0
                for u in range(h):
                    for v in range(w):
                        d = B[y0 + u, x0 + v] - mu_w
                        var_w += d * d
                        cov += d * pc[u, v]
                var_w /= n
                cov /= n
                O[i, j] = ((2.0 * mu_p * mu_w + c1) * (2.0 * cov + c2)) / (
                    (mu_p * mu_p + mu_w * mu_w + c1) * (var_p + var_w + c2))
    return out


cdef inline cnp.int32_t _find(cnp.int32_t[::1] parent, cnp.int32_t a) noexcept nogil:
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


cdef inline void _union(cnp.int32_t[::1] parent, cnp.int32_t a, cnp.int32_t b) noexcept nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a < b:
        parent[b] = a
    elif b < a:
        parent[a] = b


def label8(mask):
    cdef const cnp.uint8_t[:, ::1] M = np.ascontiguousarray(mask, dtype=bool).view(np.uint8)
    cdef Py_ssize_t h = M.shape[0], w = M.shape[1]
    labels = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] L = labels
    # provisional labels are bounded by the pixel count
    parent_arr = np.zeros(h * w + 1, dtype=np.int32)
    cdef cnp.int32_t[::1] parent = parent_arr
    remap_arr = np.zeros(h * w + 1, dtype=np.int32)
    cdef cnp.int32_t[::1] remap = remap_arr
    cdef Py_ssize_t y, x
    cdef cnp.int32_t nxt = 0, cur, nb, root, n = 0

    with nogil:
        for y in range(h):
            for x in range(w):
                if not M[y, x]:
                    continue
                cur = 0
                # already-visited neighbours: W, NW, N, NE
                if x > 0 and L[y, x - 1]:
                    cur = L[y, x - 1]
                if y > 0:
                    if x > 0 and L[y - 1, x - 1]:
                        nb = L[y - 1, x - 1]
                        if cur:
                            _union(parent, cur, nb)
                        else:
                            cur = nb
                    if L[y - 1, x]:
                        nb = L[y - 1, x]
                        if cur:
                            _union(parent, cur, nb)
                        else:
                            cur = nb
                    if x + 1 < w and L[y - 1, x + 1]:
                        nb = L[y - 1, x + 1]
                        if cur:
                            _union(parent, cur, nb)
                        else:
                            cur = nb
                if not cur:
                    nxt += 1
                    parent[nxt] = nxt
                    cur = nxt
                L[y, x] = cur

        # final labels in raster order of each component's first pixel
        for y in range(h):
            for x in range(w):
                if L[y, x]:
                    root = _find(parent, L[y, x])
                    if not remap[root]:
                        n += 1
                        remap[root] = n
                    L[y, x] = remap[root]
    return labels, int(n)


cdef void _apply(const double[:, ::1] x, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t h = x.shape[0], w = x.shape[1], i, j
    cdef double s
    for i in range(h):
        for j in range(w):
            s = 4.0 * x[i, j]
            if i > 0:
                s -= x[i - 1, j]
            if i + 1 < h:
                s -= x[i + 1, j]
            if j > 0:
                s -= x[i, j - 1]
            if j + 1 < w:
                s -= x[i, j + 1]
            out[i, j] = s


cdef double _dot(const double[:, ::1] a, const double[:, ::1] b) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s = 0.0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            s += a[i, j] * b[i, j]
    return s


def cg_poisson(x0, b, double tol, long max_iter):
    x_arr = np.array(x0, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] x = x_arr
    cdef const double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t h = x.shape[0], w = x.shape[1], i, j
    cdef double[:, ::1] r = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] p = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] ap = np.empty((h, w), dtype=np.float64)
    cdef double b_norm, rs, rs_new, rel, alpha, beta
    cdef long it = 0
    cdef bint converged = False

    b_norm = sqrt(_dot(B, B))
    if b_norm == 0.0:
        return np.zeros_like(x_arr), 0.0, 0, True

    with nogil:
        _apply(x, ap)
        for i in range(h):
            for j in range(w):
                r[i, j] = B[i, j] - ap[i, j]
                p[i, j] = r[i, j]
        rs = _dot(r, r)
        rel = sqrt(rs) / b_norm
        if rel <= tol:
            converged = True
        while not converged and it < max_iter:
            it += 1
            _apply(p, ap)
            alpha = rs / _dot(p, ap)
            for i in range(h):
                for j in range(w):
                    x[i, j] += alpha * p[i, j]
                    r[i, j] -= alpha * ap[i, j]
            rs_new = _dot(r, r)
            rel = sqrt(rs_new) / b_norm
            if rel <= tol:
                # confirm against the true residual before stopping
                _apply(x, ap)
                for i in range(h):
                    for j in range(w):
                        r[i, j] = B[i, j] - ap[i, j]
                        p[i, j] = r[i, j]
                rs_new = _dot(r, r)
                rel = sqrt(rs_new) / b_norm
                if rel <= tol:
                    converged = True
                rs = rs_new
                continue
            beta = rs_new / rs
            for i in range(h):
                for j in range(w):
                    p[i, j] = r[i, j] + beta * p[i, j]
            rs = rs_new
    return x_arr, float(rel), int(it), bool(converged)
