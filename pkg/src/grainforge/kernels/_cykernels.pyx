"""Compiled kernel core.

Same signatures and semantics as ``_npkernels``. Inner loops are written as
contiguous row updates (axpy / dot shapes) so the C compiler can vectorize
them. Everything is single-threaded so results do not depend on thread count.
"""

import numpy as np

cimport cython

BACKEND_NAME = "cython"


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    # eight independent partial sums so the compiler can vectorize the reduction
    cdef double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0
    cdef Py_ssize_t q = 0
    while q + 8 <= n:
        s0 += a[q] * b[q]
        s1 += a[q + 1] * b[q + 1]
        s2 += a[q + 2] * b[q + 2]
        s3 += a[q + 3] * b[q + 3]
        s4 += a[q + 4] * b[q + 4]
        s5 += a[q + 5] * b[q + 5]
        s6 += a[q + 6] * b[q + 6]
        s7 += a[q + 7] * b[q + 7]
        q += 8
    while q < n:
        s0 += a[q] * b[q]
        q += 1
    return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7))


cdef inline void _axpy(double* y, const double* x, double alpha, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t q
    for q in range(n):
        y[q] += alpha * x[q]


cdef inline double _sum(const double* a, Py_ssize_t n) noexcept nogil:
    cdef double s0 = 0, s1 = 0, s2 = 0, s3 = 0
    cdef Py_ssize_t q = 0
    while q + 4 <= n:
        s0 += a[q]
        s1 += a[q + 1]
        s2 += a[q + 2]
        s3 += a[q + 3]
        q += 4
    while q < n:
        s0 += a[q]
        q += 1
    return (s0 + s1) + (s2 + s3)


def conv2d_forward(x, w, b, int stride=1, int pad=0):
    cdef double[:, :, :, ::1] xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w)
    cdef double[::1] bv = np.ascontiguousarray(b)
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t oc = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (wd + 2 * pad - kw) // stride + 1
    out_arr = np.empty((n, oc, oh, ow), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, o, ci, ky, kx, p, q
    cdef double wval, bias
    cdef double* orow
    cdef const double* xrow
    for i in range(n):
        for o in range(oc):
            bias = bv[o]
            orow = &out[i, o, 0, 0]
            for q in range(oh * ow):
                orow[q] = bias
            for ci in range(c):
                for ky in range(kh):
                    for kx in range(kw):
                        wval = wv[o, ci, ky, kx]
                        for p in range(oh):
                            orow = &out[i, o, p, 0]
                            xrow = &xp[i, ci, p * stride + ky, kx]
                            if stride == 1:
                                _axpy(orow, xrow, wval, ow)
                            else:
                                for q in range(ow):
                                    orow[q] += wval * xrow[q * stride]
    return out_arr


def conv2d_backward(x, w, dy, int stride=1, int pad=0, bint need_dx=True):
    cdef double[:, :, :, ::1] xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w)
    cdef double[:, :, :, ::1] dyv = np.ascontiguousarray(dy)
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t oc = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = dy.shape[2], ow = dy.shape[3]

    db_arr = np.zeros(oc, dtype=np.float64)
    dw_arr = np.zeros((oc, c, kh, kw), dtype=np.float64)
    cdef double[::1] db = db_arr
    cdef double[:, :, :, ::1] dw = dw_arr

    cdef Py_ssize_t i, o, ci, ky, kx, p, q
    cdef double acc, wval
    cdef const double* dyrow
    cdef const double* xrow
    cdef double* dxrow

    for o in range(oc):
        acc = 0.0
        for i in range(n):
            acc += _sum(&dyv[i, o, 0, 0], oh * ow)
        db[o] = acc

    for i in range(n):
        for o in range(oc):
            for ci in range(c):
                for ky in range(kh):
                    for kx in range(kw):
                        acc = 0.0
                        for p in range(oh):
                            dyrow = &dyv[i, o, p, 0]
                            xrow = &xp[i, ci, p * stride + ky, kx]
                            if stride == 1:
                                acc += _dot(dyrow, xrow, ow)
                            else:
                                for q in range(ow):
                                    acc += dyrow[q] * xrow[q * stride]
                        dw[o, ci, ky, kx] += acc

    if not need_dx:
        return None, dw_arr, db_arr

    dxp_arr = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=np.float64)
    cdef double[:, :, :, ::1] dxp = dxp_arr
    for i in range(n):
        for o in range(oc):
            for ci in range(c):
                for ky in range(kh):
                    for kx in range(kw):
                        wval = wv[o, ci, ky, kx]
                        for p in range(oh):
                            dyrow = &dyv[i, o, p, 0]
                            dxrow = &dxp[i, ci, p * stride + ky, kx]
                            if stride == 1:
                                _axpy(dxrow, dyrow, wval, ow)
                            else:
                                for q in range(ow):
                                    dxrow[q * stride] += wval * dyrow[q]

    if pad:
        dx = np.ascontiguousarray(dxp_arr[:, :, pad : pad + h, pad : pad + wd])
    else:
        dx = dxp_arr
    return dx, dw_arr, db_arr


def tconv2d_forward(x, w, b):
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w)
    cdef double[::1] bv = np.ascontiguousarray(b)
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t oc = w.shape[1]
    out_arr = np.empty((n, oc, 2 * h, 2 * wd), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, o, ci, ky, kx, p, q
    cdef double wval, bias
    cdef double* orow
    cdef const double* xrow
    for i in range(n):
        for o in range(oc):
            bias = bv[o]
            orow = &out[i, o, 0, 0]
            for q in range(4 * h * wd):
                orow[q] = bias
            for ci in range(c):
                for ky in range(2):
                    for kx in range(2):
                        wval = wv[ci, o, ky, kx]
                        for p in range(h):
                            orow = &out[i, o, 2 * p + ky, kx]
                            xrow = &xv[i, ci, p, 0]
                            for q in range(wd):
                                orow[2 * q] += wval * xrow[q]
    return out_arr


def tconv2d_backward(x, w, dy):
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w)
    cdef double[:, :, :, ::1] dyv = np.ascontiguousarray(dy)
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t oc = w.shape[1]
    db_arr = np.zeros(oc, dtype=np.float64)
    dx_arr = np.zeros((n, c, h, wd), dtype=np.float64)
    dw_arr = np.zeros((c, oc, 2, 2), dtype=np.float64)
    cdef double[::1] db = db_arr
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef Py_ssize_t i, o, ci, ky, kx, p, q
    cdef double acc, wval
    cdef const double* dyrow
    cdef const double* xrow
    cdef double* dxrow
    for o in range(oc):
        acc = 0.0
        for i in range(n):
            dyrow = &dyv[i, o, 0, 0]
            for q in range(4 * h * wd):
                acc += dyrow[q]
        db[o] = acc
    for i in range(n):
        for ci in range(c):
            for o in range(oc):
                for ky in range(2):
                    for kx in range(2):
                        wval = wv[ci, o, ky, kx]
                        acc = 0.0
                        for p in range(h):
                            dyrow = &dyv[i, o, 2 * p + ky, kx]
                            xrow = &xv[i, ci, p, 0]
                            for q in range(wd):
                                acc += xrow[q] * dyrow[2 * q]
                        dw[ci, o, ky, kx] += acc
                        for p in range(h):
                            dyrow = &dyv[i, o, 2 * p + ky, kx]
                            dxrow = &dx[i, ci, p, 0]
                            for q in range(wd):
                                dxrow[q] += wval * dyrow[2 * q]
    return dx_arr, dw_arr, db_arr


def maxpool2_forward(x):
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x)
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t oh = h // 2, ow = wd // 2
    y_arr = np.empty((n, c, oh, ow), dtype=np.float64)
    idx_arr = np.empty((n, c, oh, ow), dtype=np.uint8)
    cdef double[:, :, :, ::1] y = y_arr
    cdef unsigned char[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t i, ci, p, q
    cdef double best, v
    cdef unsigned char bidx
    for i in range(n):
        for ci in range(c):
            for p in range(oh):
                for q in range(ow):
                    best = xv[i, ci, 2 * p, 2 * q]
                    bidx = 0
                    v = xv[i, ci, 2 * p, 2 * q + 1]
                    if v > best:
                        best = v
                        bidx = 1
                    v = xv[i, ci, 2 * p + 1, 2 * q]
                    if v > best:
                        best = v
                        bidx = 2
                    v = xv[i, ci, 2 * p + 1, 2 * q + 1]
                    if v > best:
                        best = v
                        bidx = 3
                    y[i, ci, p, q] = best
                    idx[i, ci, p, q] = bidx
    return y_arr, idx_arr


def maxpool2_backward(dy, idx):
    cdef double[:, :, :, ::1] dyv = np.ascontiguousarray(dy)
    cdef unsigned char[:, :, :, ::1] iv = np.ascontiguousarray(idx)
    cdef Py_ssize_t n = dy.shape[0], c = dy.shape[1], oh = dy.shape[2], ow = dy.shape[3]
    dx_arr = np.zeros((n, c, 2 * oh, 2 * ow), dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t i, ci, p, q
    cdef unsigned char b
    for i in range(n):
        for ci in range(c):
            for p in range(oh):
                for q in range(ow):
                    b = iv[i, ci, p, q]
                    dx[i, ci, 2 * p + (b >> 1), 2 * q + (b & 1)] = dyv[i, ci, p, q]
    return dx_arr


def median_filter_u8(img, int k):
    cdef int pad = k // 2
    cdef unsigned char[:, ::1] padded = np.pad(img, pad, mode="edge")
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    out_arr = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef int hist[256]
    cdef Py_ssize_t y, x, wy, wx, bin_
    cdef int need = (k * k) // 2 + 1, cum
    for y in range(h):
        for x in range(w):
            for bin_ in range(256):
                hist[bin_] = 0
            for wy in range(k):
                for wx in range(k):
                    hist[padded[y + wy, x + wx]] += 1
            cum = 0
            for bin_ in range(256):
                cum += hist[bin_]
                if cum >= need:
                    out[y, x] = <unsigned char> bin_
                    break
    return out_arr


def power_argmin(cx, cy, rsq, int width, int height):
    cdef double[::1] cxv = np.ascontiguousarray(cx, dtype=np.float64)
    cdef double[::1] cyv = np.ascontiguousarray(cy, dtype=np.float64)
    cdef double[::1] rv = np.ascontiguousarray(rsq, dtype=np.float64)
    cdef Py_ssize_t m = cxv.shape[0]
    labels_arr = np.zeros((height, width), dtype=np.int32)
    cdef int[:, ::1] labels = labels_arr
    cdef Py_ssize_t y, x, i
    cdef double px, py, d, best, dx, dyy
    for y in range(height):
        py = y + 0.5
        for x in range(width):
            px = x + 0.5
            best = (px - cxv[0]) * (px - cxv[0]) + (py - cyv[0]) * (py - cyv[0]) - rv[0]
            labels[y, x] = 0
            for i in range(1, m):
                dx = px - cxv[i]
                dyy = py - cyv[i]
                d = dx * dx + dyy * dyy - rv[i]
                if d < best:
                    best = d
                    labels[y, x] = i
    return labels_arr
