"""Pure-NumPy kernel implementations.

Reference implementations of the hot inner loops. Array layout for tensors is
(N, C, H, W) float64, C-contiguous. The compiled core in ``_cykernels.pyx``
mirrors these signatures exactly.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND_NAME = "numpy"


def conv2d_forward(x, w, b, stride=1, pad=0):
    """Cross-correlation of x (N,C,H,W) with w (OC,C,KH,KW) plus bias."""
    n, c, h, wd = x.shape
    oc, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    wmat = w.reshape(oc, c * kh * kw)
    out = np.empty((n, oc, oh, ow), dtype=np.float64)
    # im2col one sample at a time to bound the scratch buffer
    for i in range(n):
        win = sliding_window_view(xp[i], (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
        cols = win.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c * kh * kw)
        out[i] = (cols @ wmat.T).T.reshape(oc, oh, ow)
    out += b[None, :, None, None]
    return out


def conv2d_backward(x, w, dy, stride=1, pad=0, need_dx=True):
    """Gradients of conv2d_forward w.r.t. input, weights, bias."""
    n, c, h, wd = x.shape
    oc, _, kh, kw = w.shape
    _, _, oh, ow = dy.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))

    db = dy.sum(axis=(0, 2, 3))

    dw = np.zeros_like(w)
    dy_mat = dy.reshape(n, oc, oh * ow)
    for i in range(n):
        win = sliding_window_view(xp[i], (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
        cols = win.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c * kh * kw)
        dw += (dy_mat[i] @ cols).reshape(oc, c, kh, kw)

    if not need_dx:
        return None, dw, db

    # scatter dy back through each kernel tap
    dxp = np.zeros_like(xp)
    for ky in range(kh):
        for kx in range(kw):
            t = np.tensordot(dy, w[:, :, ky, kx], axes=([1], [0]))  # (N, OH, OW, C)
            dxp[:, :, ky : ky + stride * oh : stride, kx : kx + stride * ow : stride] += (
                t.transpose(0, 3, 1, 2)
            )
    dx = dxp[:, :, pad : pad + h, pad : pad + wd] if pad else dxp
    return np.ascontiguousarray(dx), dw, db


def tconv2d_forward(x, w, b):
    """Transposed convolution, kernel 2x2, stride 2: exact 2x upsampling.

    w has shape (C_in, OC, 2, 2); out[n,o,2i+ky,2j+kx] += w[c,o,ky,kx] * x[n,c,i,j].
    """
    n, c, h, wd = x.shape
    _, oc, _, _ = w.shape
    out = np.empty((n, oc, 2 * h, 2 * wd), dtype=np.float64)
    for ky in range(2):
        for kx in range(2):
            t = np.tensordot(x, w[:, :, ky, kx], axes=([1], [0]))  # (N, H, W, OC)
            out[:, :, ky::2, kx::2] = t.transpose(0, 3, 1, 2)
    out += b[None, :, None, None]
    return out


def tconv2d_backward(x, w, dy):
    """Gradients of tconv2d_forward w.r.t. input, weights, bias."""
    n, c, h, wd = x.shape
    db = dy.sum(axis=(0, 2, 3))
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    for ky in range(2):
        for kx in range(2):
            dy_ph = dy[:, :, ky::2, kx::2]  # (N, OC, H, W)
            dx += np.tensordot(dy_ph, w[:, :, ky, kx], axes=([1], [1])).transpose(0, 3, 1, 2)
            dw[:, :, ky, kx] = np.tensordot(x, dy_ph, axes=([0, 2, 3], [0, 2, 3]))
    return dx, dw, db


def maxpool2_forward(x):
    """2x2 max pooling with stride 2; returns output and window argmax.

    Ties resolve to the first maximum in row-major window order
    ((0,0), (0,1), (1,0), (1,1)), which is what np.argmax does.
    """
    n, c, h, w = x.shape
    win = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = win.reshape(n, c, h // 2, w // 2, 4)
    idx = flat.argmax(axis=-1).astype(np.uint8)
    y = np.take_along_axis(flat, idx[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(y), idx


def maxpool2_backward(dy, idx):
    """Route each upstream gradient entirely to its argmax position."""
    n, c, oh, ow = dy.shape
    flat = np.zeros((n, c, oh, ow, 4), dtype=np.float64)
    np.put_along_axis(flat, idx[..., None].astype(np.intp), dy[..., None], axis=-1)
    dx = flat.reshape(n, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * oh, 2 * ow)
    return np.ascontiguousarray(dx)


def median_filter_u8(img, k):
    """k x k median of an 8-bit image with edge-replicated borders."""
    pad = k // 2
    padded = np.pad(img, pad, mode="edge")
    win = sliding_window_view(padded, (k, k))
    # odd k -> odd window count -> the median is an exact sample value
    return np.median(win, axis=(2, 3)).astype(np.uint8)


def power_argmin(cx, cy, rsq, width, height):
    """Per-pixel argmin of the power distance |p - c_i|^2 - r_i^2.

    Pixels are sampled at their centers (x+0.5, y+0.5). Ties keep the lowest
    circle index (strict < update).
    """
    xs = np.arange(width, dtype=np.float64) + 0.5
    ys = np.arange(height, dtype=np.float64) + 0.5
    best = np.full((height, width), np.inf, dtype=np.float64)
    labels = np.zeros((height, width), dtype=np.int32)
    for i in range(len(cx)):
        d = (xs[None, :] - cx[i]) ** 2 + (ys[:, None] - cy[i]) ** 2 - rsq[i]
        closer = d < best
        labels[closer] = i
        best[closer] = d[closer]
    return labels
