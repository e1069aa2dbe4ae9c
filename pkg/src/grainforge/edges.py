"""Sobel, Laplacian-of-Gaussian and Canny detectors and their RGB fusion.

The three detectors have graded sensitivity (Sobel least, Canny most) and all
thresholds are relative to per-image maxima, so the binary outputs are
invariant to brightness offsets and positive rescaling. Channel order of the
fused map: red = Sobel, green = LoG, blue = Canny.

Functions accept uint8 images and also plain float arrays (used by tests to
check scale invariance without quantization).
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

ON = np.uint8(255)

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T


@dataclass(frozen=True)
class EdgeConfig:
    sobel_threshold: float = 0.25
    log_sigma: float = 2.0
    log_floor: float = 0.01  # zero-crossing noise floor, in response-std units
    canny_sigma: float = 1.4
    canny_low: float = 0.04
    canny_high: float = 0.10

    def __post_init__(self):
        if not (0.0 < self.canny_low < self.canny_high < 1.0):
            raise ValueError("need 0 < canny_low < canny_high < 1")
        if self.log_sigma <= 0 or self.canny_sigma <= 0:
            raise ValueError("sigmas must be positive")
        if not (0.0 < self.sobel_threshold < 1.0):
            raise ValueError("sobel_threshold must be in (0, 1)")


def convolve_replicate(img, kernel):
    """2-D correlation with edge-replicated borders, float64."""
    kh, kw = kernel.shape
    py, px = kh // 2, kw // 2
    padded = np.pad(np.asarray(img, dtype=np.float64), ((py, py), (px, px)), mode="edge")
    win = sliding_window_view(padded, (kh, kw))
    return np.einsum("ijkl,kl->ij", win, kernel, optimize=True)


def gaussian_kernel_1d(sigma):
    """Sampled Gaussian, half-width ceil(3 sigma), normalized to sum 1."""
    half = int(np.ceil(3 * sigma))
    xs = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2 * sigma**2))
    return k / k.sum()


def gaussian_smooth(img, sigma):
    k = gaussian_kernel_1d(sigma)
    out = convolve_replicate(img, k[None, :])
    return convolve_replicate(out, k[:, None])


def log_kernel(sigma):
    """Sampled Laplacian-of-Gaussian, mean-subtracted so it sums exactly to 0."""
    half = int(np.ceil(3 * sigma))
    xs = np.arange(-half, half + 1, dtype=np.float64)
    xx, yy = np.meshgrid(xs, xs)
    rr = xx**2 + yy**2
    k = (rr - 2 * sigma**2) / sigma**4 * np.exp(-rr / (2 * sigma**2))
    return k - k.mean()


def sobel_magnitude(img):
    gx = convolve_replicate(img, SOBEL_X)
    gy = convolve_replicate(img, SOBEL_Y)
    return np.hypot(gx, gy)


def sobel_edges(img, cfg=EdgeConfig()):
    """Threshold the Sobel gradient magnitude at a fraction of its maximum."""
    mag = sobel_magnitude(img)
    peak = mag.max()
    if peak == 0:
        return np.zeros(mag.shape, dtype=np.uint8)
    return (mag >= cfg.sobel_threshold * peak).astype(np.uint8) * ON


def log_edges(img, cfg=EdgeConfig()):
    """Zero crossings of the LoG response above a noise floor."""
    resp = convolve_replicate(img, log_kernel(cfg.log_sigma))
    floor = cfg.log_floor * resp.std()
    padded = np.pad(resp, 1, mode="edge")
    marked = np.zeros(resp.shape, dtype=bool)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nb = padded[1 + dy : 1 + dy + resp.shape[0], 1 + dx : 1 + dx + resp.shape[1]]
        marked |= (resp * nb < 0) & (np.abs(resp - nb) > floor)
    return marked.astype(np.uint8) * ON


def _nms(mag, gx, gy):
    """Non-maximum suppression with 4-sector angle quantization.

    Strict > against both neighbors along the gradient direction, so no two
    across-gradient neighbors can both survive.
    """
    h, w = mag.shape
    padded = np.pad(mag, 1, mode="constant", constant_values=-1.0)

    def shifted(dy, dx):
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    angle = np.mod(np.arctan2(gy, gx), np.pi)
    sector = np.floor((angle + np.pi / 8) / (np.pi / 4)).astype(np.int64) % 4
    keep = np.zeros(mag.shape, dtype=bool)
    neighbor_pairs = {
        0: ((0, -1), (0, 1)),
        1: ((-1, -1), (1, 1)),
        2: ((-1, 0), (1, 0)),
        3: ((-1, 1), (1, -1)),
    }
    for s, (a, b) in neighbor_pairs.items():
        sel = sector == s
        keep[sel] = (mag[sel] > shifted(*a)[sel]) & (mag[sel] > shifted(*b)[sel])
    return keep & (mag > 0)


def canny_edges(img, cfg=EdgeConfig()):
    """Full Canny: smoothing, Sobel gradients, NMS, hysteresis linking."""
    smoothed = gaussian_smooth(img, cfg.canny_sigma)
    gx = convolve_replicate(smoothed, SOBEL_X)
    gy = convolve_replicate(smoothed, SOBEL_Y)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak == 0:
        return np.zeros(mag.shape, dtype=np.uint8)
    thin = _nms(mag, gx, gy)
    weak = thin & (mag >= cfg.canny_low * peak)
    strong = thin & (mag >= cfg.canny_high * peak)
    # keep weak components 8-connected to at least one strong pixel
    comp, n_comp = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n_comp == 0:
        return np.zeros(mag.shape, dtype=np.uint8)
    strong_comps = np.zeros(n_comp + 1, dtype=bool)
    strong_comps[comp[strong]] = True
    strong_comps[0] = False
    return strong_comps[comp].astype(np.uint8) * ON


def fuse(img, cfg=EdgeConfig()):
    """Stack the three detector outputs into one (H, W, 3) edge image."""
    r = sobel_edges(img, cfg)
    g = log_edges(img, cfg)
    b = canny_edges(img, cfg)
    return np.stack([r, g, b], axis=-1)
