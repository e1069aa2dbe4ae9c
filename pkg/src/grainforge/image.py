"""Raster containers, pixel arithmetic, filtering and image file I/O.

Images are plain NumPy arrays:

* grayscale image  -- (H, W) uint8
* binary mask      -- (H, W) uint8 restricted to {0, 255}, 255 = boundary
* RGB edge image   -- (H, W, 3) uint8, each channel restricted to {0, 255}
* float image      -- (H, W) or (H, W, C) float64, finite values

All spatial filters replicate border pixels; float-to-8-bit rounding is
round-half-to-even throughout. The networks additionally require both
dimensions to be multiples of 16 (four exact 2x poolings); that constraint is
enforced at network entry, not here.
"""

import numpy as np
from PIL import Image

from . import kernels

NET_DIM_MULTIPLE = 16


class ImageFormatError(ValueError):
    """Raised for malformed files, unsupported bit depths or bad arguments."""


def require_gray(img):
    """Validate a grayscale image array."""
    if not isinstance(img, np.ndarray) or img.ndim != 2 or img.dtype != np.uint8:
        raise ImageFormatError("expected a 2-D uint8 array")
    if img.size == 0:
        raise ImageFormatError("empty image")
    return img


def require_binary(img):
    """Validate a {0,255} mask."""
    require_gray(img)
    bad = (img != 0) & (img != 255)
    if bad.any():
        raise ImageFormatError("mask contains values other than 0 and 255")
    return img


def require_net_dims(img):
    """Check the divisible-by-16 constraint the networks need."""
    h, w = img.shape[:2]
    if h < NET_DIM_MULTIPLE or w < NET_DIM_MULTIPLE or h % NET_DIM_MULTIPLE or w % NET_DIM_MULTIPLE:
        raise ImageFormatError(
            f"network input dims must be >= {NET_DIM_MULTIPLE} and divisible by "
            f"{NET_DIM_MULTIPLE}, got {w}x{h}; pad the image first (see pipeline.pad_to_net_dims)"
        )
    return img


def round_u8(values):
    """Round-half-to-even float -> uint8 with clamping to [0, 255]."""
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def median_filter(img, k):
    """k x k median filter with edge-replicated borders; k odd, k >= 3."""
    require_gray(img)
    if k % 2 == 0 or k < 3:
        raise ImageFormatError(f"median window must be odd and >= 3, got {k}")
    return kernels.median_filter_u8(img, k)


def clamp_add(a, b):
    """Per-pixel round(a + b) clamped to [0, 255]."""
    require_gray(a)
    if a.shape != b.shape:
        raise ImageFormatError(f"shape mismatch {a.shape} vs {b.shape}")
    return round_u8(a.astype(np.float64) + b)


def flip_both(img):
    """Flip horizontally and vertically (180 degree rotation)."""
    return np.ascontiguousarray(img[::-1, ::-1])


def luminance(rgb):
    """Integer luminance round(0.299 R + 0.587 G + 0.114 B)."""
    r = rgb[..., 0].astype(np.float64)
    g = rgb[..., 1].astype(np.float64)
    b = rgb[..., 2].astype(np.float64)
    return round_u8(0.299 * r + 0.587 * g + 0.114 * b)


def load_image(path, allow_color=False):
    """Load an 8-bit grayscale image from PNG or PGM.

    Color inputs are rejected unless allow_color=True, in which case they are
    converted through integer luminance. 16-bit or paletted files always fail.
    """
    path = str(path)
    if path.endswith((".pgm", ".PGM")):
        data, maxval = _read_pgm(path)
        if maxval > 255:
            raise ImageFormatError(f"{path}: 16-bit PGM is not a grayscale image input")
        return data.astype(np.uint8)
    try:
        im = Image.open(path)
        im.load()
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ImageFormatError(f"{path}: cannot decode image: {exc}") from exc
    if im.mode == "L":
        return np.asarray(im, dtype=np.uint8)
    if im.mode in ("RGB", "RGBA"):
        if not allow_color:
            raise ImageFormatError(
                f"{path}: color image; pass allow_color=True for luminance conversion"
            )
        return luminance(np.asarray(im.convert("RGB"), dtype=np.uint8))
    if im.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
        raise ImageFormatError(f"{path}: unsupported bit depth (mode {im.mode}); 8-bit only")
    raise ImageFormatError(f"{path}: unsupported image mode {im.mode}")


def save_image(img, path):
    """Write an 8-bit grayscale image as PNG or PGM (by extension)."""
    require_gray(img)
    path = str(path)
    if path.endswith((".pgm", ".PGM")):
        _write_pgm(img, path, maxval=255)
    else:
        Image.fromarray(img, mode="L").save(path, format="PNG")


def save_rgb(img, path):
    """Write an (H, W, 3) uint8 image as PNG."""
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ImageFormatError("expected an (H, W, 3) uint8 array")
    Image.fromarray(img, mode="RGB").save(str(path), format="PNG")


def load_rgb(path):
    """Load an (H, W, 3) uint8 image."""
    im = Image.open(str(path))
    im.load()
    if im.mode not in ("RGB", "RGBA"):
        raise ImageFormatError(f"{path}: expected an RGB image, got mode {im.mode}")
    return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_labels_pgm(labels, path):
    """Export a label image as 16-bit PGM (P5, maxval 65535) for debugging."""
    if labels.min() < 0 or labels.max() > 65535:
        raise ImageFormatError("label ids out of 16-bit range")
    _write_pgm(labels.astype(np.uint16), str(path), maxval=65535)


def load_labels_pgm(path):
    """Read a 16-bit PGM label image."""
    data, maxval = _read_pgm(str(path))
    if maxval != 65535:
        raise ImageFormatError(f"{path}: expected maxval 65535, got {maxval}")
    return data.astype(np.int32)


def _read_pgm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(b"P5"):
        raise ImageFormatError(f"{path}: not a binary PGM (P5) file")
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed between them
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ImageFormatError(f"{path}: bad PGM header") from exc
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    count = width * height
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    if data.size != count:
        raise ImageFormatError(f"{path}: truncated PGM payload")
    return data.reshape(height, width).astype(np.uint16 if maxval > 255 else np.uint8), maxval


def _write_pgm(img, path, maxval):
    h, w = img.shape
    payload = img.astype(">u2").tobytes() if maxval > 255 else img.astype(np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(payload)
