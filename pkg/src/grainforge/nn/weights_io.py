"""Binary weight files.

Layout (all little-endian):

    magic "GFW1" | u32 format version | 32-byte spec SHA-256 | u32 entry count
    per entry: u32 layer index | u8 role length | role (utf-8) |
               u8 ndim | u32 * ndim dims | float32 payload

Loading verifies the stored digest against the active network spec.
"""

import struct

import numpy as np

from .network import spec_digest

MAGIC = b"GFW1"
FORMAT_VERSION = 1


class WeightsFormatError(ValueError):
    pass


def save_weights(path, spec, state):
    """Write a state dict {(layer_index, role): array} for the given spec."""
    entries = sorted(state.items(), key=lambda kv: (kv[0][0], kv[0][1]))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(spec_digest(spec))
        fh.write(struct.pack("<I", len(entries)))
        for (layer_index, role), value in entries:
            payload = np.ascontiguousarray(value, dtype="<f4")
            role_b = role.encode("utf-8")
            fh.write(struct.pack("<IB", layer_index, len(role_b)))
            fh.write(role_b)
            fh.write(struct.pack("<B", payload.ndim))
            fh.write(struct.pack(f"<{payload.ndim}I", *payload.shape))
            fh.write(payload.tobytes())


def load_weights(path, spec):
    """Read a state dict back, checking magic, version and spec digest."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise WeightsFormatError(f"{path}: not a weights file (bad magic)")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != FORMAT_VERSION:
        raise WeightsFormatError(f"{path}: unsupported format version {version}")
    digest = raw[8:40]
    if digest != spec_digest(spec):
        raise WeightsFormatError(
            f"{path}: weights were trained for a different network spec ({spec.name})"
        )
    (count,) = struct.unpack_from("<I", raw, 40)
    pos = 44
    state = {}
    for _ in range(count):
        layer_index, role_len = struct.unpack_from("<IB", raw, pos)
        pos += 5
        role = raw[pos : pos + role_len].decode("utf-8")
        pos += role_len
        (ndim,) = struct.unpack_from("<B", raw, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, pos)
        pos += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        value = np.frombuffer(raw, dtype="<f4", count=n, offset=pos).reshape(shape)
        pos += 4 * n
        state[(layer_index, role)] = value.astype(np.float64)
    if pos != len(raw):
        raise WeightsFormatError(f"{path}: trailing bytes after last entry")
    return state
