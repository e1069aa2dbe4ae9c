"""Synthetic TEM input generation and dataset construction.

Turns ground-truth label images into TEM-like grayscale inputs: per-grain
random intensities, a weakened 180-degree-flipped copy added on top to mimic
depth-overlapped grains, salt-and-pepper / Gaussian / Poisson noise, and a
final median filter. ``build_dataset`` writes (input, target) PNG pairs plus a
JSON manifest with split assignments.
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import image as gimg
from . import microgen

MANIFEST_SCHEMA_VERSION = 1

# seed-stream tags: per-image geometry / per-image synthesis / dataset split
_STREAM_GEOMETRY = 0
_STREAM_SYNTH = 1
_STREAM_SPLIT = 2


@dataclass(frozen=True)
class SynthConfig:
    overlap_factor: float = 0.1
    sp_density: float = 0.05
    gaussian_variance: float = 0.01
    poisson_enabled: bool = True
    median_k: int = 5

    def __post_init__(self):
        if not (0.0 <= self.overlap_factor <= 1.0):
            raise ValueError("overlap_factor must be in [0, 1]")
        if not (0.0 <= self.sp_density < 1.0):
            raise ValueError("sp_density must be in [0, 1)")
        if self.gaussian_variance < 0:
            raise ValueError("gaussian_variance must be >= 0")
        if self.median_k % 2 == 0:
            raise ValueError("median_k must be odd")


@dataclass(frozen=True)
class DatasetConfig:
    """Geometry + synthesis settings for one generated dataset."""

    n_images: int = 3000
    width: int = 496
    height: int = 96
    mean_radius_min: float = 6.0
    mean_radius_max: float = 20.0
    sigma_log: float = 0.35
    min_radius: float = 3.0
    max_radius: float = 40.0
    packing: microgen.PackingConfig = microgen.PackingConfig()
    boundary: microgen.BoundarySpec = microgen.BoundarySpec()
    synth: SynthConfig = SynthConfig()

    def __post_init__(self):
        if self.n_images < 1:
            raise ValueError("n_images must be >= 1")
        if self.mean_radius_min > self.mean_radius_max:
            raise ValueError("mean radius range is inverted")


def colorize_grains(labels, rng_seed):
    """Assign each grain an independent uniform intensity in [0, 255]."""
    return _colorize_grains(labels, np.random.default_rng(rng_seed))


def _colorize_grains(labels, rng):
    shades = rng.integers(0, 256, size=int(labels.max()) + 1, dtype=np.int64)
    return shades[labels].astype(np.uint8)


def apply_overlap(img, factor):
    """Add a factor-weakened 180-degree-flipped copy onto the image."""
    if not (0.0 <= factor <= 1.0):
        raise ValueError("overlap factor must be in [0, 1]")
    return gimg.clamp_add(img, factor * gimg.flip_both(img).astype(np.float64))


def add_salt_pepper(img, density, rng_seed):
    """Overwrite exactly round(density * N) distinct pixels with 0 or 255."""
    return _add_salt_pepper(img, density, np.random.default_rng(rng_seed))


def _add_salt_pepper(img, density, rng):
    if not (0.0 <= density < 1.0):
        raise ValueError("density must be in [0, 1)")
    n = img.size
    count = int(np.rint(density * n))
    out = img.copy()
    if count:
        flat = out.reshape(-1)
        pos = rng.choice(n, size=count, replace=False)
        flat[pos] = rng.integers(0, 2, size=count, dtype=np.int64).astype(np.uint8) * 255
    return out


def add_gaussian(img, variance, rng_seed):
    """Zero-mean Gaussian noise with the given variance on the [0, 1] scale."""
    return _add_gaussian(img, variance, np.random.default_rng(rng_seed))


def _add_gaussian(img, variance, rng):
    if variance < 0:
        raise ValueError("variance must be >= 0")
    if variance == 0:
        return img.copy()
    x = img.astype(np.float64) / 255.0
    x += rng.normal(0.0, np.sqrt(variance), size=img.shape)
    return gimg.round_u8(np.clip(x, 0.0, 1.0) * 255.0)


def add_poisson(img, rng_seed):
    """Replace each pixel with a Poisson draw of mean equal to its value."""
    return _add_poisson(img, np.random.default_rng(rng_seed))


def _add_poisson(img, rng):
    drawn = rng.poisson(img.astype(np.float64))
    return np.minimum(drawn, 255).astype(np.uint8)


def synthesize_input(labels, cfg, rng_seed):
    """Full input synthesis: colorize, overlap, noise stack, median filter."""
    return _synthesize_input(labels, cfg, np.random.default_rng(rng_seed))


def _synthesize_input(labels, cfg, rng):
    img = _colorize_grains(labels, rng)
    img = apply_overlap(img, cfg.overlap_factor)
    img = _add_salt_pepper(img, cfg.sp_density, rng)
    img = _add_gaussian(img, cfg.gaussian_variance, rng)
    if cfg.poisson_enabled:
        img = _add_poisson(img, rng)
    return gimg.median_filter(img, cfg.median_k)


def substream_seed(master_seed, index):
    """Per-image stream id: dataset seed XOR image index."""
    return int(master_seed) ^ int(index)


def generate_pair(cfg, master_seed, index):
    """Generate one (input, target) pair plus bookkeeping, fully seeded."""
    sub = substream_seed(master_seed, index)
    rng_geo = np.random.default_rng([sub, _STREAM_GEOMETRY])
    mean_r = rng_geo.uniform(cfg.mean_radius_min, cfg.mean_radius_max)
    dist = microgen.GrainSizeDist.from_mean_radius(
        mean_r, cfg.sigma_log, cfg.min_radius, cfg.max_radius
    )
    target = microgen._generate_target(
        cfg.width, cfg.height, dist, cfg.packing, cfg.boundary, rng_geo
    )
    rng_synth = np.random.default_rng([sub, _STREAM_SYNTH])
    tem = _synthesize_input(target.labels, cfg.synth, rng_synth)
    return tem, target, sub


def assign_splits(n, master_seed):
    """Seeded shuffle into train/val/test at 85/7.5/7.5.

    Validation and test sizes are floored; the remainder goes to training.
    """
    n_val = int(np.floor(0.075 * n))
    n_test = int(np.floor(0.075 * n))
    order = np.random.default_rng([int(master_seed), _STREAM_SPLIT]).permutation(n)
    split = np.empty(n, dtype=object)
    split[order[:n_val]] = "val"
    split[order[n_val : n_val + n_test]] = "test"
    split[order[n_val + n_test :]] = "train"
    return list(split)


def _render_pair(args):
    cfg, master_seed, index = args
    tem, target, sub = generate_pair(cfg, master_seed, index)
    return index, tem, target, sub


def build_dataset(cfg, master_seed, out_dir, workers=1, export_labels=False):
    """Write n (input, target) PNG pairs and a manifest JSON; returns manifest path.

    Fully deterministic for a fixed (cfg, master_seed), independent of the
    worker count. I/O failures abort after writing a partial manifest note.
    """
    os.makedirs(out_dir, exist_ok=True)
    splits = assign_splits(cfg.n_images, master_seed)
    entries = []
    jobs = [(cfg, master_seed, i) for i in range(cfg.n_images)]
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = pool.map(_render_pair, jobs, chunksize=8)
                for index, tem, target, sub in results:
                    entries.append(_write_pair(out_dir, index, tem, target, sub, splits, export_labels))
        else:
            for job in jobs:
                index, tem, target, sub = _render_pair(job)
                entries.append(_write_pair(out_dir, index, tem, target, sub, splits, export_labels))
    except OSError as exc:
        _write_manifest(out_dir, cfg, master_seed, entries, partial=str(exc))
        raise
    return _write_manifest(out_dir, cfg, master_seed, entries, partial=None)


def _write_pair(out_dir, index, tem, target, sub, splits, export_labels):
    input_path = f"input_{index:05d}.png"
    target_path = f"target_{index:05d}.png"
    gimg.save_image(tem, os.path.join(out_dir, input_path))
    gimg.save_image(target.mask, os.path.join(out_dir, target_path))
    if export_labels:
        gimg.save_labels_pgm(target.labels, os.path.join(out_dir, f"labels_{index:05d}.pgm"))
    return {
        "index": index,
        "input_path": input_path,
        "target_path": target_path,
        "substream_seed": sub,
        "grain_count": len(target.circles) - target.empty_cells,
        "circle_count": len(target.circles),
        "empty_cells": target.empty_cells,
        "pack_converged": target.pack_converged,
        "split": splits[index],
    }


def _config_dict(cfg):
    d = asdict(cfg)
    return d


def _write_manifest(out_dir, cfg, master_seed, entries, partial):
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "master_seed": int(master_seed),
        "config": _config_dict(cfg),
        "images": sorted(entries, key=lambda e: e["index"]),
    }
    if partial is not None:
        manifest["partial"] = partial
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_manifest(path):
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise ValueError(f"unsupported manifest schema: {manifest.get('schema_version')}")
    return manifest


def manifest_paths(manifest, manifest_path, split=None):
    """Resolve (input, target) absolute path pairs, optionally one split only."""
    base = os.path.dirname(os.path.abspath(manifest_path))
    pairs = []
    for entry in manifest["images"]:
        if split is not None and entry["split"] != split:
            continue
        pairs.append(
            (
                os.path.join(base, entry["input_path"]),
                os.path.join(base, entry["target_path"]),
            )
        )
    return pairs
