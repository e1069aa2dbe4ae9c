"""Three-stage extraction: edge fusion, initial guess, iterative refinement.

The refinement loop feeds the refiner its own thresholded output until the
sum of absolute pixel differences between successive iterates drops below
coefficient * N_pixels * 255 (strict inequality), or max_iterations is hit.
Also provides the boundary-accuracy metric and the from-pure-noise demo.
"""

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import edges as gedges
from . import image as gimg

MAX_PIXEL = 255


@dataclass(frozen=True)
class ConvergenceCriterion:
    coefficient: float = 0.003
    max_iterations: int = 200

    def __post_init__(self):
        if self.coefficient <= 0 or self.max_iterations < 1:
            raise ValueError("coefficient must be > 0 and max_iterations >= 1")

    def bound(self, n_pixels):
        return self.coefficient * n_pixels * MAX_PIXEL


@dataclass
class ExtractionResult:
    final: np.ndarray
    iterations: int
    converged: bool
    deltas: list
    guess: np.ndarray = None
    fused_edges: np.ndarray = None
    intermediates: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)


@dataclass
class AccuracyReport:
    accuracy_percent: float
    matched: int
    total: int
    tol: int
    false_positives: int


def converged(prev, nxt, crit):
    """Convergence decision and the raw delta = sum |prev - next|."""
    if prev.shape != nxt.shape:
        raise ValueError(f"shape mismatch {prev.shape} vs {nxt.shape}")
    delta = int(np.abs(prev.astype(np.int64) - nxt.astype(np.int64)).sum())
    return delta < crit.bound(prev.size), delta


def pad_to_net_dims(img, multiple=16):
    """Symmetric edge replication up to the next multiple; returns (padded, crop).

    crop is a (slice, slice) pair recovering the original region.
    """
    h, w = img.shape[:2]
    ph = (-h) % multiple
    pw = (-w) % multiple
    top, left = ph // 2, pw // 2
    pads = ((top, ph - top), (left, pw - left)) + ((0, 0),) * (img.ndim - 2)
    padded = np.pad(img, pads, mode="edge")
    return padded, (slice(top, top + h), slice(left, left + w))


def _forward_single(net, plane_01):
    """Run one (H, W) float image in [0,1]-per-channel through a net, infer mode."""
    if plane_01.ndim == 2:
        x = plane_01[None, None]
    else:  # (H, W, C) -> (1, C, H, W)
        x = plane_01.transpose(2, 0, 1)[None]
    prob = net.forward(np.ascontiguousarray(x), mode="infer")
    return prob[0, 0]


def threshold_mask(prob):
    """Sigmoid probability to {0,255}: boundary where p >= 0.5."""
    return (prob >= 0.5).astype(np.uint8) * np.uint8(MAX_PIXEL)


def initial_guess(img, edge_cfg, net1):
    """Fuse the three edge maps and run the initial-guess net."""
    gimg.require_net_dims(img)
    fused = gedges.fuse(img, edge_cfg)
    prob = _forward_single(net1, fused.astype(np.float64) / MAX_PIXEL)
    return fused, threshold_mask(prob)


def refine(guess, net2, crit, record_intermediates=False, continuous=False):
    """Iterate the refiner on its own output until the criterion is met.

    Never raises on non-convergence; the result carries converged=False. With
    continuous=True the iterate stays a float probability map (thresholded
    only for the records and the final mask); deltas are then computed on the
    255-scaled difference of the float iterates.
    """
    gimg.require_net_dims(guess)
    start = time.perf_counter()
    deltas = []
    intermediates = []
    is_converged = False
    iterations = 0
    x = guess.astype(np.float64) / MAX_PIXEL
    for _ in range(crit.max_iterations):
        iterations += 1
        prob = _forward_single(net2, x)
        if continuous:
            delta = float(np.abs(MAX_PIXEL * (prob - x)).sum())
            is_converged = delta < crit.bound(x.size)
            x = prob
        else:
            nxt = threshold_mask(prob)
            cur = (x * MAX_PIXEL).astype(np.uint8)
            is_converged, delta = converged(cur, nxt, crit)
            x = nxt.astype(np.float64) / MAX_PIXEL
        deltas.append(delta)
        if record_intermediates:
            intermediates.append(threshold_mask(x))
        if is_converged:
            break
    final = threshold_mask(x)
    return ExtractionResult(
        final=final,
        iterations=iterations,
        converged=is_converged,
        deltas=deltas,
        intermediates=intermediates,
        timings={"refine_s": time.perf_counter() - start},
    )


def extract(img, net1, net2, edge_cfg=None, crit=None, record_intermediates=False):
    """Full pipeline on one grayscale image; pads/crops non-multiple-of-16 input."""
    edge_cfg = edge_cfg or gedges.EdgeConfig()
    crit = crit or ConvergenceCriterion()
    start = time.perf_counter()
    padded, crop = pad_to_net_dims(img)
    t0 = time.perf_counter()
    fused, guess = initial_guess(padded, edge_cfg, net1)
    t1 = time.perf_counter()
    result = refine(guess, net2, crit, record_intermediates=record_intermediates)
    result.final = np.ascontiguousarray(result.final[crop])
    result.guess = np.ascontiguousarray(guess[crop])
    result.fused_edges = np.ascontiguousarray(fused[crop[0], crop[1], :])
    result.intermediates = [np.ascontiguousarray(m[crop]) for m in result.intermediates]
    result.timings = {
        "edges_and_guess_s": t1 - t0,
        "refine_s": result.timings["refine_s"],
        "total_s": time.perf_counter() - start,
    }
    return result


def accuracy(pred, truth, tol=2):
    """Boundary detection accuracy: 100 * matched / total ground-truth pixels.

    A truth pixel counts as detected when a predicted boundary pixel lies
    within Chebyshev distance tol. Predicted pixels farther than tol from any
    truth pixel are counted as false positives (reported, not scored).
    """
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    truth_on = truth > 0
    total = int(truth_on.sum())
    if total == 0:
        raise ValueError("ground truth has no boundary pixels; accuracy undefined")
    pred_on = pred > 0
    size = 2 * tol + 1
    pred_reach = ndimage.binary_dilation(pred_on, structure=np.ones((size, size), dtype=bool))
    truth_reach = ndimage.binary_dilation(truth_on, structure=np.ones((size, size), dtype=bool))
    matched = int((truth_on & pred_reach).sum())
    false_pos = int((pred_on & ~truth_reach).sum())
    return AccuracyReport(
        accuracy_percent=100.0 * matched / total,
        matched=matched,
        total=total,
        tol=tol,
        false_positives=false_pos,
    )


def generate_from_noise(net2, crit, rng_seed, width, height, record_intermediates=False):
    """Run the refiner from a uniform random {0,255} image (the generation demo)."""
    rng = np.random.default_rng(rng_seed)
    noise = (rng.integers(0, 2, size=(height, width)) * MAX_PIXEL).astype(np.uint8)
    result = refine(noise, net2, crit, record_intermediates=record_intermediates)
    result.guess = noise
    return result


def overlay(img, mask, color=(255, 0, 0)):
    """Paint mask pixels in color over a grayscale image replicated to RGB."""
    if img.shape != mask.shape:
        raise ValueError(f"shape mismatch {img.shape} vs {mask.shape}")
    rgb = np.repeat(img[:, :, None], 3, axis=2).copy()
    rgb[mask > 0] = np.asarray(color, dtype=np.uint8)
    return rgb


def save_result(result, out_dir, crit, save_iterations=False):
    """Serialize an ExtractionResult as a directory of PNGs plus summary.json."""
    os.makedirs(out_dir, exist_ok=True)
    gimg.save_image(result.final, os.path.join(out_dir, "final.png"))
    if result.guess is not None:
        gimg.save_image(result.guess, os.path.join(out_dir, "guess.png"))
    if result.fused_edges is not None:
        gimg.save_rgb(result.fused_edges, os.path.join(out_dir, "edges.png"))
    if save_iterations:
        for i, mask in enumerate(result.intermediates, start=1):
            gimg.save_image(mask, os.path.join(out_dir, f"iter_{i:04d}.png"))
    summary = {
        "iterations": result.iterations,
        "converged": result.converged,
        "deltas": result.deltas,
        "criterion": {"coefficient": crit.coefficient, "max_iterations": crit.max_iterations},
        "timings": result.timings,
    }
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
