"""Ground-truth microstructure generation.

Radii are sampled from a truncated lognormal until their total area covers the
domain, packed by force relaxation with annealed random perturbations, turned
into grains via the power diagram (weighted Voronoi), and rasterized into a
boundary mask of configurable thickness.

All randomness comes from numpy's PCG64 generator; every public entry point
takes a seed (int, or sequence of ints forming a SeedSequence entropy) so runs
are bit-reproducible.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels


@dataclass(frozen=True)
class GrainSizeDist:
    """Lognormal radius distribution, truncated by clamping to [min_radius, max_radius]."""

    mu_log: float
    sigma_log: float
    min_radius: float = 3.0
    max_radius: float = 40.0

    def __post_init__(self):
        if self.sigma_log <= 0:
            raise ValueError("sigma_log must be positive")
        if not (1.0 <= self.min_radius <= self.max_radius):
            raise ValueError("need 1 <= min_radius <= max_radius")

    @staticmethod
    def from_mean_radius(mean_radius, sigma_log=0.35, min_radius=3.0, max_radius=40.0):
        """Distribution whose (untruncated) mean radius is the given value."""
        mu = float(np.log(mean_radius) - 0.5 * sigma_log**2)
        return GrainSizeDist(mu, sigma_log, min_radius, max_radius)


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float


@dataclass(frozen=True)
class PackingConfig:
    max_sweeps: int = 500
    perturbation_sigma: float = 1.0
    overlap_tolerance: float = 0.02
    step_scale: float = 0.5

    def __post_init__(self):
        if self.max_sweeps < 1 or self.perturbation_sigma < 0 or self.step_scale <= 0:
            raise ValueError("packing parameters must be positive")
        if not (0 < self.overlap_tolerance < 1):
            raise ValueError("overlap_tolerance must be in (0, 1)")


@dataclass(frozen=True)
class BoundarySpec:
    thickness: int = 2

    def __post_init__(self):
        if self.thickness < 1:
            raise ValueError("boundary thickness must be >= 1")


@dataclass
class PackResult:
    circles: list
    converged: bool
    sweeps: int
    final_overlap: float
    overlap_trace: np.ndarray  # total overlap area after each executed sweep


@dataclass
class TargetResult:
    labels: np.ndarray  # (H, W) int32 circle index per pixel
    mask: np.ndarray  # (H, W) uint8 {0, 255}
    circles: list
    pack_converged: bool
    empty_cells: int  # circles whose power cell contains no pixel


def sample_radii(dist, domain_area, rng_seed):
    """Draw radii until their total circle area reaches domain_area.

    The first radius whose inclusion makes the running area sum >= domain_area
    is kept. Draws are clamped to [min_radius, max_radius].
    """
    rng = np.random.default_rng(rng_seed)
    return _sample_radii(dist, domain_area, rng)


def _sample_radii(dist, domain_area, rng):
    if domain_area <= np.pi * dist.min_radius**2:
        raise ValueError("domain area too small for the minimum radius")
    radii = []
    area = 0.0
    while area < domain_area:
        r = float(np.clip(rng.lognormal(dist.mu_log, dist.sigma_log), dist.min_radius, dist.max_radius))
        radii.append(r)
        area += np.pi * r * r
    return np.asarray(radii)


def circle_overlap_area(d, r1, r2):
    """Lens area of two overlapping circles at center distance d (vectorized)."""
    scalar = np.ndim(d) == 0 and np.ndim(r1) == 0 and np.ndim(r2) == 0
    d, r1, r2 = np.broadcast_arrays(
        np.atleast_1d(np.asarray(d, np.float64)),
        np.atleast_1d(np.asarray(r1, np.float64)),
        np.atleast_1d(np.asarray(r2, np.float64)),
    )
    out = np.zeros(d.shape)
    contained = d <= np.abs(r1 - r2)
    out[contained] = np.pi * np.minimum(r1, r2)[contained] ** 2
    partial = (~contained) & (d < r1 + r2)
    if np.any(partial):
        dp, a, b = d[partial], r1[partial], r2[partial]
        cos1 = np.clip((dp**2 + a**2 - b**2) / (2 * dp * a), -1.0, 1.0)
        cos2 = np.clip((dp**2 + b**2 - a**2) / (2 * dp * b), -1.0, 1.0)
        s = np.maximum((-dp + a + b) * (dp + a - b) * (dp - a + b) * (dp + a + b), 0.0)
        out[partial] = a**2 * np.arccos(cos1) + b**2 * np.arccos(cos2) - 0.5 * np.sqrt(s)
    return float(out[0]) if scalar else out


def _total_overlap(cx, cy, r):
    """Sum of pairwise overlap areas."""
    n = len(r)
    if n < 2:
        return 0.0
    iu, ju = np.triu_indices(n, k=1)
    d = np.hypot(cx[iu] - cx[ju], cy[iu] - cy[ju])
    return float(circle_overlap_area(d, r[iu], r[ju]).sum())


def _repulsion_step(cx, cy, r, step_scale):
    """Displacement from pairwise overlap repulsion, split equally per pair."""
    n = len(r)
    dx = np.zeros(n)
    dy = np.zeros(n)
    if n < 2:
        return dx, dy
    iu, ju = np.triu_indices(n, k=1)
    ex = cx[iu] - cx[ju]
    ey = cy[iu] - cy[ju]
    d = np.hypot(ex, ey)
    depth = (r[iu] + r[ju]) - d
    hit = depth > 0
    if not np.any(hit):
        return dx, dy
    iu, ju, ex, ey, d, depth = iu[hit], ju[hit], ex[hit], ey[hit], d[hit], depth[hit]
    # coincident centers get a deterministic separation direction
    tiny = d < 1e-9
    if np.any(tiny):
        ang = 2 * np.pi * ((31 * iu[tiny] + 17 * ju[tiny]) % 64) / 64.0
        ex[tiny] = np.cos(ang)
        ey[tiny] = np.sin(ang)
        d[tiny] = 1.0
    push = 0.5 * step_scale * depth / d
    np.add.at(dx, iu, push * ex)
    np.add.at(dy, iu, push * ey)
    np.add.at(dx, ju, -push * ex)
    np.add.at(dy, ju, -push * ey)
    return dx, dy


def pack_circles(radii, width, height, cfg, rng_seed):
    """Relax circle centers until total overlap area is within tolerance.

    Never raises on non-convergence: returns the best layout found with
    converged=False. The radius multiset is preserved exactly.
    """
    rng = np.random.default_rng(rng_seed)
    return _pack_circles(radii, width, height, cfg, rng)


def _pack_circles(radii, width, height, cfg, rng):
    r = np.asarray(radii, dtype=np.float64)
    n = len(r)
    if n == 0:
        raise ValueError("no radii to pack")
    cx = rng.uniform(0.0, width, n)
    cy = rng.uniform(0.0, height, n)
    threshold = cfg.overlap_tolerance * np.pi * float((r**2).sum())
    anneal_sweeps = max(1, int(0.9 * cfg.max_sweeps))

    overlap = _total_overlap(cx, cy, r)
    best = (overlap, cx.copy(), cy.copy())
    trace = []
    converged = False
    sweeps_used = 0
    for sweep in range(1, cfg.max_sweeps + 1):
        sweeps_used = sweep
        sigma = cfg.perturbation_sigma * max(0.0, 1.0 - (sweep - 1) / anneal_sweeps)
        dx, dy = _repulsion_step(cx, cy, r, cfg.step_scale)
        if sigma > 0:
            dx = dx + rng.normal(0.0, sigma, n)
            dy = dy + rng.normal(0.0, sigma, n)
            cx = np.clip(cx + dx, 0.0, width)
            cy = np.clip(cy + dy, 0.0, height)
            overlap = _total_overlap(cx, cy, r)
        else:
            # zero-noise phase: backtracking step so total overlap never increases
            scale = 1.0
            accepted = False
            for _ in range(8):
                tx = np.clip(cx + scale * dx, 0.0, width)
                ty = np.clip(cy + scale * dy, 0.0, height)
                new_overlap = _total_overlap(tx, ty, r)
                if new_overlap <= overlap:
                    cx, cy, overlap = tx, ty, new_overlap
                    accepted = True
                    break
                scale *= 0.5
            if not accepted:
                trace.append(overlap)
                if overlap <= threshold:
                    converged = True
                    break
                continue
        if overlap < best[0]:
            best = (overlap, cx.copy(), cy.copy())
        trace.append(overlap)
        if overlap <= threshold:
            converged = True
            break

    if not converged:
        overlap, cx, cy = best
    circles = [Circle(float(a), float(b), float(c)) for a, b, c in zip(cx, cy, r)]
    return PackResult(circles, converged, sweeps_used, float(overlap), np.asarray(trace))


def power_labels(circles, width, height):
    """Label each pixel with the circle minimizing |p - c|^2 - r^2.

    Pixels are sampled at centers (x+0.5, y+0.5); exact ties go to the lowest
    circle index.
    """
    if len(circles) == 0:
        raise ValueError("power diagram needs at least one circle")
    cx = np.array([c.cx for c in circles])
    cy = np.array([c.cy for c in circles])
    rsq = np.array([c.r**2 for c in circles])
    return kernels.power_argmin(cx, cy, rsq, int(width), int(height))


def _disc_offsets(radius):
    """Integer offsets within Euclidean distance radius of the origin."""
    reach = int(np.floor(radius))
    offs = [
        (dy, dx)
        for dy in range(-reach, reach + 1)
        for dx in range(-reach, reach + 1)
        if dx * dx + dy * dy <= radius * radius
    ]
    return offs


def boundary_mask(labels, spec):
    """Rasterize label interfaces into a {0,255} mask of the given thickness.

    A pixel seeds the boundary when any 4-neighbor has a different label; the
    seed set is dilated with a disc of radius (thickness-1)/2.
    """
    seed = np.zeros(labels.shape, dtype=bool)
    seed[:-1, :] |= labels[:-1, :] != labels[1:, :]
    seed[1:, :] |= labels[1:, :] != labels[:-1, :]
    seed[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    seed[:, 1:] |= labels[:, 1:] != labels[:, :-1]

    radius = (spec.thickness - 1) / 2.0
    offs = _disc_offsets(radius)
    if len(offs) > 1:
        reach = int(np.floor(radius))
        size = 2 * reach + 1
        footprint = np.zeros((size, size), dtype=bool)
        for dy, dx in offs:
            footprint[dy + reach, dx + reach] = True
        seed = ndimage.binary_dilation(seed, structure=footprint)
    return seed.astype(np.uint8) * np.uint8(255)


def generate_target(width, height, dist, packing_cfg, boundary_spec, rng_seed):
    """Sample radii, pack, tessellate and rasterize one ground-truth pair."""
    rng = np.random.default_rng(rng_seed)
    return _generate_target(width, height, dist, packing_cfg, boundary_spec, rng)


def _generate_target(width, height, dist, packing_cfg, boundary_spec, rng):
    if dist.max_radius > min(width, height) / 2:
        raise ValueError(
            f"max_radius {dist.max_radius} exceeds half the smallest domain side "
            f"({min(width, height) / 2})"
        )
    radii = _sample_radii(dist, float(width * height), rng)
    pack = _pack_circles(radii, width, height, packing_cfg, rng)
    labels = power_labels(pack.circles, width, height)
    mask = boundary_mask(labels, boundary_spec)
    present = np.unique(labels)
    return TargetResult(
        labels=labels,
        mask=mask,
        circles=pack.circles,
        pack_converged=pack.converged,
        empty_cells=len(pack.circles) - len(present),
    )
