"""Per-pixel binary cross-entropy with optional positive-class weighting."""

import numpy as np

CLAMP = 1e-12


def bce_loss(pred, target, pos_weight=1.0):
    """Mean BCE over all elements and its gradient w.r.t. pred.

    loss = mean(-(w * t * log p + (1 - t) * log(1 - p))), p clamped to
    [1e-12, 1 - 1e-12]. Targets are expected in {0, 1}.
    """
    p = np.clip(pred, CLAMP, 1.0 - CLAMP)
    terms = pos_weight * target * np.log(p) + (1.0 - target) * np.log1p(-p)
    loss = -terms.mean()
    grad = (-(pos_weight * target / p) + (1.0 - target) / (1.0 - p)) / p.size
    return loss, grad
