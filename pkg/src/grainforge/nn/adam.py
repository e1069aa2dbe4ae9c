"""Adaptive moment estimation with bias correction."""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AdamHyper:
    alpha: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must be in [0, 1)")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @staticmethod
    def for_param(param):
        return AdamState(np.zeros_like(param), np.zeros_like(param))


def adam_step(param, grad, state, hyper):
    """One in-place update: moment estimates, bias correction, scaled step."""
    state.t += 1
    state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grad
    state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * grad * grad
    m_hat = state.m / (1.0 - hyper.beta1**state.t)
    v_hat = state.v / (1.0 - hyper.beta2**state.t)
    param -= hyper.alpha * m_hat / (np.sqrt(v_hat) + hyper.eps)
    return param, state
