"""From-scratch tensor layers, the two encoder-decoder nets, and training."""

from .adam import AdamHyper, AdamState, adam_step
from .loss import bce_loss
from .network import LayerSpec, Network, NetworkSpec, net1_spec, net2_spec, spec_digest
from .train import TrainConfig, TrainHistory, lr_at_epoch, predict, steps_per_epoch, train
from .weights_io import load_weights, save_weights

__all__ = [
    "AdamHyper",
    "AdamState",
    "adam_step",
    "bce_loss",
    "LayerSpec",
    "Network",
    "NetworkSpec",
    "net1_spec",
    "net2_spec",
    "spec_digest",
    "TrainConfig",
    "TrainHistory",
    "lr_at_epoch",
    "predict",
    "steps_per_epoch",
    "train",
    "load_weights",
    "save_weights",
]
