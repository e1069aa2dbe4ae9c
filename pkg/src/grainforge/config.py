"""Run configuration: JSON documents with strict key checking and profiles.

A run config has sections dataset / edges / training / pipeline / seeds.
Unknown keys anywhere are rejected; all defaults are materialized so the
echoed effective config alone reproduces a run. Two named profiles exist:
"paper" (the full-scale settings) and "desk" (a reduced CPU-friendly scale).
"""

import json
from dataclasses import dataclass

from .edges import EdgeConfig
from .microgen import BoundarySpec, PackingConfig
from .nn import TrainConfig
from .pipeline import ConvergenceCriterion
from .synth import DatasetConfig, SynthConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig
    edges: EdgeConfig
    train_net1: TrainConfig
    train_net2: TrainConfig
    criterion: ConvergenceCriterion
    tol: int
    master_seed: int


_PAPER = {
    "dataset": {
        "n": 3000,
        "width": 496,
        "height": 96,
        "dist": {
            "mean_radius_min": 6.0,
            "mean_radius_max": 20.0,
            "sigma_log": 0.35,
            "min_radius": 3.0,
            "max_radius": 40.0,
        },
        "packing": {
            "max_sweeps": 500,
            "perturbation_sigma": 1.0,
            "overlap_tolerance": 0.02,
            "step_scale": 0.5,
        },
        "boundary": {"thickness": 2},
        "synth": {
            "overlap_factor": 0.1,
            "sp_density": 0.05,
            "gaussian_variance": 0.01,
            "poisson_enabled": True,
            "median_k": 5,
        },
    },
    "edges": {
        "sobel_threshold": 0.25,
        "log_sigma": 2.0,
        "log_floor": 0.01,
        "canny_sigma": 1.4,
        "canny_low": 0.04,
        "canny_high": 0.10,
    },
    "training": {
        "net1": {
            "initial_lr": 0.1,
            "lr_factor": 0.5,
            "lr_period_epochs": 12,
            "batch_size": 102,
            "max_epochs": 120,
            "patience": 20,
            "loss": "bce",
            "beta1": 0.9,
            "beta2": 0.999,
            "eps": 1e-8,
            "seed": 0,
        },
        "net2": {
            "initial_lr": 0.1,
            "lr_factor": 0.5,
            "lr_period_epochs": 12,
            "batch_size": 102,
            "max_epochs": 120,
            "patience": 20,
            "loss": "bce",
            "beta1": 0.9,
            "beta2": 0.999,
            "eps": 1e-8,
            "seed": 1,
        },
    },
    "pipeline": {"criterion": {"coefficient": 0.003, "max_iterations": 200}, "tol": 2},
    "seeds": {"master": 0},
}

# reduced configuration for CPU-scale runs and CI
_DESK = {
    "dataset": {
        "n": 300,
        "width": 128,
        "height": 64,
        "dist": {
            "mean_radius_min": 5.0,
            "mean_radius_max": 13.0,
            "sigma_log": 0.35,
            "min_radius": 3.0,
            "max_radius": 28.0,
        },
    },
    "training": {
        "net1": {"batch_size": 16, "initial_lr": 0.02, "max_epochs": 40, "patience": 10, "loss": "weighted_bce"},
        "net2": {"batch_size": 16, "initial_lr": 0.02, "max_epochs": 40, "patience": 10, "loss": "weighted_bce"},
    },
}

PROFILES = ("paper", "desk")


def _deep_merge(base, overlay, path=""):
    """Merge overlay into base recursively, rejecting keys absent from base."""
    out = dict(base)
    for key, value in overlay.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be an object")
            out[key] = _deep_merge(base[key], value, where)
        else:
            out[key] = value
    return out


def profile_defaults(profile):
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {PROFILES}")
    if profile == "paper":
        return json.loads(json.dumps(_PAPER))
    return _deep_merge(_PAPER, _DESK)


def effective_config(profile="desk", config_doc=None, overrides=None):
    """Profile defaults + optional user document + CLI overrides, fully resolved."""
    doc = profile_defaults(profile)
    if config_doc:
        doc = _deep_merge(doc, config_doc)
    if overrides:
        doc = _deep_merge(doc, overrides)
    return doc


def load_config_file(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def build_run_config(doc):
    """Materialize a fully-resolved document into validated config objects."""
    ds = doc["dataset"]
    try:
        dataset = DatasetConfig(
            n_images=ds["n"],
            width=ds["width"],
            height=ds["height"],
            mean_radius_min=ds["dist"]["mean_radius_min"],
            mean_radius_max=ds["dist"]["mean_radius_max"],
            sigma_log=ds["dist"]["sigma_log"],
            min_radius=ds["dist"]["min_radius"],
            max_radius=ds["dist"]["max_radius"],
            packing=PackingConfig(**ds["packing"]),
            boundary=BoundarySpec(**ds["boundary"]),
            synth=SynthConfig(**ds["synth"]),
        )
        edge_cfg = EdgeConfig(**doc["edges"])
        train1 = TrainConfig(**doc["training"]["net1"])
        train2 = TrainConfig(**doc["training"]["net2"])
        criterion = ConvergenceCriterion(**doc["pipeline"]["criterion"])
        tol = int(doc["pipeline"]["tol"])
        master_seed = int(doc["seeds"]["master"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    if tol < 0:
        raise ConfigError("pipeline.tol must be >= 0")
    return RunConfig(dataset, edge_cfg, train1, train2, criterion, tol, master_seed)
