"""Python access to the moment retrieval core.

Configs and reports cross the boundary as JSON; arrays come back as numpy.
"""

import json as _json

from . import _vmr
from ._vmr import (
    ConfigError,
    bias_heatmap,
    candidates,
    distance_correlation,
    evaluate,
    freq_prior,
    grad_probes,
    iou,
    ood_transform,
    positional_embedding,
    scaled_labels,
)

__all__ = [
    "ConfigError",
    "bias_heatmap",
    "candidates",
    "distance_correlation",
    "evaluate",
    "experiment_config",
    "freq_prior",
    "generate_dataset",
    "grad_probes",
    "iou",
    "ood_transform",
    "positional_embedding",
    "run_experiment",
    "scaled_labels",
    "summary_table",
]


def generate_dataset(config=None, seed=0):
    """Synthetic train/val/test splits as dicts of videos."""
    return _vmr.generate_dataset(_json.dumps(config or {}), seed)


def experiment_config(config=None):
    """The experiment config with every default filled in."""
    return _json.loads(_vmr.experiment_config(_json.dumps(config or {})))


def run_experiment(config, workers=1, out_dir=None):
    """Runs every (method, seed) cell; writes the report files when out_dir is set."""
    return _json.loads(_vmr.run_experiment(_json.dumps(config), workers, str(out_dir or "")))


def summary_table(report):
    return _vmr.summary_table(_json.dumps(report))
