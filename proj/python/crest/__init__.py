"""Class-rebalancing self-training for class-imbalanced semi-supervised learning.

Class indices are 0-based and ordered by training-set size, largest first.
"""

import json

from . import _crest
from ._crest import (
    InvalidArgument,
    IoError,
    ParseError,
    TrainingError,
    __version__,
    align,
    confusion,
    grad_check,
    init_params,
    longtail_counts,
    mean_recall,
    parameter_count,
    per_class_stats,
    predict_proba,
    resample_weights,
    sampling_rates,
    scaled_target,
    select_pseudo_labeled,
    spearman,
    split_indices,
    synth_dataset,
    temperature_schedule,
)


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def resolve_config(config):
    """Validate a run config (dict or JSON text) and return it with every default filled in."""
    return json.loads(_crest.resolve_config(_text(config)))


def run(config):
    """Run in memory and return the list of per-generation reports."""
    doc = json.loads(_crest.run_reports(_text(config)))
    if "error" in doc:
        raise TrainingError(doc["error"])
    return doc["generations"]


def execute_run(config):
    """Run and write manifest.json, reports.json, metrics.csv and training logs; returns the directory."""
    return _crest.execute_run(_text(config))


def render_plot_svg(metrics_csv, kind):
    return _crest.render_plot_svg(metrics_csv, kind)


__all__ = [name for name in dir() if not name.startswith("_") and name != "json"]
