"""Glauber dynamics on ferromagnetic Ising models.

Thin wrapper over the compiled ``_mixlab`` extension. Reports come back as
plain dictionaries decoded from the same JSON the command-line tool writes.
"""

import json

from ._mixlab import (  # noqa: F401
    CapacityError,
    IsingModel,
    checker_ids,
    gibbs_distribution,
    heat_bath_probability,
    load_model,
    local_field,
    mixing_time,
    moments,
    parse_model_text,
    run_chain,
    select_low_cov_subset,
    spectral_gap,
    tv_curve,
    unnormalized_weight,
    write_model,
)
from . import _mixlab

__all__ = [
    "CapacityError",
    "IsingModel",
    "checker_ids",
    "emit_plot_data",
    "gibbs_distribution",
    "heat_bath_probability",
    "load_model",
    "local_field",
    "mixing_time",
    "moments",
    "parse_model_text",
    "pipeline",
    "run_chain",
    "run_suite",
    "select_low_cov_subset",
    "spectral_gap",
    "tv_curve",
    "unnormalized_weight",
    "write_model",
]


def run_suite(model, suite=("all",), seed=0, k=None, replicas=2000, horizon=0,
              tv_threshold=0.25, enum_limit=12, confidence=0.99, workers=1,
              source="python"):
    """Run checkers on ``model``; returns ``(report_dict, exit_code)``."""
    text, code = _mixlab._run_suite(model, list(suite), seed, k, replicas, horizon,
                                    tv_threshold, enum_limit, confidence, workers,
                                    source)
    return json.loads(text), code


def pipeline(model, seed=0, k=None, replicas=2000, limit=12, workers=1):
    """End-to-end lower bound on the mixing time from all-plus."""
    return json.loads(_mixlab._pipeline(model, seed, k, replicas, limit, workers))


def emit_plot_data(report, series):
    """CSV text ``t,value,ci`` for one series of a report dictionary."""
    return _mixlab._emit_plot_data(json.dumps(report), series)
