"""Deterministic JSON persistence for inference runs.

Artifacts carry everything needed to audit a run: the configuration echo,
every generation's particles, distances, prior-over-proposal ratios and
weights, the threshold trace, and the point estimates. Serialization is
byte-stable: keys are sorted, floats use shortest round-trip repr, and no
timestamps or environment fingerprints are embedded.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .abc_engine import (
    AbcConfig,
    PriorSpec,
    RunResult,
    map_estimate,
    mode_estimate,
    predictive_summaries,
)
from .risk_models import RiskModel

__all__ = [
    "FIT_SCHEMA",
    "SYNTHETIC_SCHEMA",
    "to_jsonable",
    "save_json",
    "load_json",
    "build_fit_artifact",
]

FIT_SCHEMA = "isorate.fit.v1"
SYNTHETIC_SCHEMA = "isorate.synthetic.v1"


def to_jsonable(obj):
    """Recursively convert arrays and numpy scalars to JSON-safe values.

    Non-finite floats become the strings "inf", "-inf", "nan": strict JSON
    has no spelling for them, and a string marker survives a round trip
    unambiguously.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def from_special_float(value):
    """Inverse of the non-finite string markers used by :func:`to_jsonable`."""
    if value == "inf":
        return math.inf
    if value == "-inf":
        return -math.inf
    if value == "nan":
        return math.nan
    return value


def save_json(path, data) -> None:
    """Write JSON with sorted keys and stable float formatting."""
    text = json.dumps(to_jsonable(data), sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def build_fit_artifact(
    result: RunResult,
    model: RiskModel,
    prior: PriorSpec,
    config: AbcConfig,
    observed,
    coverages,
    carriers=None,
    class_info: dict | None = None,
    posterior_lr: float | None = None,
) -> dict:
    """Assemble the full fit artifact from a finished run."""
    observed = np.asarray(observed, dtype=float)
    final = result.final
    map_theta = map_estimate(final)
    mode_theta = mode_estimate(final, config.bandwidth_factor)
    generations = [
        {
            "generation": c.generation,
            "epsilon": c.epsilon,
            "ess": c.ess,
            "n_proposals": c.n_proposals,
            "theta": c.theta,
            "distances": c.distances,
            "ratios": c.ratios,
            "weights": c.weights,
        }
        for c in result.clouds
    ]
    artifact = {
        "schema": FIT_SCHEMA,
        "seed": result.seed,
        "class": class_info,
        "model": {
            "frequency": model.frequency,
            "severity": model.severity,
            "free_params": list(model.free_params),
            "fixed_params": dict(model.fixed_params),
        },
        "prior": {name: list(b) for name, b in zip(model.free_params, prior.bounds)},
        "abc": {
            "n_particles": config.n_particles,
            "n_replications": config.n_replications,
            "max_generations": config.max_generations,
            "delta_eps": config.delta_eps,
            "eps_min": config.eps_min,
            "bandwidth_factor": config.bandwidth_factor,
            "max_attempts": config.max_attempts,
        },
        "corridor": None if config.corridor is None else [config.corridor.low, config.corridor.high],
        "observed": {
            "commercial_premiums": observed,
            "coverages": [{"r": c.r, "d": c.d, "l": c.l} for c in coverages],
            "carriers": list(carriers) if carriers is not None else None,
        },
        "stop_reason": result.stop_reason,
        "n_simulations": result.n_simulations,
        "generations": generations,
        "estimates": {
            "map": model.theta_dict(map_theta),
            "mode": model.theta_dict(mode_theta),
        },
        "predictive": predictive_summaries(model, final),
        "posterior_loss_ratio": posterior_lr,
    }
    return to_jsonable(artifact)
