"""Deterministic JSON artifacts: conversion, byte stability, fit payloads."""

import json
import math

import numpy as np
import pytest

from isorate.abc_engine import AbcConfig, PriorSpec, run_pmc_abc
from isorate.artifacts import (
    FIT_SCHEMA,
    build_fit_artifact,
    from_special_float,
    load_json,
    save_json,
    to_jsonable,
)
from isorate.risk_models import CoverageSpec, RiskModel


def tiny_run(seed=11):
    model = RiskModel(
        frequency="poisson",
        severity="lognormal",
        free_params=("lam",),
        fixed_params={"mu": 0.0, "sigma": 1.0},
    )
    prior = PriorSpec(((0.0, 5.0),))
    config = AbcConfig(
        n_particles=40,
        n_replications=120,
        max_generations=4,
        delta_eps=0.01,
    )
    covs = [
        CoverageSpec(r=1.0, d=0.0),
        CoverageSpec(r=0.8, d=0.5, l=4.0),
        CoverageSpec(r=0.6, d=0.2, l=2.0),
        CoverageSpec(r=0.9, d=1.0),
    ]
    observed = np.array([3.1, 2.4, 1.5, 2.2])
    result = run_pmc_abc(model, observed, covs, prior, config, seed)
    return result, model, prior, config, observed, covs


class TestToJsonable:
    def test_numpy_scalars_become_python(self):
        out = to_jsonable({"a": np.float64(1.5), "b": np.int64(7)})
        assert out == {"a": 1.5, "b": 7}
        assert type(out["a"]) is float
        assert type(out["b"]) is int

    def test_arrays_become_nested_lists(self):
        out = to_jsonable(np.arange(6.0).reshape(2, 3))
        assert out == [[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]]

    def test_nonfinite_floats_become_strings(self):
        out = to_jsonable([math.inf, -math.inf, math.nan, np.float64("inf")])
        assert out == ["inf", "-inf", "nan", "inf"]

    def test_tuples_become_lists(self):
        assert to_jsonable((1, (2, 3))) == [1, [2, 3]]

    def test_special_float_round_trip(self):
        for val in [math.inf, -math.inf, 0.0, 1.25, -3.5]:
            back = from_special_float(to_jsonable(val))
            assert back == val
        assert math.isnan(from_special_float(to_jsonable(math.nan)))


class TestSaveJson:
    def test_key_insertion_order_does_not_matter(self, tmp_path):
        a = {"x": 1, "y": [1.0, 2.0], "z": {"p": 3}}
        b = {"z": {"p": 3}, "y": [1.0, 2.0], "x": 1}
        save_json(tmp_path / "a.json", a)
        save_json(tmp_path / "b.json", b)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_round_trip(self, tmp_path):
        data = {"name": "toy", "values": [1.5, 2.5], "limit": math.inf}
        save_json(tmp_path / "d.json", data)
        back = load_json(tmp_path / "d.json")
        assert back["values"] == [1.5, 2.5]
        assert from_special_float(back["limit"]) == math.inf

    def test_strict_json_no_bare_nan(self, tmp_path):
        save_json(tmp_path / "n.json", {"v": math.nan})
        text = (tmp_path / "n.json").read_text()
        assert "NaN" not in text
        assert json.loads(text) == {"v": "nan"}

    def test_trailing_newline(self, tmp_path):
        save_json(tmp_path / "t.json", {"a": 1})
        assert (tmp_path / "t.json").read_bytes().endswith(b"\n")


@pytest.fixture(scope="module")
def run():
    return tiny_run()


class TestFitArtifact:
    def test_schema_and_sections(self, run):
        result, model, prior, config, observed, covs = run
        art = build_fit_artifact(result, model, prior, config, observed, covs)
        assert art["schema"] == FIT_SCHEMA
        for key in ["seed", "model", "prior", "abc", "corridor", "observed",
                    "stop_reason", "n_simulations", "generations", "estimates",
                    "predictive", "posterior_loss_ratio"]:
            assert key in art
        assert art["model"]["free_params"] == ["lam"]
        assert art["prior"] == {"lam": [0.0, 5.0]}
        assert len(art["generations"]) == len(result.clouds)
        assert set(art["estimates"]["map"]) == {"lam"}

    def test_generation_one_threshold_serialized_as_inf(self, run):
        result, model, prior, config, observed, covs = run
        art = build_fit_artifact(result, model, prior, config, observed, covs)
        assert art["generations"][0]["epsilon"] in ("inf", pytest.approx(result.clouds[0].epsilon))
        if result.clouds[0].epsilon == math.inf:
            assert art["generations"][0]["epsilon"] == "inf"

    def test_threshold_trace_lossless(self, run):
        result, model, prior, config, observed, covs = run
        art = build_fit_artifact(result, model, prior, config, observed, covs)
        for gen, cloud in zip(art["generations"], result.clouds):
            stored = from_special_float(gen["epsilon"])
            assert stored == cloud.epsilon or abs(stored - cloud.epsilon) <= 1e-12

    def test_generation_weights_sum_to_one(self, run):
        result, model, prior, config, observed, covs = run
        art = build_fit_artifact(result, model, prior, config, observed, covs)
        for gen in art["generations"]:
            assert math.fsum(gen["weights"]) == pytest.approx(1.0, abs=1e-12)

    def test_saved_artifact_bytes_stable(self, run, tmp_path):
        result, model, prior, config, observed, covs = run
        art1 = build_fit_artifact(result, model, prior, config, observed, covs)
        art2 = build_fit_artifact(result, model, prior, config, observed, covs)
        save_json(tmp_path / "one.json", art1)
        save_json(tmp_path / "two.json", art2)
        assert (tmp_path / "one.json").read_bytes() == (tmp_path / "two.json").read_bytes()

    def test_identical_reruns_identical_artifacts(self, tmp_path):
        for name in ("r1.json", "r2.json"):
            result, model, prior, config, observed, covs = tiny_run(seed=11)
            art = build_fit_artifact(result, model, prior, config, observed, covs)
            save_json(tmp_path / name, art)
        assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()

    def test_optional_metadata_embedded(self, run):
        result, model, prior, config, observed, covs = run
        art = build_fit_artifact(
            result, model, prior, config, observed, covs,
            carriers=["c1", "c2", "c3", "c4"],
            class_info={"label": "toy"},
            posterior_lr=0.55,
        )
        assert art["observed"]["carriers"] == ["c1", "c2", "c3", "c4"]
        assert art["class"] == {"label": "toy"}
        assert art["posterior_loss_ratio"] == 0.55
