"""Experiment request validation: error paths as data, spec round trips."""

from __future__ import annotations

import pytest

from fedbus.experiment import (
    ControllerSettings,
    ExperimentSpec,
    validate_experiment,
)

from conftest import model_doc, request_doc


def errors_by_path(doc, n_participants=None):
    report = validate_experiment(doc, n_participants=n_participants)
    return {e["path"]: e["message"] for e in report.errors}


def test_valid_request_passes():
    report = validate_experiment(request_doc(), n_participants=3)
    assert report.valid
    assert report.to_doc() == {"valid": True, "errors": []}


def test_request_must_be_object():
    errors = errors_by_path([1, 2])
    assert errors[""] == "request must be a JSON object"


def test_top_level_fields():
    errors = errors_by_path({"settings": request_doc()["settings"], "extra": 1})
    assert errors["model_config"] == "required"
    assert errors["/extra"] == "unknown field"
    errors = errors_by_path({"model_config": model_doc()})
    assert errors["settings"] == "required"


def test_model_config_errors():
    doc = request_doc()
    doc["model_config"] = {"layers": [], "seed_policy": "derived"}
    errors = errors_by_path(doc)
    assert errors["model_config/input_dim"] == "required"
    assert errors["model_config/layers"] == "must be a non-empty list"

    doc["model_config"] = {
        "input_dim": 0,
        "layers": [
            {"units": 4, "activation": "softmax"},
            {"activation": "tanh", "dropout_rate": 1.0},
            "dense",
        ],
        "output_activation": "linear",
        "init_seed": -1,
        "width": 3,
    }
    errors = errors_by_path(doc)
    assert errors["model_config/input_dim"] == "must be an integer >= 1"
    assert "must be one of" in errors["model_config/layers/0/activation"]
    assert errors["model_config/layers/1/units"] == "required"
    assert errors["model_config/layers/1/dropout_rate"] == "must be in [0, 1)"
    assert errors["model_config/layers/2"] == "must be an object"
    assert errors["model_config/output_activation"] == "only sigmoid output is supported"
    assert errors["model_config/init_seed"] == "must be an integer >= 0"
    assert errors["model_config/width"] == "unknown field"


def test_init_seed_conditional_on_policy():
    doc = request_doc()
    del doc["model_config"]["init_seed"]
    errors = errors_by_path(doc)
    assert errors["model_config/init_seed"] == "required when seed_policy is explicit"
    doc["model_config"]["seed_policy"] = "derived"
    assert errors_by_path(doc) == {}


def test_rounds_and_quorum():
    errors = errors_by_path(request_doc(rounds=0))
    assert errors["settings/rounds"] == "must be an integer >= 1"
    errors = errors_by_path(request_doc(rounds=2.5))
    assert errors["settings/rounds"] == "must be an integer >= 1"
    doc = request_doc()
    del doc["settings"]["rounds"]
    del doc["settings"]["min_replies"]
    errors = errors_by_path(doc)
    assert errors["settings/rounds"] == "required"
    assert errors["settings/min_replies"] == "required"
    # quorum check only applies when the deployment size is known
    assert errors_by_path(request_doc(min_replies=5)) == {}
    errors = errors_by_path(request_doc(min_replies=5), n_participants=3)
    assert errors["settings/min_replies"] == "exceeds the 3 registered participants"
    assert errors_by_path(request_doc(min_replies=3), n_participants=3) == {}


def test_timeout_and_flag_types():
    errors = errors_by_path(request_doc(ack_timeout=0))
    assert errors["settings/ack_timeout"] == "must be a positive number of seconds"
    errors = errors_by_path(request_doc(train_timeout="fast"))
    assert errors["settings/train_timeout"] == "must be a positive number of seconds"
    errors = errors_by_path(request_doc(pre_eval="yes"))
    assert errors["settings/pre_eval"] == "must be a boolean"
    errors = errors_by_path(request_doc(stream=True))
    assert errors["settings/stream"] == "unknown field"


def test_algorithm_mu_conditionals():
    doc = request_doc(algorithm={"kind": "feddyn"})
    assert errors_by_path(doc)["settings/algorithm/mu"] == "required for feddyn"
    doc = request_doc(algorithm={"kind": "feddyn", "mu": 0})
    assert errors_by_path(doc)["settings/algorithm/mu"] == "must be > 0 for feddyn"
    doc = request_doc(algorithm={"kind": "fedprox"})
    assert errors_by_path(doc)["settings/algorithm/mu"] == "required for fedprox"
    # fedavg allows mu >= 0 but it is meaningless; negative still rejected
    assert errors_by_path(request_doc(algorithm={"kind": "fedavg", "mu": 0.0})) == {}
    doc = request_doc(algorithm={"kind": "fedavg", "mu": -1})
    assert errors_by_path(doc)["settings/algorithm/mu"] == "must be >= 0"


def test_algorithm_other_fields():
    errors = errors_by_path(request_doc(algorithm={"kind": "gossip"}))
    assert "must be one of" in errors["settings/algorithm/kind"]
    doc = request_doc()
    doc["settings"]["algorithm"] = {}
    assert errors_by_path(doc)["settings/algorithm/kind"] == "required"
    errors = errors_by_path(request_doc(algorithm="fedavg"))
    assert errors["settings/algorithm"] == "must be an object"
    errors = errors_by_path(
        request_doc(algorithm={"kind": "fedavg", "retained_fraction": 1.0})
    )
    assert errors["settings/algorithm/retained_fraction"] == "must be in [0, 1)"
    errors = errors_by_path(request_doc(algorithm={"kind": "scaffold"}))
    assert errors["settings/algorithm/local_lr"] == "required for scaffold"
    errors = errors_by_path(
        request_doc(algorithm={"kind": "scaffold", "local_lr": 0.01, "server_step": 0})
    )
    assert errors["settings/algorithm/server_step"] == "must be > 0"


def test_training_field_errors():
    errors = errors_by_path(request_doc(training={"batch_size": 0}))
    assert errors["settings/training/batch_size"] == "must be an integer >= 1"
    errors = errors_by_path(request_doc(training={"optimizer": "lbfgs"}))
    assert errors["settings/training/optimizer"] == "must be adam or sgd"
    errors = errors_by_path(request_doc(training={"loss": "mse"}))
    assert errors["settings/training/loss"] == "only binary_cross_entropy is supported"
    errors = errors_by_path(request_doc(training={"learning_rate": -0.1}))
    assert errors["settings/training/learning_rate"] == "must be > 0"
    errors = errors_by_path(request_doc(training={"class_threshold": 1.0}))
    assert errors["settings/training/class_threshold"] == "must be in (0, 1)"
    errors = errors_by_path(request_doc(training={"adam_beta1": 1.0}))
    assert errors["settings/training/adam_beta1"] == "must be in (0, 1)"
    errors = errors_by_path(request_doc(training={"momentum": 0.9}))
    assert errors["settings/training/momentum"] == "unknown field"
    # training block is optional; defaults apply
    doc = request_doc()
    del doc["settings"]["training"]
    assert errors_by_path(doc) == {}


def test_controller_validation_and_post_eval_coupling():
    good = request_doc(controllers={"plateau": {"patience": 3, "factor": 0.5}})
    assert errors_by_path(good) == {}
    errors = errors_by_path(request_doc(controllers={"plateau": {}}))
    assert errors["settings/controllers/plateau/patience"] == "required"
    errors = errors_by_path(
        request_doc(controllers={"plateau": {"patience": 2, "factor": 1.0}})
    )
    assert errors["settings/controllers/plateau/factor"] == "must be in (0, 1)"
    errors = errors_by_path(request_doc(controllers={"early_stop": {"patience": 0}}))
    assert errors["settings/controllers/early_stop/patience"] == "must be an integer >= 1"
    errors = errors_by_path(request_doc(controllers={"warmup": {}}))
    assert errors["settings/controllers/warmup"] == "unknown field"
    # controllers monitor the post-round evaluation, so it cannot be disabled
    errors = errors_by_path(
        request_doc(controllers={"early_stop": {"patience": 2}}, post_eval=False)
    )
    assert errors["settings/post_eval"] == "must be true when controllers are enabled"
    # no controllers: post_eval may be off
    assert errors_by_path(request_doc(post_eval=False)) == {}


def test_multiple_errors_reported_together():
    doc = request_doc(rounds=0, min_replies=0, algorithm={"kind": "feddyn"})
    errors = errors_by_path(doc)
    assert len(errors) == 3


def test_spec_round_trip_through_request_doc():
    doc = request_doc(
        rounds=4,
        min_replies=2,
        algorithm={"kind": "fedprox", "mu": 0.1, "retained_fraction": 0.2},
        controllers={"plateau": {"patience": 2, "factor": 0.25, "min_delta": 1e-3},
                     "early_stop": {"patience": 5}},
    )
    assert validate_experiment(doc).valid
    spec = ExperimentSpec.from_request("exp-9", doc)
    assert spec.rounds == 4
    assert spec.algorithm.kind == "fedprox"
    assert spec.controllers == ControllerSettings(
        plateau_patience=2, plateau_factor=0.25, plateau_min_delta=1e-3, stop_patience=5
    )
    again = ExperimentSpec.from_request("exp-9", spec.request_doc())
    assert again == spec
    assert validate_experiment(spec.request_doc()).valid
    assert ExperimentSpec.from_doc(spec.to_doc()) == spec


def test_round_deadline_accounts_for_eval_phases():
    spec = ExperimentSpec.from_request("e", request_doc(train_timeout=100.0, eval_timeout=7.0))
    # post_eval only: train + eval + grace
    assert spec.round_deadline_seconds() == 100.0 + 7.0 + 10.0
    both = ExperimentSpec.from_request(
        "e", request_doc(train_timeout=100.0, eval_timeout=7.0, pre_eval=True)
    )
    assert both.round_deadline_seconds() == 100.0 + 14.0 + 10.0
    neither = ExperimentSpec.from_request(
        "e", request_doc(train_timeout=100.0, eval_timeout=7.0, post_eval=False)
    )
    assert neither.round_deadline_seconds() == 110.0
