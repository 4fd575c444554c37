"""Config round trips, model files, CLI exit codes, artifact formats."""

import json

import numpy as np
import pytest

from ngrc import dynamics, embed, project, readout, rollout
from ngrc.errors import (ConfigError, ModelFileError,
                         UnsupportedModelVersionError)
from ngrc.harness import cli, commands, config, modelfile


def micro_config():
    """A seconds-scale variant of the scalar-channel chaotic setup."""
    cfg = config.lorenz_config()
    cfg.training.T = 600
    cfg.embedding.H = 10
    cfg.projection.m = 100
    cfg.integration.transient = 200
    cfg.rollout.test_T = 400
    cfg.rollout.n_steps = 500
    cfg.histogram.T = 600
    cfg.tasks = ("generate", "train", "feature-hist")
    return cfg


@pytest.fixture(scope="module")
def micro_run(tmp_path_factory):
    """Config file plus a completed run-all artifact directory."""
    root = tmp_path_factory.mktemp("micro")
    cfg_path = root / "micro.json"
    config.save_config(micro_config(), cfg_path)
    out = root / "artifacts"
    code = cli.main(["run-all", "--config", str(cfg_path), "--out", str(out)])
    assert code == 0
    return str(cfg_path), str(out)


# --- config plumbing ---


@pytest.mark.parametrize("name", sorted(config.PRESETS))
def test_preset_round_trips_through_dict(name):
    cfg = config.PRESETS[name]()
    again = config.config_from_dict(config.config_to_dict(cfg))
    assert again == cfg
    assert config.config_to_dict(again) == config.config_to_dict(cfg)


def test_config_file_round_trip(tmp_path):
    cfg = micro_config()
    path = tmp_path / "cfg.json"
    config.save_config(cfg, path)
    assert config.load_config(path) == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError) as err:
        config.config_from_dict({"turbo": True})
    assert "turbo" in str(err.value)
    with pytest.raises(ConfigError) as err:
        config.config_from_dict({"training": {"TT": 5}})
    assert "TT" in str(err.value)


def test_config_coerces_lists_to_tuples():
    cfg = config.config_from_dict({"tasks": ["generate"],
                                   "training": {"output_channels": ["x"]}})
    assert cfg.tasks == ("generate",)
    assert cfg.training.output_channels == ("x",)


def test_config_validation():
    with pytest.raises(ConfigError):
        config.config_from_dict({"system": {"kind": "duffing"}})
    with pytest.raises(ConfigError):
        config.config_from_dict({"training": {"T": 5},
                                 "embedding": {"H": 25}})
    with pytest.raises(ConfigError):
        config.config_from_dict({"training": {"eta_values": [0.5]}})


def test_desk_scale_caps_training_length():
    cfg = config.lorenz_config()
    assert cfg.training.T == 100000
    config.apply_desk_scale(cfg)
    assert cfg.training.T == 20000
    small = micro_config()
    config.apply_desk_scale(small)
    assert small.training.T == 600


def test_seed_offsets_and_internal_step():
    cfg = config.lorenz_config()
    cfg.master_seed = 5
    assert cfg.seed(101) == 106
    assert cfg.internal_step() == pytest.approx(0.025 / 5.0)
    cfg.integration.internal_step = 0.001
    assert cfg.internal_step() == 0.001


def test_preset_names():
    assert set(config.PRESETS) == {"lorenz", "rossler", "error-curve",
                                   "bifurcation", "bifurcation-ou", "phase"}


# --- model files ---


def toy_model():
    plan = project.build_plan(4, 5, seed=3)
    rng = np.random.default_rng(8)
    return rollout.NgrcModel(
        normalizer=embed.Normalizer([-1.0, 0.0], [2.0, 10.0], 0.01),
        plan=plan,
        weights=readout.ReadoutMatrix(rng.normal(size=(2, 5)), lam=1e-6),
        H=1, sample_step=0.25,
        output_channels=("x", "y"))


def test_model_file_round_trip(tmp_path):
    model = toy_model()
    path = tmp_path / "model.json"
    modelfile.save_model(model, path, {"note": "toy", "E_train": 1.5e-7})
    loaded, prov = modelfile.load_model_file(path)
    assert prov == {"note": "toy", "E_train": 1.5e-7}
    assert loaded.H == model.H
    assert loaded.sample_step == model.sample_step
    assert loaded.output_channels == model.output_channels
    assert loaded.input_channels == model.input_channels
    assert loaded.plan.pairs == model.plan.pairs
    assert loaded.plan.seed == model.plan.seed
    assert np.array_equal(loaded.weights.weights, model.weights.weights)
    assert loaded.weights.lam == model.weights.lam
    assert np.array_equal(loaded.normalizer.lo, model.normalizer.lo)
    assert np.array_equal(loaded.normalizer.hi, model.normalizer.hi)
    assert loaded.normalizer.epsilon == model.normalizer.epsilon


def test_model_file_errors(tmp_path):
    with pytest.raises(ModelFileError):
        modelfile.load_model(tmp_path / "absent.json")

    path = tmp_path / "model.json"
    modelfile.save_model(toy_model(), path)
    text = path.read_text()
    path.write_text(text[:len(text) // 2])
    with pytest.raises(ModelFileError):
        modelfile.load_model(path)

    data = json.loads(text)
    data["format_version"] = 99
    path.write_text(json.dumps(data))
    with pytest.raises(UnsupportedModelVersionError):
        modelfile.load_model(path)

    data["format_version"] = 1
    del data["weights"]
    path.write_text(json.dumps(data))
    with pytest.raises(ModelFileError):
        modelfile.load_model(path)

    path.write_text(json.dumps({"format": "something-else"}))
    with pytest.raises(ModelFileError):
        modelfile.load_model(path)


def run_or_partial(model, history, n_steps):
    try:
        return rollout.free_run(model, history, n_steps).values
    except rollout.DivergenceError as exc:
        return exc.partial.values if exc.partial is not None else np.empty(0)


def test_saved_model_reproduces_free_run(micro_run):
    _, out = micro_run
    model_a = modelfile.load_model(out + "/model.json")
    model_b = modelfile.load_model(out + "/model.json")
    train = dynamics.read_trajectory_csv(out + "/train_noisy.csv")
    train = dynamics.select_channels(train, model_a.channels)
    ha = rollout.seed_history(model_a, train)
    hb = rollout.seed_history(model_b, train)
    a = run_or_partial(model_a, ha, 300)
    b = run_or_partial(model_b, hb, 300)
    assert np.array_equal(a, b)


def test_train_records_provenance(micro_run):
    cfg_path, out = micro_run
    _, prov = modelfile.load_model_file(out + "/model.json")
    cfg = config.load_config(cfg_path)
    assert prov["config_sha256"] == commands._config_hash(cfg)
    assert prov["train_files"] == ["train_noisy.csv"]
    summary = json.load(open(out + "/train.json"))
    assert prov["E_train"] == summary["E_train"]


# --- artifacts ---


def test_run_all_artifacts(micro_run):
    _, out = micro_run
    summary = json.load(open(out + "/run_all.json"))
    assert summary["passed"] is True
    assert summary["task_passed"] == {"generate": True, "train": True,
                                      "feature-hist": True}
    cfg = micro_config()
    train = dynamics.read_trajectory_csv(out + "/train_clean.csv")
    assert train.n_samples == cfg.training.T
    assert train.channels == ("x", "y", "z")
    test = dynamics.read_trajectory_csv(out + "/test_clean.csv")
    assert test.n_samples == cfg.rollout.test_T
    hist = project.read_histogram_csv(out + "/feature_hist.csv")
    assert hist.counts.sum() == hist.total > 0
    gen = json.load(open(out + "/generate.json"))
    assert set(gen["files"]) >= {"train_clean.csv", "train_noisy.csv",
                                 "val_clean.csv", "val_noisy.csv",
                                 "test_clean.csv"}


def test_generate_is_bit_reproducible(micro_run, tmp_path):
    cfg_path, out = micro_run
    code = cli.main(["generate", "--config", cfg_path,
                     "--out", str(tmp_path)])
    assert code == 0
    for name in ("train_clean.csv", "train_noisy.csv", "test_clean.csv"):
        a = open(out + "/" + name, "rb").read()
        b = open(tmp_path / name, "rb").read()
        assert a == b, name


# --- CLI exit codes ---


def test_cli_help_exits_zero():
    assert cli.main(["--help"]) == 0


def test_cli_usage_errors_exit_one(tmp_path):
    assert cli.main([]) == 1
    assert cli.main(["no-such-command"]) == 1
    assert cli.main(["generate", "--bogus-flag"]) == 1
    assert cli.main(["generate", "--preset", "no-such-preset"]) == 1
    assert cli.main(["generate", "--config", str(tmp_path / "none.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not valid json")
    assert cli.main(["generate", "--config", str(bad)]) == 1
    unknown = tmp_path / "unknown.json"
    unknown.write_text('{"no_such_key": 1}')
    assert cli.main(["generate", "--config", str(unknown)]) == 1


def test_cli_rejects_bad_seed_env(micro_run, monkeypatch, tmp_path):
    cfg_path, _ = micro_run
    monkeypatch.setenv("NGRC_SEED", "not-a-number")
    assert cli.main(["generate", "--config", cfg_path,
                     "--out", str(tmp_path)]) == 1


def test_cli_seed_env_changes_noise_only(micro_run, monkeypatch, tmp_path):
    cfg_path, out = micro_run
    monkeypatch.setenv("NGRC_SEED", "7")
    assert cli.main(["generate", "--config", cfg_path,
                     "--out", str(tmp_path)]) == 0
    gen = json.load(open(tmp_path / "generate.json"))
    assert gen["seeds"]["master"] == 7
    clean_a = open(out + "/train_clean.csv", "rb").read()
    clean_b = open(tmp_path / "train_clean.csv", "rb").read()
    assert clean_a == clean_b  # deterministic flow, same initial state
    noisy_a = open(out + "/train_noisy.csv", "rb").read()
    noisy_b = open(tmp_path / "train_noisy.csv", "rb").read()
    assert noisy_a != noisy_b  # measurement noise reseeded


def test_cli_numerical_failure_exits_two(micro_run, tmp_path):
    cfg_path, _ = micro_run
    rows = np.column_stack([np.full(40, 2.5),  # constant first channel
                            np.linspace(0, 1, 40),
                            np.linspace(1, 2, 40)])
    flat = dynamics.Trajectory(0.025, ("x", "y", "z"), rows)
    train = tmp_path / "flat.csv"
    dynamics.write_trajectory_csv(flat, train)
    code = cli.main(["train", "--config", cfg_path, "--out", str(tmp_path),
                     "--train", str(train), "--val", str(train)])
    assert code == 2


def test_cli_sanity_failure_exits_three(micro_run, tmp_path):
    cfg_path, out = micro_run
    model = modelfile.load_model(out + "/model.json")
    # a readout this hot exceeds the divergence limit on the first step
    broken = rollout.NgrcModel(
        normalizer=model.normalizer, plan=model.plan,
        weights=readout.ReadoutMatrix(
            np.full_like(model.weights.weights, 1e6)),
        H=model.H, sample_step=model.sample_step,
        output_channels=model.output_channels)
    path = tmp_path / "broken.json"
    modelfile.save_model(broken, path)
    code = cli.main(["rollout", "--config", cfg_path, "--out", out,
                     "--model", str(path)])
    assert code == 3
    summary = json.load(open(out + "/rollout.json"))
    assert summary["passed"] is False
    assert summary["sanity"]["no_divergence"] is False


def test_cli_desk_scale_flag_accepted(micro_run, tmp_path):
    cfg_path, _ = micro_run
    assert cli.main(["generate", "--config", cfg_path, "--desk-scale",
                     "--out", str(tmp_path)]) == 0


def test_commands_reject_unknown_task(tmp_path):
    cfg = micro_config()
    cfg.tasks = ("generate", "no-such-task")
    with pytest.raises(ConfigError):
        commands.cmd_run_all(cfg, str(tmp_path))
