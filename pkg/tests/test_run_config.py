import json
import random
from pathlib import Path

import pytest

from errors import GeosegError
from run_config import RESOLVED_NAME, RunConfig, load_run_config, read_config_file, save_resolved

CHOICES = {
    "model": ["UNet", "SegNet", "BRNet"],
    "seed": [1, 7, 42],
    "batch_size": [2, 8, 16],
    "learning_rate": [1e-3, 5e-4],
    "tile_size": [64, 128],
    "samples": [2, 4],
    "min_coverage": [0.0, 0.2],
}


def write_config(tmp_path, values, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(values))
    return path


def test_defaults():
    config = RunConfig()
    assert config.model == "UNet"
    assert config.learning_rate == 2e-4
    assert config.betas == (0.9, 0.999)
    assert config.batch_size == 24
    assert config.iterations == 5000
    assert config.tile_size == 224
    assert config.min_coverage == 0.05
    assert config.val_fraction == 0.3
    assert (config.canny_low, config.canny_high, config.canny_sigma) == (50.0, 100.0, 1.4)
    assert config.device == "cpu"


def test_flag_over_file_over_default(tmp_path):
    gen = random.Random(11)
    defaults = RunConfig()
    for trial in range(50):
        keys = list(CHOICES)
        in_file = {k: gen.choice(CHOICES[k]) for k in gen.sample(keys, gen.randint(0, len(keys)))}
        flags = {k: gen.choice(CHOICES[k]) for k in gen.sample(keys, gen.randint(0, len(keys)))}
        # Flags left unset by the parser arrive as None
        flags.update({k: None for k in keys if k not in flags and gen.random() < 0.5})

        config = load_run_config(write_config(tmp_path, in_file, f"c{trial}.json"), flags)
        for key in keys:
            if flags.get(key) is not None:
                expected = flags[key]
            elif key in in_file:
                expected = in_file[key]
            else:
                expected = getattr(defaults, key)
            assert getattr(config, key) == expected, key


def test_without_config_file():
    assert load_run_config(None, {"seed": 3}).seed == 3
    assert load_run_config().seed == 0


def test_unknown_key_is_rejected(tmp_path):
    with pytest.raises(GeosegError) as exc:
        load_run_config(write_config(tmp_path, {"learning_rat": 0.1}))
    assert exc.value.code == "invalid-config"
    assert "learning_rat" in exc.value.detail


def test_invalid_values_are_rejected(tmp_path):
    with pytest.raises(GeosegError) as exc:
        load_run_config(write_config(tmp_path, {"batch_size": 0}))
    assert exc.value.code == "invalid-config"
    with pytest.raises(GeosegError):
        load_run_config(None, {"val_fraction": 1.5})


def test_config_file_errors(tmp_path):
    with pytest.raises(GeosegError) as exc:
        read_config_file(tmp_path / "missing.json")
    assert exc.value.code == "invalid-config"

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(GeosegError):
        read_config_file(bad)

    with pytest.raises(GeosegError) as exc:
        read_config_file(write_config(tmp_path, {"training": {"batch_size": 4}}))
    assert "training" in exc.value.detail

    with pytest.raises(GeosegError):
        read_config_file(write_config(tmp_path, [1, 2, 3]))


def test_device_from_environment(monkeypatch):
    monkeypatch.setenv("GEOSEG_DEVICE", "cuda:1")
    assert RunConfig().device == "cuda:1"
    assert RunConfig(device="cpu").device == "cpu"


def test_sections():
    config = RunConfig(model="MCFCN", base_channels=8, batch_size=4, bench_batch_size=6, seed=5)
    arch = config.architecture()
    assert arch.family == "MCFCN" and arch.base_channels == 8
    assert config.architecture("FPN").family == "FPN"

    tcfg = config.training()
    assert tcfg.batch_size == 4 and tcfg.seed == 5
    assert tcfg.checkpoint_dir == Path("checkpoints") / "MCFCN"
    assert tcfg.log_dir == Path("logs") / "MCFCN"

    settings = config.bench()
    assert settings.batch_size == 6 and settings.base_channels == 8


def test_save_resolved(tmp_path):
    config = RunConfig(model="BRNet", seed=9, mc_head_weights=[0.2] * 5)
    path = save_resolved(config, tmp_path / "run")
    assert path.name == RESOLVED_NAME
    assert RunConfig.model_validate_json(path.read_text()) == config
    assert load_run_config(path) == config


def test_section_errors_are_invalid_config():
    config = RunConfig(betas=(1.5, 0.9))
    with pytest.raises(GeosegError) as exc:
        config.training()
    assert exc.value.code == "invalid-config"
    assert "betas" in exc.value.detail
