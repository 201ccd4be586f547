import pytest

from mcmlp import configfile as cf
from mcmlp.errors import ConfigError


def test_default_text_roundtrips():
    model_cfg, train_cfg = cf.parse_config_text(cf.default_config_text())
    assert model_cfg.dim == 128 and model_cfg.depth == 8
    assert train_cfg.epochs == 300 and train_cfg.base_lr == 0.01


def test_comments_and_blank_lines_ignored():
    text = """
    # a comment
    dim = 16   # trailing comment

    depth = 1
    epochs = 5
    warmup_epochs = 2
    """
    model_cfg, train_cfg = cf.parse_config_text(text)
    assert model_cfg.dim == 16 and model_cfg.depth == 1
    assert train_cfg.epochs == 5 and train_cfg.warmup_epochs == 2


def test_unknown_key_is_hard_error():
    with pytest.raises(ConfigError, match="learning_rate"):
        cf.parse_config_text("learning_rate = 0.1")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        cf.parse_config_text("dim = 8\ndim = 16")


def test_type_errors_are_descriptive():
    with pytest.raises(ConfigError, match="integer"):
        cf.parse_config_text("depth = deep")
    with pytest.raises(ConfigError, match="number"):
        cf.parse_config_text("base_lr = fast")


def test_missing_equals_rejected():
    with pytest.raises(ConfigError, match="key = value"):
        cf.parse_config_text("dim 16")


def test_mixer_order_and_betas():
    model_cfg, train_cfg = cf.parse_config_text(
        "mixer_order = dct,hadamard\nbetas = 0.85,0.95"
    )
    assert model_cfg.mixer_order == ("dct", "hadamard")
    assert train_cfg.betas == (0.85, 0.95)


def test_invalid_config_values_propagate():
    with pytest.raises(ConfigError, match="power of 2"):
        cf.parse_config_text("dim = 100")


def test_load_config_from_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("dim = 32\nepochs = 4\nwarmup_epochs = 1\n")
    model_cfg, train_cfg = cf.load_config(path)
    assert model_cfg.dim == 32 and train_cfg.epochs == 4
