import pytest

from radio_twin.config import SEED_ENV, ConfigError, ExperimentConfig, parse_config_text, resolve


def test_defaults():
    cfg = resolve(env={})
    assert cfg == ExperimentConfig()
    assert cfg.int_list("channels") == (2, 4, 6, 8, 10, 12, 14, 16)


def test_precedence(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# comment\nseed = 5\nlr=0.01\nn-ch = 8  # inline\n")
    assert resolve(str(f), env={}).seed == 5
    assert resolve(str(f), env={SEED_ENV: "9"}).seed == 9
    cfg = resolve(str(f), {"seed": "11", "lr": None}, env={SEED_ENV: "9"})
    assert (cfg.seed, cfg.lr, cfg.n_ch) == (11, 0.01, 8)


@pytest.mark.parametrize("text, match", [
    ("seed: 3", "expected key=value"),
    ("colour = red", "unknown key"),
    ("epochs = ten", "cannot parse"),
    ("joint = maybe", "boolean"),
])
def test_parse_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text(text, "x.cfg")


def test_parse_reports_line():
    with pytest.raises(ConfigError, match="x.cfg:2"):
        parse_config_text("seed=1\nbogus=2", "x.cfg")


@pytest.mark.parametrize("bad", [{"n_ch": 0}, {"n_ch": 65}, {"lr": -1.0}, {"k_mode": 3},
                                 {"gelu_mode": "fast"}, {"split": "kfold"}, {"lam1": -0.1}])
def test_validation(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad)


def test_epochs_zero_allowed():
    assert ExperimentConfig(epochs=0).train_config().epochs == 0


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        resolve("/nonexistent/x.cfg", env={})


def test_train_config_overrides():
    cfg = ExperimentConfig(epochs=40, lr=1e-3, mlp_epochs=7, refine_width=4)
    assert cfg.train_config("dct_mlp").epochs == 7
    assert cfg.train_config("dct_mlp").lr == 1e-3
    assert cfg.train_config("unet_cascade").refine.widths == (4, 8, 16, 32)
    assert cfg.train_config("vitals_cnn").epochs == cfg.vitals_epochs
