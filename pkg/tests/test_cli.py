import filecmp
import json
import shutil

import numpy as np
import pytest

from radio_twin.cli import EXIT_INTEGRITY, EXIT_OK, EXIT_USAGE, main
from radio_twin.config import ExperimentConfig
from radio_twin.evalkit.export import read_table
from radio_twin.models import build_model, load_trained

TINY = ["--unet-width", "4", "--unet-bottleneck-mult", "2", "--refine-width", "4", "--refine-bottleneck", "8",
        "--n-ch", "4"]


def same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    return not mismatch and not errors and all(same_tree(a / d, b / d) for d in cmp.common_dirs)


@pytest.mark.parametrize("argv", [[], ["bogus"], ["train", "--epochs", "ten"], ["train", "--nope", "1"],
                                  ["train", "--n-ch", "0"], ["train", "--split", "kfold"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert capsys.readouterr().err


def test_simulate_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["simulate", "--dataset", str(tmp_path / name), "--subjects", "2", "--duration", "12",
                     "--seed", "3"]) == EXIT_OK
    assert same_tree(tmp_path / "a", tmp_path / "b")
    assert main(["simulate", "--dataset", str(tmp_path / "c"), "--subjects", "1"]) != EXIT_OK


def test_eval_fixture(tmp_path, rng):
    y = rng.standard_normal((5, 450))
    np.save(tmp_path / "t.npy", y)
    np.savetxt(tmp_path / "p.csv", y, delimiter=",", fmt="%.17g")
    assert main(["eval", "--pred", str(tmp_path / "p.csv"), "--target", str(tmp_path / "t.npy"),
                 "--out", str(tmp_path / "o")]) == EXIT_OK
    row = read_table(tmp_path / "o" / "metrics.csv")[0]
    for key in ("rmse", "mae_mean", "mae_std", "mae_median", "mse_mean", "mse_std"):
        assert float(row[key]) == 0.0
    assert main(["eval", "--pred", str(tmp_path / "p.csv"), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert main(["eval", "--pred", str(tmp_path / "nope.npy"), "--target", str(tmp_path / "t.npy"),
                 "--out", str(tmp_path / "o")]) == EXIT_INTEGRITY


def test_train_zero_epochs_keeps_init(tmp_path, small_cohort):
    out = tmp_path / "run"
    assert main(["train", "--dataset", str(small_cohort), "--out", str(out), "--epochs", "0", *TINY]) == EXIT_OK
    kind, model, meta = load_trained(out / "unet_cascade.ckpt")
    cfg = ExperimentConfig(epochs=0, unet_width=4, unet_bottleneck_mult=2, refine_width=4, refine_bottleneck=8,
                           n_ch=4)
    fresh = build_model(kind, cfg.train_config(), 4).state_dict()
    state = model.state_dict()
    assert state.keys() == fresh.keys()
    for k in state:
        np.testing.assert_array_equal(state[k], fresh[k])
    run = json.loads((out / "run.json").read_text())
    assert run["n_train"] + run["n_test"] == run["n_segments"]
    assert (out / "train_log.ndjson").exists()


def test_train_bad_fold(tmp_path, small_cohort):
    argv = ["train", "--dataset", str(small_cohort), "--out", str(tmp_path), "--epochs", "0", "--fold", "3"]
    assert main(argv) == EXIT_USAGE


def test_integrity_error(tmp_path, small_cohort):
    bad = tmp_path / "ds"
    shutil.copytree(small_cohort, bad)
    blob = bad / "S01" / "ppg.f32"
    data = bytearray(blob.read_bytes())
    data[100] ^= 0xFF
    blob.write_bytes(bytes(data))
    assert main(["train", "--dataset", str(bad), "--out", str(tmp_path / "o"), "--epochs", "0"]) == EXIT_INTEGRITY
    assert main(["train", "--dataset", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == EXIT_INTEGRITY


def test_default_ablation_grid():
    cfg = ExperimentConfig()
    assert len(cfg.int_list("channels")) == 8
    assert cfg.int_list("seeds") == (0, 1, 2)


def test_ablate_small(tmp_path, small_cohort):
    out = tmp_path / "abl"
    argv = ["ablate", "--dataset", str(small_cohort), "--out", str(out), "--epochs", "1", "--channels", "2,4",
            "--seeds", "0", "--batch-size", "64", "--percent", "true", *TINY[:-2]]
    assert main(argv) == EXIT_OK
    rows = read_table(out / "ablation.csv")
    assert [int(r["n_ch"]) for r in rows] == [2, 4]
    assert float(rows[0]["overhead"]) == pytest.approx(2 / 64)
    assert (out / "ablation.png").stat().st_size > 0


def test_features_and_embeddings(tmp_path, small_cohort):
    ck = tmp_path / "run"
    assert main(["train", "--dataset", str(small_cohort), "--out", str(ck), "--epochs", "0", *TINY]) == EXIT_OK
    common = ["--dataset", str(small_cohort), "--checkpoint", str(ck / "unet_cascade.ckpt")]
    assert main(["features", *common, "--out", str(tmp_path / "f")]) == EXIT_OK
    assert (tmp_path / "f" / "feature_summary.csv").exists()
    assert main(["export-embeddings", *common, "--out", str(tmp_path / "e")]) == EXIT_OK
    rows = read_table(tmp_path / "e" / "embeddings.csv")
    assert len(rows) % 2 == 0 and rows
