"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import hashlib
import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from radio_twin.autodiff import Tensor, grad_check, loss_deep_l1, loss_mae, loss_refine_l2
from radio_twin.autodiff import functional as F
from radio_twin.cli import main
from radio_twin.config import ExperimentConfig
from radio_twin.dataset import load_dataset
from radio_twin.evalkit.experiments import AblationPlan, ablate_channels, pooled_reports, run_folds
from radio_twin.evalkit.features import aging_index, feature_agreement, sdppg_features
from radio_twin.evalkit.splits import make_split
from radio_twin.models import MultiResSpec, TrainConfig, UnetSpec, build_model, parameter_counts, train
from radio_twin.ofdm import (OfdmConfig, ls_estimate, ofdm_demodulate, ofdm_modulate, training_symbols)
from radio_twin.physio import generate_cohort, simulate_subject
from radio_twin.preprocess import build_pairs, butterworth_lowpass, dataset_pairs, extract_d7
from radio_twin.spectral import dct2, idct2

from . import oracles
from .test_autodiff import PRIMITIVES, weighted_sum
from .test_evalkit import brute_fiducials, pulse_train
from .test_losses import _kink

# Desk-scale training preset: narrow networks, light shape penalty, cosine schedule.
DESK_UNET = TrainConfig(epochs=30, lr=4e-3, lam1=0.1, lam2=0.1, lr_schedule="cosine",
                        unet=UnetSpec(base_width=8, bottleneck_mult=8),
                        refine=MultiResSpec(widths=(8, 16, 32, 64), bottleneck=96))
DESK_MLP = TrainConfig(epochs=5, lr=1e-4)
DESK_AUGMENT = True


def report(capsys, name, ok, detail, elapsed=None):
    tail = f" [{elapsed:.1f} s]" if elapsed is not None else ""
    with capsys.disabled():
        print(f"\nACCEPTANCE {'PASS' if ok else 'FAIL'} {name}: {detail}{tail}")
    assert ok, detail


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance") / "cohort"
    generate_cohort(root, 6, 120.0, seed=7)
    return load_dataset(root)


def test_transform_exactness(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    dct_err = 0.0
    for n in (1, 2, 7, 64, 450):
        x = rng.standard_normal(n)
        dct_err = max(dct_err, np.abs(idct2(dct2(x)) - x).max(), np.abs(dct2(x) - oracles.dct2(x)).max(),
                      np.abs(idct2(x) - oracles.idct2(x)).max())
    cfg = OfdmConfig()
    d = crandn(rng, 5, cfg.n_subcarriers)
    y = ofdm_modulate(d, cfg)
    ofdm_err = max(np.abs(ofdm_demodulate(y, cfg) - d).max(),
                   max(np.abs(y[i] - oracles.idft(d[i])).max() for i in range(5)))
    dt = time.perf_counter() - t0
    ok = dct_err < 1e-9 and ofdm_err < 1e-12 and dt < 5
    report(capsys, "transforms", ok, f"dct max err {dct_err:.2e}, ofdm max err {ofdm_err:.2e}", dt)


def test_ls_estimator(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    n = OfdmConfig().n_subcarriers
    h = crandn(rng, n)
    d = training_symbols(1, seed=2)
    noiseless = np.abs(ls_estimate(d, h * d).h - h).max()
    d = training_symbols(8, seed=3)
    y = h * d + 0.1 * crandn(rng, 8, n)
    got = ls_estimate(d, y).h
    normal = max(abs(got[k] - np.linalg.solve(d[:, k:k + 1].conj().T @ d[:, k:k + 1],
                                              d[:, k:k + 1].conj().T @ y[:, k])[0]) for k in range(n))
    rms = []
    for m in (1, 2, 4, 8):
        errs = []
        for trial in range(100):
            dm = training_symbols(m, seed=1000 * m + trial)
            ym = h * dm + np.sqrt(0.025) * crandn(rng, m, n)
            errs.append(np.mean(np.abs(ls_estimate(dm, ym).h - h) ** 2))
        rms.append(float(np.sqrt(np.mean(errs))))
    dt = time.perf_counter() - t0
    decreasing = all(a > b for a, b in zip(rms, rms[1:]))
    ok = noiseless < 1e-9 and normal < 1e-10 and decreasing and dt < 10
    report(capsys, "ls_estimator", ok, f"noiseless {noiseless:.1e}, normal-eq {normal:.1e}, "
           f"rms by M=1,2,4,8 {[round(r, 4) for r in rms]}", dt)


def test_filters(capsys):
    t0 = time.perf_counter()
    rate, t = 200.0, np.arange(int(60 * 200.0)) / 200.0
    mid = slice(int(10 * rate), -int(10 * rate))

    def gain(f):
        x = np.sin(2 * np.pi * f * t)
        return np.sqrt(np.mean(butterworth_lowpass(x, rate)[mid] ** 2) / np.mean(x[mid] ** 2))

    att8 = -20 * np.log10(max(gain(8.0), 1e-300))
    g1 = gain(1.0)
    g1_oracle = oracles.butter_gain(1.0, 4.0, 12) ** 2
    t250 = np.arange(int(120 * 250)) / 250.0

    def kept(f):
        x = np.sin(2 * np.pi * f * t250)
        return np.sum(extract_d7(x, 250.0)[mid] ** 2) / np.sum(x[mid] ** 2)

    k14, k10 = kept(1.4), kept(10.0)
    dt = time.perf_counter() - t0
    ok = att8 >= 140 and abs(g1 - 1) <= 0.005 and abs(g1 - g1_oracle) < 1e-3 and k14 >= 0.6 and k10 <= 0.05 \
        and dt < 10
    report(capsys, "filters", ok, f"8 Hz attenuation {att8:.0f} dB, 1 Hz gain {g1:.5f} (analytic {g1_oracle:.5f}), "
           f"D7 retains {k14:.3f} at 1.4 Hz and {k10:.4f} at 10 Hz", dt)


def test_gradient_suite(capsys):
    t0 = time.perf_counter()
    worst = {}
    for name, (make, fn) in PRIMITIVES.items():
        worst[name] = grad_check(weighted_sum(fn), make(np.random.default_rng(7)))
    xs = np.linspace(-5, 5, 2001)
    gap = np.abs(F.gelu(Tensor(xs), "exact").data - F.gelu(Tensor(xs), "tanh_approx").data).max()
    rng = np.random.default_rng(21)
    targets = [rng.standard_normal((2, n)) for n in (24, 12, 6, 3)]
    preds = [Tensor(t + rng.standard_normal(t.shape), requires_grad=True) for t in targets]
    worst["loss_deep_l1"] = grad_check(lambda *ps: loss_deep_l1(list(ps), targets), preds,
                                       kink_probe=lambda *ps: _kink(ps, targets))
    y = targets[0]
    p = Tensor(y + rng.standard_normal(y.shape), requires_grad=True)
    worst["loss_refine_l2"] = grad_check(lambda q: loss_refine_l2(q, y), [p], kink_probe=lambda q: _kink([q], [y]))
    dt = time.perf_counter() - t0
    bad = [k for k, v in worst.items() if not v < 1e-3]
    ok = not bad and gap < 1e-3 and dt < 60
    report(capsys, "gradients", ok, f"{len(worst)} checks, worst rel err {max(worst.values()):.1e}"
           f"{', failing ' + ','.join(bad) if bad else ''}; GELU mode gap {gap:.1e}", dt)


def test_loss_identities(capsys):
    rng = np.random.default_rng(3)
    y = rng.standard_normal((3, 50))
    levels = [rng.standard_normal((3, n)) for n in (450, 225, 112, 56)]
    zero = [loss_mae(Tensor(y), y).item(), loss_refine_l2(Tensor(y), y).item(),
            loss_deep_l1([Tensor(t) for t in levels], levels).item()]
    ramp = 0.03 * np.arange(50)
    closed = [
        (loss_mae(Tensor(y + 0.7), y).item(), 0.7),
        (loss_refine_l2(Tensor(y - 1.25), y).item(), 1.25),
        (loss_refine_l2(Tensor(y + ramp), y).item(), np.mean(ramp) + 49 * 0.03),
        (loss_deep_l1([Tensor(t + 0.4) if i == 2 else Tensor(t) for i, t in enumerate(levels)], levels).item(),
         0.4),
    ]
    p = y + rng.standard_normal(y.shape)
    positive = min(loss_mae(Tensor(p), y).item(), loss_refine_l2(Tensor(p), y).item())
    err = max(abs(a - b) for a, b in closed)
    ok = all(v == 0 for v in zero) and err < 1e-12 and positive > 0
    report(capsys, "loss_identities", ok, f"zero at equality {zero}, closed-form max err {err:.1e}")


def test_alignment(capsys):
    t0 = time.perf_counter()
    errs = {}
    for lag_s in (-0.5, -0.25, 0.0, 0.25, 0.5):
        sub = simulate_subject(2, 40.0, seed=11, lag_s=lag_s)
        _, est = build_pairs(sub.radio, sub.ppg, 16, return_lag=True)
        errs[lag_s] = round(abs(est - lag_s) * sub.radio.rate, 3)
    dt = time.perf_counter() - t0
    ok = max(errs.values()) <= 2 and dt < 10
    report(capsys, "alignment", ok, f"lag error in CFR samples {errs}", dt)


def test_overfit(capsys, cohort):
    t0 = time.perf_counter()
    pairs = dataset_pairs(cohort, 16, augment_copies=False)
    unet = train("unet_cascade", pairs[:8], cfg=replace(DESK_UNET, epochs=300, lr=2e-3, batch_size=8,
                                                       weight_decay=0.0))
    u_mae = unet.final("train_eval")["mae"]
    mlp = train("dct_mlp", pairs[:4], cfg=TrainConfig(epochs=200, lr=1e-4, batch_size=4, weight_decay=0.0))
    m_mae = mlp.final("train_eval")["mae"]
    dt = time.perf_counter() - t0
    ok = u_mae < 0.1 and m_mae < 0.1 and dt < 300
    report(capsys, "overfit", ok, f"unet_cascade 8 segments/300 epochs MAE {u_mae:.4f}, "
           f"dct_mlp 4 segments/200 steps MAE {m_mae:.4f}", dt)


@pytest.mark.slow
def test_table4_ablation(capsys, cohort):
    t0 = time.perf_counter()
    plan = AblationPlan(unet=DESK_UNET, mlp=DESK_MLP, augment=DESK_AUGMENT)
    rows = ablate_channels(cohort, plan, progress=print)
    dt = time.perf_counter() - t0
    wins = sum(r["unet_mrae_mean"] < r["dct_mlp_mrae_mean"] for r in rows)
    at10 = next(r["unet_mrae_mean"] for r in rows if r["n_ch"] == 10)
    table = "; ".join(f"{r['n_ch']}: {r['unet_mrae_mean']:.3f} vs {r['dct_mlp_mrae_mean']:.3f}" for r in rows)
    ok = len(rows) == 8 and wins >= 6 and at10 <= 0.5 and dt <= 7200
    report(capsys, "table4_ablation", ok, f"U-NET beats MLP at {wins}/8 channel counts, U-NET MRAE at N_ch=10 "
           f"{at10:.3f} (unet vs mlp: {table})", dt)


@pytest.mark.slow
def test_table2_generalization_gap(capsys, cohort):
    t0 = time.perf_counter()
    pairs = dataset_pairs(cohort, 16, augment_copies=DESK_AUGMENT)
    identity, gaps = 0.0, []
    for seed in (0, 1, 2):
        cfg = replace(DESK_UNET, seed=seed, epochs=15)
        errs = {}
        for kind in ("pooled", "ltso"):
            reps = pooled_reports(pairs, run_folds("unet_cascade", pairs, make_split(pairs, kind, seed), cfg))
            for rep in reps.values():
                identity = max(identity, abs(rep.rmse ** 2 - rep.mse_mean))
            errs[kind] = reps["test"].mae_mean
        gaps.append((round(errs["pooled"], 4), round(errs["ltso"], 4)))
    dt = time.perf_counter() - t0
    wider = sum(l >= p for p, l in gaps)
    ok = identity < 1e-9 and wider >= 2
    report(capsys, "table2_gap", ok, f"(pooled, LTSO) test MAE per seed {gaps}; LTSO >= pooled in {wider}/3; "
           f"rmse^2 identity err {identity:.1e}", dt)


def test_feature_pipeline(capsys):
    agi = [aging_index(2, 1, 0.5, 0.25, 0.25), aging_index(1, 0, 0, 0, 0)]
    x, sdp = pulse_train()
    feats = sdppg_features(x, 200.0)
    offsets = []
    for f in feats:
        onset = int(np.floor(f.indices[0] / 200.0) * 200)
        want = brute_fiducials(sdp, onset, onset + 40, onset + 200)
        offsets.append(int(np.abs(np.array(f.indices) - np.array(want)).max()))
    same = feature_agreement(x, x, 200.0)
    zero = all(v == 0 for r in same for k, v in r.items() if k.startswith("d_"))
    ok = agi == [0, 0] and feats and max(offsets) <= 2 and zero and same
    report(capsys, "features", ok, f"AGI {agi}, {len(feats)} beats, max fiducial offset vs extrema oracle "
           f"{max(offsets)} samples, identical-input agreement all zero: {zero}")


def _tree_hashes(root: Path) -> dict:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_reproducibility(capsys, tmp_path):
    t0 = time.perf_counter()
    data = tmp_path / "ds"
    generate_cohort(data, 2, 24.0, seed=5)
    args = ["train", "--dataset", str(data), "--epochs", "2", "--n-ch", "4", "--unet-width", "4",
            "--refine-width", "4", "--refine-bottleneck", "16", "--serial", "true"]
    codes = []
    for name in ("a", "b"):
        codes.append(main([*args, "--out", str(tmp_path / "out")]))
        (tmp_path / "out").rename(tmp_path / name)
    a, b = _tree_hashes(tmp_path / "a"), _tree_hashes(tmp_path / "b")
    dt = time.perf_counter() - t0
    ok = codes == [0, 0] and a == b and len(a) >= 5
    report(capsys, "reproducibility", ok, f"{len(a)} output files, hashes match: {a == b}", dt)


def test_parameter_counts(capsys, tmp_path):
    data = tmp_path / "ds"
    generate_cohort(data, 2, 12.0, seed=5)
    out = tmp_path / "run"
    code = main(["train", "--dataset", str(data), "--epochs", "0", "--out", str(out)])
    run = json.loads((out / "run.json").read_text())
    counts = run["parameters"]
    direct = parameter_counts("unet_cascade", build_model("unet_cascade", ExperimentConfig().train_config(), 16))
    approx, refine = counts["approximation"], counts["refinement"]
    ok = code == 0 and counts == direct and 165_000 <= approx <= 660_000 and 165_000 <= refine <= 660_000 \
        and run["config"]["unet_width"] == 16
    report(capsys, "parameter_counts", ok, f"approximation {approx}, refinement {refine} (logged with config in run.json)")
