"""Experiment drivers shared by the CLI and the acceptance suite."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..models import TrainConfig, model_inputs, predict, train
from ..models.vitals import VITAL_NAMES
from ..preprocess import dataset_pairs
from .metrics import MetricsReport, mrae, mrsd, reconstruction_metrics, waveform_mrae
from .splits import make_split

log = logging.getLogger(__name__)

CHANNEL_COUNTS = (2, 4, 6, 8, 10, 12, 14, 16)
TOTAL_SUBCARRIERS = 64


def originals(idx, pairs) -> np.ndarray:
    return np.array([i for i in idx if not pairs[i].augmented], dtype=int)


@dataclass
class FoldOutcome:
    model: str
    fold: int
    held_out: tuple
    test_idx: np.ndarray
    train_idx: np.ndarray
    test_pred: np.ndarray
    train_pred: np.ndarray
    log: list = field(repr=False, default_factory=list)
    trained: object = field(repr=False, default=None)


def run_folds(kind: str, pairs, split, cfg: TrainConfig, log_dir=None, keep_models: bool = False) -> list[FoldOutcome]:
    """Train once per fold; predict on the un-augmented train and test segments."""
    out = []
    for k, fold in enumerate(split.folds):
        log_file = None if log_dir is None else Path(log_dir) / f"{kind}_{split.kind}_fold{k}.ndjson"
        res = train(kind, pairs, split, k, cfg, log_file=log_file)
        te, tr = originals(fold.test, pairs), originals(fold.train, pairs)
        x_te = model_inputs(kind, [pairs[i] for i in te], cfg.k_mode)
        x_tr = model_inputs(kind, [pairs[i] for i in tr], cfg.k_mode)
        out.append(FoldOutcome(kind, k, fold.held_out, te, tr, predict(kind, res.model, x_te),
                               predict(kind, res.model, x_tr), res.log, res.model if keep_models else None))
    return out


def _stack(pairs, idx) -> np.ndarray:
    return np.stack([pairs[i].ppg for i in idx]) if len(idx) else np.zeros((0, 450))


def pooled_reports(pairs, outcomes: list[FoldOutcome]) -> dict[str, MetricsReport]:
    """Pool all folds' predictions and report train and test error."""
    res = {}
    for side in ("train", "test"):
        idx = np.concatenate([getattr(o, f"{side}_idx") for o in outcomes])
        pred = np.concatenate([getattr(o, f"{side}_pred") for o in outcomes])
        res[side] = reconstruction_metrics(pred, _stack(pairs, idx))
    return res


def twin_mrae(pairs, outcomes: list[FoldOutcome]) -> float:
    idx = np.concatenate([o.test_idx for o in outcomes])
    pred = np.concatenate([o.test_pred for o in outcomes])
    return float(waveform_mrae(pred, _stack(pairs, idx)).mean())


# ---------------------------------------------------------------- ablation --

@dataclass(frozen=True)
class AblationPlan:
    channels: tuple = CHANNEL_COUNTS
    seeds: tuple = (0, 1, 2)
    unet: TrainConfig = field(default_factory=TrainConfig)
    mlp: TrainConfig = field(default_factory=TrainConfig)
    split_kind: str = "pooled"
    augment: bool = True


def ablate_channels(dataset, plan: AblationPlan = AblationPlan(), log_dir=None, progress=None) -> list[dict]:
    """Test MRAE of both models for each sensing-subcarrier count, mean and std over seeds."""
    rows = []
    for n_ch in plan.channels:
        pairs = dataset_pairs(dataset, n_ch, augment_copies=plan.augment)
        per_seed = {"unet": [], "dct_mlp": []}
        for seed in plan.seeds:
            split = make_split(pairs, plan.split_kind, seed)
            for key, kind, cfg in (("unet", "unet_cascade", plan.unet), ("dct_mlp", "dct_mlp", plan.mlp)):
                sub = None if log_dir is None else Path(log_dir) / f"nch{n_ch}_seed{seed}"
                if sub is not None:
                    sub.mkdir(parents=True, exist_ok=True)
                outs = run_folds(kind, pairs, split, replace(cfg, seed=seed), sub)
                per_seed[key].append(twin_mrae(pairs, outs))
                if progress:
                    progress(f"n_ch={n_ch} seed={seed} {kind}: test MRAE {per_seed[key][-1]:.3f}")
        row = {"n_ch": n_ch, "overhead": n_ch / TOTAL_SUBCARRIERS}
        for key in ("dct_mlp", "unet"):
            vals = np.array(per_seed[key])
            row[f"{key}_mrae_mean"] = float(vals.mean())
            row[f"{key}_mrae_std"] = float(vals.std())
            row[f"{key}_mrae_seeds"] = ";".join(f"{v:.6f}" for v in vals)
        rows.append(row)
    return rows


ABLATION_COLUMNS = ["n_ch", "overhead", "dct_mlp_mrae_mean", "dct_mlp_mrae_std", "unet_mrae_mean",
                    "unet_mrae_std", "dct_mlp_mrae_seeds", "unet_mrae_seeds"]


# ------------------------------------------------------------------ vitals --

def vitals_table(pairs, split, twins_by_index: dict[int, np.ndarray], cfg: TrainConfig,
                 label: str, log_dir=None) -> list[dict]:
    """MRAE and MRSD per vital sign, estimated from reference and from twin PPG.

    The vitals CNN is trained on reference PPG of each fold's training side
    and applied to the fold's un-augmented test segments. MRSD uses, per
    segment, the spread of that subject's estimates around its mean.
    """
    ref_est, twin_est, truth, subj = [], [], [], []
    for k, fold in enumerate(split.folds):
        log_file = None if log_dir is None else Path(log_dir) / f"vitals_{label}_fold{k}.ndjson"
        res = train("vitals_cnn", pairs, split, k, cfg, log_file=log_file)
        te = [i for i in originals(fold.test, pairs) if i in twins_by_index]
        if not te:
            continue
        ref_x = np.stack([pairs[i].ppg for i in te])
        twin_x = np.stack([twins_by_index[i] for i in te])
        ref_est.append(predict("vitals_cnn", res.model, ref_x))
        twin_est.append(predict("vitals_cnn", res.model, twin_x))
        truth.append(np.stack([pairs[i].vitals for i in te]))
        subj.extend(pairs[i].subject_id for i in te)
    truth = np.concatenate(truth)
    subj = np.array(subj)
    rows = []
    for source, est in (("reference", np.concatenate(ref_est)), ("twin", np.concatenate(twin_est))):
        for j, name in enumerate(VITAL_NAMES):
            spread = np.empty(len(est))
            for s in np.unique(subj):
                m = subj == s
                spread[m] = est[m, j].std()
            rows.append({"split": label, "source": source, "vital": name,
                         "mrae": mrae(truth[:, j], est[:, j]), "mrsd": mrsd(truth[:, j], spread),
                         "n_segments": int(len(est))})
    return rows
