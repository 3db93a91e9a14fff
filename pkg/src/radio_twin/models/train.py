"""Mini-batch training for the three model families."""

from __future__ import annotations

import contextlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from threadpoolctl import threadpool_limits

from ..autodiff import Adam, loss_deep_l1, loss_mae, loss_refine_l2, no_grad
from ..autodiff.tensor import Tensor
from .mlp import DctMlp, MlpSpec, mlp_features
from .unet import MultiResRefine, MultiResSpec, UnetApprox, UnetCascade, UnetSpec, level_targets
from .vitals import VitalsCnn, VitalsCnnSpec

MODEL_KINDS = ("dct_mlp", "unet_cascade", "vitals_cnn")


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-4
    weight_decay: float = 1e-6
    lam1: float = 1.0
    lam2: float = 1.0
    seed: int = 0
    dtype: str = "float32"
    serial: bool = True
    joint: bool = True                 # cascade: one optimizer over both networks
    lr_schedule: str = "constant"      # or "cosine": decay to zero over the run
    gelu_mode: str = "exact"
    k_mode: int = 1
    unet: UnetSpec = field(default_factory=UnetSpec)
    refine: MultiResSpec = field(default_factory=MultiResSpec)
    mlp: MlpSpec = field(default_factory=MlpSpec)
    vitals: VitalsCnnSpec = field(default_factory=VitalsCnnSpec)


@dataclass
class TrainResult:
    model: object
    kind: str
    log: list
    initial_state: dict

    def final(self, split: str = "train") -> dict | None:
        rows = [r for r in self.log if r["split"] == split]
        return rows[-1] if rows else None


def build_model(kind: str, cfg: TrainConfig, n_ch: int, label_stats=None):
    dt = np.dtype(cfg.dtype)
    if kind == "dct_mlp":
        spec = replace(cfg.mlp, n_ch=n_ch, k_mode=cfg.k_mode, gelu_mode=cfg.gelu_mode)
        return DctMlp(spec, cfg.seed, dt)
    if kind == "unet_cascade":
        approx = UnetApprox(replace(cfg.unet, in_channels=2 * n_ch), cfg.seed, dt)
        return UnetCascade(approx, MultiResRefine(cfg.refine, cfg.seed, dt))
    if kind == "vitals_cnn":
        mean, scale = label_stats if label_stats is not None else ((75.0, 97.0, 16.0), (10.0, 1.0, 3.0))
        return VitalsCnn(cfg.vitals, cfg.seed, dt, mean, scale)
    raise ValueError(f"unknown model {kind!r}; choose from {', '.join(MODEL_KINDS)}")


def model_inputs(kind: str, pairs, k_mode: int = 1) -> np.ndarray:
    if kind == "dct_mlp":
        return mlp_features(pairs, k_mode)
    if kind == "unet_cascade":
        return np.stack([p.radio for p in pairs])
    if kind == "vitals_cnn":
        return np.stack([p.ppg for p in pairs])
    raise ValueError(f"unknown model {kind!r}")


def model_targets(kind: str, pairs) -> np.ndarray:
    if kind == "vitals_cnn":
        missing = [p.segment_index for p in pairs if p.vitals is None]
        if missing:
            raise ValueError(f"vitals_cnn needs vitals labels; {len(missing)} segments lack them")
        return np.stack([p.vitals for p in pairs])
    return np.stack([p.ppg for p in pairs])


def _loss(kind: str, model, xb: Tensor, yb: np.ndarray, cfg: TrainConfig, stage: str = "joint"):
    """Return (loss tensor, prediction array)."""
    if kind == "unet_cascade":
        levels = model.approx(xb)
        tl = level_targets(yb, len(levels))
        approx_loss = loss_deep_l1(levels, tl, cfg.lam1, cfg.lam2)
        if stage == "approx":
            return approx_loss, levels[0].data
        if stage == "refine":
            with no_grad():
                base = model.approx(xb)[0]
            refined = model.refine(base)
            return loss_refine_l2(refined, yb, cfg.lam1, cfg.lam2), refined.data
        refined = model.refine(levels[0])
        return approx_loss + loss_refine_l2(refined, yb, cfg.lam1, cfg.lam2), refined.data
    pred = model(xb)
    return loss_mae(pred, yb), pred.data


def predict(kind: str, model, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    model.eval()
    dt = model.parameters()[0].dtype
    outs = []
    with no_grad():
        for i in range(0, len(x), batch_size):
            xb = Tensor(x[i:i + batch_size].astype(dt))
            out = model(xb)
            outs.append((out[0] if kind == "unet_cascade" else out).data)
    return np.concatenate(outs) if outs else np.zeros((0,))


def _evaluate(kind, model, x, y, cfg) -> tuple[float, float]:
    model.eval()
    dt = model.parameters()[0].dtype
    losses, maes, n = [], [], 0
    with no_grad():
        for i in range(0, len(x), cfg.batch_size):
            xb, yb = Tensor(x[i:i + cfg.batch_size].astype(dt)), y[i:i + cfg.batch_size].astype(dt)
            loss, pred = _loss(kind, model, xb, yb, cfg)
            losses.append(float(loss.data) * len(yb))
            maes.append(float(np.abs(pred - yb).mean()) * len(yb))
            n += len(yb)
    return sum(losses) / n, sum(maes) / n


def _emit(log: list, sink, records: list) -> None:
    log.extend(records)
    if sink:
        for r in records:
            sink.write(json.dumps(r, sort_keys=True) + "\n")
        sink.flush()


def _label_stats(y: np.ndarray):
    scale = y.std(axis=0)
    return y.mean(axis=0), np.where(scale > 1e-6, scale, 1.0)


def train(kind: str, pairs, split=None, fold: int = 0, cfg: TrainConfig = TrainConfig(),
          log_file=None, train_idx=None, test_idx=None) -> TrainResult:
    """Train ``kind`` on one fold of ``split``; the fold's test side is logged as "valid".

    Segments of the final partial batch are kept. With ``cfg.serial`` BLAS is
    pinned to one thread so repeated runs agree bit for bit.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model {kind!r}; choose from {', '.join(MODEL_KINDS)}")
    if train_idx is None:
        if split is None:
            train_idx, test_idx = np.arange(len(pairs)), np.array([], dtype=int)
        else:
            f = split.folds[fold]
            train_idx, test_idx = f.train, f.test
    train_idx = np.asarray(train_idx, dtype=int)
    test_idx = np.asarray(test_idx if test_idx is not None else [], dtype=int)
    if train_idx.size == 0:
        raise ValueError("training split is empty")

    limits = threadpool_limits(limits=1) if cfg.serial else contextlib.nullcontext()
    with limits:
        return _train(kind, pairs, train_idx, test_idx, cfg, log_file)


def _train(kind, pairs, train_idx, test_idx, cfg, log_file) -> TrainResult:
    dt = np.dtype(cfg.dtype)
    x_all = model_inputs(kind, pairs, cfg.k_mode).astype(dt)
    y_all = model_targets(kind, pairs).astype(dt)
    x_tr, y_tr = x_all[train_idx], y_all[train_idx]
    x_te, y_te = x_all[test_idx], y_all[test_idx]
    stats = _label_stats(y_tr.astype(np.float64)) if kind == "vitals_cnn" else None
    n_ch = pairs[0].n_ch
    model = build_model(kind, cfg, n_ch, stats)
    initial = model.state_dict()

    stages = ["joint"]
    if kind == "unet_cascade" and not cfg.joint:
        stages = ["approx", "refine"]
    log = []
    rng = np.random.default_rng([cfg.seed, 6])
    sink = open(log_file, "w") if log_file else None
    try:
        for stage in stages:
            if stage == "approx":
                params = model.approx.parameters()
            elif stage == "refine":
                params = model.refine.parameters()
            else:
                params = model.parameters()
            opt = Adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
            for epoch in range(cfg.epochs):
                if cfg.lr_schedule == "cosine":
                    opt.state.lr = 0.5 * cfg.lr * (1.0 + math.cos(math.pi * epoch / cfg.epochs))
                model.train()
                order = rng.permutation(len(x_tr))
                total, err, count = 0.0, 0.0, 0
                for i in range(0, len(order), cfg.batch_size):
                    b = order[i:i + cfg.batch_size]
                    opt.zero_grad()
                    loss, pred = _loss(kind, model, Tensor(x_tr[b]), y_tr[b], cfg, stage)
                    value = float(loss.data)
                    if not np.isfinite(value):
                        last = log[-1]["loss"] if log else "n/a"
                        raise DivergenceError(
                            f"{kind}: non-finite loss at epoch {epoch + 1}, batch {i // cfg.batch_size + 1} "
                            f"(lr={opt.state.lr:g}); previous epoch loss {last}")
                    loss.backward()
                    opt.step()
                    total += value * len(b)
                    err += float(np.abs(pred - y_tr[b]).mean()) * len(b)
                    count += len(b)
                # train metrics are running averages over the epoch's batches (training mode)
                records = [{"epoch": epoch + 1, "split": "train", "loss": total / count, "mae": err / count}]
                if len(x_te):
                    va_loss, va_mae = _evaluate(kind, model, x_te, y_te, cfg)
                    records.append({"epoch": epoch + 1, "split": "valid", "loss": va_loss, "mae": va_mae})
                if len(stages) > 1:
                    for r in records:
                        r["stage"] = stage
                _emit(log, sink, records)
        if cfg.epochs:
            tr_loss, tr_mae = _evaluate(kind, model, x_tr, y_tr, cfg)
            _emit(log, sink, [{"epoch": cfg.epochs, "split": "train_eval", "loss": tr_loss, "mae": tr_mae}])
    finally:
        if sink:
            sink.close()
    model.eval()
    return TrainResult(model, kind, log, initial)
