"""Training losses.

Derivative penalties use unnormalized forward differences, and every sum
runs over the length of the signal it is applied to.
"""

from __future__ import annotations

from . import functional as F
from .tensor import Tensor, as_tensor


def _check(pred: Tensor, target: Tensor, op: str) -> tuple[Tensor, Tensor]:
    pred = as_tensor(pred)
    target = as_tensor(target, pred.dtype)
    if pred.shape != target.shape:
        raise F.ShapeError(f"{op}: prediction {pred.shape} vs target {target.shape}")
    return pred, target


def loss_mae(pred, target) -> Tensor:
    pred, target = _check(pred, target, "loss_mae")
    return (pred - target).abs().mean()


def _shape_terms(err: Tensor, lam1: float, lam2: float) -> Tensor:
    """Per-row MAE plus summed |first| and |second| difference of the error."""
    total = err.abs().mean(axis=-1)
    if err.shape[-1] >= 2 and lam1:
        d1 = F.diff1d(err)
        total = total + lam1 * d1.abs().sum(axis=-1)
        if err.shape[-1] >= 3 and lam2:
            total = total + lam2 * F.diff1d(d1).abs().sum(axis=-1)
    return total


def _rows(x: Tensor) -> Tensor:
    return x.reshape(1, -1) if x.ndim == 1 else x


def loss_refine_l2(pred, target, lam1: float = 1.0, lam2: float = 1.0) -> Tensor:
    pred, target = _check(pred, target, "loss_refine_l2")
    return _shape_terms(_rows(pred - target), lam1, lam2).mean()


def loss_deep_l1(preds, targets, lam1: float = 1.0, lam2: float = 1.0) -> Tensor:
    if len(preds) != len(targets):
        raise F.ShapeError(f"loss_deep_l1: {len(preds)} predictions vs {len(targets)} targets")
    total = None
    for k, (p, t) in enumerate(zip(preds, targets)):
        p, t = _check(p, t, f"loss_deep_l1[level {k + 1}]")
        term = _shape_terms(_rows(p - t), lam1, lam2)
        total = term if total is None else total + term
    return total.mean()
