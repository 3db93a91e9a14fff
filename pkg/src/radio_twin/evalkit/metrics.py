"""Reconstruction and relative-error metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HIST_BINS = 64


@dataclass
class MetricsReport:
    rmse: float
    mae_mean: float
    mae_std: float
    mae_median: float
    mse_mean: float
    mse_std: float
    segment_mae: np.ndarray = field(repr=False)
    segment_mse: np.ndarray = field(repr=False)
    hist_edges: np.ndarray = field(repr=False)          # per-segment MAE
    hist_counts: np.ndarray = field(repr=False)
    point_edges: np.ndarray = field(repr=False)         # every signed pointwise error
    point_counts: np.ndarray = field(repr=False)

    def row(self) -> dict:
        return {"rmse": self.rmse, "mae_mean": self.mae_mean, "mae_std": self.mae_std,
                "mae_median": self.mae_median, "mse_mean": self.mse_mean, "mse_std": self.mse_std,
                "n_segments": int(self.segment_mae.size)}


def _pair(pred, target, op: str):
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"{op}: prediction {pred.shape} vs target {target.shape}")
    if pred.ndim == 1:
        pred, target = pred[None], target[None]
    return pred, target


def error_histogram(err: np.ndarray, bins: int = HIST_BINS) -> tuple[np.ndarray, np.ndarray]:
    """Uniform bins over the observed range of ``err`` (a unit-wide range if it is numerically constant)."""
    lo, hi = (float(err.min()), float(err.max())) if err.size else (0.0, 0.0)
    if hi - lo <= 1e-9 * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        lo, hi = mid - 0.5, mid + 0.5
    counts, edges = np.histogram(err, bins=bins, range=(lo, hi))
    return edges, counts


def reconstruction_metrics(pred, target, bins: int = HIST_BINS) -> MetricsReport:
    """Per-segment MAE/MSE summarized across segments, plus two histograms.

    ``hist_*`` bins the per-segment MAE (counts sum to the segment count);
    ``point_*`` bins every signed pointwise error.
    """
    pred, target = _pair(pred, target, "reconstruction_metrics")
    err = pred - target
    seg_mae = np.abs(err).mean(axis=1)
    seg_mse = (err ** 2).mean(axis=1)
    edges, counts = error_histogram(seg_mae, bins)
    p_edges, p_counts = error_histogram(err.ravel(), bins)
    mse_mean = float(seg_mse.mean())
    return MetricsReport(
        rmse=float(np.sqrt(mse_mean)), mae_mean=float(seg_mae.mean()), mae_std=float(seg_mae.std()),
        mae_median=float(np.median(seg_mae)), mse_mean=mse_mean, mse_std=float(seg_mse.std()),
        segment_mae=seg_mae, segment_mse=seg_mse, hist_edges=edges, hist_counts=counts,
        point_edges=p_edges, point_counts=p_counts)


def _nonzero(true: np.ndarray, op: str) -> None:
    bad = np.flatnonzero(true == 0)
    if bad.size:
        raise ValueError(f"{op}: true value is zero at index {int(bad[0])}")


def mrae(true, measured) -> float:
    """Mean relative absolute error, as a fraction (not a percentage)."""
    true = np.asarray(true, dtype=float).ravel()
    measured = np.asarray(measured, dtype=float).ravel()
    if true.shape != measured.shape:
        raise ValueError(f"mrae: {true.size} true values vs {measured.size} measured")
    _nonzero(true, "mrae")
    return float(np.mean(np.abs(true - measured) / np.abs(true)))


def mrsd(true, stds) -> float:
    """Mean relative standard deviation, as a fraction."""
    true = np.asarray(true, dtype=float).ravel()
    stds = np.asarray(stds, dtype=float).ravel()
    if true.shape != stds.shape:
        raise ValueError(f"mrsd: {true.size} true values vs {stds.size} deviations")
    _nonzero(true, "mrsd")
    if (stds < 0).any():
        raise ValueError(f"mrsd: negative deviation at index {int(np.flatnonzero(stds < 0)[0])}")
    return float(np.mean(stds / np.abs(true)))


def waveform_mrae(pred, target) -> np.ndarray:
    """Relative absolute error of each segment: mean|y - y_hat| / mean|y|.

    Pointwise division is meaningless for zero-mean waveforms (it explodes at
    every zero crossing), so the ratio is taken of the segment means.
    """
    pred, target = _pair(pred, target, "waveform_mrae")
    denom = np.abs(target).mean(axis=1)
    bad = np.flatnonzero(denom == 0)
    if bad.size:
        raise ValueError(f"waveform_mrae: target segment {int(bad[0])} is identically zero")
    return np.abs(pred - target).mean(axis=1) / denom
