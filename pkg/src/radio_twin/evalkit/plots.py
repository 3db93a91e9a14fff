"""Matplotlib figures written straight to files (Agg backend, no display)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata so reruns produce identical PNG bytes
_PNG_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def error_histograms(path, series: dict, title: str = "Pointwise reconstruction error") -> Path:
    """``series`` maps a label to (edges, counts)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (edges, counts) in series.items():
        centers = 0.5 * (edges[:-1] + edges[1:])
        total = max(int(np.sum(counts)), 1)
        ax.step(centers, np.asarray(counts) / total, where="mid", label=label)
    ax.set_xlabel("error (z-score units)")
    ax.set_ylabel("fraction of samples")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def ablation_plot(path, rows: list[dict]) -> Path:
    n = [r["n_ch"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, label in (("dct_mlp", "DCT+MLP"), ("unet", "U-NET")):
        mean = np.array([r[f"{key}_mrae_mean"] for r in rows])
        std = np.array([r[f"{key}_mrae_std"] for r in rows])
        ax.errorbar(n, mean, yerr=std, marker="o", capsize=3, label=label)
    ax.set_xlabel("sensing subcarriers N_ch (of 64)")
    ax.set_ylabel("test MRAE")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def waveform_examples(path, reference: np.ndarray, twin: np.ndarray, rate: float, n: int = 3) -> Path:
    n = min(n, len(reference))
    fig, axes = plt.subplots(max(n, 1), 1, figsize=(7, 2.2 * max(n, 1)), squeeze=False)
    for i in range(n):
        t = np.arange(reference.shape[1]) / rate
        axes[i, 0].plot(t, reference[i], label="reference")
        axes[i, 0].plot(t, twin[i], label="twin", alpha=0.8)
        axes[i, 0].set_ylabel("z")
    axes[-1, 0].set_xlabel("time (s)")
    axes[0, 0].legend(loc="upper right")
    fig.tight_layout()
    return _save(fig, path)


def feature_scatter(path, rows: list[dict]) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    names = ("t_ab", "t_bc", "t_cd", "t_de", "agi")
    data = [[r[f"d_{k}"] for r in rows] for k in names]
    ax.boxplot(data)
    ax.set_xticks(range(1, len(names) + 1), names)
    ax.axhline(0.0, color="grey", lw=0.8)
    ax.set_ylabel("twin - reference")
    fig.tight_layout()
    return _save(fig, path)


def loss_curves(path, rows: list[dict]) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for split in ("train", "valid"):
        pts = [(r["epoch"], r["loss"]) for r in rows if r["split"] == split]
        if pts:
            e, v = zip(*pts)
            ax.plot(e, v, label=split)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
