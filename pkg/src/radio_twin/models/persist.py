"""Save and restore trained models: binary checkpoint plus a JSON sidecar."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..autodiff import checkpoint
from ..dataset import atomic_write_text
from .mlp import MlpSpec
from .train import TrainConfig, build_model
from .unet import MultiResSpec, UnetSpec
from .vitals import VitalsCnnSpec


def parameter_counts(kind: str, model) -> dict[str, int]:
    if kind == "unet_cascade":
        return {"approximation": model.approx.n_parameters(), "refinement": model.refine.n_parameters(),
                "total": model.n_parameters()}
    return {"total": model.n_parameters()}


def config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    d["unet"] = UnetSpec(**d["unet"])
    r = dict(d["refine"])
    r["widths"] = tuple(r["widths"])
    d["refine"] = MultiResSpec(**r)
    m = dict(d["mlp"])
    m["hidden"], m["dropouts"] = tuple(m["hidden"]), tuple(m["dropouts"])
    d["mlp"] = MlpSpec(**m)
    d["vitals"] = VitalsCnnSpec(**d["vitals"])
    return TrainConfig(**d)


def save_trained(ckpt_path, kind: str, model, cfg: TrainConfig, n_ch: int) -> Path:
    ckpt_path = Path(ckpt_path)
    checkpoint.save(ckpt_path, model.state_dict())
    meta = {"model": kind, "n_ch": n_ch, "train_config": asdict(cfg),
            "parameters": parameter_counts(kind, model)}
    if kind == "vitals_cnn":
        meta["label_mean"] = model.label_mean.tolist()
        meta["label_scale"] = model.label_scale.tolist()
    atomic_write_text(ckpt_path.with_suffix(".json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return ckpt_path


def load_trained(ckpt_path):
    """Return (kind, model, meta) rebuilt from a checkpoint and its sidecar."""
    ckpt_path = Path(ckpt_path)
    meta = json.loads(ckpt_path.with_suffix(".json").read_text())
    cfg = config_from_dict(meta["train_config"])
    stats = None
    if meta["model"] == "vitals_cnn":
        stats = (np.asarray(meta["label_mean"]), np.asarray(meta["label_scale"]))
    model = build_model(meta["model"], cfg, int(meta["n_ch"]), stats)
    state = checkpoint.load(ckpt_path)
    dt = model.parameters()[0].dtype
    model.load_state_dict({k: v.astype(dt) for k, v in state.items()})
    model.eval()
    return meta["model"], model, meta
