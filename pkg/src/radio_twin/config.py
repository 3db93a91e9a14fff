"""Experiment configuration: defaults, flat key=value files, env override."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace

from .models import MlpSpec, MultiResSpec, TrainConfig, UnetSpec, VitalsCnnSpec

SEED_ENV = "RADIO_TWIN_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "data"
    out_dir: str = "results"
    model: str = "unet_cascade"
    n_ch: int = 16
    split: str = "pooled"
    fold: int = 0
    seed: int = 0
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-4
    weight_decay: float = 1e-6
    lam1: float = 1.0
    lam2: float = 1.0
    gelu_mode: str = "exact"
    k_mode: int = 1
    lr_schedule: str = "constant"
    joint: bool = True
    dtype: str = "float32"
    serial: bool = True
    augment: bool = True           # noisy training copies of every segment
    unet_width: int = 16
    unet_bottleneck_mult: int = 5
    refine_width: int = 16
    refine_bottleneck: int = 224
    vitals_epochs: int = 30
    vitals_lr: float = 1e-3
    # simulate
    subjects: int = 6
    duration: float = 120.0
    # ablate
    channels: str = "2,4,6,8,10,12,14,16"
    seeds: str = "0,1,2"
    mlp_epochs: int = 0            # 0: same as epochs
    mlp_lr: float = 0.0            # 0: same as lr
    # evaluation
    splits: str = "pooled,ltso"
    models: str = "unet_cascade,dct_mlp"
    percent: bool = False
    checkpoint: str = ""

    def __post_init__(self):
        positive = ("n_ch", "epochs", "batch_size", "lr", "unet_width", "refine_width", "subjects", "duration",
                    "unet_bottleneck_mult", "refine_bottleneck")
        for name in positive:
            v = getattr(self, name)
            if name == "epochs" and v == 0:
                continue
            if v <= 0:
                raise ConfigError(f"{name} must be positive, got {v}")
        for name in ("weight_decay", "lam1", "lam2", "mlp_epochs", "mlp_lr", "fold"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.k_mode not in (1, 2):
            raise ConfigError(f"k_mode must be 1 or 2, got {self.k_mode}")
        if self.gelu_mode not in ("exact", "tanh_approx"):
            raise ConfigError(f"gelu_mode must be exact or tanh_approx, got {self.gelu_mode!r}")
        if self.split not in ("pooled", "ltso"):
            raise ConfigError(f"split must be pooled or ltso, got {self.split!r}")
        if self.subjects < 2:
            raise ConfigError(f"subjects must be at least 2, got {self.subjects}")
        if not 1 <= self.n_ch <= 64:
            raise ConfigError(f"n_ch must lie in 1..64, got {self.n_ch}")

    def int_list(self, name: str) -> tuple[int, ...]:
        return tuple(int(v) for v in str(getattr(self, name)).split(",") if v.strip())

    def str_list(self, name: str) -> tuple[str, ...]:
        return tuple(v.strip() for v in str(getattr(self, name)).split(",") if v.strip())

    def train_config(self, model: str | None = None, seed: int | None = None) -> TrainConfig:
        model = model or self.model
        epochs, lr = self.epochs, self.lr
        if model == "dct_mlp":
            epochs = self.mlp_epochs or epochs
            lr = self.mlp_lr or lr
        elif model == "vitals_cnn":
            epochs, lr = self.vitals_epochs, self.vitals_lr
        rw = self.refine_width
        return TrainConfig(
            epochs=epochs, batch_size=self.batch_size, lr=lr, weight_decay=self.weight_decay,
            lam1=self.lam1, lam2=self.lam2, seed=self.seed if seed is None else seed, dtype=self.dtype,
            serial=self.serial, joint=self.joint, lr_schedule=self.lr_schedule, gelu_mode=self.gelu_mode,
            k_mode=self.k_mode,
            unet=UnetSpec(base_width=self.unet_width, bottleneck_mult=self.unet_bottleneck_mult),
            refine=MultiResSpec(widths=(rw, 2 * rw, 4 * rw, 8 * rw), bottleneck=self.refine_bottleneck),
            mlp=MlpSpec(), vitals=VitalsCnnSpec())

    def as_dict(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    kind = _TYPES[name]
    if kind in ("bool", bool):
        low = str(raw).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from exc
    return str(raw)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve(config_file: str | None = None, overrides: dict | None = None, env=None) -> ExperimentConfig:
    """Defaults, then the config file, then RADIO_TWIN_SEED, then explicit overrides."""
    env = os.environ if env is None else env
    values = {}
    if config_file:
        try:
            text = open(config_file).read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_file}: {exc}") from exc
        values.update(parse_config_text(text, config_file))
    if env.get(SEED_ENV, "").strip():
        values["seed"] = _coerce("seed", env[SEED_ENV])
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = _coerce(k, v) if isinstance(v, str) else v
    return replace(ExperimentConfig(), **values)
