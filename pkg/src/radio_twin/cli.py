"""radio-twin command line.

Exit codes: 0 success, 1 usage or configuration error, 2 data integrity
error, 3 numerical divergence during training.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .autodiff.checkpoint import CheckpointError
from .config import ConfigError, ExperimentConfig, resolve
from .dataset import IntegrityError, atomic_write_text, load_dataset
from .evalkit import export, plots
from .evalkit.experiments import (ABLATION_COLUMNS, AblationPlan, ablate_channels, originals, pooled_reports,
                                  run_folds, twin_mrae, vitals_table)
from .evalkit.features import FIDUCIALS, INTERVALS, BeatPairingError, feature_agreement, sdppg_features
from .evalkit.metrics import reconstruction_metrics
from .evalkit.splits import SplitError, make_split
from .models import DivergenceError, model_inputs, predict, train
from .models.persist import load_trained, parameter_counts, save_trained
from .physio import generate_cohort
from .preprocess import AlignmentError, SEGMENT_LEN, SEGMENT_S, dataset_pairs

log = logging.getLogger("radio_twin")

EXIT_OK, EXIT_USAGE, EXIT_INTEGRITY, EXIT_DIVERGENCE = 0, 1, 2, 3
SEGMENT_RATE = SEGMENT_LEN / SEGMENT_S
COMMANDS = ("simulate", "train", "eval", "ablate", "features", "export-embeddings")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file; flags override it")
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type in ("bool", bool):
            p.add_argument(flag, dest=f.name, default=None, metavar="BOOL")
        else:
            p.add_argument(flag, dest=f.name, default=None)
    p.add_argument("--out", dest="out_dir", default=None, help="alias for --out-dir")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="radio-twin", description="Digital-twin PPG from OFDM channel measurements.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, help_text in (
            ("simulate", "write a synthetic cohort to --dataset"),
            ("train", "train one model and save its checkpoint"),
            ("eval", "reconstruction and vitals reports for pooled and LTSO splits"),
            ("ablate", "twin MRAE versus number of sensing subcarriers"),
            ("features", "SDPPG fiducials of reference and twin PPG"),
            ("export-embeddings", "reference and twin segments as CSV for external t-SNE")):
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)
        if name == "eval":
            p.add_argument("--pred", help="prediction matrix (.npy or .csv) to score against --target")
            p.add_argument("--target", help="target matrix (.npy or .csv)")
    return parser


def _overrides(args) -> dict:
    keys = {f.name for f in fields(ExperimentConfig)}
    return {k: v for k, v in vars(args).items() if k in keys and v is not None}


def _out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_pairs(cfg: ExperimentConfig, n_ch: int | None = None):
    ds = load_dataset(cfg.dataset)
    return ds, dataset_pairs(ds, n_ch or cfg.n_ch, augment_copies=cfg.augment)


# ---------------------------------------------------------------- commands --

def cmd_simulate(cfg: ExperimentConfig) -> str:
    root = generate_cohort(cfg.dataset, cfg.subjects, cfg.duration, cfg.seed)
    return f"wrote {cfg.subjects} subjects x {cfg.duration:g} s to {root}"


def cmd_train(cfg: ExperimentConfig) -> str:
    _, pairs = _load_pairs(cfg)
    split = make_split(pairs, cfg.split, cfg.seed)
    if cfg.fold >= len(split):
        raise ConfigError(f"fold {cfg.fold} out of range; {cfg.split} split has {len(split)} folds")
    out = _out(cfg)
    tcfg = cfg.train_config()
    res = train(cfg.model, pairs, split, cfg.fold, tcfg, log_file=out / "train_log.ndjson")
    ckpt = save_trained(out / f"{cfg.model}.ckpt", cfg.model, res.model, tcfg, pairs[0].n_ch)
    counts = parameter_counts(cfg.model, res.model)
    _write_json(out / "run.json", {"config": cfg.as_dict(), "parameters": counts,
                                   "n_segments": len(pairs), "fold": cfg.fold,
                                   "n_train": int(len(split.folds[cfg.fold].train)),
                                   "n_test": int(len(split.folds[cfg.fold].test))})
    rows = [r for r in res.log if r["split"] in ("train", "valid")]
    export.write_table(out / "train_summary.csv", rows, ["epoch", "split", "loss", "mae"])
    if rows:
        plots.loss_curves(out / "loss_curve.png", rows)
    return f"trained {cfg.model} ({counts['total']} parameters) -> {ckpt}"


def _read_matrix(path: str) -> np.ndarray:
    if path.endswith(".npy"):
        return np.load(path)
    return np.loadtxt(path, delimiter=",", ndmin=2)


def cmd_eval_fixture(cfg: ExperimentConfig, pred_path: str, target_path: str) -> str:
    rep = reconstruction_metrics(_read_matrix(pred_path), _read_matrix(target_path))
    out = _out(cfg)
    export.write_table(out / "metrics.csv", [rep.row()])
    return f"rmse={rep.rmse:.6g} mae={rep.mae_mean:.6g} over {rep.segment_mae.size} segments"


TABLE2_COLUMNS = ["model", "split", "set", "rmse", "mae_mean", "mae_std", "mae_median", "mse_mean", "mse_std",
                  "mrae", "n_segments"]
TABLE7_COLUMNS = ["split", "source", "vital", "mrae", "mrsd", "n_segments"]


def cmd_eval(cfg: ExperimentConfig) -> str:
    _, pairs = _load_pairs(cfg)
    out = _out(cfg)
    logs = out / "logs"
    logs.mkdir(exist_ok=True)
    table2, table7 = [], []
    scale = 100.0 if cfg.percent else 1.0
    for kind_split in cfg.str_list("splits"):
        split = make_split(pairs, kind_split, cfg.seed)
        hist = {}
        for model in cfg.str_list("models"):
            outcomes = run_folds(model, pairs, split, cfg.train_config(model), logs)
            reports = pooled_reports(pairs, outcomes)
            for side, rep in reports.items():
                row = {"model": model, "split": kind_split, "set": side, **rep.row()}
                row["mrae"] = scale * twin_mrae(pairs, outcomes) if side == "test" else ""
                table2.append(row)
                hist.setdefault(side, {})[model] = (rep.point_edges, rep.point_counts)
            if model == "unet_cascade" and cfg.vitals_epochs > 0:
                twins = {int(i): p for o in outcomes for i, p in zip(o.test_idx, o.test_pred)}
                rows = vitals_table(pairs, split, twins, cfg.train_config("vitals_cnn"), kind_split, logs)
                for r in rows:
                    r["mrae"] *= scale
                    r["mrsd"] *= scale
                table7.extend(rows)
            if model == "unet_cascade" and outcomes and len(outcomes[0].test_idx):
                o = outcomes[0]
                ref = np.stack([pairs[i].ppg for i in o.test_idx[:3]])
                plots.waveform_examples(out / f"examples_{kind_split}.png", ref, o.test_pred[:3], SEGMENT_RATE)
        for side, series in hist.items():
            plots.error_histograms(out / f"hist_{side}_{kind_split}.png", series,
                                   f"Pointwise error, {side} set, {kind_split} split")
    export.write_table(out / "table2.csv", table2, TABLE2_COLUMNS)
    if table7:
        export.write_table(out / "table7.csv", table7, TABLE7_COLUMNS)
    return f"wrote {len(table2)} reconstruction rows and {len(table7)} vitals rows to {out}"


def cmd_ablate(cfg: ExperimentConfig) -> str:
    ds = load_dataset(cfg.dataset)
    out = _out(cfg)
    plan = AblationPlan(channels=cfg.int_list("channels"), seeds=cfg.int_list("seeds"),
                        unet=cfg.train_config("unet_cascade"), mlp=cfg.train_config("dct_mlp"), split_kind=cfg.split,
                        augment=cfg.augment)
    rows = ablate_channels(ds, plan, log_dir=out / "logs", progress=log.info)
    if cfg.percent:
        for r in rows:
            for k in ("dct_mlp_mrae_mean", "dct_mlp_mrae_std", "unet_mrae_mean", "unet_mrae_std"):
                r[k] *= 100.0
    export.write_table(out / "ablation.csv", rows, ABLATION_COLUMNS)
    plots.ablation_plot(out / "ablation.png", rows)
    return f"wrote {len(rows)} ablation rows to {out / 'ablation.csv'}"


def _twins(cfg: ExperimentConfig):
    """(pairs, indices, twin waveforms): from --checkpoint if given, else a fresh pooled-split cascade."""
    if cfg.checkpoint:
        kind, model, meta = load_trained(cfg.checkpoint)
        if kind not in ("unet_cascade", "dct_mlp"):
            raise ConfigError(f"{cfg.checkpoint}: a {kind} checkpoint cannot synthesize twins")
        _, pairs = _load_pairs(cfg, int(meta["n_ch"]))
        idx = originals(range(len(pairs)), pairs)
        k_mode = meta["train_config"]["k_mode"]
        twins = predict(kind, model, model_inputs(kind, [pairs[i] for i in idx], k_mode))
        return pairs, idx, twins
    _, pairs = _load_pairs(cfg)
    split = make_split(pairs, "pooled", cfg.seed)
    outcome = run_folds("unet_cascade", pairs, split, cfg.train_config("unet_cascade"))[0]
    return pairs, outcome.test_idx, outcome.test_pred


def cmd_features(cfg: ExperimentConfig) -> str:
    pairs, idx, twins = _twins(cfg)
    out = _out(cfg)
    beats, agreement, skipped = [], [], 0
    for i, twin in zip(idx, twins):
        p = pairs[i]
        for source, sig in (("reference", p.ppg), ("twin", twin)):
            for b, fs in enumerate(sdppg_features(sig, SEGMENT_RATE)):
                beats.append({"subject_id": p.subject_id, "segment": p.segment_index, "source": source,
                              "beat": b, **fs.as_dict()})
        try:
            for row in feature_agreement(p.ppg, twin, SEGMENT_RATE):
                agreement.append({"subject_id": p.subject_id, "segment": p.segment_index, **row})
        except BeatPairingError:
            skipped += 1
    beat_cols = ["subject_id", "segment", "source", "beat"] + [f"{n}_idx" for n in FIDUCIALS] + \
        list(FIDUCIALS) + list(INTERVALS) + ["agi"]
    export.write_table(out / "features.csv", beats, beat_cols)
    diff_cols = [f"{p}_{n}" for n in (*INTERVALS, "agi") for p in ("d", "r")]
    export.write_table(out / "feature_agreement.csv", agreement,
                       ["subject_id", "segment", "ref_a_idx", "twin_a_idx"] + diff_cols)
    summary = []
    for n in (*INTERVALS, "agi"):
        d = np.abs([r[f"d_{n}"] for r in agreement]) if agreement else np.array([])
        summary.append({"feature": n, "median_abs_diff": float(np.median(d)) if d.size else float("nan"),
                        "n_beats": int(d.size)})
    export.write_table(out / "feature_summary.csv", summary, ["feature", "median_abs_diff", "n_beats"])
    if agreement:
        plots.feature_scatter(out / "feature_agreement.png", agreement)
    return f"{len(agreement)} matched beats over {len(idx)} segments ({skipped} segments unpaired)"


def cmd_export_embeddings(cfg: ExperimentConfig) -> str:
    pairs, idx, twins = _twins(cfg)
    out = _out(cfg)
    path = export.export_embeddings(out / "embeddings.csv", [pairs[i] for i in idx], twins)
    return f"wrote {2 * len(idx)} rows to {path}"


_DISPATCH = {"simulate": cmd_simulate, "train": cmd_train, "ablate": cmd_ablate, "features": cmd_features,
             "export-embeddings": cmd_export_embeddings}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args.config, _overrides(args))
        if args.command == "eval" and (args.pred or args.target):
            if not (args.pred and args.target):
                raise ConfigError("--pred and --target go together")
            message = cmd_eval_fixture(cfg, args.pred, args.target)
        elif args.command == "eval":
            message = cmd_eval(cfg)
        else:
            message = _DISPATCH[args.command](cfg)
    except (ConfigError, SplitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrityError, CheckpointError, AlignmentError, FileNotFoundError) as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    print(message)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
