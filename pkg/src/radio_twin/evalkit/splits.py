"""Train/test split plans: pooled 80/20 by segment, or leave-two-subjects-out."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class Fold:
    train: np.ndarray
    test: np.ndarray
    held_out: tuple = ()


@dataclass(frozen=True)
class SplitPlan:
    kind: str
    seed: int
    folds: tuple

    def __len__(self) -> int:
        return len(self.folds)


def _origin_key(p) -> tuple:
    return (p.subject_id, p.segment_index)


def make_split(pairs, kind: str = "pooled", seed: int = 0, train_fraction: float = 0.8) -> SplitPlan:
    """Split by original segment; augmented copies always land beside their original."""
    if not pairs:
        raise SplitError("no segments to split")
    keys = [_origin_key(p) for p in pairs]
    rng = np.random.default_rng(seed)

    if kind == "pooled":
        originals = sorted(set(keys))
        order = rng.permutation(len(originals))
        n_train = int(round(train_fraction * len(originals)))
        train_keys = {originals[i] for i in order[:n_train]}
        train = np.array([i for i, k in enumerate(keys) if k in train_keys], dtype=int)
        test = np.array([i for i, k in enumerate(keys) if k not in train_keys], dtype=int)
        return SplitPlan("pooled", seed, (Fold(train, test),))

    if kind == "ltso":
        subjects = sorted({p.subject_id for p in pairs})
        if len(subjects) < 4 or len(subjects) % 2:
            raise SplitError(f"ltso needs an even number of subjects (>= 4) to pair up; got {len(subjects)}")
        shuffled = [subjects[i] for i in rng.permutation(len(subjects))]
        folds = []
        for j in range(0, len(shuffled), 2):
            held = tuple(sorted(shuffled[j:j + 2]))
            test_mask = np.array([p.subject_id in held for p in pairs])
            folds.append(Fold(np.flatnonzero(~test_mask), np.flatnonzero(test_mask), held))
        return SplitPlan("ltso", seed, tuple(folds))

    raise SplitError(f"unknown split kind {kind!r} (expected 'pooled' or 'ltso')")
