"""Deterministic cross-validation harnesses: stratified k-fold and leave-one-group-out."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Dataset
from .training import TrainConfig, accuracy, fit


@dataclass(frozen=True)
class Fold:
    train: tuple
    val: tuple
    test: tuple


@dataclass(frozen=True)
class SplitPlan:
    scheme: str
    seed: int
    folds: tuple


def _deal_stratified(labels: np.ndarray, k: int, rng: np.random.Generator):
    """Deal shuffled per-class indices round-robin into k bins.

    The bin pointer runs on across classes, so bin sizes differ by at most
    one sample overall and per class.
    """
    bins = [[] for _ in range(k)]
    ptr = 0
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        for i in idx:
            bins[ptr % k].append(int(i))
            ptr += 1
    return bins


def kfold_split(dataset: Dataset, k: int = 10, seed: int = 0) -> SplitPlan:
    """Label-stratified k folds; fold i tests, fold i+1 validates, rest train."""
    labels = dataset.labels
    for c in (0, 1):
        count = int((labels == c).sum())
        if count < k:
            raise ValueError(
                f"class {c} has {count} samples, fewer than k={k} folds"
            )
    rng = np.random.default_rng(seed)
    bins = _deal_stratified(labels, k, rng)
    folds = []
    for i in range(k):
        test = tuple(sorted(bins[i]))
        val = tuple(sorted(bins[(i + 1) % k]))
        train = tuple(sorted(
            j for b in range(k) if b not in (i, (i + 1) % k) for j in bins[b]
        ))
        folds.append(Fold(train=train, val=val, test=test))
    return SplitPlan(scheme="tenfold" if k == 10 else f"{k}fold", seed=seed,
                     folds=tuple(folds))


def loso_split(dataset: Dataset, seed: int = 0, val_fraction: float = 0.1) -> SplitPlan:
    """One fold per group: that group tests, a stratified slice of the rest validates."""
    groups = sorted(set(dataset.groups))
    if len(groups) < 2:
        raise ValueError(f"leave-one-group-out needs >= 2 groups, got {groups}")
    labels = dataset.labels
    group_arr = np.array(dataset.groups)
    for g in groups:
        present = set(labels[group_arr == g].tolist())
        if present != {0, 1}:
            warnings.warn(f"group {g!r} does not contain both classes", stacklevel=2)
    rng = np.random.default_rng(seed)
    folds = []
    for g in groups:
        test = np.flatnonzero(group_arr == g)
        pool = np.flatnonzero(group_arr != g)
        val: list[int] = []
        for c in (0, 1):
            pool_c = pool[labels[pool] == c]
            rng.shuffle(pool_c)
            n_val = min(len(pool_c), max(1, round(val_fraction * len(pool_c))))
            val.extend(int(i) for i in pool_c[:n_val])
        val_set = set(val)
        train = tuple(sorted(int(i) for i in pool if int(i) not in val_set))
        folds.append(Fold(train=train, val=tuple(sorted(val)), test=tuple(sorted(int(i) for i in test))))
    return SplitPlan(scheme="loso", seed=seed, folds=tuple(folds))


def aggregate_accuracy(accuracies: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation."""
    accs = np.asarray(accuracies, dtype=np.float64)
    mean = float(accs.mean())
    std = float(math.sqrt(float(((accs - mean) ** 2).mean())))
    return mean, std


@dataclass(frozen=True)
class Report:
    scheme: str
    seed: int
    fold_accuracies: tuple
    mean_accuracy: float
    std_accuracy: float

    @property
    def n_folds(self) -> int:
        return len(self.fold_accuracies)


def evaluate(plan: SplitPlan, dataset: Dataset, cfg: TrainConfig,
             return_models: bool = False):
    """Train one model per fold and report test accuracies.

    Each fold trains with a seed derived from the master seed plus the fold
    index, so folds are independent and the whole run is reproducible.
    """
    if not plan.folds:
        raise ValueError("split plan has no folds")
    graphs = dataset.graphs
    accs = []
    models = []
    for fold_idx, fold in enumerate(plan.folds):
        fold_cfg = replace(cfg, seed=cfg.seed + fold_idx)
        model, _ = fit([graphs[i] for i in fold.train],
                       [graphs[i] for i in fold.val], fold_cfg)
        accs.append(accuracy(model, [graphs[i] for i in fold.test]))
        if return_models:
            models.append(model)
    mean, std = aggregate_accuracy(accs)
    report = Report(scheme=plan.scheme, seed=plan.seed, fold_accuracies=tuple(accs),
                    mean_accuracy=mean, std_accuracy=std)
    return (report, models) if return_models else report


def report_to_json(report: Report, path) -> None:
    payload = {
        "scheme": report.scheme,
        "seed": report.seed,
        "folds": [
            {"fold": i, "test_accuracy": acc}
            for i, acc in enumerate(report.fold_accuracies)
        ],
        "mean_accuracy": report.mean_accuracy,
        "std_accuracy": report.std_accuracy,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def report_to_csv(report: Report, path) -> None:
    lines = ["fold,test_accuracy"]
    lines += [f"{i},{acc!r}" for i, acc in enumerate(report.fold_accuracies)]
    Path(path).write_text("\n".join(lines) + "\n")
