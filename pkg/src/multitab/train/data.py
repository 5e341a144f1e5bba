"""Splits, train-only standardisation and batching."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..numkit import Rng
from ..schema import REGRESSION

DEFAULT_RATIOS = (0.7, 0.15, 0.15)


@dataclass
class Standardizer:
    feature_mean: np.ndarray   # per schema column; 0 / 1 for categorical columns
    feature_std: np.ndarray
    target_mean: np.ndarray    # per task; 0 / 1 for classification tasks
    target_std: np.ndarray

    def features(self, x):
        return (x - self.feature_mean) / self.feature_std

    def targets(self, y):
        return (y - self.target_mean) / self.target_std

    def unscale_target(self, i, values):
        return values * self.target_std[i] + self.target_mean[i]

    def to_json(self):
        return {k: getattr(self, k).tolist() for k in ("feature_mean", "feature_std", "target_mean", "target_std")}

    @classmethod
    def from_json(cls, item):
        return cls(**{k: np.asarray(v, dtype=np.float64) for k, v in item.items()})


def fit_standardizer(features, labels, schema, tasks, standardize_numeric=True):
    d, t = features.shape[1], labels.shape[1]
    fmean, fstd = np.zeros(d), np.ones(d)
    if standardize_numeric:
        for j in schema.numeric_index:
            fmean[j] = features[:, j].mean()
            fstd[j] = features[:, j].std() or 1.0
    tmean, tstd = np.zeros(t), np.ones(t)
    for i, task in enumerate(tasks):
        if task.kind == REGRESSION:
            tmean[i] = labels[:, i].mean()
            tstd[i] = labels[:, i].std() or 1.0
    return Standardizer(fmean, fstd, tmean, tstd)


@dataclass
class SplitDataset:
    dataset: object            # benchgen.SyntheticDataset
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    scaler: Standardizer
    ratios: tuple = DEFAULT_RATIOS
    seed: int = 0

    @property
    def schema(self):
        return self.dataset.schema

    @property
    def tasks(self):
        return self.dataset.tasks

    def part(self, name):
        """(scaled features, scaled targets, raw targets) for one split."""
        idx = getattr(self, name)
        x = self.scaler.features(self.dataset.features[idx])
        raw = self.dataset.labels[idx]
        return x, self.scaler.targets(raw), raw

    def split_json(self):
        return {"ratios": list(self.ratios), "seed": self.seed, "sizes": [len(self.train), len(self.val), len(self.test)]}


def make_splits(dataset, ratios=DEFAULT_RATIOS, seed=0, standardize_numeric=True):
    """Seeded shuffle then contiguous train/val/test slices; scaling fitted on train only."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ContractError(f"split ratios must be three positive numbers summing to 1, got {ratios}")
    n = dataset.features.shape[0]
    order = Rng(seed).permutation(n)
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    train, val, test = order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:]
    for name, idx in (("train", train), ("val", val), ("test", test)):
        if len(idx) == 0:
            raise ContractError(f"split {name!r} received 0 rows (n={n}, ratios={ratios})")
    scaler = fit_standardizer(dataset.features[train], dataset.labels[train], dataset.schema, dataset.tasks,
                              standardize_numeric)
    return SplitDataset(dataset, train, val, test, scaler, ratios, seed)


def batches(n, batch_size, order=None, min_size=1):
    """Index batches over ``order`` (default 0..n-1); a trailing batch smaller
    than ``min_size`` is merged into the previous one."""
    order = np.arange(n) if order is None else order
    starts = list(range(0, n, batch_size))
    out = [order[s:s + batch_size] for s in starts]
    if len(out) > 1 and len(out[-1]) < min_size:
        tail = out.pop()
        out[-1] = np.concatenate([out[-1], tail])
    return out
