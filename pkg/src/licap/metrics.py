"""Regression and ranking metrics plus the k-fold split used for evaluation.

All ranking metrics break prediction ties by ascending item index so repeated
runs produce identical numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _as_vectors(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.ndim != 1 or t.ndim != 1 or p.shape != t.shape:
        raise ValueError(f"prediction/truth shape mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("metrics need at least one sample")
    return p, t


def rmse(pred, truth) -> float:
    p, t = _as_vectors(pred, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def median_ae(pred, truth) -> float:
    p, t = _as_vectors(pred, truth)
    return float(np.median(np.abs(p - t)))


def _descending_order(values: np.ndarray) -> np.ndarray:
    """Indices sorting values descending, ties by ascending index."""
    return np.lexsort((np.arange(values.size), -values))


def ndcg_at_k(pred, truth, k: int) -> float:
    """Discounted cumulative gain of the predicted ordering, normalized by the
    ideal ordering; 0 by convention when the ideal gain is 0."""
    p, t = _as_vectors(pred, truth)
    if not 1 <= k <= p.size:
        raise ValueError(f"k must be in [1, {p.size}], got {k}")
    if np.any(t < 0):
        raise ValueError("truth scores must be >= 0")
    discounts = 1.0 / np.log2(np.arange(1, k + 1) + 1)
    dcg = float(np.sum(t[_descending_order(p)[:k]] * discounts))
    idcg = float(np.sum(np.sort(t)[::-1][:k] * discounts))
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def _fractional_ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman(pred, truth) -> float:
    """Pearson correlation of fractional ranks."""
    p, t = _as_vectors(pred, truth)
    if p.size < 2:
        raise ValueError("spearman needs at least 2 samples")
    rp = _fractional_ranks(p)
    rt = _fractional_ranks(t)
    dp = rp - rp.mean()
    dt = rt - rt.mean()
    denom = np.sqrt(np.sum(dp**2)) * np.sqrt(np.sum(dt**2))
    if denom == 0:
        raise ValueError("spearman is undefined for constant inputs")
    return float(np.sum(dp * dt) / denom)


def over_at_k(pred, truth, k: int) -> float:
    """Overlap ratio of the predicted and actual top-k sets."""
    p, t = _as_vectors(pred, truth)
    if not 1 <= k <= p.size:
        raise ValueError(f"k must be in [1, {p.size}], got {k}")
    top_pred = set(_descending_order(p)[:k].tolist())
    top_truth = set(_descending_order(t)[:k].tolist())
    return len(top_pred & top_truth) / k


def kfold_split(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle then contiguous slicing into k folds of near-equal size."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise ValueError(f"cannot split {n} items into {k} folds")
    rng = np.random.default_rng(seed)
    permuted = rng.permutation(n)
    return [np.sort(fold) for fold in np.array_split(permuted, k)]


@dataclass(frozen=True)
class EvalReport:
    rmse: float
    median_ae: float
    spearman: float
    ndcg_at_k: dict[int, float] = field(default_factory=dict)
    over_at_k: dict[int, float] = field(default_factory=dict)
    fold: int | None = None
    sample_count: int = 0

    def as_row(self) -> dict[str, float]:
        row = {
            "rmse": self.rmse,
            "median_ae": self.median_ae,
            "spearman": self.spearman,
        }
        for k in sorted(self.ndcg_at_k):
            row[f"ndcg@{k}"] = self.ndcg_at_k[k]
        for k in sorted(self.over_at_k):
            row[f"over@{k}"] = self.over_at_k[k]
        return row


def evaluate(pred, truth, ks, fold: int | None = None) -> EvalReport:
    """All metrics in one report; ks selects the NDCG/OVER cutoffs."""
    p, t = _as_vectors(pred, truth)
    return EvalReport(
        rmse=rmse(p, t),
        median_ae=median_ae(p, t),
        spearman=spearman(p, t),
        ndcg_at_k={k: ndcg_at_k(p, t, k) for k in ks},
        over_at_k={k: over_at_k(p, t, k) for k in ks},
        fold=fold,
        sample_count=p.size,
    )
