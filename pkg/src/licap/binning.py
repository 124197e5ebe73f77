"""Label informed grouping: top/non-top split, finer bins, proximity weights."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kg import LabelSet


@dataclass(frozen=True)
class BinAssignment:
    """The grouping structure the contrastive losses are built on.

    ``top_nodes`` is ordered by descending score; ``finer_bins`` partitions it
    into score intervals ordered ascending (bin 1 = lowest scores). ``beta``
    is the bin-to-bin proximity matrix: entry (m, n) down-weights how strongly
    bin n acts as a negative for anchors in bin m, peaking at 1 on the
    diagonal and decaying with rank distance.
    """

    top_nodes: tuple[int, ...]
    nontop_nodes: frozenset[int]
    finer_bins: tuple[tuple[int, ...], ...]
    bin_width: float
    gamma: float
    beta: np.ndarray

    @property
    def bin_count(self) -> int:
        return len(self.finer_bins)


def split_top(labels: LabelSet, gamma: float) -> tuple[list[int], set[int]]:
    """Split labelled nodes into the top ceil(gamma*n) and the rest.

    Returns (top, nontop) where top is ordered by descending score with ties
    at the boundary broken by ascending node id.
    """
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    n = len(labels)
    if n < 2:
        raise ValueError(f"need at least 2 labelled nodes, got {n}")
    size = max(1, math.ceil(gamma * n))
    ordered = labels.nodes_by_descending_score()
    top = ordered[:size]
    nontop = set(ordered[size:])
    return top, nontop


def finer_bins(
    top_scores: dict[int, float], bin_width: float
) -> list[list[int]]:
    """Group top nodes into fixed-width score intervals, ascending.

    Intervals are half-open [lo + k*w, lo + (k+1)*w) anchored at the minimum
    top score; the maximum score always lands in the last interval. Empty
    intervals are dropped and the survivors renumbered, so every returned bin
    is nonempty.
    """
    if bin_width <= 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    if not top_scores:
        raise ValueError("top set is empty")
    lo = min(top_scores.values())
    hi = max(top_scores.values())
    n_intervals = int(math.floor((hi - lo) / bin_width)) + 1
    bins: list[list[int]] = [[] for _ in range(n_intervals)]
    for node in sorted(top_scores):
        k = min(int(math.floor((top_scores[node] - lo) / bin_width)), n_intervals - 1)
        bins[k].append(node)
    return [b for b in bins if b]


def proximity_matrix(bin_count: int) -> np.ndarray:
    """Binomial proximity coefficients between finer bins.

    With 1-indexed bins m, n, the entry is C(n-m+N/2, N) / C(N/2, N) where
    N = 2*max(m, B-m). Each row peaks at exactly 1 on the diagonal and decays
    strictly as the rank distance |n-m| grows.
    """
    if bin_count < 1:
        raise ValueError(f"bin count must be >= 1, got {bin_count}")
    beta = np.empty((bin_count, bin_count), dtype=np.float64)
    for m in range(1, bin_count + 1):
        big_n = 2 * max(m, bin_count - m)
        center = math.comb(big_n, big_n // 2)
        for n in range(1, bin_count + 1):
            beta[m - 1, n - 1] = math.comb(big_n, n - m + big_n // 2) / center
    return beta


def assign_bins(
    labels: LabelSet, gamma: float, bin_width: float
) -> BinAssignment:
    """Run the full grouping pipeline on a label set."""
    top, nontop = split_top(labels, gamma)
    top_scores = {n: labels.entries[n] for n in top}
    bins = finer_bins(top_scores, bin_width)
    return BinAssignment(
        top_nodes=tuple(top),
        nontop_nodes=frozenset(nontop),
        finer_bins=tuple(tuple(b) for b in bins),
        bin_width=bin_width,
        gamma=gamma,
        beta=proximity_matrix(len(bins)),
    )


def prototype(embeddings, nodes):
    """Element-wise mean of the given rows.

    Accepts either a plain array (returns an array) or an autodiff tensor
    (returns a tensor so gradients flow through the mean).
    """
    ids = list(nodes)
    if not ids:
        raise ValueError("cannot build a prototype from an empty node set")
    from . import autodiff as ad

    if isinstance(embeddings, ad.Tensor):
        return ad.mean_rows(ad.gather_rows(embeddings, ids))
    values = np.asarray(embeddings, dtype=np.float64)
    return values[ids].mean(axis=0)
