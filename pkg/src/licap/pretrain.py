"""Contrastive pretraining of node embeddings guided by importance labels.

Each epoch encodes every node, rebuilds the bin prototypes from the current
embeddings, draws a fresh shared negative sample, and minimizes a weighted
sum of two InfoNCE-style losses: one separating the top bin from sampled
non-top nodes, one keeping the relative order among the finer bins via
binomial proximity weights on the negative logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import autodiff as ad
from .binning import BinAssignment, assign_bins, finer_bins, prototype, proximity_matrix
from .errors import TrainingDiverged
from .kg import FeatureMatrix, KnowledgeGraph, LabelSet, augment_for_message_passing
from .pregat import PreGATConfig, PreGATParams, forward, init_pregat

VARIANTS = ("full", "l1_only", "l2_only", "random_sampling")
ENCODER_MODES = ("pregat", "gat")


@dataclass(frozen=True)
class PretrainConfig:
    gamma: float = 0.1
    bin_width: float = 1.0
    eta1: float = 1.0
    eta2: float = 1.0
    tau: float = 0.05
    k_neg: float = 1.0
    epochs: int = 200
    patience: int = 20
    min_epochs: int = 50
    learning_rate: float = 0.005
    seed: int = 0
    variant: str = "full"
    encoder_mode: str = "pregat"
    heads: int = 8
    hidden_dim: int = 8
    predicate_dim: int = 10
    leaky_slope: float = 0.2

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.eta1 < 0 or self.eta2 < 0:
            raise ValueError("loss weights must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 < self.k_neg <= 1:
            raise ValueError(f"k_neg must be in (0, 1], got {self.k_neg}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.encoder_mode not in ENCODER_MODES:
            raise ValueError(
                f"encoder_mode must be one of {ENCODER_MODES}, got {self.encoder_mode!r}"
            )


class EpochStats(NamedTuple):
    epoch: int
    l1: float
    l2: float
    total: float


@dataclass
class PretrainResult:
    embeddings: FeatureMatrix
    history: list[EpochStats]
    best_epoch: int
    bins: BinAssignment
    params: PreGATParams
    kg: KnowledgeGraph = field(repr=False)


def sample_negatives(
    nontop: Sequence[int], k_neg: float, rng: np.random.Generator
) -> np.ndarray:
    """One shared negative set per epoch: max(1, ceil(k_neg*|nontop|)) nodes
    drawn without replacement."""
    pool = np.sort(np.asarray(list(nontop), dtype=np.int64))
    if pool.size == 0:
        raise ValueError("cannot sample negatives from an empty non-top set")
    size = max(1, math.ceil(k_neg * pool.size))
    return rng.choice(pool, size=size, replace=False)


def loss_l1(
    embeddings: ad.Tensor,
    top_nodes: Sequence[int],
    c_top: ad.Tensor,
    negatives: Sequence[int],
    tau: float,
) -> ad.Tensor:
    """Sum over top anchors of -log of the positive share of the softmax mass,
    positives against the top prototype and negatives against sampled non-top
    embeddings. Stabilized via max-shifted log-sum-exp."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    top_idx = np.asarray(list(top_nodes), dtype=np.int64)
    h_top = ad.gather_rows(embeddings, top_idx)
    pos = ad.scale(ad.matvec(h_top, c_top), 1.0 / tau)
    neg_idx = np.asarray(list(negatives), dtype=np.int64)
    if neg_idx.size == 0:
        logits = ad.as_col(pos)
    else:
        h_neg = ad.gather_rows(embeddings, neg_idx)
        neg = ad.scale(ad.matmul(h_top, ad.transpose(h_neg)), 1.0 / tau)
        logits = ad.concat_cols([ad.as_col(pos), neg])
    return ad.tsum(ad.sub(ad.row_logsumexp(logits), pos))


def loss_l2(
    embeddings: ad.Tensor,
    bins: Sequence[Sequence[int]],
    prototypes: Sequence[ad.Tensor],
    beta: np.ndarray,
    tau: float,
) -> ad.Tensor:
    """Sum over finer-bin anchors of -log of the own-prototype share, with
    every prototype acting as a proximity-weighted negative."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    n_bins = len(bins)
    if len(prototypes) != n_bins or beta.shape != (n_bins, n_bins):
        raise ValueError("bins, prototypes, and beta disagree on bin count")
    proto_matrix = ad.stack_rows(list(prototypes))
    total = ad.tensor(0.0)
    for m, members in enumerate(bins):
        idx = np.asarray(list(members), dtype=np.int64)
        h_m = ad.gather_rows(embeddings, idx)
        logits = ad.scale(ad.matmul(h_m, ad.transpose(proto_matrix)), 1.0 / tau)
        weighted = ad.mul_const(logits, beta[m])
        contribution = ad.tsum(
            ad.sub(ad.row_logsumexp(weighted), ad.take_col(logits, m))
        )
        total = ad.add(total, contribution)
    return total


def total_loss(l1: ad.Tensor, l2: ad.Tensor, eta1: float, eta2: float) -> ad.Tensor:
    return ad.add(ad.scale(l1, eta1), ad.scale(l2, eta2))


def _random_grouping(
    labels: LabelSet, bins: BinAssignment, rng: np.random.Generator
) -> BinAssignment:
    """Swap the top set for a uniformly random set of equal size; the finer
    grouping is rebuilt from the random members' scores."""
    labelled = np.asarray(labels.nodes(), dtype=np.int64)
    chosen = rng.choice(labelled, size=len(bins.top_nodes), replace=False)
    chosen_set = set(int(n) for n in chosen)
    top = sorted(chosen_set, key=lambda n: (-labels.entries[n], n))
    nontop = frozenset(int(n) for n in labelled if int(n) not in chosen_set)
    random_bins = finer_bins({n: labels.entries[n] for n in top}, bins.bin_width)
    return BinAssignment(
        top_nodes=tuple(top),
        nontop_nodes=nontop,
        finer_bins=tuple(tuple(b) for b in random_bins),
        bin_width=bins.bin_width,
        gamma=bins.gamma,
        beta=proximity_matrix(len(random_bins)),
    )


def pretrain(
    kg: KnowledgeGraph,
    features: FeatureMatrix,
    labels: LabelSet,
    config: PretrainConfig,
    initial_params: PreGATParams | None = None,
) -> PretrainResult:
    """Run the full pretraining loop and return the final node embeddings.

    Early stopping tracks the training loss: after ``min_epochs`` epochs, a
    stretch of ``patience`` epochs without improvement stops the run, and the
    best-loss parameters are restored before the final encoding pass.
    ``initial_params`` resumes from a checkpoint; its encoder configuration
    then takes precedence over the encoder fields of ``config``.
    """
    if len(labels) < 2:
        raise ValueError("pretraining needs at least 2 labelled nodes")
    if config.gamma >= 1:
        raise ValueError("gamma must be < 1 so the non-top set is nonempty")
    if not kg.augmented:
        kg = augment_for_message_passing(kg)

    seed_seq = np.random.SeedSequence(config.seed)
    param_seed, sampling_seed, grouping_seed = seed_seq.spawn(3)
    sampling_rng = np.random.default_rng(sampling_seed)

    bins = assign_bins(labels, config.gamma, config.bin_width)
    if config.variant == "random_sampling":
        bins = _random_grouping(labels, bins, np.random.default_rng(grouping_seed))

    eta1, eta2 = config.eta1, config.eta2
    if config.variant in ("l1_only", "random_sampling"):
        eta2 = 0.0
    elif config.variant == "l2_only":
        eta1 = 0.0

    if initial_params is not None:
        params = init_pregat(initial_params.config, _seed_int(param_seed))
        params.restore(initial_params.snapshot())
    else:
        encoder_config = PreGATConfig(
            in_dim=features.dim,
            hidden_dim=config.hidden_dim,
            heads=config.heads,
            predicate_dim=config.predicate_dim,
            predicate_count=kg.predicate_count,
            predicate_aware=config.encoder_mode == "pregat",
            leaky_slope=config.leaky_slope,
        )
        params = init_pregat(encoder_config, _seed_int(param_seed))
    optimizer = ad.Adam(params.all_tensors(), learning_rate=config.learning_rate)
    feature_tensor = ad.tensor(features.values)
    nontop_sorted = sorted(bins.nontop_nodes)

    history: list[EpochStats] = []
    best_loss = math.inf
    best_epoch = 0
    best_snapshot = params.snapshot()

    for epoch in range(1, config.epochs + 1):
        embeddings = forward(params, kg, feature_tensor)
        c_top = prototype(embeddings, bins.top_nodes)
        prototypes = [prototype(embeddings, members) for members in bins.finer_bins]
        negatives = sample_negatives(nontop_sorted, config.k_neg, sampling_rng)

        l1 = loss_l1(embeddings, bins.top_nodes, c_top, negatives, config.tau)
        l2 = loss_l2(embeddings, bins.finer_bins, prototypes, bins.beta, config.tau)
        loss = total_loss(l1, l2, eta1, eta2)

        total = loss.item()
        if not math.isfinite(total):
            raise TrainingDiverged(f"non-finite loss {total} at epoch {epoch}")
        history.append(EpochStats(epoch, l1.item(), l2.item(), total))

        if total < best_loss:
            best_loss = total
            best_epoch = epoch
            best_snapshot = params.snapshot()
        elif epoch >= config.min_epochs and epoch - best_epoch >= config.patience:
            break

        optimizer.zero_grad()
        ad.backward(loss)
        optimizer.step()

    params.restore(best_snapshot)
    final = forward(params, kg, feature_tensor)
    return PretrainResult(
        embeddings=FeatureMatrix(final.values.copy()),
        history=history,
        best_epoch=best_epoch,
        bins=bins,
        params=params,
        kg=kg,
    )


def separation_score(
    embeddings: np.ndarray, top_nodes: Sequence[int], nontop_nodes: Sequence[int]
) -> float:
    """Mean cosine similarity of top rows to the top prototype minus the same
    for non-top rows, computed on mean-centered embeddings."""
    top_idx = np.asarray(list(top_nodes), dtype=np.int64)
    nontop_idx = np.asarray(list(nontop_nodes), dtype=np.int64)
    labelled = np.concatenate([top_idx, nontop_idx])
    centered = embeddings - embeddings[labelled].mean(axis=0)
    c_top = centered[top_idx].mean(axis=0)

    def mean_cosine(rows: np.ndarray) -> float:
        norms = np.linalg.norm(rows, axis=1) * np.linalg.norm(c_top)
        norms = np.where(norms == 0, 1.0, norms)
        return float(np.mean(rows @ c_top / norms))

    return mean_cosine(centered[top_idx]) - mean_cosine(centered[nontop_idx])


def _seed_int(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def variant_config(config: PretrainConfig, variant: str) -> PretrainConfig:
    """Copy of the config with a different ablation variant selected."""
    return replace(config, variant=variant)
