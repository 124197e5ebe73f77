"""Downstream importance estimators consuming (pretrained or raw) embeddings.

Two supervised heads train on log-scores with mean squared error: a 2-layer
perceptron over node embeddings, and a one-layer scorer that turns each
embedding into an initial score and aggregates neighbor scores with
attention. PageRank is included as the unsupervised topology baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .errors import ConvergenceError
from .kg import KnowledgeGraph

MLP_KIND = "mlp"
SCORER_KIND = "aggregated_scorer"


@dataclass(frozen=True)
class DownstreamConfig:
    hidden_dim: int = 64
    epochs: int = 500
    learning_rate: float = 0.01
    seed: int = 0
    leaky_slope: float = 0.2


@dataclass
class NieModel:
    kind: str
    parameters: dict[str, ad.Tensor]
    input_dim: int
    hidden_dim: int
    leaky_slope: float = 0.2
    train_mse: list[float] | None = None

    def tensors(self) -> list[ad.Tensor]:
        return [self.parameters[name] for name in sorted(self.parameters)]


def _mlp_forward(model: NieModel, x: ad.Tensor) -> ad.Tensor:
    hidden = ad.leaky_relu(
        ad.add_rowvec(ad.matmul(x, model.parameters["w1"]), model.parameters["b1"]),
        model.leaky_slope,
    )
    return ad.add_scalar(
        ad.matvec(hidden, model.parameters["w2"]), model.parameters["b2"]
    )


def _scorer_forward(model: NieModel, embeddings: ad.Tensor, kg: KnowledgeGraph) -> ad.Tensor:
    initial = ad.add_scalar(
        ad.matvec(embeddings, model.parameters["w_score"]), model.parameters["b_score"]
    )
    dst, src, _ = kg.message_edges()
    pair = ad.concat_cols(
        [ad.gather_rows(embeddings, dst), ad.gather_rows(embeddings, src)]
    )
    logits = ad.leaky_relu(
        ad.matvec(pair, model.parameters["attn"]), model.leaky_slope
    )
    alpha = ad.segment_softmax(logits, dst)
    weighted = ad.mul(alpha, ad.gather_rows(initial, src))
    return ad.segment_sum(weighted, dst, kg.node_count)


def _mse(pred: ad.Tensor, target: np.ndarray) -> ad.Tensor:
    diff = ad.sub(pred, ad.tensor(target))
    return ad.scale(ad.dot(diff, diff), 1.0 / target.size)


def _fit(
    model: NieModel,
    loss_fn,
    config: DownstreamConfig,
) -> NieModel:
    optimizer = ad.Adam(model.tensors(), learning_rate=config.learning_rate)
    mse_log: list[float] = []
    for _ in range(config.epochs):
        loss = loss_fn()
        mse_log.append(loss.item())
        optimizer.zero_grad()
        ad.backward(loss)
        optimizer.step()
    model.train_mse = mse_log
    return model


def _init_mlp(input_dim: int, config: DownstreamConfig) -> NieModel:
    rng = np.random.default_rng(config.seed)
    hidden = config.hidden_dim

    def glorot(shape):
        fan_in, fan_out = (shape if len(shape) == 2 else (shape[0], 1))
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)

    parameters = {
        "w1": ad.tensor(glorot((input_dim, hidden)), requires_grad=True),
        "b1": ad.tensor(np.zeros(hidden), requires_grad=True),
        "w2": ad.tensor(glorot((hidden,)), requires_grad=True),
        "b2": ad.tensor(0.0, requires_grad=True),
    }
    return NieModel(
        kind=MLP_KIND,
        parameters=parameters,
        input_dim=input_dim,
        hidden_dim=hidden,
        leaky_slope=config.leaky_slope,
    )


def train_mlp(
    embeddings: np.ndarray,
    train_nodes: Sequence[int],
    targets: Sequence[float],
    config: DownstreamConfig = DownstreamConfig(),
) -> NieModel:
    """Fit the 2-layer perceptron head on the given training nodes."""
    idx = np.asarray(list(train_nodes), dtype=np.int64)
    y = np.asarray(list(targets), dtype=np.float64)
    if idx.size == 0:
        raise ValueError("training split is empty")
    x = ad.tensor(np.asarray(embeddings, dtype=np.float64)[idx])
    model = _init_mlp(x.values.shape[1], config)
    return _fit(model, lambda: _mse(_mlp_forward(model, x), y), config)


def train_aggregated_scorer(
    kg: KnowledgeGraph,
    embeddings: np.ndarray,
    train_nodes: Sequence[int],
    targets: Sequence[float],
    config: DownstreamConfig = DownstreamConfig(),
) -> NieModel:
    """Fit the neighborhood score aggregator end-to-end on the training nodes.

    Initial scores come from a linear head over each node's embedding; one
    attention layer over the augmented adjacency mixes neighbor scores into
    the final prediction.
    """
    idx = np.asarray(list(train_nodes), dtype=np.int64)
    y = np.asarray(list(targets), dtype=np.float64)
    if idx.size == 0:
        raise ValueError("training split is empty")
    emb = np.asarray(embeddings, dtype=np.float64)
    dim = emb.shape[1]
    rng = np.random.default_rng(config.seed)
    bound = np.sqrt(6.0 / (dim + 1))
    parameters = {
        "w_score": ad.tensor(rng.uniform(-bound, bound, size=dim), requires_grad=True),
        "b_score": ad.tensor(0.0, requires_grad=True),
        "attn": ad.tensor(
            rng.uniform(-np.sqrt(6.0 / (2 * dim + 1)), np.sqrt(6.0 / (2 * dim + 1)), size=2 * dim),
            requires_grad=True,
        ),
    }
    model = NieModel(
        kind=SCORER_KIND,
        parameters=parameters,
        input_dim=dim,
        hidden_dim=0,
        leaky_slope=config.leaky_slope,
    )
    x = ad.tensor(emb)

    def loss_fn():
        scores = _scorer_forward(model, x, kg)
        return _mse(ad.gather_rows(scores, idx), y)

    return _fit(model, loss_fn, config)


def predict(
    model: NieModel,
    embeddings: np.ndarray,
    kg: KnowledgeGraph | None = None,
    nodes: Sequence[int] | None = None,
) -> np.ndarray:
    """Score the requested nodes (default: every embedding row)."""
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[1] != model.input_dim:
        raise ValueError(
            f"embeddings must be [n, {model.input_dim}], got {emb.shape}"
        )
    x = ad.tensor(emb)
    if model.kind == MLP_KIND:
        scores = _mlp_forward(model, x).values
    elif model.kind == SCORER_KIND:
        if kg is None:
            raise ValueError("the aggregated scorer needs the graph to predict")
        scores = _scorer_forward(model, x, kg).values
    else:
        raise ValueError(f"unknown model kind {model.kind!r}")
    if nodes is None:
        return scores.copy()
    return scores[np.asarray(list(nodes), dtype=np.int64)]


def pagerank(
    kg: KnowledgeGraph,
    damping: float = 0.85,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> np.ndarray:
    """Power iteration over the original directed edges.

    Dangling mass is spread uniformly; iteration stops when the L1 change
    drops below ``tol``. Runs on the un-augmented topology: reverse and self
    edges are a message-passing device, not part of the graph.
    """
    if not 0 < damping < 1:
        raise ValueError(f"damping must be in (0, 1), got {damping}")
    if kg.node_count == 0:
        raise ValueError("graph has no nodes")
    if kg.augmented:
        raise ValueError("pagerank expects the un-augmented graph")
    n = kg.node_count
    if kg.edges:
        triples = np.asarray([(h, t) for h, _, t in kg.edges], dtype=np.int64)
        order = np.lexsort((triples[:, 1], triples[:, 0]))
        heads, tails = triples[order, 0], triples[order, 1]
    else:
        heads = tails = np.empty(0, dtype=np.int64)
    out_degree = np.bincount(heads, minlength=n).astype(np.float64)
    dangling = out_degree == 0

    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        contribution = np.zeros(n)
        if heads.size:
            np.add.at(contribution, tails, x[heads] / out_degree[heads])
        dangling_mass = x[dangling].sum() / n
        x_new = (1 - damping) / n + damping * (contribution + dangling_mass)
        residual = np.abs(x_new - x).sum()
        x = x_new
        if residual < tol:
            return x
    raise ConvergenceError(
        f"pagerank did not converge in {max_iter} iterations (residual {residual:.3e})"
    )
