"""Predicate-aware graph attention encoder, with a plain-GAT mode.

The encoder computes one attention coefficient per incoming adjacency entry
of each node. Attention logits concatenate the transformed destination
embedding, the (trainable) predicate embedding of the connecting edge, and
the transformed source embedding; plain-GAT mode drops the predicate block.
Heads are concatenated to form the final embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DataError, ParseError
from .kg import KnowledgeGraph


@dataclass(frozen=True)
class PreGATConfig:
    in_dim: int
    hidden_dim: int = 8
    heads: int = 8
    predicate_dim: int = 10
    predicate_count: int = 1
    predicate_aware: bool = True
    leaky_slope: float = 0.2

    def __post_init__(self) -> None:
        if min(self.in_dim, self.hidden_dim, self.heads, self.predicate_count) <= 0:
            raise ValueError("encoder dimensions and head count must be positive")
        if self.predicate_dim < 0:
            raise ValueError("predicate_dim must be >= 0")

    @property
    def out_dim(self) -> int:
        return self.heads * self.hidden_dim

    @property
    def attn_dim(self) -> int:
        if self.predicate_aware:
            return 2 * self.hidden_dim + self.predicate_dim
        return 2 * self.hidden_dim


@dataclass
class PreGATParams:
    """Trainable state: per-head transforms, attention vectors, predicate table."""

    weights: list[ad.Tensor]
    attn: list[ad.Tensor]
    predicates: ad.Tensor
    config: PreGATConfig

    def all_tensors(self) -> list[ad.Tensor]:
        return [*self.weights, *self.attn, self.predicates]

    def named_tensors(self) -> list[tuple[str, ad.Tensor]]:
        named = []
        for h, (w, a) in enumerate(zip(self.weights, self.attn)):
            named.append((f"head{h}.weight", w))
            named.append((f"head{h}.attn", a))
        named.append(("predicates", self.predicates))
        return named

    def snapshot(self) -> list[np.ndarray]:
        return [t.values.copy() for t in self.all_tensors()]

    def restore(self, snapshot: list[np.ndarray]) -> None:
        for t, saved in zip(self.all_tensors(), snapshot):
            t.values[...] = saved


def _glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    if len(shape) == 2:
        fan_in, fan_out = shape
    else:
        fan_in, fan_out = shape[0], 1
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_pregat(config: PreGATConfig, seed: int) -> PreGATParams:
    """Draw fresh parameters: predicate table from N(0,1), the rest Glorot."""
    rng = np.random.default_rng(seed)
    predicates = ad.tensor(
        rng.standard_normal((config.predicate_count, config.predicate_dim)),
        requires_grad=True,
    )
    weights, attn = [], []
    for _ in range(config.heads):
        weights.append(
            ad.tensor(
                _glorot_uniform(rng, (config.in_dim, config.hidden_dim)),
                requires_grad=True,
            )
        )
        attn.append(
            ad.tensor(_glorot_uniform(rng, (config.attn_dim,)), requires_grad=True)
        )
    return PreGATParams(weights=weights, attn=attn, predicates=predicates, config=config)


def _as_feature_tensor(node_features) -> ad.Tensor:
    if isinstance(node_features, ad.Tensor):
        return node_features
    return ad.tensor(np.asarray(node_features, dtype=np.float64))


def _check_shapes(params: PreGATParams, kg: KnowledgeGraph, features: ad.Tensor) -> None:
    cfg = params.config
    if features.values.ndim != 2 or features.values.shape[1] != cfg.in_dim:
        raise ValueError(
            f"features must be [{kg.node_count}, {cfg.in_dim}], "
            f"got {features.values.shape}"
        )
    if features.values.shape[0] != kg.node_count:
        raise ValueError("feature row count does not match graph node count")
    if kg.predicate_count != cfg.predicate_count:
        raise ValueError(
            f"predicate table built for {cfg.predicate_count} predicates, "
            f"graph has {kg.predicate_count}"
        )


def _head_attention(
    params: PreGATParams,
    head: int,
    wh: ad.Tensor,
    dst: np.ndarray,
    src: np.ndarray,
    pred: np.ndarray,
) -> tuple[ad.Tensor, ad.Tensor]:
    """Per-edge attention coefficients and gathered source features for a head."""
    cfg = params.config
    src_f = ad.gather_rows(wh, src)
    dst_f = ad.gather_rows(wh, dst)
    if cfg.predicate_aware:
        pred_f = ad.gather_rows(params.predicates, pred)
        cat = ad.concat_cols([dst_f, pred_f, src_f])
    else:
        cat = ad.concat_cols([dst_f, src_f])
    logits = ad.leaky_relu(ad.matvec(cat, params.attn[head]), cfg.leaky_slope)
    alpha = ad.segment_softmax(logits, dst)
    return alpha, src_f


def attention_coefficients(
    params: PreGATParams, kg: KnowledgeGraph, node_features
) -> ad.Tensor:
    """Attention coefficients per adjacency entry, one column per head.

    Rows follow the graph's canonical (dst, src, predicate) edge order;
    coefficients sum to 1 over each destination node's entries.
    """
    features = _as_feature_tensor(node_features)
    _check_shapes(params, kg, features)
    dst, src, pred = kg.message_edges()
    cols = []
    for head in range(params.config.heads):
        wh = ad.matmul(features, params.weights[head])
        alpha, _ = _head_attention(params, head, wh, dst, src, pred)
        cols.append(ad.as_col(alpha))
    return ad.concat_cols(cols)


def forward(params: PreGATParams, kg: KnowledgeGraph, node_features) -> ad.Tensor:
    """Encode every node: attention-weighted neighbor aggregation per head,
    heads concatenated into a [node_count, heads*hidden_dim] embedding."""
    features = _as_feature_tensor(node_features)
    _check_shapes(params, kg, features)
    dst, src, pred = kg.message_edges()
    cfg = params.config
    head_outputs = []
    for head in range(cfg.heads):
        wh = ad.matmul(features, params.weights[head])
        alpha, src_f = _head_attention(params, head, wh, dst, src, pred)
        messages = ad.scale_rows(src_f, alpha)
        aggregated = ad.segment_sum(messages, dst, kg.node_count)
        head_outputs.append(ad.leaky_relu(aggregated, cfg.leaky_slope))
    return ad.concat_cols(head_outputs)


# ---------------------------------------------------------------------------
# checkpoint format: one `name<TAB>shape<TAB>values` line per parameter block
# ---------------------------------------------------------------------------


def save_params(path: str, params: PreGATParams) -> None:
    cfg = params.config
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "# licap-pregat-params"
            f" in_dim={cfg.in_dim} hidden_dim={cfg.hidden_dim} heads={cfg.heads}"
            f" predicate_dim={cfg.predicate_dim} predicate_count={cfg.predicate_count}"
            f" predicate_aware={int(cfg.predicate_aware)} leaky_slope={cfg.leaky_slope}\n"
        )
        for name, t in params.named_tensors():
            shape = ",".join(str(d) for d in t.values.shape)
            flat = ",".join(f"{v:.17g}" for v in t.values.reshape(-1))
            fh.write(f"{name}\t{shape}\t{flat}\n")


def load_params(path: str) -> PreGATParams:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# licap-pregat-params"):
            raise ParseError(f"{path}: not a parameter checkpoint")
        meta = dict(item.split("=", 1) for item in header.split()[2:])
        cfg = PreGATConfig(
            in_dim=int(meta["in_dim"]),
            hidden_dim=int(meta["hidden_dim"]),
            heads=int(meta["heads"]),
            predicate_dim=int(meta["predicate_dim"]),
            predicate_count=int(meta["predicate_count"]),
            predicate_aware=bool(int(meta["predicate_aware"])),
            leaky_slope=float(meta["leaky_slope"]),
        )
        blocks: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: malformed parameter block")
            name, shape_text, values_text = parts
            shape = tuple(int(d) for d in shape_text.split(","))
            if values_text:
                flat = np.array([float(v) for v in values_text.split(",")])
            else:
                flat = np.empty(0, dtype=np.float64)
            blocks[name] = flat.reshape(shape)

    params = init_pregat(cfg, seed=0)
    for name, t in params.named_tensors():
        if name not in blocks:
            raise DataError(f"{path}: missing parameter block {name!r}")
        if blocks[name].shape != t.values.shape:
            raise DataError(
                f"{path}: block {name!r} has shape {blocks[name].shape}, "
                f"expected {t.values.shape}"
            )
        t.values[...] = blocks[name]
    return params
