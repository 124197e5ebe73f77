"""Label informed contrastive pretraining for node importance estimation."""

from .binning import (
    BinAssignment,
    assign_bins,
    finer_bins,
    prototype,
    proximity_matrix,
    split_top,
)
from .kg import (
    FeatureMatrix,
    KnowledgeGraph,
    LabelSet,
    augment_for_message_passing,
    load_features,
    load_graph,
    load_labels,
)
from .metrics import (
    EvalReport,
    evaluate,
    kfold_split,
    median_ae,
    ndcg_at_k,
    over_at_k,
    rmse,
    spearman,
)
from .pretrain import (
    PretrainConfig,
    PretrainResult,
    loss_l1,
    loss_l2,
    pretrain,
    sample_negatives,
    separation_score,
    total_loss,
)
from .synthetic import synth_kg

__all__ = [
    "BinAssignment",
    "EvalReport",
    "FeatureMatrix",
    "KnowledgeGraph",
    "LabelSet",
    "PretrainConfig",
    "PretrainResult",
    "assign_bins",
    "augment_for_message_passing",
    "evaluate",
    "finer_bins",
    "kfold_split",
    "load_features",
    "load_graph",
    "load_labels",
    "loss_l1",
    "loss_l2",
    "median_ae",
    "ndcg_at_k",
    "over_at_k",
    "pretrain",
    "prototype",
    "proximity_matrix",
    "rmse",
    "sample_negatives",
    "separation_score",
    "spearman",
    "split_top",
    "synth_kg",
    "total_loss",
]

__version__ = "0.1.0"
