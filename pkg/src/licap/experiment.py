"""Cross-validated comparison harness for downstream importance estimation.

Pretraining (when enabled) runs once on the full label set; the downstream
head is then trained and scored per fold. Arms share the same folds and
fold-derived seeds so their numbers are directly comparable.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig
from .downstream import (
    predict,
    train_aggregated_scorer,
    train_mlp,
)
from .kg import FeatureMatrix, KnowledgeGraph, LabelSet, augment_for_message_passing
from .metrics import EvalReport, evaluate, kfold_split
from .pretrain import EpochStats, pretrain

ARM_RAW = "raw"

_VARIANT_ARM = {
    "full": "licap",
    "l1_only": "licap-l1",
    "l2_only": "licap-l2",
    "random_sampling": "licap-rd",
}


def arm_name(variant: str, encoder_mode: str) -> str:
    name = _VARIANT_ARM[variant]
    if encoder_mode == "gat":
        name += "-gat"
    return name


@dataclass
class ArmResult:
    name: str
    reports: list[EvalReport]
    history: list[EpochStats] | None = None

    def summary(self) -> dict[str, tuple[float, float]]:
        """Per-metric (mean, std) across folds."""
        rows = [r.as_row() for r in self.reports]
        out = {}
        for key in rows[0]:
            values = np.array([row[key] for row in rows])
            out[key] = (float(values.mean()), float(values.std()))
        return out


@dataclass
class ExperimentReport:
    arms: list[ArmResult]
    folds: int

    def metric_names(self) -> list[str]:
        return list(self.arms[0].reports[0].as_row())


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("LICAP_THREADS", "1")))
    except ValueError:
        return 1


def _evaluate_arm(
    name: str,
    embeddings: np.ndarray,
    kg_augmented: KnowledgeGraph,
    labels: LabelSet,
    config: ExperimentConfig,
    history: list[EpochStats] | None,
) -> ArmResult:
    labelled = labels.nodes()
    y = labels.scores(labelled)
    folds = kfold_split(len(labelled), config.eval.folds, config.eval.seed)

    def run_fold(fold_index: int) -> EvalReport:
        test_mask = np.zeros(len(labelled), dtype=bool)
        test_mask[folds[fold_index]] = True
        train_nodes = [labelled[i] for i in range(len(labelled)) if not test_mask[i]]
        test_nodes = [labelled[i] for i in range(len(labelled)) if test_mask[i]]
        fold_config = replace(
            config.downstream,
            seed=config.downstream.seed + 1000 * (fold_index + 1),
        )
        if config.eval.model == "mlp":
            model = train_mlp(embeddings, train_nodes, y[~test_mask], fold_config)
            preds = predict(model, embeddings, nodes=test_nodes)
        else:
            model = train_aggregated_scorer(
                kg_augmented, embeddings, train_nodes, y[~test_mask], fold_config
            )
            preds = predict(model, embeddings, kg=kg_augmented, nodes=test_nodes)
        return evaluate(preds, y[test_mask], config.eval.ks, fold=fold_index)

    workers = _worker_count()
    indices = range(config.eval.folds)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run_fold, indices))
    else:
        reports = [run_fold(i) for i in indices]
    return ArmResult(name=name, reports=reports, history=history)


def run_experiment(
    kg: KnowledgeGraph,
    labels: LabelSet,
    features: FeatureMatrix,
    config: ExperimentConfig,
    compare: bool = False,
    skip_pretrain: bool = False,
) -> ExperimentReport:
    """Evaluate the configured arm(s) under k-fold cross validation.

    With ``compare`` set, a raw-features arm runs next to the pretrained one;
    ``skip_pretrain`` evaluates only the raw arm.
    """
    kg_aug = kg if kg.augmented else augment_for_message_passing(kg)
    arms: list[ArmResult] = []

    if not skip_pretrain:
        result = pretrain(kg_aug, features, labels, config.pretrain)
        arms.append(
            _evaluate_arm(
                arm_name(config.pretrain.variant, config.pretrain.encoder_mode),
                result.embeddings.values,
                kg_aug,
                labels,
                config,
                result.history,
            )
        )
    if compare or skip_pretrain:
        arms.append(
            _evaluate_arm(ARM_RAW, features.values, kg_aug, labels, config, None)
        )
    return ExperimentReport(arms=arms, folds=config.eval.folds)


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------


def write_report_csv(report: ExperimentReport, path: str) -> None:
    """Per-fold rows with full precision plus one mean±std row per arm."""
    metrics = report.metric_names()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("arm,fold," + ",".join(metrics) + "\n")
        for arm in report.arms:
            for rep in arm.reports:
                row = rep.as_row()
                cells = ",".join(f"{row[m]:.10g}" for m in metrics)
                fh.write(f"{arm.name},{rep.fold},{cells}\n")
        for arm in report.arms:
            summary = arm.summary()
            cells = ",".join(
                f"{summary[m][0]:.4f}±{summary[m][1]:.4f}" for m in metrics
            )
            fh.write(f"{arm.name},mean,{cells}\n")


def format_text_table(report: ExperimentReport) -> str:
    """Readable mean±std table, one row per arm."""
    metrics = report.metric_names()
    header = ["arm"] + metrics
    rows = []
    for arm in report.arms:
        summary = arm.summary()
        rows.append(
            [arm.name]
            + [f"{summary[m][0]:.4f}±{summary[m][1]:.4f}" for m in metrics]
        )
    widths = [
        max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows)
    return "\n".join(lines)


def write_history_csv(history: list[EpochStats], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,l1,l2,total\n")
        for stats in history:
            fh.write(
                f"{stats.epoch},{stats.l1:.17g},{stats.l2:.17g},{stats.total:.17g}\n"
            )
