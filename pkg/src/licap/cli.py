"""Command-line interface: pretrain, train, eval, and experiment."""

from __future__ import annotations

import math
import sys
from functools import wraps
from pathlib import Path

import click

from .config import EvalSettings, apply_overrides, load_config
from .downstream import predict, train_aggregated_scorer, train_mlp
from .errors import LicapError
from .experiment import (
    format_text_table,
    run_experiment,
    write_history_csv,
    write_report_csv,
)
from .kg import (
    _data_lines,
    augment_for_message_passing,
    load_features,
    load_graph,
    load_labels,
    write_embeddings,
)
from .metrics import evaluate
from .pregat import load_params, save_params
from .pretrain import ENCODER_MODES, VARIANTS, pretrain
from .synthetic import synth_kg


def _handle_errors(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (LicapError, ValueError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _parse_ks(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    try:
        return tuple(int(k) for k in text.split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}")


def _load_inputs(graph_path, labels_path, features_path):
    with open(graph_path, "r", encoding="utf-8") as fh:
        kg = load_graph(fh)
    with open(labels_path, "r", encoding="utf-8") as fh:
        labels = load_labels(fh, kg)
    with open(features_path, "r", encoding="utf-8") as fh:
        features = load_features(fh, kg)
    return kg, labels, features


@click.group()
@click.version_option()
def main():
    """Label informed contrastive pretraining for node importance estimation."""


# ---------------------------------------------------------------------------
# pretrain
# ---------------------------------------------------------------------------


@main.command("pretrain")
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True),
              help="Triples TSV: head<TAB>predicate<TAB>tail.")
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True),
              help="Labels TSV: node<TAB>raw_importance.")
@click.option("--features", "features_path", required=True, type=click.Path(exists=True),
              help="Features TSV: node<TAB>v1,v2,...")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="TOML config file; flags override it.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output embeddings TSV.")
@click.option("--log", "log_path", type=click.Path(),
              help="Training log CSV (default: <out>_log.csv).")
@click.option("--seed", type=int, help="Pretraining seed.")
@click.option("--epochs", type=int, help="Epoch count.")
@click.option("--gamma", type=float, help="Important ratio for the top bin.")
@click.option("--bin-width", type=float, help="Score width of the finer bins.")
@click.option("--eta1", type=float, help="Weight of the top/non-top loss.")
@click.option("--eta2", type=float, help="Weight of the finer-bin loss.")
@click.option("--tau", type=float, help="Softmax temperature.")
@click.option("--k-neg", type=float, help="Negative sampling ratio in (0, 1].")
@click.option("--learning-rate", type=float, help="Adam learning rate.")
@click.option("--variant", type=click.Choice(VARIANTS), help="Ablation variant.")
@click.option("--encoder", "encoder_mode", type=click.Choice(ENCODER_MODES),
              help="Encoder mode: predicate-aware or plain attention.")
@click.option("--save-params", "save_params_path", type=click.Path(),
              help="Write the trained encoder checkpoint here.")
@click.option("--init-params", "init_params_path", type=click.Path(exists=True),
              help="Resume from an encoder checkpoint.")
@click.option("--figures/--no-figures", default=True,
              help="Render the loss-curve figure next to the log CSV.")
@_handle_errors
def cmd_pretrain(graph_path, labels_path, features_path, config_path, out_path,
                 log_path, seed, epochs, gamma, bin_width, eta1, eta2, tau,
                 k_neg, learning_rate, variant, encoder_mode, save_params_path,
                 init_params_path, figures):
    """Pretrain node embeddings and write them as a TSV."""
    config = apply_overrides(
        load_config(config_path),
        pretrain=dict(
            seed=seed, epochs=epochs, gamma=gamma, bin_width=bin_width,
            eta1=eta1, eta2=eta2, tau=tau, k_neg=k_neg,
            learning_rate=learning_rate, variant=variant,
            encoder_mode=encoder_mode,
        ),
    )
    kg, labels, features = _load_inputs(graph_path, labels_path, features_path)
    kg_aug = augment_for_message_passing(kg)
    initial = load_params(init_params_path) if init_params_path else None
    result = pretrain(kg_aug, features, labels, config.pretrain, initial_params=initial)

    write_embeddings(out_path, kg, result.embeddings.values)
    log_file = log_path or str(Path(out_path).with_suffix("")) + "_log.csv"
    write_history_csv(result.history, log_file)
    if save_params_path:
        save_params(save_params_path, result.params)
    if figures:
        from .plots import save_loss_curve

        figure_path = str(Path(log_file).with_suffix(".png"))
        save_loss_curve(result.history, figure_path, title="pretraining loss")
        click.echo(f"figure: {figure_path}")
    click.echo(
        f"pretrained {kg.node_count} nodes for {len(result.history)} epochs "
        f"(best epoch {result.best_epoch}); embeddings: {out_path}; log: {log_file}"
    )


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


@main.command("train")
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--embeddings", "embeddings_path", required=True,
              type=click.Path(exists=True),
              help="Node embeddings TSV (pretrained or raw features).")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Predictions TSV: node<TAB>score.")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--model", type=click.Choice(["mlp", "aggregated_scorer"]),
              help="Downstream head.")
@click.option("--seed", type=int)
@click.option("--epochs", type=int)
@click.option("--hidden-dim", type=int)
@click.option("--learning-rate", type=float)
@_handle_errors
def cmd_train(graph_path, labels_path, embeddings_path, out_path, config_path,
              model, seed, epochs, hidden_dim, learning_rate):
    """Train a downstream head on all labels and write its predictions."""
    config = apply_overrides(
        load_config(config_path),
        downstream=dict(seed=seed, epochs=epochs, hidden_dim=hidden_dim,
                        learning_rate=learning_rate),
        eval=dict(model=model),
    )
    with open(graph_path, "r", encoding="utf-8") as fh:
        kg = load_graph(fh)
    with open(labels_path, "r", encoding="utf-8") as fh:
        labels = load_labels(fh, kg)
    with open(embeddings_path, "r", encoding="utf-8") as fh:
        embeddings = load_features(fh, kg)
    nodes = labels.nodes()
    targets = labels.scores(nodes)
    if config.eval.model == "mlp":
        fitted = train_mlp(embeddings.values, nodes, targets, config.downstream)
        preds = predict(fitted, embeddings.values, nodes=nodes)
    else:
        kg_aug = augment_for_message_passing(kg)
        fitted = train_aggregated_scorer(
            kg_aug, embeddings.values, nodes, targets, config.downstream
        )
        preds = predict(fitted, embeddings.values, kg=kg_aug, nodes=nodes)
    with open(out_path, "w", encoding="utf-8") as fh:
        for node, score in zip(nodes, preds):
            fh.write(f"{kg.node_name(node)}\t{score:.17g}\n")
    click.echo(f"trained {config.eval.model} on {len(nodes)} nodes; predictions: {out_path}")


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _read_scores_tsv(path: str) -> dict[str, float]:
    out: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in _data_lines(fh):
            parts = line.split("\t")
            if len(parts) != 2:
                raise LicapError(
                    f"{path}:{lineno}: expected 2 tab-separated fields"
                )
            name, value = parts
            if name in out:
                raise LicapError(f"{path}:{lineno}: duplicate node {name!r}")
            out[name] = float(value)
    if not out:
        raise LicapError(f"{path}: no rows found")
    return out


@main.command("eval")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True),
              help="Predictions TSV: node<TAB>score (log scale).")
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True),
              help="Labels TSV: node<TAB>raw_importance.")
@click.option("--k", "ks_text", default="10,25", show_default=True,
              help="Comma-separated NDCG/OVER cutoffs.")
@click.option("--csv", "csv_path", type=click.Path(), help="Also write the report as CSV.")
@_handle_errors
def cmd_eval(pred_path, labels_path, ks_text, csv_path):
    """Score a predictions file against a labels file."""
    ks = _parse_ks(ks_text)
    preds = _read_scores_tsv(pred_path)
    raw = _read_scores_tsv(labels_path)
    if set(preds) != set(raw):
        extra = sorted(set(preds) - set(raw))[:5]
        missing = sorted(set(raw) - set(preds))[:5]
        raise LicapError(
            f"node mismatch between files (extra in predictions: {extra}, "
            f"missing from predictions: {missing})"
        )
    if any(v < 0 for v in raw.values()):
        raise LicapError("labels file contains negative raw values")
    names = sorted(preds)
    pred_vec = [preds[n] for n in names]
    truth_vec = [math.log1p(raw[n]) for n in names]
    report = evaluate(pred_vec, truth_vec, ks)

    click.echo(f"samples: {report.sample_count}")
    click.echo(f"rmse: {report.rmse:.6f}")
    click.echo(f"median_ae: {report.median_ae:.6f}")
    click.echo(f"spearman: {report.spearman:.6f}")
    for k in ks:
        click.echo(f"ndcg@{k}: {report.ndcg_at_k[k]:.6f}")
    for k in ks:
        click.echo(f"over@{k}: {report.over_at_k[k]:.6f}")
    if csv_path:
        row = report.as_row()
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(",".join(row) + "\n")
            fh.write(",".join(f"{v:.10g}" for v in row.values()) + "\n")
        click.echo(f"csv: {csv_path}")


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


@main.command("experiment")
@click.option("--graph", "graph_path", type=click.Path(exists=True))
@click.option("--labels", "labels_path", type=click.Path(exists=True))
@click.option("--features", "features_path", type=click.Path(exists=True))
@click.option("--synthetic", "synthetic_nodes", type=int,
              help="Generate a planted-signal graph with this many nodes instead of reading files.")
@click.option("--predicates", "synthetic_predicates", type=int, default=5,
              show_default=True, help="Predicate count for --synthetic.")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out-dir", "out_dir", required=True, type=click.Path(),
              help="Directory for report CSV, text table, and figures.")
@click.option("--seed", type=int, help="Master seed (pretrain, downstream, folds).")
@click.option("--folds", type=int, help="Cross-validation fold count.")
@click.option("--k", "ks_text", help="Comma-separated NDCG/OVER cutoffs.")
@click.option("--compare", is_flag=True,
              help="Also evaluate the same head on raw features.")
@click.option("--skip-pretrain", is_flag=True, help="Evaluate only the raw arm.")
@click.option("--variant", type=click.Choice(VARIANTS))
@click.option("--encoder", "encoder_mode", type=click.Choice(ENCODER_MODES))
@click.option("--model", type=click.Choice(["mlp", "aggregated_scorer"]))
@click.option("--epochs", type=int, help="Pretraining epoch count.")
@click.option("--figures/--no-figures", default=True,
              help="Render comparison figures into the output directory.")
@_handle_errors
def cmd_experiment(graph_path, labels_path, features_path, synthetic_nodes,
                   synthetic_predicates, config_path, out_dir, seed, folds,
                   ks_text, compare, skip_pretrain, variant, encoder_mode,
                   model, epochs, figures):
    """Run the cross-validated comparison protocol and write a report."""
    config = apply_overrides(
        load_config(config_path),
        pretrain=dict(seed=seed, variant=variant, encoder_mode=encoder_mode,
                      epochs=epochs),
        downstream=dict(seed=seed),
        eval=dict(seed=seed, folds=folds, ks=_parse_ks(ks_text), model=model),
    )
    if synthetic_nodes is not None:
        kg, labels, features = synth_kg(
            synthetic_nodes, synthetic_predicates, seed=config.eval.seed
        )
    else:
        if not (graph_path and labels_path and features_path):
            raise click.UsageError(
                "provide --synthetic N or all of --graph/--labels/--features"
            )
        kg, labels, features = _load_inputs(graph_path, labels_path, features_path)

    report = run_experiment(
        kg, labels, features, config, compare=compare, skip_pretrain=skip_pretrain
    )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(report, str(out / "report.csv"))
    table = format_text_table(report)
    (out / "report.txt").write_text(table + "\n", encoding="utf-8")
    for arm in report.arms:
        if arm.history is not None:
            write_history_csv(arm.history, str(out / f"{arm.name}_pretrain_log.csv"))
    if figures:
        from .plots import save_fold_scatter, save_loss_curve, save_metric_comparison

        save_metric_comparison(report, str(out / "metrics.png"))
        save_fold_scatter(report, "spearman", str(out / "spearman_folds.png"))
        for arm in report.arms:
            if arm.history is not None:
                save_loss_curve(
                    arm.history, str(out / f"{arm.name}_pretrain_loss.png"),
                    title=f"{arm.name} pretraining loss",
                )
    click.echo(table)
    click.echo(f"report: {out / 'report.csv'}")


if __name__ == "__main__":
    main()
