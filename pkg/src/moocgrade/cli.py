"""Command-line interface: synth, ingest, graph-stats, embed, run, report.

Exit codes: 0 success, 1 runtime failure inside a pipeline stage (the stage
is named on stderr), 2 usage or configuration errors.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import replace

import click

from . import data, embed as embed_mod, graph as graph_mod, pipeline
from .data import ConfigError, SynthConfig


def _fail_usage(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _read_file(path: str) -> str:
    if not os.path.exists(path):
        _fail_usage(f"file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load_dataset(path: str) -> data.Dataset:
    try:
        return data.parse_interactions(_read_file(path))
    except ValueError as exc:
        _fail_usage(f"cannot parse {path}: {exc}")


@click.group()
@click.version_option()
def main():
    """Challenge grade prediction with graph structural features."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(), help="JSON file with SynthConfig fields "
              "plus an optional integer 'seed'.")
@click.option("--out", "out_path", required=True, type=click.Path())
def synth(config_path, out_path):
    """Generate a synthetic interaction CSV."""
    raw = _read_file(config_path)
    try:
        doc = json.loads(raw)
        seed = int(doc.pop("seed", 0))
        cfg = SynthConfig(**doc)
        dataset = data.generate_synthetic(cfg, seed)
    except (TypeError, ValueError) as exc:
        _fail_usage(f"bad synth config: {exc}")
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(data.serialize_interactions(dataset))
    click.echo(f"wrote {len(dataset)} records to {out_path}")


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def ingest(data_path, out_path):
    """Validate and normalize an interaction CSV (dedup, canonical order)."""
    dataset = _load_dataset(data_path)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(data.serialize_interactions(dataset))
    click.echo(f"records={len(dataset)} "
               f"students={len(dataset.student_index)} "
               f"challenges={len(dataset.challenge_index)}")


@main.command("graph-stats")
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--pretty", is_flag=True,
              help="Append a human-readable summary (density at 2 decimals).")
def graph_stats(data_path, pretty):
    """Print the interaction-graph statistics JSON."""
    dataset = _load_dataset(data_path)
    try:
        g = graph_mod.build_bipartite(dataset)
    except ValueError as exc:
        _fail_usage(str(exc))
    stats = graph_mod.graph_stats(g)
    click.echo(json.dumps(stats, sort_keys=True))
    if pretty:
        click.echo(f"students={stats['students']} "
                   f"challenges={stats['challenges']} "
                   f"nodes={stats['nodes']} edges={stats['edges']} "
                   f"density={stats['density']:.2f}")


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--method", type=click.Choice(["deepwalk", "node2vec"]),
              required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dim", default=128, show_default=True)
@click.option("--walks", default=100, show_default=True,
              help="Walks per node.")
@click.option("--length", default=10, show_default=True)
@click.option("--window", default=10, show_default=True)
@click.option("--p", default=1.0, show_default=True)
@click.option("--q", default=1.0, show_default=True)
@click.option("--negatives", default=5, show_default=True)
@click.option("--epochs", default=5, show_default=True)
@click.option("--lr", default=0.025, show_default=True)
@click.option("--min-interactions", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--threads", default=1, show_default=True)
def embed(data_path, method, out_path, dim, walks, length, window, p, q,
          negatives, epochs, lr, min_interactions, seed, threads):
    """Train node embeddings and write them as CSV."""
    dataset = _load_dataset(data_path)
    dataset = data.filter_min_interactions(dataset, min_interactions)
    try:
        g = graph_mod.build_bipartite(dataset)
        walk_cfg = embed_mod.WalkConfig(
            num_walks_per_node=walks, walk_length=length, p=p, q=q,
            biased=(method == "node2vec"), seed=seed)
        sg_cfg = embed_mod.SkipGramConfig(
            dimension=dim, window=window, negatives_per_positive=negatives,
            epochs=epochs, initial_learning_rate=lr, seed=seed)
        walk_cfg.validate()
        sg_cfg.validate()
    except ValueError as exc:
        _fail_usage(str(exc))
    try:
        table = embed_mod.embed_graph(g, walk_cfg, sg_cfg, threads=threads)
    except Exception as exc:
        click.echo(f"error in stage 'embed': {exc}", err=True)
        sys.exit(1)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table.to_csv())
    click.echo(f"wrote {len(table.vectors)} vectors of dimension "
               f"{table.dimension} to {out_path}")


def _apply_overrides(config: pipeline.RunConfig, overrides: dict
                     ) -> pipeline.RunConfig:
    fields = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **fields) if fields else config


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--data", "input_path", default=None, type=click.Path(),
              help="Override the input CSV path.")
@click.option("--model", default=None,
              type=click.Choice(list(pipeline.MODELS)))
@click.option("--variant", default=None,
              type=click.Choice(["baseline", "deepwalk", "node2vec"]))
@click.option("--graph-source", default=None,
              type=click.Choice(list(pipeline.GRAPH_SOURCES)))
@click.option("--split-ratio", default=None, type=float)
@click.option("--seed", default=None, type=int)
@click.option("--threads", default=None, type=int)
@click.option("--out-dir", default=None, type=click.Path())
@click.option("--plots/--no-plots", default=None)
def run(config_path, input_path, model, variant, graph_source, split_ratio,
        seed, threads, out_dir, plots):
    """Run the full pipeline for one model/variant cell; flags win over the
    config file."""
    raw = _read_file(config_path)
    try:
        config = pipeline.RunConfig.from_json(raw)
        config = _apply_overrides(config, {
            "input_path": input_path, "model": model, "variant": variant,
            "graph_source": graph_source, "split_ratio": split_ratio,
            "seed": seed, "threads": threads, "out_dir": out_dir,
            "plots": plots,
        })
        if input_path is not None:
            config = replace(config, synthetic=None)
        config.validate()
    except ConfigError as exc:
        _fail_usage(str(exc))
    try:
        result = pipeline.run(config)
    except pipeline.StageError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(pipeline.format_table_row(result.report))
    click.echo(f"artifacts in {result.out_dir}")


@main.command()
@click.option("--report-json", "report_path", required=True,
              type=click.Path())
@click.option("--out-dir", default=None, type=click.Path(),
              help="Re-render ROC CSVs and SVGs into this directory.")
def report(report_path, out_dir):
    """Re-render outputs from an existing report.json."""
    raw = _read_file(report_path)
    try:
        doc = json.loads(raw)
        row = pipeline.format_table_row(doc)
    except (KeyError, ValueError) as exc:
        _fail_usage(f"invalid report: {exc}")
    click.echo(row)
    for k in range(data.N_GRADE_CLASSES):
        curve = doc["roc"].get(str(k))
        auc = "n/a" if curve is None else f"{curve['auc']:.4f}"
        click.echo(f"class {k} auc={auc}")
    for cat, rep in sorted(doc.get("categories", {}).items()):
        click.echo(f"category {cat}: weighted_f1="
                   f"{rep['weighted_f1']:.4f} "
                   f"examples={rep['test_examples']}")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        for k in range(data.N_GRADE_CLASSES):
            path = os.path.join(out_dir, f"roc_class{k}.csv")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(pipeline.roc_csv(doc, k))
        with open(os.path.join(out_dir, "importance.csv"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write(pipeline.importance_csv(doc))
        with open(os.path.join(out_dir, "roc.svg"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write(pipeline.roc_svg(doc))
        with open(os.path.join(out_dir, "importance.svg"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write(pipeline.importance_svg(doc))
        click.echo(f"re-rendered into {out_dir}")


if __name__ == "__main__":
    main()
