"""End-to-end run orchestration: ingest/synthesize, split, graph, embed,
assemble, train, evaluate, and write the report artifacts.

One run reproduces one cell of the model-times-variant grid. All stage
seeds derive from the single run seed, so a run is fully reproducible; with
threads=1 the written report.json is byte-stable across repeats.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__, data, embed, evaluation, features, graph, models
from .data import ConfigError, Dataset, SynthConfig
from .rng import mix64

_SEED_SYNTH = 1
_SEED_WALKS = 2
_SEED_SGNS = 3
_SEED_MODEL = 4

MODELS = ("rf", "gb", "xgb")
GRAPH_SOURCES = ("all", "train_only")


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class RunConfig:
    input_path: str | None = None
    synthetic: SynthConfig | None = None
    min_interactions: int = 2
    split_ratio: float = 0.8
    graph_source: str = "all"
    variant: str = features.BASELINE
    model: str = "gb"
    walks: embed.WalkConfig = field(default_factory=embed.WalkConfig)
    skipgram: embed.SkipGramConfig = field(
        default_factory=embed.SkipGramConfig)
    model_params: dict = field(default_factory=dict)
    missing_policy: str = "mean"
    seed: int = 0
    threads: int = 1
    out_dir: str = "run_output"
    plots: bool = False

    def validate(self):
        if (self.input_path is None) == (self.synthetic is None):
            raise ConfigError(
                "exactly one of input_path and synthetic must be set")
        if self.variant not in features.VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.graph_source not in GRAPH_SOURCES:
            raise ConfigError(f"unknown graph_source {self.graph_source!r}")
        if self.missing_policy not in ("mean", "strict"):
            raise ConfigError(
                f"unknown missing_policy {self.missing_policy!r}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError("split_ratio must be in (0, 1)")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.min_interactions < 1:
            raise ConfigError("min_interactions must be >= 1")
        if self.synthetic is not None:
            self.synthetic.validate()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if d.get("synthetic") is not None:
            d["synthetic"] = SynthConfig(**d["synthetic"])
        if "walks" in d:
            d["walks"] = embed.WalkConfig(**d["walks"])
        if "skipgram" in d:
            d["skipgram"] = embed.SkipGramConfig(**d["skipgram"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(text))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid run config: {exc}") from exc


@dataclass
class RunResult:
    report: dict
    model: object
    out_dir: str
    files: dict


def _stage(name):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, StageError):
                raise StageError(name, exc) from exc
            return False
    return _Ctx()


def load_dataset(config: RunConfig) -> Dataset:
    if config.synthetic is not None:
        return data.generate_synthetic(
            config.synthetic, mix64(config.seed, _SEED_SYNTH))
    with open(config.input_path, encoding="utf-8") as fh:
        return data.parse_interactions(fh.read())


def run(config: RunConfig) -> RunResult:
    """Execute the full pipeline and write artifacts into config.out_dir."""
    config.validate()

    with _stage("ingest"):
        dataset = load_dataset(config)
        dataset = data.filter_min_interactions(
            dataset, config.min_interactions)
        if len(dataset) == 0:
            raise ValueError("no records left after filtering")

    with _stage("split"):
        split = data.temporal_split(dataset, config.split_ratio)

    node_graph = centrality = table = None
    graph_report = None
    if config.variant != features.BASELINE:
        with _stage("graph"):
            source = (dataset if config.graph_source == "all"
                      else split.train)
            node_graph = graph.build_bipartite(source)
            centrality = graph.eigenvector_centrality(node_graph)
            stats = graph.graph_stats(node_graph)
            stats.pop("degree_histogram")
            graph_report = stats
        with _stage("embed"):
            walk_cfg = replace(
                config.walks,
                biased=(config.variant == features.NODE2VEC),
                seed=mix64(config.seed, _SEED_WALKS))
            sg_cfg = replace(config.skipgram,
                             seed=mix64(config.seed, _SEED_SGNS))
            table = embed.embed_graph(node_graph, walk_cfg, sg_cfg,
                                      threads=config.threads)

    with _stage("features"):
        train_m = features.assemble(
            split.train, config.variant, node_graph, centrality, table,
            missing=config.missing_policy)
        test_m = features.assemble(
            split.test, config.variant, node_graph, centrality, table,
            missing=config.missing_policy)

    with _stage("train"):
        model = train_model(config, train_m)

    with _stage("evaluate"):
        report = evaluate(config, model, split, train_m, test_m,
                          graph_report)

    with _stage("report"):
        files = write_artifacts(config, model, report)

    return RunResult(report=report, model=model, out_dir=config.out_dir,
                     files=files)


def _tree_params(config: RunConfig, defaults: dict) -> models.TreeParams:
    merged = dict(defaults)
    merged.update({k: v for k, v in config.model_params.items()
                   if k in ("max_depth", "min_samples_leaf",
                            "features_considered")})
    return models.TreeParams(seed=mix64(config.seed, _SEED_MODEL), **merged)


def train_model(config: RunConfig, train_m: features.FeatureMatrix):
    mp = config.model_params
    n_classes = data.N_GRADE_CLASSES
    if config.model == "rf":
        params = _tree_params(config, {"max_depth": None,
                                       "min_samples_leaf": 1,
                                       "features_considered": "sqrt"})
        return models.train_random_forest(
            train_m.X, train_m.y, n_trees=mp.get("n_trees", 100),
            bootstrap=mp.get("bootstrap", True), tree_params=params,
            seed=mix64(config.seed, _SEED_MODEL), n_classes=n_classes,
            threads=config.threads)
    if config.model == "gb":
        params = _tree_params(config, {"max_depth": 3,
                                       "min_samples_leaf": 1,
                                       "features_considered": "all"})
        return models.train_gradient_boosting(
            train_m.X, train_m.y, n_stages=mp.get("n_stages", 100),
            learning_rate=mp.get("learning_rate", 0.1), tree_params=params,
            n_classes=n_classes, threads=config.threads)
    params = _tree_params(config, {"max_depth": 6, "min_samples_leaf": 1,
                                   "features_considered": "all"})
    return models.train_second_order_boosting(
        train_m.X, train_m.y, n_stages=mp.get("n_stages", 100),
        learning_rate=mp.get("learning_rate", 0.3),
        lam=mp.get("lambda", 1.0), gamma=mp.get("gamma", 0.0),
        tree_params=params, n_classes=n_classes, threads=config.threads)


def evaluate(config: RunConfig, model, split, train_m, test_m,
             graph_report) -> dict:
    proba = model.predict_proba(test_m.X)
    pred = np.argmax(proba, axis=1)
    cm = evaluation.confusion_matrix(test_m.y, pred)
    report = evaluation.classification_report(cm)

    roc = {}
    for k in range(data.N_GRADE_CLASSES):
        try:
            curve = evaluation.roc_ovr(proba, test_m.y, k)
            roc[str(k)] = {"points": [[x, y] for x, y in curve.points],
                           "auc": curve.auc}
        except evaluation.UndefinedCurveError:
            roc[str(k)] = None

    categories = evaluation.per_category_report(split, pred)
    flat = models.feature_importance(model, test_m.feature_names)

    return {
        "moocgrade_version": __version__,
        "model": config.model,
        "variant": config.variant,
        # structural features default to a graph over all interactions
        # (unsupervised embedding training); train_only avoids the
        # train/test leakage at the cost of backfilled unseen nodes
        "graph_source": (config.graph_source
                         if config.variant != features.BASELINE else None),
        "seed": config.seed,
        "counts": {
            "records": len(split.train) + len(split.test),
            "train": len(split.train),
            "test": len(split.test),
            "students": len(split.train.student_index),
            "challenges": len(set(split.train.challenge_index)
                              | set(split.test.challenge_index)),
        },
        "graph": graph_report,
        "confusion": cm.tolist(),
        "report": report.to_dict(),
        "roc": roc,
        "categories": {
            cat.value: {"weighted_f1": rep.weighted_f1,
                        "test_examples": rep.test_examples,
                        "students": rep.students}
            for cat, rep in sorted(categories.items(),
                                   key=lambda kv: kv[0].value)},
        "importances": {
            "flat": flat,
            "grouped": features.group_importances(flat),
        },
        "table_v_row": {
            "accuracy": report.accuracy,
            "precision": report.macro_avg[0],
            "recall": report.macro_avg[1],
            "f1": report.macro_avg[2],
        },
    }


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_artifacts(config: RunConfig, model, report: dict) -> dict:
    os.makedirs(config.out_dir, exist_ok=True)
    files = {}

    def emit(name: str, content: str):
        path = os.path.join(config.out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        files[name] = path

    emit("report.json", _dump_json(report))
    emit("model.json", models.model_to_json(model))
    emit("run_config.json", _dump_json(config.to_dict()))
    for k in range(data.N_GRADE_CLASSES):
        emit(f"roc_class{k}.csv", roc_csv(report, k))
    emit("importance.csv", importance_csv(report))
    if config.plots:
        emit("roc.svg", roc_svg(report))
        emit("importance.svg", importance_svg(report))
    return files


def roc_csv(report: dict, k: int) -> str:
    lines = ["class,fpr,tpr"]
    curve = report["roc"].get(str(k))
    if curve is not None:
        for x, y in curve["points"]:
            lines.append(f"{k},{x!r},{y!r}")
    return "\n".join(lines) + "\n"


def importance_csv(report: dict) -> str:
    flat = report["importances"]["flat"]
    lines = ["feature,importance"]
    for name, v in sorted(flat.items(), key=lambda kv: (-kv[1], kv[0])):
        lines.append(f"{name},{v!r}")
    return "\n".join(lines) + "\n"


_SVG_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


def roc_svg(report: dict, size: int = 440) -> str:
    """Self-contained SVG of the per-class one-vs-rest ROC staircases."""
    pad = 50
    span = size - 2 * pad

    def sx(v):
        return pad + v * span

    def sy(v):
        return size - pad - v * span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(1)}" y2="{sy(0)}" '
        f'stroke="black"/>',
        f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(0)}" y2="{sy(1)}" '
        f'stroke="black"/>',
        f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(1)}" y2="{sy(1)}" '
        f'stroke="#bbbbbb" stroke-dasharray="4,4"/>',
        f'<text x="{size / 2:.0f}" y="{size - 12}" text-anchor="middle" '
        f'font-size="13">false positive rate</text>',
        f'<text x="14" y="{size / 2:.0f}" text-anchor="middle" '
        f'font-size="13" transform="rotate(-90 14 {size / 2:.0f})">'
        f'true positive rate</text>',
    ]
    for k in range(data.N_GRADE_CLASSES):
        curve = report["roc"].get(str(k))
        if curve is None:
            continue
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}"
                       for x, y in curve["points"])
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{size - pad - 120}" y="{pad + 16 * (k + 1)}" '
            f'font-size="12" fill="{color}">class {k} '
            f'auc={curve["auc"]:.3f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def importance_svg(report: dict, top: int = 15, width: int = 560) -> str:
    """Horizontal bars of the grouped feature importances."""
    grouped = report["importances"]["grouped"]
    items = sorted(grouped.items(), key=lambda kv: (-kv[1], kv[0]))[:top]
    if not items:
        items = [("(none)", 0.0)]
    bar_h = 22
    pad = 8
    label_w = 180
    height = pad * 2 + bar_h * len(items)
    vmax = max(v for _, v in items) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i, (name, v) in enumerate(items):
        y = pad + i * bar_h
        w = (width - label_w - 60) * (v / vmax)
        parts.append(f'<text x="{label_w - 6}" y="{y + 15}" '
                     f'text-anchor="end" font-size="12">{name}</text>')
        parts.append(f'<rect x="{label_w}" y="{y + 3}" width="{w:.2f}" '
                     f'height="{bar_h - 8}" fill="#1f77b4"/>')
        parts.append(f'<text x="{label_w + w + 4:.2f}" y="{y + 15}" '
                     f'font-size="11">{v:.4f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def format_table_row(report: dict) -> str:
    """Accuracy plus macro precision/recall/F1, the reported column order."""
    row = report["table_v_row"]
    return (f"model={report['model']} variant={report['variant']} "
            f"accuracy={row['accuracy']:.2f} "
            f"precision={row['precision']:.2f} "
            f"recall={row['recall']:.2f} "
            f"f1={row['f1']:.2f}")
