"""moocgrade: per-challenge grade prediction for MOOC practice logs using
interaction-graph structural features (degree, eigenvector centrality, and
random-walk node embeddings) with from-scratch tree ensembles."""

__version__ = "0.1.0"

from .data import (
    Dataset,
    InteractionRecord,
    SplitDataset,
    SynthConfig,
    discretize_grade,
    filter_min_interactions,
    generate_synthetic,
    parse_interactions,
    serialize_interactions,
    temporal_split,
)
from .embed import (
    EmbeddingTable,
    SkipGramConfig,
    WalkConfig,
    embed_graph,
    generate_walks,
    train_skipgram,
)
from .evaluation import (
    StudentCategory,
    classification_report,
    confusion_matrix,
    per_category_report,
    roc_ovr,
    student_category,
)
from .features import FeatureMatrix, assemble, feature_names
from .graph import (
    BipartiteGraph,
    CentralityMap,
    build_bipartite,
    degree,
    density,
    eigenvector_centrality,
)
from .models import (
    BoostedModel,
    DecisionTree,
    ForestModel,
    TreeParams,
    feature_importance,
    model_from_json,
    model_to_json,
    predict_class,
    predict_proba,
    train_gradient_boosting,
    train_random_forest,
    train_second_order_boosting,
    train_tree,
)
from .pipeline import RunConfig, RunResult, run

__all__ = [name for name in dir() if not name.startswith("_")]
