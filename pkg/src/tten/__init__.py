"""LightGCN recommender with test-time embedding normalization and popularity-bias analysis."""

from .dataset import (
    InteractionDataset,
    PopularityGroups,
    SyntheticSpec,
    assign_groups,
    compute_popularity,
    generate_synthetic,
    load_dataset,
    save_dataset,
    split_validation,
)
from .evaluation import (
    EvalReport,
    cosine_quadrant_analysis,
    evaluate,
    group_frequency,
    group_recall,
    magnitude_popularity_correlation,
    ndcg_at_k,
    p_sweep,
    recall_at_k,
)
from .graph import NormalizedAdjacency, build_norm_adjacency, propagate
from .model import EmbeddingModel, FinalEmbeddings, backward, forward, init_xavier, load_embeddings, save_embeddings
from .scoring import RankedList, recommend_topk, tten_score
from .training import TrainConfig, TrainReport, train

__version__ = "0.1.0"
