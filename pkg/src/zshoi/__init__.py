"""Matching, distillation targets, losses and evaluation for zero-shot HOI detection."""
from .assignment import Assignment, CostWeights, brute_force_assignment, cost_matrix, hungarian, pair_cost
from .distillation import (
    ActionDistribution,
    DistillConfig,
    ValidityMatrix,
    Vocabulary,
    clip_classify,
    cosine_similarity,
    distill_target,
    hoi_prompt,
)
from .evaluation import (
    Detection,
    EvalReport,
    SplitConfig,
    average_precision,
    compose_score,
    evaluate,
    match_detections,
    unseen_pair_recall,
)
from .geometry import Box, BoxPair, CenterBox, giou, iou, l1_box_cost, to_center_form, to_corner_form, union_box
from .losses import LossBreakdown, LossWeights, compute_losses, total_loss
from .matching import ISTarget, MatchLabel, MatchResult, enumerate_unknown_pairs, interactive_supervision, two_stage_match
from .scene import GroundTruthScene, HOIAnnotation, PairTarget, Prediction, PredictionSet
from .sim import SimConfig, generate_corpus

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "CostWeights",
    "brute_force_assignment",
    "cost_matrix",
    "hungarian",
    "pair_cost",
    "ActionDistribution",
    "DistillConfig",
    "ValidityMatrix",
    "Vocabulary",
    "clip_classify",
    "cosine_similarity",
    "distill_target",
    "hoi_prompt",
    "Detection",
    "EvalReport",
    "SplitConfig",
    "average_precision",
    "compose_score",
    "evaluate",
    "match_detections",
    "unseen_pair_recall",
    "Box",
    "BoxPair",
    "CenterBox",
    "giou",
    "iou",
    "l1_box_cost",
    "to_center_form",
    "to_corner_form",
    "union_box",
    "LossBreakdown",
    "LossWeights",
    "compute_losses",
    "total_loss",
    "ISTarget",
    "MatchLabel",
    "MatchResult",
    "enumerate_unknown_pairs",
    "interactive_supervision",
    "two_stage_match",
    "GroundTruthScene",
    "HOIAnnotation",
    "PairTarget",
    "Prediction",
    "PredictionSet",
    "SimConfig",
    "generate_corpus",
]
