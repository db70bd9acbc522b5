"""Corpus-level drivers chaining matching, distillation, losses and evaluation."""
from __future__ import annotations

from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .assignment import Assignment, CostWeights
from .distillation import ActionDistribution, DistillConfig, ValidityMatrix, Vocabulary, build_targets, similarity_vector
from .evaluation import Detection, predictions_to_detections
from .losses import LossBreakdown, LossWeights, compute_losses
from .matching import DEFAULT_THRES_IS, DEFAULT_TOPK, MatchResult, enumerate_unknown_pairs, two_stage_match
from .scene import GroundTruthScene, PredictionSet


def pair_scenes(scenes: Sequence[GroundTruthScene], preds: Sequence[PredictionSet]):
    """Align prediction sets with scenes by scene id, in scene order."""
    by_id = {p.scene_id: p for p in preds}
    if len(by_id) != len(preds):
        raise ValueError("duplicate scene id among predictions")
    missing = [s.scene_id for s in scenes if s.scene_id not in by_id]
    if missing:
        raise ValueError(f"no predictions for scenes {missing[:5]}")
    return [(s, by_id[s.scene_id]) for s in scenes]


def match_corpus(
    scenes: Sequence[GroundTruthScene],
    preds: Sequence[PredictionSet],
    weights: CostWeights = CostWeights(),
    topk: int = DEFAULT_TOPK,
    thres_is: float = DEFAULT_THRES_IS,
    action_mask=None,
) -> List[MatchResult]:
    return [two_stage_match(s, p, weights, topk, thres_is, action_mask) for s, p in pair_scenes(scenes, preds)]


def rebuild_match(rec: Mapping, scene: GroundTruthScene) -> MatchResult:
    """Recreate a :class:`MatchResult` from its record and the scene it came from."""
    seen = scene.seen_pairs()
    unknown = enumerate_unknown_pairs(scene)
    if [list(p.key) for p in seen] != [list(k) for k in rec["seen_pairs"]] or \
            [list(p.key) for p in unknown] != [list(k) for k in rec["unknown_pairs"]]:
        raise ValueError(f"scene {scene.scene_id}: match record disagrees with the scene's pairs")

    def assignment(pairs):
        pairs = sorted((int(r), int(c)) for r, c in pairs)
        return Assignment(tuple(r for r, _ in pairs), tuple(c for _, c in pairs), float("nan"))

    targets = rec.get("is_targets")
    return MatchResult(scene.scene_id, tuple(seen), tuple(unknown), assignment(rec["stage1"]),
                       assignment(rec["stage2"]), tuple(rec["labels"]),
                       None if targets is None else tuple(targets))


def similarities_from_embeddings(pair_embeddings: Mapping[str, np.ndarray],
                                 text_embeddings: Mapping[object, np.ndarray],
                                 vocab: Vocabulary) -> Dict[str, np.ndarray]:
    """Per-pair HOI similarity vectors; text embeddings are keyed by HOI index."""
    keys = {int(k): v for k, v in text_embeddings.items()}
    if sorted(keys) != list(range(vocab.n_hois)):
        raise ValueError(f"text embeddings must cover HOI ids 0..{vocab.n_hois - 1} exactly")
    text = np.stack([keys[i] for i in range(vocab.n_hois)])
    return {rid: similarity_vector(v, text) for rid, v in pair_embeddings.items()}


def distill_corpus(
    results: Sequence[MatchResult],
    similarities: Mapping[str, Mapping[int, np.ndarray]],
    vocab: Vocabulary,
    validity: ValidityMatrix,
    config: DistillConfig = DistillConfig(),
) -> Dict[str, Dict[int, ActionDistribution]]:
    return {r.scene_id: build_targets(r, similarities.get(r.scene_id, {}), vocab, validity, config)
            for r in results}


def loss_corpus(
    scenes: Sequence[GroundTruthScene],
    preds: Sequence[PredictionSet],
    results: Sequence[MatchResult],
    targets: Mapping[str, Mapping[int, ActionDistribution]],
    weights: LossWeights = LossWeights(),
    action_mask=None,
    reduction: str = "mean",
) -> Tuple[List[Tuple[str, LossBreakdown]], LossBreakdown]:
    """Per-scene breakdowns plus the breakdown over the whole corpus as one batch."""
    by_id = {r.scene_id: r for r in results}
    batch = []
    for scene, p in pair_scenes(scenes, preds):
        if scene.scene_id not in by_id:
            raise ValueError(f"no match result for scene {scene.scene_id}")
        batch.append((scene, p, by_id[scene.scene_id], targets.get(scene.scene_id, {})))
    per_scene = [(item[0].scene_id, compute_losses([item], weights, action_mask, reduction)) for item in batch]
    return per_scene, compute_losses(batch, weights, action_mask, reduction)


def detect_corpus(preds: Sequence[PredictionSet], vocab: Vocabulary, use_interactive: bool = True,
                  top_n: Optional[int] = None) -> List[Detection]:
    dets: List[Detection] = []
    for p in preds:
        dets += predictions_to_detections(p, vocab, use_interactive=use_interactive, top_n=top_n)
    return dets
