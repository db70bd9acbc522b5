"""Two-stage bipartite matching and interactive-score supervision.

Stage one assigns predictions to the annotated (seen) pairs using the full
matching cost. Stage two assigns the leftover predictions to the unknown
pairs, i.e. every enumerable human-object pairing absent from the
annotations, using the action-free cost. Stage-two matches whose
interactive score clears a threshold compete for ``topk`` potential
interactive slots; the remaining stage-two matches are non-interactive.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .assignment import Assignment, CostWeights, cost_matrix, hungarian
from .geometry import IOU_THRESHOLD, iou_matrix
from .scene import GroundTruthScene, PairTarget, PredictionSet

DEFAULT_TOPK = 3
DEFAULT_THRES_IS = 0.5


class MatchLabel(str, Enum):
    SEEN_MATCH = "seen_match"
    POTENTIAL = "potential"
    NON_INTERACTIVE = "non_interactive"
    NO_PAIR = "no_pair"
    OMITTED = "omitted"


class ISTarget(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    IGNORE = "ignore"


SELECTED = (MatchLabel.SEEN_MATCH, MatchLabel.POTENTIAL)


@dataclass(frozen=True)
class MatchResult:
    scene_id: str
    seen_pairs: Tuple[PairTarget, ...]
    unknown_pairs: Tuple[PairTarget, ...]
    stage1: Assignment
    stage2: Assignment
    labels: Tuple[MatchLabel, ...]
    is_targets: Optional[Tuple[ISTarget, ...]] = None

    @property
    def n_queries(self) -> int:
        return len(self.labels)

    def queries(self, *labels: MatchLabel) -> List[int]:
        return [q for q, lab in enumerate(self.labels) if lab in labels]

    def count(self, label: MatchLabel) -> int:
        return sum(1 for lab in self.labels if lab == label)

    def matched_target(self, query: int) -> Optional[PairTarget]:
        """Ground-truth pair assigned to ``query`` in either stage, if any."""
        for assignment, pairs in ((self.stage1, self.seen_pairs), (self.stage2, self.unknown_pairs)):
            col = assignment.col_for_row().get(query)
            if col is not None:
                return pairs[col]
        return None


def enumerate_unknown_pairs(scene: GroundTruthScene) -> List[PairTarget]:
    """All human-object pairings of the scene that carry no seen annotation."""
    seen = {p.key for p in scene.seen_pairs()}
    return [scene.pair_target(h, o) for h, o in scene.all_pairs() if (h, o) not in seen]


def select_potential(queries: Sequence[int], is_scores, topk: int, thres_is: float) -> List[int]:
    """Thresholded top-k by interactive score; ties go to the smaller query index."""
    qualifying = [q for q in queries if is_scores[q] > thres_is]
    qualifying.sort(key=lambda q: (-is_scores[q], q))
    return sorted(qualifying[:topk])


def two_stage_match(
    scene: GroundTruthScene,
    preds: PredictionSet,
    weights: CostWeights = CostWeights(),
    topk: int = DEFAULT_TOPK,
    thres_is: float = DEFAULT_THRES_IS,
    action_mask=None,
    iou_thresh: float = IOU_THRESHOLD,
) -> MatchResult:
    """Label every query and derive its interactive-score target.

    ``action_mask`` restricts the action cost of stage one to the seen
    actions. Raises ``ValueError`` if the scene has more seen pairs than
    there are queries.
    """
    if topk < 0:
        raise ValueError(f"topk must be non-negative, got {topk}")
    if not 0.0 <= thres_is <= 1.0:
        raise ValueError(f"thres_is must lie in [0, 1], got {thres_is}")
    n = len(preds)
    seen = scene.seen_pairs()
    unknown = enumerate_unknown_pairs(scene)
    if len(seen) > n:
        raise ValueError(f"scene {scene.scene_id}: {len(seen)} seen pairs exceed {n} queries")

    c1 = cost_matrix(preds, seen, weights, "full", scene.image_size, action_mask)
    stage1 = hungarian(c1)

    leftover = np.array(sorted(set(range(n)) - set(stage1.rows)), dtype=int)
    c2 = cost_matrix(preds, unknown, weights, "action_free", scene.image_size, rows=leftover)
    local = hungarian(c2)
    stage2 = Assignment(tuple(int(leftover[r]) for r in local.rows), local.cols, local.cost)

    potential = set(select_potential(stage2.rows, preds.is_scores, topk, thres_is))
    labels = [MatchLabel.NO_PAIR] * n
    for q in stage1.rows:
        labels[q] = MatchLabel.SEEN_MATCH
    for q in stage2.rows:
        labels[q] = MatchLabel.POTENTIAL if q in potential else MatchLabel.NON_INTERACTIVE

    result = MatchResult(scene.scene_id, tuple(seen), tuple(unknown), stage1, stage2, tuple(labels))
    targets = interactive_supervision(scene, preds, result, iou_thresh)
    labels = [MatchLabel.OMITTED if t == ISTarget.IGNORE else lab for lab, t in zip(labels, targets)]
    return replace(result, labels=tuple(labels), is_targets=targets)


def interactive_supervision(
    scene: GroundTruthScene,
    preds: PredictionSet,
    result: MatchResult,
    iou_thresh: float = IOU_THRESHOLD,
) -> Tuple[ISTarget, ...]:
    """Per-query interactive-score target.

    Seen matches and potential pairs are positive when both boxes overlap
    their matched ground truth by more than ``iou_thresh`` and negative
    otherwise. Every other query is negative, except that one overlapping
    any unknown pair that well is ignored.
    """
    if result.scene_id != scene.scene_id or result.n_queries != len(preds):
        raise ValueError("match result does not belong to this scene and prediction set")
    if [p.key for p in result.seen_pairs] != [p.key for p in scene.seen_pairs()]:
        raise ValueError("match result was computed from different annotations")

    hits_unknown = np.zeros(len(preds), dtype=bool)
    if result.unknown_pairs:
        hu = np.stack([p.human_box for p in result.unknown_pairs])
        ou = np.stack([p.object_box for p in result.unknown_pairs])
        hits = (iou_matrix(preds.human_boxes, hu) > iou_thresh) & (iou_matrix(preds.object_boxes, ou) > iou_thresh)
        hits_unknown = hits.any(axis=1)

    targets = []
    for q, label in enumerate(result.labels):
        if label in SELECTED:
            gt = result.matched_target(q)
            good = (
                iou_matrix(preds.human_boxes[q], gt.human_box)[0, 0] > iou_thresh
                and iou_matrix(preds.object_boxes[q], gt.object_box)[0, 0] > iou_thresh
            )
            targets.append(ISTarget.POSITIVE if good else ISTarget.NEGATIVE)
        elif hits_unknown[q]:
            targets.append(ISTarget.IGNORE)
        else:
            targets.append(ISTarget.NEGATIVE)
    return tuple(targets)
