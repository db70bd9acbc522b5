"""Training-loss terms for matched predictions.

All terms are pure functions of arrays. With ``reduction="mean"`` (the
default) each term is a mean over the elements that contribute to it; an
empty set of contributors gives 0. Every logarithm argument is floored at
``EPS``, so a perfect prediction costs exactly 0 while a confidently wrong
one stays finite.
"""
from __future__ import annotations

from dataclasses import astuple, dataclass
from typing import Iterable, Mapping, Sequence, Tuple

import numpy as np

from .distillation import ActionDistribution
from .geometry import corner_to_center, giou_matrix
from .matching import SELECTED, ISTarget, MatchLabel, MatchResult
from .scene import GroundTruthScene, PredictionSet

EPS = 1e-7
REDUCTIONS = ("mean", "sum")
DISTRIBUTION_TOL = 1e-4


@dataclass(frozen=True)
class LossWeights:
    bbox: float = 2.5
    giou: float = 1.0
    obj: float = 1.0
    is_: float = 1.0
    act: float = 1.6
    clip: float = 700.0

    def __post_init__(self):
        if any(w < 0 for w in astuple(self)):
            raise ValueError(f"loss weights must be non-negative, got {astuple(self)}")

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "LossWeights":
        """Build from six values ordered bbox, giou, obj, is, act, clip."""
        if len(values) != 6:
            raise ValueError(f"expected six loss weights, got {len(values)}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class LossBreakdown:
    L_b: float
    L_u: float
    L_c: float
    L_a: float
    L_is: float
    L_clip: float
    total: float

    def as_dict(self):
        return {
            "L_b": self.L_b, "L_u": self.L_u, "L_c": self.L_c, "L_a": self.L_a,
            "L_is": self.L_is, "L_clip": self.L_clip, "total": self.total,
        }


def _reduce(values: np.ndarray, reduction: str) -> float:
    if reduction not in REDUCTIONS:
        raise ValueError(f"reduction must be one of {REDUCTIONS}, got {reduction!r}")
    if values.size == 0:
        return 0.0
    return float(values.sum() if reduction == "sum" else values.mean())


def _log(p):
    return np.log(np.maximum(p, EPS))


def _bce(q, p):
    q = np.asarray(q, dtype=float)
    return -(p * _log(q) + (1 - p) * _log(1 - q)) + 0.0


def box_losses(pred_h, pred_o, gt_h, gt_o, image_sizes, reduction: str = "mean") -> Tuple[float, float]:
    """L1 (normalized center form) and GIoU losses summed over human and object boxes.

    Boxes are ``(n, 4)`` corner-form arrays; ``image_sizes`` is one
    ``(w, h)`` or an ``(n, 2)`` array. Returns ``(L_b, L_u)``.
    """
    pred_h = np.asarray(pred_h, dtype=float).reshape(-1, 4)
    n = len(pred_h)
    if n == 0:
        return 0.0, 0.0
    pred_o = np.asarray(pred_o, dtype=float).reshape(-1, 4)
    gt_h = np.asarray(gt_h, dtype=float).reshape(-1, 4)
    gt_o = np.asarray(gt_o, dtype=float).reshape(-1, 4)
    sizes = np.broadcast_to(np.asarray(image_sizes, dtype=float).reshape(-1, 2), (n, 2))
    l1 = np.empty(n)
    gi = np.empty(n)
    for i in range(n):
        w, h = sizes[i]
        boxes = corner_to_center(np.stack([pred_h[i], gt_h[i], pred_o[i], gt_o[i]]), w, h)
        l1[i] = np.abs(boxes[0] - boxes[1]).sum() + np.abs(boxes[2] - boxes[3]).sum()
        gi[i] = (1 - giou_matrix(pred_h[i], gt_h[i])[0, 0]) + (1 - giou_matrix(pred_o[i], gt_o[i])[0, 0])
    return _reduce(l1, reduction), _reduce(gi, reduction)


def object_class_loss(object_scores, targets, reduction: str = "mean") -> float:
    """Cross-entropy of object-category distributions.

    ``targets`` holds the ground-truth category per query, or the background
    index (the last column) for queries supervised as no-pair.
    """
    scores = np.atleast_2d(np.asarray(object_scores, dtype=float))
    targets = np.asarray(targets, dtype=int).reshape(-1)
    if scores.size == 0 or len(targets) == 0:
        return 0.0
    if len(targets) != len(scores):
        raise ValueError(f"{len(scores)} score rows but {len(targets)} targets")
    sums = scores.sum(axis=1)
    if np.any(np.abs(sums - 1) > DISTRIBUTION_TOL) or np.any(scores < 0):
        raise ValueError("object scores must be probability distributions over categories plus background")
    return _reduce(-_log(scores[np.arange(len(targets)), targets]), reduction)


def action_loss(
    action_scores,
    gt_actions,
    labels: Sequence[MatchLabel],
    action_mask=None,
    reduction: str = "mean",
    focal: bool = False,
    alpha: float = 0.25,
    gamma: float = 2.0,
) -> float:
    """Element-wise binary cross-entropy over the seen-action slots of seen matches.

    ``focal=True`` switches to the focal variant with ``alpha`` and ``gamma``.
    """
    if any(lab != MatchLabel.SEEN_MATCH for lab in labels):
        raise ValueError("action loss is defined for seen matches only")
    scores = np.asarray(action_scores, dtype=float)
    if scores.size == 0:
        return 0.0
    scores = np.atleast_2d(scores)
    gt = np.atleast_2d(np.asarray(gt_actions, dtype=float))
    if scores.shape != gt.shape or len(labels) != len(scores):
        raise ValueError(f"shape mismatch: scores {scores.shape}, targets {gt.shape}, {len(labels)} labels")
    slots = np.ones(scores.shape[1], dtype=bool) if action_mask is None else np.asarray(action_mask, dtype=bool)
    q = scores[:, slots]
    y = gt[:, slots]
    if focal:
        elem = -(alpha * y * (1 - q) ** gamma * _log(q) + (1 - alpha) * (1 - y) * q ** gamma * _log(1 - q)) + 0.0
    else:
        elem = _bce(q, y)
    return _reduce(elem, reduction)


def interactive_score_loss(is_scores, targets: Sequence[ISTarget], reduction: str = "mean") -> float:
    """Two-class cross-entropy on the interactive score; ignored queries drop out."""
    s = np.asarray(is_scores, dtype=float).reshape(-1)
    if len(s) != len(targets):
        raise ValueError(f"{len(s)} scores but {len(targets)} targets")
    keep = np.array([t != ISTarget.IGNORE for t in targets], dtype=bool)
    y = np.array([t == ISTarget.POSITIVE for t in targets], dtype=float)
    return _reduce(_bce(s[keep], y[keep]), reduction)


def clip_distill_loss(action_scores, targets: Sequence[ActionDistribution], reduction: str = "mean") -> float:
    """Soft-label binary cross-entropy against teacher distributions, on their support only."""
    scores = np.asarray(action_scores, dtype=float)
    if len(targets) == 0:
        return 0.0
    scores = np.atleast_2d(scores)
    if len(scores) != len(targets):
        raise ValueError(f"{len(scores)} score rows but {len(targets)} targets")
    elems = []
    for q, target in zip(scores, targets):
        if len(q) != len(target.probs):
            raise ValueError(f"score length {len(q)} does not match target length {len(target.probs)}")
        support = list(target.support)
        elems.append(_bce(q[support], target.probs[support]))
    return _reduce(np.concatenate(elems), reduction)


def total_loss(parts: Mapping[str, float], weights: LossWeights = LossWeights()) -> LossBreakdown:
    """Weighted sum of the six loss terms keyed ``L_b, L_u, L_c, L_a, L_is, L_clip``."""
    L_b, L_u, L_c = float(parts["L_b"]), float(parts["L_u"]), float(parts["L_c"])
    L_a, L_is, L_clip = float(parts["L_a"]), float(parts["L_is"]), float(parts["L_clip"])
    total = (
        weights.bbox * L_b
        + weights.giou * L_u
        + weights.obj * L_c
        + weights.act * L_a
        + weights.is_ * L_is
        + weights.clip * L_clip
    )
    return LossBreakdown(L_b, L_u, L_c, L_a, L_is, L_clip, total)


def compute_losses(
    batch: Iterable[Tuple[GroundTruthScene, PredictionSet, MatchResult, Mapping[int, ActionDistribution]]],
    weights: LossWeights = LossWeights(),
    action_mask=None,
    reduction: str = "mean",
    focal: bool = False,
) -> LossBreakdown:
    """All loss terms over a batch of matched scenes.

    Each batch item is ``(scene, preds, result, distill_targets)`` where
    ``distill_targets`` maps query index to its teacher distribution; it
    must cover every seen-match and potential query.
    """
    pred_h, pred_o, gt_h, gt_o, sizes = [], [], [], [], []
    obj_scores, obj_targets = [], []
    act_scores, act_gt = [], []
    is_scores, is_targets = [], []
    clip_scores, clip_targets = [], []
    for scene, preds, result, targets in batch:
        if result.is_targets is None:
            raise ValueError(f"scene {scene.scene_id}: match result lacks interactive-score targets")
        background = preds.n_object_classes
        for q, label in enumerate(result.labels):
            if label in SELECTED:
                gt = result.matched_target(q)
                pred_h.append(preds.human_boxes[q])
                pred_o.append(preds.object_boxes[q])
                gt_h.append(gt.human_box)
                gt_o.append(gt.object_box)
                sizes.append(scene.image_size)
                obj_targets.append(gt.object_category)
                if q not in targets:
                    raise KeyError(f"scene {scene.scene_id}: no distillation target for query {q}")
                clip_scores.append(preds.action_scores[q])
                clip_targets.append(targets[q])
                if label == MatchLabel.SEEN_MATCH:
                    act_scores.append(preds.action_scores[q])
                    act_gt.append(gt.action_vector(preds.n_actions))
            else:
                obj_targets.append(background)
            obj_scores.append(preds.object_scores[q])
        is_scores.extend(preds.is_scores.tolist())
        is_targets.extend(result.is_targets)

    L_b, L_u = box_losses(pred_h, pred_o, gt_h, gt_o, sizes if sizes else (1.0, 1.0), reduction)
    parts = {
        "L_b": L_b,
        "L_u": L_u,
        "L_c": object_class_loss(obj_scores, obj_targets, reduction),
        "L_a": action_loss(act_scores, act_gt, [MatchLabel.SEEN_MATCH] * len(act_scores), action_mask,
                           reduction, focal),
        "L_is": interactive_score_loss(is_scores, is_targets, reduction),
        "L_clip": clip_distill_loss(clip_scores, clip_targets, reduction),
    }
    return total_loss(parts, weights)
