"""HOI-triplet average precision and unseen-pair recall.

A detected ``<human, object, action>`` triplet is a true positive when its
object and action categories match a ground-truth triplet and both its
human and object boxes overlap that triplet's boxes with IoU strictly above
0.5. Each ground-truth triplet can be claimed once. AP is computed per HOI
category over all scenes jointly, and split mAPs average the APs of the
member categories that have ground truth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .distillation import Vocabulary, predicted_category
from .geometry import IOU_THRESHOLD, iou_matrix
from .scene import GroundTruthScene, PredictionSet

SCENARIOS = ("UA", "UC", "RF-UC", "NF-UC", "UV", "custom")
SPLIT_NAMES = ("full", "seen", "unseen", "rare", "non_rare")
DEFAULT_K = (3, 5, 10)


@dataclass(frozen=True)
class Detection:
    scene_id: str
    human_box: np.ndarray
    object_box: np.ndarray
    object_category: int
    action: int
    score: float

    def __post_init__(self):
        object.__setattr__(self, "human_box", np.asarray(self.human_box, dtype=float).reshape(4))
        object.__setattr__(self, "object_box", np.asarray(self.object_box, dtype=float).reshape(4))


@dataclass(frozen=True)
class SplitConfig:
    """Named subsets of HOI category ids for one zero-shot scenario."""

    scenario: str
    subsets: Mapping[str, Tuple[int, ...]]

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        subsets = {name: tuple(sorted(set(int(i) for i in ids))) for name, ids in self.subsets.items()}
        unknown = set(subsets) - set(SPLIT_NAMES)
        if unknown:
            raise ValueError(f"unknown split names {sorted(unknown)}")
        if "full" not in subsets:
            raise ValueError("split config must define 'full'")
        full = set(subsets["full"])
        for name, ids in subsets.items():
            if not set(ids) <= full:
                raise ValueError(f"split {name!r} contains categories outside 'full'")
        if "seen" in subsets and "unseen" in subsets:
            if set(subsets["seen"]) | set(subsets["unseen"]) != full:
                raise ValueError("seen and unseen splits must cover 'full'")
        if "rare" in subsets and "non_rare" in subsets:
            if set(subsets["rare"]) & set(subsets["non_rare"]):
                raise ValueError("rare and non-rare splits overlap")
        object.__setattr__(self, "subsets", subsets)

    @classmethod
    def full_only(cls, vocab: Vocabulary) -> "SplitConfig":
        return cls("custom", {"full": tuple(range(vocab.n_hois))})

    @classmethod
    def from_dict(cls, data: Mapping, vocab: Vocabulary) -> "SplitConfig":
        """Parse a mapping with ``scenario``, optional ``level`` and split lists.

        With ``level="action"`` each list names action ids and is expanded to
        every HOI category using those actions.
        """
        level = data.get("level", "hoi")
        if level not in ("hoi", "action"):
            raise ValueError(f"split level must be 'hoi' or 'action', got {level!r}")
        subsets = {}
        for name in SPLIT_NAMES:
            if name not in data:
                continue
            ids = [int(i) for i in data[name]]
            if level == "action":
                chosen = set(ids)
                ids = [h for h, (a, _) in enumerate(vocab.hois) if a in chosen]
            bad = [i for i in ids if not 0 <= i < vocab.n_hois]
            if bad:
                raise ValueError(f"split {name!r} references unknown HOI ids {bad}")
            subsets[name] = ids
        subsets.setdefault("full", list(range(vocab.n_hois)))
        return cls(data.get("scenario", "custom"), subsets)

    def to_dict(self):
        return {"scenario": self.scenario, "level": "hoi", **{k: list(v) for k, v in self.subsets.items()}}


@dataclass
class EvalReport:
    ap: Dict[int, float]
    n_gt: Dict[int, int]
    map: Dict[str, float]
    recall: Dict[int, float] = field(default_factory=dict)
    scenario: str = "custom"

    def to_dict(self):
        def num(x):
            return None if isinstance(x, float) and math.isnan(x) else x

        return {
            "scenario": self.scenario,
            "map": {k: num(v) for k, v in self.map.items()},
            "unseen_pair_recall": {str(k): num(v) for k, v in self.recall.items()},
            "per_category": [
                {"hoi": h, "ap": num(self.ap[h]), "n_gt": self.n_gt[h]} for h in sorted(self.ap)
            ],
        }

    def format_table(self, vocab: Optional[Vocabulary] = None) -> str:
        lines = [f"scenario: {self.scenario}", f"{'split':<10} {'mAP':>8}"]
        for name, value in self.map.items():
            lines.append(f"{name:<10} {_pct(value):>8}")
        for k, value in self.recall.items():
            lines.append(f"{'U-R@' + str(k):<10} {_pct(value):>8}")
        lines.append("")
        lines.append(f"{'hoi':>4} {'n_gt':>5} {'AP':>8}  name")
        for h in sorted(self.ap):
            name = ""
            if vocab is not None:
                a, o = vocab.hois[h]
                name = f"{vocab.actions[a]} {vocab.objects[o]}"
            lines.append(f"{h:>4} {self.n_gt[h]:>5} {_pct(self.ap[h]):>8}  {name}")
        return "\n".join(lines)


def _pct(x: float) -> str:
    return "n/a" if math.isnan(x) else f"{100 * x:.2f}"


def compose_score(object_score: float, action_score: float, interactive_score: float = 1.0,
                  use_interactive: bool = True) -> float:
    for name, v in (("object", object_score), ("action", action_score), ("interactive", interactive_score)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} score {v} outside [0, 1]")
    score = object_score * action_score
    return score * interactive_score if use_interactive else score


def match_detections(det_h, det_o, gt_h, gt_o, iou_thresh: float = IOU_THRESHOLD) -> List[bool]:
    """Greedy true-positive flags for detections already sorted by descending score.

    All inputs share one scene and one HOI category. Each detection claims
    the unclaimed ground truth with the largest ``min(human IoU, object IoU)``
    among those passing the threshold on both boxes.
    """
    det_h = np.asarray(det_h, dtype=float).reshape(-1, 4)
    det_o = np.asarray(det_o, dtype=float).reshape(-1, 4)
    gt_h = np.asarray(gt_h, dtype=float).reshape(-1, 4)
    gt_o = np.asarray(gt_o, dtype=float).reshape(-1, 4)
    if len(gt_h) == 0:
        return [False] * len(det_h)
    if len(det_h) == 0:
        return []
    ih = iou_matrix(det_h, gt_h)
    io = iou_matrix(det_o, gt_o)
    key = np.where((ih > iou_thresh) & (io > iou_thresh), np.minimum(ih, io), -np.inf)
    claimed = np.zeros(len(gt_h), dtype=bool)
    flags = []
    for row in key:
        row = np.where(claimed, -np.inf, row)
        j = int(np.argmax(row))
        if np.isfinite(row[j]):
            claimed[j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def average_precision(flags: Sequence[bool], n_gt: int, method: str = "all_point") -> float:
    """Area under the interpolated precision-recall curve.

    Returns NaN when there is no ground truth, so the category drops out of
    means instead of counting as 0. ``method="11_point"`` samples recall at
    0, 0.1, ..., 1.
    """
    if n_gt < 0:
        raise ValueError("n_gt must be non-negative")
    if n_gt == 0:
        return float("nan")
    tp = np.asarray(flags, dtype=bool)
    if tp.size == 0:
        return 0.0
    ctp = np.cumsum(tp)
    recall = ctp / n_gt
    precision = ctp / np.arange(1, len(tp) + 1)
    if method == "11_point":
        ap = 0.0
        for t in np.linspace(0, 1, 11):
            above = precision[recall >= t]
            ap += (above.max() if above.size else 0.0) / 11
        return float(ap)
    if method != "all_point":
        raise ValueError(f"unknown AP method {method!r}")
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def ground_truth_by_category(scenes: Iterable[GroundTruthScene], vocab: Vocabulary):
    """``{hoi: {scene_id: (human boxes, object boxes)}}`` over every annotated triplet."""
    gt: Dict[int, Dict[str, Tuple[list, list]]] = {}
    for scene in scenes:
        for h, o, a in scene.triplets():
            cat = int(scene.categories[o])
            if not vocab.has_hoi(a, cat):
                raise ValueError(f"scene {scene.scene_id}: triplet ({a}, {cat}) is not an HOI category")
            hb, ob = gt.setdefault(vocab.hoi_index(a, cat), {}).setdefault(scene.scene_id, ([], []))
            hb.append(scene.boxes[h])
            ob.append(scene.boxes[o])
    return gt


def evaluate(
    detections: Sequence[Detection],
    scenes: Sequence[GroundTruthScene],
    vocab: Vocabulary,
    splits: Optional[SplitConfig] = None,
    k_values: Sequence[int] = (),
    predictions: Optional[Mapping[str, PredictionSet]] = None,
    ap_method: str = "all_point",
) -> EvalReport:
    """Per-category AP, split mAPs and, given ``predictions``, U-R@K."""
    splits = splits or SplitConfig.full_only(vocab)
    by_id = {s.scene_id: s for s in scenes}
    if len(by_id) != len(scenes):
        raise ValueError("duplicate scene id")
    gt = ground_truth_by_category(scenes, vocab)

    grouped: Dict[int, List[int]] = {}
    for i, d in enumerate(detections):
        if d.scene_id not in by_id:
            raise ValueError(f"detection {i} references unknown scene {d.scene_id!r}")
        if not vocab.has_hoi(d.action, d.object_category):
            raise ValueError(f"detection {i}: ({d.action}, {d.object_category}) is not an HOI category")
        grouped.setdefault(vocab.hoi_index(d.action, d.object_category), []).append(i)

    ap: Dict[int, float] = {}
    n_gt: Dict[int, int] = {}
    for hoi in range(vocab.n_hois):
        per_scene = gt.get(hoi, {})
        n_gt[hoi] = sum(len(hb) for hb, _ in per_scene.values())
        idx = grouped.get(hoi, [])
        order = sorted(idx, key=lambda i: -detections[i].score)
        flags = np.zeros(len(order), dtype=bool)
        positions: Dict[str, List[int]] = {}
        for pos, i in enumerate(order):
            positions.setdefault(detections[i].scene_id, []).append(pos)
        for sid, pos in positions.items():
            if sid not in per_scene:
                continue
            dets = [detections[order[p]] for p in pos]
            hb, ob = per_scene[sid]
            flags[pos] = match_detections([d.human_box for d in dets], [d.object_box for d in dets], hb, ob)
        ap[hoi] = average_precision(flags, n_gt[hoi], ap_method)

    maps = {}
    for name, members in splits.subsets.items():
        vals = [ap[h] for h in members if not math.isnan(ap[h])]
        maps[name] = float(np.mean(vals)) if vals else float("nan")

    recall = {}
    if k_values:
        if predictions is None:
            raise ValueError("unseen-pair recall needs the per-scene predictions")
        for k in k_values:
            recall[int(k)] = unseen_pair_recall(predictions, scenes, k)
    return EvalReport(ap, n_gt, maps, recall, splits.scenario)


def top_k_queries(is_scores, k: int) -> np.ndarray:
    """Indices of the ``k`` highest interactive scores; ties go to the smaller index."""
    order = np.argsort(-np.asarray(is_scores, dtype=float), kind="stable")
    return order[:k]


def unseen_pair_recall(predictions: Mapping[str, PredictionSet], scenes: Sequence[GroundTruthScene],
                       k: int, iou_thresh: float = IOU_THRESHOLD) -> float:
    """Fraction of unseen ground-truth pairs covered by a scene's top-k predictions.

    Predictions are ranked by interactive score; coverage ignores actions and
    needs both box IoUs above the threshold. NaN when no scene has an unseen pair.
    """
    if k < 1:
        raise ValueError(f"K must be at least 1, got {k}")
    total = 0
    hit = 0
    for scene in scenes:
        pairs = scene.unseen_pairs()
        if not pairs:
            continue
        total += len(pairs)
        preds = predictions.get(scene.scene_id)
        if preds is None:
            continue
        top = top_k_queries(preds.is_scores, k)
        hu = np.stack([p.human_box for p in pairs])
        ou = np.stack([p.object_box for p in pairs])
        covered = (iou_matrix(hu, preds.human_boxes[top]) > iou_thresh) & (
            iou_matrix(ou, preds.object_boxes[top]) > iou_thresh
        )
        hit += int(covered.any(axis=1).sum())
    return hit / total if total else float("nan")


def predictions_to_detections(
    preds: PredictionSet,
    vocab: Vocabulary,
    scene_id: Optional[str] = None,
    use_interactive: bool = True,
    action_scores=None,
    top_n: Optional[int] = None,
) -> List[Detection]:
    """Expand each query into one triplet per action valid for its predicted object.

    ``action_scores`` overrides the detector's action head, e.g. with teacher
    scores. ``top_n`` keeps only the highest-scoring triplets.
    """
    scene_id = preds.scene_id if scene_id is None else scene_id
    acts = preds.action_scores if action_scores is None else np.asarray(action_scores, dtype=float)
    dets = []
    for q in range(len(preds)):
        cat = predicted_category(preds.object_scores[q])
        obj_score = float(min(1.0, preds.object_scores[q, cat]))
        for a in range(vocab.n_actions):
            if not vocab.has_hoi(a, cat):
                continue
            score = compose_score(obj_score, float(acts[q, a]), float(preds.is_scores[q]), use_interactive)
            dets.append(Detection(scene_id, preds.human_boxes[q], preds.object_boxes[q], cat, a, score))
    if top_n is not None:
        order = sorted(range(len(dets)), key=lambda i: -dets[i].score)[:top_n]
        dets = [dets[i] for i in sorted(order)]
    return dets
