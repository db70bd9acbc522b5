"""Ground-truth scenes, detector predictions and the pair targets derived from them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import corner_to_center, validate_boxes


@dataclass(frozen=True)
class HOIAnnotation:
    """One annotated ``<human, object, action>`` triplet referencing scene boxes by index.

    ``seen=False`` marks a triplet held out of training (an unseen pair in the
    zero-shot split). It still counts as ground truth at evaluation time.
    """

    human: int
    object: int
    action: int
    seen: bool = True


@dataclass(frozen=True)
class PairTarget:
    """A ground-truth human-object pair to match predictions against.

    ``actions`` holds the annotated action indices for seen pairs and is
    ``None`` for unknown pairs, which carry no action label.
    """

    human_index: int
    object_index: int
    human_box: np.ndarray
    object_box: np.ndarray
    object_category: int
    actions: Optional[Tuple[int, ...]] = None

    @property
    def key(self) -> Tuple[int, int]:
        return (self.human_index, self.object_index)

    def action_vector(self, n_actions: int) -> np.ndarray:
        if self.actions is None:
            raise ValueError(f"pair {self.key} has no action labels")
        vec = np.zeros(n_actions)
        vec[list(self.actions)] = 1.0
        return vec


@dataclass(frozen=True)
class GroundTruthScene:
    """Boxes, categories and HOI annotations of one image.

    ``humans`` and ``objects`` index into ``boxes``. ``objects`` defaults to
    every non-human box; listing a human index there lets that person act as
    the object of another human. A box is never paired with itself.
    """

    scene_id: str
    width: float
    height: float
    boxes: np.ndarray
    categories: np.ndarray
    humans: Tuple[int, ...]
    annotations: Tuple[HOIAnnotation, ...] = ()
    objects: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        boxes = validate_boxes(np.asarray(self.boxes, dtype=float).reshape(-1, 4))
        cats = np.asarray(self.categories, dtype=int).reshape(-1)
        if len(cats) != len(boxes):
            raise ValueError(f"scene {self.scene_id}: {len(boxes)} boxes but {len(cats)} categories")
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"scene {self.scene_id}: non-positive image size")
        humans = tuple(int(h) for h in self.humans)
        for idx in humans:
            if not 0 <= idx < len(boxes):
                raise ValueError(f"scene {self.scene_id}: human index {idx} out of range")
        if len(set(humans)) != len(humans):
            raise ValueError(f"scene {self.scene_id}: duplicate human index")
        if self.objects is None:
            objects = tuple(i for i in range(len(boxes)) if i not in humans)
        else:
            objects = tuple(int(o) for o in self.objects)
        if any(not 0 <= o < len(boxes) for o in objects) or len(set(objects)) != len(objects):
            raise ValueError(f"scene {self.scene_id}: object indices must be distinct and in range")
        anns = tuple(self.annotations)
        for a in anns:
            if a.human not in humans:
                raise ValueError(f"scene {self.scene_id}: annotation subject {a.human} is not a human box")
            if a.object not in objects or a.object == a.human:
                raise ValueError(f"scene {self.scene_id}: bad annotation object index {a.object}")
            if a.action < 0:
                raise ValueError(f"scene {self.scene_id}: negative action index")
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "categories", cats)
        object.__setattr__(self, "humans", humans)
        object.__setattr__(self, "objects", objects)
        object.__setattr__(self, "annotations", anns)

    @property
    def image_size(self) -> Tuple[float, float]:
        return (self.width, self.height)

    def all_pairs(self) -> List[Tuple[int, int]]:
        """Every human-object pairing, human index major, object index minor."""
        return [(h, o) for h in self.humans for o in self.objects if o != h]

    def pair_target(self, h: int, o: int, actions: Optional[Sequence[int]] = None) -> PairTarget:
        return PairTarget(
            human_index=h,
            object_index=o,
            human_box=self.boxes[h],
            object_box=self.boxes[o],
            object_category=int(self.categories[o]),
            actions=None if actions is None else tuple(sorted(set(int(a) for a in actions))),
        )

    def _grouped(self, seen: Optional[bool]) -> Dict[Tuple[int, int], List[int]]:
        groups: Dict[Tuple[int, int], List[int]] = {}
        for a in self.annotations:
            if seen is None or a.seen == seen:
                groups.setdefault((a.human, a.object), []).append(a.action)
        return groups

    def seen_pairs(self) -> List[PairTarget]:
        """Annotated training pairs (the set Y), ordered by (human, object)."""
        groups = self._grouped(seen=True)
        return [self.pair_target(h, o, groups[(h, o)]) for h, o in sorted(groups)]

    def unseen_pairs(self) -> List[PairTarget]:
        """Interactive pairs whose annotations are all held out of training."""
        seen = self._grouped(seen=True)
        held = self._grouped(seen=False)
        keys = sorted(k for k in held if k not in seen)
        return [self.pair_target(h, o, held[(h, o)]) for h, o in keys]

    def triplets(self) -> List[Tuple[int, int, int]]:
        """Distinct ``(human, object, action)`` ground-truth triplets, seen or not."""
        return sorted({(a.human, a.object, a.action) for a in self.annotations})


@dataclass(frozen=True)
class Prediction:
    query: int
    human_box: np.ndarray
    object_box: np.ndarray
    object_scores: np.ndarray
    action_scores: np.ndarray
    is_score: float

    def center_boxes(self, image_w: float, image_h: float):
        h = corner_to_center(self.human_box, image_w, image_h)[0]
        o = corner_to_center(self.object_box, image_w, image_h)[0]
        return h, o


@dataclass(frozen=True)
class PredictionSet:
    """The N query outputs for one scene, stored column-wise.

    ``object_scores`` has one column per object category plus a trailing
    background ("no pair") slot; ``action_scores`` covers every action.
    """

    human_boxes: np.ndarray
    object_boxes: np.ndarray
    object_scores: np.ndarray
    action_scores: np.ndarray
    is_scores: np.ndarray
    scene_id: str = ""

    def __post_init__(self):
        hb = validate_boxes(np.asarray(self.human_boxes, dtype=float).reshape(-1, 4))
        ob = validate_boxes(np.asarray(self.object_boxes, dtype=float).reshape(-1, 4))
        n = len(hb)
        if n < 1:
            raise ValueError("a prediction set needs at least one query")
        obj = np.atleast_2d(np.asarray(self.object_scores, dtype=float))
        act = np.atleast_2d(np.asarray(self.action_scores, dtype=float))
        s_is = np.asarray(self.is_scores, dtype=float).reshape(-1)
        for name, arr in (("object_boxes", ob), ("object_scores", obj), ("action_scores", act), ("is_scores", s_is)):
            if len(arr) != n:
                raise ValueError(f"{name} has {len(arr)} rows, expected {n}")
        if np.any((act < 0) | (act > 1)) or np.any((s_is < 0) | (s_is > 1)):
            raise ValueError("action and interactive scores must lie in [0, 1]")
        if np.any(obj < 0):
            raise ValueError("object scores must be non-negative")
        for name, arr in (("human_boxes", hb), ("object_boxes", ob), ("object_scores", obj),
                          ("action_scores", act), ("is_scores", s_is)):
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.human_boxes)

    def __getitem__(self, i: int) -> Prediction:
        return Prediction(
            query=int(i),
            human_box=self.human_boxes[i],
            object_box=self.object_boxes[i],
            object_scores=self.object_scores[i],
            action_scores=self.action_scores[i],
            is_score=float(self.is_scores[i]),
        )

    @property
    def n_object_classes(self) -> int:
        """Object categories, excluding the background slot."""
        return self.object_scores.shape[1] - 1

    @property
    def n_actions(self) -> int:
        return self.action_scores.shape[1]

    def subset(self, rows) -> "PredictionSet":
        rows = np.asarray(rows, dtype=int)
        return PredictionSet(
            self.human_boxes[rows],
            self.object_boxes[rows],
            self.object_scores[rows],
            self.action_scores[rows],
            self.is_scores[rows],
            scene_id=self.scene_id,
        )
