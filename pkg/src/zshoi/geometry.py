"""Axis-aligned box arithmetic.

Boxes are stored in corner form ``(x_min, y_min, x_max, y_max)`` in the
image's own frame. The L1 regression cost works in normalized center form
``(cx, cy, w, h)``; conversions between the two are explicit.

Every function accepting a single box also accepts any length-4 sequence.
The ``*_matrix`` variants take ``(n, 4)`` and ``(m, 4)`` arrays and return
an ``(n, m)`` array.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class Box:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(f"invalid box {self.as_tuple()}: min corner exceeds max corner")

    def as_tuple(self):
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def __iter__(self):
        return iter(self.as_tuple())

    def __len__(self):
        return 4

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.as_tuple(), dtype=dtype or float)

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class CenterBox:
    """Center-form box normalized by image width and height."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative extent in {self.as_tuple()}")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValueError(f"center {self.cx, self.cy} outside the unit frame")

    def as_tuple(self):
        return (self.cx, self.cy, self.w, self.h)

    def __iter__(self):
        return iter(self.as_tuple())

    def __len__(self):
        return 4

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.as_tuple(), dtype=dtype or float)


@dataclass(frozen=True)
class BoxPair:
    human: Box
    object: Box
    object_category: int


BoxLike = Union[Box, Sequence[float], np.ndarray]


def _as_boxes(boxes) -> np.ndarray:
    arr = np.asarray(boxes, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected boxes of shape (n, 4), got {arr.shape}")
    return arr


def validate_boxes(boxes) -> np.ndarray:
    arr = _as_boxes(boxes)
    if not np.all(np.isfinite(arr)):
        raise ValueError("box coordinates must be finite")
    if np.any(arr[:, 2] < arr[:, 0]) or np.any(arr[:, 3] < arr[:, 1]):
        raise ValueError("invalid box: min corner exceeds max corner")
    return arr


def box_area(boxes) -> np.ndarray:
    arr = _as_boxes(boxes)
    return (arr[:, 2] - arr[:, 0]) * (arr[:, 3] - arr[:, 1])


def _inter_union(a: np.ndarray, b: np.ndarray):
    area_a = box_area(a)
    area_b = box_area(b)
    lt = np.maximum(a[:, None, :2], b[None, :, :2])
    rb = np.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = np.clip(rb - lt, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = area_a[:, None] + area_b[None, :] - inter
    return inter, union, area_a, area_b


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU; pairs with zero union area (both degenerate) get 0."""
    a = validate_boxes(a)
    b = validate_boxes(b)
    inter, union, _, _ = _inter_union(a, b)
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def giou_matrix(a, b) -> np.ndarray:
    """Pairwise generalized IoU.

    Raises ``ValueError`` if any pair consists of two zero-area boxes, since
    the union is then empty and the ratio is undefined.
    """
    a = validate_boxes(a)
    b = validate_boxes(b)
    inter, union, area_a, area_b = _inter_union(a, b)
    both_degenerate = (area_a[:, None] <= 0) & (area_b[None, :] <= 0)
    if np.any(both_degenerate):
        raise ValueError("generalized IoU is undefined for two degenerate boxes")
    iou = np.zeros_like(inter)
    np.divide(inter, union, out=iou, where=union > 0)
    lt = np.minimum(a[:, None, :2], b[None, :, :2])
    rb = np.maximum(a[:, None, 2:], b[None, :, 2:])
    wh = rb - lt
    enclosing = wh[..., 0] * wh[..., 1]
    # enclosing >= union > 0 once at least one box has area
    return iou - (enclosing - union) / enclosing


def iou(a: BoxLike, b: BoxLike) -> float:
    return float(iou_matrix(a, b)[0, 0])


def giou(a: BoxLike, b: BoxLike) -> float:
    return float(giou_matrix(a, b)[0, 0])


def union_box(human: BoxLike, obj: BoxLike = None) -> Box:
    """Smallest axis-aligned box containing both members of a pair."""
    if isinstance(human, BoxPair):
        human, obj = human.human, human.object
    h = validate_boxes(human)[0]
    o = validate_boxes(obj)[0]
    return Box(
        float(min(h[0], o[0])),
        float(min(h[1], o[1])),
        float(max(h[2], o[2])),
        float(max(h[3], o[3])),
    )


def _check_dims(image_w: float, image_h: float):
    if not (image_w > 0 and image_h > 0):
        raise ValueError(f"image dimensions must be positive, got {image_w}x{image_h}")


def corner_to_center(boxes, image_w: float, image_h: float) -> np.ndarray:
    _check_dims(image_w, image_h)
    arr = _as_boxes(boxes)
    scale = np.array([image_w, image_h, image_w, image_h], dtype=float)
    x0, y0, x1, y1 = (arr / scale).T
    return np.stack([(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0], axis=-1)


def center_to_corner(boxes, image_w: float, image_h: float) -> np.ndarray:
    _check_dims(image_w, image_h)
    arr = _as_boxes(boxes)
    cx, cy, w, h = arr.T
    corners = np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=-1)
    return corners * np.array([image_w, image_h, image_w, image_h], dtype=float)


def to_center_form(b: BoxLike, image_w: float, image_h: float) -> CenterBox:
    return CenterBox(*corner_to_center(b, image_w, image_h)[0].tolist())


def to_corner_form(c, image_w: float, image_h: float) -> Box:
    return Box(*center_to_corner(c, image_w, image_h)[0].tolist())


def l1_cost_matrix(pred_center, gt_center) -> np.ndarray:
    """Pairwise sum of absolute coordinate differences in center form."""
    p = _as_boxes(pred_center)
    g = _as_boxes(gt_center)
    return np.abs(p[:, None, :] - g[None, :, :]).sum(axis=-1)


def l1_box_cost(pred: Union[CenterBox, Sequence[float]], gt: Union[CenterBox, Sequence[float]]) -> float:
    return float(l1_cost_matrix(pred, gt)[0, 0])


def pair_overlaps(h_a, o_a, h_b, o_b, threshold: float = IOU_THRESHOLD) -> np.ndarray:
    """Boolean ``(n, m)`` mask: both human and object IoU strictly above ``threshold``."""
    return (iou_matrix(h_a, h_b) > threshold) & (iou_matrix(o_a, o_b) > threshold)
