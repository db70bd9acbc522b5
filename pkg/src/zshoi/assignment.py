"""Matching costs and exact minimum-cost bipartite assignment.

The cost of pairing a prediction with a ground-truth pair is a weighted sum
of a box-regression term (L1 in normalized center form, human plus object),
a generalized-IoU term, an object-class term (negative probability of the
target category) and, in ``"full"`` mode, an action-class term (mean binary
cross-entropy against the multi-hot target actions).

:func:`hungarian` returns the optimal assignment with a deterministic
tie-break; :func:`brute_force_assignment` enumerates every injection and is
kept as the reference the solver is checked against.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import corner_to_center, giou, giou_matrix, l1_box_cost, l1_cost_matrix
from .scene import PairTarget, Prediction, PredictionSet

EPS = 1e-7
MODES = ("full", "action_free")
BRUTE_FORCE_MAX_COLS = 8
BRUTE_FORCE_MAX_INJECTIONS = 5_000_000


@dataclass(frozen=True)
class CostWeights:
    w_bbox: float = 2.5
    w_giou: float = 1.0
    w_obj: float = 1.0
    w_act: float = 1.0

    def __post_init__(self):
        values = (self.w_bbox, self.w_giou, self.w_obj, self.w_act)
        if any(v < 0 for v in values):
            raise ValueError(f"cost weights must be non-negative, got {values}")
        if not any(v > 0 for v in values):
            raise ValueError("at least one cost weight must be positive")


def _check_mode(mode: str):
    if mode not in MODES:
        raise ValueError(f"unknown cost mode {mode!r}; expected one of {MODES}")


def _action_slots(n_actions: int, action_mask) -> np.ndarray:
    if action_mask is None:
        return np.ones(n_actions, dtype=bool)
    mask = np.asarray(action_mask, dtype=bool)
    if mask.shape != (n_actions,):
        raise ValueError(f"action mask has shape {mask.shape}, expected ({n_actions},)")
    if not mask.any():
        raise ValueError("action mask selects no action")
    return mask


def pair_cost(
    pred: Prediction,
    target: PairTarget,
    weights: CostWeights = CostWeights(),
    mode: str = "full",
    image_size: Tuple[float, float] = (1.0, 1.0),
    action_mask=None,
) -> float:
    """Matching cost of one prediction against one ground-truth pair."""
    _check_mode(mode)
    if mode == "full" and target.actions is None:
        raise ValueError(f"full-mode cost needs action labels; pair {target.key} has none")
    w, h = image_size
    ph, po = pred.center_boxes(w, h)
    th = corner_to_center(target.human_box, w, h)[0]
    to = corner_to_center(target.object_box, w, h)[0]
    cost = weights.w_bbox * (l1_box_cost(ph, th) + l1_box_cost(po, to))
    cost += weights.w_giou * ((1 - giou(pred.human_box, target.human_box)) + (1 - giou(pred.object_box, target.object_box)))
    cost += weights.w_obj * -float(pred.object_scores[target.object_category])
    if mode == "full":
        slots = _action_slots(len(pred.action_scores), action_mask)
        q = np.clip(pred.action_scores[slots], EPS, 1 - EPS)
        y = target.action_vector(len(pred.action_scores))[slots]
        bce = -(y * np.log(q) + (1 - y) * np.log(1 - q))
        cost += weights.w_act * float(bce.mean())
    return float(cost)


def cost_matrix(
    preds: PredictionSet,
    targets: Sequence[PairTarget],
    weights: CostWeights = CostWeights(),
    mode: str = "full",
    image_size: Tuple[float, float] = (1.0, 1.0),
    action_mask=None,
    rows: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Vectorized :func:`pair_cost` over ``rows`` of ``preds`` (all by default) and ``targets``."""
    _check_mode(mode)
    rows = np.arange(len(preds)) if rows is None else np.asarray(rows, dtype=int)
    if len(rows) == 0 or len(targets) == 0:
        return np.zeros((len(rows), len(targets)))
    w, h = image_size
    tgt_h = np.stack([t.human_box for t in targets])
    tgt_o = np.stack([t.object_box for t in targets])
    tgt_cat = np.array([t.object_category for t in targets], dtype=int)
    pred_h = preds.human_boxes[rows]
    pred_o = preds.object_boxes[rows]

    cost_bbox = l1_cost_matrix(corner_to_center(pred_h, w, h), corner_to_center(tgt_h, w, h))
    cost_bbox += l1_cost_matrix(corner_to_center(pred_o, w, h), corner_to_center(tgt_o, w, h))
    cost_giou = (1 - giou_matrix(pred_h, tgt_h)) + (1 - giou_matrix(pred_o, tgt_o))
    cost_obj = -preds.object_scores[rows][:, tgt_cat]
    cost = weights.w_bbox * cost_bbox + weights.w_giou * cost_giou + weights.w_obj * cost_obj

    if mode == "full":
        missing = [t.key for t in targets if t.actions is None]
        if missing:
            raise ValueError(f"full-mode cost needs action labels; pairs {missing} have none")
        n_act = preds.n_actions
        slots = _action_slots(n_act, action_mask)
        y = np.stack([t.action_vector(n_act) for t in targets])[:, slots]
        q = np.clip(preds.action_scores[rows][:, slots], EPS, 1 - EPS)
        cost_act = (-np.log(q) @ y.T + -np.log(1 - q) @ (1 - y).T) / slots.sum()
        cost = cost + weights.w_act * cost_act
    return cost


@dataclass(frozen=True)
class Assignment:
    """A partial injection between cost-matrix rows and columns.

    ``rows[i]`` is paired with ``cols[i]``; pairs are sorted by row.
    """

    rows: Tuple[int, ...]
    cols: Tuple[int, ...]
    cost: float

    @property
    def pairs(self):
        return tuple(zip(self.rows, self.cols))

    def __len__(self):
        return len(self.rows)

    def col_for_row(self):
        return dict(zip(self.rows, self.cols))


def _finalize(cost: np.ndarray, rows, cols) -> Assignment:
    order = sorted(zip((int(r) for r in rows), (int(c) for c in cols)))
    total = math.fsum(float(cost[r, c]) for r, c in order)
    return Assignment(tuple(r for r, _ in order), tuple(c for _, c in order), total)


def _prepare(cost) -> np.ndarray:
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix contains non-finite entries")
    return c


def _tie_tolerance(best: float) -> float:
    return 1e-9 * max(1.0, abs(best))


def _lex_first_optimal(work: np.ndarray) -> np.ndarray:
    """Row chosen for each column of a tall matrix.

    Among all assignments within tolerance of the optimum, returns the one
    whose row-per-column vector is lexicographically smallest.
    """
    n, m = work.shape
    r, c = linear_sum_assignment(work)
    best = float(work[r, c].sum())
    budget = best + _tie_tolerance(best)
    sol = np.empty(m, dtype=int)
    sol[c] = r
    free = np.ones(n, dtype=bool)
    fixed = 0.0
    for col in range(m):
        rest = np.arange(col + 1, m)
        avail = np.flatnonzero(free)
        chosen = sol[col]
        for row in avail[avail < sol[col]]:
            head = fixed + work[row, col]
            if len(rest) == 0:
                if head <= budget:
                    chosen = row
                    break
                continue
            sub_rows = avail[avail != row]
            sub = work[np.ix_(sub_rows, rest)]
            # column minima bound any completion from below
            if head + sub.min(axis=0).sum() > budget:
                continue
            rr, cc = linear_sum_assignment(sub)
            if head + float(sub[rr, cc].sum()) <= budget:
                chosen = row
                sol[rest[cc]] = sub_rows[rr]
                break
        sol[col] = chosen
        free[chosen] = False
        fixed += work[chosen, col]
    return sol


def hungarian(cost) -> Assignment:
    """Minimum-cost assignment of ``min(rows, cols)`` pairs.

    Ties between optimal assignments go to the lexicographically smallest
    vector of long-side indices listed in short-side order (rows per column
    for tall matrices). An empty matrix gives an empty assignment.
    """
    c = _prepare(cost)
    if c.size == 0:
        return Assignment((), (), 0.0)
    if c.shape[0] >= c.shape[1]:
        picked = _lex_first_optimal(c)
        return _finalize(c, picked, range(c.shape[1]))
    picked = _lex_first_optimal(c.T)
    return _finalize(c, range(c.shape[0]), picked)


@lru_cache(maxsize=64)
def _injections(n: int, m: int) -> np.ndarray:
    # itertools emits permutations in lexicographic order
    return np.array(list(itertools.permutations(range(n), m)), dtype=np.intp).reshape(-1, m)


def brute_force_assignment(cost) -> Assignment:
    """Exhaustive reference solver using the same tie-break as :func:`hungarian`."""
    c = _prepare(cost)
    if c.size == 0:
        return Assignment((), (), 0.0)
    transposed = c.shape[0] < c.shape[1]
    work = c.T if transposed else c
    n, m = work.shape
    if m > BRUTE_FORCE_MAX_COLS:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_COLS} columns, got {m}")
    if math.perm(n, m) > BRUTE_FORCE_MAX_INJECTIONS:
        raise ValueError(f"brute force over {math.perm(n, m)} injections refused")
    inj = _injections(n, m)
    totals = work[inj, np.arange(m)].sum(axis=1)
    best = float(totals.min())
    first = int(np.argmax(totals <= best + _tie_tolerance(best)))
    picked = inj[first]
    if transposed:
        return _finalize(c, range(c.shape[0]), picked)
    return _finalize(c, picked, range(m))
