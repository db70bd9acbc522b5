"""Seeded synthetic scenes, detector outputs and teacher similarities.

Random streams come from numpy's PCG64. The root ``SeedSequence(seed)`` is
spawned into ``n_scenes + 1`` children: child 0 draws the vocabulary, child
``i + 1`` draws everything about scene ``i``. A scene therefore depends only
on the seed and its own index, so scenes can be generated in any order or in
parallel with identical results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .distillation import ValidityMatrix, Vocabulary
from .evaluation import SplitConfig
from .scene import GroundTruthScene, HOIAnnotation, PredictionSet

ACTION_NAMES = (
    "holding", "riding", "carrying", "watching", "pushing", "eating", "throwing", "kicking",
    "repairing", "washing", "feeding", "lifting", "hugging", "cutting", "pulling", "cleaning",
)
OBJECT_NAMES = (
    "person", "bicycle", "cup", "horse", "ball", "umbrella", "laptop", "dog", "chair", "kite",
    "boat", "knife", "bottle", "skateboard", "cake", "sheep",
)


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_scenes: int = 20
    humans: Tuple[int, int] = (1, 2)
    objects: Tuple[int, int] = (1, 3)
    interact_prob: float = 0.5
    seen_fraction: float = 0.7
    box_noise: float = 0.1
    score_noise: float = 0.1
    n_queries: int = 64
    n_object_classes: int = 6
    n_seen_actions: int = 6
    n_unseen_actions: int = 3
    non_interactive_copy_prob: float = 0.5
    similarity_margin: float = 0.05
    rare_threshold: int = 3

    def validate(self):
        if self.n_scenes < 0:
            raise ValueError("n_scenes must be non-negative")
        for name, (lo, hi) in (("humans", self.humans), ("objects", self.objects)):
            if not 1 <= lo <= hi:
                raise ValueError(f"{name} range must satisfy 1 <= low <= high, got {(lo, hi)}")
        for name in ("interact_prob", "seen_fraction", "non_interactive_copy_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.box_noise < 0 or self.score_noise < 0:
            raise ValueError("noise levels must be non-negative")
        if self.similarity_margin < 0:
            raise ValueError("similarity margin must be non-negative")
        if self.n_object_classes < 2 or self.n_seen_actions < 1 or self.n_unseen_actions < 0:
            raise ValueError("need >= 2 object classes, >= 1 seen action and >= 0 unseen actions")
        max_pairs = self.humans[1] * self.objects[1]
        if max_pairs > self.n_queries:
            raise ValueError(
                f"infeasible: up to {max_pairs} enumerable pairs per scene but only {self.n_queries} queries"
            )


@dataclass
class Corpus:
    config: SimConfig
    vocab: Vocabulary
    validity: ValidityMatrix
    scenes: List[GroundTruthScene]
    predictions: List[PredictionSet]
    similarities: Dict[str, np.ndarray] = field(default_factory=dict)
    splits: SplitConfig = None


def _name(pool, i, prefix):
    return pool[i] if i < len(pool) else f"{prefix}_{i:02d}"


def make_vocabulary(cfg: SimConfig, rng: np.random.Generator) -> Vocabulary:
    n_act = cfg.n_seen_actions + cfg.n_unseen_actions
    actions = tuple(_name(ACTION_NAMES, i, "action") for i in range(n_act))
    objects = tuple(_name(OBJECT_NAMES, i, "object") for i in range(cfg.n_object_classes))
    seen_ids = np.arange(cfg.n_seen_actions)
    unseen_ids = np.arange(cfg.n_seen_actions, n_act)
    hois = []
    for o in range(cfg.n_object_classes):
        k = rng.integers(1, min(3, len(seen_ids)) + 1)
        chosen = list(rng.choice(seen_ids, size=k, replace=False))
        if len(unseen_ids):
            k = rng.integers(1, min(2, len(unseen_ids)) + 1)
            chosen += list(rng.choice(unseen_ids, size=k, replace=False))
        hois += [(int(a), o) for a in sorted(chosen)]
    seen = tuple(i < cfg.n_seen_actions for i in range(n_act))
    return Vocabulary(actions, objects, tuple(hois), seen)


def _grid_boxes(rng, n, width, height) -> np.ndarray:
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    cw, ch = width / cols, height / rows
    cells = rng.permutation(cols * rows)[:n]
    boxes = np.empty((n, 4))
    for i, cell in enumerate(cells):
        r, c = divmod(int(cell), cols)
        w = cw * rng.uniform(0.4, 0.9)
        h = ch * rng.uniform(0.4, 0.9)
        x0 = c * cw + rng.uniform(0, cw - w)
        y0 = r * ch + rng.uniform(0, ch - h)
        boxes[i] = (x0, y0, x0 + w, y0 + h)
    return boxes


# Noise helpers always consume the same draws whatever the level, so corpora that
# differ only in noise share every other random choice.
def _perturb(rng, box, noise, width, height) -> np.ndarray:
    w, h = box[2] - box[0], box[3] - box[1]
    out = box + noise * rng.normal(0.0, 1.0, 4) * np.array([w, h, w, h])
    x0, x1 = sorted((out[0], out[2]))
    y0, y1 = sorted((out[1], out[3]))
    x0, x1 = np.clip([x0, x1], 0.0, width)
    y0, y1 = np.clip([y0, y1], 0.0, height)
    return np.array([x0, y0, x1, y1])


def _noise(rng, level, size=None):
    return np.minimum(1.0, level * np.abs(rng.normal(0.0, 1.0, size)))


def make_scene(cfg: SimConfig, vocab: Vocabulary, index: int, rng: np.random.Generator):
    """One scene with its predictions and per-query similarities."""
    scene_id = f"s{index:04d}"
    width = float(rng.integers(320, 641))
    height = float(rng.integers(320, 641))
    n_h = int(rng.integers(cfg.humans[0], cfg.humans[1] + 1))
    n_o = int(rng.integers(cfg.objects[0], cfg.objects[1] + 1))
    boxes = _grid_boxes(rng, n_h + n_o, width, height)
    categories = np.concatenate([np.zeros(n_h, dtype=int), rng.integers(1, cfg.n_object_classes, n_o)])
    humans = tuple(range(n_h))

    valid = ValidityMatrix.from_vocabulary(vocab).valid
    seen_mask = vocab.seen_mask
    pairs = [(h, o) for h in humans for o in range(n_h, len(boxes))]
    interactive = rng.random(len(pairs)) < cfg.interact_prob
    if not interactive.any():
        interactive[rng.integers(len(pairs))] = True

    annotations = []
    pair_actions: Dict[Tuple[int, int], List[int]] = {}
    for (h, o), is_inter in zip(pairs, interactive):
        if not is_inter:
            continue
        cat = categories[o]
        seen_pool = np.flatnonzero(valid[:, cat] & seen_mask)
        unseen_pool = np.flatnonzero(valid[:, cat] & ~seen_mask)
        want_seen = rng.random() < cfg.seen_fraction
        seen = (want_seen and len(seen_pool) > 0) or len(unseen_pool) == 0
        pool = seen_pool if seen else unseen_pool
        k = int(rng.integers(1, min(2, len(pool)) + 1))
        acts = sorted(int(a) for a in rng.choice(pool, size=k, replace=False))
        pair_actions[(h, o)] = acts
        annotations += [HOIAnnotation(h, o, a, bool(seen)) for a in acts]
    scene = GroundTruthScene(scene_id, width, height, boxes, categories, humans, tuple(annotations))

    n_cls = cfg.n_object_classes
    n_act = vocab.n_actions
    rows = []  # (human box, object box, category or None, gt actions, is score)
    for h, o in pairs:
        if (h, o) in pair_actions:
            rows.append((h, o, pair_actions[(h, o)], 1.0 - float(_noise(rng, cfg.score_noise))))
        elif rng.random() < cfg.non_interactive_copy_prob:
            rows.append((h, o, [], float(rng.uniform(0.0, 1.0))))

    n = cfg.n_queries
    hb = np.empty((n, 4))
    ob = np.empty((n, 4))
    obj_scores = np.empty((n, n_cls + 1))
    act_scores = np.empty((n, n_act))
    is_scores = np.empty(n)
    sims = rng.uniform(0.15, 0.25, (n, vocab.n_hois))
    for q, (h, o, acts, s_is) in enumerate(rows):
        hb[q] = _perturb(rng, boxes[h], cfg.box_noise, width, height)
        ob[q] = _perturb(rng, boxes[o], cfg.box_noise, width, height)
        e = float(_noise(rng, cfg.score_noise))
        obj_scores[q] = e * rng.dirichlet(np.ones(n_cls + 1))
        obj_scores[q, categories[o]] += 1.0 - e
        e_act = _noise(rng, cfg.score_noise, n_act)
        act_scores[q] = e_act
        act_scores[q, acts] = 1.0 - e_act[acts]
        is_scores[q] = s_is
        for a in acts:
            sims[q, vocab.hoi_index(a, categories[o])] = 0.25 + cfg.similarity_margin + rng.uniform(0, 0.01)
    for q in range(len(rows), n):
        for target in (hb, ob):
            w = width * rng.uniform(0.05, 0.4)
            h = height * rng.uniform(0.05, 0.4)
            x0 = rng.uniform(0, width - w)
            y0 = rng.uniform(0, height - h)
            target[q] = (x0, y0, x0 + w, y0 + h)
        obj_scores[q] = rng.dirichlet(np.ones(n_cls + 1))
        act_scores[q] = rng.uniform(0.0, 0.5, n_act)
        is_scores[q] = rng.uniform(0.0, 0.5)

    order = rng.permutation(n)
    preds = PredictionSet(hb[order], ob[order], obj_scores[order], act_scores[order],
                          is_scores[order], scene_id=scene_id)
    similarities = {f"{scene_id}/{q}": sims[order[q]] for q in range(n)}
    return scene, preds, similarities


def make_splits(vocab: Vocabulary, scenes: List[GroundTruthScene], rare_threshold: int) -> SplitConfig:
    """Unseen-action split; rare categories have fewer than ``rare_threshold`` instances."""
    counts = np.zeros(vocab.n_hois, dtype=int)
    for scene in scenes:
        for _, o, a in scene.triplets():
            counts[vocab.hoi_index(a, scene.categories[o])] += 1
    seen = [i for i, (a, _) in enumerate(vocab.hois) if vocab.action_seen[a]]
    unseen = [i for i, (a, _) in enumerate(vocab.hois) if not vocab.action_seen[a]]
    rare = [i for i in range(vocab.n_hois) if counts[i] < rare_threshold]
    non_rare = [i for i in range(vocab.n_hois) if counts[i] >= rare_threshold]
    return SplitConfig("UA", {"full": list(range(vocab.n_hois)), "seen": seen, "unseen": unseen,
                              "rare": rare, "non_rare": non_rare})


def generate_corpus(cfg: SimConfig) -> Corpus:
    cfg.validate()
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_scenes + 1)
    vocab = make_vocabulary(cfg, np.random.Generator(np.random.PCG64(streams[0])))
    scenes, preds, sims = [], [], {}
    for i in range(cfg.n_scenes):
        rng = np.random.Generator(np.random.PCG64(streams[i + 1]))
        scene, p, s = make_scene(cfg, vocab, i, rng)
        scenes.append(scene)
        preds.append(p)
        sims.update(s)
    validity = ValidityMatrix.from_vocabulary(vocab)
    return Corpus(cfg, vocab, validity, scenes, preds, sims, make_splits(vocab, scenes, cfg.rare_threshold))
