"""Teacher soft targets from vision-language similarities.

For a matched human-object pair the teacher scores every HOI category by the
cosine similarity between the pair's union-region embedding and the HOI
prompt embedding. Only actions that can validly occur with the pair's object
category are kept, and a temperature softmax over those similarities gives
the action distribution the student is trained to reproduce.

Embeddings (or the similarities themselves) are computed upstream and
ingested from files; no encoder runs here.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .matching import SELECTED, MatchResult

logger = logging.getLogger(__name__)

PROMPT_TEMPLATE = "a picture of person {verb} {object}"
DEFAULT_GAMMA = 100.0
RESTRICTIONS = ("all", "unseen_only")
NORM_WARN_TOL = 1e-3


@dataclass(frozen=True)
class Vocabulary:
    """Action, object and HOI-category names.

    ``hois`` lists ``(action index, object index)`` pairs; its order defines
    the HOI category ids used by similarity vectors and evaluation.
    """

    actions: Tuple[str, ...]
    objects: Tuple[str, ...]
    hois: Tuple[Tuple[int, int], ...]
    action_seen: Tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "hois", tuple((int(a), int(o)) for a, o in self.hois))
        object.__setattr__(self, "action_seen", tuple(bool(s) for s in self.action_seen))
        if len(self.action_seen) != len(self.actions):
            raise ValueError("one seen flag is required per action")
        if len(set(self.hois)) != len(self.hois):
            raise ValueError("duplicate HOI category")
        for a, o in self.hois:
            if not (0 <= a < len(self.actions) and 0 <= o < len(self.objects)):
                raise ValueError(f"HOI ({a}, {o}) references an unknown action or object")
        object.__setattr__(self, "_index", {hoi: i for i, hoi in enumerate(self.hois)})

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_objects(self) -> int:
        return len(self.objects)

    @property
    def n_hois(self) -> int:
        return len(self.hois)

    @property
    def seen_mask(self) -> np.ndarray:
        return np.array(self.action_seen, dtype=bool)

    @property
    def unseen_mask(self) -> np.ndarray:
        return ~self.seen_mask

    def hoi_index(self, action: int, obj: int) -> int:
        try:
            return self._index[(int(action), int(obj))]
        except KeyError:
            raise KeyError(f"no HOI category for action {action} with object {obj}") from None

    def has_hoi(self, action: int, obj: int) -> bool:
        return (int(action), int(obj)) in self._index

    def prompts(self) -> Tuple[str, ...]:
        return tuple(hoi_prompt(self.actions[a], self.objects[o]) for a, o in self.hois)


@dataclass(frozen=True)
class ValidityMatrix:
    """Boolean ``[action, object]`` table of admissible combinations."""

    valid: np.ndarray

    def __post_init__(self):
        valid = np.asarray(self.valid, dtype=bool)
        if valid.ndim != 2:
            raise ValueError("validity matrix must be 2-D (actions x objects)")
        object.__setattr__(self, "valid", valid)

    @classmethod
    def from_vocabulary(cls, vocab: Vocabulary) -> "ValidityMatrix":
        valid = np.zeros((vocab.n_actions, vocab.n_objects), dtype=bool)
        for a, o in vocab.hois:
            valid[a, o] = True
        return cls(valid)

    @property
    def interaction_free(self) -> np.ndarray:
        """Objects with no admissible action."""
        return ~self.valid.any(axis=0)

    def check(self, vocab: Vocabulary):
        if self.valid.shape != (vocab.n_actions, vocab.n_objects):
            raise ValueError(
                f"validity matrix is {self.valid.shape}, vocabulary needs {(vocab.n_actions, vocab.n_objects)}"
            )


@dataclass(frozen=True)
class DistillConfig:
    gamma: float = DEFAULT_GAMMA
    restriction: str = "all"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.restriction not in RESTRICTIONS:
            raise ValueError(f"restriction must be one of {RESTRICTIONS}, got {self.restriction!r}")


@dataclass(frozen=True)
class ActionDistribution:
    probs: np.ndarray
    support: Tuple[int, ...]

    @property
    def support_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.probs), dtype=bool)
        mask[list(self.support)] = True
        return mask


def hoi_prompt(action_name: str, object_name: str) -> str:
    if not action_name or not object_name:
        raise ValueError("action and object names must be non-empty")
    return PROMPT_TEMPLATE.format(verb=action_name, object=object_name)


def cosine_similarity(v: Sequence[float], t: Sequence[float]) -> float:
    v = np.asarray(v, dtype=float)
    t = np.asarray(t, dtype=float)
    if v.shape != t.shape:
        raise ValueError(f"dimension mismatch: {v.shape} vs {t.shape}")
    nv, nt = np.linalg.norm(v), np.linalg.norm(t)
    if nv == 0 or nt == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(v @ t / (nv * nt))


def normalize_embedding(vec, name: str = "embedding") -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(vec)
    if norm == 0 or not np.isfinite(norm):
        raise ValueError(f"{name} has zero or non-finite norm")
    if abs(norm - 1.0) > NORM_WARN_TOL:
        logger.warning("%s has norm %.6g; normalizing", name, norm)
    return vec / norm


def similarity_vector(pair_embedding, text_embeddings) -> np.ndarray:
    """Cosine similarity of one region embedding against every HOI text row."""
    v = np.asarray(pair_embedding, dtype=float)
    t = np.atleast_2d(np.asarray(text_embeddings, dtype=float))
    if t.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: embedding {v.shape[0]} vs text {t.shape[1]}")
    nv = np.linalg.norm(v)
    nt = np.linalg.norm(t, axis=1)
    if nv == 0 or np.any(nt == 0):
        raise ValueError("cosine similarity is undefined for a zero vector")
    return t @ v / (nt * nv)


def valid_support(object_category: int, vocab: Vocabulary, validity: ValidityMatrix, restriction: str = "all"):
    validity.check(vocab)
    if not 0 <= object_category < vocab.n_objects:
        raise ValueError(f"unknown object category {object_category}")
    mask = validity.valid[:, object_category].copy()
    if restriction == "unseen_only":
        mask &= vocab.unseen_mask
    return np.flatnonzero(mask)


def distill_target(
    similarities,
    object_category: int,
    vocab: Vocabulary,
    validity: ValidityMatrix,
    config: DistillConfig = DistillConfig(),
) -> ActionDistribution:
    """Masked temperature softmax over the actions valid for ``object_category``.

    ``similarities`` is aligned with ``vocab.hois``. Actions outside the
    support get probability exactly 0.
    """
    sims = np.asarray(similarities, dtype=float).reshape(-1)
    if len(sims) != vocab.n_hois:
        raise ValueError(f"expected {vocab.n_hois} similarities, got {len(sims)}")
    support = valid_support(object_category, vocab, validity, config.restriction)
    if len(support) == 0:
        raise ValueError(
            f"object {object_category} has no valid action under restriction {config.restriction!r}"
        )
    try:
        idx = [vocab.hoi_index(a, object_category) for a in support]
    except KeyError as err:
        raise ValueError(f"validity matrix admits a combination missing from the vocabulary: {err}") from None
    logits = config.gamma * sims[idx]
    logits -= logits.max()
    weights = np.exp(logits)
    probs = np.zeros(vocab.n_actions)
    probs[support] = weights / weights.sum()
    return ActionDistribution(probs, tuple(int(a) for a in support))


def clip_classify(similarities, object_category: int, vocab: Vocabulary, validity: ValidityMatrix,
                  gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """Teacher action scores for one pair, e.g. to replace a detector's action head."""
    return distill_target(similarities, object_category, vocab, validity, DistillConfig(gamma, "all")).probs


def build_targets(
    result: MatchResult,
    similarities: Mapping[int, np.ndarray],
    vocab: Vocabulary,
    validity: ValidityMatrix,
    config: DistillConfig = DistillConfig(),
) -> Dict[int, ActionDistribution]:
    """Targets for the seen-match and potential queries of a match result.

    Validity is looked up with the matched ground-truth object category.
    ``similarities`` maps query index to its per-HOI similarity vector.
    """
    out: Dict[int, ActionDistribution] = {}
    for q in result.queries(*SELECTED):
        if q not in similarities:
            raise KeyError(f"scene {result.scene_id}: no similarities for query {q}")
        category = result.matched_target(q).object_category
        out[q] = distill_target(similarities[q], category, vocab, validity, config)
    return out


def predicted_category(object_scores) -> int:
    """Most likely object category, ignoring the trailing background slot."""
    return int(np.argmax(np.asarray(object_scores)[:-1]))


def classify_predictions(preds, similarities: Mapping[int, np.ndarray], vocab: Vocabulary,
                         validity: ValidityMatrix, gamma: float = DEFAULT_GAMMA,
                         queries: Optional[Sequence[int]] = None) -> np.ndarray:
    """Teacher action scores for each query, masked by its predicted object category.

    Queries without similarities or whose predicted object admits no action
    keep an all-zero row.
    """
    queries = range(len(preds)) if queries is None else queries
    scores = np.zeros((len(preds), vocab.n_actions))
    for q in queries:
        if q not in similarities:
            continue
        category = predicted_category(preds.object_scores[q])
        if len(valid_support(category, vocab, validity)) == 0:
            continue
        scores[q] = clip_classify(similarities[q], category, vocab, validity, gamma)
    return scores
