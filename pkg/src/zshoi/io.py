"""Record files.

Every record file is line-delimited JSON. The first line is a header
``{"schema": <name>, "version": <int>}``; each following non-blank line is
one record. Field names per schema are listed in ``FIELDS`` and documented
in the README. Readers report the offending line number on any schema or
precondition violation.

The validity prior is a CSV table instead: a header row ``action,<object
names...>`` followed by one row of 0/1 flags per action.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple

import numpy as np

from .distillation import ActionDistribution, ValidityMatrix, Vocabulary, normalize_embedding
from .evaluation import Detection, EvalReport, SplitConfig
from .losses import LossBreakdown
from .matching import ISTarget, MatchLabel, MatchResult
from .scene import GroundTruthScene, HOIAnnotation, PredictionSet

VERSION = 1

SCENES = "zshoi/scenes"
PREDICTIONS = "zshoi/predictions"
MATCHES = "zshoi/matches"
VOCABULARY = "zshoi/vocabulary"
EMBEDDINGS = "zshoi/embeddings"
SIMILARITIES = "zshoi/similarities"
TARGETS = "zshoi/targets"
DETECTIONS = "zshoi/detections"
LOSSES = "zshoi/losses"

FIELDS = {
    SCENES: ("scene_id", "width", "height", "boxes", "categories", "humans", "objects", "hois"),
    PREDICTIONS: ("scene_id", "human_boxes", "object_boxes", "object_scores", "action_scores", "is_scores"),
    MATCHES: ("scene_id", "labels", "is_targets", "stage1", "stage2", "seen_pairs", "unknown_pairs"),
    VOCABULARY: ("kind", "index", "name", "seen", "action", "object"),
    EMBEDDINGS: ("id", "vector"),
    SIMILARITIES: ("id", "vector"),
    TARGETS: ("id", "scene_id", "query", "object_category", "support", "probs"),
    DETECTIONS: ("scene_id", "human_box", "object_box", "object_category", "action", "score"),
    LOSSES: ("scene_id", "L_b", "L_u", "L_c", "L_a", "L_is", "L_clip", "total"),
}


class RecordError(ValueError):
    """A record file violates its schema; the message names file and line."""


def pair_id(scene_id: str, query: int) -> str:
    return f"{scene_id}/{query}"


def split_pair_id(rid: str) -> Tuple[str, int]:
    scene_id, _, query = str(rid).rpartition("/")
    if not scene_id or not query.isdigit():
        raise ValueError(f"pair id {rid!r} is not of the form <scene_id>/<query>")
    return scene_id, int(query)


def write_records(path, schema: str, records: Iterable[Mapping]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"schema": schema, "version": VERSION}) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":"), allow_nan=False) + "\n")
            n += 1
    return n


def read_records(path, schema: str) -> Iterator[Tuple[int, dict]]:
    """Yield ``(line number, record)`` pairs after checking the header."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header_seen = False
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise RecordError(f"{path}:{lineno}: malformed JSON ({err.msg})") from None
            if not isinstance(obj, dict):
                raise RecordError(f"{path}:{lineno}: expected a JSON object")
            if not header_seen:
                if obj.get("schema") != schema:
                    raise RecordError(f"{path}:{lineno}: expected schema {schema!r}, found {obj.get('schema')!r}")
                if obj.get("version") != VERSION:
                    raise RecordError(f"{path}:{lineno}: unsupported version {obj.get('version')!r}")
                header_seen = True
                continue
            unknown = set(obj) - set(FIELDS[schema])
            if unknown:
                raise RecordError(f"{path}:{lineno}: unknown fields {sorted(unknown)}")
            yield lineno, obj
        if not header_seen:
            raise RecordError(f"{path}: empty file, missing {schema!r} header")


def _load(path, schema, parse):
    out = []
    for lineno, rec in read_records(path, schema):
        try:
            out.append(parse(rec))
        except (KeyError, TypeError, ValueError, IndexError) as err:
            detail = f"missing field {err}" if isinstance(err, KeyError) else str(err)
            raise RecordError(f"{path}:{lineno}: {detail}") from None
    return out


# scenes

def scene_to_record(scene: GroundTruthScene) -> dict:
    return {
        "scene_id": scene.scene_id,
        "width": float(scene.width),
        "height": float(scene.height),
        "boxes": scene.boxes.tolist(),
        "categories": scene.categories.tolist(),
        "humans": list(scene.humans),
        "objects": list(scene.objects),
        "hois": [[a.human, a.object, a.action, bool(a.seen)] for a in scene.annotations],
    }


def scene_from_record(rec: dict) -> GroundTruthScene:
    anns = []
    for item in rec.get("hois", []):
        h, o, a, *rest = item
        anns.append(HOIAnnotation(int(h), int(o), int(a), bool(rest[0]) if rest else True))
    return GroundTruthScene(
        scene_id=str(rec["scene_id"]),
        width=float(rec["width"]),
        height=float(rec["height"]),
        boxes=np.asarray(rec["boxes"], dtype=float).reshape(-1, 4),
        categories=np.asarray(rec["categories"], dtype=int),
        humans=tuple(rec["humans"]),
        objects=tuple(rec["objects"]) if "objects" in rec else None,
        annotations=tuple(anns),
    )


def write_scenes(path, scenes: Iterable[GroundTruthScene]) -> int:
    return write_records(path, SCENES, (scene_to_record(s) for s in scenes))


def read_scenes(path) -> List[GroundTruthScene]:
    return _load(path, SCENES, scene_from_record)


# predictions

def predictions_to_record(preds: PredictionSet) -> dict:
    return {
        "scene_id": preds.scene_id,
        "human_boxes": preds.human_boxes.tolist(),
        "object_boxes": preds.object_boxes.tolist(),
        "object_scores": preds.object_scores.tolist(),
        "action_scores": preds.action_scores.tolist(),
        "is_scores": preds.is_scores.tolist(),
    }


def predictions_from_record(rec: dict) -> PredictionSet:
    return PredictionSet(
        human_boxes=rec["human_boxes"],
        object_boxes=rec["object_boxes"],
        object_scores=rec["object_scores"],
        action_scores=rec["action_scores"],
        is_scores=rec["is_scores"],
        scene_id=str(rec["scene_id"]),
    )


def write_predictions(path, preds: Iterable[PredictionSet]) -> int:
    return write_records(path, PREDICTIONS, (predictions_to_record(p) for p in preds))


def read_predictions(path) -> List[PredictionSet]:
    return _load(path, PREDICTIONS, predictions_from_record)


# matches

def match_to_record(result: MatchResult) -> dict:
    return {
        "scene_id": result.scene_id,
        "labels": [lab.value for lab in result.labels],
        "is_targets": None if result.is_targets is None else [t.value for t in result.is_targets],
        "stage1": [list(p) for p in result.stage1.pairs],
        "stage2": [list(p) for p in result.stage2.pairs],
        "seen_pairs": [list(p.key) for p in result.seen_pairs],
        "unknown_pairs": [list(p.key) for p in result.unknown_pairs],
    }


def write_matches(path, results: Iterable[MatchResult]) -> int:
    return write_records(path, MATCHES, (match_to_record(r) for r in results))


def read_match_records(path) -> List[dict]:
    def parse(rec):
        rec = dict(rec)
        rec["labels"] = [MatchLabel(v) for v in rec["labels"]]
        if rec.get("is_targets") is not None:
            rec["is_targets"] = [ISTarget(v) for v in rec["is_targets"]]
        return rec

    return _load(path, MATCHES, parse)


# vocabulary and validity

def vocabulary_to_records(vocab: Vocabulary) -> List[dict]:
    recs = [{"kind": "action", "index": i, "name": n, "seen": s}
            for i, (n, s) in enumerate(zip(vocab.actions, vocab.action_seen))]
    recs += [{"kind": "object", "index": i, "name": n} for i, n in enumerate(vocab.objects)]
    recs += [{"kind": "hoi", "index": i, "action": a, "object": o} for i, (a, o) in enumerate(vocab.hois)]
    return recs


def write_vocabulary(path, vocab: Vocabulary) -> int:
    return write_records(path, VOCABULARY, vocabulary_to_records(vocab))


def read_vocabulary(path) -> Vocabulary:
    actions: Dict[int, Tuple[str, bool]] = {}
    objects: Dict[int, str] = {}
    hois: Dict[int, Tuple[int, int]] = {}
    for lineno, rec in read_records(path, VOCABULARY):
        try:
            kind, idx = rec["kind"], int(rec["index"])
            target = {"action": actions, "object": objects, "hoi": hois}.get(kind)
            if target is None:
                raise ValueError(f"unknown kind {kind!r}")
            if idx in target:
                raise ValueError(f"duplicate {kind} index {idx}")
            if kind == "action":
                actions[idx] = (str(rec["name"]), bool(rec.get("seen", True)))
            elif kind == "object":
                objects[idx] = str(rec["name"])
            else:
                hois[idx] = (int(rec["action"]), int(rec["object"]))
        except (KeyError, TypeError, ValueError) as err:
            detail = f"missing field {err}" if isinstance(err, KeyError) else str(err)
            raise RecordError(f"{path}:{lineno}: {detail}") from None
    for kind, table in (("action", actions), ("object", objects), ("hoi", hois)):
        if sorted(table) != list(range(len(table))):
            raise RecordError(f"{path}: {kind} indices are not contiguous from 0")
    try:
        return Vocabulary(
            actions=tuple(actions[i][0] for i in range(len(actions))),
            objects=tuple(objects[i] for i in range(len(objects))),
            hois=tuple(hois[i] for i in range(len(hois))),
            action_seen=tuple(actions[i][1] for i in range(len(actions))),
        )
    except ValueError as err:
        raise RecordError(f"{path}: {err}") from None


def write_validity(path, validity: ValidityMatrix, vocab: Vocabulary):
    validity.check(vocab)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["action", *vocab.objects])
        for name, row in zip(vocab.actions, validity.valid):
            writer.writerow([name, *(int(v) for v in row)])


def read_validity(path, vocab: Vocabulary) -> ValidityMatrix:
    """Read a 0/1 table, reordering rows and columns to the vocabulary's order."""
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise RecordError(f"{path}: empty validity table")
    header = rows[0][1:]
    if sorted(header) != sorted(vocab.objects) or len(set(header)) != len(header):
        raise RecordError(f"{path}:1: object columns do not match the vocabulary")
    valid = np.zeros((vocab.n_actions, vocab.n_objects), dtype=bool)
    seen_actions = set()
    action_index = {name: i for i, name in enumerate(vocab.actions)}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        name, flags = row[0], row[1:]
        if name not in action_index or name in seen_actions:
            raise RecordError(f"{path}:{lineno}: unknown or duplicate action {name!r}")
        if len(flags) != len(header) or any(f not in ("0", "1") for f in flags):
            raise RecordError(f"{path}:{lineno}: expected {len(header)} flags of 0/1")
        seen_actions.add(name)
        for obj_name, f in zip(header, flags):
            valid[action_index[name], vocab.objects.index(obj_name)] = f == "1"
    if len(seen_actions) != vocab.n_actions:
        raise RecordError(f"{path}: missing rows for actions {sorted(set(vocab.actions) - seen_actions)}")
    return ValidityMatrix(valid)


# embeddings and similarities

def write_vectors(path, schema: str, items: Iterable[Tuple[object, Sequence[float]]]) -> int:
    return write_records(path, schema, ({"id": rid, "vector": [float(x) for x in vec]} for rid, vec in items))


def read_vectors(path, schema: str = SIMILARITIES) -> Dict[object, np.ndarray]:
    out: Dict[object, np.ndarray] = {}
    for lineno, rec in read_records(path, schema):
        try:
            rid, vec = rec["id"], np.asarray(rec["vector"], dtype=float)
            if vec.ndim != 1 or not np.all(np.isfinite(vec)):
                raise ValueError("vector must be a flat list of finite numbers")
            if rid in out:
                raise ValueError(f"duplicate id {rid!r}")
            if schema == EMBEDDINGS:
                vec = normalize_embedding(vec, name=f"embedding {rid!r}")
        except (KeyError, TypeError, ValueError) as err:
            detail = f"missing field {err}" if isinstance(err, KeyError) else str(err)
            raise RecordError(f"{path}:{lineno}: {detail}") from None
        out[rid] = vec
    return out


def read_embeddings(path) -> Dict[object, np.ndarray]:
    return read_vectors(path, EMBEDDINGS)


def read_similarities(path) -> Dict[object, np.ndarray]:
    return read_vectors(path, SIMILARITIES)


def group_by_scene(vectors: Mapping[object, np.ndarray]) -> Dict[str, Dict[int, np.ndarray]]:
    """Regroup ``<scene_id>/<query>`` keyed vectors into ``{scene_id: {query: vector}}``."""
    out: Dict[str, Dict[int, np.ndarray]] = {}
    for rid, vec in vectors.items():
        sid, q = split_pair_id(rid)
        out.setdefault(sid, {})[q] = vec
    return out


# distillation targets

def write_targets(path, targets: Iterable[Tuple[str, int, int, ActionDistribution]]) -> int:
    return write_records(path, TARGETS, (
        {
            "id": pair_id(sid, q),
            "scene_id": sid,
            "query": q,
            "object_category": cat,
            "support": list(t.support),
            "probs": t.probs.tolist(),
        }
        for sid, q, cat, t in targets
    ))


def read_targets(path) -> Dict[str, Dict[int, ActionDistribution]]:
    out: Dict[str, Dict[int, ActionDistribution]] = {}
    for rec in _load(path, TARGETS, lambda r: r):
        dist = ActionDistribution(np.asarray(rec["probs"], dtype=float), tuple(int(a) for a in rec["support"]))
        out.setdefault(str(rec["scene_id"]), {})[int(rec["query"])] = dist
    return out


# detections, losses, reports

def detection_to_record(d: Detection) -> dict:
    return {
        "scene_id": d.scene_id,
        "human_box": d.human_box.tolist(),
        "object_box": d.object_box.tolist(),
        "object_category": int(d.object_category),
        "action": int(d.action),
        "score": float(d.score),
    }


def write_detections(path, dets: Iterable[Detection]) -> int:
    return write_records(path, DETECTIONS, (detection_to_record(d) for d in dets))


def read_detections(path) -> List[Detection]:
    def parse(rec):
        score = float(rec["score"])
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"score {score} outside [0, 1]")
        return Detection(str(rec["scene_id"]), rec["human_box"], rec["object_box"],
                         int(rec["object_category"]), int(rec["action"]), score)

    return _load(path, DETECTIONS, parse)


def write_losses(path, rows: Iterable[Tuple[str, LossBreakdown]]) -> int:
    return write_records(path, LOSSES, ({"scene_id": sid, **b.as_dict()} for sid, b in rows))


def read_splits(path, vocab: Vocabulary) -> SplitConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise RecordError(f"{path}:{err.lineno}: malformed split config ({err.msg})") from None
    try:
        return SplitConfig.from_dict(data, vocab)
    except (TypeError, ValueError) as err:
        raise RecordError(f"{path}: {err}") from None


def write_splits(path, splits: SplitConfig):
    Path(path).write_text(json.dumps(splits.to_dict(), indent=1) + "\n", encoding="utf-8")


def write_report(directory, report: EvalReport, vocab: Vocabulary = None) -> Tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    txt = directory / "report.txt"
    rec = directory / "report.json"
    txt.write_text(report.format_table(vocab) + "\n", encoding="utf-8")
    rec.write_text(json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8")
    return txt, rec
