import numpy as np
import pytest

from zshoi import GroundTruthScene, HOIAnnotation, PredictionSet, Vocabulary
from zshoi.distillation import ValidityMatrix


def make_preds(human_boxes, object_boxes, categories, n_classes=3, n_actions=3, is_scores=None,
               action_scores=None, conf=1.0, scene_id="s"):
    """Prediction set whose object head puts ``conf`` on the given categories."""
    n = len(human_boxes)
    obj = np.full((n, n_classes + 1), (1.0 - conf) / n_classes)
    for q, c in enumerate(categories):
        obj[q] = (1.0 - conf) / n_classes
        obj[q, c] = conf
    obj[:, -1] = 1.0 - obj[:, :-1].sum(axis=1)
    obj = np.clip(obj, 0.0, 1.0)
    acts = np.zeros((n, n_actions)) if action_scores is None else np.asarray(action_scores, dtype=float)
    iss = np.full(n, 0.9) if is_scores is None else np.asarray(is_scores, dtype=float)
    return PredictionSet(np.asarray(human_boxes, float), np.asarray(object_boxes, float), obj, acts, iss,
                         scene_id=scene_id)


def random_scene(rng, max_pairs=6, max_seen=3, max_unknown=3, scene_id="r"):
    """A small scene with disjoint boxes and bounded seen / unknown pair counts."""
    while True:
        n_h = int(rng.integers(1, 3))
        n_o = int(rng.integers(1, 3))
        n_boxes = n_h + n_o
        objects = list(range(n_h, n_boxes))
        if n_h == 2 and rng.random() < 0.5:
            objects = [1] + objects  # the second person can be the first one's object
        pairs = [(h, o) for h in range(n_h) for o in objects if o != h]
        if len(pairs) > max_pairs:
            continue
        n_seen = int(rng.integers(0, min(max_seen, len(pairs)) + 1))
        if len(pairs) - n_seen > max_unknown:
            continue
        break
    boxes = []
    for i in range(n_boxes):
        x0 = 60.0 * i + rng.uniform(0, 10)
        y0 = rng.uniform(0, 40)
        boxes.append([x0, y0, x0 + rng.uniform(20, 45), y0 + rng.uniform(20, 60)])
    categories = [0] * n_h + [int(c) for c in rng.integers(1, 3, n_o)]
    chosen = rng.permutation(len(pairs))[:n_seen]
    anns = []
    for i in chosen:
        h, o = pairs[i]
        for a in sorted(rng.choice(3, size=int(rng.integers(1, 3)), replace=False)):
            anns.append(HOIAnnotation(h, o, int(a), True))
    return GroundTruthScene(scene_id, 60.0 * n_boxes + 50, 120.0, np.array(boxes), np.array(categories),
                            tuple(range(n_h)), tuple(anns), tuple(objects))


def random_preds(rng, scene, n):
    """Noisy copies of ground-truth pairs mixed with random boxes and scores."""
    boxes = scene.boxes
    pairs = scene.all_pairs()
    hb, ob, cats = [], [], []
    for _ in range(n):
        if rng.random() < 0.7:
            h, o = pairs[int(rng.integers(len(pairs)))]
            hb.append(boxes[h] + rng.normal(0, 4, 4))
            ob.append(boxes[o] + rng.normal(0, 4, 4))
        else:
            for out in (hb, ob):
                x0, y0 = rng.uniform(0, scene.width - 40), rng.uniform(0, 60)
                out.append([x0, y0, x0 + rng.uniform(10, 40), y0 + rng.uniform(10, 50)])
        cats.append(int(rng.integers(0, 3)))
    fix = lambda b: np.column_stack([np.minimum(b[:, 0], b[:, 2]), np.minimum(b[:, 1], b[:, 3]),
                                     np.maximum(b[:, 0], b[:, 2]), np.maximum(b[:, 1], b[:, 3])])
    obj = rng.dirichlet(np.ones(4), n)
    return PredictionSet(fix(np.array(hb)), fix(np.array(ob)), obj, rng.uniform(0, 1, (n, 3)),
                         np.round(rng.uniform(0, 1, n), 1), scene_id=scene.scene_id)


@pytest.fixture
def tiny_vocab():
    # actions 0,1 seen; 2 unseen. objects: person, cup, horse
    return Vocabulary(("hold", "ride", "feed"), ("person", "cup", "horse"),
                      ((0, 1), (2, 1), (0, 2), (1, 2), (2, 2)), (True, True, False))


@pytest.fixture
def tiny_validity(tiny_vocab):
    return ValidityMatrix.from_vocabulary(tiny_vocab)


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the lines are echoed in the terminal summary."""
    def record(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        _CRITERIA.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
