"""Acceptance suite: one PASS/FAIL line per criterion.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""
import filecmp
import math
import sys
import tempfile
import time
from pathlib import Path

import mpmath
import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from conftest import make_preds, random_preds, random_scene  # noqa: E402
from oracles import brute_two_stage, reference_evaluate  # noqa: E402

from zshoi.assignment import CostWeights, brute_force_assignment, hungarian  # noqa: E402
from zshoi.cli import main as cli  # noqa: E402
from zshoi.distillation import ActionDistribution, DistillConfig, ValidityMatrix, Vocabulary, distill_target  # noqa: E402
from zshoi.evaluation import Detection, average_precision, evaluate, unseen_pair_recall  # noqa: E402
from zshoi.losses import (  # noqa: E402
    LossWeights,
    action_loss,
    box_losses,
    clip_distill_loss,
    interactive_score_loss,
    object_class_loss,
    total_loss,
)
from zshoi.matching import ISTarget, MatchLabel, two_stage_match  # noqa: E402
from zshoi.pipeline import detect_corpus, match_corpus  # noqa: E402
from zshoi.scene import GroundTruthScene, HOIAnnotation  # noqa: E402
from zshoi.sim import SimConfig, generate_corpus  # noqa: E402

PARTS = ("L_b", "L_u", "L_c", "L_a", "L_is", "L_clip")


def check_hungarian_oracle(n=1000):
    rng = np.random.default_rng(20240501)
    start = time.perf_counter()
    bad = 0
    for i in range(n):
        cols = int(rng.integers(1, 8))
        rows = int(rng.integers(1, 9))
        # every third matrix has small integer entries, which forces ties
        c = rng.integers(0, 3, (rows, cols)).astype(float) if i % 3 == 0 else rng.normal(size=(rows, cols))
        h, b = hungarian(c), brute_force_assignment(c)
        bad += not (h.cost == b.cost and h.pairs == b.pairs)
    elapsed = time.perf_counter() - start
    return bad == 0 and elapsed < 10, f"{n} matrices, {bad} mismatches, {elapsed:.2f}s"


def check_two_stage_oracle(n=250):
    bad = 0
    for seed in range(n):
        rng = np.random.default_rng(seed)
        scene = random_scene(rng, scene_id=f"r{seed}")
        m = len(scene.seen_pairs())
        preds = random_preds(rng, scene, int(rng.integers(max(m, 1), 7)))
        assert m <= 3 and len(scene.all_pairs()) - m <= 3 and len(preds) <= 6
        topk = int(rng.integers(0, 4))
        thres = float(rng.choice([0.0, 0.3, 0.5, 0.8]))
        mask = np.array([True, True, False])
        r = two_stage_match(scene, preds, CostWeights(), topk, thres, mask)
        o = brute_two_stage(scene, preds, CostWeights(), topk, thres, mask)
        bad += list(r.labels) != o["labels"] or list(r.is_targets) != o["targets"]
    return bad == 0, f"{n} scenes (M<=3, K<=3, N<=6), {bad} label mismatches"


def check_distillation(n=10_000):
    vocab = Vocabulary(("hold", "ride", "feed"), ("person", "cup", "horse"),
                       ((0, 1), (2, 1), (0, 2), (1, 2), (2, 2)), (True, True, False))
    validity = ValidityMatrix.from_vocabulary(vocab)
    s = np.zeros(vocab.n_hois)
    s[vocab.hoi_index(0, 1)], s[vocab.hoi_index(2, 1)] = 0.3, 0.2
    p = distill_target(s, 1, vocab, validity).probs
    mpmath.mp.dps = 50
    ref = 1 / (1 + mpmath.exp(-10))
    worked = abs(p[0] - float(ref)) <= 1e-8 and abs(p[2] - float(1 - ref)) <= 1e-8

    rng = np.random.default_rng(7)
    n_act, n_obj = 12, 8
    worst, leaks = 0.0, 0
    for _ in range(n):
        valid = rng.random((n_act, n_obj)) < 0.4
        obj = int(rng.integers(n_obj))
        valid[int(rng.integers(n_act)), obj] = True
        hois = tuple((a, o) for a in range(n_act) for o in range(n_obj) if valid[a, o])
        v = Vocabulary(tuple(f"a{i}" for i in range(n_act)), tuple(f"o{i}" for i in range(n_obj)), hois,
                       tuple(i < 8 for i in range(n_act)))
        d = distill_target(rng.uniform(-1, 1, len(hois)), obj, v, ValidityMatrix(valid),
                           DistillConfig(float(rng.uniform(1, 200))))
        worst = max(worst, abs(d.probs[list(d.support)].sum() - 1))
        leaks += int(np.count_nonzero(d.probs[~valid[:, obj]]))
    ok = worked and worst <= 1e-9 and leaks == 0
    return ok, (f"worked example p=({p[0]:.9f}, {p[2]:.9f}); {n} random inputs: "
                f"max |sum-1|={worst:.1e}, off-support nonzeros={leaks}")


def check_loss_identities():
    S = MatchLabel.SEEN_MATCH
    b = [[0, 0, 5, 5]]
    zeros = {
        "L_b/L_u": box_losses(b, b, b, b, (10, 10)),
        "L_c": object_class_loss([[0, 1, 0], [0, 0, 1]], [1, 2]),
        "L_a": action_loss([[1, 0, 1]], [[1, 0, 1]], [S]),
        "L_is": interactive_score_loss([1.0, 0.0, 0.3], [ISTarget.POSITIVE, ISTarget.NEGATIVE, ISTarget.IGNORE]),
        "L_clip": clip_distill_loss([[0.0, 1.0, 0.4]], [ActionDistribution(np.array([0.0, 1.0, 0.0]), (0, 1))]),
    }
    all_zero = all(np.all(np.asarray(v) == 0.0) for v in zeros.values())
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(2000):
        parts = dict(zip(PARTS, rng.uniform(0, 5, 6)))
        lam = rng.uniform(0, 1000, 6)
        w = LossWeights(lam[0], lam[1], lam[2], lam[4], lam[3], lam[5])
        expected = math.fsum(parts[k] * x for k, x in zip(PARTS, lam))
        worst = max(worst, abs(total_loss(parts, w).total - expected) / max(1.0, abs(expected)))
    d = LossWeights()
    defaults = (d.bbox, d.giou, d.obj, d.is_, d.act, d.clip) == (2.5, 1, 1, 1, 1.6, 700)
    ones = total_loss(dict.fromkeys(PARTS, 1.0)).total
    ok = all_zero and worst <= 1e-12 and defaults and abs(ones - 707.1) <= 1e-12
    return ok, f"perfect configs give 0: {all_zero}; max rel total error {worst:.1e}; defaults ok: {defaults}; all-ones total {ones}"


def check_supervision_fixture():
    H, O1, O2, O3 = [0, 0, 10, 20], [20, 0, 30, 10], [40, 0, 50, 10], [60, 0, 70, 10]
    scene = GroundTruthScene("fx", 100.0, 40.0, [H, O1, O2, O3], [0, 1, 2, 1], (0,), (HOIAnnotation(0, 1, 0),))
    preds = make_preds([H, [80, 25, 84, 29], H, H, H], [O1, [90, 30, 94, 34], O2, O3, O3], [1, 0, 2, 1, 1],
                       is_scores=[0.7, 0.2, 0.9, 0.3, 0.1], action_scores=[[0.9, 0.1, 0.1]] + [[0.1] * 3] * 4)
    preds.object_scores[4] = [0.0, 0.5, 0.0, 0.5]  # a weaker duplicate of query 3: unmatched in both stages
    r = two_stage_match(scene, preds, topk=1, thres_is=0.5)
    want = (ISTarget.POSITIVE, ISTarget.NEGATIVE, ISTarget.POSITIVE, ISTarget.IGNORE, ISTarget.IGNORE)
    oracle = brute_two_stage(scene, preds, CostWeights(), 1, 0.5)
    ok = r.is_targets == want and list(r.is_targets) == oracle["targets"] and r.labels[4] == MatchLabel.OMITTED
    return ok, "labels " + ", ".join(f"q{q}={lab.value}/{t.value}" for q, (lab, t) in enumerate(zip(r.labels, r.is_targets)))


def check_evaluation():
    corpus = generate_corpus(SimConfig(seed=21, n_scenes=30))
    gt = [Detection(s.scene_id, s.boxes[h], s.boxes[o], int(s.categories[o]), a, 1.0)
          for s in corpus.scenes for h, o, a in s.triplets()]
    rep = evaluate(gt, corpus.scenes, corpus.vocab, corpus.splits)
    perfect = all(v == 1.0 for v in rep.map.values() if not math.isnan(v))
    ap = average_precision([True, False, True], 2)
    pairs, fulls = [], []
    for seed in (2, 4, 6):  # 3-scene corpora whose detections are far from perfect
        small = generate_corpus(SimConfig(seed=seed, n_scenes=3, box_noise=0.15, score_noise=0.2))
        dets = detect_corpus(small.predictions, small.vocab)
        mine = evaluate(dets, small.scenes, small.vocab, small.splits)
        ref_ap, ref_map = reference_evaluate(dets, small.scenes, small.vocab, small.splits)
        pairs += [(mine.ap[h], ref_ap[h]) for h in ref_ap] + [(mine.map[k], ref_map[k]) for k in ref_map]
        fulls.append(round(mine.map["full"], 4))
    diff = max((abs(a - b) for a, b in pairs if not (math.isnan(a) and math.isnan(b))), default=0.0)
    nan_ok = all(math.isnan(a) == math.isnan(b) for a, b in pairs)
    ok = perfect and abs(ap - 0.8333) <= 1e-4 and diff <= 1e-9 and nan_ok
    return ok, (f"oracle detections mAP={[round(v, 6) for v in rep.map.values()]}; AP[TP,FP,TP]={ap:.6f}; "
                f"second implementation max diff {diff:.1e} (3-scene mAPs {fulls})")


def check_recall_monotone(seeds=20):
    violations = 0
    for seed in range(seeds):
        c = generate_corpus(SimConfig(seed=seed, n_scenes=15, box_noise=0.15, score_noise=0.3))
        preds = {p.scene_id: p for p in c.predictions}
        r3, r5, r10 = (unseen_pair_recall(preds, c.scenes, k) for k in (3, 5, 10))
        if not all(math.isnan(x) for x in (r3, r5, r10)):
            violations += not (r3 <= r5 <= r10)
    return violations == 0, f"{seeds} seeded corpora, {violations} violations of U-R@3 <= U-R@5 <= U-R@10"


def check_sweeps(seeds=20):
    thres_bad = topk_bad = 0
    for seed in range(5):
        c = generate_corpus(SimConfig(seed=100 + seed, n_scenes=10, score_noise=0.3))
        mask = c.vocab.seen_mask

        def potential(**kw):
            return sum(r.count(MatchLabel.POTENTIAL) for r in match_corpus(c.scenes, c.predictions, action_mask=mask, **kw))

        by_t = [potential(thres_is=t) for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
        by_k = [potential(topk=k) for k in (0, 1, 2, 3, 5, 8)]
        thres_bad += any(b > a for a, b in zip(by_t, by_t[1:]))
        topk_bad += any(b < a for a, b in zip(by_k, by_k[1:]))
    levels = (0.0, 0.05, 0.1, 0.2)
    monotone = 0
    means = np.zeros(len(levels))
    for seed in range(seeds):
        row = []
        for bn in levels:
            c = generate_corpus(SimConfig(seed=seed, n_scenes=15, box_noise=bn))
            row.append(evaluate(detect_corpus(c.predictions, c.vocab), c.scenes, c.vocab).map["full"])
        means += np.array(row) / seeds
        monotone += all(b <= a for a, b in zip(row, row[1:]))
    ok = thres_bad == 0 and topk_bad == 0 and monotone > seeds / 2 and all(np.diff(means) <= 0)
    return ok, (f"|POTENTIAL| violations: thres_is {thres_bad}, topk {topk_bad}; "
                f"mAP non-increasing in box noise on {monotone}/{seeds} seeds, mean mAP {np.round(means, 4).tolist()}")


def _pipeline(out):
    argv = [
        ["simulate", "--seed", "13", "--scenes", "12", "--out", out],
        ["match", "--scenes", f"{out}/scenes.jsonl", "--preds", f"{out}/predictions.jsonl",
         "--vocab", f"{out}/vocab.jsonl", "--out", out],
        ["loss", "--scenes", f"{out}/scenes.jsonl", "--preds", f"{out}/predictions.jsonl",
         "--matches", f"{out}/matches.jsonl", "--vocab", f"{out}/vocab.jsonl",
         "--similarities", f"{out}/similarities.jsonl", "--out", out],
        ["eval", "--scenes", f"{out}/scenes.jsonl", "--vocab", f"{out}/vocab.jsonl",
         "--preds", f"{out}/predictions.jsonl", "--splits", f"{out}/splits.json", "--out", out],
    ]
    return all(cli(a) == 0 for a in argv)


def check_determinism():
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        ran = _pipeline(a) and _pipeline(b)
        names = sorted(p.name for p in Path(a).iterdir())
        _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
        ok = ran and names == sorted(p.name for p in Path(b).iterdir()) and not mismatch and not errors
        return ok, f"{len(names)} output files compared byte-for-byte, {len(mismatch) + len(errors)} differ"


CRITERIA = [
    ("hungarian oracle equivalence", check_hungarian_oracle),
    ("two-stage matching oracle", check_two_stage_oracle),
    ("distillation target correctness", check_distillation),
    ("loss identities", check_loss_identities),
    ("interactive supervision rule", check_supervision_fixture),
    ("evaluation oracle", check_evaluation),
    ("U-R@K monotonicity", check_recall_monotone),
    ("sweep properties", check_sweeps),
    ("end-to-end determinism", check_determinism),
]


def test_hungarian_oracle(criterion):
    criterion(CRITERIA[0][0], *check_hungarian_oracle())


def test_two_stage_oracle(criterion):
    criterion(CRITERIA[1][0], *check_two_stage_oracle())


def test_distillation_target(criterion):
    criterion(CRITERIA[2][0], *check_distillation())


def test_loss_identities(criterion):
    criterion(CRITERIA[3][0], *check_loss_identities())


def test_supervision_rule(criterion):
    criterion(CRITERIA[4][0], *check_supervision_fixture())


def test_evaluation_oracle(criterion):
    criterion(CRITERIA[5][0], *check_evaluation())


def test_recall_monotone(criterion):
    criterion(CRITERIA[6][0], *check_recall_monotone())


def test_sweeps(criterion):
    criterion(CRITERIA[7][0], *check_sweeps())


def test_determinism(criterion):
    criterion(CRITERIA[8][0], *check_determinism())


if __name__ == "__main__":
    failed = 0
    for name, check in CRITERIA:
        ok, detail = check()
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    sys.exit(1 if failed else 0)
