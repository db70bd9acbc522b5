"""Command-line entry point: ``zshoi {simulate,match,distill,loss,eval}``.

Each subcommand reads record files, runs one stage and writes its outputs
into ``--out`` (default: ``$ZSHOI_OUT`` or the current directory), then
prints a short summary. Schema or precondition violations exit with status
2 and a diagnostic on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import io
from .assignment import CostWeights
from .distillation import DistillConfig, ValidityMatrix
from .evaluation import DEFAULT_K, evaluate
from .losses import LossWeights
from .matching import MatchLabel
from .pipeline import (
    detect_corpus,
    distill_corpus,
    loss_corpus,
    match_corpus,
    rebuild_match,
    similarities_from_embeddings,
)
from .sim import SimConfig, generate_corpus

OUT_ENV = "ZSHOI_OUT"

FILES = {
    "vocab": "vocab.jsonl",
    "validity": "validity.csv",
    "scenes": "scenes.jsonl",
    "preds": "predictions.jsonl",
    "similarities": "similarities.jsonl",
    "splits": "splits.json",
    "detections": "detections.jsonl",
    "matches": "matches.jsonl",
    "targets": "targets.jsonl",
    "losses": "losses.jsonl",
    "loss_summary": "loss_summary.json",
}


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_validity(args, vocab):
    return io.read_validity(args.validity, vocab) if args.validity else ValidityMatrix.from_vocabulary(vocab)


def _load_similarities(args, vocab):
    if args.similarities and args.embeddings:
        raise ValueError("give either --similarities or --embeddings, not both")
    if args.similarities:
        sims = io.read_similarities(args.similarities)
    elif args.embeddings:
        if not args.text_embeddings:
            raise ValueError("--embeddings needs --text-embeddings")
        sims = similarities_from_embeddings(io.read_embeddings(args.embeddings),
                                            io.read_embeddings(args.text_embeddings), vocab)
    else:
        raise ValueError("need --similarities or --embeddings")
    return io.group_by_scene(sims)


def _load_matches(args, scenes):
    by_id = {s.scene_id: s for s in scenes}
    results = []
    for rec in io.read_match_records(args.matches):
        if rec["scene_id"] not in by_id:
            raise ValueError(f"match record for unknown scene {rec['scene_id']!r}")
        results.append(rebuild_match(rec, by_id[rec["scene_id"]]))
    return results


def _distill_config(args) -> DistillConfig:
    return DistillConfig(args.gamma, args.restrict.replace("-", "_"))


def cmd_simulate(args) -> str:
    cfg = SimConfig(
        seed=args.seed,
        n_scenes=args.scenes,
        box_noise=args.box_noise,
        score_noise=args.score_noise,
        n_queries=args.queries,
    )
    corpus = generate_corpus(cfg)
    out = _out_dir(args)
    io.write_vocabulary(out / FILES["vocab"], corpus.vocab)
    io.write_validity(out / FILES["validity"], corpus.validity, corpus.vocab)
    io.write_scenes(out / FILES["scenes"], corpus.scenes)
    io.write_predictions(out / FILES["preds"], corpus.predictions)
    io.write_vectors(out / FILES["similarities"], io.SIMILARITIES, sorted(corpus.similarities.items()))
    io.write_splits(out / FILES["splits"], corpus.splits)
    n_det = io.write_detections(out / FILES["detections"], detect_corpus(corpus.predictions, corpus.vocab))
    n_seen = sum(len(s.seen_pairs()) for s in corpus.scenes)
    n_unseen = sum(len(s.unseen_pairs()) for s in corpus.scenes)
    return (f"simulated {len(corpus.scenes)} scenes (seed {cfg.seed}): {n_seen} seen pairs, "
            f"{n_unseen} unseen pairs, {n_det} detections -> {out}")


def cmd_match(args) -> str:
    scenes = io.read_scenes(args.scenes)
    preds = io.read_predictions(args.preds)
    mask = io.read_vocabulary(args.vocab).seen_mask if args.vocab else None
    weights = CostWeights(*args.cost_weights)
    results = match_corpus(scenes, preds, weights, args.topk, args.thres_is, mask)
    out = _out_dir(args)
    io.write_matches(out / FILES["matches"], results)
    counts = {lab.value: sum(r.count(lab) for r in results) for lab in MatchLabel}
    return f"matched {len(results)} scenes: " + ", ".join(f"{k}={v}" for k, v in counts.items())


def cmd_distill(args) -> str:
    vocab = io.read_vocabulary(args.vocab)
    validity = _load_validity(args, vocab)
    scenes = io.read_scenes(args.scenes)
    results = _load_matches(args, scenes)
    sims = _load_similarities(args, vocab)
    targets = distill_corpus(results, sims, vocab, validity, _distill_config(args))
    rows = []
    for r in results:
        for q, dist in sorted(targets[r.scene_id].items()):
            rows.append((r.scene_id, q, r.matched_target(q).object_category, dist))
    out = _out_dir(args)
    io.write_targets(out / FILES["targets"], rows)
    return f"wrote {len(rows)} distillation targets for {len(results)} scenes"


def cmd_loss(args) -> str:
    vocab = io.read_vocabulary(args.vocab)
    scenes = io.read_scenes(args.scenes)
    preds = io.read_predictions(args.preds)
    results = _load_matches(args, scenes)
    if args.targets:
        targets = io.read_targets(args.targets)
    else:
        sims = _load_similarities(args, vocab)
        targets = distill_corpus(results, sims, vocab, _load_validity(args, vocab), _distill_config(args))
    weights = LossWeights.from_sequence(args.weights)
    per_scene, total = loss_corpus(scenes, preds, results, targets, weights, vocab.seen_mask, args.reduction)
    out = _out_dir(args)
    io.write_losses(out / FILES["losses"], per_scene)
    (out / FILES["loss_summary"]).write_text(json.dumps(total.as_dict(), indent=1) + "\n", encoding="utf-8")
    return "losses: " + ", ".join(f"{k}={v:.6f}" for k, v in total.as_dict().items())


def cmd_eval(args) -> str:
    vocab = io.read_vocabulary(args.vocab)
    scenes = io.read_scenes(args.scenes)
    preds = io.read_predictions(args.preds) if args.preds else None
    if args.detections:
        dets = io.read_detections(args.detections)
    elif preds is not None:
        dets = detect_corpus(preds, vocab)
    else:
        raise ValueError("need --detections or --preds")
    splits = io.read_splits(args.splits, vocab) if args.splits else None
    k_values = args.k if preds is not None else ()
    pred_map = {p.scene_id: p for p in preds} if preds is not None else None
    report = evaluate(dets, scenes, vocab, splits, k_values, pred_map, args.ap_method)
    io.write_report(_out_dir(args), report, vocab)
    return report.format_table(vocab).split("\n\n")[0]


def _add_out(p):
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")


def _add_distill_inputs(p, required_vocab=True):
    p.add_argument("--vocab", required=required_vocab, help="vocabulary record file")
    p.add_argument("--validity", help="action x object 0/1 CSV (default: the vocabulary's HOI list)")
    p.add_argument("--similarities", help="per-pair HOI similarity records")
    p.add_argument("--embeddings", help="per-pair region embedding records")
    p.add_argument("--text-embeddings", help="per-HOI text embedding records, ids = HOI index")
    p.add_argument("--gamma", type=float, default=100.0)
    p.add_argument("--restrict", choices=("all", "unseen-only"), default="all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zshoi", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a seeded synthetic corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenes", type=int, default=20, help="number of scenes")
    p.add_argument("--box-noise", type=float, default=SimConfig.box_noise)
    p.add_argument("--score-noise", type=float, default=SimConfig.score_noise)
    p.add_argument("--queries", type=int, default=SimConfig.n_queries)
    _add_out(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("match", help="two-stage matching and interactive-score targets")
    p.add_argument("--scenes", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--vocab", help="restricts the action cost to seen actions")
    p.add_argument("--topk", type=int, default=3)
    p.add_argument("--thres-is", type=float, default=0.5)
    p.add_argument("--cost-weights", type=float, nargs=4, default=[2.5, 1.0, 1.0, 1.0],
                   metavar=("BBOX", "GIOU", "OBJ", "ACT"))
    _add_out(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("distill", help="teacher action distributions for matched pairs")
    p.add_argument("--scenes", required=True)
    p.add_argument("--matches", required=True)
    _add_distill_inputs(p)
    _add_out(p)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("loss", help="loss terms and weighted total")
    p.add_argument("--scenes", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--matches", required=True)
    p.add_argument("--targets", help="distillation targets from 'distill'")
    _add_distill_inputs(p)
    p.add_argument("--weights", type=float, nargs=6, default=[2.5, 1.0, 1.0, 1.0, 1.6, 700.0],
                   metavar=("BBOX", "GIOU", "C", "IS", "A", "CLIP"))
    p.add_argument("--reduction", choices=("mean", "sum"), default="mean")
    _add_out(p)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("eval", help="triplet mAP per split and unseen-pair recall")
    p.add_argument("--scenes", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--detections")
    p.add_argument("--preds", help="predictions; enables U-R@K and stands in for --detections")
    p.add_argument("--splits", help="split config JSON")
    p.add_argument("--k", type=int, nargs="+", default=list(DEFAULT_K))
    p.add_argument("--ap-method", choices=("all_point", "11_point"), default="all_point")
    _add_out(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = args.func(args)
    except (ValueError, KeyError, OSError) as err:
        print(f"zshoi {args.command}: error: {err}", file=sys.stderr)
        return 2
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
