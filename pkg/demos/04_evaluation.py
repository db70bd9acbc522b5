"""Triplet mAP and unseen-pair recall on a synthetic corpus."""
# %%
from zshoi import SimConfig, average_precision, evaluate, generate_corpus, unseen_pair_recall
from zshoi.pipeline import detect_corpus

print("AP of TP, FP, TP with two GT:", average_precision([True, False, True], 2))

# %% [markdown]
# More box noise should never help. Ten scenes per level, same seed, so the
# underlying draws are shared and only their scale changes.

# %%
for noise in (0.0, 0.05, 0.1, 0.2):
    c = generate_corpus(SimConfig(seed=0, n_scenes=10, box_noise=noise))
    rep = evaluate(detect_corpus(c.predictions, c.vocab), c.scenes, c.vocab, c.splits)
    print(f"box noise {noise:<5} mAP full={rep.map['full']:.4f} unseen={rep.map['unseen']:.4f}")

# %%
print(rep.format_table(c.vocab))

# %% [markdown]
# U-R@K asks whether an unseen pair appears among the K queries with the
# highest interactive score. It can only grow with K.

# %%
preds = {p.scene_id: p for p in c.predictions}
for k in (1, 3, 5, 10):
    print(f"U-R@{k}: {unseen_pair_recall(preds, c.scenes, k):.3f}")
