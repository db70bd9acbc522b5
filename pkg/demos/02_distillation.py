"""Turning pair/text similarities into a soft action target."""
# %%
import numpy as np

from zshoi import DistillConfig, ValidityMatrix, Vocabulary, clip_classify, distill_target, hoi_prompt

vocab = Vocabulary(
    actions=("hold", "ride", "feed"),
    objects=("person", "cup", "horse"),
    hois=((0, 1), (2, 1), (0, 2), (1, 2), (2, 2)),
    action_seen=(True, True, False),
)
validity = ValidityMatrix.from_vocabulary(vocab)
print([hoi_prompt(vocab.actions[a], vocab.objects[o]) for a, o in vocab.hois])

# %% [markdown]
# Only "hold cup" and "feed cup" are valid for a cup. A similarity gap of
# 0.1 at the default sharpness is already nearly one-hot.

# %%
sims = np.array([0.3, 0.2, 0.9, 0.9, 0.9])  # the horse entries are ignored for a cup
d = distill_target(sims, object_category=1, vocab=vocab, validity=validity)
print("support", d.support, "probs", d.probs.round(6))

for gamma in (1, 10, 100):
    p = distill_target(sims, 1, vocab, validity, DistillConfig(gamma)).probs
    print(f"gamma={gamma:<4} hold={p[0]:.4f} feed={p[2]:.4f}")

# %% [markdown]
# Restricting to unseen actions leaves only "feed" for the cup.

# %%
print(distill_target(sims, 1, vocab, validity, DistillConfig(restriction="unseen_only")).probs)
print("argmax action:", vocab.actions[int(np.argmax(clip_classify(sims, 1, vocab, validity)))])
