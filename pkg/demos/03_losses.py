"""Individual loss terms and the weighted total."""
# %%
import numpy as np

from zshoi import LossWeights, total_loss
from zshoi.losses import action_loss, box_losses, interactive_score_loss, object_class_loss
from zshoi.matching import ISTarget, MatchLabel

gt = [[0, 0, 10, 20]]
print("perfect boxes:", box_losses(gt, gt, gt, gt, (100, 100)))
print("shifted boxes:", box_losses([[2, 0, 12, 20]], gt, gt, gt, (100, 100)))

# %% [markdown]
# The interactive-score loss skips ignored queries entirely, so only the
# first two predictions below contribute.

# %%
targets = [ISTarget.POSITIVE, ISTarget.NEGATIVE, ISTarget.IGNORE]
print("L_is:", interactive_score_loss([0.5, 0.5, 0.99], targets), "vs ln 2 =", np.log(2))

# %%
print("L_c:", object_class_loss([[0.7, 0.2, 0.1]], [0]))
print("L_a:", action_loss([[0.9, 0.2, 0.5]], [[1, 0, 0]], [MatchLabel.SEEN_MATCH]))

# %% [markdown]
# The distillation term carries a very large weight by default, so even a
# small mismatch dominates the total.

# %%
parts = {"L_b": 0.2, "L_u": 0.5, "L_c": 2.4, "L_a": 0.08, "L_is": 0.3, "L_clip": 0.38}
w = LossWeights()
print(w)
print(total_loss(parts, w))
