"""The full chain in memory: simulate, match, distill, loss, evaluate.

Equivalent to running the CLI subcommands in order, without the files.
"""
# %%
from collections import Counter

from zshoi import SimConfig, evaluate, generate_corpus
from zshoi.io import group_by_scene
from zshoi.pipeline import detect_corpus, distill_corpus, loss_corpus, match_corpus

corpus = generate_corpus(SimConfig(seed=7, n_scenes=50))
print(len(corpus.scenes), "scenes,", corpus.vocab.n_hois, "HOI categories")

# %%
mask = corpus.vocab.seen_mask
results = match_corpus(corpus.scenes, corpus.predictions, action_mask=mask)
print(Counter(label.value for r in results for label in r.labels))

# %%
targets = distill_corpus(results, group_by_scene(corpus.similarities), corpus.vocab, corpus.validity)
_, overall = loss_corpus(corpus.scenes, corpus.predictions, results, targets, action_mask=mask)
print(overall)

# %%
report = evaluate(detect_corpus(corpus.predictions, corpus.vocab), corpus.scenes, corpus.vocab, corpus.splits)
print(report.format_table(corpus.vocab))
