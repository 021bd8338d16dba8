"""Generate a synthetic corpus and inspect the attribute-novelty split.

Items get Zipf-imbalanced binary attributes and unit feature vectors built
from per-attribute prototype directions. The split claims items in the order
test -> val -> train -> pretrain, so each later phase introduces attributes
with no positive examples anywhere earlier — the attributes active learning
is supposed to pick up.
"""

import numpy as np

from attrquest import GenConfig, generate_corpus, make_split_corpus

cfg = GenConfig()  # D=64, 40 attributes (24/4/6/6), 4000 items
corpus = generate_corpus(cfg, seed=0)
split = make_split_corpus(corpus, ratio=0.6, seed=0)

labels = corpus.label_matrix()
counts = labels.sum(axis=0)
print(f"{len(corpus)} items, {corpus.num_attributes} attributes, dim {corpus.dim}")
print(f"attribute positives: min {counts.min()}, median {int(np.median(counts))}, "
      f"max {counts.max()}  (heavy imbalance by design)")

for name in ("pretrain", "train", "val", "test"):
    ids = split.ids(name)
    tr = split.ids(name, "classifier_training")
    te = split.ids(name, "classifier_test")
    print(f"policy_{name:8s}: {len(ids):4d} items "
          f"({len(tr)} classifier_training / {len(te)} classifier_test)")

# novelty check: test-partition attributes have zero positives outside policy_test
test_attrs = list(corpus.catalog.test)
outside = [i for i in range(len(corpus)) if split.split_of(i) != "test"]
print("test-attribute positives outside policy_test:",
      int(labels[np.array(outside)][:, test_attrs].sum()), "(must be 0)")

example = corpus.items[0]
print(f"\nitem 0: positives {sorted(np.flatnonzero(example.labels).tolist())}, "
      f"description {sorted(example.description)} (a subset of the positives)")
