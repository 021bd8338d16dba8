"""Beliefs, guessing, and question quality on a toy candidate set.

The belief multiplies per-attribute probabilities for description and
clarified-positive attributes (and complements for clarified-negative ones).
Information gain measures how much a yes/no question is expected to sharpen
it: questions whose answer distribution is the same for every candidate are
worthless.
"""

import numpy as np

from attrquest import belief_summary, compute_belief, guess, info_gain, update_belief

# four candidates, three attributes; candidate 0 is the "striped red shirt"
P = np.array([
    [0.9, 0.8, 0.5],   # candidate 0
    [0.9, 0.2, 0.5],   # candidate 1: not striped
    [0.2, 0.8, 0.5],   # candidate 2: not red
    [0.2, 0.2, 0.5],   # candidate 3: neither
])

b = compute_belief(P, w_d={0}, w_p=set(), w_n=set())   # description: "red"
print("belief after description {red}:", np.round(b, 3))
summary = belief_summary(b)
print(f"entropy {summary.entropy:.3f}, top {summary.top:.3f}, "
      f"gap to second {summary.top_gap:.3f}")

for w, name in [(1, "striped"), (2, "fitted")]:
    print(f"info gain of asking '{name}':", round(info_gain(b, P[:, w]), 4))

b_yes = update_belief(b, P[:, 1], answer_yes=True)
print("belief after 'striped? yes':", np.round(b_yes, 3))
print("guess:", guess(b_yes), "(candidate index)")

# incremental updates agree with recomputing from the full evidence sets
batch = compute_belief(P, w_d={0}, w_p={1}, w_n=set())
print("max |incremental - batch|:", float(np.max(np.abs(b_yes - batch))))
