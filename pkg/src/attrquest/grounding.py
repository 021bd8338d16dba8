"""Target beliefs over candidate items and question-quality measures.

The belief b(i) is proportional to the product of per-attribute probabilities
for attributes the description or clarifications assert positive, times
(1 - p) for attributes clarified negative. Products of many probabilities
underflow in linear space, so beliefs are computed in log space with a
uniform fallback if all mass vanishes.

Information gain of a candidate yes/no question scores how much the answer
is expected to sharpen the belief; a question whose answer distribution is
identical for every candidate has zero gain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_EPS = 1e-7


@dataclass
class RetrievalConfig:
    c1: float = 0.9        # weight of attribute agreements
    c2: float = 0.1        # weight of disagreements
    rank_cap: int = 200    # full-scale runs use 1000

    def __post_init__(self):
        if not self.c1 > self.c2 >= 0:
            raise ValueError("retrieval weights need c1 > c2 >= 0")


@dataclass(frozen=True)
class BeliefState:
    """Normalized target distribution plus the attribute evidence sets."""

    item_ids: tuple[int, ...]
    b: np.ndarray
    w_d: frozenset[int]
    w_p: frozenset[int]
    w_n: frozenset[int]

    def __post_init__(self):
        sets = (self.w_d, self.w_p, self.w_n)
        total = sum(len(s) for s in sets)
        if len(frozenset().union(*sets)) != total:
            raise ValueError("W_d, W_p, W_n must be pairwise disjoint")


@dataclass
class BeliefSummary:
    entropy: float
    top: float
    second: float
    top_gap: float       # top - second
    mean: float
    top_lead: float      # top - mean

    def as_array(self) -> np.ndarray:
        return np.array([self.entropy, self.top, self.second,
                         self.top_gap, self.mean, self.top_lead])


def _clamped(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def compute_belief(prob_matrix: np.ndarray, w_d, w_p, w_n) -> np.ndarray:
    """Belief over rows of prob_matrix given description and clarification sets."""
    P = np.asarray(prob_matrix, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] == 0:
        raise ValueError("empty active test set")
    positive = sorted(set(w_d) | set(w_p))
    negative = sorted(set(w_n))
    if set(positive) & set(negative):
        raise ValueError("positive and negative attribute sets overlap")
    scores = np.zeros(P.shape[0])
    if positive:
        scores += np.log(_clamped(P[:, positive])).sum(axis=1)
    if negative:
        scores += np.log(_clamped(1.0 - P[:, negative])).sum(axis=1)
    return _normalize_scores(scores)


def _normalize_scores(scores: np.ndarray) -> np.ndarray:
    shifted = np.exp(scores - scores.max())
    total = shifted.sum()
    if not np.isfinite(total) or total <= 0.0:
        return np.full(scores.shape[0], 1.0 / scores.shape[0])
    return shifted / total


def update_belief(b_prev: np.ndarray, p_col: np.ndarray, answer_yes: bool) -> np.ndarray:
    """Multiply in the likelihood of one clarification answer and renormalize."""
    p = _clamped(np.asarray(p_col, dtype=np.float64))
    like = p if answer_yes else 1.0 - p
    unnorm = np.asarray(b_prev, dtype=np.float64) * like
    total = unnorm.sum()
    if not np.isfinite(total) or total <= 0.0:
        return np.full(len(unnorm), 1.0 / len(unnorm))
    return unnorm / total


def guess(b: np.ndarray) -> int:
    """Index of the highest belief; ties go to the lowest index."""
    return int(np.argmax(b))


def info_gain(b: np.ndarray, p_col: np.ndarray) -> float:
    """Expected KL-based sharpening from asking one yes/no attribute question."""
    b = np.asarray(b, dtype=np.float64)
    p = _clamped(np.asarray(p_col, dtype=np.float64))
    support = b > 0.0
    p1 = float((b * p).sum())
    p0 = float((b * (1.0 - p)).sum())
    j = 0.0
    if p1 > 0.0:
        j += float((b[support] * p[support] * np.log(p[support] / p1)).sum())
    if p0 > 0.0:
        j += float((b[support] * (1.0 - p[support]) * np.log((1.0 - p[support]) / p0)).sum())
    return max(j, 0.0)


def info_gain_all(b: np.ndarray, prob_matrix: np.ndarray) -> np.ndarray:
    """info_gain for every attribute column at once."""
    b = np.asarray(b, dtype=np.float64)
    P = _clamped(np.asarray(prob_matrix, dtype=np.float64))
    support = b > 0.0
    bp = b[support, None]
    Ps = P[support, :]
    p1 = (b[:, None] * P).sum(axis=0)
    p0 = (b[:, None] * (1.0 - P)).sum(axis=0)
    j = (bp * Ps * np.log(Ps / p1[None, :])).sum(axis=0)
    j += (bp * (1.0 - Ps) * np.log((1.0 - Ps) / p0[None, :])).sum(axis=0)
    return np.maximum(j, 0.0)


def retrieval_rank(item_ids, decision_matrix: np.ndarray, w_d,
                   config: RetrievalConfig) -> list[tuple[int, float]]:
    """Rank items by agreement between thresholded attribute decisions and the
    description's implied labels (positive inside the description, negative
    outside); returns at most rank_cap (item_id, score) pairs, best first,
    ties by ascending item id."""
    D = np.asarray(decision_matrix, dtype=bool)
    n, w_count = D.shape
    in_desc = np.zeros(w_count, dtype=bool)
    in_desc[sorted(w_d)] = True
    agree = (D == in_desc[None, :]).sum(axis=1)
    scores = config.c1 * agree + config.c2 * (w_count - agree)
    order = sorted(range(n), key=lambda k: (-scores[k], item_ids[k]))
    return [(item_ids[k], float(scores[k])) for k in order[: config.rank_cap]]


def belief_summary(b: np.ndarray) -> BeliefSummary:
    """Entropy, top-two beliefs, and mean-based concentration measures."""
    b = np.asarray(b, dtype=np.float64)
    positive = b[b > 0.0]
    entropy = float(-(positive * np.log(positive)).sum())
    if len(b) >= 2:
        top_two = np.partition(b, -2)[-2:]
        top, second = float(top_two[1]), float(top_two[0])
    else:
        top, second = float(b[0]), 0.0
    mean = float(b.mean())
    return BeliefSummary(entropy=max(entropy, 0.0), top=top, second=second,
                         top_gap=top - second, mean=mean, top_lead=top - mean)
