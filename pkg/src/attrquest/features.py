"""Feature extraction for the three sub-policies.

Clarification candidates are described by the current belief summary, the
hypothetical summaries after a yes or a no answer, the question's information
gain, and the attribute's validation F1 (20 entries). Active-learning
candidates get attribute quality/usage features plus, for label queries,
uncertainty and density measures over the active training pool (8 entries).
The decision policy sees a shared state block plus a one-hot meta-action
(16 entries per meta-action).

Entropy entries are normalized by log of the candidate-set size so feature
scales do not depend on the active test set size, and every vector is clamped
to [-10, 10].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import LABEL_QUERY, DialogAction, DialogEnv
from .grounding import belief_summary, info_gain, update_belief

CLARIFICATION_DIM = 20
ACTIVE_LEARNING_DIM = 8
DECISION_DIM = 16

META_GUESS = 0
META_CLARIFY = 1
META_ACTIVE_LEARNING = 2
META_NAMES = ("guess", "clarify", "active_learning")

FEATURE_CLAMP = 10.0


@dataclass
class FeatureConfig:
    k_neighbors: int = 10

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")


@dataclass
class DialogHistoryStats:
    """Cross-dialog attribute usage counters (description membership)."""

    total: int = 0
    used: dict[int, int] = field(default_factory=dict)
    successful: dict[int, int] = field(default_factory=dict)

    def record(self, w_d, success: bool) -> None:
        self.total += 1
        for w in w_d:
            self.used[w] = self.used.get(w, 0) + 1
            if success:
                self.successful[w] = self.successful.get(w, 0) + 1

    def used_fraction(self, w: int) -> float:
        return self.used.get(w, 0) / self.total if self.total else 0.0

    def success_fraction(self, w: int) -> float:
        used = self.used.get(w, 0)
        return self.successful.get(w, 0) / used if used else 0.0

    def copy(self) -> "DialogHistoryStats":
        return DialogHistoryStats(total=self.total, used=dict(self.used),
                                  successful=dict(self.successful))


def record_dialog(history: DialogHistoryStats, w_d, success: bool) -> DialogHistoryStats:
    history.record(w_d, success)
    return history


def _clamp(vec: np.ndarray) -> np.ndarray:
    return np.clip(vec, -FEATURE_CLAMP, FEATURE_CLAMP)


def _summary_block(b: np.ndarray, n_te: int) -> np.ndarray:
    block = belief_summary(b).as_array()
    block[0] /= np.log(max(n_te, 2))
    return block


class FeatureExtractor:
    """Per-episode feature context over a frozen classifier snapshot.

    label_known(item, attr) reports whether a pair is already labeled in any
    store; pairs acquired earlier in the same episode also count as labeled.
    """

    def __init__(self, env: DialogEnv, stats, history: DialogHistoryStats,
                 config: FeatureConfig, label_known=None):
        self.env = env
        self.stats = stats
        self.history = history
        self.config = config
        self.label_known = label_known or (lambda item, attr: False)
        self.n_te = len(env.setup.te_ids)
        self.max_length = env.reward_cfg.max_length
        self._tr_features = env.corpus.feature_matrix(env.setup.tr_ids)
        self._mean_cos, self._knn = self._pool_geometry()

    def _pool_geometry(self):
        X = self._tr_features
        n = X.shape[0]
        if n <= 1:
            return np.zeros(max(n, 1)), [[] for _ in range(max(n, 1))]
        norms = np.linalg.norm(X, axis=1)
        norms[norms == 0] = 1.0
        sims = (X @ X.T) / np.outer(norms, norms)
        dists = 1.0 - sims
        np.fill_diagonal(dists, np.inf)
        mean_cos = np.where(np.isfinite(dists), dists, 0.0).sum(axis=1) / (n - 1)
        k = min(self.config.k_neighbors, n - 1)
        knn = [np.argsort(dists[i])[:k].tolist() for i in range(n)]
        return mean_cos, knn

    # ----- clarification ---------------------------------------------------

    def clarification_features(self, attribute: int) -> np.ndarray:
        env = self.env
        col = env.setup.prob_te[:, attribute]
        current = _summary_block(env.b, self.n_te)
        after_yes = _summary_block(update_belief(env.b, col, True), self.n_te)
        after_no = _summary_block(update_belief(env.b, col, False), self.n_te)
        gain = info_gain(env.b, col)
        vec = np.concatenate([current, after_yes, after_no,
                              [gain, self.stats.f1[attribute]]])
        return _clamp(vec)

    # ----- active learning -------------------------------------------------

    def _pair_labeled(self, item: int, attr: int) -> bool:
        if self.label_known(item, attr):
            return True
        return any(i == item and w == attr for i, w, _, _ in self.env.acquired)

    def active_learning_features(self, query: DialogAction) -> np.ndarray:
        w = query.attribute
        env = self.env
        is_label = query.kind == LABEL_QUERY
        vec = np.zeros(ACTIVE_LEARNING_DIM)
        vec[0] = self.stats.f1[w]
        vec[1] = self.history.used_fraction(w)
        vec[2] = self.history.success_fraction(w)
        vec[3] = float(w not in env.w_d)    # opportunistic
        if is_label:
            k = env.setup.tr_ids.index(query.item)
            vec[4] = 1.0
            vec[5] = abs(env.setup.prob_tr[k, w] - 0.5)
            vec[6] = self._mean_cos[k]
            neighbors = self._knn[k]
            if neighbors:
                unlabeled = sum(
                    1 for j in neighbors
                    if not self._pair_labeled(env.setup.tr_ids[j], w))
                vec[7] = unlabeled / len(neighbors)
        return _clamp(vec)

    # ----- decision ----------------------------------------------------------

    def decision_features(self, best_clar, best_al) -> np.ndarray:
        """(3, 16) rows for meta-actions (guess, clarify, active_learning).

        best_clar: (attribute, info_gain, f1) or None.
        best_al: (query, margin, f1) or None; margin is 0 for example queries.
        """
        env = self.env
        shared = np.zeros(13)
        shared[:6] = _summary_block(env.b, self.n_te)
        if best_clar is not None:
            shared[6] = best_clar[1]
            shared[7] = best_clar[2]
        if best_al is not None:
            query, margin, f1 = best_al
            shared[8] = float(query.kind == LABEL_QUERY)
            shared[9] = margin
            shared[10] = f1
        if env.w_d:
            shared[11] = float(np.mean([self.stats.f1[w] for w in sorted(env.w_d)]))
        shared[12] = env.turn / self.max_length
        rows = np.tile(shared, (3, 1))
        onehot = np.eye(3)
        return _clamp(np.hstack([rows, onehot]))
