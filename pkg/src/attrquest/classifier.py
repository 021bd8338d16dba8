"""Two-branch multilabel attribute classifier trained with RMSProp.

Per attribute w the model computes two non-negative scores from a shared
feature vector x:

    psi  = relu(w1' x + b1)
    psi' = relu(w2' x + b2)
    f    = psi + psi'
    p    = sigmoid(f / tau)          # main probability
    p'   = sigmoid(psi' / tau')      # positive-focused branch

and is trained by minimizing the negated mixed log-likelihood

    -(1 - lam) * sum_w m_w [y log p + (1-y) log(1-p)]  -  lam * sum_w m_w y log p'

where the p' branch receives loss only on positive labels, which keeps rare
attributes from collapsing to all-negative predictions. Temperatures tau,
tau' are trained jointly with the weights and clamped from below. Labels can
be partial: the mask m marks which attributes of an item are known.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

PROB_EPS = 1e-7
TAU_MIN = 0.01
SNAPSHOT_VERSION = 1

TRAINING = "training"
VALIDATION = "validation"


class SnapshotError(ValueError):
    """Raised when a classifier snapshot cannot be restored."""


@dataclass
class TrainConfig:
    lam: float = 0.9
    learning_rate: float = 0.1
    lr_decay: float = 0.9
    lr_decay_every: int = 400
    epochs: int = 100
    batch_size: int = 256      # full-scale runs use 8192
    incremental_batch_size: int = 32   # contract allows up to 128
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must be in [0, 1]")


@dataclass
class ClassifierParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    tau: np.ndarray
    tau_prime: np.ndarray
    cache: dict = field(default_factory=dict)   # RMSProp squared-gradient accumulators
    step: int = 0

    @property
    def dim(self) -> int:
        return self.w1.shape[0]

    @property
    def num_attributes(self) -> int:
        return self.w1.shape[1]

    def copy(self) -> "ClassifierParams":
        return ClassifierParams(
            w1=self.w1.copy(), b1=self.b1.copy(),
            w2=self.w2.copy(), b2=self.b2.copy(),
            tau=self.tau.copy(), tau_prime=self.tau_prime.copy(),
            cache={k: v.copy() for k, v in self.cache.items()},
            step=self.step)


PARAM_KEYS = ("w1", "b1", "w2", "b2", "tau", "tau_prime")


def init_params(dim: int, num_attributes: int, seed: int = 0) -> ClassifierParams:
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    limit = np.sqrt(6.0 / (dim + num_attributes))
    params = ClassifierParams(
        w1=rng.uniform(-limit, limit, size=(dim, num_attributes)),
        b1=np.zeros(num_attributes),
        w2=rng.uniform(-limit, limit, size=(dim, num_attributes)),
        b2=np.zeros(num_attributes),
        tau=np.ones(num_attributes),
        tau_prime=np.ones(num_attributes))
    params.cache = {k: np.zeros_like(getattr(params, k)) for k in PARAM_KEYS}
    return params


@dataclass
class ClassifierOutput:
    psi: np.ndarray
    psi_prime: np.ndarray
    f: np.ndarray
    p: np.ndarray
    p_prime: np.ndarray


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_arrays(params: ClassifierParams, X: np.ndarray):
    z1 = X @ params.w1 + params.b1
    z2 = X @ params.w2 + params.b2
    psi = np.maximum(z1, 0.0)
    psi_p = np.maximum(z2, 0.0)
    f = psi + psi_p
    p = _sigmoid(f / params.tau)
    pp = _sigmoid(psi_p / params.tau_prime)
    return z1, z2, psi, psi_p, f, p, pp


def forward(params: ClassifierParams, features: np.ndarray) -> ClassifierOutput:
    """Single-item forward pass."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape != (params.dim,):
        raise ValueError(f"expected feature vector of length {params.dim}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature entries")
    _, _, psi, psi_p, f, p, pp = _forward_arrays(params, x[None, :])
    return ClassifierOutput(psi=psi[0], psi_prime=psi_p[0], f=f[0], p=p[0], p_prime=pp[0])


def prob_matrix(params: ClassifierParams, X: np.ndarray) -> np.ndarray:
    """Main-branch probabilities for a stack of feature rows, shape (N, |W|)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.dim:
        raise ValueError("feature matrix shape mismatch")
    return _forward_arrays(params, X)[5]


def loss(output: ClassifierOutput, labels, label_mask, lam: float) -> float:
    """Masked mixed loss for one item; probabilities clamped before logs."""
    y = np.asarray(labels, dtype=np.float64)
    m = np.asarray(label_mask, dtype=np.float64)
    pc = np.clip(output.p, PROB_EPS, 1.0 - PROB_EPS)
    ppc = np.clip(output.p_prime, PROB_EPS, 1.0 - PROB_EPS)
    ll = (1.0 - lam) * (y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    ll = ll + lam * y * np.log(ppc)
    return float(-(m * ll).sum())


def batch_loss(params: ClassifierParams, X, Y, M, lam: float) -> float:
    """Mean over items of the per-item masked loss."""
    Y = np.asarray(Y, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    p = _forward_arrays(params, np.asarray(X, dtype=np.float64))
    pc = np.clip(p[5], PROB_EPS, 1.0 - PROB_EPS)
    ppc = np.clip(p[6], PROB_EPS, 1.0 - PROB_EPS)
    ll = (1.0 - lam) * (Y * np.log(pc) + (1.0 - Y) * np.log(1.0 - pc))
    ll = ll + lam * Y * np.log(ppc)
    return float(-(M * ll).sum() / X.shape[0])


def batch_gradients(params: ClassifierParams, X, Y, M, lam: float) -> dict:
    """Analytic gradients of batch_loss with respect to every parameter.

    Uses the fused sigmoid-cross-entropy form: the main-branch gradient
    through the logit is (p - y) and the positive branch's is -y(1 - p'),
    so no probability division (and no clamping) is needed; the clamp in
    the loss exists only to keep reported values finite.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    n = X.shape[0]
    z1, z2, psi, psi_p, f, p, pp = _forward_arrays(params, X)

    coeff_p = M * (1.0 - lam) * (p - Y) / n          # d loss / d (f / tau)
    coeff_pp = -M * lam * Y * (1.0 - pp) / n         # d loss / d (psi' / tau')

    g_f = coeff_p / params.tau
    g_tau = (coeff_p * (-f / params.tau ** 2)).sum(axis=0)
    g_psi_p = g_f + coeff_pp / params.tau_prime
    g_tau_prime = (coeff_pp * (-psi_p / params.tau_prime ** 2)).sum(axis=0)

    g_z1 = g_f * (z1 > 0)
    g_z2 = g_psi_p * (z2 > 0)
    return {
        "w1": X.T @ g_z1, "b1": g_z1.sum(axis=0),
        "w2": X.T @ g_z2, "b2": g_z2.sum(axis=0),
        "tau": g_tau, "tau_prime": g_tau_prime,
    }


def current_learning_rate(cfg: TrainConfig, step: int) -> float:
    return cfg.learning_rate * cfg.lr_decay ** (step // cfg.lr_decay_every)


def grad_step(params: ClassifierParams, batch, cfg: TrainConfig) -> ClassifierParams:
    """One RMSProp step on (X, Y, M); mutates and returns params."""
    X, Y, M = batch
    if len(X) == 0:
        raise ValueError("empty batch")
    grads = batch_gradients(params, X, Y, M, cfg.lam)
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient; step aborted")
    lr = current_learning_rate(cfg, params.step)
    rho, eps = cfg.rmsprop_decay, cfg.rmsprop_epsilon
    for key in PARAM_KEYS:
        g = grads[key]
        cache = params.cache[key]
        cache *= rho
        cache += (1.0 - rho) * g * g
        getattr(params, key)[...] -= lr * g / (np.sqrt(cache) + eps)
    np.maximum(params.tau, TAU_MIN, out=params.tau)
    np.maximum(params.tau_prime, TAU_MIN, out=params.tau_prime)
    params.step += 1
    return params


class LabelStore:
    """(item, attribute) -> {0,1} labels with a role (training/validation)
    and a source tag. A pair keeps its first routing; later adds are no-ops."""

    def __init__(self):
        self._entries: dict[tuple[int, int], tuple[int, str, str]] = {}
        self._by_role_attr: dict[tuple[str, int], dict[int, int]] = {}
        self._train_pos: dict[int, int] = {}

    def __len__(self):
        return len(self._entries)

    def add(self, item_id: int, attr: int, value: int, role: str, source: str) -> bool:
        if role not in (TRAINING, VALIDATION):
            raise ValueError(f"unknown role {role!r}")
        key = (int(item_id), int(attr))
        if key in self._entries:
            return False
        self._entries[key] = (int(value), role, source)
        self._by_role_attr.setdefault((role, int(attr)), {})[int(item_id)] = int(value)
        if role == TRAINING and value:
            self._train_pos[int(attr)] = self._train_pos.get(int(attr), 0) + 1
        return True

    def has_training_positive(self, attr: int) -> bool:
        return self._train_pos.get(int(attr), 0) > 0

    def add_full_item(self, item_id: int, labels, role: str, source: str) -> None:
        for w, value in enumerate(np.asarray(labels)):
            self.add(item_id, w, int(value), role, source)

    def has(self, item_id: int, attr: int) -> bool:
        return (int(item_id), int(attr)) in self._entries

    def get(self, item_id: int, attr: int):
        entry = self._entries.get((int(item_id), int(attr)))
        return None if entry is None else entry[0]

    def role_of(self, item_id: int, attr: int):
        entry = self._entries.get((int(item_id), int(attr)))
        return None if entry is None else entry[1]

    def training_vectors(self, item_id: int, num_attributes: int):
        """(labels, mask) over attributes known with role=training."""
        y = np.zeros(num_attributes)
        m = np.zeros(num_attributes)
        for w in range(num_attributes):
            entry = self._entries.get((int(item_id), w))
            if entry is not None and entry[1] == TRAINING:
                y[w] = entry[0]
                m[w] = 1.0
        return y, m

    def validation_entries(self, attr: int):
        """Sorted (item_ids, values) known with role=validation for attr."""
        d = self._by_role_attr.get((VALIDATION, int(attr)), {})
        ids = sorted(d)
        return ids, np.array([d[i] for i in ids], dtype=np.int8)

    def copy(self) -> "LabelStore":
        dup = LabelStore()
        dup._entries = dict(self._entries)
        dup._by_role_attr = {k: dict(v) for k, v in self._by_role_attr.items()}
        dup._train_pos = dict(self._train_pos)
        return dup

    def save(self, path) -> None:
        with open(path, "w") as fh:
            for (item, attr), (value, role, source) in sorted(self._entries.items()):
                fh.write(json.dumps({"item": item, "attr": attr, "value": value,
                                     "role": role, "source": source}) + "\n")

    @classmethod
    def load(cls, path) -> "LabelStore":
        store = cls()
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    store.add(rec["item"], rec["attr"], rec["value"],
                              rec["role"], rec["source"])
        return store


@dataclass
class AttributeStats:
    """Per-attribute decision thresholds and validation-set quality."""

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    val_positives: np.ndarray

    @property
    def num_attributes(self):
        return self.thresholds.shape[0]

    @classmethod
    def untuned(cls, num_attributes: int) -> "AttributeStats":
        return cls(thresholds=np.ones(num_attributes),
                   precision=np.zeros(num_attributes),
                   recall=np.zeros(num_attributes),
                   f1=np.zeros(num_attributes),
                   val_positives=np.zeros(num_attributes, dtype=np.int64))


def threshold_grid(probs: np.ndarray) -> np.ndarray:
    """Candidate thresholds: {0, 1} plus midpoints of consecutive sorted probs."""
    uniq = np.unique(probs)
    mids = (uniq[:-1] + uniq[1:]) / 2.0 if uniq.size > 1 else np.empty(0)
    return np.unique(np.concatenate(([0.0, 1.0], mids)))


def _f1_at(probs, values, theta):
    pred = probs >= theta
    tp = int(np.sum(pred & (values == 1)))
    fp = int(np.sum(pred & (values == 0)))
    fn = int(np.sum(~pred & (values == 1)))
    f1 = 2.0 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    return f1, precision, recall


def tune_thresholds(params: ClassifierParams, store: LabelStore, corpus) -> AttributeStats:
    """Pick, per attribute, the threshold maximizing F1 on the validation
    entries (grid of prediction midpoints plus {0,1}; ties toward larger
    thresholds). Attributes without validation positives get F1=0, theta=1."""
    w_count = params.num_attributes
    stats = AttributeStats.untuned(w_count)

    # One forward pass over the union of validation items.
    all_ids = sorted({i for w in range(w_count)
                      for i in store.validation_entries(w)[0]})
    if not all_ids:
        return stats
    probs_all = prob_matrix(params, corpus.feature_matrix(all_ids))
    row_of = {i: k for k, i in enumerate(all_ids)}

    for w in range(w_count):
        ids, values = store.validation_entries(w)
        stats.val_positives[w] = int(values.sum()) if len(ids) else 0
        if not len(ids) or stats.val_positives[w] == 0:
            continue
        probs = probs_all[[row_of[i] for i in ids], w]
        best = (-1.0, -1.0, 0.0, 0.0)  # (f1, theta, precision, recall)
        for theta in threshold_grid(probs):
            f1, precision, recall = _f1_at(probs, values, theta)
            if f1 > best[0] or (f1 == best[0] and theta > best[1]):
                best = (f1, theta, precision, recall)
        stats.f1[w], stats.thresholds[w] = best[0], best[1]
        stats.precision[w], stats.recall[w] = best[2], best[3]
    return stats


def _store_batch(item_ids, store: LabelStore, corpus, w_count):
    """Training arrays for a set of items. Attributes with no positive
    training label anywhere in the store are masked out entirely: their
    likelihood optimum is the degenerate all-0.5 output, and training toward
    it drives the ReLU columns into a dead zone that later positives from
    active learning cannot escape. Gating keeps those columns at init."""
    X = corpus.feature_matrix(item_ids)
    Y = np.zeros((len(item_ids), w_count))
    M = np.zeros((len(item_ids), w_count))
    for k, i in enumerate(item_ids):
        Y[k], M[k] = store.training_vectors(i, w_count)
    gate = np.array([store.has_training_positive(w) for w in range(w_count)],
                    dtype=np.float64)
    return X, Y, M * gate[None, :]


def pretrain(params: ClassifierParams, item_ids, store: LabelStore, corpus,
             cfg: TrainConfig, seed=None) -> ClassifierParams:
    """Shuffled mini-batch epochs over fully labeled items."""
    ids = sorted(item_ids)
    if not ids:
        raise ValueError("empty item set")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed if seed is None else seed))
    X, Y, M = _store_batch(ids, store, corpus, params.num_attributes)
    for _ in range(cfg.epochs):
        order = rng.permutation(len(ids))
        for lo in range(0, len(ids), cfg.batch_size):
            sel = order[lo:lo + cfg.batch_size]
            grad_step(params, (X[sel], Y[sel], M[sel]), cfg)
    return params


def incremental_update(params: ClassifierParams, touched_ids, store: LabelStore,
                       corpus, cfg: TrainConfig, seed=None) -> ClassifierParams:
    """Single epoch over items whose labels changed; loss masked to known labels."""
    ids = sorted(touched_ids)
    if not ids:
        return params
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed if seed is None else seed))
    X, Y, M = _store_batch(ids, store, corpus, params.num_attributes)
    order = rng.permutation(len(ids))
    bs = cfg.incremental_batch_size
    for lo in range(0, len(ids), bs):
        sel = order[lo:lo + bs]
        grad_step(params, (X[sel], Y[sel], M[sel]), cfg)
    return params


def snapshot(params: ClassifierParams) -> bytes:
    """Versioned binary blob; restore() is a bit-exact inverse."""
    buf = io.BytesIO()
    arrays = {k: getattr(params, k) for k in PARAM_KEYS}
    arrays.update({f"cache_{k}": params.cache[k] for k in PARAM_KEYS})
    meta = json.dumps({"version": SNAPSHOT_VERSION, "step": params.step})
    np.savez(buf, meta=np.frombuffer(meta.encode(), dtype=np.uint8), **arrays)
    return buf.getvalue()


def restore(blob: bytes) -> ClassifierParams:
    try:
        data = np.load(io.BytesIO(blob))
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != SNAPSHOT_VERSION:
            raise SnapshotError(f"unsupported snapshot version {meta.get('version')}")
        params = ClassifierParams(
            **{k: data[k] for k in PARAM_KEYS},
            cache={k: data[f"cache_{k}"] for k in PARAM_KEYS},
            step=int(meta["step"]))
    except SnapshotError:
        raise
    except Exception as exc:
        raise SnapshotError(f"cannot restore classifier snapshot: {exc}") from exc
    return params
