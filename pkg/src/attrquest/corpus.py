"""Attribute-labeled feature corpora: generation, novelty splits, persistence.

Items carry a feature vector, binary attribute labels, and a description
(a subset of the positive attributes). The generator builds a synthetic
corpus in which each attribute has a prototype direction in feature space,
so attributes are linearly learnable and heavily imbalanced (Zipf-like
frequencies). Real precomputed features can be imported through the same
line-delimited JSON format via ``corpus_from_arrays`` / ``load_corpus``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1

SPLIT_NAMES = ("pretrain", "train", "val", "test")
SUBSET_NAMES = ("classifier_training", "classifier_test")


class GenerationError(ValueError):
    """Raised when a corpus configuration cannot be satisfied."""


class CorpusFormatError(ValueError):
    """Raised on malformed corpus files; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass
class AttributeCatalog:
    """Attribute names plus their partition into pretrain/train/val/test."""

    names: list[str]
    pretrain: tuple[int, ...]
    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]

    def __post_init__(self):
        groups = [self.pretrain, self.train, self.val, self.test]
        combined = [w for g in groups for w in g]
        if sorted(combined) != list(range(len(self.names))):
            raise ValueError("partition must cover all attributes exactly once")

    def partition_of(self, split: str) -> tuple[int, ...]:
        return {"pretrain": self.pretrain, "train": self.train,
                "val": self.val, "test": self.test}[split]

    def to_dict(self):
        return {"pretrain": list(self.pretrain), "train": list(self.train),
                "val": list(self.val), "test": list(self.test)}

    @classmethod
    def from_dict(cls, names, d):
        return cls(names=list(names),
                   pretrain=tuple(d["pretrain"]), train=tuple(d["train"]),
                   val=tuple(d["val"]), test=tuple(d["test"]))

    @classmethod
    def default(cls, num_attributes=40, sizes=(24, 4, 6, 6)):
        """Index-ordered partition; desk-scale default 24/4/6/6."""
        if sum(sizes) != num_attributes:
            raise ValueError("partition sizes must sum to the attribute count")
        names = [f"attr-{w:02d}" for w in range(num_attributes)]
        bounds = np.cumsum((0,) + tuple(sizes))
        groups = [tuple(range(bounds[k], bounds[k + 1])) for k in range(4)]
        return cls(names, *groups)


@dataclass(eq=False)
class Item:
    """One retrievable item: features, ground-truth labels, description."""

    id: int
    features: np.ndarray
    labels: np.ndarray
    description: frozenset[int]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        self.description = frozenset(int(w) for w in self.description)
        if not np.all(np.isfinite(self.features)):
            raise ValueError(f"item {self.id}: non-finite feature entries")
        positives = {int(w) for w in np.flatnonzero(self.labels)}
        if not self.description <= positives:
            raise ValueError(f"item {self.id}: description not a subset of positives")

    def __eq__(self, other):
        return (isinstance(other, Item)
                and self.id == other.id
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels)
                and self.description == other.description)


@dataclass
class Corpus:
    dim: int
    catalog: AttributeCatalog
    items: list[Item]

    def __post_init__(self):
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate item ids")
        self._by_id = {it.id: it for it in self.items}

    def __len__(self):
        return len(self.items)

    def __getitem__(self, item_id: int) -> Item:
        return self._by_id[item_id]

    @property
    def num_attributes(self) -> int:
        return len(self.catalog.names)

    def feature_matrix(self, ids=None) -> np.ndarray:
        rows = self.items if ids is None else [self._by_id[i] for i in ids]
        if not rows:
            return np.zeros((0, self.dim))
        return np.stack([it.features for it in rows])

    def label_matrix(self, ids=None) -> np.ndarray:
        rows = self.items if ids is None else [self._by_id[i] for i in ids]
        if not rows:
            return np.zeros((0, self.num_attributes), dtype=np.int8)
        return np.stack([it.labels for it in rows])


@dataclass
class GenConfig:
    """Synthetic corpus knobs.

    Attribute frequencies follow a capped Zipf law freq = min(max_frequency,
    zipf_scale / rank**zipf_exponent). Ranks 1..|pretrain| go to the pretrain
    partition in order; the remaining (rarer) ranks are shuffled across the
    train/val/test partitions so novel attributes stay rare. Description
    sizes are uniform integers in [description_min, description_max].
    """

    dim: int = 64
    num_attributes: int = 40
    item_count: int = 4000
    partition_sizes: tuple[int, int, int, int] = (24, 4, 6, 6)
    zipf_exponent: float = 0.9
    zipf_scale: float = 0.8
    max_frequency: float = 0.5
    noise_scale: float = 0.08
    description_min: int = 2
    description_max: int = 5

    def __post_init__(self):
        if self.dim < 1:
            raise GenerationError("dim must be >= 1")
        if self.num_attributes < 2:
            raise GenerationError("need at least 2 attributes")
        if self.item_count < self.num_attributes:
            raise GenerationError("item_count must be >= num_attributes")
        if self.item_count < 2:
            raise GenerationError("min-positive constraint needs >= 2 items")
        if sum(self.partition_sizes) != self.num_attributes:
            raise GenerationError("partition sizes must sum to num_attributes")
        if not (1 <= self.description_min <= self.description_max):
            raise GenerationError("bad description size range")


def _attribute_frequencies(cfg: GenConfig, rng: np.random.Generator) -> np.ndarray:
    """Zipf frequencies; pretrain gets the head ranks, novel splits the tail."""
    n_pre = cfg.partition_sizes[0]
    ranks = np.empty(cfg.num_attributes, dtype=np.int64)
    ranks[:n_pre] = np.arange(1, n_pre + 1)
    tail = np.arange(n_pre + 1, cfg.num_attributes + 1)
    ranks[n_pre:] = rng.permutation(tail)
    freq = cfg.zipf_scale / ranks.astype(np.float64) ** cfg.zipf_exponent
    return np.minimum(freq, cfg.max_frequency)


def generate_corpus(cfg: GenConfig, seed: int) -> Corpus:
    """Build a synthetic corpus; deterministic given (cfg, seed)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n, w_count, d = cfg.item_count, cfg.num_attributes, cfg.dim

    freq = _attribute_frequencies(cfg, rng)
    labels = (rng.random((n, w_count)) < freq[None, :]).astype(np.int8)

    # Every attribute needs >= 2 positives corpus-wide; top up deficient ones.
    for w in range(w_count):
        short = 2 - int(labels[:, w].sum())
        if short > 0:
            negatives = np.flatnonzero(labels[:, w] == 0)
            picks = rng.choice(negatives, size=short, replace=False)
            labels[picks, w] = 1

    prototypes = rng.normal(size=(w_count, d))
    prototypes /= np.linalg.norm(prototypes, axis=1, keepdims=True)

    features = labels.astype(np.float64) @ prototypes
    features += cfg.noise_scale * rng.normal(size=(n, d))
    norms = np.linalg.norm(features, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    features /= norms

    items = []
    for i in range(n):
        positives = np.flatnonzero(labels[i])
        size = int(rng.integers(cfg.description_min, cfg.description_max + 1))
        size = min(size, positives.size)
        desc = rng.choice(positives, size=size, replace=False) if size else []
        items.append(Item(id=i, features=features[i], labels=labels[i],
                          description=frozenset(int(w) for w in desc)))

    catalog = AttributeCatalog.default(w_count, cfg.partition_sizes)
    return Corpus(dim=d, catalog=catalog, items=items)


def corpus_from_arrays(features, labels, descriptions, catalog: AttributeCatalog) -> Corpus:
    """Import path for precomputed (e.g. real image) features."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int8)
    if features.shape[0] != labels.shape[0] or len(descriptions) != features.shape[0]:
        raise ValueError("features, labels, descriptions must align")
    items = [Item(id=i, features=features[i], labels=labels[i],
                  description=frozenset(descriptions[i]))
             for i in range(features.shape[0])]
    return Corpus(dim=features.shape[1] if features.ndim == 2 else 0,
                  catalog=catalog, items=items)


@dataclass
class SplitCorpus:
    """Item ids per policy split, each divided into classifier subsets."""

    assignment: dict[int, tuple[str, str]] = field(default_factory=dict)

    def ids(self, split: str, subset: str | None = None) -> list[int]:
        if subset is None:
            return sorted(i for i, (s, _) in self.assignment.items() if s == split)
        return sorted(i for i, (s, ss) in self.assignment.items()
                      if s == split and ss == subset)

    def split_of(self, item_id: int) -> str:
        return self.assignment[item_id][0]


def split_by_attributes(corpus: Corpus) -> dict[str, list[int]]:
    """Assign items to splits by attribute novelty, claimed test -> val ->
    train; the remainder is pretrain. Guarantees each later split introduces
    attributes with no positives in earlier splits."""
    catalog = corpus.catalog
    labels = corpus.label_matrix()
    ids = np.array([it.id for it in corpus.items])
    remaining = np.ones(len(corpus), dtype=bool)
    out: dict[str, list[int]] = {}
    for split in ("test", "val", "train"):
        part = list(catalog.partition_of(split))
        if part:
            hit = remaining & (labels[:, part].sum(axis=1) > 0)
        else:
            hit = np.zeros(len(corpus), dtype=bool)
        out[split] = [int(i) for i in ids[hit]]
        remaining &= ~hit
    out["pretrain"] = [int(i) for i in ids[remaining]]
    return out


def split_classifier_subsets(item_ids, ratio: float, seed: int):
    """Uniform random (training, test) division with |training| = round(ratio*n)."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("ratio must be in [0, 1]")
    ids = sorted(item_ids)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perm = rng.permutation(len(ids))
    # round() half-to-even would be surprising here; use floor(x + 0.5)
    n_train = int(np.floor(ratio * len(ids) + 0.5))
    chosen = {ids[k] for k in perm[:n_train]}
    training = sorted(chosen)
    test = [i for i in ids if i not in chosen]
    return training, test


def make_split_corpus(corpus: Corpus, ratio: float = 0.6, seed: int = 0) -> SplitCorpus:
    splits = split_by_attributes(corpus)
    sc = SplitCorpus()
    for k, split in enumerate(SPLIT_NAMES):
        training, test = split_classifier_subsets(splits[split], ratio, seed + k)
        for i in training:
            sc.assignment[i] = (split, "classifier_training")
        for i in test:
            sc.assignment[i] = (split, "classifier_test")
    return sc


def save_corpus(corpus: Corpus, path) -> None:
    header = {"version": FORMAT_VERSION, "D": corpus.dim,
              "num_attributes": corpus.num_attributes,
              "attribute_names": corpus.catalog.names,
              "partition": corpus.catalog.to_dict()}
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for it in corpus.items:
            rec = {"id": it.id, "features": it.features.tolist(),
                   "labels": it.labels.tolist(),
                   "description": sorted(it.description)}
            fh.write(json.dumps(rec) + "\n")


def load_corpus(path) -> Corpus:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CorpusFormatError("missing header", line=1)
    try:
        header = json.loads(lines[0])
        dim = header["D"]
        names = header["attribute_names"]
        catalog = AttributeCatalog.from_dict(names, header["partition"])
        if header.get("version") != FORMAT_VERSION:
            raise CorpusFormatError(f"unsupported version {header.get('version')}", line=1)
    except CorpusFormatError:
        raise
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorpusFormatError(f"bad header: {exc}", line=1) from exc

    items = []
    for lineno, raw in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(raw)
            items.append(Item(id=rec["id"], features=rec["features"],
                              labels=rec["labels"],
                              description=frozenset(rec["description"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"bad item record: {exc}", line=lineno) from exc
        if items[-1].features.shape != (dim,) or items[-1].labels.shape != (len(names),):
            raise CorpusFormatError("item shape disagrees with header", line=lineno)
    return Corpus(dim=dim, catalog=catalog, items=items)


def save_split(split: SplitCorpus, path) -> None:
    payload = {str(i): {"split": s, "subset": ss}
               for i, (s, ss) in sorted(split.assignment.items())}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=0)


def load_split(path) -> SplitCorpus:
    with open(path) as fh:
        payload = json.load(fh)
    sc = SplitCorpus()
    for key, rec in payload.items():
        if rec["split"] not in SPLIT_NAMES or rec["subset"] not in SUBSET_NAMES:
            raise ValueError(f"bad split record for item {key}")
        sc.assignment[int(key)] = (rec["split"], rec["subset"])
    return sc
