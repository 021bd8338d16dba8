"""Experiment orchestration: pretraining, policy initialization, policy
training, and policy testing with a classifier reset, run in batches of
dialogs with classifier/policy updates and retrieval refreshes at batch
boundaries.

Within a batch every episode observes the same frozen classifier snapshot;
acquired labels, dialog-history updates, and policy updates apply only when
the batch completes. The test phase restores the end-of-pretraining
classifier (and label stores) and freezes policies to greedy mode, so any
improvement during testing comes from that phase's own queries.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import classifier as clf
from .corpus import Corpus, GenConfig, SplitCorpus, generate_corpus, load_corpus, \
    load_split, make_split_corpus, save_corpus, save_split
from .env import GUESS, DialogEnv, EpisodeSetup, RewardConfig
from .features import DialogHistoryStats, FeatureConfig, FeatureExtractor
from .grounding import RetrievalConfig, guess
from .policies import (
    EVALUATE,
    ORACLE,
    STATIC,
    TRAIN,
    EpisodeTrainData,
    PolicyBundle,
    StaticPolicyConfig,
    hierarchical_act,
    make_bundle,
    save_checkpoint,
    train_from_batch,
)

PHASES = ("init", "train", "test")
# stream tags for seed derivation
_EPISODE = 0
_ROUTING = 1
_HISTORY = 2


@dataclass
class ExperimentConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    corpus_path: str | None = None
    split_path: str | None = None
    split_ratio: float = 0.6

    init_batches: int = 4
    train_batches: int = 4
    test_batches: int = 5
    dialogs_per_batch: int = 100
    test_split: str = "test"            # or "val" for hyperparameter tuning
    active_train_size: int = 200        # full-scale runs sample 1000
    rho_val: float = 0.2                # acquired labels routed to validation
    human_eval_variant: bool = False
    human_eval_candidates: int = 100

    policies: dict = field(default_factory=lambda: {
        "decision": "static", "clarification": "static",
        "active_learning": "static"})
    epsilon: float = 0.1
    q_lr: float = 0.01
    critic_lr: float = 0.01
    alpha: float = 0.01

    rewards: RewardConfig = field(default_factory=RewardConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    static_policy: StaticPolicyConfig = field(default_factory=StaticPolicyConfig)
    train_config: clf.TrainConfig = field(default_factory=clf.TrainConfig)

    seed: int = 0

    def __post_init__(self):
        if min(self.init_batches, self.train_batches, self.test_batches,
               self.dialogs_per_batch) < 0:
            raise ValueError("batch counts must be >= 0")
        if not 0.0 <= self.rho_val <= 1.0:
            raise ValueError("rho_val must be in [0, 1]")
        if self.test_split not in ("test", "val"):
            raise ValueError("test_split must be 'test' or 'val'")
        if self.policies.get("clarification") == ORACLE and (
                self.train_batches or self.test_batches):
            raise ValueError("an oracle clarification bundle is only allowed "
                             "in initialization-only runs")

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        data = dict(payload)
        for key, sub in (("gen", GenConfig), ("rewards", RewardConfig),
                         ("retrieval", RetrievalConfig), ("features", FeatureConfig),
                         ("static_policy", StaticPolicyConfig),
                         ("train_config", clf.TrainConfig)):
            if key in data and isinstance(data[key], dict):
                data[key] = sub(**data[key])
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        return out


@dataclass
class BatchMetrics:
    batch: int                 # global running index
    phase: str
    phase_batch: int           # 1-based index within the phase
    success_fraction: float
    mean_dialog_length: float
    clarify_count: int
    label_count: int
    example_count: int
    counterfactual_fraction: float
    novel_attr_f1: float       # mean validation F1 of the phase split's attributes
    wall_clock_s: float

    def to_json_dict(self) -> dict:
        # wall clock varies run to run; it lives in timings.csv instead
        out = asdict(self)
        out.pop("wall_clock_s")
        return out


@dataclass
class EpisodeResult:
    setup: EpisodeSetup
    success: bool
    queries: int
    counterfactual: bool
    transcript: list
    acquired: list
    train_data: EpisodeTrainData
    episode_return: float


@dataclass
class RetrievalState:
    """Per-batch agreement scores over one classifier_test subset."""

    subset_ids: list[int]
    scores: np.ndarray          # scores[i, j] = score of item i under item j's description
    rank_cap: int
    nonempty_desc: np.ndarray   # bool per subset position
    _eligible: list[int] | None = None

    def _column(self, j: int) -> np.ndarray:
        return self.scores[:, j]

    def rank_of(self, j: int) -> int:
        """Rank (0-based) of item j under its own description."""
        s = self._column(j)
        better = (s > s[j]).sum()
        tied_before = ((s == s[j]) & (np.arange(len(s)) < j)).sum()
        return int(better + tied_before)

    def eligible_positions(self) -> list[int]:
        if self._eligible is None:
            self._eligible = [j for j in range(len(self.subset_ids))
                              if self.nonempty_desc[j] and self.rank_of(j) < self.rank_cap]
        return self._eligible

    def active_test_ids(self, j: int) -> list[int]:
        s = self._column(j)
        order = sorted(range(len(s)), key=lambda k: (-s[k], self.subset_ids[k]))
        return sorted(self.subset_ids[k] for k in order[: self.rank_cap])


def refresh_retrieval(params: clf.ClassifierParams, stats: clf.AttributeStats,
                      corpus: Corpus, subset_ids, config: RetrievalConfig) -> RetrievalState:
    """Score every subset item against every subset description by agreement
    between thresholded decisions and the description's implied labels."""
    subset_ids = sorted(subset_ids)
    if not subset_ids:
        raise ValueError("empty retrieval subset")
    X = corpus.feature_matrix(subset_ids)
    P = clf.prob_matrix(params, X)
    D = (P >= stats.thresholds[None, :]).astype(np.float64)
    w_count = corpus.num_attributes
    M = np.zeros((len(subset_ids), w_count))
    nonempty = np.zeros(len(subset_ids), dtype=bool)
    for j, item_id in enumerate(subset_ids):
        desc = corpus[item_id].description
        nonempty[j] = bool(desc)
        for w in desc:
            M[j, w] = 1.0
    agree = D @ M.T + (1.0 - D) @ (1.0 - M).T
    scores = config.c1 * agree + config.c2 * (w_count - agree)
    return RetrievalState(subset_ids=subset_ids, scores=scores,
                          rank_cap=config.rank_cap, nonempty_desc=nonempty)


def sample_episode_setup(retrieval: RetrievalState, training_pool: list[int],
                         corpus: Corpus, params: clf.ClassifierParams,
                         cfg: ExperimentConfig, rng: np.random.Generator) -> EpisodeSetup:
    """Pick target, description, active test set, and active training set."""
    if cfg.human_eval_variant:
        candidates = [j for j in range(len(retrieval.subset_ids))
                      if retrieval.nonempty_desc[j]]
        if not candidates:
            raise RuntimeError("no eligible targets in the retrieval subset")
        j = candidates[int(rng.integers(0, len(candidates)))]
        target = retrieval.subset_ids[j]
        others = [i for i in retrieval.subset_ids if i != target]
        n_other = min(cfg.human_eval_candidates - 1, len(others))
        picked = rng.choice(len(others), size=n_other, replace=False)
        te_ids = tuple(sorted([target] + [others[k] for k in picked]))
        desc = sorted(corpus[target].description)
        size = int(rng.integers(1, len(desc) + 1))
        chosen = rng.choice(len(desc), size=size, replace=False)
        description = frozenset(desc[k] for k in chosen)
    else:
        eligible = retrieval.eligible_positions()
        if not eligible:
            raise RuntimeError("no eligible targets in the retrieval subset")
        j = eligible[int(rng.integers(0, len(eligible)))]
        target = retrieval.subset_ids[j]
        te_ids = tuple(retrieval.active_test_ids(j))
        description = frozenset(corpus[target].description)

    pool = sorted(training_pool)
    n_tr = min(cfg.active_train_size, len(pool))
    picked = rng.choice(len(pool), size=n_tr, replace=False)
    tr_ids = tuple(sorted(pool[k] for k in picked))

    prob_te = clf.prob_matrix(params, corpus.feature_matrix(te_ids))
    prob_tr = clf.prob_matrix(params, corpus.feature_matrix(tr_ids))
    return EpisodeSetup(target=target, description=description, te_ids=te_ids,
                        tr_ids=tr_ids, prob_te=prob_te, prob_tr=prob_tr)


def counterfactual_success(initial_b: np.ndarray, te_ids, target: int) -> bool:
    """Would the description-only belief already have guessed the target?"""
    return te_ids[guess(initial_b)] == target


def run_episode(env: DialogEnv, bundle: PolicyBundle, extractor: FeatureExtractor,
                rng: np.random.Generator) -> EpisodeResult:
    turns, rewards = [], []
    while not env.done:
        action, record = hierarchical_act(bundle, env, extractor, rng)
        answer = env.simulate_answer(action)
        reward, _ = env.step(action, answer)
        turns.append(record)
        rewards.append(reward)
    return EpisodeResult(
        setup=env.setup,
        success=bool(env.success),
        queries=env.query_count(),
        counterfactual=counterfactual_success(env.initial_b, env.setup.te_ids,
                                              env.setup.target),
        transcript=env.transcript(),
        acquired=list(env.acquired),
        train_data=EpisodeTrainData(turns=turns, rewards=rewards),
        episode_return=float(sum(rewards)))


def apply_batch_labels(acquired: list[tuple[int, int, int, str]],
                       store: clf.LabelStore, rho_val: float,
                       rng: np.random.Generator) -> list[int]:
    """Route acquired labels to validation (with probability rho_val) or
    training; duplicates keep their first routing. Returns items that gained
    at least one training-role label."""
    touched: set[int] = set()
    for item, attr, value, source in acquired:
        if store.has(item, attr):
            continue
        role = clf.VALIDATION if rng.random() < rho_val else clf.TRAINING
        store.add(item, attr, value, role, source)
        if role == clf.TRAINING:
            touched.add(item)
    return sorted(touched)


def _rng(seed: int, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    metrics: list[BatchMetrics]
    dialogs: list[dict]
    corpus: Corpus
    split: SplitCorpus
    bundle: PolicyBundle
    params: clf.ClassifierParams
    pretrain_blob: bytes
    store: clf.LabelStore
    stats: clf.AttributeStats
    history: DialogHistoryStats
    out_dir: Path | None = None


def _load_or_generate(cfg: ExperimentConfig):
    if cfg.corpus_path:
        corpus = load_corpus(cfg.corpus_path)
        if cfg.split_path:
            split = load_split(cfg.split_path)
        else:
            split = make_split_corpus(corpus, cfg.split_ratio, cfg.seed)
    else:
        corpus = generate_corpus(cfg.gen, cfg.seed)
        split = make_split_corpus(corpus, cfg.split_ratio, cfg.seed)
    return corpus, split


def _behavior_bundle(phase: str, bundle: PolicyBundle) -> PolicyBundle:
    """Initialization collects experience with static decision/AL policies and
    oracle clarifications; other phases act with the configured bundle."""
    if phase != "init":
        return bundle
    init_bundle = make_bundle({"decision": STATIC, "clarification": ORACLE,
                               "active_learning": STATIC},
                              static_cfg=bundle.static_cfg)
    return init_bundle


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentResult:
    corpus, split = _load_or_generate(cfg)
    w_count = corpus.num_attributes

    store = clf.LabelStore()
    for i in split.ids("pretrain", "classifier_training"):
        store.add_full_item(i, corpus[i].labels, clf.TRAINING, "corpus")
    for i in split.ids("pretrain", "classifier_test"):
        store.add_full_item(i, corpus[i].labels, clf.VALIDATION, "corpus")

    params = clf.init_params(corpus.dim, w_count, seed=cfg.seed)
    pretrain_ids = split.ids("pretrain", "classifier_training")
    if pretrain_ids and cfg.train_config.epochs > 0:
        clf.pretrain(params, pretrain_ids, store, corpus, cfg.train_config,
                     seed=cfg.seed)
    stats = clf.tune_thresholds(params, store, corpus)

    pretrain_blob = clf.snapshot(params)
    pretrain_store = store.copy()
    pretrain_stats = clf.AttributeStats(
        thresholds=stats.thresholds.copy(), precision=stats.precision.copy(),
        recall=stats.recall.copy(), f1=stats.f1.copy(),
        val_positives=stats.val_positives.copy())

    bundle = make_bundle(cfg.policies, seed=cfg.seed,
                         static_cfg=cfg.static_policy, epsilon=cfg.epsilon,
                         alpha=cfg.alpha, q_lr=cfg.q_lr,
                         critic_lr=cfg.critic_lr)
    history = DialogHistoryStats()

    metrics: list[BatchMetrics] = []
    dialog_rows: list[dict] = []
    batch_counts = {"init": cfg.init_batches, "train": cfg.train_batches,
                    "test": cfg.test_batches}
    global_batch = 0

    for phase_idx, phase in enumerate(PHASES):
        n_batches = batch_counts[phase]
        if n_batches == 0:
            continue
        split_name = "train" if phase in ("init", "train") else cfg.test_split
        novel_attrs = list(corpus.catalog.partition_of(split_name))
        subset = split.ids(split_name, "classifier_test")
        pool = split.ids(split_name, "classifier_training")

        if phase == "test":
            params = clf.restore(pretrain_blob)
            store = pretrain_store.copy()
            stats = pretrain_stats
            bundle.mode = EVALUATE
        else:
            bundle.mode = TRAIN

        behavior = _behavior_bundle(phase, bundle)
        behavior.mode = bundle.mode

        for phase_batch in range(1, n_batches + 1):
            t0 = time.perf_counter()
            retrieval = refresh_retrieval(params, stats, corpus, subset,
                                          cfg.retrieval)
            novel_f1 = float(np.mean(stats.f1[novel_attrs])) if novel_attrs else 0.0

            episodes: list[EpisodeResult] = []
            for ep_idx in range(cfg.dialogs_per_batch):
                rng = _rng(cfg.seed, phase_idx, phase_batch, ep_idx, _EPISODE)
                setup = sample_episode_setup(retrieval, pool, corpus, params,
                                             cfg, rng)
                env = DialogEnv(setup, corpus, cfg.rewards, rng)
                extractor = FeatureExtractor(
                    env, stats, history, cfg.features,
                    label_known=lambda i, w: store.has(i, w))
                episodes.append(run_episode(env, behavior, extractor, rng))

            # ---- batch-boundary updates (merge order = episode order) ----
            if phase != "test":
                train_from_batch(bundle, [e.train_data for e in episodes])
            acquired = [rec for e in episodes for rec in e.acquired]
            routing_rng = _rng(cfg.seed, phase_idx, phase_batch, _ROUTING)
            touched = apply_batch_labels(acquired, store, cfg.rho_val,
                                         routing_rng)
            if touched:
                clf.incremental_update(
                    params, touched, store, corpus, cfg.train_config,
                    seed=int(_rng(cfg.seed, phase_idx, phase_batch,
                                  _HISTORY).integers(2 ** 31)))
                stats = clf.tune_thresholds(params, store, corpus)
            for e in episodes:
                history.record(e.setup.description, e.success)

            global_batch += 1
            wall = time.perf_counter() - t0
            n = len(episodes)
            metric = BatchMetrics(
                batch=global_batch, phase=phase, phase_batch=phase_batch,
                success_fraction=sum(e.success for e in episodes) / n,
                mean_dialog_length=sum(e.queries for e in episodes) / n,
                clarify_count=sum(
                    1 for e in episodes for s in e.transcript
                    if s["action"]["kind"] == "clarify"),
                label_count=sum(
                    1 for e in episodes for s in e.transcript
                    if s["action"]["kind"] == "label_query"),
                example_count=sum(
                    1 for e in episodes for s in e.transcript
                    if s["action"]["kind"] == "example_query"),
                counterfactual_fraction=sum(e.counterfactual for e in episodes) / n,
                novel_attr_f1=novel_f1,
                wall_clock_s=wall)
            metrics.append(metric)
            for ep_idx, e in enumerate(episodes):
                dialog_rows.append({
                    "batch": global_batch, "phase": phase, "episode": ep_idx,
                    "target": e.setup.target, "success": e.success,
                    "queries": e.queries, "counterfactual": e.counterfactual,
                    "return": e.episode_return,
                    "transcript": e.transcript})

    result = ExperimentResult(config=cfg, metrics=metrics, dialogs=dialog_rows,
                              corpus=corpus, split=split, bundle=bundle,
                              params=params, pretrain_blob=pretrain_blob,
                              store=store, stats=stats, history=history)
    if out_dir is not None:
        result.out_dir = Path(out_dir)
        emit_reports(result, result.out_dir)
    return result


def emit_reports(result: ExperimentResult, out_dir) -> dict[str, Path]:
    """Write metrics.jsonl, summary.json, question_split.csv,
    counterfactual.csv, dialogs.jsonl, timings.csv plus run artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    paths["metrics"] = out / "metrics.jsonl"
    with open(paths["metrics"], "w") as fh:
        for m in result.metrics:
            fh.write(json.dumps(m.to_json_dict(), sort_keys=True) + "\n")

    test_metrics = [m for m in result.metrics if m.phase == "test"]
    final = test_metrics[-1] if test_metrics else (
        result.metrics[-1] if result.metrics else None)
    summary = {
        "batches": len(result.metrics),
        "final_batch_phase": final.phase if final else None,
        "final_success_fraction": final.success_fraction if final else None,
        "final_mean_dialog_length": final.mean_dialog_length if final else None,
    }
    paths["summary"] = out / "summary.json"
    with open(paths["summary"], "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)

    paths["question_split"] = out / "question_split.csv"
    with open(paths["question_split"], "w") as fh:
        fh.write("batch,phase,clarify,label_query,example_query\n")
        for m in result.metrics:
            fh.write(f"{m.batch},{m.phase},{m.clarify_count},"
                     f"{m.label_count},{m.example_count}\n")

    paths["counterfactual"] = out / "counterfactual.csv"
    with open(paths["counterfactual"], "w") as fh:
        fh.write("batch,phase,success_fraction,counterfactual_fraction\n")
        for m in result.metrics:
            fh.write(f"{m.batch},{m.phase},{m.success_fraction},"
                     f"{m.counterfactual_fraction}\n")

    paths["dialogs"] = out / "dialogs.jsonl"
    with open(paths["dialogs"], "w") as fh:
        for row in result.dialogs:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    paths["timings"] = out / "timings.csv"
    with open(paths["timings"], "w") as fh:
        fh.write("batch,phase,wall_clock_s\n")
        for m in result.metrics:
            fh.write(f"{m.batch},{m.phase},{m.wall_clock_s:.3f}\n")

    paths["corpus"] = out / "corpus.jsonl"
    save_corpus(result.corpus, paths["corpus"])
    paths["split"] = out / "split.json"
    save_split(result.split, paths["split"])
    paths["classifier_pretrain"] = out / "classifier_pretrain.bin"
    paths["classifier_pretrain"].write_bytes(result.pretrain_blob)
    paths["classifier_final"] = out / "classifier_final.bin"
    paths["classifier_final"].write_bytes(clf.snapshot(result.params))
    paths["policy"] = out / "policy.npz"
    save_checkpoint(result.bundle, paths["policy"])
    paths["labels"] = out / "labels.jsonl"
    result.store.save(paths["labels"])
    paths["config"] = out / "config.json"
    with open(paths["config"], "w") as fh:
        json.dump(result.config.to_dict(), fh, indent=2, sort_keys=True)
    return paths
