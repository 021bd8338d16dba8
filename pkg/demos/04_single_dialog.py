"""Step through one simulated dialog with the static hierarchical policy.

The decision policy clarifies while information gain is high and the belief
is unsettled, switches to active learning afterwards, and is forced to guess
at the turn limit. Every query costs -1; the final guess pays +20 or -20.
"""

import numpy as np

from attrquest import classifier as clf_mod
from attrquest import (
    DialogEnv,
    DialogHistoryStats,
    FeatureConfig,
    FeatureExtractor,
    GenConfig,
    RewardConfig,
    generate_corpus,
    hierarchical_act,
    make_bundle,
    make_split_corpus,
)
from attrquest.classifier import TRAINING, VALIDATION
from attrquest.experiment import refresh_retrieval, sample_episode_setup, \
    ExperimentConfig
from attrquest.grounding import RetrievalConfig

corpus = generate_corpus(GenConfig(), seed=0)
split = make_split_corpus(corpus, 0.6, seed=0)
store = clf_mod.LabelStore()
for i in split.ids("pretrain", "classifier_training"):
    store.add_full_item(i, corpus[i].labels, TRAINING, "corpus")
for i in split.ids("pretrain", "classifier_test"):
    store.add_full_item(i, corpus[i].labels, VALIDATION, "corpus")
params = clf_mod.init_params(corpus.dim, corpus.num_attributes, seed=1)
clf_mod.pretrain(params, split.ids("pretrain", "classifier_training"), store,
                 corpus, clf_mod.TrainConfig(), seed=0)
stats = clf_mod.tune_thresholds(params, store, corpus)

cfg = ExperimentConfig()
retrieval = refresh_retrieval(params, stats, corpus,
                              split.ids("train", "classifier_test"),
                              RetrievalConfig())
rng = np.random.default_rng(3)
setup = sample_episode_setup(retrieval, split.ids("train", "classifier_training"),
                             corpus, params, cfg, rng)
env = DialogEnv(setup, corpus, RewardConfig(), rng)
extractor = FeatureExtractor(env, stats, DialogHistoryStats(), FeatureConfig(),
                             label_known=lambda i, w: store.has(i, w))
bundle = make_bundle({})  # fully static

names = corpus.catalog.names
print(f"target {setup.target} hidden among {len(setup.te_ids)} candidates; "
      f"description: {[names[w] for w in sorted(setup.description)]}")
while not env.done:
    action, record = hierarchical_act(bundle, env, extractor, rng)
    answer = env.simulate_answer(action)
    reward, done = env.step(action, answer)
    detail = ""
    if action.kind == "clarify":
        detail = f"{names[action.attribute]} -> {'yes' if answer.yes else 'no'}"
    elif action.kind == "label_query":
        detail = f"{names[action.attribute]} of item {action.item} -> " \
                 f"{'yes' if answer.yes else 'no'}"
    elif action.kind == "example_query":
        detail = f"{names[action.attribute]} -> example {answer.example_item}"
    else:
        detail = f"item {answer.guessed_item}, correct={answer.correct}"
    print(f"turn {env.turn - 1:2d} [{record.meta:15s}] {action.kind:13s} "
          f"{detail:40s} reward {reward:+.0f}  top belief {env.b.max():.3f}")

print(f"\nreturn {sum(s.reward for s in env.steps):+.0f}, "
      f"{env.query_count()} queries, success={env.success}")
print(f"acquired {len(env.acquired)} labels for future classifier updates")
