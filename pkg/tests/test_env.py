import numpy as np
import pytest

from attrquest.corpus import AttributeCatalog, Corpus, Item
from attrquest.env import (
    CLARIFY,
    EXAMPLE_QUERY,
    GUESS,
    LABEL_QUERY,
    Answer,
    DialogAction,
    DialogEnv,
    EpisodeSetup,
    RewardConfig,
    episode_return,
)


def small_world(num_items=6, num_attrs=3, seed=0):
    rng = np.random.default_rng(seed)
    items = []
    for i in range(num_items):
        labels = (rng.random(num_attrs) < 0.5).astype(np.int8)
        items.append(Item(id=i, features=rng.normal(size=4), labels=labels,
                          description=frozenset(np.flatnonzero(labels)[:2].tolist())))
    catalog = AttributeCatalog.default(num_attrs, (num_attrs, 0, 0, 0))
    corpus = Corpus(dim=4, catalog=catalog, items=items)
    prob = rng.uniform(0.1, 0.9, size=(num_items, num_attrs))
    return corpus, prob


def make_env(corpus, prob, target=None, description=None, reward=None, seed=1):
    te = tuple(it.id for it in corpus.items)
    if target is None:
        target = next(it.id for it in corpus.items if it.description)
    if description is None:
        description = corpus[target].description
    setup = EpisodeSetup(target=target, description=frozenset(description),
                         te_ids=te, tr_ids=te, prob_te=prob, prob_tr=prob)
    return DialogEnv(setup, corpus, reward or RewardConfig(),
                     np.random.default_rng(seed))


def test_reset_state():
    corpus, prob = small_world()
    env = make_env(corpus, prob)
    assert env.turn == 0
    assert env.asked == set()
    assert env.acquired == []
    expected = prob[:, sorted(env.w_d)]
    manual = np.prod(np.clip(expected, 1e-7, 1 - 1e-7), axis=1)
    assert np.allclose(env.b, manual / manual.sum())


def test_reset_validations():
    corpus, prob = small_world()
    te = tuple(it.id for it in corpus.items)
    setup = EpisodeSetup(target=99, description=frozenset({0}), te_ids=te,
                         tr_ids=te, prob_te=prob, prob_tr=prob)
    with pytest.raises(ValueError):
        DialogEnv(setup, corpus, RewardConfig(), np.random.default_rng(0))
    setup = EpisodeSetup(target=te[0], description=frozenset(), te_ids=te,
                         tr_ids=te, prob_te=prob, prob_tr=prob)
    with pytest.raises(ValueError):
        DialogEnv(setup, corpus, RewardConfig(), np.random.default_rng(0))


def test_legal_action_count_fresh():
    corpus, prob = small_world(num_attrs=3)
    env = make_env(corpus, prob)
    actions = env.legal_actions()
    # 1 guess + 3 clarifications + 3 example queries + 3 reduced label queries
    assert len(actions) == 10
    kinds = [a.kind for a in actions]
    assert kinds.count(GUESS) == 1
    assert kinds.count(CLARIFY) == 3
    assert kinds.count(EXAMPLE_QUERY) == 3
    assert kinds.count(LABEL_QUERY) == 3


def test_asked_actions_disappear():
    corpus, prob = small_world()
    env = make_env(corpus, prob)
    clarify = DialogAction(CLARIFY, attribute=2)
    env.step(clarify, env.simulate_answer(clarify))
    assert clarify not in env.legal_actions()
    with pytest.raises(ValueError):
        env.step(clarify, Answer("yes_no", yes=True))


def test_reduced_label_candidate_is_min_margin():
    corpus, prob = small_world()
    env = make_env(corpus, prob)
    w = 1
    expected = env.setup.tr_ids[int(np.argmin(np.abs(prob[:, w] - 0.5)))]
    assert env.reduced_label_candidate(w) == expected
    action = DialogAction(LABEL_QUERY, attribute=w, item=expected)
    env.step(action, env.simulate_answer(action))
    nxt = env.reduced_label_candidate(w)
    assert nxt != expected


def test_turn_limit_forces_guess():
    corpus, prob = small_world()
    env = make_env(corpus, prob, reward=RewardConfig(max_length=2))
    for w in (0, 1):
        a = DialogAction(CLARIFY, attribute=w)
        env.step(a, env.simulate_answer(a))
    assert [a.kind for a in env.legal_actions()] == [GUESS]
    with pytest.raises(ValueError):
        env.step(DialogAction(CLARIFY, attribute=2), Answer("yes_no", yes=True))


def test_simulated_answers_match_ground_truth():
    corpus, prob = small_world()
    env = make_env(corpus, prob)
    target = env.setup.target
    for w in range(3):
        ans = env.simulate_answer(DialogAction(CLARIFY, attribute=w))
        assert ans.yes == bool(corpus[target].labels[w])
    for item in env.setup.tr_ids[:3]:
        ans = env.simulate_answer(DialogAction(LABEL_QUERY, attribute=1, item=item))
        assert ans.yes == bool(corpus[item].labels[1])


def test_example_query_returns_positive_or_none():
    corpus, prob = small_world(seed=3)
    env = make_env(corpus, prob)
    for w in range(3):
        ans = env.simulate_answer(DialogAction(EXAMPLE_QUERY, attribute=w))
        positives = [i for i in env.setup.tr_ids if corpus[i].labels[w] == 1]
        if positives:
            assert ans.example_item in positives
        else:
            assert ans.example_item is None


def test_step_rewards_and_termination():
    corpus, prob = small_world()
    env = make_env(corpus, prob)
    a = DialogAction(CLARIFY, attribute=0)
    reward, done = env.step(a, env.simulate_answer(a))
    assert reward == -1.0 and not done
    g = DialogAction(GUESS)
    outcome = env.simulate_answer(g)
    reward, done = env.step(g, outcome)
    assert done
    assert reward == (20.0 if outcome.correct else -20.0)
    assert env.success == outcome.correct


def test_correct_guess_reward():
    corpus, prob = small_world()
    env = make_env(corpus, prob)
    # force belief onto the target by construction: target gets prob 1 in w0
    target = env.setup.target
    k = env.setup.te_ids.index(target)
    prob2 = prob.copy()
    prob2[:, 0] = 0.01
    prob2[k, 0] = 0.99
    env2 = make_env(corpus, prob2, target=target, description={0})
    g = DialogAction(GUESS)
    outcome = env2.simulate_answer(g)
    assert outcome.guessed_item == target and outcome.correct
    reward, done = env2.step(g, outcome)
    assert reward == 20.0 and done


def test_clarify_updates_belief_likelihood_ratio():
    corpus, prob = small_world(seed=5)
    env = make_env(corpus, prob)
    before = env.b.copy()
    w = 2
    env.step(DialogAction(CLARIFY, attribute=w), Answer("yes_no", yes=True))
    ratio = env.b / before
    order = np.argsort(prob[:, w])
    ratios_sorted = ratio[order]
    assert np.all(np.diff(ratios_sorted) >= -1e-12)


def test_acquired_buffer_matches_ground_truth():
    corpus, prob = small_world(seed=7)
    env = make_env(corpus, prob)
    for w in range(3):
        item = env.reduced_label_candidate(w)
        a = DialogAction(LABEL_QUERY, attribute=w, item=item)
        env.step(a, env.simulate_answer(a))
        e = DialogAction(EXAMPLE_QUERY, attribute=w)
        env.step(e, env.simulate_answer(e))
    for item, attr, value, source in env.acquired:
        assert source == "simulator"
        assert value == int(corpus[item].labels[attr])


def test_episode_return_accounting():
    corpus, prob = small_world()
    env = make_env(corpus, prob)
    for w in (0, 1):
        a = DialogAction(CLARIFY, attribute=w)
        env.step(a, env.simulate_answer(a))
    g = DialogAction(GUESS)
    outcome = env.simulate_answer(g)
    env.step(g, outcome)
    total = episode_return(env.transcript(), env.reward_cfg)
    expected = -2.0 + (20.0 if outcome.correct else -20.0)
    assert total == expected
    assert env.query_count() == 2


def test_episode_return_errors():
    with pytest.raises(ValueError):
        episode_return([], RewardConfig())
    corpus, prob = small_world()
    env = make_env(corpus, prob)
    a = DialogAction(CLARIFY, attribute=0)
    env.step(a, env.simulate_answer(a))
    with pytest.raises(ValueError):
        episode_return(env.transcript(), env.reward_cfg)


def test_max_length_episode_return():
    corpus, prob = small_world()
    cfg = RewardConfig(max_length=3)
    env = make_env(corpus, prob, reward=cfg)
    for w in range(3):
        a = DialogAction(CLARIFY, attribute=w)
        env.step(a, env.simulate_answer(a))
    g = DialogAction(GUESS)
    outcome = env.simulate_answer(g)
    env.step(g, outcome)
    total = episode_return(env.transcript(), cfg)
    assert total == 3 * -1.0 + (20.0 if outcome.correct else -20.0)


def test_no_action_repeats_over_random_episode():
    corpus, prob = small_world(num_items=8, num_attrs=4, seed=9)
    rng = np.random.default_rng(3)
    env = make_env(corpus, prob, reward=RewardConfig(max_length=10))
    seen = []
    while True:
        legal = env.legal_actions()
        queries = [a for a in legal if a.kind != GUESS]
        action = queries[int(rng.integers(0, len(queries)))] if queries else DialogAction(GUESS)
        if env.turn >= 8 or not queries:
            action = DialogAction(GUESS)
        _, done = env.step(action, env.simulate_answer(action))
        seen.append(action)
        if done:
            break
    assert len(seen) == len(set(seen))
    assert sum(1 for a in seen if a.kind == GUESS) == 1
    assert env.query_count() <= 10


def test_reward_config_validation():
    with pytest.raises(ValueError):
        RewardConfig(success=-1.0)
    with pytest.raises(ValueError):
        RewardConfig(max_length=0)
