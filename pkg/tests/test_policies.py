import numpy as np
import pytest

from attrquest.classifier import AttributeStats
from attrquest.corpus import AttributeCatalog, Corpus, Item
from attrquest.env import (
    CLARIFY,
    EXAMPLE_QUERY,
    GUESS,
    LABEL_QUERY,
    DialogAction,
    DialogEnv,
    EpisodeSetup,
    RewardConfig,
)
from attrquest.features import (
    META_ACTIVE_LEARNING,
    META_CLARIFY,
    META_GUESS,
    DialogHistoryStats,
    FeatureConfig,
    FeatureExtractor,
)
from attrquest.policies import (
    A3C,
    EVALUATE,
    QLEARN,
    STATIC,
    TRAIN,
    ActorParams,
    EpisodeTrainData,
    PolicyBundle,
    QNet,
    SlotRecord,
    StaticPolicyConfig,
    Transition,
    TurnRecord,
    a3c_select,
    a3c_update,
    actor_init,
    actor_logprob_grad,
    actor_probs,
    hierarchical_act,
    load_checkpoint,
    make_bundle,
    oracle_clarification_choice,
    q_regression_gradients,
    q_regression_loss,
    q_select,
    q_update,
    q_value,
    q_values,
    qnet_init,
    save_checkpoint,
    state_value,
    static_active_learning_choice,
    static_clarification_choice,
    static_decision_choice,
    td_target,
    train_from_batch,
    _slot_transitions,
)

from helpers import fd_gradient, norm_rel_err


# ----------------------------------------------------------------------------
# Q-network
# ----------------------------------------------------------------------------

def test_qnet_shapes_and_determinism():
    net = qnet_init(6, seed=4)
    assert net.w1.shape == (6, 100)
    again = qnet_init(6, seed=4)
    assert np.array_equal(net.w1, again.w1)
    F = np.random.default_rng(0).normal(size=(5, 6))
    assert q_values(net, F).shape == (5,)


def flatten_qnet(net):
    return np.concatenate([net.w1.ravel(), net.b1, net.w2, [net.b2]])


def unflatten_qnet(net, vec):
    i = net.w1.size
    net.w1[...] = vec[:i].reshape(net.w1.shape)
    net.b1[...] = vec[i:i + net.b1.size]
    i += net.b1.size
    net.w2[...] = vec[i:i + net.w2.size]
    net.b2 = float(vec[-1])


def test_q_regression_gradients_match_fd():
    net = qnet_init(4, hidden=7, seed=1)
    phi = np.random.default_rng(2).normal(size=4)
    target = 1.5
    grads = q_regression_gradients(net, phi, target)
    analytic = np.concatenate([grads["w1"].ravel(), grads["b1"], grads["w2"],
                               [grads["b2"]]])
    base = flatten_qnet(net)

    def fn(vec):
        work = net.copy()
        unflatten_qnet(work, vec)
        return q_regression_loss(work, phi, target)

    numeric = fd_gradient(fn, base)
    assert norm_rel_err(analytic, numeric) < 1e-4


def test_td_target():
    assert td_target(-1.0, None, 1.0) == -1.0
    assert td_target(-1.0, np.array([2.0, 0.0]), 1.0) == 1.0
    assert td_target(0.5, np.array([2.0, 4.0]), 0.5) == 2.5


def test_q_update_terminal_regression():
    net = qnet_init(3, seed=0)
    phi = np.array([1.0, 0.0, 0.0])
    tr = Transition(candidates=phi[None, :], chosen=0, reward=5.0,
                    next_candidates=None)
    for _ in range(200):
        q_update(net, [tr], gamma=1.0, lr=0.05)
    assert q_value(net, phi) == pytest.approx(5.0, abs=1e-2)


def test_q_select_modes():
    net = qnet_init(2, seed=3)
    F = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    rng = np.random.default_rng(0)
    greedy = q_select(net, F, 0.0, rng)
    assert greedy == int(np.argmax(q_values(net, F)))
    counts = np.zeros(3)
    for _ in range(9000):
        counts[q_select(net, F, 1.0, rng)] += 1
    freq = counts / counts.sum()
    assert np.all(np.abs(freq - 1 / 3) < 0.03)
    assert q_select(net, F[:1], 1.0, rng) == 0


def chain_features(s, a):
    phi = np.zeros(10)
    phi[5 * a + s] = 1.0
    return phi


def chain_value_iteration():
    q = np.zeros((5, 2))
    for _ in range(100):
        new = q.copy()
        for s in range(4):
            for a in range(2):
                s2 = min(max(s + (1 if a else -1), 0), 4)
                r = -1.0 + (10.0 if s2 == 4 else 0.0)
                new[s, a] = r + (0.0 if s2 == 4 else q[s2].max())
        q = new
    return q


def test_q_learning_chain_matches_value_iteration():
    rng = np.random.default_rng(12345)
    net = qnet_init(10, seed=0)
    transitions = []
    while len(transitions) < 250:
        s, steps = 0, 0
        while s != 4 and steps < 30:
            a = int(rng.integers(0, 2))
            s2 = min(max(s + (1 if a else -1), 0), 4)
            r = -1.0 + (10.0 if s2 == 4 else 0.0)
            nxt = None if s2 == 4 else np.stack([chain_features(s2, 0),
                                                 chain_features(s2, 1)])
            transitions.append(Transition(
                candidates=np.stack([chain_features(s, 0), chain_features(s, 1)]),
                chosen=a, reward=r, next_candidates=nxt))
            s, steps = s2, steps + 1
    transitions = transitions[:250]
    updates = 0
    while updates < 2000:
        q_update(net, transitions, gamma=1.0, lr=0.05)
        updates += len(transitions)
    oracle = chain_value_iteration()
    for s in range(4):
        qs = q_values(net, np.stack([chain_features(s, 0), chain_features(s, 1)]))
        assert int(np.argmax(qs)) == int(np.argmax(oracle[s]))


# ----------------------------------------------------------------------------
# Actor-critic
# ----------------------------------------------------------------------------

def test_actor_zero_theta_uniform():
    actor = actor_init(4)
    F = np.random.default_rng(1).normal(size=(5, 4))
    probs = actor_probs(actor, F)
    assert np.allclose(probs, 0.2)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_actor_dominant_logit():
    actor = ActorParams(theta=np.array([20.0]))
    F = np.array([[1.0], [0.0]])
    probs = actor_probs(actor, F)
    assert probs[0] > 0.999999


def test_actor_eval_mode_argmax():
    actor = ActorParams(theta=np.array([1.0, -1.0]))
    F = np.array([[0.0, 1.0], [1.0, 0.0]])
    rng = np.random.default_rng(0)
    assert a3c_select(actor, F, EVALUATE, rng) == 1


def test_actor_logprob_gradient_matches_fd():
    rng = np.random.default_rng(9)
    F = rng.normal(size=(4, 6))
    theta = rng.normal(size=6) * 0.3
    actor = ActorParams(theta=theta.copy())
    analytic = actor_logprob_grad(actor, F, 2)

    def fn(vec):
        probs = actor_probs(ActorParams(theta=vec), F)
        return float(np.log(probs[2]))

    numeric = fd_gradient(fn, theta.copy())
    assert norm_rel_err(analytic, numeric) < 1e-4


def test_state_value_uniform_actor_equal_q():
    actor = actor_init(3)
    critic = qnet_init(3, seed=2)
    F = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])  # identical rows -> equal Q
    q = q_value(critic, F[0])
    assert state_value(actor, critic, F) == pytest.approx(q, abs=1e-12)


def test_a3c_terminal_advantage_and_direction():
    actor = actor_init(2)
    critic = qnet_init(2, seed=1)
    F = np.eye(2)
    v_before = state_value(actor, critic, F)
    p_before = actor_probs(actor, F)[0]
    reward = v_before + 1.0  # guarantees positive advantage for the move
    a3c_update(actor, critic, Transition(F, 0, reward, None),
               gamma=1.0, critic_lr=0.01)
    p_after = actor_probs(actor, F)[0]
    assert p_after > p_before


def test_a3c_bandit_improvement():
    rng = np.random.default_rng(777)
    actor = actor_init(2)
    critic = qnet_init(2, seed=5)
    F = np.eye(2)
    for _ in range(5000):
        arm = a3c_select(actor, F, TRAIN, rng)
        reward = 1.0 if arm == 0 else 0.0
        a3c_update(actor, critic, Transition(F, arm, reward, None),
                   gamma=1.0, critic_lr=0.05)
    assert actor_probs(actor, F)[0] > 0.9


# ----------------------------------------------------------------------------
# Static / oracle rules
# ----------------------------------------------------------------------------

def test_static_clarification_rule_trace():
    choice = static_clarification_choice([0, 1, 2], [0.3, 0.3, 0.9],
                                         [0.5, 0.8, 0.0])
    assert choice == 1  # F1=0 excludes index 2; J tie broken by higher F1


def test_static_clarification_empty_and_single():
    assert static_clarification_choice([0, 1], [0.5, 0.9], [0.0, 0.0]) is None
    assert static_clarification_choice([3], [0.2], [0.4]) == 3


def test_static_al_uncertainty_sampling():
    rng = np.random.default_rng(0)
    labels = [(DialogAction(LABEL_QUERY, attribute=0, item=1), 0.1),
              (DialogAction(LABEL_QUERY, attribute=1, item=2), 0.4),
              (DialogAction(LABEL_QUERY, attribute=2, item=3), 0.02)]
    choice = static_active_learning_choice(labels, [], p_label=1.0, rng=rng)
    assert choice.attribute == 2


def test_static_al_example_uniform_and_fallbacks():
    rng = np.random.default_rng(1)
    examples = [DialogAction(EXAMPLE_QUERY, attribute=w) for w in range(4)]
    picks = {static_active_learning_choice([], examples, 0.0, rng).attribute
             for _ in range(100)}
    assert picks == {0, 1, 2, 3}
    # label pool exhausted: example chosen despite p_label=1
    choice = static_active_learning_choice([], examples, 1.0, rng)
    assert choice.kind == EXAMPLE_QUERY
    labels = [(DialogAction(LABEL_QUERY, attribute=0, item=1), 0.3)]
    choice = static_active_learning_choice(labels, [], 0.0, rng)
    assert choice.kind == LABEL_QUERY


def test_static_decision_traces():
    cfg = StaticPolicyConfig()
    meta = static_decision_choice(cfg, turn=0, clarifications_done=0,
                                  top_belief=0.3, best_clar_gain=0.5,
                                  has_al=True, al_turn_limit=20)
    assert meta == META_CLARIFY
    meta = static_decision_choice(cfg, turn=20, clarifications_done=0,
                                  top_belief=0.3, best_clar_gain=0.5,
                                  has_al=True, al_turn_limit=20)
    assert meta == META_CLARIFY  # clarification still allowed at the AL limit
    meta = static_decision_choice(cfg, turn=20, clarifications_done=10,
                                  top_belief=0.3, best_clar_gain=0.5,
                                  has_al=True, al_turn_limit=20)
    assert meta == META_GUESS
    meta = static_decision_choice(cfg, turn=3, clarifications_done=0,
                                  top_belief=0.99, best_clar_gain=0.5,
                                  has_al=True, al_turn_limit=20)
    assert meta == META_ACTIVE_LEARNING


def test_oracle_picks_discriminative_attribute():
    b = np.full(4, 0.25)
    prob = np.full((4, 2), 0.5)
    prob[:, 1] = [0.99, 0.01, 0.01, 0.01]
    choice = oracle_clarification_choice(b, prob, target_pos=0,
                                         candidate_attrs=[0, 1],
                                         true_answers={0: True, 1: True})
    assert choice == 1


def test_oracle_none_when_nothing_improves():
    b = np.array([1.0, 0.0])
    prob = np.array([[0.5], [0.5]])
    choice = oracle_clarification_choice(b, prob, 0, [0], {0: True})
    assert choice is None


def test_oracle_tie_lowest_index():
    b = np.full(2, 0.5)
    prob = np.array([[0.9, 0.9], [0.1, 0.1]])
    choice = oracle_clarification_choice(b, prob, 0, [0, 1],
                                         {0: True, 1: True})
    assert choice == 0


# ----------------------------------------------------------------------------
# Hierarchical composition
# ----------------------------------------------------------------------------

def build_episode(num_items=5, num_attrs=3, seed=0, max_length=20):
    rng = np.random.default_rng(seed)
    items = []
    for i in range(num_items):
        labels = (rng.random(num_attrs) < 0.6).astype(np.int8)
        labels[0] = 1
        items.append(Item(id=i, features=rng.normal(size=4), labels=labels,
                          description=frozenset({0})))
    catalog = AttributeCatalog.default(num_attrs, (num_attrs, 0, 0, 0))
    corpus = Corpus(dim=4, catalog=catalog, items=items)
    prob = rng.uniform(0.1, 0.9, size=(num_items, num_attrs))
    setup = EpisodeSetup(target=0, description=frozenset({0}),
                         te_ids=tuple(range(num_items)),
                         tr_ids=tuple(range(num_items)),
                         prob_te=prob, prob_tr=prob)
    env = DialogEnv(setup, corpus, RewardConfig(max_length=max_length),
                    np.random.default_rng(seed + 1))
    stats = AttributeStats.untuned(num_attrs)
    stats.f1[...] = 0.5
    history = DialogHistoryStats()
    extractor = FeatureExtractor(env, stats, history, FeatureConfig())
    return env, extractor


def test_hierarchical_act_returns_legal_action():
    env, extractor = build_episode()
    bundle = make_bundle({"decision": QLEARN, "clarification": A3C,
                          "active_learning": A3C}, seed=0)
    rng = np.random.default_rng(0)
    for _ in range(6):
        action, record = hierarchical_act(bundle, env, extractor, rng)
        assert action in env.legal_actions()
        _, done = env.step(action, env.simulate_answer(action))
        if done:
            break


def test_hierarchical_masking_without_clarifications():
    env, extractor = build_episode(num_attrs=2)
    for w in range(2):
        a = DialogAction(CLARIFY, attribute=w)
        env.step(a, env.simulate_answer(a))
    bundle = make_bundle({"decision": QLEARN, "clarification": QLEARN,
                          "active_learning": QLEARN}, seed=1)
    action, record = hierarchical_act(bundle, env, extractor,
                                      np.random.default_rng(0))
    assert record.meta in ("guess", "active_learning")
    assert action.kind != CLARIFY


def test_hierarchical_eval_deterministic():
    bundle = make_bundle({"decision": QLEARN, "clarification": QLEARN,
                          "active_learning": QLEARN}, seed=2)
    bundle.mode = EVALUATE
    picks = []
    for trial in range(2):
        env, extractor = build_episode(seed=5)
        action, _ = hierarchical_act(bundle, env, extractor,
                                     np.random.default_rng(trial * 17))
        picks.append(action)
    assert picks[0] == picks[1]


def test_hierarchical_static_guess_at_al_limit():
    env, extractor = build_episode(max_length=20)
    cfg = StaticPolicyConfig(al_turn_limit=0, min_info_gain=10.0)
    bundle = make_bundle({}, static_cfg=cfg)  # all static
    action, record = hierarchical_act(bundle, env, extractor,
                                      np.random.default_rng(0))
    assert action.kind == GUESS and record.meta == "guess"


def test_hierarchical_oracle_bundle():
    env, extractor = build_episode(seed=11)
    bundle = make_bundle({"clarification": "oracle"})
    action, _ = hierarchical_act(bundle, env, extractor,
                                 np.random.default_rng(3))
    assert action.kind in (CLARIFY, LABEL_QUERY, EXAMPLE_QUERY, GUESS)


# ----------------------------------------------------------------------------
# Batch training
# ----------------------------------------------------------------------------

def fabricate_episode():
    """Two executed clarifications then a correct guess."""
    def rec(dim, n=2, chosen=0):
        return SlotRecord(candidates=np.random.default_rng(0).normal(size=(n, dim)),
                          chosen=chosen)

    turns = [
        TurnRecord(meta="clarify", decision=rec(16, 3), clarification=rec(20, 4)),
        TurnRecord(meta="clarify", decision=rec(16, 3), clarification=rec(20, 3)),
        TurnRecord(meta="guess", decision=rec(16, 1)),
    ]
    rewards = [-1.0, -1.0, 20.0]
    return EpisodeTrainData(turns=turns, rewards=rewards)


def test_slot_transition_segmentation():
    ep = fabricate_episode()
    clar = _slot_transitions([ep], "clarification")
    assert len(clar) == 2
    assert clar[0].reward == -1.0
    assert clar[0].next_candidates is not None
    assert clar[1].reward == pytest.approx(19.0)  # -1 + 20 accumulated
    assert clar[1].next_candidates is None

    decision = _slot_transitions([ep], "decision")
    assert len(decision) == 3
    assert decision[2].reward == 20.0 and decision[2].next_candidates is None

    al = _slot_transitions([ep], "active_learning")
    assert al == []


def test_train_from_batch_updates_learned_slots_only():
    bundle = make_bundle({"decision": QLEARN, "clarification": A3C}, seed=3)
    w1_before = bundle.decision.net.w1.copy()
    theta_before = bundle.clarification.actor.theta.copy()
    train_from_batch(bundle, [fabricate_episode()])
    assert not np.array_equal(bundle.decision.net.w1, w1_before)
    assert not np.array_equal(bundle.clarification.actor.theta, theta_before)
    assert bundle.active_learning.kind == STATIC


def test_train_from_batch_empty_is_noop():
    bundle = make_bundle({"decision": QLEARN}, seed=4)
    w1_before = bundle.decision.net.w1.copy()
    train_from_batch(bundle, [])
    assert np.array_equal(bundle.decision.net.w1, w1_before)


def test_checkpoint_round_trip(tmp_path):
    bundle = make_bundle({"decision": QLEARN, "clarification": A3C,
                          "active_learning": STATIC}, seed=9,
                         static_cfg=StaticPolicyConfig(p_label=0.25))
    train_from_batch(bundle, [fabricate_episode()])
    path = tmp_path / "policy.npz"
    save_checkpoint(bundle, path)
    loaded = load_checkpoint(path)
    assert loaded.spec() == bundle.spec()
    assert loaded.static_cfg.p_label == 0.25
    assert np.array_equal(loaded.decision.net.w1, bundle.decision.net.w1)
    assert np.array_equal(loaded.clarification.actor.theta,
                          bundle.clarification.actor.theta)
    assert np.array_equal(loaded.clarification.critic.w2,
                          bundle.clarification.critic.w2)


def test_bundle_rejects_oracle_outside_clarification():
    with pytest.raises(ValueError):
        make_bundle({"decision": "oracle"})
