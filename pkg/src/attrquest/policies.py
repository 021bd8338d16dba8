"""Sub-policies and their hierarchical composition.

Each turn, the clarification sub-policy proposes the best clarification, the
active-learning sub-policy proposes the best label/example query, and the
decision sub-policy picks between guessing and the two proposals. Every slot
can be a hand-designed static rule, a Q-network over state-action features,
or a softmax actor with a Q-network critic; the clarification slot
additionally supports a simulation-only oracle used while bootstrapping.

Learned slots train on trajectory segments: a transition runs from one of the
slot's executed decisions to its next one (or the episode end), carrying the
undiscounted sum of the rewards in between.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .env import CLARIFY, EXAMPLE_QUERY, GUESS, LABEL_QUERY, DialogAction
from .features import (
    ACTIVE_LEARNING_DIM,
    CLARIFICATION_DIM,
    DECISION_DIM,
    META_ACTIVE_LEARNING,
    META_CLARIFY,
    META_GUESS,
)
from .grounding import info_gain, info_gain_all, update_belief

STATIC = "static"
ORACLE = "oracle"
QLEARN = "q"
A3C = "a3c"

TRAIN = "train"
EVALUATE = "eval"

CHECKPOINT_VERSION = 1


# --------------------------------------------------------------------------
# Q-network: one hidden ReLU layer, scalar output
# --------------------------------------------------------------------------

@dataclass
class QNet:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    @property
    def input_dim(self):
        return self.w1.shape[0]

    def copy(self) -> "QNet":
        return QNet(self.w1.copy(), self.b1.copy(), self.w2.copy(), float(self.b2))


def qnet_init(input_dim: int, hidden: int = 100, seed: int = 0) -> QNet:
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    lim1 = np.sqrt(6.0 / (input_dim + hidden))
    lim2 = np.sqrt(6.0 / (hidden + 1))
    return QNet(w1=rng.uniform(-lim1, lim1, size=(input_dim, hidden)),
                b1=np.zeros(hidden),
                w2=rng.uniform(-lim2, lim2, size=hidden),
                b2=0.0)


def q_values(net: QNet, features: np.ndarray) -> np.ndarray:
    F = np.atleast_2d(np.asarray(features, dtype=np.float64))
    hidden = np.maximum(F @ net.w1 + net.b1, 0.0)
    return hidden @ net.w2 + net.b2


def q_value(net: QNet, phi: np.ndarray) -> float:
    return float(q_values(net, phi)[0])


def q_regression_loss(net: QNet, phi: np.ndarray, target: float) -> float:
    return 0.5 * (q_value(net, phi) - target) ** 2


def q_regression_gradients(net: QNet, phi: np.ndarray, target: float) -> dict:
    phi = np.asarray(phi, dtype=np.float64)
    z = phi @ net.w1 + net.b1
    hidden = np.maximum(z, 0.0)
    q = float(hidden @ net.w2 + net.b2)
    dq = q - target
    g_w2 = dq * hidden
    g_b2 = dq
    g_hidden = dq * net.w2 * (z > 0)
    return {"w1": np.outer(phi, g_hidden), "b1": g_hidden,
            "w2": g_w2, "b2": g_b2}


def _sgd_step(net: QNet, grads: dict, lr: float) -> None:
    net.w1 -= lr * grads["w1"]
    net.b1 -= lr * grads["b1"]
    net.w2 -= lr * grads["w2"]
    net.b2 -= lr * grads["b2"]


def td_target(reward: float, next_qs, gamma: float) -> float:
    """Bootstrapped regression target; next_qs None means terminal."""
    if next_qs is None:
        return float(reward)
    return float(reward) + gamma * float(np.max(next_qs))


@dataclass
class Transition:
    """One trajectory segment for a single sub-policy.

    candidates: feature matrix of the slot's options when it acted.
    chosen: row index of the executed option.
    reward: undiscounted reward accumulated until the slot's next decision.
    next_candidates: feature matrix at that next decision, None if terminal.
    """

    candidates: np.ndarray
    chosen: int
    reward: float
    next_candidates: np.ndarray | None


def q_update(net: QNet, transitions: list[Transition], gamma: float, lr: float) -> QNet:
    """One sweep of TD(0) regression steps; targets use the net frozen at
    sweep start for stability."""
    frozen = net.copy()
    for tr in transitions:
        next_qs = None if tr.next_candidates is None else q_values(frozen, tr.next_candidates)
        target = td_target(tr.reward, next_qs, gamma)
        if not np.isfinite(target):
            raise ValueError("non-finite Q target")
        grads = q_regression_gradients(net, tr.candidates[tr.chosen], target)
        _sgd_step(net, grads, lr)
    return net


def q_select(net: QNet, features: np.ndarray, epsilon: float,
             rng: np.random.Generator) -> int:
    """Epsilon-greedy argmax over candidate rows; ties to the lowest index."""
    F = np.atleast_2d(features)
    if F.shape[0] == 0:
        raise ValueError("no candidates")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(0, F.shape[0]))
    return int(np.argmax(q_values(net, F)))


# --------------------------------------------------------------------------
# Actor-critic: linear softmax actor, Q-network critic
# --------------------------------------------------------------------------

@dataclass
class ActorParams:
    theta: np.ndarray
    alpha: float = 0.01

    def copy(self) -> "ActorParams":
        return ActorParams(self.theta.copy(), self.alpha)


def actor_init(input_dim: int, alpha: float = 0.01) -> ActorParams:
    return ActorParams(theta=np.zeros(input_dim), alpha=alpha)


def actor_probs(actor: ActorParams, features: np.ndarray) -> np.ndarray:
    logits = np.atleast_2d(features) @ actor.theta
    logits -= logits.max()
    expd = np.exp(logits)
    return expd / expd.sum()


def actor_logprob_grad(actor: ActorParams, features: np.ndarray, chosen: int) -> np.ndarray:
    F = np.atleast_2d(features)
    probs = actor_probs(actor, F)
    return F[chosen] - probs @ F


def a3c_select(actor: ActorParams, features: np.ndarray, mode: str,
               rng: np.random.Generator) -> int:
    F = np.atleast_2d(features)
    if F.shape[0] == 0:
        raise ValueError("no candidates")
    probs = actor_probs(actor, F)
    if mode == TRAIN:
        return int(rng.choice(F.shape[0], p=probs))
    return int(np.argmax(probs))


def state_value(actor: ActorParams, critic: QNet, features: np.ndarray) -> float:
    """V(s) = sum_a pi(s,a) Q(s,a) over the candidate set."""
    probs = actor_probs(actor, features)
    return float(probs @ q_values(critic, features))


def a3c_update(actor: ActorParams, critic: QNet, transition: Transition,
               gamma: float, critic_lr: float) -> tuple[ActorParams, QNet]:
    """Advantage step on the actor plus a Q-style regression on the critic;
    the advantage and the critic target both use the pre-update critic."""
    if transition.next_candidates is None:
        next_v, next_max = 0.0, None
    else:
        next_v = state_value(actor, critic, transition.next_candidates)
        next_max = q_values(critic, transition.next_candidates)
    advantage = transition.reward + gamma * next_v - state_value(
        actor, critic, transition.candidates)
    if not np.isfinite(advantage):
        raise ValueError("non-finite advantage")
    target = td_target(transition.reward, next_max, gamma)
    grads = q_regression_gradients(critic, transition.candidates[transition.chosen], target)
    grad_logpi = actor_logprob_grad(actor, transition.candidates, transition.chosen)
    _sgd_step(critic, grads, critic_lr)
    actor.theta += actor.alpha * grad_logpi * advantage
    return actor, critic


# --------------------------------------------------------------------------
# Static and oracle rules
# --------------------------------------------------------------------------

@dataclass
class StaticPolicyConfig:
    min_info_gain: float = 0.01          # clarify only above this gain
    belief_confidence: float = 0.95      # stop clarifying once top belief passes
    max_clarifications: int = 10
    al_turn_limit: int | None = None     # defaults to the dialog turn limit
    p_label: float = 0.35                # label-vs-example query coin

    def __post_init__(self):
        if not 0.0 <= self.p_label <= 1.0:
            raise ValueError("p_label must be in [0, 1]")


def static_clarification_choice(candidate_attrs, j_values, f1_values):
    """Max info gain among attributes with F1 > 0; ties by F1, then index."""
    best = None
    for k, w in enumerate(candidate_attrs):
        if f1_values[k] <= 0.0:
            continue
        key = (j_values[k], f1_values[k], -w)
        if best is None or key > best[0]:
            best = (key, w)
    return None if best is None else best[1]


def static_active_learning_choice(label_candidates, example_candidates,
                                  p_label, rng):
    """label_candidates: [(action, margin)]; example_candidates: [action].
    Coin-flips between pools, uncertainty-samples labels, uniform examples;
    falls back to the non-empty pool."""
    want_label = rng.random() < p_label
    if want_label and not label_candidates:
        want_label = False
    if not want_label and not example_candidates:
        want_label = bool(label_candidates)
    if want_label:
        best = min(label_candidates, key=lambda la: (la[1], la[0].attribute))
        return best[0]
    if example_candidates:
        return example_candidates[int(rng.integers(0, len(example_candidates)))]
    return None


def static_decision_choice(cfg: StaticPolicyConfig, turn: int,
                           clarifications_done: int, top_belief: float,
                           best_clar_gain: float | None, has_al: bool,
                           al_turn_limit: int) -> int:
    if (best_clar_gain is not None
            and best_clar_gain >= cfg.min_info_gain
            and top_belief < cfg.belief_confidence
            and clarifications_done < cfg.max_clarifications):
        return META_CLARIFY
    if turn < al_turn_limit and has_al:
        return META_ACTIVE_LEARNING
    return META_GUESS


def oracle_clarification_choice(b, prob_te, target_pos, candidate_attrs,
                                true_answers):
    """Try each candidate with its ground-truth answer; return the attribute
    that maximally raises the target's belief, None if nothing improves."""
    base = b[target_pos]
    best_attr, best_score = None, base
    for w in sorted(candidate_attrs):
        updated = update_belief(b, prob_te[:, w], true_answers[w])
        if updated[target_pos] > best_score:
            best_attr, best_score = w, updated[target_pos]
    return best_attr


# --------------------------------------------------------------------------
# Bundle
# --------------------------------------------------------------------------

@dataclass
class SubPolicy:
    kind: str
    net: QNet | None = None
    actor: ActorParams | None = None
    critic: QNet | None = None

    @property
    def learned(self) -> bool:
        return self.kind in (QLEARN, A3C)


def make_sub_policy(kind: str, input_dim: int, seed: int, alpha: float = 0.01) -> SubPolicy:
    if kind == QLEARN:
        return SubPolicy(kind, net=qnet_init(input_dim, seed=seed))
    if kind == A3C:
        return SubPolicy(kind, actor=actor_init(input_dim, alpha=alpha),
                         critic=qnet_init(input_dim, seed=seed))
    if kind in (STATIC, ORACLE):
        return SubPolicy(kind)
    raise ValueError(f"unknown sub-policy kind {kind!r}")


@dataclass
class PolicyBundle:
    clarification: SubPolicy
    active_learning: SubPolicy
    decision: SubPolicy
    static_cfg: StaticPolicyConfig = field(default_factory=StaticPolicyConfig)
    epsilon: float = 0.1
    gamma: float = 1.0
    q_lr: float = 0.01
    critic_lr: float = 0.01
    mode: str = TRAIN

    def __post_init__(self):
        if self.active_learning.kind == ORACLE or self.decision.kind == ORACLE:
            raise ValueError("oracle is only defined for the clarification slot")

    def spec(self) -> dict:
        return {"clarification": self.clarification.kind,
                "active_learning": self.active_learning.kind,
                "decision": self.decision.kind}


def make_bundle(spec: dict, seed: int = 0,
                static_cfg: StaticPolicyConfig | None = None,
                epsilon: float = 0.1, alpha: float = 0.01,
                q_lr: float = 0.01, critic_lr: float = 0.01) -> PolicyBundle:
    dims = {"clarification": CLARIFICATION_DIM,
            "active_learning": ACTIVE_LEARNING_DIM,
            "decision": DECISION_DIM}
    subs = {}
    for slot_idx, slot in enumerate(("clarification", "active_learning", "decision")):
        kind = spec.get(slot, STATIC)
        subs[slot] = make_sub_policy(kind, dims[slot], seed=seed * 7919 + slot_idx,
                                     alpha=alpha)
    return PolicyBundle(clarification=subs["clarification"],
                        active_learning=subs["active_learning"],
                        decision=subs["decision"],
                        static_cfg=static_cfg or StaticPolicyConfig(),
                        epsilon=epsilon, q_lr=q_lr, critic_lr=critic_lr)


# --------------------------------------------------------------------------
# Hierarchical action selection
# --------------------------------------------------------------------------

@dataclass
class SlotRecord:
    """What a sub-policy saw and picked at one turn."""

    candidates: np.ndarray
    chosen: int
    executed: bool = True


@dataclass
class TurnRecord:
    meta: str
    decision: SlotRecord
    clarification: SlotRecord | None = None
    active_learning: SlotRecord | None = None


def _select(sub: SubPolicy, features: np.ndarray, mode: str, epsilon: float,
            rng: np.random.Generator) -> int:
    if sub.kind == QLEARN:
        return q_select(sub.net, features, epsilon if mode == TRAIN else 0.0, rng)
    if sub.kind == A3C:
        return a3c_select(sub.actor, features, mode, rng)
    raise ValueError(f"{sub.kind!r} has no feature-based selector")


def hierarchical_act(bundle: PolicyBundle, env, extractor,
                     rng: np.random.Generator) -> tuple[DialogAction, TurnRecord]:
    """Resolve the two query proposals, then the meta decision."""
    legal = env.legal_actions()
    clar_attrs = sorted(a.attribute for a in legal if a.kind == CLARIFY)
    al_actions = [a for a in legal if a.kind in (LABEL_QUERY, EXAMPLE_QUERY)]
    stats = extractor.stats
    cfg = bundle.static_cfg

    # --- best clarification -------------------------------------------------
    best_clar = None      # (attribute, info_gain, f1)
    clar_record = None
    if clar_attrs:
        sub = bundle.clarification
        if sub.kind == STATIC:
            j_values = info_gain_all(env.b, env.setup.prob_te[:, clar_attrs])
            f1_values = [stats.f1[w] for w in clar_attrs]
            choice = static_clarification_choice(clar_attrs, j_values, f1_values)
        elif sub.kind == ORACLE:
            answers = {w: bool(env.corpus[env.setup.target].labels[w])
                       for w in clar_attrs}
            target_pos = env.setup.te_ids.index(env.setup.target)
            choice = oracle_clarification_choice(env.b, env.setup.prob_te,
                                                 target_pos, clar_attrs, answers)
        else:
            feats = np.stack([extractor.clarification_features(w) for w in clar_attrs])
            pos = _select(sub, feats, bundle.mode, bundle.epsilon, rng)
            choice = clar_attrs[pos]
            clar_record = SlotRecord(candidates=feats, chosen=pos)
        if choice is not None:
            gain = info_gain(env.b, env.setup.prob_te[:, choice])
            best_clar = (choice, gain, float(stats.f1[choice]))
            if clar_record is None:
                feats = np.stack([extractor.clarification_features(w) for w in clar_attrs])
                clar_record = SlotRecord(candidates=feats,
                                         chosen=clar_attrs.index(choice))

    # --- best active learning query ------------------------------------------
    best_al = None        # (action, margin, f1)
    al_record = None
    if al_actions:
        sub = bundle.active_learning
        if sub.kind == STATIC:
            labels, examples = [], []
            for action in al_actions:
                if action.kind == LABEL_QUERY:
                    k = env.setup.tr_ids.index(action.item)
                    margin = abs(env.setup.prob_tr[k, action.attribute] - 0.5)
                    labels.append((action, margin))
                else:
                    examples.append(action)
            choice_action = static_active_learning_choice(labels, examples,
                                                          cfg.p_label, rng)
        else:
            feats = np.stack([extractor.active_learning_features(a) for a in al_actions])
            pos = _select(sub, feats, bundle.mode, bundle.epsilon, rng)
            choice_action = al_actions[pos]
            al_record = SlotRecord(candidates=feats, chosen=pos)
        if choice_action is not None:
            margin = 0.0
            if choice_action.kind == LABEL_QUERY:
                k = env.setup.tr_ids.index(choice_action.item)
                margin = abs(env.setup.prob_tr[k, choice_action.attribute] - 0.5)
            best_al = (choice_action, margin, float(stats.f1[choice_action.attribute]))
            if al_record is None:
                feats = np.stack([extractor.active_learning_features(a) for a in al_actions])
                al_record = SlotRecord(candidates=feats,
                                       chosen=al_actions.index(choice_action))

    # --- meta decision ---------------------------------------------------------
    available = [META_GUESS]
    if best_clar is not None:
        available.append(META_CLARIFY)
    if best_al is not None:
        available.append(META_ACTIVE_LEARNING)
    all_rows = extractor.decision_features(best_clar, best_al)
    rows = all_rows[available]

    sub = bundle.decision
    if sub.kind == STATIC:
        al_limit = (cfg.al_turn_limit if cfg.al_turn_limit is not None
                    else env.reward_cfg.max_length)
        meta = static_decision_choice(
            cfg, env.turn, len(env.w_p) + len(env.w_n), float(env.b.max()),
            None if best_clar is None else best_clar[1],
            best_al is not None, al_limit)
        if meta not in available:
            meta = META_GUESS
        pos = available.index(meta)
    else:
        pos = _select(sub, rows, bundle.mode, bundle.epsilon, rng)
        meta = available[pos]

    decision_record = SlotRecord(candidates=rows, chosen=pos)
    if meta == META_CLARIFY:
        action = DialogAction(CLARIFY, attribute=best_clar[0])
    elif meta == META_ACTIVE_LEARNING:
        action = best_al[0]
    else:
        action = DialogAction(GUESS)

    record = TurnRecord(
        meta=("guess", "clarify", "active_learning")[meta],
        decision=decision_record,
        clarification=clar_record if meta == META_CLARIFY else None,
        active_learning=al_record if meta == META_ACTIVE_LEARNING else None)
    return action, record


# --------------------------------------------------------------------------
# Batch training
# --------------------------------------------------------------------------

@dataclass
class EpisodeTrainData:
    """Per-turn records plus per-step rewards of one finished episode."""

    turns: list[TurnRecord]
    rewards: list[float]


def _slot_transitions(episodes: list[EpisodeTrainData], slot: str) -> list[Transition]:
    transitions = []
    for ep in episodes:
        if slot == "decision":
            acted = list(range(len(ep.turns)))
            records = [t.decision for t in ep.turns]
        else:
            acted, records = [], []
            for k, turn in enumerate(ep.turns):
                rec = getattr(turn, slot)
                if rec is not None:
                    acted.append(k)
                    records.append(rec)
        for j, t in enumerate(acted):
            if j + 1 < len(acted):
                t_next = acted[j + 1]
                reward = sum(ep.rewards[t:t_next])
                nxt = records[j + 1].candidates
            else:
                reward = sum(ep.rewards[t:])
                nxt = None
            transitions.append(Transition(candidates=records[j].candidates,
                                          chosen=records[j].chosen,
                                          reward=reward, next_candidates=nxt))
    return transitions


def train_from_batch(bundle: PolicyBundle, episodes: list[EpisodeTrainData]) -> PolicyBundle:
    """Update each learned sub-policy on its own transition subsequences."""
    if not episodes:
        return bundle
    for slot in ("clarification", "active_learning", "decision"):
        sub: SubPolicy = getattr(bundle, slot)
        if not sub.learned:
            continue
        transitions = _slot_transitions(episodes, slot)
        if not transitions:
            continue
        if sub.kind == QLEARN:
            q_update(sub.net, transitions, bundle.gamma, bundle.q_lr)
        else:
            for tr in transitions:
                a3c_update(sub.actor, sub.critic, tr, bundle.gamma, bundle.critic_lr)
    return bundle


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------

def save_checkpoint(bundle: PolicyBundle, path) -> None:
    arrays = {}
    for slot in ("clarification", "active_learning", "decision"):
        sub: SubPolicy = getattr(bundle, slot)
        if sub.net is not None:
            for key in ("w1", "b1", "w2"):
                arrays[f"{slot}_net_{key}"] = getattr(sub.net, key)
            arrays[f"{slot}_net_b2"] = np.array(sub.net.b2)
        if sub.actor is not None:
            arrays[f"{slot}_actor_theta"] = sub.actor.theta
            arrays[f"{slot}_actor_alpha"] = np.array(sub.actor.alpha)
        if sub.critic is not None:
            for key in ("w1", "b1", "w2"):
                arrays[f"{slot}_critic_{key}"] = getattr(sub.critic, key)
            arrays[f"{slot}_critic_b2"] = np.array(sub.critic.b2)
    meta = {"version": CHECKPOINT_VERSION, "spec": bundle.spec(),
            "static_cfg": asdict(bundle.static_cfg),
            "epsilon": bundle.epsilon, "gamma": bundle.gamma,
            "q_lr": bundle.q_lr, "critic_lr": bundle.critic_lr}
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                 **arrays)


def load_checkpoint(path) -> PolicyBundle:
    data = np.load(path)
    meta = json.loads(bytes(data["meta"]).decode())
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
    bundle = make_bundle(meta["spec"],
                         static_cfg=StaticPolicyConfig(**meta["static_cfg"]),
                         epsilon=meta["epsilon"], q_lr=meta["q_lr"],
                         critic_lr=meta["critic_lr"])
    bundle.gamma = meta["gamma"]
    for slot in ("clarification", "active_learning", "decision"):
        sub: SubPolicy = getattr(bundle, slot)
        if sub.net is not None:
            sub.net = QNet(w1=data[f"{slot}_net_w1"], b1=data[f"{slot}_net_b1"],
                           w2=data[f"{slot}_net_w2"],
                           b2=float(data[f"{slot}_net_b2"]))
        if sub.actor is not None:
            sub.actor = ActorParams(theta=data[f"{slot}_actor_theta"],
                                    alpha=float(data[f"{slot}_actor_alpha"]))
        if sub.critic is not None:
            sub.critic = QNet(w1=data[f"{slot}_critic_w1"],
                              b1=data[f"{slot}_critic_b1"],
                              w2=data[f"{slot}_critic_w2"],
                              b2=float(data[f"{slot}_critic_b2"]))
    return bundle
