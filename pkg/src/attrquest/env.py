"""Dialog episode environment.

One episode: the agent receives a description of a hidden target item, may
ask clarification questions about the target, label/example queries against
the active training pool, and ends by guessing. Answers come either from the
ground-truth simulator here or from a human through the session service.

Label queries are reduced to one candidate per attribute: the pool item whose
predicted probability is closest to 0.5 among pairs not yet asked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grounding import compute_belief, guess, update_belief

GUESS = "guess"
CLARIFY = "clarify"
LABEL_QUERY = "label_query"
EXAMPLE_QUERY = "example_query"

YES_NO = "yes_no"
EXAMPLE = "example"
OUTCOME = "outcome"


@dataclass(frozen=True)
class DialogAction:
    kind: str
    attribute: int | None = None
    item: int | None = None

    def to_dict(self):
        d = {"kind": self.kind}
        if self.attribute is not None:
            d["attribute"] = self.attribute
        if self.item is not None:
            d["item"] = self.item
        return d


@dataclass(frozen=True)
class Answer:
    kind: str
    yes: bool | None = None
    example_item: int | None = None
    guessed_item: int | None = None
    correct: bool | None = None
    source: str = "simulator"

    def to_dict(self):
        d = {"kind": self.kind}
        if self.yes is not None:
            d["yes"] = self.yes
        if self.kind == EXAMPLE:
            d["example_item"] = self.example_item
        if self.guessed_item is not None:
            d["guessed_item"] = self.guessed_item
        if self.correct is not None:
            d["correct"] = self.correct
        return d


@dataclass
class RewardConfig:
    success: float = 20.0
    failure: float = -20.0
    query: float = -1.0
    max_length: int = 20

    def __post_init__(self):
        if not (self.success > 0 > self.query):
            raise ValueError("need success > 0 > query reward")
        if self.max_length < 1:
            raise ValueError("max_length must be >= 1")


@dataclass
class TranscriptStep:
    turn: int
    action: DialogAction
    answer: Answer
    reward: float

    def to_dict(self):
        return {"turn": self.turn, "action": self.action.to_dict(),
                "answer": self.answer.to_dict(), "reward": self.reward}


@dataclass
class EpisodeSetup:
    """Sampled ingredients of one episode; probability matrices come from the
    frozen per-batch classifier snapshot."""

    target: int
    description: frozenset[int]
    te_ids: tuple[int, ...]       # active test set, ascending item id
    tr_ids: tuple[int, ...]       # active training set, ascending item id
    prob_te: np.ndarray           # |I_te| x |W|
    prob_tr: np.ndarray           # |I_tr| x |W|


class DialogEnv:
    """Single-episode MDP; answers are injected via step()."""

    def __init__(self, setup: EpisodeSetup, corpus, reward: RewardConfig,
                 rng: np.random.Generator):
        if setup.target not in setup.te_ids:
            raise ValueError("target must be inside the active test set")
        if not setup.description:
            raise ValueError("description must be non-empty")
        self.setup = setup
        self.corpus = corpus
        self.reward_cfg = reward
        self.rng = rng
        self.num_attributes = setup.prob_te.shape[1]

        self.w_d = frozenset(setup.description)
        self.w_p: set[int] = set()
        self.w_n: set[int] = set()
        self.b = compute_belief(setup.prob_te, self.w_d, (), ())
        self.initial_b = self.b.copy()
        self.asked: set[DialogAction] = set()
        self.asked_label_pairs: set[tuple[int, int]] = set()
        self.turn = 0
        self.done = False
        self.success: bool | None = None
        self.acquired: list[tuple[int, int, int, str]] = []
        self.steps: list[TranscriptStep] = []
        self._tr_index = {i: k for k, i in enumerate(setup.tr_ids)}

    # ----- action space ---------------------------------------------------

    def reduced_label_candidate(self, attribute: int) -> int | None:
        """Pool item with probability closest to 0.5, skipping asked pairs."""
        margins = np.abs(self.setup.prob_tr[:, attribute] - 0.5)
        best_item, best_margin = None, None
        for k, item in enumerate(self.setup.tr_ids):
            if (attribute, item) in self.asked_label_pairs:
                continue
            if best_margin is None or margins[k] < best_margin:
                best_item, best_margin = item, margins[k]
        return best_item

    def legal_actions(self) -> list[DialogAction]:
        actions = [DialogAction(GUESS)]
        if self.done or self.turn >= self.reward_cfg.max_length:
            return actions
        for w in range(self.num_attributes):
            clarify = DialogAction(CLARIFY, attribute=w)
            if clarify not in self.asked:
                actions.append(clarify)
        for w in range(self.num_attributes):
            example = DialogAction(EXAMPLE_QUERY, attribute=w)
            if example not in self.asked:
                actions.append(example)
        for w in range(self.num_attributes):
            item = self.reduced_label_candidate(w)
            if item is not None:
                actions.append(DialogAction(LABEL_QUERY, attribute=w, item=item))
        return actions

    def guessed_item(self) -> int:
        return self.setup.te_ids[guess(self.b)]

    # ----- simulator ------------------------------------------------------

    def simulate_answer(self, action: DialogAction) -> Answer:
        labels = self.corpus
        if action.kind == CLARIFY:
            value = bool(labels[self.setup.target].labels[action.attribute])
            return Answer(YES_NO, yes=value)
        if action.kind == LABEL_QUERY:
            value = bool(labels[action.item].labels[action.attribute])
            return Answer(YES_NO, yes=value)
        if action.kind == EXAMPLE_QUERY:
            positives = [i for i in self.setup.tr_ids
                         if labels[i].labels[action.attribute] == 1]
            if not positives:
                return Answer(EXAMPLE, example_item=None)
            pick = int(self.rng.integers(0, len(positives)))
            return Answer(EXAMPLE, example_item=positives[pick])
        if action.kind == GUESS:
            item = self.guessed_item()
            return Answer(OUTCOME, guessed_item=item,
                          correct=item == self.setup.target)
        raise ValueError(f"unknown action kind {action.kind!r}")

    # ----- transition -----------------------------------------------------

    def _check_legal(self, action: DialogAction):
        if self.done:
            raise ValueError("episode already finished")
        if action.kind == GUESS:
            return
        if self.turn >= self.reward_cfg.max_length:
            raise ValueError("turn limit reached; only guessing is legal")
        if action.kind in (CLARIFY, EXAMPLE_QUERY):
            if action in self.asked:
                raise ValueError(f"repeated action {action}")
        elif action.kind == LABEL_QUERY:
            if (action.attribute, action.item) in self.asked_label_pairs:
                raise ValueError(f"repeated action {action}")
            if action.item not in self._tr_index:
                raise ValueError("label query item outside the active training set")
        else:
            raise ValueError(f"unknown action kind {action.kind!r}")
        if action.attribute is not None and not (
                0 <= action.attribute < self.num_attributes):
            raise ValueError("attribute index out of range")

    def step(self, action: DialogAction, answer: Answer):
        """Apply one action+answer; returns (reward, done)."""
        self._check_legal(action)
        if action.kind == GUESS:
            if answer.kind != OUTCOME:
                raise ValueError("guess needs an outcome answer")
            reward = (self.reward_cfg.success if answer.correct
                      else self.reward_cfg.failure)
            self.done = True
            self.success = bool(answer.correct)
        elif action.kind == CLARIFY:
            if answer.kind != YES_NO:
                raise ValueError("clarification needs a yes/no answer")
            col = self.setup.prob_te[:, action.attribute]
            self.b = update_belief(self.b, col, answer.yes)
            (self.w_p if answer.yes else self.w_n).add(action.attribute)
            self.asked.add(action)
            reward = self.reward_cfg.query
        elif action.kind == LABEL_QUERY:
            if answer.kind != YES_NO:
                raise ValueError("label query needs a yes/no answer")
            self.asked_label_pairs.add((action.attribute, action.item))
            self.acquired.append((action.item, action.attribute,
                                  int(answer.yes), answer.source))
            reward = self.reward_cfg.query
        elif action.kind == EXAMPLE_QUERY:
            if answer.kind != EXAMPLE:
                raise ValueError("example query needs an example answer")
            self.asked.add(action)
            if answer.example_item is not None:
                self.acquired.append((answer.example_item, action.attribute,
                                      1, answer.source))
            reward = self.reward_cfg.query
        else:  # unreachable after _check_legal
            raise ValueError(f"unknown action kind {action.kind!r}")

        self.steps.append(TranscriptStep(self.turn, action, answer, reward))
        self.turn += 1
        return reward, self.done

    # ----- records ----------------------------------------------------------

    def transcript(self) -> list[dict]:
        return [s.to_dict() for s in self.steps]

    def query_count(self) -> int:
        return sum(1 for s in self.steps if s.action.kind != GUESS)


def episode_return(transcript: list[dict], reward: RewardConfig) -> float:
    """Undiscounted reward sum of a complete transcript."""
    if not transcript:
        raise ValueError("empty transcript")
    if transcript[-1]["action"]["kind"] != GUESS:
        raise ValueError("incomplete transcript: no terminal guess")
    return float(sum(step["reward"] for step in transcript))
