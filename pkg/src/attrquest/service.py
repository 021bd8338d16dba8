"""HTTP session service for human-in-the-loop dialogs.

A session exposes one episode over JSON endpoints: the client receives the
target to find (human mode shows it on screen), posts a description as a set
of attribute indices, then answers one question per request until the agent
guesses. Policies run frozen in evaluation mode against a fixed classifier
checkpoint; labels provided by the client are buffered per session and never
applied to the shared classifier mid-session.

Endpoints:
    POST /sessions                     {mode?, seed?} -> session + catalog
    POST /sessions/{id}/description    {attributes: [int]}
    GET  /sessions/{id}/next           pending question (idempotent)
    POST /sessions/{id}/answer         {value: "yes"|"no"|item_id|"none"}
    GET  /sessions/{id}/transcript
    GET  /catalog
    GET  /items/{id}
Errors are JSON {code, message}.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import classifier as clf
from .corpus import Corpus, SplitCorpus, load_corpus, load_split
from .env import CLARIFY, EXAMPLE_QUERY, GUESS, LABEL_QUERY, Answer, DialogAction, \
    DialogEnv, EpisodeSetup, EXAMPLE, OUTCOME, YES_NO
from .experiment import ExperimentConfig, refresh_retrieval, sample_episode_setup
from .features import DialogHistoryStats, FeatureExtractor
from .policies import EVALUATE, PolicyBundle, hierarchical_act, load_checkpoint

MAX_EXAMPLES_PER_ATTRIBUTE = 3

AWAITING_DESCRIPTION = "awaiting_description"
AWAITING_ANSWER = "awaiting_answer"
FINISHED = "finished"


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class ServiceContext:
    """Shared read-only state: corpus, frozen classifier, frozen policies."""

    corpus: Corpus
    split: SplitCorpus
    params: clf.ClassifierParams
    store: clf.LabelStore
    stats: clf.AttributeStats
    bundle: PolicyBundle
    config: ExperimentConfig

    def __post_init__(self):
        if self.bundle.clarification.kind == "oracle":
            raise ValueError("oracle clarification policies read ground-truth "
                             "target labels and cannot serve live sessions")
        self.bundle.mode = EVALUATE
        self.sample_cfg = replace_config_for_sessions(self.config)
        subset = self.split.ids(self.config.test_split, "classifier_test")
        self.retrieval = refresh_retrieval(self.params, self.stats, self.corpus,
                                           subset, self.config.retrieval)
        self.pool = self.split.ids(self.config.test_split, "classifier_training")
        self.catalog = self._build_catalog()

    def _build_catalog(self):
        catalog = []
        for w, name in enumerate(self.corpus.catalog.names):
            ids, values = self.store.validation_entries(w)
            positives = [i for i, v in zip(ids, values) if v == 1]
            if positives:
                probs = clf.prob_matrix(
                    self.params, self.corpus.feature_matrix(positives))[:, w]
                order = np.argsort(-probs, kind="stable")
                examples = [positives[k] for k in order[:MAX_EXAMPLES_PER_ATTRIBUTE]]
            else:
                examples = []
            catalog.append({"index": w, "name": name,
                            "example_item_ids": examples})
        return catalog

    @classmethod
    def from_run_dir(cls, run_dir) -> "ServiceContext":
        run = Path(run_dir)
        with open(run / "config.json") as fh:
            config = ExperimentConfig.from_dict(json.load(fh))
        corpus = load_corpus(run / "corpus.jsonl")
        split = load_split(run / "split.json")
        params = clf.restore((run / "classifier_final.bin").read_bytes())
        store = clf.LabelStore.load(run / "labels.jsonl")
        stats = clf.tune_thresholds(params, store, corpus)
        bundle = load_checkpoint(run / "policy.npz")
        return cls(corpus=corpus, split=split, params=params, store=store,
                   stats=stats, bundle=bundle, config=config)


def replace_config_for_sessions(cfg: ExperimentConfig) -> ExperimentConfig:
    """Sessions use the human-evaluation episode sampling."""
    data = cfg.to_dict()
    data["human_eval_variant"] = True
    return ExperimentConfig.from_dict(data)


def item_card(corpus: Corpus, item_id: int) -> dict:
    """Render payload derived purely from the feature vector; label-free."""
    item = corpus[item_id]
    digest = hashlib.sha256(item.features.tobytes()).digest()
    render_seed = int.from_bytes(digest[:4], "big")
    chunks = np.array_split(item.features, min(16, len(item.features)))
    sparkline = [round(float(np.mean(c)), 4) for c in chunks]
    return {"id": item_id, "render_seed": render_seed, "sparkline": sparkline}


class DialogSession:
    """One live episode; all mutating calls are serialized by self.lock."""

    def __init__(self, ctx: ServiceContext, mode: str, seed: int | None):
        if mode not in ("human", "simulated"):
            raise ServiceError(400, "bad_mode", f"unknown mode {mode!r}")
        self.id = uuid.uuid4().hex[:12]
        self.ctx = ctx
        self.mode = mode
        self.lock = threading.Lock()
        self.status = AWAITING_DESCRIPTION
        entropy = seed if seed is not None else np.random.SeedSequence().entropy
        self.rng = np.random.default_rng(np.random.SeedSequence(entropy))
        self.setup_template = sample_episode_setup(
            ctx.retrieval, ctx.pool, ctx.corpus, ctx.params, ctx.sample_cfg,
            self.rng)
        self.env: DialogEnv | None = None
        self.extractor: FeatureExtractor | None = None
        self.pending: DialogAction | None = None
        self.outcome: dict | None = None

    # ----- lifecycle -------------------------------------------------------

    def post_description(self, attributes) -> dict:
        if self.status != AWAITING_DESCRIPTION:
            raise ServiceError(409, "wrong_status",
                               f"description not accepted while {self.status}")
        if not isinstance(attributes, (list, tuple)) or not attributes:
            raise ServiceError(400, "empty_description",
                               "need a non-empty list of attribute indices")
        w_count = self.ctx.corpus.num_attributes
        attrs = set()
        for w in attributes:
            if not isinstance(w, int) or not 0 <= w < w_count:
                raise ServiceError(400, "bad_attribute",
                                   f"attribute index {w!r} out of range")
            attrs.add(w)
        setup = EpisodeSetup(
            target=self.setup_template.target,
            description=frozenset(attrs),
            te_ids=self.setup_template.te_ids,
            tr_ids=self.setup_template.tr_ids,
            prob_te=self.setup_template.prob_te,
            prob_tr=self.setup_template.prob_tr)
        self.env = DialogEnv(setup, self.ctx.corpus, self.ctx.config.rewards,
                             self.rng)
        # sessions carry no cross-dialog usage history
        self.extractor = FeatureExtractor(
            self.env, self.ctx.stats, DialogHistoryStats(),
            self.ctx.config.features,
            label_known=lambda i, w: self.ctx.store.has(i, w))
        self._advance()
        return {"status": self.status, "action": self.next_action()}

    def _advance(self):
        """Compute the agent's next action; guesses resolve immediately."""
        action, _ = hierarchical_act(self.ctx.bundle, self.env,
                                     self.extractor, self.rng)
        if action.kind == GUESS:
            answer = self.env.simulate_answer(action)
            self.env.step(action, answer)
            self.status = FINISHED
            self.pending = None
            self.outcome = {
                "type": GUESS,
                "guessed_item": answer.guessed_item,
                "correct": answer.correct,
                "target_item": self.env.setup.target,
            }
        else:
            self.pending = action
            self.status = AWAITING_ANSWER

    def next_action(self) -> dict:
        if self.status == AWAITING_DESCRIPTION:
            raise ServiceError(409, "wrong_status", "no description posted yet")
        if self.status == FINISHED:
            return self.outcome
        action = self.pending
        payload = {"type": action.kind, "attribute": action.attribute,
                   "attribute_name": self.ctx.corpus.catalog.names[action.attribute],
                   "example_item_ids":
                       self.ctx.catalog[action.attribute]["example_item_ids"]}
        if action.kind == LABEL_QUERY:
            payload["item"] = action.item
        if action.kind == EXAMPLE_QUERY:
            payload["candidate_item_ids"] = list(self.env.setup.tr_ids)
        return payload

    def post_answer(self, value) -> dict:
        if self.status == FINISHED:
            raise ServiceError(409, "finished", "session already finished")
        if self.status != AWAITING_ANSWER:
            raise ServiceError(409, "wrong_status", "no pending question")
        action = self.pending
        source = "human" if self.mode == "human" else "simulator"
        if action.kind in (CLARIFY, LABEL_QUERY):
            if value not in ("yes", "no"):
                raise ServiceError(400, "type_mismatch",
                                   "this question takes 'yes' or 'no'")
            answer = Answer(YES_NO, yes=value == "yes", source=source)
        else:  # example query
            if value == "none":
                answer = Answer(EXAMPLE, example_item=None, source=source)
            elif isinstance(value, int):
                if value not in self.env.setup.tr_ids:
                    raise ServiceError(400, "bad_item",
                                       "example must come from the shown pool")
                if self.ctx.corpus[value].labels[action.attribute] != 1 \
                        and self.mode == "simulated":
                    # simulated clients promise ground truth; humans may err
                    raise ServiceError(400, "bad_item",
                                       "not a positive example for this attribute")
                answer = Answer(EXAMPLE, example_item=value, source=source)
            else:
                raise ServiceError(400, "type_mismatch",
                                   "this question takes an item id or 'none'")
        self.env.step(action, answer)
        self.pending = None
        self._advance()
        done = self.status == FINISHED
        out = {"done": done}
        if done:
            out["outcome"] = self.outcome
        return out

    def transcript(self) -> list:
        return self.env.transcript() if self.env is not None else []

    def acquired_labels(self) -> list:
        return list(self.env.acquired) if self.env is not None else []


class SessionService:
    def __init__(self, ctx: ServiceContext):
        self.ctx = ctx
        self.sessions: dict[str, DialogSession] = {}
        self._lock = threading.Lock()

    def create_session(self, mode: str = "simulated", seed: int | None = None) -> dict:
        session = DialogSession(self.ctx, mode, seed)
        with self._lock:
            self.sessions[session.id] = session
        target = session.setup_template.target
        return {
            "session_id": session.id,
            "mode": mode,
            "target_item": target,
            "target_card": item_card(self.ctx.corpus, target),
            "suggested_description": sorted(session.setup_template.description),
            "catalog": self.ctx.catalog,
        }

    def get(self, session_id: str) -> DialogSession:
        with self._lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise ServiceError(404, "unknown_session",
                               f"no session {session_id!r}")
        return session


# --------------------------------------------------------------------------
# HTTP layer
# --------------------------------------------------------------------------

class _Handler(BaseHTTPRequestHandler):
    service: SessionService = None  # set by make_server

    def log_message(self, *args):
        pass

    def _send(self, status: int, payload):
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, err: ServiceError):
        self._send(err.status, {"code": err.code, "message": err.message})

    def _read_json(self):
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError as exc:
            raise ServiceError(400, "bad_json", f"invalid JSON body: {exc}")

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self):
        try:
            parts = [p for p in self.path.split("?")[0].split("/") if p]
            if parts == ["catalog"]:
                self._send(200, {"attributes": self.service.ctx.catalog})
            elif len(parts) == 2 and parts[0] == "items":
                try:
                    item_id = int(parts[1])
                    card = item_card(self.service.ctx.corpus, item_id)
                except (ValueError, KeyError):
                    raise ServiceError(404, "unknown_item",
                                       f"no item {parts[1]!r}")
                self._send(200, card)
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "next":
                session = self.service.get(parts[1])
                with session.lock:
                    self._send(200, session.next_action())
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "transcript":
                session = self.service.get(parts[1])
                with session.lock:
                    self._send(200, session.transcript())
            else:
                raise ServiceError(404, "not_found", f"no route {self.path!r}")
        except ServiceError as err:
            self._error(err)

    def do_POST(self):
        try:
            parts = [p for p in self.path.split("?")[0].split("/") if p]
            body = self._read_json()
            if parts == ["sessions"]:
                payload = self.service.create_session(
                    mode=body.get("mode", "simulated"), seed=body.get("seed"))
                self._send(201, payload)
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "description":
                session = self.service.get(parts[1])
                with session.lock:
                    self._send(200, session.post_description(body.get("attributes")))
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "answer":
                session = self.service.get(parts[1])
                with session.lock:
                    self._send(200, session.post_answer(body.get("value")))
            else:
                raise ServiceError(404, "not_found", f"no route {self.path!r}")
        except ServiceError as err:
            self._error(err)


def make_server(ctx: ServiceContext, host: str = "127.0.0.1",
                port: int = 0) -> ThreadingHTTPServer:
    service = SessionService(ctx)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host, port), handler)
    server.service = service
    return server


def serve(ctx: ServiceContext, host: str = "127.0.0.1", port: int = 8080) -> None:
    server = make_server(ctx, host, port)
    print(f"session service listening on http://{host}:{server.server_address[1]}",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
