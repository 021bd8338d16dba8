"""Drive the HTTP session service with a scripted ground-truth user.

Starts the service in-process on a free port, opens a session, posts the
suggested description, and answers every question truthfully — the same flow
a human walks through in the browser front end, one question per page.
"""

import json
import threading
import urllib.request

import numpy as np

from attrquest import classifier as clf_mod
from attrquest import ExperimentConfig, GenConfig, generate_corpus, make_bundle, \
    make_split_corpus
from attrquest.classifier import TRAINING, VALIDATION
from attrquest.env import RewardConfig
from attrquest.service import ServiceContext, make_server


def call(base, method, path, payload=None):
    data = json.dumps(payload).encode() if payload is not None else None
    req = urllib.request.Request(base + path, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


gen = GenConfig(item_count=800, num_attributes=16, partition_sizes=(10, 2, 2, 2))
cfg = ExperimentConfig(gen=gen, rewards=RewardConfig(max_length=8),
                       human_eval_candidates=40, seed=0)
corpus = generate_corpus(gen, seed=0)
split = make_split_corpus(corpus, 0.6, seed=0)
store = clf_mod.LabelStore()
for i in split.ids("pretrain", "classifier_training"):
    store.add_full_item(i, corpus[i].labels, TRAINING, "corpus")
for i in split.ids("pretrain", "classifier_test"):
    store.add_full_item(i, corpus[i].labels, VALIDATION, "corpus")
params = clf_mod.init_params(corpus.dim, corpus.num_attributes, seed=0)
clf_mod.pretrain(params, split.ids("pretrain", "classifier_training"), store,
                 corpus, clf_mod.TrainConfig(epochs=40), seed=0)
stats = clf_mod.tune_thresholds(params, store, corpus)
ctx = ServiceContext(corpus=corpus, split=split, params=params, store=store,
                     stats=stats, bundle=make_bundle(cfg.policies, seed=0),
                     config=cfg)

server = make_server(ctx, port=0)
threading.Thread(target=server.serve_forever, daemon=True).start()
base = f"http://127.0.0.1:{server.server_address[1]}"
print("service at", base)

created = call(base, "POST", "/sessions", {"mode": "simulated", "seed": 11})
sid = created["session_id"]
target = created["target_item"]
names = [a["name"] for a in created["catalog"]]
print(f"session {sid}: find item {target}; describing it as "
      f"{[names[w] for w in created['suggested_description']]}")
call(base, "POST", f"/sessions/{sid}/description",
     {"attributes": created["suggested_description"]})

while True:
    action = call(base, "GET", f"/sessions/{sid}/next")
    if action["type"] == "guess":
        print(f"agent guesses item {action['guessed_item']} "
              f"-> correct={action['correct']}")
        break
    attr = action["attribute"]
    if action["type"] == "clarify":
        value = "yes" if corpus[target].labels[attr] else "no"
        print(f"  Q: does '{names[attr]}' apply to your item?  A: {value}")
    elif action["type"] == "label_query":
        value = "yes" if corpus[action["item"]].labels[attr] else "no"
        print(f"  Q: does '{names[attr]}' apply to item {action['item']}?  A: {value}")
    else:
        positives = [i for i in action["candidate_item_ids"]
                     if corpus[i].labels[attr] == 1]
        value = min(positives) if positives else "none"
        print(f"  Q: show an example of '{names[attr]}'  A: {value}")
    result = call(base, "POST", f"/sessions/{sid}/answer", {"value": value})
    if result["done"]:
        out = result["outcome"]
        print(f"agent guesses item {out['guessed_item']} -> correct={out['correct']}")
        break

transcript = call(base, "GET", f"/sessions/{sid}/transcript")
print(f"transcript has {len(transcript)} steps; "
      f"return {sum(s['reward'] for s in transcript):+.0f}")
server.shutdown()
