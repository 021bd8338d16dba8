"""Command-line interface.

Subcommands:
    gen-data   generate a synthetic corpus plus its split sidecar
    pretrain   pretrain the attribute classifier on a corpus
    run        run the full batched experiment and write reports
    serve      expose live dialog sessions over HTTP from a run directory
    report     summarize a finished run directory
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import classifier as clf
from .corpus import generate_corpus, load_corpus, load_split, make_split_corpus, \
    save_corpus, save_split
from .experiment import ExperimentConfig, run_experiment
from .service import ServiceContext, serve


def _load_config(path, seed=None) -> ExperimentConfig:
    if path:
        with open(path) as fh:
            cfg = ExperimentConfig.from_dict(json.load(fh))
    else:
        cfg = ExperimentConfig()
    if seed is not None:
        cfg.seed = seed
    return cfg


def _cmd_gen_data(args) -> int:
    cfg = _load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = generate_corpus(cfg.gen, cfg.seed)
    split = make_split_corpus(corpus, cfg.split_ratio, cfg.seed)
    save_corpus(corpus, out / "corpus.jsonl")
    save_split(split, out / "split.json")
    counts = {s: len(split.ids(s)) for s in ("pretrain", "train", "val", "test")}
    print(f"wrote {len(corpus)} items to {out / 'corpus.jsonl'}; splits {counts}")
    return 0


def _cmd_pretrain(args) -> int:
    cfg = _load_config(args.config, args.seed)
    corpus = load_corpus(args.corpus)
    split = (load_split(args.split) if args.split
             else make_split_corpus(corpus, cfg.split_ratio, cfg.seed))
    store = clf.LabelStore()
    for i in split.ids("pretrain", "classifier_training"):
        store.add_full_item(i, corpus[i].labels, clf.TRAINING, "corpus")
    for i in split.ids("pretrain", "classifier_test"):
        store.add_full_item(i, corpus[i].labels, clf.VALIDATION, "corpus")
    params = clf.init_params(corpus.dim, corpus.num_attributes, seed=cfg.seed)
    clf.pretrain(params, split.ids("pretrain", "classifier_training"), store,
                 corpus, cfg.train_config, seed=cfg.seed)
    stats = clf.tune_thresholds(params, store, corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "classifier_pretrain.bin").write_bytes(clf.snapshot(params))
    with open(out / "classifier_stats.json", "w") as fh:
        json.dump({"f1": stats.f1.tolist(),
                   "thresholds": stats.thresholds.tolist(),
                   "precision": stats.precision.tolist(),
                   "recall": stats.recall.tolist()}, fh, indent=2)
    print(f"pretrained classifier on {len(split.ids('pretrain', 'classifier_training'))} "
          f"items; mean F1 {stats.f1.mean():.3f}; wrote {out}")
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config(args.config, args.seed)
    for field_name in ("init_batches", "train_batches", "test_batches",
                       "dialogs_per_batch"):
        value = getattr(args, field_name)
        if value is not None:
            setattr(cfg, field_name, value)
    cfg.__post_init__()
    result = run_experiment(cfg, out_dir=args.out)
    for m in result.metrics:
        print(f"{m.phase:5s} batch {m.phase_batch}: "
              f"success={m.success_fraction:.2f} "
              f"len={m.mean_dialog_length:.2f} "
              f"novel_f1={m.novel_attr_f1:.3f}")
    print(f"wrote reports to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    ctx = ServiceContext.from_run_dir(args.run_dir)
    serve(ctx, host=args.host, port=args.port)
    return 0


def _cmd_report(args) -> int:
    out = Path(args.out)
    metrics_path = out / "metrics.jsonl"
    if not metrics_path.exists():
        raise FileNotFoundError(f"no metrics.jsonl under {out}")
    rows = [json.loads(line) for line in metrics_path.read_text().splitlines()]
    header = f"{'batch':>5} {'phase':>6} {'success':>8} {'length':>7} {'novelF1':>8} {'c/l/e':>14}"
    print(header)
    for r in rows:
        cle = f"{r['clarify_count']}/{r['label_count']}/{r['example_count']}"
        print(f"{r['batch']:>5} {r['phase']:>6} {r['success_fraction']:>8.2f} "
              f"{r['mean_dialog_length']:>7.2f} {r['novel_attr_f1']:>8.3f} {cle:>14}")
    test_rows = [r for r in rows if r["phase"] == "test"]
    if test_rows:
        final = test_rows[-1]
        print(f"final test batch: success {final['success_fraction']:.2f}, "
              f"mean length {final['mean_dialog_length']:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attrquest",
        description="Interactive attribute-based retrieval: simulator, "
                    "trainer, and human-in-the-loop session service.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a synthetic corpus + split")
    gen.add_argument("--config", help="experiment config JSON")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=_cmd_gen_data)

    pre = sub.add_parser("pretrain", help="pretrain the attribute classifier")
    pre.add_argument("--corpus", required=True)
    pre.add_argument("--split")
    pre.add_argument("--config")
    pre.add_argument("--seed", type=int)
    pre.add_argument("--out", required=True)
    pre.set_defaults(func=_cmd_pretrain)

    run = sub.add_parser("run", help="run the batched experiment")
    run.add_argument("--config")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", required=True)
    run.add_argument("--init-batches", type=int, dest="init_batches")
    run.add_argument("--train-batches", type=int, dest="train_batches")
    run.add_argument("--test-batches", type=int, dest="test_batches")
    run.add_argument("--dialogs-per-batch", type=int, dest="dialogs_per_batch")
    run.set_defaults(func=_cmd_run)

    srv = sub.add_parser("serve", help="serve live dialog sessions over HTTP")
    srv.add_argument("--run-dir", required=True,
                     help="directory written by the run subcommand")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8080)
    srv.set_defaults(func=_cmd_serve)

    rep = sub.add_parser("report", help="summarize a run directory")
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # diagnostic line + nonzero exit, per contract
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
