"""Run a reduced end-to-end experiment and print the batch metrics.

Uses a smaller corpus and fewer dialogs per batch than the defaults so the
script finishes in well under a minute; drop the overrides for the full
desk-scale run. The counterfactual column answers "would the description-only
belief have guessed right with no dialog at all?" — the gap to the success
column is what the clarifications buy.
"""

from attrquest import ExperimentConfig, GenConfig, run_experiment
from attrquest.classifier import TrainConfig

cfg = ExperimentConfig(
    gen=GenConfig(item_count=1200, num_attributes=20,
                  partition_sizes=(12, 2, 3, 3)),
    init_batches=2, train_batches=2, test_batches=3, dialogs_per_batch=30,
    active_train_size=100,
    policies={"decision": "q", "clarification": "a3c", "active_learning": "a3c"},
    train_config=TrainConfig(epochs=50),
    seed=0)

result = run_experiment(cfg, out_dir="runs/demo")
print(f"{'batch':>5} {'phase':>6} {'success':>8} {'countf.':>8} "
      f"{'length':>7} {'novelF1':>8}")
for m in result.metrics:
    print(f"{m.batch:>5} {m.phase:>6} {m.success_fraction:>8.2f} "
          f"{m.counterfactual_fraction:>8.2f} {m.mean_dialog_length:>7.2f} "
          f"{m.novel_attr_f1:>8.3f}")
print("\nreports written to runs/demo (metrics.jsonl, summary.json, "
      "question_split.csv, counterfactual.csv, dialogs.jsonl)")
