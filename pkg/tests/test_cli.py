import json

import pytest

from attrquest.cli import main


def small_config_file(tmp_path, **overrides):
    cfg = {
        "gen": {"dim": 16, "num_attributes": 8, "item_count": 260,
                "partition_sizes": [4, 1, 1, 2], "zipf_exponent": 0.7,
                "zipf_scale": 0.9, "noise_scale": 0.05,
                "description_min": 1, "description_max": 3},
        "init_batches": 1, "train_batches": 0, "test_batches": 1,
        "dialogs_per_batch": 3, "active_train_size": 25,
        "train_config": {"epochs": 10, "batch_size": 64},
        "retrieval": {"rank_cap": 25},
        "rewards": {"max_length": 5},
        "seed": 0,
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_gen_data_and_pretrain(tmp_path, capsys):
    cfg = small_config_file(tmp_path)
    data_dir = tmp_path / "data"
    assert main(["gen-data", "--config", str(cfg), "--out", str(data_dir)]) == 0
    assert (data_dir / "corpus.jsonl").exists()
    assert (data_dir / "split.json").exists()

    model_dir = tmp_path / "model"
    rc = main(["pretrain", "--corpus", str(data_dir / "corpus.jsonl"),
               "--split", str(data_dir / "split.json"),
               "--config", str(cfg), "--out", str(model_dir)])
    assert rc == 0
    assert (model_dir / "classifier_pretrain.bin").exists()
    stats = json.loads((model_dir / "classifier_stats.json").read_text())
    assert len(stats["f1"]) == 8


def test_run_and_report(tmp_path, capsys):
    cfg = small_config_file(tmp_path)
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "test" in printed and "success=" in printed
    assert (out / "metrics.jsonl").exists()

    assert main(["report", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "final test batch" in printed


def test_run_phase_overrides(tmp_path):
    cfg = small_config_file(tmp_path)
    out = tmp_path / "run2"
    rc = main(["run", "--config", str(cfg), "--out", str(out),
               "--init-batches", "0", "--test-batches", "1",
               "--dialogs-per-batch", "2"])
    assert rc == 0
    lines = (out / "metrics.jsonl").read_text().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["phase"] == "test"


def test_cli_error_exit_code(tmp_path, capsys):
    rc = main(["report", "--out", str(tmp_path / "missing")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_cli_bad_config_rejected(tmp_path, capsys):
    cfg = small_config_file(tmp_path, rho_val=2.0)
    rc = main(["run", "--config", str(cfg), "--out", str(tmp_path / "x")])
    assert rc == 1
    assert "rho_val" in capsys.readouterr().err
