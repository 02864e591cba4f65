"""Training loop behavior and the adapter artifact it writes."""

from __future__ import annotations

import json

import pytest
import torch

from ethno_student import TrainError, train_student
from ethno_student.training import ADAPTER_FILE, CONFIG_FILE, LOG_FILE

from conftest import marked_rows, small_config, write_rows


@pytest.fixture()
def train_file(tmp_path):
    return write_rows(marked_rows(10), tmp_path / "train.jsonl")


class TestTrainStudent:
    def test_loss_decreases(self, scheme, tmp_path, train_file):
        cfg = small_config(epochs=4)
        log = train_student(train_file, cfg, scheme, tmp_path / "adapter")
        assert len(log.losses) == 4
        assert log.losses[-1] < log.losses[0]
        assert log.n_rows == 30
        assert log.seed == cfg.seed
        assert log.config_digest == cfg.digest()

    def test_artifact_layout(self, scheme, tmp_path, train_file):
        cfg = small_config(epochs=1)
        log = train_student(train_file, cfg, scheme, tmp_path / "adapter")
        adapter_dir = tmp_path / "adapter"
        assert (adapter_dir / ADAPTER_FILE).is_file()
        assert (adapter_dir / CONFIG_FILE).is_file()
        assert (adapter_dir / LOG_FILE).is_file()

        saved_cfg = json.loads((adapter_dir / CONFIG_FILE).read_text(encoding="utf-8"))
        assert saved_cfg["config_digest"] == cfg.digest()
        assert saved_cfg["rank"] == cfg.rank
        assert saved_cfg["base_model_id"] == cfg.base_model_id

        saved_log = json.loads((adapter_dir / LOG_FILE).read_text(encoding="utf-8"))
        assert saved_log == {
            "losses": list(log.losses),
            "seed": log.seed,
            "config_digest": log.config_digest,
            "n_rows": log.n_rows,
        }

        state = torch.load(adapter_dir / ADAPTER_FILE, weights_only=True)
        assert "lm_head.weight" in state

    def test_empty_file_is_a_train_error(self, scheme, tmp_path):
        path = tmp_path / "train.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(TrainError, match="no rows"):
            train_student(path, small_config(epochs=1), scheme, tmp_path / "adapter")

    def test_foreign_label_fails_before_training(self, scheme, tmp_path):
        rows = marked_rows(2)
        rows[0]["label"] = "Magenta"
        path = write_rows(rows, tmp_path / "train.jsonl")
        with pytest.raises(TrainError, match="Magenta"):
            train_student(path, small_config(epochs=1), scheme, tmp_path / "adapter")
        assert not (tmp_path / "adapter").exists()

    def test_overlong_row_fails_before_training(self, scheme, tmp_path):
        rows = marked_rows(2)
        rows[1]["name"] = "Tokara " + "Longname " * 40
        path = write_rows(rows, tmp_path / "train.jsonl")
        with pytest.raises(TrainError, match=r"x00001.*max_sequence_length"):
            train_student(path, small_config(epochs=1), scheme, tmp_path / "adapter")
        assert not (tmp_path / "adapter").exists()

    def test_same_seed_and_config_reproduce_digest_and_losses(self, scheme, tmp_path, train_file):
        cfg = small_config(epochs=2)
        first = train_student(train_file, cfg, scheme, tmp_path / "a1")
        second = train_student(train_file, cfg, scheme, tmp_path / "a2")
        assert first.config_digest == second.config_digest
        assert first.losses == second.losses
        log1 = json.loads((tmp_path / "a1" / LOG_FILE).read_text(encoding="utf-8"))
        log2 = json.loads((tmp_path / "a2" / LOG_FILE).read_text(encoding="utf-8"))
        assert log1["config_digest"] == log2["config_digest"]
