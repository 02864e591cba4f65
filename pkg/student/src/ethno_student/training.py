"""Fine-tuning loop and the adapter artifact it writes.

train_student validates the train file, builds the base model, injects
adapters, and runs plain AdamW over shuffled minibatches. Loss is
next-token cross-entropy over the label span only; prompt and padding
positions are masked out. All data problems (unknown label, empty file,
a row that cannot fit in max_sequence_length) surface as TrainError
before the first optimizer step.

The artifact directory holds three files:
  adapter.pt   trainable parameters (adapter matrices, embeddings, head)
  config.json  the TrainerConfig used, plus its digest
  log.json     per-epoch losses, seed, digest, row count
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

import torch

from .config import TrainerConfig
from .data import LabelScheme, Row, check_train_labels, load_rows
from .errors import TrainError
from .modeling import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    build_base,
    encode,
    inject_lora,
    trainable_state_dict,
)
from .prompts import render_prompt

ADAPTER_FILE = "adapter.pt"
CONFIG_FILE = "config.json"
LOG_FILE = "log.json"

_BATCH_SIZE = 16


@dataclass(frozen=True)
class TrainLog:
    """What a completed run recorded."""

    losses: tuple[float, ...]
    seed: int
    config_digest: str
    n_rows: int

    def to_dict(self) -> dict:
        return asdict(self)


def _encode_example(row: Row, scheme: LabelScheme, cfg: TrainerConfig) -> tuple[list[int], list[int]]:
    """One training sequence: masked prompt ids, then supervised label ids."""
    prompt = render_prompt(row, scheme, cfg.prompt_template)
    prompt_ids = [BOS_ID] + encode(prompt)
    label_ids = encode(row.label) + [EOS_ID]
    input_ids = prompt_ids + label_ids
    if len(input_ids) > cfg.max_sequence_length:
        raise TrainError(
            f"row {row.id!r} needs {len(input_ids)} tokens but max_sequence_length "
            f"is {cfg.max_sequence_length}"
        )
    labels = [-100] * len(prompt_ids) + label_ids
    return input_ids, labels


def _collate(examples: list[tuple[list[int], list[int]]]) -> dict[str, torch.Tensor]:
    width = max(len(ids) for ids, _ in examples)
    input_ids = []
    attention_mask = []
    labels = []
    for ids, labs in examples:
        pad = width - len(ids)
        input_ids.append(ids + [PAD_ID] * pad)
        attention_mask.append([1] * len(ids) + [0] * pad)
        labels.append(labs + [-100] * pad)
    return {
        "input_ids": torch.tensor(input_ids, dtype=torch.long),
        "attention_mask": torch.tensor(attention_mask, dtype=torch.long),
        "labels": torch.tensor(labels, dtype=torch.long),
    }


def train_student(
    train_path: str | Path,
    cfg: TrainerConfig,
    scheme: LabelScheme,
    adapter_dir: str | Path,
) -> TrainLog:
    """Fine-tune on the exported train file and write the adapter artifact."""
    rows = load_rows(train_path)
    check_train_labels(rows, scheme, str(train_path))
    examples = [_encode_example(row, scheme, cfg) for row in rows]

    model = build_base(cfg)
    torch.manual_seed(cfg.seed)
    inject_lora(model, cfg.rank)
    model.train()

    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(trainable, lr=cfg.learning_rate)
    rng = random.Random(cfg.seed)

    losses: list[float] = []
    for _ in range(cfg.epochs):
        order = list(range(len(examples)))
        rng.shuffle(order)
        total = 0.0
        for start in range(0, len(order), _BATCH_SIZE):
            batch = [examples[i] for i in order[start : start + _BATCH_SIZE]]
            tensors = _collate(batch)
            optimizer.zero_grad()
            out = model(**tensors, use_cache=False)
            out.loss.backward()
            optimizer.step()
            total += out.loss.item() * len(batch)
        losses.append(total / len(examples))

    log = TrainLog(
        losses=tuple(losses),
        seed=cfg.seed,
        config_digest=cfg.digest(),
        n_rows=len(rows),
    )
    _write_artifact(Path(adapter_dir), model, cfg, log)
    return log


def _write_artifact(
    adapter_dir: Path, model, cfg: TrainerConfig, log: TrainLog
) -> None:
    adapter_dir.mkdir(parents=True, exist_ok=True)
    torch.save(trainable_state_dict(model), adapter_dir / ADAPTER_FILE)
    payload = dict(cfg.to_dict(), config_digest=cfg.digest())
    (adapter_dir / CONFIG_FILE).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (adapter_dir / LOG_FILE).write_text(
        json.dumps(log.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
