"""Greedy decoding over the test file, in base or adapted mode.

With no adapter directory the raw base model predicts zero-shot; with
one, the adapter's own recorded rank is injected and its weights loaded,
after checking that it was trained from the same base_model_id. Each
row's decoded text runs through the repair ladder; any per-row failure
(sequence too long, generation error) becomes UNPARSEABLE rather than
aborting the batch. Output is one {"id", "label"} line per test row, in
input order.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch

from .config import TrainerConfig
from .data import LabelScheme, Row, load_rows
from .errors import PredictError
from .modeling import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    build_base,
    decode,
    encode,
    inject_lora,
    load_adapter_state,
)
from .parsing import UNPARSEABLE, repair_label
from .prompts import render_prompt
from .training import ADAPTER_FILE, CONFIG_FILE

_EXTRA_DECODE_STEPS = 8


def _load_adapted_model(adapter_dir: Path, cfg: TrainerConfig):
    config_path = adapter_dir / CONFIG_FILE
    weights_path = adapter_dir / ADAPTER_FILE
    if not config_path.is_file() or not weights_path.is_file():
        raise PredictError(f"adapter directory {adapter_dir} is missing {CONFIG_FILE} or {ADAPTER_FILE}")
    try:
        saved = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PredictError(f"adapter config {config_path} is not valid JSON: {exc}") from exc
    saved_base = saved.get("base_model_id")
    if saved_base != cfg.base_model_id:
        raise PredictError(
            f"adapter was trained from base {saved_base!r}, not {cfg.base_model_id!r}"
        )
    rank = saved.get("rank")
    if not isinstance(rank, int) or rank < 1:
        raise PredictError(f"adapter config {config_path} has no usable rank")
    model = build_base(cfg)
    torch.manual_seed(cfg.seed)
    inject_lora(model, rank)
    state = torch.load(weights_path, map_location="cpu", weights_only=True)
    load_adapter_state(model, state)
    return model


def _greedy_label(model, row: Row, scheme: LabelScheme, cfg: TrainerConfig, max_new: int) -> str:
    prompt = render_prompt(row, scheme, cfg.prompt_template)
    ids = [BOS_ID] + encode(prompt)
    if len(ids) >= cfg.max_sequence_length:
        return UNPARSEABLE
    generated: list[int] = []
    with torch.no_grad():
        for _ in range(max_new):
            if len(ids) >= cfg.max_sequence_length:
                break
            logits = model(
                input_ids=torch.tensor([ids], dtype=torch.long), use_cache=False
            ).logits
            next_id = int(torch.argmax(logits[0, -1]).item())
            if next_id in (EOS_ID, PAD_ID, BOS_ID):
                break
            generated.append(next_id)
            ids.append(next_id)
    return repair_label(decode(generated), scheme)


def predict_test(
    test_path: str | Path,
    adapter_dir: str | Path | None,
    cfg: TrainerConfig,
    scheme: LabelScheme,
    out_path: str | Path,
) -> list[dict]:
    """Predict every test row and write the prediction file."""
    rows = load_rows(test_path)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    predictions: list[dict] = []
    if rows:
        if adapter_dir is None:
            model = build_base(cfg)
        else:
            model = _load_adapted_model(Path(adapter_dir), cfg)
        model.eval()
        max_new = max(len(encode(label)) for label in scheme.labels) + _EXTRA_DECODE_STEPS
        for row in rows:
            try:
                label = _greedy_label(model, row, scheme, cfg, max_new)
            except Exception:
                label = UNPARSEABLE
            predictions.append({"id": row.id, "label": label})

    with out_path.open("w", encoding="utf-8") as handle:
        for pred in predictions:
            handle.write(json.dumps(pred, sort_keys=True) + "\n")
    return predictions
