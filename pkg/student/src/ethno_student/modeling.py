"""Model assembly: byte tokenizer, base transformer, low-rank adapters.

Text is tokenized at the byte level: ids 0..255 are raw UTF-8 bytes and
three specials follow, so the vocabulary is fixed by construction and no
tokenizer artifact ships with an adapter.

The base model is a small Llama-architecture causal LM. When
base_model_id names a local directory it is loaded from disk; any other
id is treated as a deterministic random initialization keyed by the id,
so two hosts building the same id get identical weights.

Adapters are hand-rolled LoRA: each attention and MLP projection is
wrapped so forward(x) = frozen_base(x) + B @ (A @ x), with A drawn small
and B zero, making the wrapped model exactly equal the base before any
training step. The token embedding and output head are trained directly
alongside the adapters: a randomly initialized base has no byte
structure for low-rank updates alone to steer, so the embedding tables
are part of the adapter artifact.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import torch
from torch import nn
from transformers import LlamaConfig, LlamaForCausalLM

from .config import TrainerConfig
from .errors import PredictError

PAD_ID = 256
BOS_ID = 257
EOS_ID = 258
VOCAB_SIZE = 259

_HIDDEN_SIZE = 32
_INTERMEDIATE_SIZE = 64
_NUM_LAYERS = 2
_NUM_HEADS = 2

_ATTN_PROJECTIONS = ("q_proj", "k_proj", "v_proj", "o_proj")
_MLP_PROJECTIONS = ("gate_proj", "up_proj", "down_proj")


def encode(text: str) -> list[int]:
    """Text to byte ids; specials are never produced from text."""
    return list(text.encode("utf-8"))


def decode(ids: list[int]) -> str:
    """Byte ids back to text; special ids are skipped, bad bytes replaced."""
    return bytes(i for i in ids if i < PAD_ID).decode("utf-8", errors="replace")


def _seed_for(base_model_id: str) -> int:
    digest = hashlib.sha256(base_model_id.encode("utf-8")).hexdigest()
    return int(digest[:8], 16)


def build_base(cfg: TrainerConfig) -> LlamaForCausalLM:
    """Load base_model_id from disk if it is a directory, else init from its hash."""
    path = Path(cfg.base_model_id)
    if path.is_dir():
        return LlamaForCausalLM.from_pretrained(path)
    config = LlamaConfig(
        vocab_size=VOCAB_SIZE,
        hidden_size=_HIDDEN_SIZE,
        intermediate_size=_INTERMEDIATE_SIZE,
        num_hidden_layers=_NUM_LAYERS,
        num_attention_heads=_NUM_HEADS,
        num_key_value_heads=_NUM_HEADS,
        max_position_embeddings=cfg.max_sequence_length,
        tie_word_embeddings=False,
        pad_token_id=PAD_ID,
        bos_token_id=BOS_ID,
        eos_token_id=EOS_ID,
    )
    torch.manual_seed(_seed_for(cfg.base_model_id))
    return LlamaForCausalLM(config)


class LoRALinear(nn.Module):
    """A frozen linear layer plus a trainable low-rank update."""

    def __init__(self, base: nn.Linear, rank: int) -> None:
        super().__init__()
        self.base = base
        self.base.weight.requires_grad_(False)
        if self.base.bias is not None:
            self.base.bias.requires_grad_(False)
        in_features = base.in_features
        out_features = base.out_features
        self.lora_a = nn.Parameter(torch.randn(rank, in_features) / rank)
        self.lora_b = nn.Parameter(torch.zeros(out_features, rank))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        update = nn.functional.linear(nn.functional.linear(x, self.lora_a), self.lora_b)
        return self.base(x) + update


def inject_lora(model: LlamaForCausalLM, rank: int) -> LlamaForCausalLM:
    """Freeze the base, wrap every projection, unfreeze the embedding tables."""
    for param in model.parameters():
        param.requires_grad_(False)
    for layer in model.model.layers:
        for name in _ATTN_PROJECTIONS:
            setattr(layer.self_attn, name, LoRALinear(getattr(layer.self_attn, name), rank))
        for name in _MLP_PROJECTIONS:
            setattr(layer.mlp, name, LoRALinear(getattr(layer.mlp, name), rank))
    model.model.embed_tokens.weight.requires_grad_(True)
    model.lm_head.weight.requires_grad_(True)
    return model


def trainable_state_dict(model: LlamaForCausalLM) -> dict[str, torch.Tensor]:
    """The adapter payload: every parameter that training may change."""
    return {
        name: param.detach().cpu().clone()
        for name, param in model.named_parameters()
        if param.requires_grad
    }


def load_adapter_state(model: LlamaForCausalLM, state: dict[str, torch.Tensor]) -> None:
    """Apply a saved adapter to an injected model; reject foreign keys."""
    result = model.load_state_dict(state, strict=False)
    if result.unexpected_keys:
        raise PredictError(
            f"adapter state holds keys absent from the model: {sorted(result.unexpected_keys)[:3]}"
        )
