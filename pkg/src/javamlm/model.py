"""BERT-style bidirectional encoder with a tied masked-language-model head."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .masking import IGNORE_INDEX

INIT_STD = 0.02


class ShapeMismatch(ValueError):
    pass


class NoMaskedPositions(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    num_layers: int = 2
    hidden: int = 128
    num_heads: int = 4
    intermediate: int | None = None
    vocab_size: int = 8000
    max_positions: int = 128
    type_vocab: int = 2
    dropout: float = 0.1
    layer_norm_eps: float = 1e-12

    def __post_init__(self):
        if self.intermediate is None:
            object.__setattr__(self, "intermediate", 4 * self.hidden)
        for name in ("num_layers", "hidden", "num_heads", "intermediate", "vocab_size", "max_positions", "type_vocab"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.hidden % self.num_heads:
            raise ValueError(f"hidden={self.hidden} is not divisible by num_heads={self.num_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @classmethod
    def bert_base(cls, vocab_size: int = 30522) -> "EncoderConfig":
        return cls(num_layers=12, hidden=768, num_heads=12, intermediate=3072,
                   vocab_size=vocab_size, max_positions=512, type_vocab=2, dropout=0.1)

    def to_dict(self) -> dict:
        return asdict(self)


def count_parameters(config: EncoderConfig) -> int:
    """Closed-form parameter count: tied word embeddings once, LM output bias included, no pooler."""
    h, i, v = config.hidden, config.intermediate, config.vocab_size
    embeddings = (v + config.max_positions + config.type_vocab) * h + 2 * h
    attention = 4 * (h * h + h) + 2 * h
    feed_forward = (h * i + i) + (i * h + h) + 2 * h
    lm_head = (h * h + h) + 2 * h + v
    return embeddings + config.num_layers * (attention + feed_forward) + lm_head


class SelfAttention(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.num_heads = config.num_heads
        self.head_dim = config.hidden // config.num_heads
        self.query = nn.Linear(config.hidden, config.hidden)
        self.key = nn.Linear(config.hidden, config.hidden)
        self.value = nn.Linear(config.hidden, config.hidden)
        self.output = nn.Linear(config.hidden, config.hidden)
        self.dropout = nn.Dropout(config.dropout)
        self.norm = nn.LayerNorm(config.hidden, eps=config.layer_norm_eps)

    def _heads(self, x: torch.Tensor) -> torch.Tensor:
        b, l, _ = x.shape
        return x.view(b, l, self.num_heads, self.head_dim).transpose(1, 2)

    def forward(self, x: torch.Tensor, key_mask: torch.Tensor) -> torch.Tensor:
        b, l, h = x.shape
        q, k, v = self._heads(self.query(x)), self._heads(self.key(x)), self._heads(self.value(x))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        # finite fill keeps all-padding rows uniform instead of NaN
        scores = scores.masked_fill(~key_mask[:, None, None, :], torch.finfo(scores.dtype).min)
        weights = self.dropout(torch.softmax(scores, dim=-1))
        ctx = (weights @ v).transpose(1, 2).reshape(b, l, h)
        return self.norm(x + self.dropout(self.output(ctx)))


class FeedForward(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.inner = nn.Linear(config.hidden, config.intermediate)
        self.outer = nn.Linear(config.intermediate, config.hidden)
        self.dropout = nn.Dropout(config.dropout)
        self.norm = nn.LayerNorm(config.hidden, eps=config.layer_norm_eps)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.norm(x + self.dropout(self.outer(F.gelu(self.inner(x)))))


class EncoderLayer(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.attention = SelfAttention(config)
        self.feed_forward = FeedForward(config)

    def forward(self, x: torch.Tensor, key_mask: torch.Tensor) -> torch.Tensor:
        return self.feed_forward(self.attention(x, key_mask))


class MaskedLM(nn.Module):
    """Post-layer-norm transformer encoder followed by the LM head.

    The output projection shares storage with ``word_embeddings``.
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        h = config.hidden
        self.word_embeddings = nn.Embedding(config.vocab_size, h)
        self.position_embeddings = nn.Embedding(config.max_positions, h)
        self.type_embeddings = nn.Embedding(config.type_vocab, h)
        self.embedding_norm = nn.LayerNorm(h, eps=config.layer_norm_eps)
        self.embedding_dropout = nn.Dropout(config.dropout)
        self.layers = nn.ModuleList(EncoderLayer(config) for _ in range(config.num_layers))
        self.head_transform = nn.Linear(h, h)
        self.head_norm = nn.LayerNorm(h, eps=config.layer_norm_eps)
        self.output_bias = nn.Parameter(torch.zeros(config.vocab_size))

    @property
    def output_weight(self) -> torch.Tensor:
        return self.word_embeddings.weight

    def reset_parameters(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for name, p in self.named_parameters():
                if name.endswith("bias"):
                    p.zero_()
                elif "norm" in name:
                    p.fill_(1.0)
                else:
                    nn.init.trunc_normal_(p, std=INIT_STD, a=-2 * INIT_STD, b=2 * INIT_STD, generator=gen)

    def forward(self, input_ids: torch.Tensor, attention_mask: torch.Tensor | None = None,
                token_type_ids: torch.Tensor | None = None) -> torch.Tensor:
        return self.lm_logits(self.encode(input_ids, attention_mask, token_type_ids))

    def encode(self, input_ids: torch.Tensor, attention_mask: torch.Tensor | None = None,
               token_type_ids: torch.Tensor | None = None) -> torch.Tensor:
        """Final encoder hidden states, ``B x L x hidden``."""
        if input_ids.dim() != 2:
            raise ShapeMismatch(f"input_ids must be B x L, got {tuple(input_ids.shape)}")
        b, l = input_ids.shape
        if l > self.config.max_positions:
            raise ShapeMismatch(f"sequence length {l} exceeds max_positions={self.config.max_positions}")
        if attention_mask is None:
            attention_mask = torch.ones_like(input_ids)
        if attention_mask.shape != input_ids.shape:
            raise ShapeMismatch("attention_mask shape differs from input_ids")
        if token_type_ids is None:
            token_type_ids = torch.zeros_like(input_ids)
        positions = torch.arange(l, device=input_ids.device)
        x = self.word_embeddings(input_ids) + self.position_embeddings(positions)[None] + self.type_embeddings(token_type_ids)
        x = self.embedding_dropout(self.embedding_norm(x))
        key_mask = attention_mask.bool()
        for layer in self.layers:
            x = layer(x, key_mask)
        return x

    def lm_logits(self, hidden: torch.Tensor) -> torch.Tensor:
        x = self.head_norm(F.gelu(self.head_transform(hidden)))
        return x @ self.output_weight.T + self.output_bias


def init(config: EncoderConfig, seed: int) -> MaskedLM:
    model = MaskedLM(config)
    model.reset_parameters(seed)
    return model


def forward(model: MaskedLM, batch) -> torch.Tensor:
    """Logits ``B x L x vocab_size`` for a MaskedBatch."""
    ids = torch.as_tensor(batch.input_ids, dtype=torch.long)
    if int(ids.max()) >= model.config.vocab_size or int(ids.min()) < 0:
        raise ShapeMismatch("batch contains ids outside the model vocabulary")
    return model(ids, torch.as_tensor(batch.attention_mask, dtype=torch.long))


def masked_loss(model: MaskedLM, batch) -> torch.Tensor:
    """Same value as ``mlm_loss(forward(model, batch), batch.labels)``, projecting only labeled positions."""
    labels = torch.as_tensor(batch.labels, dtype=torch.long)
    selected = labels != IGNORE_INDEX
    if not bool(selected.any()):
        raise NoMaskedPositions("no labeled positions in batch")
    ids = torch.as_tensor(batch.input_ids, dtype=torch.long)
    hidden = model.encode(ids, torch.as_tensor(batch.attention_mask, dtype=torch.long))
    return F.cross_entropy(model.lm_logits(hidden[selected]), labels[selected])


def mlm_loss(logits: torch.Tensor, labels) -> torch.Tensor:
    """Mean cross-entropy over labeled positions."""
    labels = torch.as_tensor(labels, dtype=torch.long, device=logits.device)
    if logits.shape[:-1] != labels.shape:
        raise ShapeMismatch(f"logits {tuple(logits.shape)} do not match labels {tuple(labels.shape)}")
    if not bool((labels != IGNORE_INDEX).any()):
        raise NoMaskedPositions("no labeled positions in batch")
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), labels.reshape(-1), ignore_index=IGNORE_INDEX)
