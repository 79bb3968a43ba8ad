"""Masked-token accuracy: R = C / N over labeled positions, top-1 and top-3."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from .masking import IGNORE_INDEX


class EmptyBatch(ValueError):
    pass


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class MatchRule:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def name(self) -> str:
        return "1-Word-Match" if self.k == 1 else f"{self.k}-Words-Match"


@dataclass(frozen=True)
class BatchScore:
    n: int
    c: int

    @property
    def r(self) -> float:
        return self.c / self.n


@dataclass
class EvalReport:
    k: int
    batches: list[BatchScore] = field(default_factory=list)

    @property
    def aggregate_r(self) -> float:
        return sum(b.r for b in self.batches) / len(self.batches)

    @property
    def total_n(self) -> int:
        return sum(b.n for b in self.batches)

    @property
    def total_c(self) -> int:
        return sum(b.c for b in self.batches)

    @property
    def token_weighted_r(self) -> float:
        return self.total_c / self.total_n

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "aggregate_R": self.aggregate_r,
            "token_weighted_R": self.token_weighted_r,
            "num_batches": len(self.batches),
            "total_N": self.total_n,
            "total_C": self.total_c,
        }


def label_ranks(logits, labels) -> np.ndarray:
    """Zero-based rank of each labeled position's true id, ties going to the lower id."""
    logits = torch.as_tensor(logits)
    labels = torch.as_tensor(labels, dtype=torch.long)
    if logits.shape[:-1] != labels.shape:
        raise ValueError(f"logits {tuple(logits.shape)} do not match labels {tuple(labels.shape)}")
    flat = logits.reshape(-1, logits.shape[-1])
    lab = labels.reshape(-1)
    keep = lab != IGNORE_INDEX
    flat, lab = flat[keep], lab[keep]
    target = flat.gather(1, lab[:, None])
    ids = torch.arange(flat.shape[-1])[None, :]
    ahead = (flat > target) | ((flat == target) & (ids < lab[:, None]))
    return ahead.sum(dim=1).numpy()


def score_batch(logits, labels, rule: MatchRule) -> BatchScore:
    ranks = label_ranks(logits, labels)
    if ranks.size == 0:
        raise EmptyBatch("batch has no labeled positions")
    return BatchScore(n=int(ranks.size), c=int((ranks < rule.k).sum()))


def aggregate(records: Sequence[BatchScore], k: int = 1) -> EvalReport:
    """Unweighted mean of per-batch R; token-weighted R is available on the report too."""
    if not records:
        raise EmptyInput("no batch records to aggregate")
    return EvalReport(k=k, batches=list(records))
