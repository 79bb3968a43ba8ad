"""Deterministic single-process MLM training loop."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import torch

from .masking import MaskedBatch
from .model import MaskedLM, forward, masked_loss, mlm_loss
from .optim import AdamW, constant_schedule, param_groups

log = logging.getLogger(__name__)


class NonFiniteLoss(FloatingPointError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"non-finite loss {loss} at step {step}")
        self.step = step
        self.loss = loss


@dataclass
class TrainConfig:
    learning_rate: float = 5e-5
    batch_size: int = 30
    epochs: int = 1
    weight_decay: float = 0.01
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    log_every: int = 1
    grad_accum: int = 1

    def __post_init__(self):
        self.adam_betas = tuple(self.adam_betas)
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1 or self.epochs < 1 or self.grad_accum < 1 or self.log_every < 1:
            raise ValueError("batch_size, epochs, grad_accum and log_every must be >= 1")


@dataclass
class StepRecord:
    step: int
    loss: float
    tokens: int
    elapsed_s: float


@dataclass
class TrainLog:
    records: list[StepRecord] = field(default_factory=list)
    checkpoint: str | None = None

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.records]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "loss", "tokens", "elapsed_s"])
            for r in self.records:
                w.writerow([r.step, repr(r.loss), r.tokens, f"{r.elapsed_s:.3f}"])

    def write_gnuplot(self, path: str | Path) -> None:
        """Two-column ``step loss`` data file; plot with ``plot 'loss.dat' with lines``."""
        with open(path, "w") as fh:
            fh.write("# step loss\n")
            for r in self.records:
                fh.write(f"{r.step} {r.loss!r}\n")


def train(
    model: MaskedLM,
    batches: Sequence[MaskedBatch],
    cfg: TrainConfig,
    schedule: Callable[[int], float] = constant_schedule,
) -> tuple[MaskedLM, TrainLog]:
    """Run ``cfg.epochs`` passes over ``batches`` in the given order.

    With ``grad_accum > 1`` consecutive batches are averaged into one
    optimizer step. Losses are recorded per optimizer step.
    """
    if not batches:
        raise ValueError("no training batches")
    torch.manual_seed(cfg.seed)
    opt = AdamW(
        param_groups(model, cfg.weight_decay),
        lr=cfg.learning_rate,
        betas=cfg.adam_betas,
        eps=cfg.adam_eps,
    )
    trainlog = TrainLog()
    model.train()
    start = time.perf_counter()
    step = 0
    tokens = 0
    pending = 0
    accum_loss = 0.0
    opt.zero_grad(set_to_none=True)
    for epoch in range(cfg.epochs):
        for batch in batches:
            loss = masked_loss(model, batch)
            value = loss.item()
            if not math.isfinite(value):
                raise NonFiniteLoss(step, value)
            (loss / cfg.grad_accum).backward()
            accum_loss += value / cfg.grad_accum
            tokens += int(batch.attention_mask.sum())
            pending += 1
            if pending < cfg.grad_accum:
                continue
            for group in opt.param_groups:
                group["lr"] = cfg.learning_rate * schedule(step)
            opt.step()
            opt.zero_grad(set_to_none=True)
            if step % cfg.log_every == 0:
                trainlog.records.append(StepRecord(step, accum_loss, tokens, time.perf_counter() - start))
                log.debug("step %d loss %.4f", step, accum_loss)
            step += 1
            pending = 0
            accum_loss = 0.0
    model.eval()
    return model, trainlog


@torch.no_grad()
def evaluate_loss(model: MaskedLM, batches: Sequence[MaskedBatch]) -> float:
    if not batches:
        raise ValueError("no evaluation batches")
    was_training = model.training
    model.eval()
    total = 0.0
    for batch in batches:
        total += mlm_loss(forward(model, batch), batch.labels).item()
    model.train(was_training)
    return total / len(batches)
