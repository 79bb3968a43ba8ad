"""Fixed-shape masked batches for the masked-language-model objective."""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .wordpiece import EncodedSequence, Vocabulary

IGNORE_INDEX = -100


@dataclass(frozen=True)
class MaskingConfig:
    mask_prob: float = 0.15
    replace_mask: float = 0.8
    replace_random: float = 0.1
    keep: float = 0.1
    seed: int = 0
    max_seq_len: int = 512

    def __post_init__(self):
        if not 0.0 <= self.mask_prob <= 1.0:
            raise ValueError(f"mask_prob must lie in [0, 1], got {self.mask_prob}")
        fractions = (self.replace_mask, self.replace_random, self.keep)
        if min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError(f"treatment fractions must be non-negative and sum to 1, got {fractions}")
        if self.max_seq_len < 3:
            raise ValueError("max_seq_len must be at least 3")


@dataclass
class MaskedBatch:
    input_ids: np.ndarray
    attention_mask: np.ndarray
    labels: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.input_ids.shape

    def dump(self, path: str | Path) -> None:
        """Write ``B, L`` then the three matrices as little-endian int32, row-major."""
        b, l = self.shape
        with open(path, "wb") as fh:
            fh.write(struct.pack("<ii", b, l))
            for m in (self.input_ids, self.attention_mask, self.labels):
                fh.write(np.ascontiguousarray(m, dtype="<i4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "MaskedBatch":
        raw = Path(path).read_bytes()
        b, l = struct.unpack_from("<ii", raw)
        mats = np.frombuffer(raw, dtype="<i4", offset=8).reshape(3, b, l).astype(np.int64)
        return cls(mats[0].copy(), mats[1].copy(), mats[2].copy())


def make_examples(seq: EncodedSequence, max_seq_len: int, vocab: Vocabulary) -> list[list[int]]:
    """Cut ``seq`` into ``[CLS] ... [SEP]`` windows of at most ``max_seq_len`` ids.

    Windows are packed greedily with whole lexemes; a lexeme longer than a
    window's capacity is the only case that gets split.
    """
    if max_seq_len < 3:
        raise ValueError("max_seq_len must be at least 3")
    if not seq.ids:
        return []
    cap = max_seq_len - 2
    windows: list[list[int]] = []
    cur: list[int] = []
    for start, end in seq.lexeme_boundaries:
        run = seq.ids[start:end]
        if len(cur) + len(run) <= cap:
            cur.extend(run)
            continue
        if cur:
            windows.append(cur)
            cur = []
        while len(run) > cap:
            windows.append(run[:cap])
            run = run[cap:]
        cur = list(run)
    if cur:
        windows.append(cur)
    return [[vocab.cls_id] + w + [vocab.sep_id] for w in windows]


def mask(examples: Sequence[Sequence[int]], vocab: Vocabulary, cfg: MaskingConfig) -> MaskedBatch:
    """Pad ``examples`` to the longest one and select positions for prediction.

    Random draws are taken for every cell in row-major order regardless of
    eligibility, so the result depends only on the batch shape and the seed.
    """
    if not examples:
        raise ValueError("cannot build a batch from zero examples")
    b = len(examples)
    l = max(len(e) for e in examples)
    ids = np.full((b, l), vocab.pad_id, dtype=np.int64)
    attn = np.zeros((b, l), dtype=np.int64)
    for r, ex in enumerate(examples):
        ids[r, : len(ex)] = ex
        attn[r, : len(ex)] = 1

    control = np.array(sorted(vocab.control_ids), dtype=np.int64)
    eligible = (attn == 1) & ~np.isin(ids, control)

    rng = np.random.default_rng(cfg.seed)
    select_draw = rng.random((b, l))
    treat_draw = rng.random((b, l))
    candidates = np.array([i for i in range(vocab.size) if i not in vocab.control_ids], dtype=np.int64)
    random_ids = candidates[rng.integers(0, len(candidates), size=(b, l))]

    selected = eligible & (select_draw < cfg.mask_prob)
    labels = np.where(selected, ids, IGNORE_INDEX)
    to_mask = selected & (treat_draw < cfg.replace_mask)
    to_random = selected & ~to_mask & (treat_draw < cfg.replace_mask + cfg.replace_random)
    out = ids.copy()
    out[to_mask] = vocab.mask_id
    out[to_random] = random_ids[to_random]
    return MaskedBatch(out, attn, labels)


def make_batches(
    examples: Sequence[Sequence[int]],
    vocab: Vocabulary,
    cfg: MaskingConfig,
    batch_size: int,
) -> list[MaskedBatch]:
    """Split ``examples`` into consecutive batches; batch ``i`` is masked with seed ``cfg.seed + i``."""
    batches = []
    for i, start in enumerate(range(0, len(examples), batch_size)):
        chunk = examples[start:start + batch_size]
        batches.append(mask(chunk, vocab, replace(cfg, seed=cfg.seed + i)))
    return batches

