"""Glue between the stages: manifest files to examples, and checkpoint evaluation."""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch

from .lexer import JavaToken, lex
from .masking import IGNORE_INDEX, MaskingConfig, make_batches, make_examples
from .metrics import BatchScore, EvalReport, MatchRule, aggregate, label_ranks
from .miner import CorpusManifest
from .model import MaskedLM
from .wordpiece import EncodedSequence, Vocabulary, encode


class VocabMismatch(ValueError):
    pass


def read_token_streams(manifest: CorpusManifest, repos_root: str | Path, split: str | None = None) -> list[list[JavaToken]]:
    root = Path(repos_root)
    entries = manifest.entries if split is None else manifest.by_split(split)
    return [lex((root / e.path).read_bytes().decode("utf-8")) for e in entries]


def encode_streams(streams: Iterable[Sequence[JavaToken]], vocab: Vocabulary) -> list[EncodedSequence]:
    return [encode(s, vocab) for s in streams]


def build_examples(
    seqs: Iterable[EncodedSequence],
    vocab: Vocabulary,
    max_seq_len: int,
    shuffle_seed: int | None = None,
) -> list[list[int]]:
    """Window every sequence; optionally shuffle the resulting examples once."""
    examples = [ex for seq in seqs for ex in make_examples(seq, max_seq_len, vocab)]
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(examples))
        examples = [examples[i] for i in order]
    return examples


@torch.no_grad()
def evaluate_examples(
    model: MaskedLM,
    vocab: Vocabulary,
    examples: Sequence[Sequence[int]],
    cfg: MaskingConfig,
    rules: Sequence[MatchRule] = (MatchRule(1), MatchRule(3)),
    batch_size: int = 30,
) -> dict[int, EvalReport]:
    """Mask with pure ``[MASK]`` replacement and score each batch under every rule.

    Batches without any selected position are skipped.
    """
    if model.config.vocab_size != vocab.size:
        raise VocabMismatch(f"model vocab_size {model.config.vocab_size} != vocabulary size {vocab.size}")
    cfg = replace(cfg, replace_mask=1.0, replace_random=0.0, keep=0.0)
    model.eval()
    records: dict[int, list] = {r.k: [] for r in rules}
    for batch in make_batches(examples, vocab, cfg, batch_size):
        if not (batch.labels != IGNORE_INDEX).any():
            continue
        logits = model(torch.as_tensor(batch.input_ids), torch.as_tensor(batch.attention_mask))
        ranks = label_ranks(logits, batch.labels)
        for rule in rules:
            records[rule.k].append(BatchScore(n=int(ranks.size), c=int((ranks < rule.k).sum())))
    return {k: aggregate(recs, k) for k, recs in records.items()}


def run_eval(
    model: MaskedLM,
    vocab: Vocabulary,
    manifest: CorpusManifest,
    repos_root: str | Path,
    cfg: MaskingConfig,
    rules: Sequence[MatchRule] = (MatchRule(1), MatchRule(3)),
    batch_size: int = 30,
    split: str = "test",
) -> dict[int, EvalReport]:
    if model.config.vocab_size != vocab.size:
        raise VocabMismatch(f"model vocab_size {model.config.vocab_size} != vocabulary size {vocab.size}")
    max_len = min(cfg.max_seq_len, model.config.max_positions)
    seqs = encode_streams(read_token_streams(manifest, repos_root, split), vocab)
    examples = build_examples(seqs, vocab, max_len)
    return evaluate_examples(model, vocab, examples, replace(cfg, max_seq_len=max_len), rules, batch_size)


def report_json(model_name: str, vocab_size: int, reports: dict[int, EvalReport], extra: dict | None = None) -> dict:
    out = {
        "model": model_name,
        "vocab_size": vocab_size,
        "rules": [reports[k].to_json() for k in sorted(reports)],
    }
    if extra:
        out.update(extra)
    return out


def format_table(rows: Sequence[dict]) -> str:
    """Plain-text comparison table with one row per evaluated model."""
    ks = sorted({r["k"] for row in rows for r in row["rules"]})
    headers = ["Model"] + [MatchRule(k).name for k in ks]
    body = []
    for row in rows:
        by_k = {r["k"]: r["aggregate_R"] for r in row["rules"]}
        body.append([row["model"]] + [f"{100 * by_k[k]:.1f}%" if k in by_k else "-" for k in ks])
    widths = [max(len(str(x)) for x in col) for col in zip(headers, *body)]
    lines = [" | ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("-+-".join("-" * w for w in widths))
    lines += [" | ".join(c.ljust(w) for c, w in zip(r, widths)) for r in body]
    return "\n".join(lines) + "\n"
