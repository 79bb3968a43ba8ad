"""Command-line entry point: ``javamlm <subcommand> [flags]``.

Every subcommand loads one JSON config (``--config``), applies its own flag
overrides, checks that declared inputs exist, and writes outputs under
``--run-dir``. Failures print one JSON line ``{"error": category, "message": ...}``
to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, checkpoint
from . import config as config_mod
from .config import ConfigError, PipelineConfig
from .lexer import LexError, lex
from .masking import make_batches
from .metrics import EmptyBatch, EmptyInput, MatchRule
from .miner import MANIFEST_VERSION, CorpusManifest, mine
from .model import NoMaskedPositions, ShapeMismatch, init
from .pipeline import (VocabMismatch, build_examples, encode_streams, format_table, read_token_streams,
                       report_json, run_eval)
from .trainer import NonFiniteLoss, train
from .wordpiece import IdOutOfRange, InvalidVocabulary, TargetTooSmall, Vocabulary, train_vocab

log = logging.getLogger("javamlm")

EXIT_CODES = {"config-error": 2}
# exception type -> error category, most specific first
ERROR_CATEGORIES = [
    (ConfigError, "config-error"),
    (LexError, "lex-error"),
    ((TargetTooSmall, InvalidVocabulary, IdOutOfRange), "vocab-error"),
    ((VocabMismatch, ShapeMismatch), "shape-error"),
    ((NoMaskedPositions, EmptyBatch, EmptyInput), "data-error"),
    (NonFiniteLoss, "training-diverged"),
    (OSError, "io-error"),
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _require(path, what: str) -> Path:
    if path is None:
        raise ConfigError(f"{what} is not set")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} not found: {p}")
    return p


class Context:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.run_dir = Path(cfg.paths.run_dir)

    def output(self, path: str) -> Path:
        p = Path(path)
        p = p if p.is_absolute() else self.run_dir / p
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def input(self, path, what: str) -> Path:
        """Existing input; relative paths are looked up in the run directory first."""
        if path is not None and not Path(path).is_absolute() and (self.run_dir / path).exists():
            return self.run_dir / path
        return _require(path, what)

    def meta(self, kind: str, **extra) -> dict:
        return {"kind": kind, "config_hash": self.cfg.hash(), "schema_version": config_mod.SCHEMA_VERSION, **extra}

    def repos_root(self) -> Path:
        return _require(self.cfg.paths.repos_root, "repos root")


    def vocab(self, path) -> Vocabulary:
        return Vocabulary.load(self.input(path, "vocab file"))

    def manifest(self, path) -> CorpusManifest:
        return CorpusManifest.read(self.input(path, "manifest"))


# subcommands ---------------------------------------------------------------

def cmd_mine(ctx: Context, args) -> None:
    cfg, m = ctx.cfg, ctx.cfg.miner
    manifest, summary = mine(
        _require(cfg.paths.events, "events directory"),
        _require(cfg.paths.metadata, "metadata file"),
        ctx.repos_root(),
        min_tokens=m.min_tokens, max_tokens=m.max_tokens, min_comments=m.min_comments,
        ratio=m.ratio, seed=cfg.seed, include_issue_comments=m.include_issue_comments, workers=m.workers,
    )
    out = ctx.output(args.out)
    manifest.write(out)
    _write_json(_meta_path(out), ctx.meta("manifest", manifest_version=MANIFEST_VERSION, summary=summary.to_json()))
    print(json.dumps(summary.to_json(), sort_keys=True))


def cmd_lex(ctx: Context, args) -> None:
    src = ctx.input(args.file, "source file").read_bytes().decode("utf-8")
    toks = lex(src)
    for t in toks:
        if args.format == "jsonl":
            print(json.dumps(t.to_json(), ensure_ascii=False))
        else:
            print(f"{t.kind.value}\t{t.text}")


def cmd_train_vocab(ctx: Context, args) -> None:
    cfg = ctx.cfg
    out = ctx.output(args.out)
    if cfg.vocab.external:
        vocab = ctx.vocab(cfg.vocab.external)
        source = "external"
    else:
        manifest = ctx.manifest(args.manifest)
        streams = read_token_streams(manifest, ctx.repos_root(), "train")
        vocab = train_vocab(streams, cfg.vocab.size)
        source = "trained"
    vocab.save(out)
    _write_json(_meta_path(out), ctx.meta("vocab", source=source, target_size=cfg.vocab.size, size=vocab.size))
    print(json.dumps({"vocab": str(out), "size": vocab.size}))


def cmd_encode(ctx: Context, args) -> None:
    manifest = ctx.manifest(args.manifest)
    vocab = ctx.vocab(args.vocab)
    split = None if args.split == "all" else args.split
    entries = manifest.entries if split is None else manifest.by_split(split)
    seqs = encode_streams(read_token_streams(manifest, ctx.repos_root(), split), vocab)
    out = ctx.output(args.out)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        for entry, seq in zip(entries, seqs):
            row = {"path": entry.path, "ids": seq.ids, "lexeme_boundaries": [list(b) for b in seq.lexeme_boundaries]}
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")
    _write_json(_meta_path(out), ctx.meta("encoded", split=args.split, sequences=len(seqs)))


def training_batches(cfg: PipelineConfig, vocab: Vocabulary, examples) -> list:
    """Static masks: ``mask_variants`` independent draws of the whole example list, cycled per epoch."""
    batches = []
    for k in range(cfg.data.mask_variants):
        mcfg = replace(cfg.masking, seed=cfg.masking.seed + 1000 * k)
        batches += make_batches(examples, vocab, mcfg, cfg.training.batch_size)
    return batches


def cmd_train(ctx: Context, args) -> None:
    cfg = ctx.cfg
    manifest = ctx.manifest(args.manifest)
    vocab = ctx.vocab(args.vocab)
    enc = replace(cfg.encoder, vocab_size=vocab.size)
    if cfg.masking.max_seq_len > enc.max_positions:
        raise ConfigError(f"masking.max_seq_len {cfg.masking.max_seq_len} exceeds encoder.max_positions {enc.max_positions}")
    seqs = encode_streams(read_token_streams(manifest, ctx.repos_root(), "train"), vocab)
    examples = build_examples(seqs, vocab, cfg.masking.max_seq_len, cfg.seed if cfg.data.shuffle else None)
    if not examples:
        raise EmptyInput("training split produced no examples")
    batches = training_batches(cfg, vocab, examples)
    model, trainlog = train(init(enc, cfg.seed), batches, cfg.training)
    out = ctx.output(args.out)
    checkpoint.save(model, out, extra={"config_hash": cfg.hash(), "steps": len(trainlog.records)})
    trainlog.write_csv(out / "train_log.csv")
    trainlog.write_gnuplot(out / "loss.dat")
    print(json.dumps({"checkpoint": str(out), "steps": len(trainlog.records),
                      "final_loss": trainlog.losses[-1] if trainlog.losses else None}))


def cmd_eval(ctx: Context, args) -> None:
    cfg = ctx.cfg
    ckpt = ctx.input(args.ckpt, "checkpoint")
    if not (ckpt / checkpoint.MANIFEST).is_file():
        raise ConfigError(f"checkpoint manifest missing in {ckpt}")
    vocab = ctx.vocab(args.vocab)
    manifest = ctx.manifest(args.manifest)
    model = checkpoint.load(ckpt)
    rules = [MatchRule(k) for k in sorted(set(cfg.eval.k))]
    reports = run_eval(model, vocab, manifest, ctx.repos_root(), cfg.masking, rules, cfg.eval.batch_size, args.split)
    name = cfg.eval.model_name or f"vocab-{vocab.size}"
    extra = {
        "config_hash": cfg.hash(),
        "checkpoint_config_hash": checkpoint.read_manifest(ckpt).get("config_hash"),
        "seed": cfg.seed,
        "split": args.split,
    }
    report = report_json(name, vocab.size, reports, extra)
    out = ctx.output(args.out)
    _write_json(out, report)
    out.with_suffix(".txt").write_text(format_table([report]), encoding="utf-8")
    print(format_table([report]), end="")


def cmd_report(ctx: Context, args) -> None:
    rows = [json.loads(ctx.input(p, "eval report").read_text(encoding="utf-8")) for p in args.reports]
    table = format_table(rows)
    out = ctx.output(args.out)
    out.write_text(table, encoding="utf-8")
    _write_json(out.with_suffix(".json"), {**ctx.meta("report"), "runs": rows})
    print(table, end="")


# argument parsing ----------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON pipeline config")
    p.add_argument("--run-dir", help="directory that receives every output (default: config paths.run_dir)")
    p.add_argument("--seed", type=int, help="global seed (split, init, shuffling, masking)")
    p.add_argument("--repos-root", help="root of the cloned repositories, laid out as owner/name")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="javamlm", description="Java masked-language-model pipeline")
    parser.add_argument("--version", action="store_true", help="print package, schema and format versions")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("mine", parents=[common], help="filter repositories and sample files into a manifest")
    p.add_argument("--events")
    p.add_argument("--meta")
    p.add_argument("--min-tokens", type=int)
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--min-comments", type=int)
    p.add_argument("--ratio", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--include-issue-comments", action="store_true", default=None)
    p.add_argument("--out", default="manifest.jsonl")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("lex", parents=[common], help="print the lexeme stream of one Java file")
    p.add_argument("file")
    p.add_argument("--format", choices=["jsonl", "text"], default="jsonl")
    p.set_defaults(func=cmd_lex)

    p = sub.add_parser("train-vocab", parents=[common], help="train a WordPiece vocabulary on the train split")
    p.add_argument("--manifest")
    p.add_argument("--size", type=int)
    p.add_argument("--external", help="validate and copy an existing vocab file instead of training")
    p.add_argument("--out", default="vocab.txt")
    p.set_defaults(func=cmd_train_vocab)

    p = sub.add_parser("encode", parents=[common], help="encode manifest files into subword ids")
    p.add_argument("--manifest", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--split", choices=["train", "test", "all"], default="train")
    p.add_argument("--out", default="encoded.jsonl")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", parents=[common], help="pretrain the encoder on the train split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--out", default="ckpt")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint with k-word match rates")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, action="append")
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--model-name")
    p.add_argument("--out", default="eval_report.json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", parents=[common], help="merge eval reports into one comparison table")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", default="report.txt")
    p.set_defaults(func=cmd_report)
    return parser


def resolve_config(args) -> PipelineConfig:
    cfg = config_mod.load(getattr(args, "config", None))
    g = lambda name: getattr(args, name, None)
    cfg = config_mod.override(cfg, "", seed=g("seed"))
    cfg = config_mod.override(cfg, "paths", run_dir=g("run_dir"), repos_root=g("repos_root"),
                              events=g("events"), metadata=g("meta"))
    cfg = config_mod.override(cfg, "miner", min_tokens=g("min_tokens"), max_tokens=g("max_tokens"),
                              min_comments=g("min_comments"), ratio=g("ratio"), workers=g("workers"),
                              include_issue_comments=g("include_issue_comments"))
    cfg = config_mod.override(cfg, "vocab", size=g("size"), external=g("external"))
    cfg = config_mod.override(cfg, "training", epochs=g("epochs"), learning_rate=g("lr"),
                              batch_size=g("batch_size") if args.command == "train" else None)
    cfg = config_mod.override(cfg, "eval", k=g("k"), model_name=g("model_name"),
                              batch_size=g("batch_size") if args.command == "eval" else None)
    return cfg


def version_info() -> dict:
    return {
        "javamlm": __version__,
        "config_schema": config_mod.SCHEMA_VERSION,
        "checkpoint_format": checkpoint.FORMAT_VERSION,
        "manifest_version": MANIFEST_VERSION,
    }


def _category(exc: BaseException) -> str:
    for types, name in ERROR_CATEGORIES:
        if isinstance(exc, types):
            return name
    return "internal-error"


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.version:
            print(json.dumps(version_info(), sort_keys=True))
            return 0
        if args.command is None:
            raise ConfigError("no subcommand given")
        args.func(Context(resolve_config(args)), args)
        return 0
    except Exception as exc:  # noqa: BLE001 - every failure becomes one JSON line
        category = _category(exc)
        log.debug("failure", exc_info=True)
        message = " ".join(str(exc).split()) or type(exc).__name__
        print(json.dumps({"error": category, "message": message}), file=sys.stderr)
        return EXIT_CODES.get(category, 1)


if __name__ == "__main__":
    sys.exit(main())
