"""Pipeline configuration: one JSON document, overridable from the command line."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .masking import MaskingConfig
from .model import EncoderConfig
from .trainer import TrainConfig

SCHEMA_VERSION = 1
VOCAB_SIZES = (8000, 16000, 32000)


class ConfigError(ValueError):
    pass


@dataclass
class Paths:
    events: str | None = None
    metadata: str | None = None
    repos_root: str | None = None
    run_dir: str = "."


@dataclass
class MinerSettings:
    min_comments: int = 10
    min_tokens: int = 40
    max_tokens: int = 3000
    ratio: float = 0.7
    include_issue_comments: bool = False
    workers: int = 1


@dataclass
class VocabSettings:
    size: int = 8000
    external: str | None = None


@dataclass
class DataSettings:
    # number of independent mask draws cycled through each training epoch
    mask_variants: int = 1
    shuffle: bool = True


@dataclass
class EvalSettings:
    k: list[int] = field(default_factory=lambda: [1, 3])
    batch_size: int = 30
    model_name: str | None = None


@dataclass
class PipelineConfig:
    seed: int = 0
    paths: Paths = field(default_factory=Paths)
    miner: MinerSettings = field(default_factory=MinerSettings)
    vocab: VocabSettings = field(default_factory=VocabSettings)
    masking: MaskingConfig = field(default_factory=lambda: MaskingConfig(max_seq_len=128))
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    data: DataSettings = field(default_factory=DataSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)

    def validate(self) -> None:
        m = self.miner
        if min(m.min_comments, m.min_tokens, m.max_tokens) <= 0:
            raise ConfigError("miner thresholds must be positive")
        if m.min_tokens > m.max_tokens:
            raise ConfigError("min_tokens exceeds max_tokens")
        if not 0 < m.ratio < 1:
            raise ConfigError("ratio must lie strictly between 0 and 1")
        if self.vocab.external is None and self.vocab.size < 1:
            raise ConfigError("vocab size must be positive")
        if self.data.mask_variants < 1:
            raise ConfigError("data.mask_variants must be >= 1")
        if any(k < 1 for k in self.eval.k):
            raise ConfigError("eval k values must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        """SHA-256 over the resolved settings; file locations are left out."""
        d = self.to_dict()
        d.pop("paths")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_SECTIONS = {
    "paths": Paths,
    "miner": MinerSettings,
    "vocab": VocabSettings,
    "masking": MaskingConfig,
    "encoder": EncoderConfig,
    "training": TrainConfig,
    "data": DataSettings,
    "eval": EvalSettings,
}


def _build(cls, values: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{section}] settings: {exc}") from None


def from_dict(raw: dict) -> PipelineConfig:
    unknown = set(raw) - set(_SECTIONS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    base = PipelineConfig()
    seed = int(raw.get("seed", base.seed))
    kwargs = {"seed": seed}
    for name, cls in _SECTIONS.items():
        defaults = asdict(getattr(base, name))
        defaults.update(raw.get(name) or {})
        # the global seed is the single source of randomness
        if name in ("masking", "training"):
            defaults["seed"] = seed
        kwargs[name] = _build(cls, defaults, name)
    cfg = PipelineConfig(**kwargs)
    cfg.validate()
    return cfg


def load(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return from_dict(raw)


def override(cfg: PipelineConfig, section: str, **values) -> PipelineConfig:
    """Return a copy with non-None ``values`` replacing keys of ``section`` (or top-level ``seed``)."""
    raw = cfg.to_dict()
    for key, value in values.items():
        if value is None:
            continue
        if section == "":
            raw[key] = value
        else:
            raw[section][key] = value
    return from_dict(raw)
