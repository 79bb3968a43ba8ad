"""Checkpoint directories: a JSON manifest plus one raw float32 file per tensor."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .model import EncoderConfig, MaskedLM

FORMAT_VERSION = 1
MANIFEST = "manifest.json"


def save(model: MaskedLM, directory: str | Path, extra: dict | None = None) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, tensor in model.named_parameters():
        data = tensor.detach().cpu().to(torch.float32).numpy()
        fname = name + ".bin"
        (out / fname).write_bytes(np.ascontiguousarray(data, dtype="<f4").tobytes())
        entries.append({"name": name, "shape": list(data.shape), "dtype": "float32", "file": fname})
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "tied": {"output_weight": "word_embeddings.weight"},
        "tensors": entries,
    }
    if extra:
        manifest.update(extra)
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def read_manifest(directory: str | Path) -> dict:
    return json.loads((Path(directory) / MANIFEST).read_text(encoding="utf-8"))


def load(directory: str | Path) -> MaskedLM:
    src = Path(directory)
    manifest = read_manifest(src)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {manifest.get('format_version')}")
    model = MaskedLM(EncoderConfig(**manifest["config"]))
    params = dict(model.named_parameters())
    if set(params) != {e["name"] for e in manifest["tensors"]}:
        raise ValueError("checkpoint tensors do not match the model layout")
    with torch.no_grad():
        for entry in manifest["tensors"]:
            raw = np.frombuffer((src / entry["file"]).read_bytes(), dtype="<f4")
            target = params[entry["name"]]
            if list(target.shape) != entry["shape"] or raw.size != target.numel():
                raise ValueError(f"shape mismatch for {entry['name']}")
            target.copy_(torch.from_numpy(raw.reshape(entry["shape"]).astype(np.float32)))
    return model
