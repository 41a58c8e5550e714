"""Checkpoint directories: manifest.json plus one raw float32 file per tensor.

Layout:
    manifest.json   parameter names/shapes/files, config, step, epoch count
    p0000.bin ...   row-major little-endian float32, one file per parameter
    opt/            optimizer moment buffers in the same raw format
    assets/         copies of the tokenizer / anchor vocab / skeleton files

Saving is deterministic: parameters are ordered by name, JSON keys sorted,
so save -> load -> save reproduces the bytes.
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

import numpy as np

from . import ndtensor as nd
from .config import TrainConfig


def save_checkpoint(
    out_dir,
    params: dict[str, nd.Tensor],
    cfg: TrainConfig,
    step: int,
    epochs_done: int,
    optimizer_state: dict[str, np.ndarray] | None = None,
    optimizer_t: int = 0,
    assets: dict[str, Path] | None = None,
) -> Path:
    out_dir = Path(out_dir)
    if out_dir.exists():
        shutil.rmtree(out_dir)
    out_dir.mkdir(parents=True)

    names = sorted(params)
    entries = []
    for i, name in enumerate(names):
        fname = f"p{i:04d}.bin"
        arr = params[name].data.astype("<f4")
        (out_dir / fname).write_bytes(arr.tobytes())
        entries.append({"name": name, "shape": list(params[name].shape), "file": fname})

    opt_section = None
    if optimizer_state:
        (out_dir / "opt").mkdir()
        opt_section = {"t": optimizer_t, "buffers": []}
        for i, key in enumerate(sorted(optimizer_state)):
            fname = f"opt/o{i:04d}.bin"
            arr = optimizer_state[key].astype("<f4")
            (out_dir / fname).write_bytes(arr.tobytes())
            opt_section["buffers"].append({"name": key, "shape": list(arr.shape), "file": fname})

    asset_section = {}
    if assets:
        (out_dir / "assets").mkdir()
        for key, src in assets.items():
            dst = f"assets/{Path(src).name}"
            shutil.copyfile(src, out_dir / dst)
            asset_section[key] = dst

    manifest = {
        "format": 1,
        "step": step,
        "epochs_done": epochs_done,
        "config": cfg.to_dict(),
        "params": entries,
        "optimizer": opt_section,
        "assets": asset_section,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2), encoding="utf-8"
    )
    return out_dir


class Checkpoint:
    def __init__(self, directory, manifest: dict):
        self.directory = Path(directory)
        self.manifest = manifest
        self.config = TrainConfig.from_dict(manifest["config"])
        self.step = manifest["step"]
        self.epochs_done = manifest["epochs_done"]

    def _read(self, entry) -> np.ndarray:
        raw = (self.directory / entry["file"]).read_bytes()
        arr = np.frombuffer(raw, dtype="<f4").reshape(entry["shape"])
        return arr

    def load_params(self, dtype) -> dict[str, nd.Tensor]:
        return {
            e["name"]: nd.Tensor(self._read(e).astype(dtype), requires_grad=True)
            for e in self.manifest["params"]
        }

    def load_optimizer(self, dtype) -> tuple[dict[str, np.ndarray], int] | None:
        section = self.manifest.get("optimizer")
        if not section:
            return None
        buffers = {b["name"]: self._read(b).astype(dtype) for b in section["buffers"]}
        return buffers, section["t"]

    def asset(self, key: str) -> Path | None:
        rel = self.manifest.get("assets", {}).get(key)
        return self.directory / rel if rel else None


def load_checkpoint(directory) -> Checkpoint:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format") != 1:
        raise ValueError(f"unsupported checkpoint format {manifest.get('format')}")
    return Checkpoint(directory, manifest)
