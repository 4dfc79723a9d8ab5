"""On-disk artifacts: JSON checkpoints, loss-history CSV and per-horizon result tables."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Model, ModelConfig

CHECKPOINT_FORMAT = "timgcn-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: Model, path, run_config: dict | None = None, config_hash: str | None = None,
                    base_dir=None) -> None:
    """Textual checkpoint; floats are written with ``repr`` so loading is exact
    and equal models produce byte-identical files."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "model": model.cfg.to_dict(),
        "run": run_config,
        "base_dir": None if base_dir is None else str(Path(base_dir).resolve()),
        "params": [{"name": k, "shape": list(v.shape), "data": v.ravel().tolist()}
                   for k, v in model.params.items()],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8", newline="\n")


def load_checkpoint(path) -> tuple[Model, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    cfg = ModelConfig.from_dict(doc["model"])
    params = {p["name"]: np.array(p["data"], dtype=np.float64).reshape(p["shape"]) for p in doc["params"]}
    expected = list(Model.init(cfg).params)
    if list(params) != expected:
        raise ValueError(f"{path}: parameter list does not match the model configuration")
    return Model(cfg, params), doc


def write_history(history, path, config_hash: str | None = None) -> None:
    lines = [f"# config_hash={config_hash}"] if config_hash else []
    lines.append("epoch,mean_loss,lr")
    lines += [f"{h['epoch']},{h['mean_loss']!r},{h['lr']!r}" for h in history]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_history(path) -> list[dict]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#") or line.startswith("epoch"):
            continue
        e, loss, lr = line.split(",")
        rows.append({"epoch": int(e), "mean_loss": float(loss), "lr": float(lr)})
    return rows


@dataclass
class ResultTable:
    horizons_ms: list[float]
    rows: list[tuple[str, list[float]]] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, name: str, values) -> None:
        values = [float(v) for v in values]
        if len(values) != len(self.horizons_ms):
            raise ValueError(f"row {name!r} has {len(values)} cells for {len(self.horizons_ms)} horizons")
        self.rows.append((name, values))

    def row(self, name: str) -> list[float]:
        for n, v in self.rows:
            if n == name:
                return v
        raise KeyError(name)

    @property
    def columns(self) -> list[str]:
        return [f"{h:g}" for h in self.horizons_ms]

    def to_csv(self) -> str:
        lines = [f"# {k}={v}" for k, v in self.metadata.items()]
        lines.append(",".join(["model"] + self.columns))
        lines += [",".join([name] + [f"{v:.6f}" for v in vals]) for name, vals in self.rows]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8", newline="\n")

    @classmethod
    def read(cls, path) -> "ResultTable":
        meta, header, rows = {}, None, []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.startswith("# "):
                k, _, v = line[2:].partition("=")
                meta[k] = v
            elif header is None:
                header = line.split(",")
            elif line:
                cells = line.split(",")
                rows.append((cells[0], [float(c) for c in cells[1:]]))
        table = cls([float(h) for h in header[1:]], metadata=meta)
        for name, vals in rows:
            table.add(name, vals)
        return table

    def format(self) -> str:
        width = max([len("model")] + [len(n) for n, _ in self.rows])
        out = ["  ".join([f"{'model':<{width}}"] + [f"{c:>9}" for c in self.columns])]
        for name, vals in self.rows:
            out.append("  ".join([f"{name:<{width}}"] + [f"{v:9.2f}" for v in vals]))
        return "\n".join(out)
