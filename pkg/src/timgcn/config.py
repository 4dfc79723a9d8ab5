"""Run configuration: JSON loading, validation against the bundled schema plus
semantic checks, and turning the data section into train/test windows."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .data import (MotionSequence, SynthSpec, TrainWindow, center_root, check_horizons,
                   load_motion_csv, make_windows, ms_to_frames, synth_motion)
from .model import ModelConfig
from .tim import PRESETS, TimConfig, constant_kernel_config, embedding_dim
from .trainer import TrainConfig

ABLATION_VARIANTS = ("5-10 proportional", "5-10 constant", "5-10-15 proportional", "5-10-15 constant")

DEFAULTS = {
    "model": {"tim": "tim-5-10", "encoder": "tim", "per_coordinate_params": False, "hidden_dim": 64,
              "num_blocks": 4, "dropout_rate": 0.0, "zero_output_init": False},
    "train": {"epochs": 50, "batch_size": 16, "lr0": 5e-4, "decay": 0.96, "decay_every": 2,
              "seed": 0, "clip_norm": None},
    "data": {"test_fraction": 0.2, "stride": 1, "root_joint": None, "fps": None,
             "horizons_ms": [80, 160, 320, 400]},
    "ablate": {"variants": list(ABLATION_VARIANTS), "horizons_ms": [560, 1000]},
    "out": "runs/default",
}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


def schema() -> dict:
    return json.loads(resources.files("timgcn").joinpath("configs/run_config.schema.json").read_text())


def bundled_config(name: str) -> Path | None:
    p = resources.files("timgcn").joinpath(f"configs/{name}.json")
    return Path(str(p)) if p.is_file() else None


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def ablation_tim(variant: str) -> TimConfig:
    if variant not in ABLATION_VARIANTS:
        raise KeyError(f"unknown ablation variant {variant!r}; choose from {list(ABLATION_VARIANTS)}")
    lens, kind = variant.split()
    proportional = PRESETS["tim-" + lens]
    if kind == "proportional":
        return proportional
    return constant_kernel_config([int(m) for m in lens.split("-")], embedding_dim(proportional))


def _tim_from(spec) -> TimConfig:
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise KeyError(f"unknown TIM preset {spec!r}; choose from {sorted(PRESETS)}")
        return PRESETS[spec]
    return TimConfig.from_dict(spec)


def _csv_fps(path: Path) -> float | None:
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
    except OSError:
        return None
    try:
        return float(first.split("=", 1)[1])
    except (IndexError, ValueError):
        return None


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists() and bundled_config(str(path)) is not None:
            path = bundled_config(str(path))
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError([f"{path}: not valid JSON ({e})"]) from None
        return cls.from_dict(d, path.parent)

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "RunConfig":
        errors = [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}"
                  for e in jsonschema.Draft202012Validator(schema()).iter_errors(d)]
        if errors:
            raise ConfigError(errors)
        raw = copy.deepcopy(DEFAULTS)
        for section, value in d.items():
            if isinstance(value, dict):
                raw[section].update(copy.deepcopy(value))
            else:
                raw[section] = value
        run = cls(raw, Path(base_dir))
        run.validate()
        return run

    @property
    def model(self) -> dict:
        return self.raw["model"]

    @property
    def data(self) -> dict:
        return self.raw["data"]

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.raw["train"])

    @property
    def out(self) -> Path:
        # relative to the working directory, unlike data paths
        return Path(self.raw["out"])

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def config_hash(self) -> str:
        return digest(self.raw)

    def tim_config(self) -> TimConfig:
        return _tim_from(self.model["tim"])

    @property
    def M_J(self) -> int:
        if self.model["encoder"] == "tim":
            return self.tim_config().M_J
        return int(self.data["M_J"])

    @property
    def T(self) -> int:
        return int(self.data["T"])

    def synth_spec(self) -> SynthSpec | None:
        s = self.data.get("synth")
        return None if s is None else SynthSpec.from_dict(s)

    def fps(self) -> float | None:
        if self.data.get("fps"):
            return float(self.data["fps"])
        if self.data.get("synth") is not None:
            return float(self.data["synth"]["fps"])
        if self.data.get("train_csv"):
            return _csv_fps(self.resolve(self.data["train_csv"][0]))
        return None

    def horizon_frames(self, horizons_ms=None) -> list[int]:
        fps = self.fps()
        return [ms_to_frames(h, fps) for h in (horizons_ms or self.data["horizons_ms"])]

    def model_config(self, K: int, tim: TimConfig | None = None) -> ModelConfig:
        m = self.model
        if m["encoder"] == "dct":
            tim, dct_frames = None, self.M_J
        else:
            tim, dct_frames = tim or self.tim_config(), None
        return ModelConfig(K=K, T=self.T, tim=tim, encoder=m["encoder"], dct_frames=dct_frames,
                           per_coordinate_params=m["per_coordinate_params"], hidden_dim=m["hidden_dim"],
                           num_blocks=m["num_blocks"], dropout_rate=m["dropout_rate"],
                           zero_output_init=m["zero_output_init"])

    def validate(self) -> None:
        errors = []
        m, d, a = self.model, self.data, self.raw["ablate"]
        tim = None
        if m["encoder"] == "tim":
            try:
                tim = _tim_from(m["tim"])
            except (KeyError, ValueError) as e:
                errors.append(f"model/tim: {e.args[0]}")
            if tim is not None and d.get("M_J") is not None and d["M_J"] != tim.M_J:
                errors.append(f"data/M_J: {d['M_J']} disagrees with the TIM's longest subsequence {tim.M_J}")
        elif d.get("M_J") is None:
            errors.append("data/M_J: required with the dct encoder")
        has_synth, has_csv = d.get("synth") is not None, bool(d.get("train_csv"))
        if has_synth == has_csv:
            errors.append("data: give exactly one of 'synth' or 'train_csv'")
        if has_synth:
            try:
                SynthSpec.from_dict(d["synth"])
            except (KeyError, TypeError, ValueError) as e:
                errors.append(f"data/synth: {e}")
        try:
            check_horizons(d["horizons_ms"])
        except ValueError as e:
            errors.append(f"data/horizons_ms: {e}")
        fps = None
        try:
            fps = self.fps()
        except (KeyError, TypeError, ValueError):
            pass
        if fps:
            for section, hs in (("data/horizons_ms", d["horizons_ms"]), ("ablate/horizons_ms", a["horizons_ms"])):
                for h in hs:
                    if ms_to_frames(h, fps) > d["T"]:
                        errors.append(f"{section}: {h} ms is {ms_to_frames(h, fps)} frames at {fps} fps, "
                                      f"beyond T={d['T']}")
        try:
            check_horizons(a["horizons_ms"])
        except ValueError as e:
            errors.append(f"ablate/horizons_ms: {e}")
        for v in a["variants"]:
            if v not in ABLATION_VARIANTS:
                errors.append(f"ablate/variants: unknown variant {v!r}; choose from {list(ABLATION_VARIANTS)}")
        if len(a["variants"]) < 2:
            errors.append("ablate/variants: need at least 2 variants")
        if errors:
            raise ConfigError(errors)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


@dataclass
class DataBundle:
    train: list[TrainWindow]
    test: list[TrainWindow]
    fps: float
    K: int
    joint_names: list[str] | None = None

    def digest(self) -> str:
        h = hashlib.sha256()
        for split in (self.train, self.test):
            h.update(len(split).to_bytes(8, "little"))
            for w in split:
                h.update(np.ascontiguousarray(w.target).tobytes())
        return h.hexdigest()[:16]


def load_sequences(run: RunConfig) -> tuple[list[MotionSequence], list[MotionSequence]]:
    """Train and test sequences; without explicit test files each sequence is
    split in time, the last ``test_fraction`` of frames going to test."""
    d = run.data
    if d.get("synth") is not None:
        seqs, tests = [synth_motion(run.synth_spec())], None
    else:
        seqs = [load_motion_csv(run.resolve(p)) for p in d["train_csv"]]
        tests = [load_motion_csv(run.resolve(p)) for p in d["test_csv"]] if d.get("test_csv") else None
    if d.get("root_joint") is not None:
        seqs = [center_root(s, d["root_joint"]) for s in seqs]
        tests = tests and [center_root(s, d["root_joint"]) for s in tests]
    if tests is None:
        train, tests = [], []
        for s in seqs:
            cut = int(round(s.frames * (1.0 - d["test_fraction"])))
            train.append(MotionSequence(s.values[:cut], s.fps, s.joint_names))
            tests.append(MotionSequence(s.values[cut:], s.fps, s.joint_names))
        seqs = train
    return seqs, tests


def prepare_data(run: RunConfig, M_J: int | None = None) -> DataBundle:
    M_J = M_J or run.M_J
    train_seqs, test_seqs = load_sequences(run)
    Ks = {s.K for s in train_seqs + test_seqs}
    if len(Ks) != 1:
        raise ConfigError([f"data: sequences disagree on K ({sorted(Ks)})"])
    fps = run.fps() or train_seqs[0].fps

    def windows(seqs, what):
        out = []
        for s in seqs:
            if s.frames >= M_J + run.T:
                out += make_windows(s, M_J, run.T, run.data["stride"])
        if not out:
            raise ConfigError([f"data: no {what} sequence has the {M_J + run.T} frames one window needs"])
        return out

    return DataBundle(windows(train_seqs, "training"), windows(test_seqs, "test"), fps, Ks.pop(),
                      train_seqs[0].joint_names)
