"""Motion sequences: CSV ingestion, root centering, windowing, horizon mapping,
seeded synthetic motion and the orthonormal DCT used by the baseline encoder.

Coordinates are stored frames x K with K = 3 * joints, columns ordered
``joint0_x, joint0_y, joint0_z, joint1_x, ...``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_HORIZONS_MS = (80, 160, 320, 400, 560, 1000)

_COLUMN_RE = re.compile(r"^(?P<joint>.+)_(?P<axis>[xyz])$")


class MotionParseError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.path, self.line = path, line


@dataclass
class MotionSequence:
    values: np.ndarray  # frames x K
    fps: float
    joint_names: list[str] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"values must be frames x K, got shape {self.values.shape}")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("motion values must be finite")
        if self.joint_names is not None and 3 * len(self.joint_names) != self.K:
            raise ValueError(f"{len(self.joint_names)} joint names but K={self.K}")

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]

    def column_names(self) -> list[str]:
        names = self.joint_names
        if names is None:
            if self.K % 3:
                return [f"c{k}" for k in range(self.K)]
            names = [f"j{i}" for i in range(self.K // 3)]
        return [f"{j}_{a}" for j in names for a in "xyz"]


@dataclass
class TrainWindow:
    input: np.ndarray   # K x M_J, frames -M_J..-1
    target: np.ndarray  # K x (M_J + T), frames -M_J..T-1

    @property
    def M_J(self) -> int:
        return self.input.shape[1]

    @property
    def T(self) -> int:
        return self.target.shape[1] - self.input.shape[1]


def save_motion_csv(seq: MotionSequence, path) -> None:
    lines = [f"# fps={seq.fps!r}", ",".join(seq.column_names())]
    lines += [",".join(repr(float(v)) for v in row) for row in seq.values]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_motion_csv(path) -> MotionSequence:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise MotionParseError(path, 1, "missing '# fps=<value>' line")
    m = re.match(r"#\s*fps\s*=\s*(\S+)\s*$", lines[0])
    if not m:
        raise MotionParseError(path, 1, f"cannot read fps from {lines[0]!r}")
    try:
        fps = float(m.group(1))
    except ValueError:
        raise MotionParseError(path, 1, f"fps {m.group(1)!r} is not a number") from None
    if len(lines) < 2:
        raise MotionParseError(path, 2, "missing column header")
    columns = [c.strip() for c in lines[1].split(",")]
    K = len(columns)
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != K:
            raise MotionParseError(path, lineno, f"row has {len(cells)} values, header has {K}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as e:
            raise MotionParseError(path, lineno, f"non-numeric cell ({e})") from None
    values = np.array(rows, dtype=np.float64).reshape(len(rows), K)
    if not np.all(np.isfinite(values)):
        raise MotionParseError(path, 3, "non-finite value in data")
    return MotionSequence(values, fps, _joint_names(columns))


def _joint_names(columns: Sequence[str]) -> list[str] | None:
    if len(columns) % 3:
        return None
    names = []
    for i in range(0, len(columns), 3):
        parts = [_COLUMN_RE.match(c) for c in columns[i:i + 3]]
        if not all(parts):
            return None
        joints = {p.group("joint") for p in parts}
        if len(joints) != 1 or [p.group("axis") for p in parts] != ["x", "y", "z"]:
            return None
        names.append(joints.pop())
    return names


def center_root(seq: MotionSequence, root_joint: int) -> MotionSequence:
    """Subtract the root joint's position from every joint, frame by frame."""
    n_joints = seq.K // 3
    if seq.K % 3 or not 0 <= root_joint < n_joints:
        raise IndexError(f"root joint {root_joint} out of range for {n_joints} joints")
    v = seq.values.reshape(seq.frames, n_joints, 3)
    centered = v - v[:, root_joint:root_joint + 1, :]
    return MotionSequence(centered.reshape(seq.frames, seq.K), seq.fps, seq.joint_names)


def make_windows(seq: MotionSequence, M_J: int, T: int, stride: int = 1) -> list[TrainWindow]:
    need = M_J + T
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if seq.frames < need:
        raise ValueError(f"sequence has {seq.frames} frames, needs at least {need} (M_J + T)")
    out = []
    for o in range(0, seq.frames - need + 1, stride):
        chunk = seq.values[o:o + need].T.copy()
        out.append(TrainWindow(chunk[:, :M_J].copy(), chunk))
    return out


def trim_window(w: TrainWindow, M_J: int) -> TrainWindow:
    """Drop the oldest observed frames so only ``M_J`` remain; the future is untouched."""
    if M_J > w.M_J:
        raise ValueError(f"cannot trim a {w.M_J}-frame window to {M_J} frames")
    cut = w.M_J - M_J
    return TrainWindow(w.input[:, cut:].copy(), w.target[:, cut:].copy())


def stack_windows(windows: Sequence[TrainWindow]) -> tuple[np.ndarray, np.ndarray]:
    return (np.stack([w.input for w in windows]), np.stack([w.target for w in windows]))


def ms_to_frames(ms: float, fps: float) -> int:
    if ms <= 0:
        raise ValueError("horizon must be positive")
    return max(1, int(math.floor(ms * fps / 1000.0 + 0.5)))


def check_horizons(horizons_ms: Sequence[float]) -> tuple[float, ...]:
    h = tuple(horizons_ms)
    if not h or any(x <= 0 for x in h) or any(b <= a for a, b in zip(h, h[1:])):
        raise ValueError(f"horizons must be positive and strictly increasing, got {list(h)}")
    return h


@dataclass
class SynthSpec:
    joints: int
    fps: float
    duration: float  # seconds
    components: list[list[tuple[float, float, float]]]  # per coordinate: (amplitude, freq Hz, phase)
    noise_std: float = 0.0
    seed: int = 0
    joint_names: list[str] | None = field(default=None)

    def __post_init__(self):
        if len(self.components) != 3 * self.joints:
            raise ValueError(f"need {3 * self.joints} component lists, got {len(self.components)}")
        for comps in self.components:
            for _, f, _ in comps:
                if not 0 <= f < self.fps / 2:
                    raise ValueError(f"frequency {f} Hz is not below Nyquist ({self.fps / 2} Hz)")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    @property
    def frames(self) -> int:
        return int(round(self.duration * self.fps))

    @classmethod
    def random(cls, joints: int, fps: float, duration: float, n_components: int = 2,
               amplitude=(20.0, 100.0), frequency=(0.2, 1.5), noise_std: float = 0.0,
               seed: int = 0) -> "SynthSpec":
        """Spec with amplitudes, frequencies and phases drawn from ``seed``."""
        rng = np.random.default_rng(seed)
        comps = [[(float(rng.uniform(*amplitude)), float(rng.uniform(*frequency)),
                   float(rng.uniform(0, 2 * np.pi))) for _ in range(n_components)]
                 for _ in range(3 * joints)]
        return cls(joints, fps, duration, comps, noise_std, seed)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        if "components" in d:
            return cls(int(d["joints"]), float(d["fps"]), float(d["duration"]),
                       [[tuple(map(float, c)) for c in comps] for comps in d["components"]],
                       float(d.get("noise_std", 0.0)), int(d.get("seed", 0)), d.get("joint_names"))
        kw = {k: d[k] for k in ("n_components", "noise_std", "seed") if k in d}
        for k in ("amplitude", "frequency"):
            if k in d:
                kw[k] = tuple(d[k])
        return cls.random(int(d["joints"]), float(d["fps"]), float(d["duration"]), **kw)

    def to_dict(self) -> dict:
        return {"joints": self.joints, "fps": self.fps, "duration": self.duration,
                "components": [[list(c) for c in comps] for comps in self.components],
                "noise_std": self.noise_std, "seed": self.seed, "joint_names": self.joint_names}


def synth_motion(spec: SynthSpec) -> MotionSequence:
    t = np.arange(spec.frames) / spec.fps
    values = np.zeros((spec.frames, 3 * spec.joints))
    for k, comps in enumerate(spec.components):
        for amp, freq, phase in comps:
            values[:, k] += amp * np.sin(2 * np.pi * freq * t + phase)
    if spec.noise_std > 0:
        values += np.random.default_rng(spec.seed).normal(0.0, spec.noise_std, size=values.shape)
    return MotionSequence(values, spec.fps, spec.joint_names)


def dct_matrix(N: int) -> np.ndarray:
    """Orthonormal DCT-II basis, rows are frequencies."""
    if N < 1:
        raise ValueError("N must be >= 1")
    n = np.arange(N)
    D = np.cos(np.pi * (n[None, :] + 0.5) * n[:, None] / N) * np.sqrt(2.0 / N)
    D[0] /= np.sqrt(2.0)
    return D


def dct2(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return dct_matrix(x.shape[-1]) @ x if x.ndim == 1 else x @ dct_matrix(x.shape[-1]).T


def idct(c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    return dct_matrix(c.shape[-1]).T @ c if c.ndim == 1 else c @ dct_matrix(c.shape[-1])
