"""End-to-end predictor: encoder (TIM or fixed DCT) -> GCN -> + last observed frame."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import dct_matrix
from .gcn import GcnConfig, gcn_backward, gcn_forward, init_gcn_params
from .tim import PRESETS, TimConfig, embedding_dim, init_tim_params, tim_backward, tim_forward_all


@dataclass(frozen=True)
class ModelConfig:
    K: int
    T: int
    tim: TimConfig | None = field(default_factory=lambda: PRESETS["tim-5-10"])
    encoder: str = "tim"  # "tim" or "dct"
    dct_frames: int | None = None  # observed frames for the DCT encoder
    per_coordinate_params: bool = False
    hidden_dim: int = 64
    num_blocks: int = 4
    dropout_rate: float = 0.0
    zero_output_init: bool = False

    def __post_init__(self):
        if self.encoder not in ("tim", "dct"):
            raise ValueError(f"unknown encoder {self.encoder!r}")
        if self.encoder == "tim" and self.tim is None:
            raise ValueError("TIM encoder needs a TimConfig")
        if self.encoder == "dct" and not self.dct_frames:
            raise ValueError("DCT encoder needs dct_frames")
        if self.K < 1 or self.T < 1:
            raise ValueError("K and T must be >= 1")

    @property
    def M_J(self) -> int:
        return self.tim.M_J if self.encoder == "tim" else int(self.dct_frames)

    @property
    def embedding_dim(self) -> int:
        return embedding_dim(self.tim) if self.encoder == "tim" else self.M_J

    @property
    def gcn(self) -> GcnConfig:
        return GcnConfig(K=self.K, input_dim=self.embedding_dim, output_dim=self.M_J + self.T,
                         hidden_dim=self.hidden_dim, num_blocks=self.num_blocks,
                         dropout_rate=self.dropout_rate)

    def to_dict(self) -> dict:
        return {"K": self.K, "T": self.T, "encoder": self.encoder,
                "tim": None if self.tim is None else self.tim.to_dict(),
                "dct_frames": self.dct_frames,
                "per_coordinate_params": self.per_coordinate_params,
                "hidden_dim": self.hidden_dim, "num_blocks": self.num_blocks,
                "dropout_rate": self.dropout_rate, "zero_output_init": self.zero_output_init}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if d.get("tim") is not None:
            d["tim"] = TimConfig.from_dict(d["tim"])
        return cls(**d)


@dataclass
class Model:
    cfg: ModelConfig
    params: dict[str, np.ndarray]

    @classmethod
    def init(cls, cfg: ModelConfig, seed: int = 0) -> "Model":
        rng = np.random.default_rng(seed)
        params = {}
        if cfg.encoder == "tim":
            params.update(init_tim_params(cfg.tim, rng, cfg.K if cfg.per_coordinate_params else None))
        params.update(init_gcn_params(cfg.gcn, rng, zero_output=cfg.zero_output_init))
        return cls(cfg, params)

    @property
    def num_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))


def encode(model: Model, X):
    cfg = model.cfg
    if cfg.encoder == "tim":
        return tim_forward_all(X, cfg.tim, model.params)
    return np.asarray(X, dtype=np.float64) @ dct_matrix(cfg.M_J).T, None


def forward(model: Model, X, rng: np.random.Generator | None = None):
    """Prediction over frames -M_J..T-1 for ``X`` of shape ``(..., K, M_J)``, plus cache."""
    X = np.asarray(X, dtype=np.float64)
    E, enc_cache = encode(model, X)
    residual, gcn_cache = gcn_forward(E, model.cfg.gcn, model.params, rng=rng)
    pred = residual + X[..., -1:]
    return pred, (enc_cache, gcn_cache)


def predict(X_past, model: Model) -> np.ndarray:
    return forward(model, X_past)[0]


def backward(model: Model, cache, grad_pred) -> dict[str, np.ndarray]:
    """Parameter gradients in parameter order given dL/dprediction."""
    enc_cache, gcn_cache = cache
    g_gcn, dE = gcn_backward(gcn_cache, grad_pred, model.params)
    grads = {}
    if model.cfg.encoder == "tim":
        g_tim, _ = tim_backward(enc_cache, dE, model.params)
        grads.update(g_tim)
    grads.update(g_gcn)
    return {name: grads[name] for name in model.params}
