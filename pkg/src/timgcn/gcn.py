"""Graph convolution over K fully connected joint-coordinate nodes.

Every layer computes ``A @ H @ W`` with its own learnable adjacency ``A``
(K x K) and weights ``W``, optionally followed by tanh. The stack is an
activated input layer, ``num_blocks`` residual blocks of two activated layers
each, and a linear output layer producing the residual motion.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .linalg import ShapeError, activation, activation_backward


@dataclass(frozen=True)
class GcnConfig:
    K: int
    input_dim: int
    output_dim: int
    hidden_dim: int = 64
    num_blocks: int = 4
    dropout_rate: float = 0.0

    def __post_init__(self):
        for field in ("K", "input_dim", "output_dim", "hidden_dim", "num_blocks"):
            if getattr(self, field) < 1:
                raise ValueError(f"GcnConfig.{field} must be >= 1, got {getattr(self, field)}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    def to_dict(self) -> dict:
        return asdict(self)


def layer_names(cfg: GcnConfig) -> list[str]:
    names = ["gcn.in"]
    for b in range(cfg.num_blocks):
        names += [f"gcn.block{b}.0", f"gcn.block{b}.1"]
    return names + ["gcn.out"]


def _layer_dims(cfg: GcnConfig) -> list[tuple[int, int]]:
    h = cfg.hidden_dim
    return [(cfg.input_dim, h)] + [(h, h)] * (2 * cfg.num_blocks) + [(h, cfg.output_dim)]


def init_gcn_params(cfg: GcnConfig, rng: np.random.Generator, zero_output: bool = False) -> dict[str, np.ndarray]:
    """Adjacency near identity, weights uniform(+-1/sqrt(F_in)).

    ``zero_output`` zeroes the output layer's weights so the network starts
    by predicting no residual motion at all.
    """
    params = {}
    for name, (f_in, f_out) in zip(layer_names(cfg), _layer_dims(cfg)):
        params[f"{name}.A"] = np.eye(cfg.K) + rng.uniform(-0.01, 0.01, size=(cfg.K, cfg.K))
        bound = 1.0 / np.sqrt(f_in)
        params[f"{name}.W"] = rng.uniform(-bound, bound, size=(f_in, f_out))
    if zero_output:
        params["gcn.out.W"][:] = 0.0
    return params


def gcn_layer(H, A, W, apply_activation: bool) -> np.ndarray:
    """``A @ H @ W`` (then tanh), broadcasting over leading batch axes of ``H``."""
    H = np.asarray(H, dtype=np.float64)
    K = A.shape[0]
    if A.shape != (K, K) or H.shape[-2] != K or H.shape[-1] != W.shape[0]:
        raise ShapeError(f"layer shapes do not conform: A {A.shape}, H {H.shape}, W {W.shape}")
    out = A @ H @ W
    return activation(out) if apply_activation else out


def gcn_layer_backward(H, A, W, out, grad_out, apply_activation: bool):
    """Return (dH, dA, dW); gradients of A and W are summed over batch axes."""
    g = activation_backward(out, grad_out) if apply_activation else grad_out
    K = A.shape[0]
    AH = A @ H
    dW = AH.reshape(-1, AH.shape[-1]).T @ g.reshape(-1, g.shape[-1])
    dAH = g @ W.T
    dA = np.einsum("bkf,bjf->kj", dAH.reshape(-1, K, dAH.shape[-1]), H.reshape(-1, K, H.shape[-1]))
    dH = A.T @ dAH
    return dH, dA, dW


def gcn_forward(E, cfg: GcnConfig, params, rng: np.random.Generator | None = None):
    """Residual motion of shape ``(..., K, output_dim)`` and a cache for backward.

    Dropout is applied after activated layers only when ``rng`` is given and
    the configured rate is positive.
    """
    E = np.asarray(E, dtype=np.float64)
    if E.shape[-2:] != (cfg.K, cfg.input_dim):
        raise ShapeError(f"embedding shape {E.shape[-2:]} != {(cfg.K, cfg.input_dim)}")
    drop = cfg.dropout_rate if rng is not None else 0.0
    tape = []

    def layer(name, H, act):
        A, W = params[f"{name}.A"], params[f"{name}.W"]
        out = gcn_layer(H, A, W, act)
        mask = None
        if act and drop > 0.0:
            mask = (rng.random(out.shape) >= drop) / (1.0 - drop)
        tape.append((name, H, out, act, mask))
        return out if mask is None else out * mask

    H = layer("gcn.in", E, True)
    for b in range(cfg.num_blocks):
        y = layer(f"gcn.block{b}.0", H, True)
        y = layer(f"gcn.block{b}.1", y, True)
        H = H + y
    out = layer("gcn.out", H, False)
    return out, (cfg, tape)


def gcn_backward(cache, grad_out, params):
    """Parameter gradients (in parameter order) and dL/dE."""
    cfg, tape = cache
    grads = {}
    records = {name: (H, out, act, mask) for name, H, out, act, mask in tape}

    def back(name, g):
        H, out, act, mask = records[name]
        if mask is not None:
            g = g * mask
        dH, dA, dW = gcn_layer_backward(H, params[f"{name}.A"], params[f"{name}.W"], out, g, act)
        grads[f"{name}.A"], grads[f"{name}.W"] = dA, dW
        return dH

    g = back("gcn.out", grad_out)
    for b in reversed(range(cfg.num_blocks)):
        gy = back(f"gcn.block{b}.1", g)
        gy = back(f"gcn.block{b}.0", gy)
        g = g + gy
    dE = back("gcn.in", g)
    ordered = {}
    for name in layer_names(cfg):
        ordered[f"{name}.A"] = grads[f"{name}.A"]
        ordered[f"{name}.W"] = grads[f"{name}.W"]
    return ordered, dE
