"""Training objective, evaluation metric, Adam with step-decayed learning rate,
the mini-batch loop and an end-to-end gradient check."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .data import TrainWindow, stack_windows
from .linalg import NumericError, ShapeError, check_congruent, finite_diff_grad, flatten, unflatten
from .model import Model, ModelConfig, backward, forward

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    lr0: float = 5e-4
    decay: float = 0.96
    decay_every: int = 2
    seed: int = 0
    clip_norm: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.decay <= 1:
            raise ValueError("decay must be in (0, 1]")
        if self.decay_every < 1:
            raise ValueError("decay_every must be >= 1")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def _check_pair(pred, target):
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    K = pred.shape[-2]
    if K % 3:
        raise ShapeError(f"K={K} is not a multiple of 3")
    return pred, target


def mpjpe_train_loss(pred, target) -> float:
    """Sum of squared per-joint errors over all frames, divided by K * frames.

    Leading batch axes are averaged.
    """
    pred, target = _check_pair(pred, target)
    K, N = pred.shape[-2:]
    per_window = ((pred - target) ** 2).sum(axis=(-2, -1)) / (K * N)
    return float(np.mean(per_window))


def mpjpe_train_loss_grad(pred, target) -> np.ndarray:
    pred, target = _check_pair(pred, target)
    K, N = pred.shape[-2:]
    B = int(np.prod(pred.shape[:-2], dtype=np.int64))
    return 2.0 * (pred - target) / (K * N * B)


def mpjpe_eval(pred_future, target_future, horizon_frames: Sequence[int]) -> list[float]:
    """Mean unsquared joint distance at each horizon (1-based frame index).

    With leading batch axes the result is also averaged over windows.
    """
    pred, target = _check_pair(pred_future, target_future)
    T = pred.shape[-1]
    for h in horizon_frames:
        if not 1 <= h <= T:
            raise ValueError(f"horizon {h} frames outside 1..{T}")
    I = pred.shape[-2] // 3
    diff = (pred - target).reshape(pred.shape[:-2] + (I, 3, T))
    dist = np.sqrt((diff ** 2).sum(axis=-2))  # (..., I, T)
    per_frame = dist.mean(axis=-2)
    if per_frame.ndim > 1:
        per_frame = per_frame.reshape(-1, T).mean(axis=0)
    return [float(per_frame[h - 1]) for h in horizon_frames]


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return cfg.lr0 * cfg.decay ** (epoch // cfg.decay_every)


@dataclass
class OptState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params) -> "OptState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adam_update(params, grads, state: OptState, lr: float,
                beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """In-place bias-corrected Adam step on ``params`` and ``state``."""
    check_congruent(params, grads)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name} at optimizer step {state.step + 1}")
    state.step += 1
    c1 = 1.0 - beta1 ** state.step
    c2 = 1.0 - beta2 ** state.step
    for name, g in grads.items():
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def loss_and_grads(model: Model, X, target, rng=None):
    pred, cache = forward(model, X, rng=rng)
    loss = mpjpe_train_loss(pred, target)
    grads = backward(model, cache, mpjpe_train_loss_grad(pred, target))
    return loss, grads


@dataclass
class TrainResult:
    model: Model
    history: list[dict] = field(default_factory=list)  # epoch, mean_loss, lr


def train(windows: Sequence[TrainWindow], model_cfg: ModelConfig, tcfg: TrainConfig,
          model: Model | None = None) -> TrainResult:
    """Mini-batch Adam training; deterministic for a given seed."""
    if not windows:
        raise ValueError("need at least one training window")
    X_all, Y_all = stack_windows(windows)
    if X_all.shape[1:] != (model_cfg.K, model_cfg.M_J) or Y_all.shape[2] != model_cfg.M_J + model_cfg.T:
        raise ShapeError(f"windows of shape {X_all.shape[1:]} -> {Y_all.shape[1:]} do not fit model "
                         f"K={model_cfg.K}, M_J={model_cfg.M_J}, T={model_cfg.T}")
    if model is None:
        model = Model.init(model_cfg, seed=tcfg.seed)
    state = OptState.zeros_like(model.params)
    rng = np.random.default_rng([tcfg.seed, 1])
    drop_rng = rng if model_cfg.dropout_rate > 0 else None
    n = len(windows)
    result = TrainResult(model)
    for epoch in range(tcfg.epochs):
        lr = lr_at_epoch(tcfg, epoch)
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, tcfg.batch_size)):
            idx = order[start:start + tcfg.batch_size]
            pred, cache = forward(model, X_all[idx], rng=drop_rng)
            loss = mpjpe_train_loss(pred, Y_all[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}")
            grads = backward(model, cache, mpjpe_train_loss_grad(pred, Y_all[idx]))
            if tcfg.clip_norm is not None:
                norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
                if norm > tcfg.clip_norm:
                    grads = {k: g * (tcfg.clip_norm / norm) for k, g in grads.items()}
            try:
                adam_update(model.params, grads, state, lr)
            except NumericError as e:
                raise NumericError(f"epoch {epoch}, batch {b}: {e}") from None
            total += loss * len(idx)
        result.history.append({"epoch": epoch, "mean_loss": total / n, "lr": lr})
        log.info("epoch %d  loss %.6g  lr %.6g", epoch, total / n, lr)
    return result


def evaluate(model: Model, windows: Sequence[TrainWindow], horizon_frames: Sequence[int],
             batch_size: int = 256) -> list[float]:
    """Per-horizon mean joint error over all windows."""
    T = model.cfg.T
    sums = np.zeros(len(horizon_frames))
    for start in range(0, len(windows), batch_size):
        X, Y = stack_windows(windows[start:start + batch_size])
        pred = forward(model, X)[0]
        sums += np.array(mpjpe_eval(pred[..., -T:], Y[..., -T:], horizon_frames)) * len(X)
    return list(sums / len(windows))


def zero_velocity_eval(windows: Sequence[TrainWindow], horizon_frames: Sequence[int]) -> list[float]:
    X, Y = stack_windows(windows)
    T = Y.shape[-1] - X.shape[-1]
    pred = np.repeat(X[..., -1:], T, axis=-1)
    return mpjpe_eval(pred, Y[..., -T:], horizon_frames)


@dataclass
class GradCheckResult:
    max_rel_err: float
    per_group: dict[str, float]
    tol: float
    num_params: int

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def relative_error(a, n) -> np.ndarray:
    return np.abs(a - n) / np.maximum(1e-12, np.abs(a) + np.abs(n))


def grad_check(model: Model, window: TrainWindow, eps: float = 1e-5, tol: float = 1e-4) -> GradCheckResult:
    """Analytic gradient of the training loss against central differences."""
    X, Y = window.input[None], window.target[None]
    _, grads = loss_and_grads(model, X, Y)
    params = model.params

    def f(theta):
        trial = Model(model.cfg, unflatten(theta, params))
        return mpjpe_train_loss(forward(trial, X)[0], Y)

    numeric = unflatten(finite_diff_grad(f, flatten(params), eps), params)
    per_group = {name: float(relative_error(grads[name], numeric[name]).max()) for name in params}
    return GradCheckResult(max(per_group.values()), per_group, tol, model.num_params)
