"""Temporal Inception Module.

Each joint-coordinate trajectory (oldest frame first) is cut into suffix
subsequences, one per branch. Every branch runs several banks of valid 1D
convolutions over its subsequence, and all outputs are concatenated into the
embedding row for that coordinate.

Parameters live in an ordered dict. For branch ``j`` and kernel entry ``l``
the weights are ``tim.{j}.{l}.w`` with shape ``(n, s)`` (or ``(K, n, s)`` when
kernels are not shared across coordinates) and biases ``tim.{j}.{l}.b`` with
shape ``(n,)`` (or ``(K, n)``).

Embedding layout: branches in listed order, then kernel entries in listed
order, then kernel instance, then output position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .linalg import ShapeError, as_vector, conv1d_valid


@dataclass(frozen=True)
class BranchSpec:
    subseq_len: int
    kernels: tuple[tuple[int, int], ...]  # (num_kernels, kernel_size)

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple((int(n), int(s)) for n, s in self.kernels))
        if self.subseq_len < 1:
            raise ValueError(f"subsequence length must be >= 1, got {self.subseq_len}")
        if not self.kernels:
            raise ValueError("a branch needs at least one kernel entry")
        for n, s in self.kernels:
            if n < 1:
                raise ValueError(f"kernel count must be >= 1, got {n}")
            if not 1 <= s <= self.subseq_len:
                raise ValueError(f"kernel size {s} invalid for subsequence length {self.subseq_len}")

    @property
    def out_dim(self) -> int:
        return sum(n * (self.subseq_len - s + 1) for n, s in self.kernels)


@dataclass(frozen=True)
class TimConfig:
    branches: tuple[BranchSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if not self.branches:
            raise ValueError("TimConfig needs at least one branch")

    @property
    def M_J(self) -> int:
        return max(b.subseq_len for b in self.branches)

    def to_dict(self) -> dict:
        return {"branches": [{"subseq_len": b.subseq_len, "kernels": [list(k) for k in b.kernels]}
                             for b in self.branches]}

    @classmethod
    def from_dict(cls, d: dict) -> "TimConfig":
        return cls(tuple(BranchSpec(int(b["subseq_len"]), tuple(tuple(k) for k in b["kernels"]))
                         for b in d["branches"]))


def _cfg(*rows) -> TimConfig:
    return TimConfig(tuple(BranchSpec(m, tuple(k)) for m, k in rows))


# Two-branch base architecture; the 15-frame branch extends the proportional sizing rule.
PRESETS: dict[str, TimConfig] = {
    "tim-5-10": _cfg((5, [(12, 2), (9, 3)]),
                     (10, [(9, 3), (7, 5), (6, 7)]),
                     (10, [(1, 1)])),
    "tim-5-10-15": _cfg((5, [(12, 2), (9, 3)]),
                        (10, [(9, 3), (7, 5), (6, 7)]),
                        (10, [(1, 1)]),
                        (15, [(9, 4), (7, 7), (6, 10)])),
    "tim-toy": _cfg((5, [(2, 2)]),
                    (10, [(2, 3)]),
                    (10, [(1, 1)])),
}


def embedding_dim(cfg: TimConfig) -> int:
    return sum(b.out_dim for b in cfg.branches)


def constant_kernel_config(subseq_lens, target_dim: int, pass_through: bool = True,
                           n_small: int = 12, max_n: int = 64) -> TimConfig:
    """Branches using kernel sizes 2 and 3 only.

    Every branch gets ``n_small`` size-2 kernels and a common number of size-3
    kernels, chosen so the embedding size lands as close to ``target_dim`` as
    possible. A size-1 pass-through is appended on the longest subsequence.
    """
    lens = sorted(set(int(m) for m in subseq_lens))
    if lens[0] < 3:
        raise ValueError("constant kernel sizes 2 and 3 need subsequences of length >= 3")

    def build(n3):
        rows = [BranchSpec(m, ((n_small, 2), (n3, 3))) for m in lens]
        if pass_through:
            rows.append(BranchSpec(lens[-1], ((1, 1),)))
        return TimConfig(tuple(rows))

    best = min(range(1, max_n + 1), key=lambda n3: (abs(embedding_dim(build(n3)) - target_dim), n3))
    return build(best)


def sample_subsequences(x, cfg: TimConfig) -> list[np.ndarray]:
    """Most recent ``subseq_len`` frames of ``x`` for each branch (last axis is time)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != cfg.M_J:
        raise ShapeError(f"input has {x.shape[-1]} frames, TIM expects {cfg.M_J}")
    return [x[..., x.shape[-1] - b.subseq_len:] for b in cfg.branches]


def param_names(cfg: TimConfig) -> list[tuple[str, str]]:
    return [(f"tim.{j}.{l}.w", f"tim.{j}.{l}.b")
            for j, b in enumerate(cfg.branches) for l in range(len(b.kernels))]


def init_tim_params(cfg: TimConfig, rng: np.random.Generator, K: int | None = None) -> dict[str, np.ndarray]:
    """Uniform(+-1/sqrt(s)) kernels, zero biases, size-1 kernels start at 1.0.

    Pass ``K`` to get separate kernels per joint coordinate.
    """
    lead = () if K is None else (K,)
    params = {}
    for (wn, bn), (n, s) in zip(param_names(cfg), [k for b in cfg.branches for k in b.kernels]):
        if s == 1:
            w = np.ones(lead + (n, s))
        else:
            bound = 1.0 / np.sqrt(s)
            w = rng.uniform(-bound, bound, size=lead + (n, s))
        params[wn] = w
        params[bn] = np.zeros(lead + (n,))
    return params


def tim_branch_forward(x_j, branch: BranchSpec, weights, biases) -> np.ndarray:
    """Reference single-trajectory branch: concatenated conv outputs.

    ``weights``/``biases`` are the per-entry ``(n, s)`` / ``(n,)`` arrays of the branch.
    """
    x_j = as_vector(x_j)
    if x_j.size != branch.subseq_len:
        raise ShapeError(f"branch expects {branch.subseq_len} frames, got {x_j.size}")
    parts = []
    for (n, s), w, b in zip(branch.kernels, weights, biases):
        w = np.asarray(w)
        if w.shape != (n, s):
            raise ShapeError(f"kernel bank shape {w.shape} != {(n, s)}")
        parts.extend(conv1d_valid(x_j, w[i], b[i]) for i in range(n))
    return np.concatenate(parts)


def tim_forward(x, cfg: TimConfig, params, row: int | None = None) -> np.ndarray:
    """Embedding of one trajectory, built branch by branch from ``conv1d_valid``.

    ``row`` selects the coordinate when kernels are per-coordinate.
    """
    x = as_vector(x)
    names = iter(param_names(cfg))
    out = []
    for branch, x_j in zip(cfg.branches, sample_subsequences(x, cfg)):
        ws, bs = [], []
        for _ in branch.kernels:
            wn, bn = next(names)
            w, b = params[wn], params[bn]
            if w.ndim == 3:
                w, b = w[row], b[row]
            ws.append(w)
            bs.append(b)
        out.append(tim_branch_forward(x_j, branch, ws, bs))
    return np.concatenate(out)


def tim_forward_all(X, cfg: TimConfig, params):
    """Vectorized embedding for ``X`` of shape ``(..., K, M_J)``.

    Returns ``(E, cache)`` with ``E`` of shape ``(..., K, D_E)``.
    """
    X = np.asarray(X, dtype=np.float64)
    K = X.shape[-2]
    parts, cache = [], []
    names = iter(param_names(cfg))
    for branch, x_j in zip(cfg.branches, sample_subsequences(X, cfg)):
        for n, s in branch.kernels:
            wn, bn = next(names)
            w, b = params[wn], params[bn]
            win = sliding_window_view(x_j, s, axis=-1)  # (..., K, L, s)
            if w.ndim == 2:
                y = np.einsum("...kls,ns->...knl", win, w) + b[:, None]
            else:
                if w.shape[0] != K:
                    raise ShapeError(f"per-coordinate kernels for K={w.shape[0]}, input has K={K}")
                y = np.einsum("...kls,kns->...knl", win, w) + b[..., None]
            parts.append(y.reshape(y.shape[:-2] + (-1,)))
            cache.append((wn, bn, branch.subseq_len, n, s, win))
    E = np.concatenate(parts, axis=-1)
    return E, (X.shape, cache)


def tim_backward(cache, grad_E, params, need_input_grad: bool = False):
    """Gradients of the TIM parameters (and optionally the input) given dL/dE."""
    x_shape, entries = cache
    grads = {}
    dX = np.zeros(x_shape) if need_input_grad else None
    offset = 0
    for wn, bn, m, n, s, win in entries:
        L = m - s + 1
        g = grad_E[..., offset:offset + n * L]
        g = g.reshape(g.shape[:-1] + (n, L))  # (..., K, n, L)
        offset += n * L
        w = params[wn]
        gb = g.reshape((-1,) + g.shape[-3:])
        wb = win.reshape((-1,) + win.shape[-3:])
        if w.ndim == 2:
            grads[wn] = np.einsum("bknl,bkls->ns", gb, wb)
            grads[bn] = gb.sum(axis=(0, 1, 3))
        else:
            grads[wn] = np.einsum("bknl,bkls->kns", gb, wb)
            grads[bn] = gb.sum(axis=(0, 3))
        if need_input_grad:
            if w.ndim == 2:
                dwin = np.einsum("...knl,ns->...kls", g, w)
            else:
                dwin = np.einsum("...knl,kns->...kls", g, w)
            start = x_shape[-1] - m
            for u in range(s):
                dX[..., start + u:start + u + L] += dwin[..., u]
    # keep parameter order
    ordered = {}
    for wn, bn in (e[:2] for e in entries):
        ordered[wn] = grads[wn]
        ordered[bn] = grads[bn]
    return ordered, dX
