import numpy as np

from timgcn.data import TrainWindow
from timgcn.tim import BranchSpec, TimConfig


def random_tim_config(rng, max_len=12, max_branches=3, max_entries=3, max_n=4) -> TimConfig:
    branches = []
    for _ in range(int(rng.integers(1, max_branches + 1))):
        m = int(rng.integers(1, max_len + 1))
        kernels = [(int(rng.integers(1, max_n + 1)), int(rng.integers(1, m + 1)))
                   for _ in range(int(rng.integers(1, max_entries + 1)))]
        branches.append(BranchSpec(m, tuple(kernels)))
    return TimConfig(tuple(branches))


def random_window(rng, K, M_J, T, scale=1.0) -> TrainWindow:
    target = rng.normal(scale=scale, size=(K, M_J + T))
    return TrainWindow(target[:, :M_J].copy(), target)


def rel_err(a, n):
    a, n = np.asarray(a), np.asarray(n)
    return float(np.max(np.abs(a - n) / np.maximum(1e-12, np.abs(a) + np.abs(n))))


def perturbed(params, name, flat_theta):
    """Copy of ``params`` with entry ``name`` replaced by ``flat_theta``."""
    out = dict(params)
    out[name] = np.asarray(flat_theta).reshape(params[name].shape)
    return out

