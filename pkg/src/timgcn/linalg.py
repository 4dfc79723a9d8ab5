"""Dense numeric core: matrix product, valid 1D convolution and tanh, each
paired with its backward rule, plus a central-difference gradient oracle.

Matrices and vectors are plain float64 numpy arrays. Gradient bundles are
ordered ``dict[str, np.ndarray]`` keyed like the parameter dict they belong to.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np


class ShapeError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


def as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def as_vector(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1 or a.size < 1:
        raise ShapeError(f"expected a non-empty 1-D vector, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def matmul_backward(a, b, grad_out) -> tuple[np.ndarray, np.ndarray]:
    """Return (dL/da, dL/db) for C = a @ b given dL/dC."""
    a, b, g = as_matrix(a), as_matrix(b), as_matrix(grad_out)
    if g.shape != (a.shape[0], b.shape[1]):
        raise ShapeError(f"grad shape {g.shape} does not match product {a.shape} x {b.shape}")
    return g @ b.T, a.T @ g


def conv1d_valid(x, w, b: float = 0.0) -> np.ndarray:
    """Stride-1 unpadded cross-correlation: out[i] = b + sum_u x[i+u] * w[u]."""
    x, w = as_vector(x), as_vector(w)
    if w.size > x.size:
        raise ShapeError(f"kernel of size {w.size} longer than input of length {x.size}")
    windows = np.lib.stride_tricks.sliding_window_view(x, w.size)
    return windows @ w + b


def conv1d_valid_backward(x, w, grad_out) -> tuple[np.ndarray, np.ndarray, float]:
    x, w, g = as_vector(x), as_vector(w), as_vector(grad_out)
    n_out = x.size - w.size + 1
    if g.size != n_out:
        raise ShapeError(f"grad length {g.size} != output length {n_out}")
    dx = np.zeros_like(x)
    for u in range(w.size):
        dx[u:u + n_out] += g * w[u]
    dw = np.lib.stride_tricks.sliding_window_view(x, w.size).T @ g
    return dx, dw, float(g.sum())


def activation(x) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


def activation_backward(y, grad_out) -> np.ndarray:
    # takes the forward *output* y = tanh(x)
    return grad_out * (1.0 - y * y)


def finite_diff_grad(f: Callable[[np.ndarray], float], theta, eps: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function of a flat parameter vector."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    theta = np.array(theta, dtype=np.float64).ravel()
    grad = np.empty_like(theta)
    for i in range(theta.size):
        old = theta[i]
        theta[i] = old + eps
        fp = f(theta)
        theta[i] = old - eps
        fm = f(theta)
        theta[i] = old
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value at coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * eps)
    return grad


def check_congruent(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
    if list(params) != list(grads):
        raise ShapeError(f"gradient keys {list(grads)} do not match parameters {list(params)}")
    for name, p in params.items():
        if grads[name].shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {grads[name].shape}, expected {p.shape}")


def flatten(params: Mapping[str, np.ndarray]) -> np.ndarray:
    if not params:
        return np.zeros(0)
    return np.concatenate([np.ravel(p) for p in params.values()])


def unflatten(flat: np.ndarray, like: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    out, i = {}, 0
    for name, p in like.items():
        out[name] = flat[i:i + p.size].reshape(p.shape).copy()
        i += p.size
    if i != flat.size:
        raise ShapeError(f"flat vector has {flat.size} entries, parameters need {i}")
    return out
