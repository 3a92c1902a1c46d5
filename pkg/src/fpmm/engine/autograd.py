"""Reverse-mode gradient accumulation and finite-difference verification."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence

import numpy as np

from fpmm.engine.tensor import Tensor
from fpmm.shared.errors import ShapeMismatchError

logger = logging.getLogger(__name__)

# Denominator floor for relative gradient errors; below it errors are effectively absolute.
_RELATIVE_FLOOR = 1e-5


def _topological_order(root: Tensor) -> list[Tensor]:
    """Parents-before-children ordering of every node reachable from ``root``."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def gradients(loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
    """Exact gradients of a scalar ``loss`` with respect to each of ``params``.

    Parameters the loss does not depend on get a zero gradient rather than
    an error. Accumulation follows a fixed topological order, so results are
    reproducible bit for bit.
    """
    if loss.size != 1:
        raise ShapeMismatchError(f"gradients() needs a scalar loss, got shape {loss.shape}")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        grad = grads.get(id(node))
        backward = node.backward_fn
        if grad is None or backward is None:
            continue
        for parent, parent_grad in zip(node.parents, backward(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + parent_grad
            else:
                grads[key] = np.asarray(parent_grad, dtype=parent.dtype)

    return [
        grads[id(p)].reshape(p.shape) if id(p) in grads else np.zeros_like(p.data)
        for p in params
    ]


def numeric_gradient(
    fn: Callable[[], Tensor],
    param: Tensor,
    indices: Sequence[tuple[int, ...]],
    h: float = 1e-5,
) -> np.ndarray:
    """Central finite differences of ``fn()`` for selected entries of ``param``."""
    out = np.zeros(len(indices), dtype=np.float64)
    for n, idx in enumerate(indices):
        original = param.data[idx].copy()
        param.data[idx] = original + h
        plus = fn().item()
        param.data[idx] = original - h
        minus = fn().item()
        param.data[idx] = original
        out[n] = (plus - minus) / (2.0 * h)
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), _RELATIVE_FLOOR)
    return np.abs(analytic - numeric) / scale


def check_gradients(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    *,
    h: float = 1e-5,
    max_entries: int | None = None,
    seed: int = 0,
) -> float:
    """Largest relative error between analytic and central-difference gradients.

    ``fn`` must rebuild the loss from the current parameter values on every
    call. With ``max_entries`` set, a seeded random subset of each parameter's
    entries is checked instead of all of them.
    """
    loss = fn()
    analytic = gradients(loss, params)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for param, grad in zip(params, analytic):
        all_indices = list(np.ndindex(param.shape))
        if max_entries is not None and len(all_indices) > max_entries:
            picks = rng.choice(len(all_indices), size=max_entries, replace=False)
            all_indices = [all_indices[i] for i in sorted(picks)]
        numeric = numeric_gradient(fn, param, all_indices, h=h)
        exact = np.array([grad[idx] for idx in all_indices], dtype=np.float64)
        err = float(relative_error(exact, numeric).max()) if all_indices else 0.0
        worst = max(worst, err)
    logger.debug("Gradient check over %d tensors: worst relative error %.3e", len(params), worst)
    return worst
