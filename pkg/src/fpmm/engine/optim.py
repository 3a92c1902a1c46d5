"""Adaptive-moment optimizer over named parameters."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from fpmm.engine.tensor import Tensor
from fpmm.shared.errors import ShapeMismatchError


class Adam:
    """Adam with bias correction. Updates parameter data in place."""

    def __init__(
        self,
        params: Sequence[tuple[str, Tensor]],
        *,
        lr: float = 2e-4,
        betas: tuple[float, float] = (0.5, 0.999),
        eps: float = 1e-8,
    ) -> None:
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros_like(p.data) for name, p in self.params}
        self._v = {name: np.zeros_like(p.data) for name, p in self.params}

    @property
    def tensors(self) -> list[Tensor]:
        return [p for _, p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ShapeMismatchError(f"Adam.step got {len(grads)} gradients for {len(self.params)} parameters")
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for (name, param), grad in zip(self.params, grads):
            m = self._m[name] = self.beta1 * self._m[name] + (1.0 - self.beta1) * grad
            v = self._v[name] = self.beta2 * self._v[name] + (1.0 - self.beta2) * grad * grad
            update = self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            param.data = (param.data - update).astype(param.dtype, copy=False)
