"""Named parameter sets and an Adam step with global-norm clipping."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .tensor import NumericError, Tensor, UsageError


class ParameterSet:
    """An ordered, named collection of trainable tensors.

    Also owns the Adam moment buffers so that checkpointing a model and its
    optimizer state is a single-object affair.
    """

    def __init__(self, name: str = ""):
        self.name = name
        self._params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise UsageError(f"duplicate parameter name '{name}'")
        t = Tensor(np.asarray(data), requires_grad=True)
        self._params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def items(self) -> Iterable[tuple[str, Tensor]]:
        return self._params.items()

    def count(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def grad_global_norm(self) -> float:
        sq = 0.0
        for t in self._params.values():
            g = t.grad
            if g is not None:
                sq += float(np.dot(g.reshape(-1), g.reshape(-1)))
        return math.sqrt(sq)

    def load_array(self, name: str, data: np.ndarray) -> None:
        t = self._params[name]
        if tuple(data.shape) != tuple(t.data.shape):
            raise UsageError(
                f"shape mismatch loading '{name}': {data.shape} vs {t.data.shape}")
        t.data = data.astype(t.data.dtype, copy=True)


def adam_step(params: ParameterSet, lr: float,
              clip_norm: float | None = 100.0,
              betas: tuple[float, float] = (0.9, 0.999),
              eps: float = 1e-8) -> float:
    """One Adam update over every parameter in the set.

    Gradients are clipped jointly to `clip_norm` (global L2) before the
    moment updates. Returns the pre-clip global norm. Non-finite gradients
    raise, naming the offending parameter.
    """
    b1, b2 = betas
    gnorm = 0.0
    for name, t in params.items():
        g = t.grad
        if g is None:
            continue
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for parameter '{name}'")
        gnorm += float(np.dot(g.reshape(-1), g.reshape(-1)))
    gnorm = math.sqrt(gnorm)
    scale = 1.0
    if clip_norm is not None and gnorm > clip_norm and gnorm > 0.0:
        scale = clip_norm / gnorm
    params.step_count += 1
    k = params.step_count
    bc1 = 1.0 - b1 ** k
    bc2 = 1.0 - b2 ** k
    for name, t in params.items():
        g = t.grad if t.grad is not None else np.zeros_like(t.data)
        if scale != 1.0:
            g = g * scale
        m = params.m[name]
        v = params.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        t.data = t.data - lr * update
    return gnorm


# -- initializers ---------------------------------------------------------------


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...],
                   fan_in: int | None = None, fan_out: int | None = None) -> np.ndarray:
    if fan_in is None or fan_out is None:
        if len(shape) == 2:
            fan_in, fan_out = shape[0], shape[1]
        elif len(shape) == 4:
            rcp = shape[2] * shape[3]
            fan_in = shape[1] * rcp
            fan_out = shape[0] * rcp
        else:
            n = int(np.prod(shape))
            fan_in = fan_out = n
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def zeros(shape: tuple[int, ...]) -> np.ndarray:
    return np.zeros(shape)
