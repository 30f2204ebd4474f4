"""Finite-difference gradient verification utilities.

The convention throughout: build the model under ``verification_mode`` (so
parameters are float64), express the quantity under test as a closure that
recomputes the scalar loss from scratch, and compare the tape's gradients
against central differences coordinate by coordinate.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .optim import ParameterSet
from .tensor import Tensor


def max_relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    denom = max(float(np.abs(a).max(initial=0.0)),
                float(np.abs(b).max(initial=0.0)), floor)
    return float(np.abs(a - b).max(initial=0.0)) / denom


def finite_difference(loss_fn: Callable[[], float], param: Tensor,
                      h: float = 1e-5) -> np.ndarray:
    """Central differences of `loss_fn` w.r.t. every coordinate of `param`.

    `loss_fn` must recompute the loss from current parameter values and is
    expected to be deterministic (fix RNG draws outside the closure).
    """
    base = param.data
    grad = np.zeros_like(base, dtype=np.float64)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(loss_fn())
        flat[i] = orig - h
        fm = float(loss_fn())
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def check_gradients(loss_fn: Callable[[], Tensor],
                    params: Sequence[tuple[str, Tensor]] | ParameterSet,
                    h: float = 1e-5) -> float:
    """Backprop vs central differences over every listed parameter.

    Returns the worst max-relative-error across parameters. Gradients are
    taken after a fresh forward/backward, so `loss_fn` must rebuild the graph
    on each call.
    """
    if isinstance(params, ParameterSet):
        named = list(params.items())
    else:
        named = list(params)
    for _, p in named:
        p.zero_grad()
    loss = loss_fn()
    T.backward(loss)
    analytic = {name: p.grad.copy() for name, p in named}

    def scalar_loss() -> float:
        with T.no_grad():
            return float(loss_fn().data)

    worst = 0.0
    for name, p in named:
        fd = finite_difference(scalar_loss, p, h=h)
        err = max_relative_error(analytic[name], fd)
        worst = max(worst, err)
    return worst
