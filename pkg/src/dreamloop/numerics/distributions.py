"""Differentiable distributions used by the models.

Conventions:
  * `CategoricalVector` is a stack of K independent C-way categoricals over
    the last two axes (..., K, C). Entropy and cross-entropy sum over both
    K and C, leaving the leading batch axes intact.
  * Probabilities may be mixed with a uniform floor:
    probs = (1 - mix) * softmax(logits) + mix / C. The floor keeps log-probs
    bounded and is part of the distribution (entropy/CE use mixed probs).
  * Straight-through sampling returns an exact one-hot value whose gradient
    is that of the underlying probabilities.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .tensor import Tensor


def one_hot(indices: np.ndarray, depth: int, dtype=None) -> np.ndarray:
    idx = np.asarray(indices)
    out = np.zeros(idx.shape + (depth,), dtype=dtype or T.default_dtype())
    np.put_along_axis(out, idx[..., None].astype(np.int64), 1.0, axis=-1)
    return out


def sample_categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """Vectorized inverse-CDF sampling over the last axis."""
    cdf = np.cumsum(probs, axis=-1)
    cdf /= cdf[..., -1:]
    u = rng.random(probs.shape[:-1] + (1,))
    idx = (cdf < u).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1).astype(np.int64)


class CategoricalVector:
    """K independent C-way categoricals parameterized by logits (..., K, C)."""

    def __init__(self, logits: Tensor, mix: float = 0.0):
        if logits.ndim < 2:
            raise T.UsageError("CategoricalVector logits need shape (..., K, C)")
        self.logits = logits
        self.mix = float(mix)
        self._probs: Tensor | None = None

    @property
    def k(self) -> int:
        return self.logits.shape[-2]

    @property
    def c(self) -> int:
        return self.logits.shape[-1]

    def probs(self) -> Tensor:
        if self._probs is None:
            p = T.softmax(self.logits, axis=-1)
            if self.mix > 0.0:
                p = p * (1.0 - self.mix) + self.mix / self.c
            self._probs = p
        return self._probs

    def log_probs(self) -> Tensor:
        if self.mix > 0.0:
            return T.log(self.probs())
        return T.log_softmax(self.logits, axis=-1)

    def entropy(self) -> Tensor:
        """-sum p log p over (K, C); shape = batch shape."""
        p = self.probs()
        return -T.tsum(p * self.log_probs(), axis=(-2, -1))

    def cross_entropy_to(self, other: "CategoricalVector") -> Tensor:
        """CE(self, other) = -sum self.probs * other.log_probs, over (K, C)."""
        return -T.tsum(self.probs() * other.log_probs(), axis=(-2, -1))

    def kl_to(self, other: "CategoricalVector") -> Tensor:
        return self.cross_entropy_to(other) - self.entropy()

    def sample_indices(self, rng: np.random.Generator) -> np.ndarray:
        with T.no_grad():
            p = self.probs().data
        return sample_categorical(rng, p)

    def sample_one_hot(self, rng: np.random.Generator) -> Tensor:
        """Straight-through sample: one-hot value, softmax gradient."""
        p = self.probs()
        idx = sample_categorical(rng, p.data)
        hard = Tensor(one_hot(idx, self.c, dtype=p.data.dtype))
        return hard + (p - p.detach())

    def mode_one_hot(self) -> Tensor:
        p = self.probs()
        idx = p.data.argmax(axis=-1)
        hard = Tensor(one_hot(idx, self.c, dtype=p.data.dtype))
        return hard + (p - p.detach())


class Categorical:
    """Single categorical over the last axis (used for the action policy)."""

    def __init__(self, logits: Tensor):
        self.logits = logits

    @property
    def n(self) -> int:
        return self.logits.shape[-1]

    def probs(self) -> Tensor:
        return T.softmax(self.logits, axis=-1)

    def log_probs(self) -> Tensor:
        return T.log_softmax(self.logits, axis=-1)

    def entropy(self) -> Tensor:
        lp = self.log_probs()
        return -T.tsum(T.exp(lp) * lp, axis=-1)

    def log_prob_of(self, actions: np.ndarray) -> Tensor:
        lp = self.log_probs()
        hot = one_hot(actions, self.n, dtype=lp.data.dtype)
        return T.tsum(lp * Tensor(hot), axis=-1)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        with T.no_grad():
            p = self.probs().data
        return sample_categorical(rng, p)

    def mode(self) -> np.ndarray:
        return self.logits.data.argmax(axis=-1)


class DiagonalUnitNormal:
    """N(mean, I) over the last axes; log-density at the mean is
    -0.5*log(2*pi) per element."""

    LOG_2PI = math.log(2.0 * math.pi)

    def __init__(self, mean: Tensor):
        self.mean = mean

    def nll(self, x: np.ndarray, reduce_axes=None) -> Tensor:
        """Negative log-density, summed over `reduce_axes` (default: all but
        the first axis)."""
        d = self.mean - Tensor(np.asarray(x, dtype=self.mean.data.dtype))
        per_elem = 0.5 * (d * d) + 0.5 * self.LOG_2PI
        if reduce_axes is None:
            reduce_axes = tuple(range(1, self.mean.ndim))
        return T.tsum(per_elem, axis=reduce_axes)


class BernoulliLogit:
    """Bernoulli parameterized by a logit; numerically stable NLL."""

    def __init__(self, logit: Tensor):
        self.logit = logit

    def prob(self) -> Tensor:
        return T.sigmoid(self.logit)

    def nll(self, labels) -> Tensor:
        """-log p(label); labels in {0, 1} (array-like or Tensor-free)."""
        y = np.asarray(labels, dtype=self.logit.data.dtype)
        # -log sigma(l) = softplus(-l); -log(1 - sigma(l)) = softplus(l)
        # so nll = softplus(l) - l * y
        return T.softplus(self.logit) - self.logit * Tensor(y)
