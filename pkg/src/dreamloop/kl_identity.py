"""Standalone verification of the two-sided divergence gradient identity.

The claim: with a stop-gradient on one side at a time,

    grad[ lam * KL(sg(q) || p) + (1 - lam) * KL(q || sg(p)) ]
  = grad[ lam1 * CE(sg(q), p) + lam2 * CE(q, sg(p)) - lam3 * H(q) ]

for lam1 = lam, lam2 = lam3 = 1 - lam, because H(sg(q)) carries no gradient.
Both q and p here are categorical heads of one small shared-parameter
network, so the gradients genuinely interleave through common weights.
Everything runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .numerics import Tensor
from .numerics import tensor as T
from .numerics.distributions import CategoricalVector


class SharedParamPair:
    """One parameter vector theta; q and p are two categorical heads over a
    shared hidden layer on a fixed input."""

    def __init__(self, rng: np.random.Generator, k: int = 3, c: int = 5,
                 batch: int = 2, hidden: int = 16, d_in: int = 6,
                 mix: float = 0.0):
        self.k, self.c, self.mix = k, c, mix
        self.params = nx.ParameterSet("pair")
        self.params.add("trunk.w", rng.normal(scale=0.5, size=(d_in, hidden)))
        self.params.add("trunk.b", rng.normal(scale=0.1, size=hidden))
        self.params.add("q.w", rng.normal(scale=0.5, size=(hidden, k * c)))
        self.params.add("q.b", rng.normal(scale=0.1, size=k * c))
        self.params.add("p.w", rng.normal(scale=0.5, size=(hidden, k * c)))
        self.params.add("p.b", rng.normal(scale=0.1, size=k * c))
        self.x = Tensor(rng.normal(size=(batch, d_in)))

    def dists(self) -> tuple[CategoricalVector, CategoricalVector]:
        h = nx.tanh(self.x @ self.params["trunk.w"] + self.params["trunk.b"])
        ql = T.reshape(h @ self.params["q.w"] + self.params["q.b"],
                       (self.x.shape[0], self.k, self.c))
        pl = T.reshape(h @ self.params["p.w"] + self.params["p.b"],
                       (self.x.shape[0], self.k, self.c))
        return (CategoricalVector(ql, mix=self.mix),
                CategoricalVector(pl, mix=self.mix))

    def grad_vector(self) -> np.ndarray:
        return np.concatenate([t.grad.reshape(-1) for t in self.params.tensors()])


def _sg(dist: CategoricalVector) -> CategoricalVector:
    return CategoricalVector(dist.logits.detach(), mix=dist.mix)


def balanced_kl_loss(pair: SharedParamPair, lam: float) -> Tensor:
    q, p = pair.dists()
    return (lam * T.tmean(_sg(q).kl_to(p))
            + (1.0 - lam) * T.tmean(q.kl_to(_sg(p))))


def balanced_ce_loss(pair: SharedParamPair, lam1: float, lam2: float,
                     lam3: float) -> Tensor:
    q, p = pair.dists()
    return (lam1 * T.tmean(_sg(q).cross_entropy_to(p))
            + lam2 * T.tmean(q.cross_entropy_to(_sg(p)))
            - lam3 * T.tmean(q.entropy()))


def balanced_kl_grad(pair: SharedParamPair, lam: float) -> np.ndarray:
    pair.params.zero_grad()
    T.backward(balanced_kl_loss(pair, lam))
    return pair.grad_vector()


def balanced_ce_grad(pair: SharedParamPair, lam1: float, lam2: float,
                     lam3: float) -> np.ndarray:
    pair.params.zero_grad()
    T.backward(balanced_ce_loss(pair, lam1, lam2, lam3))
    return pair.grad_vector()


@dataclass
class TrialReport:
    trials: int
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def run_trials(n_trials: int = 100, seed: int = 0,
               tolerance: float = 1e-6) -> TrialReport:
    """The signature identity check over random (theta, lam) draws."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    with T.verification_mode():
        for i in range(n_trials):
            k = int(rng.integers(1, 5))
            c = int(rng.integers(2, 8))
            batch = int(rng.integers(1, 4))
            mix = 0.0 if rng.random() < 0.5 else 0.01
            lam = float(rng.random())
            pair = SharedParamPair(rng, k=k, c=c, batch=batch, mix=mix)
            g_kl = balanced_kl_grad(pair, lam)
            g_ce = balanced_ce_grad(pair, lam, 1.0 - lam, 1.0 - lam)
            worst = max(worst, nx.max_relative_error(g_kl, g_ce))
    return TrialReport(trials=n_trials, max_rel_error=worst, tolerance=tolerance)
