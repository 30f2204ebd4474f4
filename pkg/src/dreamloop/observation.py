"""Discrete-latent observation autoencoder.

The encoder maps a stacked grayscale observation (H, W, S) to K independent
C-way categorical posteriors; the decoder maps a flattened one-hot latent
back to pixel means under a unit-variance normal. Training uses the balanced
objective: reconstruction NLL, an entropy bonus on the posterior, and a
cross-entropy consistency term toward the (stop-gradient) sequence prior.

Latents flow onward as straight-through one-hot samples by default;
`sample_mode="soft"` feeds the probabilities themselves, which makes the
whole forward differentiable (used by the finite-difference verification).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .numerics import Tensor
from .numerics import tensor as T
from .numerics.distributions import CategoricalVector, DiagonalUnitNormal


@dataclass
class ObsModelConfig:
    obs_shape: tuple[int, int, int] = (64, 64, 4)     # (H, W, S)
    latent_vars: int = 32                              # K
    latent_classes: int = 32                           # C
    base_width: int = 48
    probs_mix: float = 0.01
    channel_mults: tuple[int, ...] = (1, 2, 4, 4)

    @property
    def stages(self) -> int:
        h = self.obs_shape[0]
        s = int(math.log2(h / 4))
        if 4 * (2 ** s) != h:
            raise ValueError(f"frame size {h} must be 4 * 2^n")
        return s

    @property
    def latent_dim(self) -> int:
        return self.latent_vars * self.latent_classes


class ObservationModel:
    def __init__(self, cfg: ObsModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.params = nx.ParameterSet("obs")
        h, w, s = cfg.obs_shape
        if h != w:
            raise ValueError("square frames required")
        chans = [s] + [cfg.base_width * m for m in cfg.channel_mults[:cfg.stages]]
        self._chans = chans
        p = self.params
        for i in range(cfg.stages):
            p.add(f"enc.conv{i}.w", nx.glorot_uniform(rng, (chans[i + 1], chans[i], 3, 3)))
            p.add(f"enc.conv{i}.b", np.zeros(chans[i + 1]))
        grid = 4
        flat = chans[-1] * grid * grid
        p.add("enc.out.w", nx.glorot_uniform(rng, (flat, cfg.latent_dim)))
        p.add("enc.out.b", np.zeros(cfg.latent_dim))
        p.add("dec.in.w", nx.glorot_uniform(rng, (cfg.latent_dim, flat)))
        p.add("dec.in.b", np.zeros(flat))
        for i in range(cfg.stages):
            j = cfg.stages - 1 - i
            p.add(f"dec.conv{i}.w", nx.glorot_uniform(rng, (chans[j + 1], chans[j], 3, 3)))
            p.add(f"dec.conv{i}.b", np.zeros(chans[j]))

    # -- forward passes ---------------------------------------------------------

    def encode_dist(self, obs) -> CategoricalVector:
        """obs: (B, H, W, S) array or Tensor -> posterior over (B, K, C)."""
        x = obs if isinstance(obs, Tensor) else Tensor(np.asarray(obs))
        x = T.transpose(x, (0, 3, 1, 2))
        p = self.params
        for i in range(self.cfg.stages):
            x = nx.conv2d(x, p[f"enc.conv{i}.w"], p[f"enc.conv{i}.b"],
                          stride=2, padding=1)
            x = nx.silu(x)
        x = T.reshape(x, (x.shape[0], -1))
        logits = x @ p["enc.out.w"] + p["enc.out.b"]
        logits = T.reshape(logits, (x.shape[0], self.cfg.latent_vars,
                                    self.cfg.latent_classes))
        return CategoricalVector(logits, mix=self.cfg.probs_mix)

    def encode(self, obs, rng: np.random.Generator,
               sample_mode: str = "hard") -> tuple[Tensor, CategoricalVector]:
        dist = self.encode_dist(obs)
        if sample_mode == "hard":
            z = dist.sample_one_hot(rng)
        elif sample_mode == "soft":
            z = dist.probs()
        elif sample_mode == "mode":
            z = dist.mode_one_hot()
        else:
            raise ValueError(f"unknown sample_mode '{sample_mode}'")
        return z, dist

    def decode(self, z: Tensor) -> Tensor:
        """z: (B, K, C) -> pixel means (B, H, W, S)."""
        p = self.params
        b = z.shape[0]
        x = T.reshape(z, (b, self.cfg.latent_dim))
        x = x @ p["dec.in.w"] + p["dec.in.b"]
        x = nx.silu(x)
        grid = 4
        x = T.reshape(x, (b, self._chans[-1], grid, grid))
        for i in range(self.cfg.stages):
            x = nx.conv2d_transpose(x, p[f"dec.conv{i}.w"], p[f"dec.conv{i}.b"],
                                    stride=2, padding=1, output_padding=1)
            if i < self.cfg.stages - 1:
                x = nx.silu(x)
        return T.transpose(x, (0, 2, 3, 1))

    # -- loss ----------------------------------------------------------------------

    def loss(self, obs: np.ndarray, posterior: CategoricalVector,
             decoded: Tensor, alpha1: float, alpha2: float,
             posterior_with_prior: CategoricalVector | None = None,
             prior: CategoricalVector | None = None) -> tuple[Tensor, dict[str, float]]:
        """Balanced objective: mean NLL - alpha1 * mean entropy
        + alpha2 * mean CE(posterior, sg(prior)).

        obs and decoded are (B, H, W, S); posterior is (B, K, C). The
        consistency pair covers only the steps that have a prior (all but
        the first step of each window); `prior` must already be built from
        detached logits. Each term is averaged over its own batch.
        """
        nll = DiagonalUnitNormal(decoded).nll(obs)          # (B,) sum over pixels
        ent = posterior.entropy()                           # (B,)
        loss = T.tmean(nll) - alpha1 * T.tmean(ent)
        stats = {}
        if prior is not None and alpha2 != 0.0:
            if posterior_with_prior is None:
                posterior_with_prior = posterior
            ce = T.tmean(posterior_with_prior.cross_entropy_to(prior))
            loss = loss + alpha2 * ce
            stats["obs_consistency_ce"] = float(ce.data)
        stats.update(obs_nll=float(nll.data.mean()),
                     posterior_entropy=float(ent.data.mean()),
                     obs_loss=float(loss.data))
        return loss, stats

    def psnr(self, obs: np.ndarray, decoded: np.ndarray) -> float:
        """Peak signal-to-noise ratio in dB for [0,1] images."""
        mse = float(np.mean((np.asarray(obs) - decoded) ** 2))
        if mse == 0:
            return float("inf")
        return -10.0 * math.log10(mse)
