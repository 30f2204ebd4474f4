"""Actor-critic trained on imagined rollouts.

The actor and critic are MLPs over flattened one-hot latents (the actor can
optionally also see the dynamics summary state from the previous step).
Training uses generalized advantage estimation with the world model's
predicted discounts, REINFORCE-style policy gradients on stop-gradient
advantages, discount-product step weights that softly mask imagined episode
ends, and an entropy penalty that only activates below a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .dynamics import ImaginedBatch
from .numerics import Tensor
from .numerics import tensor as T
from .numerics.distributions import Categorical


@dataclass
class AgentConfig:
    action_count: int = 3
    latent_vars: int = 32
    latent_classes: int = 32
    actor_units: tuple[int, int] = (4, 512)     # (layers, width)
    critic_units: tuple[int, int] = (4, 512)
    policy_input: str = "z"                      # "z" | "z_and_h"
    d_model: int = 256                           # summary dim for "z_and_h"
    discount_weight_mode: str = "normalized"     # "normalized" (/gamma) | "raw"

    def __post_init__(self):
        if self.action_count < 2:
            raise ValueError("need at least 2 actions")
        if self.policy_input not in ("z", "z_and_h"):
            raise ValueError(f"bad policy_input '{self.policy_input}'")
        if self.discount_weight_mode not in ("normalized", "raw"):
            raise ValueError(f"bad discount_weight_mode '{self.discount_weight_mode}'")

    @property
    def latent_dim(self) -> int:
        return self.latent_vars * self.latent_classes

    @property
    def actor_input_dim(self) -> int:
        extra = self.d_model if self.policy_input == "z_and_h" else 0
        return self.latent_dim + extra


def _build_mlp(params, rng, dims):
    for i in range(len(dims) - 1):
        params.add(f"{i}.w", nx.glorot_uniform(rng, (dims[i], dims[i + 1])))
        params.add(f"{i}.b", np.zeros(dims[i + 1]))


def _run_mlp(params, x: Tensor, n_layers: int) -> Tensor:
    for i in range(n_layers + 1):
        x = x @ params[f"{i}.w"] + params[f"{i}.b"]
        if i < n_layers:
            x = nx.silu(x)
    return x


class Actor:
    def __init__(self, cfg: AgentConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.params = nx.ParameterSet("actor")
        layers, width = cfg.actor_units
        _build_mlp(self.params, rng,
                   [cfg.actor_input_dim] + [width] * layers + [cfg.action_count])

    def _input(self, z, h_prev) -> Tensor:
        zt = z if isinstance(z, Tensor) else Tensor(np.asarray(z))
        flat = T.reshape(zt, (*zt.shape[:-2], self.cfg.latent_dim))
        if self.cfg.policy_input == "z_and_h":
            if h_prev is None:
                raise nx.UsageError("policy_input=z_and_h requires the summary state")
            ht = h_prev if isinstance(h_prev, Tensor) else Tensor(np.asarray(h_prev))
            flat = T.concatenate([flat, ht.detach()], axis=-1)
        return flat

    def dist(self, z, h_prev=None) -> Categorical:
        x = self._input(z, h_prev)
        return Categorical(_run_mlp(self.params, x, self.cfg.actor_units[0]))

    def act(self, z, rng: np.random.Generator, h_prev=None) -> np.ndarray:
        with T.no_grad():
            return self.dist(z, h_prev).sample(rng)


class Critic:
    def __init__(self, cfg: AgentConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.params = nx.ParameterSet("critic")
        layers, width = cfg.critic_units
        _build_mlp(self.params, rng,
                   [cfg.latent_dim] + [width] * layers + [1])

    def value(self, z) -> Tensor:
        zt = z if isinstance(z, Tensor) else Tensor(np.asarray(z))
        flat = T.reshape(zt, (*zt.shape[:-2], self.cfg.latent_dim))
        out = _run_mlp(self.params, flat, self.cfg.critic_units[0])
        return T.reshape(out, flat.shape[:-1])


def gae(rewards: np.ndarray, values: np.ndarray, discounts: np.ndarray,
        lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation with per-step predicted discounts.

    rewards, discounts: (M, H); values: (M, H+1) including the bootstrap.
    delta_t = r_t + g_t * v_{t+1} - v_t; A_t = delta_t + g_t * lam * A_{t+1}.
    Returns (advantages (M, H), lambda-returns A + v).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    discounts = np.asarray(discounts, dtype=np.float64)
    m, h = rewards.shape
    if values.shape != (m, h + 1) or discounts.shape != (m, h):
        raise nx.UsageError("gae: shape mismatch")
    adv = np.zeros((m, h))
    carry = np.zeros(m)
    for t in range(h - 1, -1, -1):
        delta = rewards[:, t] + discounts[:, t] * values[:, t + 1] - values[:, t]
        carry = delta + discounts[:, t] * lam * carry
        adv[:, t] = carry
    return adv, adv + values[:, :h]


def discount_weights(discounts: np.ndarray, gamma: float,
                     mode: str = "normalized") -> np.ndarray:
    """w_0 = 1; w_t = prod_{k<t} g_k (optionally divided by gamma each step)."""
    g = np.asarray(discounts, dtype=np.float64)
    if mode == "normalized":
        g = g / gamma
    w = np.ones_like(g)
    np.cumprod(g[:, :-1], axis=1, out=w[:, 1:])
    return w


def thresholded_entropy_loss(mean_entropy: Tensor, threshold: float,
                             action_count: int) -> Tensor:
    """max(0, threshold - H/ln m): active only when the policy collapses."""
    if action_count < 2:
        raise nx.UsageError("entropy threshold needs at least 2 actions")
    normalized = mean_entropy * (1.0 / np.log(action_count))
    return nx.relu(threshold - normalized)


class ActorCritic:
    def __init__(self, cfg: AgentConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.actor = Actor(cfg, rng)
        self.critic = Critic(cfg, rng)

    def losses(self, batch: ImaginedBatch, gamma: float, lam: float,
               eta: float, entropy_threshold: float
               ) -> tuple[Tensor, Tensor, dict[str, float]]:
        """(actor loss, critic loss) on one imagined batch.

        Everything computed from the batch's arrays is a constant here;
        gradients flow only through fresh actor/critic forward passes.
        """
        m, horizon = batch.actions.shape
        k, c = batch.latents.shape[2:]
        z_all = batch.latents.reshape(m * (horizon + 1), k, c)
        values = self.critic.value(z_all)
        values_mh = values.data.reshape(m, horizon + 1)
        adv, returns = gae(batch.rewards, values_mh, batch.discounts, lam)
        w = discount_weights(batch.discounts, gamma, self.cfg.discount_weight_mode)

        z_states = batch.latents[:, :-1].reshape(m * horizon, k, c)
        h_prev = batch.hidden_prev.reshape(m * horizon, -1) \
            if self.cfg.policy_input == "z_and_h" else None
        dist = self.actor.dist(z_states, h_prev)
        logp = dist.log_prob_of(batch.actions.reshape(-1))
        entropy = dist.entropy()

        dt = logp.data.dtype
        w_flat = Tensor(w.reshape(-1).astype(dt))
        adv_flat = Tensor(adv.reshape(-1).astype(dt))
        mean_entropy = T.tmean(entropy)
        ent_loss = thresholded_entropy_loss(mean_entropy, entropy_threshold,
                                            self.cfg.action_count)
        actor_loss = -T.tmean(w_flat * logp * adv_flat) + eta * ent_loss

        v_train = T.getitem(T.reshape(values, (m, horizon + 1)),
                            (slice(None), slice(0, horizon)))
        ret_t = Tensor(returns.astype(values.data.dtype))
        w_t = Tensor(w.astype(values.data.dtype))
        critic_loss = T.tmean(w_t * 0.5 * (v_train - ret_t) ** 2)

        stats = dict(
            actor_loss=float(actor_loss.data),
            critic_loss=float(critic_loss.data),
            policy_entropy=float(mean_entropy.data),
            policy_entropy_norm=float(mean_entropy.data / np.log(self.cfg.action_count)),
            mean_value=float(values.data.mean()),
            mean_advantage=float(adv.mean()),
            mean_imagined_reward=float(batch.rewards.mean()),
        )
        return actor_loss, critic_loss, stats
