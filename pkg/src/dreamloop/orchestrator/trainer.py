"""The training loop: collect experience, update the world model, imagine,
update the agent — plus pretraining, evaluation, logging, and checkpoints.

Phases are strictly sequential. Every agent update consumes the latents
returned by the world-model update of the same iteration. All randomness
flows through four named streams (env, sampler, latent, policy) derived from
the master seed, which makes whole runs reproducible bit for bit.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import numerics as nx
from ..agent import ActorCritic, AgentConfig
from ..dynamics import DynamicsConfig, DynamicsModel
from ..envs import ConfigError, make_env
from ..numerics import Tensor, UsageError
from ..numerics import tensor as T
from ..numerics.distributions import CategoricalVector
from ..observation import ObsModelConfig, ObservationModel
from ..replay import ExperienceDataset, SampledBatch
from .checkpoint import (Checkpoint, load_checkpoint, restore_parameter_set,
                         save_checkpoint)
from .config import TrainConfig, to_text


@dataclass
class RunState:
    env_steps: int = 0
    wm_updates: int = 0
    agent_updates: int = 0


def _stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag])


def build_models(cfg: TrainConfig, action_count: int,
                 obs_shape: tuple[int, int, int], rng: np.random.Generator
                 ) -> tuple[ObservationModel, DynamicsModel, ActorCritic]:
    """Construct the three trainable modules for a config.

    The generator is consumed in a fixed order (observation, dynamics,
    agent), so one seeded generator reproduces an init exactly.
    """
    obs_cfg = ObsModelConfig(
        obs_shape=obs_shape,
        latent_vars=cfg.latent_vars,
        latent_classes=cfg.latent_classes,
        base_width=cfg.obs_base_width,
    )
    dyn_cfg = DynamicsConfig(
        layers=cfg.transformer_layers,
        d_model=cfg.transformer_dim,
        heads=cfg.transformer_heads,
        d_ff=cfg.transformer_ff,
        seq_len=cfg.sequence_length,
        action_count=action_count,
        latent_vars=cfg.latent_vars,
        latent_classes=cfg.latent_classes,
        latent_head=cfg.latent_head_units,
        reward_head=cfg.reward_head_units,
        discount_head=cfg.discount_head_units,
        gamma=cfg.gamma,
        no_reward_tokens=cfg.no_reward_tokens,
    )
    agent_cfg = AgentConfig(
        action_count=action_count,
        latent_vars=cfg.latent_vars,
        latent_classes=cfg.latent_classes,
        actor_units=cfg.actor_units,
        critic_units=cfg.critic_units,
        policy_input=cfg.policy_input,
        d_model=cfg.transformer_dim,
    )
    obs_model = ObservationModel(obs_cfg, rng)
    dyn_model = DynamicsModel(dyn_cfg, rng)
    agent = ActorCritic(agent_cfg, rng)
    return obs_model, dyn_model, agent


class PolicyRuntime:
    """Action selection from pixels: encode, then sample from the actor.

    With `policy_input="z_and_h"` it also maintains a streaming transformer
    memory over the episode so the actor can see the previous summary state;
    the default configuration never touches the transformer here.
    """

    def __init__(self, cfg: TrainConfig, obs_model: ObservationModel,
                 actor, dyn_model: DynamicsModel | None = None):
        self.cfg = cfg
        self.obs_model = obs_model
        self.actor = actor
        self.dyn_model = dyn_model
        self._needs_hidden = cfg.policy_input == "z_and_h"
        if self._needs_hidden and dyn_model is None:
            raise UsageError("policy_input=z_and_h requires the dynamics model")
        self._mem = None
        self._h_prev: np.ndarray | None = None
        self._last_z: np.ndarray | None = None

    def reset(self) -> None:
        self._last_z = None
        if self._needs_hidden:
            self._mem = self.dyn_model.empty_memory(1)
            dt = self.obs_model.params["enc.out.w"].data.dtype
            self._h_prev = np.zeros((1, self.cfg.transformer_dim), dtype=dt)

    def act(self, obs: np.ndarray, rng_latent: np.random.Generator,
            rng_policy: np.random.Generator) -> int:
        if self._needs_hidden and self._h_prev is None:
            self.reset()
        with T.no_grad():
            z, _ = self.obs_model.encode(obs[None], rng_latent, "hard")
            h_prev = self._h_prev if self._needs_hidden else None
            action = self.actor.act(z, rng_policy, h_prev=h_prev)
        self._last_z = z.data
        return int(action[0])

    def observe(self, action: int, reward: float) -> None:
        """Feed the step's tokens into the streaming memory (hidden-state
        policies only)."""
        if not self._needs_hidden or self._last_z is None:
            return
        dyn = self.dyn_model
        with T.no_grad():
            tok_z = T.reshape(dyn.embed_z(Tensor(self._last_z)), (1, 1, -1))
            tok_a = dyn.embed_a(np.array([[action]], dtype=np.int64))
            out, self._mem = dyn.forward_tokens(
                T.concatenate([tok_z, tok_a], axis=1), self._mem)
            self._h_prev = out.data[:, -1, :]
            if not dyn.cfg.no_reward_tokens:
                tok_r = dyn.embed_r(np.array([[reward]]))
                _, self._mem = dyn.forward_tokens(tok_r, self._mem)


class Trainer:
    def __init__(self, cfg: TrainConfig, out_dir: str | None = None,
                 verbose: bool = False):
        cfg.validate()
        self.cfg = cfg
        self.verbose = verbose
        self.out_dir = Path(out_dir) if out_dir else None
        if self.out_dir:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        self.env = make_env(cfg.env_id, cfg.frame_size, cfg.frame_skip,
                            cfg.frame_stack)
        spec = self.env.spec
        self.obs_model, self.dyn_model, self.agent = build_models(
            cfg, spec.action_count, spec.obs_shape, _stream(cfg.seed, 0))
        self.rng_env = _stream(cfg.seed, 1)
        self.rng_sampler = _stream(cfg.seed, 2)
        self.rng_latent = _stream(cfg.seed, 3)
        self.rng_policy = _stream(cfg.seed, 4)
        self.replay = ExperienceDataset(spec.obs_shape,
                                        cfg.effective_replay_capacity())
        self.state = RunState()
        self.policy = PolicyRuntime(
            cfg, self.obs_model, self.agent.actor,
            self.dyn_model if cfg.policy_input == "z_and_h" else None)
        self._obs: np.ndarray | None = None
        self._episode_return = 0.0
        self._episode_len = 0
        self.episode_log: list[dict] = []
        self.history: list[dict] = []
        self._t_start = time.perf_counter()

    # -- bookkeeping -------------------------------------------------------------

    def param_sets(self) -> dict[str, nx.ParameterSet]:
        return {
            "obs": self.obs_model.params,
            "dyn": self.dyn_model.params,
            "actor": self.agent.actor.params,
            "critic": self.agent.critic.params,
        }

    def _log(self, stats: dict, phase: str = "train") -> None:
        row = dict(phase=phase, env_steps=self.state.env_steps,
                   wm_updates=self.state.wm_updates,
                   agent_updates=self.state.agent_updates, **stats)
        self.history.append(row)
        if self.verbose and self.state.wm_updates % max(1, self.cfg.log_every_updates) == 0:
            keys = ("obs_loss", "dyn_loss", "psnr", "actor_loss", "critic_loss",
                    "policy_entropy_norm")
            shown = " ".join(f"{k}={row[k]:.4g}" for k in keys if k in row)
            wall = time.perf_counter() - self._t_start
            print(f"[{phase}] steps={row['env_steps']} updates={row['wm_updates']} "
                  f"{shown} wall={wall:.0f}s", flush=True)

    # -- experience collection -------------------------------------------------------

    def collect(self, steps: int, random_policy: bool = False) -> None:
        """Run the current (or a uniform-random) policy, appending every
        transition to the experience dataset."""
        spec = self.env.spec
        for _ in range(steps):
            if self._obs is None:
                seed = int(self.rng_env.integers(2 ** 31 - 1))
                self._obs = self.env.reset(seed=seed)
                self._episode_return = 0.0
                self._episode_len = 0
                self.policy.reset()
            if random_policy:
                action = int(self.rng_policy.integers(spec.action_count))
            else:
                action = self.policy.act(self._obs, self.rng_latent,
                                         self.rng_policy)
            result = self.env.step(action)
            self.replay.append(self._obs, action, result.reward, result.done)
            self.state.env_steps += 1
            self._episode_return += result.reward
            self._episode_len += 1
            if not random_policy:
                self.policy.observe(action, result.reward)
            if result.done:
                self.episode_log.append(dict(env_step=self.state.env_steps,
                                             score=self._episode_return,
                                             length=self._episode_len))
                self._obs = None
            else:
                self._obs = result.observation

    # -- world model update ------------------------------------------------------------

    def train_world_model_step(self) -> tuple[np.ndarray, dict]:
        batch = self.replay.sample_sequences(
            self.cfg.batch_sequences, self.cfg.sequence_length,
            self.cfg.effective_tau(), self.rng_sampler)
        return self.world_model_update_on(batch)

    def world_model_update_on(self, batch: SampledBatch) -> tuple[np.ndarray, dict]:
        """One joint update of the observation and dynamics models on a
        sampled batch. Returns the batch's (N*l) sampled latents plus stats."""
        cfg = self.cfg
        n, length = batch.actions.shape
        k, c = cfg.latent_vars, cfg.latent_classes
        obs_flat = batch.observations.reshape(n * length,
                                              *batch.observations.shape[2:])
        z_flat, posterior = self.obs_model.encode(obs_flat, self.rng_latent,
                                                  "hard")
        decoded = self.obs_model.decode(z_flat)
        z_seq = T.reshape(z_flat, (n, length, k, c))
        post_seq = CategoricalVector(
            T.reshape(posterior.logits, (n, length, k, c)), mix=posterior.mix)
        dyn_loss, dyn_stats, prior = self.dyn_model.loss(
            z_seq, post_seq, batch.actions, batch.rewards, batch.dones,
            cfg.reward_coef, cfg.discount_coef)
        post_tail = CategoricalVector(
            T.reshape(post_seq.logits[:, 1:], (n * (length - 1), k, c)),
            mix=posterior.mix)
        prior_flat = CategoricalVector(
            T.reshape(prior.logits, (n * (length - 1), k, c)), mix=prior.mix)
        obs_loss, obs_stats = self.obs_model.loss(
            obs_flat, posterior, decoded, cfg.encoder_entropy_coef,
            cfg.consistency_coef, posterior_with_prior=post_tail,
            prior=prior_flat)

        total = obs_loss + dyn_loss
        self.obs_model.params.zero_grad()
        self.dyn_model.params.zero_grad()
        nx.backward(total)
        nx.adam_step(self.obs_model.params, cfg.lr_observation)
        nx.adam_step(self.dyn_model.params, cfg.lr_dynamics)
        self.state.wm_updates += 1
        stats = {**obs_stats, **dyn_stats,
                 "psnr": self.obs_model.psnr(obs_flat, decoded.data)}
        return z_flat.data.copy(), stats

    # -- agent update -------------------------------------------------------------------

    def train_agent_step(self, latents: np.ndarray) -> dict:
        """Imagine from M starts chosen (without replacement) among the
        latents of the immediately preceding world-model update, then take
        one actor and one critic step."""
        cfg = self.cfg
        available = latents.shape[0]
        if cfg.imagination_batch > available:
            raise ConfigError(
                f"imagination_batch {cfg.imagination_batch} exceeds the "
                f"{available} available latents")
        starts = self.rng_sampler.choice(available, size=cfg.imagination_batch,
                                         replace=False)
        z0 = latents[starts]
        if cfg.policy_input == "z_and_h":
            def policy(z, h_prev):
                return self.agent.actor.act(z, self.rng_policy, h_prev=h_prev)
        else:
            def policy(z, h_prev):
                return self.agent.actor.act(z, self.rng_policy)
        dream = self.dyn_model.imagine(z0, policy, cfg.imagination_horizon,
                                       self.rng_latent)
        actor_loss, critic_loss, stats = self.agent.losses(
            dream, cfg.gamma, cfg.gae_lambda,
            cfg.effective_actor_entropy_coef(),
            cfg.effective_entropy_threshold())
        self.agent.actor.params.zero_grad()
        self.agent.critic.params.zero_grad()
        nx.backward(actor_loss + critic_loss)
        nx.adam_step(self.agent.actor.params, cfg.lr_actor)
        nx.adam_step(self.agent.critic.params, cfg.lr_critic)
        self.state.agent_updates += 1
        return stats

    # -- phases ------------------------------------------------------------------------

    def pretrain(self) -> None:
        """Random-policy collection followed by world-model-only updates;
        agent parameters are untouched."""
        cfg = self.cfg
        if cfg.pretrain_env_steps > 0:
            self.collect(cfg.pretrain_env_steps, random_policy=True)
        for _ in range(cfg.pretrain_updates):
            _, stats = self.train_world_model_step()
            self._log(stats, phase="pretrain")

    def train(self) -> None:
        """Full run: pretrain, then alternate collection with one
        world-model and one agent update until the env-step budget (which
        includes pretraining collection) is spent."""
        cfg = self.cfg
        self.pretrain()
        while self.state.env_steps < cfg.env_step_budget:
            chunk = min(cfg.env_steps_per_update,
                        cfg.env_step_budget - self.state.env_steps)
            self.collect(chunk)
            if len(self.replay) < cfg.sequence_length:
                continue
            latents, wm_stats = self.train_world_model_step()
            agent_stats = self.train_agent_step(latents)
            self._log({**wm_stats, **agent_stats})
            if (cfg.checkpoint_every_updates > 0 and self.out_dir and
                    self.state.wm_updates % cfg.checkpoint_every_updates == 0):
                self.save(self.out_dir / f"checkpoint_{self.state.wm_updates}.twm1")
        if self.out_dir:
            self.save()
            self.write_logs()

    def evaluate(self, episodes: int | None = None, seed: int | None = None,
                 out_path: str | None = None) -> tuple[float, list[float]]:
        episodes = self.cfg.eval_episodes if episodes is None else episodes
        base = self.cfg.seed if seed is None else seed
        dyn = self.dyn_model if self.cfg.policy_input == "z_and_h" else None
        runtime = PolicyRuntime(self.cfg, self.obs_model, self.agent.actor, dyn)
        if out_path is None and self.out_dir:
            out_path = str(self.out_dir / "eval.csv")
        return evaluate_policy(self.cfg, runtime, episodes, base, out_path)

    # -- measurements ---------------------------------------------------------------------

    def final_episode_mean(self, last: int = 100) -> float:
        scores = [e["score"] for e in self.episode_log[-last:]]
        if not scores:
            raise UsageError("no completed episodes to average")
        return float(np.mean(scores))

    def one_step_latent_ce(self, windows: int = 64, seed: int = 12345) -> float:
        return one_step_latent_ce(self.obs_model, self.dyn_model, self.replay,
                                  self.cfg, windows,
                                  np.random.default_rng([self.cfg.seed, seed]))

    def entropy_trace(self) -> list[tuple[int, float]]:
        """(env_steps, normalized policy entropy) per agent update."""
        return [(row["env_steps"], row["policy_entropy_norm"])
                for row in self.history if "policy_entropy_norm" in row]

    # -- persistence -------------------------------------------------------------------------

    def save(self, path: str | Path | None = None) -> str:
        if path is None:
            if not self.out_dir:
                raise UsageError("no out_dir; pass an explicit checkpoint path")
            path = self.out_dir / "checkpoint.twm1"
        state = dict(env_steps=self.state.env_steps,
                     wm_updates=self.state.wm_updates,
                     agent_updates=self.state.agent_updates,
                     action_count=self.env.spec.action_count)
        save_checkpoint(str(path), to_text(self.cfg), self.param_sets(), state)
        return str(path)

    def restore(self, ck: Checkpoint) -> None:
        for set_name, params in self.param_sets().items():
            restore_parameter_set(ck, set_name, params, optimizer_state=True)
        self.state.env_steps = int(ck.scalar("env_steps"))
        self.state.wm_updates = int(ck.scalar("wm_updates"))
        self.state.agent_updates = int(ck.scalar("agent_updates"))

    def write_logs(self) -> None:
        if not self.out_dir:
            return
        if self.history:
            keys: list[str] = []
            for row in self.history:
                for key in row:
                    if key not in keys:
                        keys.append(key)
            with open(self.out_dir / "metrics.csv", "w", newline="",
                      encoding="utf-8") as f:
                writer = csv.DictWriter(f, fieldnames=keys, restval="")
                writer.writeheader()
                writer.writerows(self.history)
        with open(self.out_dir / "episodes.csv", "w", newline="",
                  encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=["env_step", "score", "length"])
            writer.writeheader()
            writer.writerows(self.episode_log)


# -- module-level helpers ------------------------------------------------------------


def evaluate_policy(cfg: TrainConfig, runtime: PolicyRuntime, episodes: int,
                    seed: int, out_path: str | None = None
                    ) -> tuple[float, list[float]]:
    """Run the stochastic policy for a number of episodes on a fresh
    environment; returns (mean score, per-episode scores)."""
    env = make_env(cfg.env_id, cfg.frame_size, cfg.frame_skip, cfg.frame_stack)
    rng_env = _stream(seed, 101)
    rng_latent = _stream(seed, 102)
    rng_policy = _stream(seed, 103)
    scores: list[float] = []
    for _ in range(episodes):
        obs = env.reset(seed=int(rng_env.integers(2 ** 31 - 1)))
        runtime.reset()
        total = 0.0
        while True:
            action = runtime.act(obs, rng_latent, rng_policy)
            result = env.step(action)
            runtime.observe(action, result.reward)
            total += result.reward
            if result.done:
                break
            obs = result.observation
        scores.append(total)
    if out_path:
        with open(out_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["episode", "score"])
            for i, s in enumerate(scores):
                writer.writerow([i, s])
    return float(np.mean(scores)), scores


def random_policy_baseline(cfg: TrainConfig, episodes: int, seed: int = 0
                           ) -> tuple[float, list[float]]:
    """Mean episode score of uniformly random actions; the reference for
    judging whether training made progress."""
    env = make_env(cfg.env_id, cfg.frame_size, cfg.frame_skip, cfg.frame_stack)
    rng_env = _stream(seed, 201)
    rng_action = _stream(seed, 202)
    scores = []
    for _ in range(episodes):
        env.reset(seed=int(rng_env.integers(2 ** 31 - 1)))
        total = 0.0
        while True:
            result = env.step(int(rng_action.integers(env.spec.action_count)))
            total += result.reward
            if result.done:
                break
        scores.append(total)
    return float(np.mean(scores)), scores


def one_step_latent_ce(obs_model: ObservationModel, dyn_model: DynamicsModel,
                       replay: ExperienceDataset, cfg: TrainConfig,
                       windows: int, rng: np.random.Generator) -> float:
    """Mean next-latent cross-entropy of the dynamics model on uniformly
    drawn replay windows (visitation counts untouched)."""
    length = cfg.sequence_length
    total = len(replay)
    if total < length:
        raise UsageError("not enough replay data for a window")
    starts = rng.integers(0, total - length + 1, size=windows)
    idx = starts[:, None] + np.arange(length)[None, :]
    obs = replay.obs[idx].astype(np.float32) / 255.0
    actions = replay.actions[idx].astype(np.int64)
    rewards = replay.rewards[idx].astype(np.float32)
    dones = replay.dones[idx].astype(bool)
    k, c = cfg.latent_vars, cfg.latent_classes
    with T.no_grad():
        flat = obs.reshape(windows * length, *obs.shape[2:])
        z_flat, posterior = obs_model.encode(flat, rng, "hard")
        z_seq = T.reshape(z_flat, (windows, length, k, c))
        post_seq = CategoricalVector(
            T.reshape(posterior.logits, (windows, length, k, c)),
            mix=posterior.mix)
        _, stats, _ = dyn_model.loss(z_seq, post_seq, actions, rewards, dones,
                                     beta1=0.0, beta2=0.0)
    return stats["dyn_latent_ce"]


def load_trained_models(path: str) -> tuple[TrainConfig, ObservationModel,
                                            DynamicsModel, ActorCritic]:
    """Full parameter restore (no optimizer state) from a checkpoint."""
    ck = load_checkpoint(path)
    cfg = ck.config()
    action_count = int(ck.scalar("action_count"))
    obs_shape = (cfg.frame_size, cfg.frame_size, cfg.frame_stack)
    obs_model, dyn_model, agent = build_models(cfg, action_count, obs_shape,
                                               _stream(cfg.seed, 0))
    restore_parameter_set(ck, "obs", obs_model.params, optimizer_state=False)
    restore_parameter_set(ck, "dyn", dyn_model.params, optimizer_state=False)
    restore_parameter_set(ck, "actor", agent.actor.params, optimizer_state=False)
    restore_parameter_set(ck, "critic", agent.critic.params, optimizer_state=False)
    return cfg, obs_model, dyn_model, agent


def load_inference_policy(path: str) -> tuple[TrainConfig, PolicyRuntime]:
    """Partial restore for acting: only the image encoder and the actor are
    read (plus the transformer when the policy was trained on summary
    states). The decoder, heads, and optimizer state stay untouched."""
    ck = load_checkpoint(path)
    cfg = ck.config()
    action_count = int(ck.scalar("action_count"))
    obs_shape = (cfg.frame_size, cfg.frame_size, cfg.frame_stack)
    obs_model, dyn_model, agent = build_models(cfg, action_count, obs_shape,
                                               _stream(cfg.seed, 0))
    for name in obs_model.params.names():
        if name.startswith("enc."):
            obs_model.params.load_array(name, ck.blobs[f"param.obs.{name}"])
    for name in agent.actor.params.names():
        agent.actor.params.load_array(name, ck.blobs[f"param.actor.{name}"])
    dyn = None
    if cfg.policy_input == "z_and_h":
        restore_parameter_set(ck, "dyn", dyn_model.params, optimizer_state=False)
        dyn = dyn_model
    return cfg, PolicyRuntime(cfg, obs_model, agent.actor, dyn)
