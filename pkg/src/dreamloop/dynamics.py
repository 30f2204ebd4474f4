"""Autoregressive latent dynamics: a cached transformer over interleaved
(z, a, r) tokens with relative positional attention, plus MLP heads for the
next latent, reward, and discount.

Token stream for a length-l window: z1,a1,r1,z2,a2,r2,...,z_l,a_l -- the
final reward is a target, never an input, so the count is 3l-1 (2l with
reward tokens ablated). The summary state h_k is the transformer output at
the action token of step k; outputs at other tokens are discarded.

Incremental rollout caches per-layer key/value projections (`XLMemory`), so
feeding tokens one at a time reproduces the full forward pass exactly while
paying only O(1) new-token work per step. Attention scores use relative
distances only, which makes outputs independent of absolute window offsets.

Latent inputs are treated as constants (detached): this model's loss trains
the transformer and heads, never the encoder upstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .numerics import Tensor
from .numerics import tensor as T
from .numerics.distributions import CategoricalVector, BernoulliLogit


@dataclass
class DynamicsConfig:
    layers: int = 10
    d_model: int = 256
    heads: int = 4
    d_ff: int = 1024
    seq_len: int = 16                 # l, in environment steps
    mem_len: int | None = None        # tokens; default 3l-1
    action_count: int = 3
    latent_vars: int = 32             # K
    latent_classes: int = 32          # C
    latent_head: tuple[int, int] = (4, 512)    # (layers, width)
    reward_head: tuple[int, int] = (4, 256)
    discount_head: tuple[int, int] = (4, 256)
    gamma: float = 0.99
    probs_mix: float = 0.01
    no_reward_tokens: bool = False

    def __post_init__(self):
        if self.d_model % self.heads:
            raise ValueError("d_model must be divisible by heads")
        if self.mem_len is None:
            self.mem_len = self.tokens_per_window(self.seq_len)

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads

    @property
    def latent_dim(self) -> int:
        return self.latent_vars * self.latent_classes

    def tokens_per_window(self, steps: int) -> int:
        return 2 * steps if self.no_reward_tokens else 3 * steps - 1

    def signature(self) -> tuple:
        return (self.layers, self.d_model, self.heads, self.d_ff,
                self.mem_len, self.no_reward_tokens)


@dataclass
class XLMemory:
    """Per-layer cached key/value projections plus the write position."""
    keys: list[np.ndarray]      # each (B, heads, <=mem_len, head_dim)
    values: list[np.ndarray]
    position: int               # absolute index of the next token
    signature: tuple

    @property
    def length(self) -> int:
        return self.keys[0].shape[2] if self.keys else 0


@dataclass
class ImaginedBatch:
    """H transitions dreamed from M starting latents (plain arrays)."""
    latents: np.ndarray        # (M, H+1, K, C) one-hot float32
    actions: np.ndarray        # (M, H) int64
    rewards: np.ndarray        # (M, H) float32, predicted means
    discounts: np.ndarray      # (M, H) float32, gamma * p(continue)
    hidden_prev: np.ndarray    # (M, H, d) h_{t-1} paired with z_t (zeros at t=0)


def sinusoid_table(length: int, dim: int, dtype) -> np.ndarray:
    """Relative-distance encodings R[d] for d = 0..length-1."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    idx = np.arange(0, dim, 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, idx / dim)
    table = np.zeros((length, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return table.astype(dtype)


def _mlp_init(params: nx.ParameterSet, rng: np.random.Generator, prefix: str,
              d_in: int, layers: int, width: int, d_out: int) -> None:
    dims = [d_in] + [width] * layers + [d_out]
    for i in range(len(dims) - 1):
        params.add(f"{prefix}.{i}.w", nx.glorot_uniform(rng, (dims[i], dims[i + 1])))
        params.add(f"{prefix}.{i}.b", np.zeros(dims[i + 1]))


def _mlp_forward(params: nx.ParameterSet, prefix: str, x: Tensor,
                 n_layers: int) -> Tensor:
    for i in range(n_layers + 1):
        x = x @ params[f"{prefix}.{i}.w"] + params[f"{prefix}.{i}.b"]
        if i < n_layers:
            x = nx.silu(x)
    return x


class DynamicsModel:
    def __init__(self, cfg: DynamicsConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.params = nx.ParameterSet("dyn")
        p = self.params
        d, dh, nh = cfg.d_model, cfg.head_dim, cfg.heads
        p.add("embed.z.w", nx.glorot_uniform(rng, (cfg.latent_dim, d)))
        p.add("embed.z.b", np.zeros(d))
        p.add("embed.a", rng.normal(scale=0.02, size=(cfg.action_count, d)))
        p.add("embed.r.w", nx.glorot_uniform(rng, (1, d)))
        p.add("embed.r.b", np.zeros(d))
        for i in range(cfg.layers):
            pre = f"layer{i}"
            p.add(f"{pre}.ln1.g", np.ones(d))
            p.add(f"{pre}.ln1.b", np.zeros(d))
            for nm in ("q", "k", "v", "o"):
                p.add(f"{pre}.attn.{nm}.w", nx.glorot_uniform(rng, (d, d)))
                p.add(f"{pre}.attn.{nm}.b", np.zeros(d))
            p.add(f"{pre}.attn.r.w", nx.glorot_uniform(rng, (d, d)))
            p.add(f"{pre}.attn.u", rng.normal(scale=0.02, size=(nh, dh)))
            p.add(f"{pre}.attn.v", rng.normal(scale=0.02, size=(nh, dh)))
            p.add(f"{pre}.ln2.g", np.ones(d))
            p.add(f"{pre}.ln2.b", np.zeros(d))
            p.add(f"{pre}.ff.0.w", nx.glorot_uniform(rng, (d, cfg.d_ff)))
            p.add(f"{pre}.ff.0.b", np.zeros(cfg.d_ff))
            p.add(f"{pre}.ff.1.w", nx.glorot_uniform(rng, (cfg.d_ff, d)))
            p.add(f"{pre}.ff.1.b", np.zeros(d))
        p.add("final_ln.g", np.ones(d))
        p.add("final_ln.b", np.zeros(d))
        _mlp_init(p, rng, "head.latent", d, *cfg.latent_head, cfg.latent_dim)
        _mlp_init(p, rng, "head.reward", d, *cfg.reward_head, 1)
        _mlp_init(p, rng, "head.discount", d, *cfg.discount_head, 1)
        self._sin_cache: dict[tuple[int, str], np.ndarray] = {}

    def empty_memory(self, batch: int) -> XLMemory:
        dt = self.params["embed.z.w"].data.dtype
        shape = (batch, self.cfg.heads, 0, self.cfg.head_dim)
        return XLMemory(
            keys=[np.zeros(shape, dtype=dt) for _ in range(self.cfg.layers)],
            values=[np.zeros(shape, dtype=dt) for _ in range(self.cfg.layers)],
            position=0,
            signature=self.cfg.signature(),
        )

    def _sinusoids(self, length: int) -> np.ndarray:
        dt = self.params["embed.z.w"].data.dtype
        key = (length, dt.str)
        if key not in self._sin_cache:
            self._sin_cache[key] = sinusoid_table(length, self.cfg.d_model, dt)
        return self._sin_cache[key]

    # -- transformer core ---------------------------------------------------------

    def forward_tokens(self, tokens: Tensor, memory: XLMemory | None = None,
                       collect_attention: list | None = None
                       ) -> tuple[Tensor, XLMemory]:
        """Process (B, Q, d) new tokens against optional cached context.

        Returns outputs after the final layernorm (B, Q, d) and the updated
        memory (cache trimmed to mem_len, position advanced).
        """
        cfg = self.cfg
        b, q_len, _ = tokens.shape
        if memory is None:
            memory = self.empty_memory(b)
        if memory.signature != cfg.signature():
            raise nx.UsageError("XLMemory built under a different config")
        mlen = memory.length
        klen = mlen + q_len
        p = self.params
        nh, dh = cfg.heads, cfg.head_dim
        rel = self._sinusoids(klen)                      # (klen, d)

        # distance idx[i, j] = (mlen + i) - j, clamped into table range
        qpos = mlen + np.arange(q_len)[:, None]
        kpos = np.arange(klen)[None, :]
        dist = qpos - kpos
        visible = dist >= 0
        idx = np.clip(dist, 0, klen - 1)

        new_keys, new_values = [], []
        x = tokens
        inv_sqrt = 1.0 / math.sqrt(dh)
        for li in range(cfg.layers):
            pre = f"layer{li}"
            xn = nx.layer_norm(x, p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])

            def split_heads(t: Tensor) -> Tensor:
                return T.transpose(T.reshape(t, (b, q_len, nh, dh)), (0, 2, 1, 3))

            q = split_heads(xn @ p[f"{pre}.attn.q.w"] + p[f"{pre}.attn.q.b"])
            k_new = split_heads(xn @ p[f"{pre}.attn.k.w"] + p[f"{pre}.attn.k.b"])
            v_new = split_heads(xn @ p[f"{pre}.attn.v.w"] + p[f"{pre}.attn.v.b"])
            if mlen:
                k = T.concatenate([Tensor(memory.keys[li]), k_new], axis=2)
                v = T.concatenate([Tensor(memory.values[li]), v_new], axis=2)
            else:
                k, v = k_new, v_new
            new_keys.append(np.concatenate([memory.keys[li], k_new.data], axis=2)
                            [:, :, -cfg.mem_len:])
            new_values.append(np.concatenate([memory.values[li], v_new.data], axis=2)
                              [:, :, -cfg.mem_len:])

            u_bias = T.reshape(p[f"{pre}.attn.u"], (1, nh, 1, dh))
            v_bias = T.reshape(p[f"{pre}.attn.v"], (1, nh, 1, dh))
            content = (q + u_bias) @ T.transpose(k, (0, 1, 3, 2))
            # position scores over distances, then gathered per (query, key)
            r_proj = Tensor(rel) @ p[f"{pre}.attn.r.w"]                # (klen, d)
            r_heads = T.transpose(T.reshape(r_proj, (klen, nh, dh)), (1, 2, 0))
            pos_all = (q + v_bias) @ r_heads                           # (B,nh,Q,klen)
            pos = nx.take_along_last_axis(pos_all, idx)
            attn = nx.masked_softmax((content + pos) * inv_sqrt, visible)
            if collect_attention is not None:
                collect_attention.append(attn.data.copy())
            ctx = attn @ v                                             # (B,nh,Q,dh)
            ctx = T.reshape(T.transpose(ctx, (0, 2, 1, 3)), (b, q_len, cfg.d_model))
            x = x + (ctx @ p[f"{pre}.attn.o.w"] + p[f"{pre}.attn.o.b"])

            xn2 = nx.layer_norm(x, p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"])
            hidden = nx.silu(xn2 @ p[f"{pre}.ff.0.w"] + p[f"{pre}.ff.0.b"])
            x = x + (hidden @ p[f"{pre}.ff.1.w"] + p[f"{pre}.ff.1.b"])

        out = nx.layer_norm(x, p["final_ln.g"], p["final_ln.b"])
        new_mem = XLMemory(keys=new_keys, values=new_values,
                           position=memory.position + q_len,
                           signature=cfg.signature())
        return out, new_mem

    # -- token construction ------------------------------------------------------------

    def embed_z(self, z: Tensor | np.ndarray) -> Tensor:
        zt = z if isinstance(z, Tensor) else Tensor(np.asarray(z))
        zt = zt.detach()
        flat = T.reshape(zt, (*zt.shape[:-2], self.cfg.latent_dim))
        return flat @ self.params["embed.z.w"] + self.params["embed.z.b"]

    def embed_a(self, actions: np.ndarray) -> Tensor:
        return nx.embedding(self.params["embed.a"], np.asarray(actions))

    def embed_r(self, rewards: np.ndarray | Tensor) -> Tensor:
        r = rewards if isinstance(rewards, Tensor) else Tensor(np.asarray(rewards))
        r = T.reshape(r.detach(), (*r.shape, 1))
        return r @ self.params["embed.r.w"] + self.params["embed.r.b"]

    def build_tokens(self, z: Tensor | np.ndarray, actions: np.ndarray,
                     rewards: np.ndarray | None) -> tuple[Tensor, np.ndarray]:
        """Interleave embeddings; returns (tokens (B,T,d), action positions)."""
        ez = self.embed_z(z)                       # (B, L, d)
        ea = self.embed_a(actions)                 # (B, L, d)
        b, steps, d = ez.shape
        if ea.shape[:2] != (b, steps):
            raise nx.UsageError("z/a length mismatch")
        if self.cfg.no_reward_tokens:
            tok = T.reshape(T.stack([ez, ea], axis=2), (b, 2 * steps, d))
            return tok, 2 * np.arange(steps) + 1
        if rewards is None or rewards.shape[-1] != steps - 1:
            raise nx.UsageError("need l-1 rewards for l steps")
        positions = 3 * np.arange(steps) + 1
        if steps == 1:
            tok = T.reshape(T.stack([ez, ea], axis=2), (b, 2, d))
            return tok, positions
        er = self.embed_r(rewards)                 # (B, L-1, d)
        trips = T.stack([ez[:, :steps - 1], ea[:, :steps - 1], er], axis=2)
        trips = T.reshape(trips, (b, 3 * (steps - 1), d))
        tail = T.reshape(T.stack([ez[:, steps - 1:], ea[:, steps - 1:]], axis=2),
                         (b, 2, d))
        return T.concatenate([trips, tail], axis=1), positions

    def aggregate(self, z, actions: np.ndarray, rewards: np.ndarray | None,
                  memory: XLMemory | None = None,
                  collect_attention: list | None = None
                  ) -> tuple[Tensor, XLMemory]:
        """Summaries h_1..h_l (outputs at action tokens) for a window."""
        tokens, pos = self.build_tokens(z, actions, rewards)
        out, mem = self.forward_tokens(tokens, memory, collect_attention)
        return out[:, pos, :], mem

    # -- prediction heads -----------------------------------------------------------------

    def predict(self, h: Tensor) -> tuple[Tensor, Tensor, CategoricalVector]:
        """(reward mean, discount gamma*sigmoid(logit), next-latent dist)."""
        cfg = self.cfg
        r_mean = _mlp_forward(self.params, "head.reward", h, cfg.reward_head[0])
        r_mean = T.reshape(r_mean, h.shape[:-1])
        d_logit = _mlp_forward(self.params, "head.discount", h, cfg.discount_head[0])
        d_logit = T.reshape(d_logit, h.shape[:-1])
        discount = cfg.gamma * nx.sigmoid(d_logit)
        z_logits = _mlp_forward(self.params, "head.latent", h, cfg.latent_head[0])
        z_logits = T.reshape(z_logits, (*h.shape[:-1], cfg.latent_vars, cfg.latent_classes))
        return r_mean, discount, CategoricalVector(z_logits, mix=cfg.probs_mix)

    def discount_logit(self, h: Tensor) -> Tensor:
        out = _mlp_forward(self.params, "head.discount", h, self.cfg.discount_head[0])
        return T.reshape(out, h.shape[:-1])

    # -- training loss ----------------------------------------------------------------------

    def loss(self, z: Tensor, posteriors: CategoricalVector, actions: np.ndarray,
             rewards: np.ndarray, dones: np.ndarray, beta1: float, beta2: float
             ) -> tuple[Tensor, dict[str, float], CategoricalVector]:
        """Window loss on a sampled batch; trains transformer + heads only.

        z: the latents the encoder produced for the window, (B, L, K, C)
        (detached at embedding, so no gradient reaches the encoder).
        posteriors: the matching encoder distributions; their logits are
        stop-gradded here to form the CE targets. The CE term runs over
        t = 1..L-1 (the final step has no next-step posterior); reward and
        continue terms run over all L steps, each averaged separately.

        Returns (loss, stats, prior) where `prior` is the latent head's
        distribution for steps 2..L built from detached logits, aligned with
        posteriors[:, 1:], ready for the observation consistency term.
        """
        b, steps = np.asarray(actions).shape
        rew = None if self.cfg.no_reward_tokens else np.asarray(rewards)[:, :-1]
        h, _ = self.aggregate(z, actions, rew)
        r_mean, _, zdist = self.predict(h)
        d_logit = self.discount_logit(h)

        q_next = CategoricalVector(
            T.getitem(posteriors.logits, (slice(None), slice(1, None))).detach(),
            mix=posteriors.mix)
        pred_head = CategoricalVector(
            T.getitem(zdist.logits, (slice(None), slice(0, steps - 1))),
            mix=self.cfg.probs_mix)
        ce = T.tmean(q_next.cross_entropy_to(pred_head))
        # reward: unit-variance normal NLL with the constant dropped
        r_t = Tensor(np.asarray(rewards, dtype=r_mean.data.dtype))
        r_err = T.tmean(0.5 * (r_t - r_mean) ** 2)
        # continue flag: label 0 at episode end
        labels = 1.0 - np.asarray(dones, dtype=np.float64)
        d_nll = T.tmean(BernoulliLogit(d_logit).nll(labels))
        loss = ce + beta1 * r_err + beta2 * d_nll

        prior = CategoricalVector(pred_head.logits.detach(), mix=self.cfg.probs_mix)
        stats = dict(dyn_latent_ce=float(ce.data), dyn_reward_mse=float(r_err.data),
                     dyn_discount_nll=float(d_nll.data), dyn_loss=float(loss.data))
        return loss, stats, prior

    # -- imagination -----------------------------------------------------------------------

    def imagine(self, z0: np.ndarray, policy, horizon: int,
                rng: np.random.Generator) -> ImaginedBatch:
        """Dream `horizon` transitions from M starting latents.

        policy: callable (z (M,K,C), h_prev (M,d)) -> actions (M,). The
        rollout runs without gradients; each step feeds the action token,
        reads h_t at it, predicts (r, discount, next z), then feeds the
        predicted reward and sampled latent as the next tokens. Memory starts
        empty and slides at mem_len.
        """
        cfg = self.cfg
        m = z0.shape[0]
        dt = self.params["embed.z.w"].data.dtype
        lat = np.zeros((m, horizon + 1, cfg.latent_vars, cfg.latent_classes), dtype=dt)
        acts = np.zeros((m, horizon), dtype=np.int64)
        rews = np.zeros((m, horizon), dtype=dt)
        discs = np.zeros((m, horizon), dtype=dt)
        hidden_prev = np.zeros((m, horizon, cfg.d_model), dtype=dt)
        lat[:, 0] = z0
        with T.no_grad():
            mem = self.empty_memory(m)
            h_prev = np.zeros((m, cfg.d_model), dtype=dt)
            _, mem = self.forward_tokens(
                T.reshape(self.embed_z(Tensor(z0.astype(dt))), (m, 1, -1)), mem)
            z_cur = lat[:, 0]
            for t in range(horizon):
                a = np.asarray(policy(z_cur, h_prev), dtype=np.int64)
                out, mem = self.forward_tokens(
                    T.reshape(self.embed_a(a[:, None]), (m, 1, -1)), mem)
                h = out[:, 0, :]
                r_mean, disc, zdist = self.predict(h)
                z_next = zdist.sample_one_hot(rng).data
                hidden_prev[:, t] = h_prev
                acts[:, t] = a
                rews[:, t] = r_mean.data
                discs[:, t] = disc.data
                lat[:, t + 1] = z_next
                h_prev = h.data
                if t < horizon - 1:
                    nxt = [T.reshape(self.embed_z(Tensor(z_next)), (m, 1, -1))]
                    if not cfg.no_reward_tokens:
                        nxt.insert(0, T.reshape(
                            self.embed_r(r_mean.detach()), (m, 1, -1)))
                    _, mem = self.forward_tokens(T.concatenate(nxt, axis=1), mem)
                z_cur = z_next
        return ImaginedBatch(latents=lat, actions=acts, rewards=rews,
                             discounts=discs, hidden_prev=hidden_prev)

    # -- replay paths for the cached-vs-vanilla benchmark ---------------------------------

    def replay_hidden_cached(self, batch: ImaginedBatch) -> np.ndarray:
        """Recompute h_t for a recorded rollout using the incremental cache."""
        cfg = self.cfg
        m, horizon = batch.actions.shape
        dt = self.params["embed.z.w"].data.dtype
        hs = np.zeros((m, horizon, cfg.d_model), dtype=dt)
        with T.no_grad():
            mem = self.empty_memory(m)
            _, mem = self.forward_tokens(
                T.reshape(self.embed_z(Tensor(batch.latents[:, 0].astype(dt))),
                          (m, 1, -1)), mem)
            for t in range(horizon):
                out, mem = self.forward_tokens(
                    T.reshape(self.embed_a(batch.actions[:, t:t + 1]), (m, 1, -1)), mem)
                hs[:, t] = out[:, 0, :].data
                self.predict(out[:, 0, :])
                if t < horizon - 1:
                    nxt = [T.reshape(self.embed_z(
                        Tensor(batch.latents[:, t + 1].astype(dt))), (m, 1, -1))]
                    if not cfg.no_reward_tokens:
                        nxt.insert(0, T.reshape(
                            self.embed_r(batch.rewards[:, t:t + 1]), (m, 1, -1)))
                    _, mem = self.forward_tokens(T.concatenate(nxt, axis=1), mem)
        return hs

    def replay_hidden_vanilla(self, batch: ImaginedBatch) -> np.ndarray:
        """Recompute h_t by re-running the full prefix at every step (no
        cache). Matches the cached path exactly while the stream fits inside
        mem_len; beyond that the window slides and only the cached path is
        meaningful."""
        cfg = self.cfg
        m, horizon = batch.actions.shape
        dt = self.params["embed.z.w"].data.dtype
        hs = np.zeros((m, horizon, cfg.d_model), dtype=dt)
        window = cfg.mem_len + 1
        with T.no_grad():
            parts = [T.reshape(self.embed_z(
                Tensor(batch.latents[:, 0].astype(dt))), (m, 1, -1))]
            for t in range(horizon):
                parts.append(T.reshape(
                    self.embed_a(batch.actions[:, t:t + 1]), (m, 1, -1)))
                tokens = T.concatenate(parts, axis=1)
                if tokens.shape[1] > window:
                    tokens = tokens[:, -window:, :]
                out, _ = self.forward_tokens(tokens, None)
                hs[:, t] = out[:, -1, :].data
                self.predict(out[:, -1, :])
                if t < horizon - 1:
                    if not cfg.no_reward_tokens:
                        parts.append(T.reshape(
                            self.embed_r(batch.rewards[:, t:t + 1]), (m, 1, -1)))
                    parts.append(T.reshape(self.embed_z(
                        Tensor(batch.latents[:, t + 1].astype(dt))), (m, 1, -1)))
        return hs
