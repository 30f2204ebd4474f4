"""Throughput benchmark: replaying a recorded imagination rollout with the
incremental key/value cache versus recomputing the full token prefix at
every step, on identical weights and identical inputs.

Both paths must produce the same hidden states (within float32 tolerance);
the report carries wall-clock samples/sec, the analytic token counts, and
their ratio.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field

import numpy as np

from ..dynamics import DynamicsConfig, DynamicsModel, ImaginedBatch


@dataclass
class BenchSettings:
    """Model and rollout sizes; defaults match the full-scale configuration."""
    layers: int = 10
    d_model: int = 256
    heads: int = 4
    d_ff: int = 1024
    seq_len: int = 16
    horizon: int = 15
    latent_vars: int = 32
    latent_classes: int = 32
    action_count: int = 6
    batch: int = 32
    no_reward_tokens: bool = False
    seed: int = 0

    def dynamics_config(self) -> DynamicsConfig:
        return DynamicsConfig(
            layers=self.layers, d_model=self.d_model, heads=self.heads,
            d_ff=self.d_ff, seq_len=self.seq_len,
            action_count=self.action_count, latent_vars=self.latent_vars,
            latent_classes=self.latent_classes,
            latent_head=(2, 128), reward_head=(2, 128),
            discount_head=(2, 128), gamma=0.99,
            no_reward_tokens=self.no_reward_tokens)


@dataclass
class BenchResult:
    mode: str
    batch: int
    horizon: int
    elapsed_sec: float
    samples_per_sec: float
    tokens_processed: int
    hidden: np.ndarray = field(repr=False)

    def csv_row(self) -> str:
        return (f"{self.mode},{self.batch},{self.horizon},"
                f"{self.elapsed_sec:.4f},{self.samples_per_sec:.1f},"
                f"{self.tokens_processed}")


@dataclass
class BenchComparison:
    cached: BenchResult
    vanilla: BenchResult
    speed_ratio: float          # cached samples/sec over vanilla samples/sec
    max_abs_diff: float         # worst |h_cached - h_vanilla|

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("mode,batch,horizon,elapsed_sec,samples_per_sec,tokens_processed\n")
        out.write(self.cached.csv_row() + "\n")
        out.write(self.vanilla.csv_row() + "\n")
        out.write(f"ratio,,,,{self.speed_ratio:.3f},\n")
        out.write(f"max_abs_diff,,,,{self.max_abs_diff:.3e},\n")
        return out.getvalue()


def token_counts(settings: BenchSettings) -> tuple[int, int]:
    """Analytic (cached, vanilla) token-pass counts for one replay."""
    h = settings.horizon
    per_step = 2 if settings.no_reward_tokens else 3
    cached = per_step * h if settings.no_reward_tokens else 3 * h - 1
    cfg = settings.dynamics_config()
    window = cfg.mem_len + 1
    vanilla = sum(min(per_step * t + 2, window) for t in range(h))
    return cached, vanilla


def build_recorded_rollout(settings: BenchSettings
                           ) -> tuple[DynamicsModel, ImaginedBatch]:
    """Fresh model plus one recorded imagination rollout to replay."""
    model = DynamicsModel(settings.dynamics_config(),
                          np.random.default_rng([settings.seed, 0]))
    rng = np.random.default_rng([settings.seed, 1])
    z0 = np.zeros((settings.batch, settings.latent_vars,
                   settings.latent_classes), dtype=np.float32)
    picks = rng.integers(0, settings.latent_classes,
                         size=(settings.batch, settings.latent_vars))
    np.put_along_axis(z0, picks[..., None], 1.0, axis=-1)

    def policy(z, h_prev):
        return rng.integers(0, settings.action_count, size=z.shape[0])

    batch = model.imagine(z0, policy, settings.horizon,
                          np.random.default_rng([settings.seed, 2]))
    return model, batch


def throughput_bench(mode: str, settings: BenchSettings | None = None,
                     model: DynamicsModel | None = None,
                     batch: ImaginedBatch | None = None) -> BenchResult:
    """Time one replay of the rollout in `mode` ('cached' or 'vanilla')."""
    settings = settings or BenchSettings()
    if model is None or batch is None:
        model, batch = build_recorded_rollout(settings)
    if mode == "cached":
        run = model.replay_hidden_cached
    elif mode == "vanilla":
        run = model.replay_hidden_vanilla
    else:
        raise ValueError(f"unknown bench mode '{mode}'")
    start = time.perf_counter()
    hidden = run(batch)
    elapsed = time.perf_counter() - start
    samples = batch.actions.shape[0] * batch.actions.shape[1]
    cached_tokens, vanilla_tokens = token_counts(settings)
    return BenchResult(
        mode=mode, batch=batch.actions.shape[0],
        horizon=batch.actions.shape[1], elapsed_sec=elapsed,
        samples_per_sec=samples / max(elapsed, 1e-9),
        tokens_processed=cached_tokens if mode == "cached" else vanilla_tokens,
        hidden=hidden)


def compare_bench(settings: BenchSettings | None = None) -> BenchComparison:
    """Run both modes on identical weights and inputs; report ratio and the
    worst hidden-state disagreement."""
    settings = settings or BenchSettings()
    cached_tokens, _ = token_counts(settings)
    window = settings.dynamics_config().mem_len + 1
    if cached_tokens > window:
        raise ValueError(
            f"rollout of {cached_tokens} tokens overflows the {window}-token "
            "window; the two modes only agree while the stream fits")
    model, batch = build_recorded_rollout(settings)
    cached = throughput_bench("cached", settings, model, batch)
    vanilla = throughput_bench("vanilla", settings, model, batch)
    diff = float(np.abs(cached.hidden - vanilla.hidden).max())
    return BenchComparison(
        cached=cached, vanilla=vanilla,
        speed_ratio=cached.samples_per_sec / vanilla.samples_per_sec,
        max_abs_diff=diff)
