"""Visual dumps: imagined-trajectory strips with action/reward captions, and
color-composited frame stacks that reveal motion across stacked frames.

All images are plain Pillow PNGs; numbers travel in sidecar CSVs.
"""

from __future__ import annotations

import colorsys
import csv
import os

import numpy as np
from PIL import Image

from ..numerics import tensor as nx


class DecodeShapeError(ValueError):
    """Observation does not match the model's frame geometry."""


def _to_image(frame: np.ndarray, scale: int = 4) -> np.ndarray:
    """(H, W) float in [0, 1] -> upscaled uint8 array."""
    arr = np.clip(np.asarray(frame, dtype=np.float64), 0.0, 1.0)
    arr8 = (arr * 255).round().astype(np.uint8)
    return np.kron(arr8, np.ones((scale, scale), dtype=np.uint8))


def frame_strip(frames: list[np.ndarray], scale: int = 4,
                separator: int = 2) -> Image.Image:
    """Horizontal strip of grayscale frames with white separators."""
    if not frames:
        raise ValueError("no frames to render")
    tiles = [_to_image(f, scale) for f in frames]
    height = tiles[0].shape[0]
    gap = np.full((height, separator), 255, dtype=np.uint8)
    row: list[np.ndarray] = []
    for i, tile in enumerate(tiles):
        if i:
            row.append(gap)
        row.append(tile)
    return Image.fromarray(np.concatenate(row, axis=1), mode="L")


class _SequencePolicy:
    """Replays a fixed action list inside an imagination rollout."""

    def __init__(self, actions, batch: int):
        self.actions = [int(a) for a in actions]
        self.batch = batch
        self.step = 0

    def __call__(self, z, h_prev):
        if self.step >= len(self.actions):
            raise ValueError(
                f"action list has {len(self.actions)} entries; "
                f"step {self.step + 1} requested")
        action = self.actions[self.step]
        self.step += 1
        return np.full((self.batch,), action, dtype=np.int64)


def _decode_frames(obs_model, latents: np.ndarray) -> np.ndarray:
    """Decode (T, K, C) one-hot latents to (T, H, W) newest-slot frames."""
    with nx.no_grad():
        decoded = obs_model.decode(nx.Tensor(latents.astype(np.float32)))
    frames = decoded.data
    return frames[..., -1]     # newest slot of the stacked frames


def dump_trajectory(obs_model, dyn_model, start_obs: np.ndarray,
                    steps: int, out_dir: str, actions=None, policy=None,
                    samples: int = 1, seed: int = 0, prefix: str = "imagined",
                    scale: int = 4) -> list[str]:
    """Imagine `steps` transitions from one observation; write one strip PNG
    and one caption CSV (columns step,action,reward) per sample.

    Frame 0 is the reconstructed start; frame t shows the latent sampled
    after the t-th action. `actions` fixes the action sequence; otherwise
    `policy(z, h_prev) -> (M,) actions` chooses. Samples reuse the same
    start latent but draw independent rollouts; the same `seed` always
    reproduces the same strips.
    """
    start_obs = np.asarray(start_obs, dtype=np.float32)
    expected = tuple(obs_model.cfg.obs_shape)
    if start_obs.shape != expected:
        raise DecodeShapeError(
            f"observation shape {start_obs.shape} != model frames {expected}")
    if steps > 0 and actions is None and policy is None:
        raise ValueError("need an action list or a policy to imagine steps")

    os.makedirs(out_dir, exist_ok=True)
    with nx.no_grad():
        z0, _ = obs_model.encode(start_obs[None], np.random.default_rng(0),
                                 sample_mode="mode")
    z0 = z0.data.astype(np.float32)

    written: list[str] = []
    for k in range(samples):
        rng = np.random.default_rng([seed, k])
        if steps > 0:
            chooser = (_SequencePolicy(actions, batch=1)
                       if actions is not None else policy)
            dream = dyn_model.imagine(z0, chooser, steps, rng)
            latents = dream.latents[0]                 # (steps+1, K, C)
            acts = dream.actions[0]
            rewards = dream.rewards[0]
        else:
            latents = z0
            acts = np.zeros((0,), dtype=np.int64)
            rewards = np.zeros((0,), dtype=np.float32)

        frames = list(_decode_frames(obs_model, latents))
        stem = prefix if samples == 1 else f"{prefix}_sample{k}"
        png = os.path.join(out_dir, f"{stem}.png")
        frame_strip(frames, scale=scale).save(png)
        cap = os.path.join(out_dir, f"{stem}.csv")
        with open(cap, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "action", "reward"])
            writer.writerow([0, "", ""])
            for t in range(len(acts)):
                writer.writerow([t + 1, int(acts[t]), f"{float(rewards[t]):.6f}"])
        written.extend([png, cap])
    return written


# -- frame-stack composites -------------------------------------------------------


def stack_tints(slots: int) -> np.ndarray:
    """One distinct hue per stack slot, (S, 3) in [0, 1]."""
    if slots == 1:
        return np.ones((1, 3))
    return np.asarray([colorsys.hsv_to_rgb(i / slots, 0.85, 1.0)
                       for i in range(slots)])


def composite_stack(stack: np.ndarray) -> np.ndarray:
    """Tint each stack slot and blend: (H, W, S) -> (H, W, 3) in [0, 1].

    Channel-wise weighted mean sum(c_s * f_s) / sum(c_s): identical slots
    collapse to a neutral gray image, while motion leaves hue-shifted copies.
    """
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3:
        raise ValueError(f"expected (H, W, S) stack, got {stack.shape}")
    tints = stack_tints(stack.shape[-1])               # (S, 3)
    weighted = np.einsum("hws,sc->hwc", stack, tints)
    return np.clip(weighted / tints.sum(axis=0), 0.0, 1.0)


def dump_frame_stack(obs_model, z: np.ndarray, out_path: str,
                     scale: int = 4) -> str:
    """Decode one latent and write the color-composited stack image."""
    z = np.asarray(z, dtype=np.float32)
    if z.ndim == 2:
        z = z[None]
    with nx.no_grad():
        decoded = obs_model.decode(nx.Tensor(z)).data[0]   # (H, W, S)
    rgb = composite_stack(decoded)
    rgb8 = (rgb * 255).round().astype(np.uint8)
    big = np.stack([np.kron(rgb8[..., c], np.ones((scale, scale), np.uint8))
                    for c in range(3)], axis=-1)
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    Image.fromarray(big, mode="RGB").save(out_path)
    return out_path
