"""Environment interface and the pixel preprocessing wrapper.

Raw environments emit RGB uint8 frames and are deterministic given
(seed, action sequence). The wrapper applies, in order: action repeat with
reward summation, grayscale conversion, area-average downsampling, and
frame stacking. Observations leave the wrapper as float32 in [0, 1] with
shape (H, W, S), newest frame in slot S-1.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EnvSpec:
    env_id: str
    action_count: int
    obs_shape: tuple[int, int, int]    # (H, W, S) after preprocessing
    max_episode_steps: int             # in post-skip steps


@dataclass
class StepResult:
    observation: np.ndarray            # (H, W, S) float32 in [0, 1]
    reward: float
    done: bool


class RawEnv:
    """Base class for pixel environments. Subclasses implement the physics."""

    action_count: int = 0
    frame_shape: tuple[int, int] = (64, 64)   # (H, W) of raw RGB frames

    def reset(self, seed: int | None = None) -> np.ndarray:
        raise NotImplementedError

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        """Advance one raw frame. Returns (frame, reward, done)."""
        raise NotImplementedError


GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)


def to_grayscale(frame: np.ndarray) -> np.ndarray:
    """uint8 RGB (H, W, 3) -> float32 luminance in [0, 1]."""
    if frame.ndim != 3 or frame.shape[-1] != 3:
        raise ConfigError(f"expected RGB frame, got shape {frame.shape}")
    return (frame.astype(np.float64) / 255.0 @ GRAY_WEIGHTS).astype(np.float32)


def downsample_area(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Area-average pooling. Source dims must be integer multiples."""
    h, w = img.shape
    if h % out_h or w % out_w:
        raise ConfigError(
            f"downsample {h}x{w} -> {out_h}x{out_w} requires integer factors")
    fh, fw = h // out_h, w // out_w
    return img.reshape(out_h, fh, out_w, fw).mean(axis=(1, 3)).astype(np.float32)


class PreprocessedEnv:
    """Frame skip + grayscale + downsample + stack, with episode step cap."""

    def __init__(self, raw: RawEnv, env_id: str, frame_size: int = 64,
                 frame_skip: int = 4, frame_stack: int = 4,
                 max_episode_steps: int = 1000):
        self.raw = raw
        self.frame_size = int(frame_size)
        self.frame_skip = int(frame_skip)
        self.frame_stack = int(frame_stack)
        if self.frame_skip < 1 or self.frame_stack < 1:
            raise ConfigError("frame_skip and frame_stack must be >= 1")
        self.spec = EnvSpec(
            env_id=env_id,
            action_count=raw.action_count,
            obs_shape=(self.frame_size, self.frame_size, self.frame_stack),
            max_episode_steps=int(max_episode_steps),
        )
        self._stack: deque[np.ndarray] = deque(maxlen=self.frame_stack)
        self._steps = 0
        self._done = True

    def _process(self, frame: np.ndarray) -> np.ndarray:
        return downsample_area(to_grayscale(frame), self.frame_size, self.frame_size)

    def _observation(self) -> np.ndarray:
        return np.stack(list(self._stack), axis=-1)

    def reset(self, seed: int | None = None) -> np.ndarray:
        frame = self.raw.reset(seed=seed)
        proc = self._process(frame)
        self._stack.clear()
        for _ in range(self.frame_stack):
            self._stack.append(proc)
        self._steps = 0
        self._done = False
        return self._observation()

    def step(self, action: int) -> StepResult:
        if self._done:
            raise RuntimeError("step() after episode end; call reset()")
        if not 0 <= int(action) < self.spec.action_count:
            raise ConfigError(f"action {action} out of range [0, {self.spec.action_count})")
        total = 0.0
        done = False
        frame = None
        for _ in range(self.frame_skip):
            frame, r, done = self.raw.step(int(action))
            total += r
            if done:
                break
        self._stack.append(self._process(frame))
        self._steps += 1
        if self._steps >= self.spec.max_episode_steps:
            done = True
        self._done = done
        return StepResult(self._observation(), float(total), bool(done))
