"""Toy pixel environments and the preprocessing wrapper."""

from __future__ import annotations

from .base import (ConfigError, EnvSpec, PreprocessedEnv, RawEnv, StepResult,
                   downsample_area, to_grayscale)
from .coins import StochasticCoins
from .minipong import MiniPong

_RAW = {
    "minipong": (MiniPong, 1000),
    "coins": (StochasticCoins, 200),
}


def make_env(env_id: str, frame_size: int = 64, frame_skip: int = 4,
             frame_stack: int = 4) -> PreprocessedEnv:
    """Build a preprocessed environment by id ('minipong' or 'coins')."""
    try:
        cls, cap = _RAW[env_id]
    except KeyError:
        raise ConfigError(f"unknown env_id '{env_id}' (have: {sorted(_RAW)})") from None
    return PreprocessedEnv(cls(), env_id, frame_size=frame_size,
                           frame_skip=frame_skip, frame_stack=frame_stack,
                           max_episode_steps=cap)


__all__ = ["ConfigError", "EnvSpec", "MiniPong", "PreprocessedEnv", "RawEnv",
           "StepResult", "StochasticCoins", "downsample_area", "make_env",
           "to_grayscale"]
