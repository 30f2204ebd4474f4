"""Training orchestration: configuration, checkpoints, and the run loop."""

from __future__ import annotations

from .checkpoint import (Checkpoint, load_checkpoint, restore_parameter_set,
                         save_checkpoint)
from .config import (TrainConfig, apply_overrides, default_config, desk_config,
                     load_config, parse_text, save_config, to_text)
from .trainer import (PolicyRuntime, RunState, Trainer, build_models,
                      evaluate_policy, load_inference_policy,
                      load_trained_models, one_step_latent_ce,
                      random_policy_baseline)

__all__ = [
    "Checkpoint", "PolicyRuntime", "RunState", "TrainConfig", "Trainer",
    "apply_overrides", "build_models", "default_config", "desk_config",
    "evaluate_policy", "load_checkpoint", "load_config",
    "load_inference_policy", "load_trained_models", "one_step_latent_ce",
    "parse_text", "random_policy_baseline", "restore_parameter_set",
    "save_checkpoint", "save_config", "to_text",
]
