"""Run configuration: a flat dataclass, a human-readable key-value file
format, and command-line overrides.

The file format is one `key = value` per line, `#` comments, blank lines
ignored. Keys are exactly the TrainConfig field names. Values: ints, floats,
booleans (true/false), strings, and (layers)x(width) pairs like `4x512`.
`to_text` emits a canonical, fully commented rendering; checkpoints embed
that text verbatim so a saved run can always be re-parsed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..envs import ConfigError


@dataclass
class TrainConfig:
    # run identity
    env_id: str = "minipong"
    seed: int = 0
    # interaction budget
    env_step_budget: int = 100_000
    env_steps_per_update: int = 16
    pretrain_env_steps: int = 5_000
    pretrain_updates: int = 1_000
    eval_episodes: int = 100
    replay_capacity: int = 0            # 0 -> env_step_budget
    # pixel preprocessing
    frame_size: int = 64
    frame_skip: int = 4
    frame_stack: int = 4
    # replay sampling
    sampling_temperature: float = 20.0  # tau
    uniform_sampling: bool = False
    # discounting / advantages
    gamma: float = 0.99                 # gamma
    gae_lambda: float = 0.95            # lambda
    # batch geometry
    batch_sequences: int = 100          # N
    sequence_length: int = 16           # l
    imagination_batch: int = 400        # M
    imagination_horizon: int = 15       # H
    # loss coefficients
    encoder_entropy_coef: float = 5.0   # alpha_1
    consistency_coef: float = 0.01      # alpha_2
    reward_coef: float = 10.0           # beta_1
    discount_coef: float = 50.0         # beta_2
    actor_entropy_coef: float = 0.01    # eta
    entropy_threshold: float = 0.1      # Gamma
    # learning rates
    lr_observation: float = 1e-4
    lr_dynamics: float = 1e-4
    lr_actor: float = 1e-4
    lr_critic: float = 1e-5
    # model sizes
    latent_vars: int = 32               # K
    latent_classes: int = 32            # C
    obs_base_width: int = 48
    transformer_layers: int = 10
    transformer_dim: int = 256
    transformer_heads: int = 4
    transformer_ff: int = 1024
    latent_head_units: tuple[int, int] = (4, 512)
    reward_head_units: tuple[int, int] = (4, 256)
    discount_head_units: tuple[int, int] = (4, 256)
    actor_units: tuple[int, int] = (4, 512)
    critic_units: tuple[int, int] = (4, 512)
    # ablation switches
    no_reward_tokens: bool = False
    policy_input: str = "z"             # "z" | "z_and_h"
    entropy_threshold_off: bool = False
    # bookkeeping
    log_every_updates: int = 25
    checkpoint_every_updates: int = 0   # 0 -> final checkpoint only

    # -- derived values -------------------------------------------------------

    def effective_replay_capacity(self) -> int:
        return self.replay_capacity if self.replay_capacity > 0 else self.env_step_budget

    def effective_tau(self) -> float | None:
        """Start-sampling temperature; None means exact uniform."""
        return None if self.uniform_sampling else self.sampling_temperature

    def effective_entropy_threshold(self) -> float:
        """Threshold 1.0 turns the hinge into an always-active entropy bonus,
        which is the 'thresholding off' ablation."""
        return 1.0 if self.entropy_threshold_off else self.entropy_threshold

    def effective_actor_entropy_coef(self) -> float:
        """The always-active bonus uses a much smaller weight."""
        return 0.001 if self.entropy_threshold_off else self.actor_entropy_coef

    # -- validation -------------------------------------------------------------

    def validate(self) -> None:
        def require(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        for name in ("encoder_entropy_coef", "consistency_coef", "reward_coef",
                     "discount_coef", "actor_entropy_coef", "entropy_threshold",
                     "lr_observation", "lr_dynamics", "lr_actor", "lr_critic",
                     "sampling_temperature"):
            require(getattr(self, name) >= 0.0, f"{name} must be >= 0")
        require(0.0 <= self.entropy_threshold <= 1.0,
                "entropy_threshold must lie in [0, 1]")
        require(0.0 < self.gamma <= 1.0, "gamma must lie in (0, 1]")
        require(0.0 <= self.gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]")
        require(self.batch_sequences >= 1, "batch_sequences must be >= 1")
        require(self.sequence_length >= 2,
                "sequence_length must be >= 2 (the latent prediction target "
                "is the next step's posterior)")
        require(self.imagination_batch >= 1, "imagination_batch must be >= 1")
        require(self.imagination_horizon >= 1, "imagination_horizon must be >= 1")
        require(self.imagination_batch <= self.batch_sequences * self.sequence_length,
                f"imagination_batch ({self.imagination_batch}) cannot exceed "
                f"batch_sequences * sequence_length "
                f"({self.batch_sequences * self.sequence_length})")
        require(self.env_steps_per_update >= 1, "env_steps_per_update must be >= 1")
        require(self.env_step_budget >= 0, "env_step_budget must be >= 0")
        require(self.pretrain_env_steps >= 0 and self.pretrain_updates >= 0,
                "pretraining budgets must be >= 0")
        require(self.pretrain_env_steps <= self.env_step_budget,
                "pretrain_env_steps cannot exceed env_step_budget")
        if self.pretrain_updates > 0 or self.env_step_budget > self.pretrain_env_steps:
            require(self.pretrain_env_steps >= self.sequence_length,
                    "need at least sequence_length pretraining steps before updates")
        require(self.effective_replay_capacity() >= self.env_step_budget,
                "replay_capacity must hold the full env step budget")
        require(self.frame_skip >= 1 and self.frame_stack >= 1,
                "frame_skip and frame_stack must be >= 1")
        require(self.policy_input in ("z", "z_and_h"),
                f"policy_input must be 'z' or 'z_and_h', got '{self.policy_input}'")
        require(self.latent_vars >= 1 and self.latent_classes >= 2,
                "latent shape must be at least 1 variable with 2 classes")
        require(self.transformer_dim % self.transformer_heads == 0,
                "transformer_dim must be divisible by transformer_heads")
        require(self.eval_episodes >= 1, "eval_episodes must be >= 1")


# -- config file rendering -------------------------------------------------------

_COMMENTS = {
    "env_id": "environment id (minipong | coins)",
    "seed": "master seed; all random streams derive from it",
    "env_step_budget": "total environment steps, pretraining collection included",
    "env_steps_per_update": "environment steps between update pairs",
    "pretrain_env_steps": "random-policy steps collected before any update",
    "pretrain_updates": "world-model-only updates before agent training",
    "eval_episodes": "episodes per evaluation",
    "replay_capacity": "experience dataset capacity; 0 means env_step_budget",
    "frame_size": "square observation resolution after downsampling",
    "frame_skip": "action repeat (rewards summed)",
    "frame_stack": "frames per observation",
    "sampling_temperature": "dataset sampling temperature τ",
    "uniform_sampling": "ablation: exact-uniform start sampling instead of balanced",
    "gamma": "discount factor γ",
    "gae_lambda": "generalized advantage estimation parameter λ",
    "batch_sequences": "world model batch size N",
    "sequence_length": "history length ℓ",
    "imagination_batch": "imagination batch size M",
    "imagination_horizon": "imagination horizon H",
    "encoder_entropy_coef": "encoder entropy coefficient α1",
    "consistency_coef": "consistency loss coefficient α2",
    "reward_coef": "reward coefficient β1",
    "discount_coef": "discount coefficient β2",
    "actor_entropy_coef": "actor entropy coefficient η",
    "entropy_threshold": "actor entropy threshold Γ",
    "lr_observation": "observation learning rate",
    "lr_dynamics": "dynamics learning rate",
    "lr_actor": "actor learning rate",
    "lr_critic": "critic learning rate",
    "latent_vars": "categorical variables per latent state",
    "latent_classes": "classes per categorical variable",
    "obs_base_width": "encoder/decoder base channel width",
    "transformer_layers": "transformer layers",
    "transformer_dim": "transformer embedding size",
    "transformer_heads": "transformer heads",
    "transformer_ff": "transformer feedforward size",
    "latent_head_units": "latent state predictor units (layers x width)",
    "reward_head_units": "reward predictor units (layers x width)",
    "discount_head_units": "discount predictor units (layers x width)",
    "actor_units": "actor units (layers x width)",
    "critic_units": "critic units (layers x width)",
    "no_reward_tokens": "ablation: drop reward tokens from the sequence",
    "policy_input": "actor input: z | z_and_h",
    "entropy_threshold_off": "ablation: plain entropy bonus (Γ=1, η=0.001)",
    "log_every_updates": "progress print frequency, in update pairs",
    "checkpoint_every_updates": "periodic checkpoint frequency; 0 = final only",
}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return "x".join(str(v) for v in value)
    return str(value)


def _parse_value(field: dataclasses.Field, raw: str):
    raw = raw.strip()
    base = field.type
    if base == "bool":
        low = raw.lower()
        if low not in ("true", "false"):
            raise ConfigError(f"{field.name}: expected true/false, got '{raw}'")
        return low == "true"
    if base == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{field.name}: expected an integer, got '{raw}'") from None
    if base == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{field.name}: expected a number, got '{raw}'") from None
    if base.startswith("tuple"):
        parts = raw.replace(",", "x").split("x")
        try:
            pair = tuple(int(p) for p in parts)
        except ValueError:
            raise ConfigError(f"{field.name}: expected LAYERSxWIDTH, got '{raw}'") from None
        if len(pair) != 2:
            raise ConfigError(f"{field.name}: expected exactly two integers, got '{raw}'")
        return pair
    return raw


def to_text(cfg: TrainConfig) -> str:
    """Canonical commented rendering; stable across runs for checkpoint echo."""
    lines = ["# training configuration"]
    for field in dataclasses.fields(cfg):
        comment = _COMMENTS.get(field.name)
        if comment:
            lines.append(f"# {comment}")
        lines.append(f"{field.name} = {_format_value(getattr(cfg, field.name))}")
    return "\n".join(lines) + "\n"


def parse_text(text: str) -> TrainConfig:
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{stripped}'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in fields:
            raise ConfigError(f"line {lineno}: unknown config key '{key}'")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate config key '{key}'")
        values[key] = _parse_value(fields[key], raw)
    cfg = TrainConfig(**values)
    cfg.validate()
    return cfg


def load_config(path: str) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_text(f.read())


def save_config(cfg: TrainConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(to_text(cfg))


def apply_overrides(cfg: TrainConfig, overrides: list[str]) -> TrainConfig:
    """Apply 'key=value' strings on top of a config; returns a new config."""
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    updates = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in fields:
            raise ConfigError(f"unknown config key '{key}'")
        updates[key] = _parse_value(fields[key], raw)
    out = dataclasses.replace(cfg, **updates)
    out.validate()
    return out


# -- presets ------------------------------------------------------------------------


def default_config() -> TrainConfig:
    """Full-scale defaults."""
    return TrainConfig()


def desk_config(seed: int = 0) -> TrainConfig:
    """Small configuration that trains on one CPU core in minutes."""
    return TrainConfig(
        env_id="minipong",
        seed=seed,
        env_step_budget=20_000,
        env_steps_per_update=8,
        pretrain_env_steps=5_000,
        pretrain_updates=1_500,
        eval_episodes=20,
        frame_size=16,
        sampling_temperature=20.0,
        batch_sequences=16,
        sequence_length=8,
        imagination_batch=64,
        imagination_horizon=10,
        # the sparse 16x16 frames give a weak reconstruction gradient, so the
        # entropy bonus must be far smaller than at full scale or the
        # posterior pins at uniform and the latents carry nothing
        encoder_entropy_coef=0.01,
        lr_observation=4e-4,
        lr_dynamics=4e-4,
        lr_actor=4e-4,
        lr_critic=4e-5,
        latent_vars=8,
        latent_classes=8,
        obs_base_width=16,
        transformer_layers=2,
        transformer_dim=64,
        transformer_heads=4,
        transformer_ff=256,
        latent_head_units=(2, 128),
        reward_head_units=(2, 128),
        discount_head_units=(2, 128),
        actor_units=(2, 128),
        critic_units=(2, 128),
        log_every_updates=50,
    )
