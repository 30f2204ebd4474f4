"""A transformer world model with a discrete-latent autoencoder and an
actor-critic trained purely on imagined rollouts, on a numpy tape-autodiff
core."""

__version__ = "0.1.0"

from . import analysis, envs, numerics, orchestrator
from .agent import ActorCritic, AgentConfig
from .dynamics import DynamicsConfig, DynamicsModel, ImaginedBatch
from .observation import ObsModelConfig, ObservationModel
from .orchestrator import TrainConfig, Trainer
from .replay import ExperienceDataset

__all__ = [
    "ActorCritic", "AgentConfig", "DynamicsConfig", "DynamicsModel",
    "ExperienceDataset", "ImaginedBatch", "ObsModelConfig",
    "ObservationModel", "TrainConfig", "Trainer", "analysis", "envs",
    "numerics", "orchestrator", "__version__",
]
