"""PPO trainer for the sqlsat rewrite environment, over its line protocol."""

from .model import PolicyNet, batch_observations, masked_logits
from .protocol import BridgeClient, BridgeError, Observation, VectorBridge
from .train import TrainConfig, load_checkpoint, save_checkpoint, train

__all__ = [
    "BridgeClient", "BridgeError", "Observation", "PolicyNet", "TrainConfig",
    "VectorBridge", "batch_observations", "load_checkpoint", "masked_logits",
    "save_checkpoint", "train",
]
