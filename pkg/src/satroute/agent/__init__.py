from .network import Adam, QNetwork, load_checkpoint, save_checkpoint
from .policy import DRLPolicy, RandomPolicy
from .train import TrainConfig, train

__all__ = ["Adam", "QNetwork", "load_checkpoint", "save_checkpoint", "DRLPolicy", "RandomPolicy",
           "TrainConfig", "train"]
