"""Small numpy neural-network substrate: layers, networks, Adam, checkpoints."""

from navguard.nn.checkpoint import (BadMagic, ChecksumMismatch, CheckpointError, TruncatedFile,
                                    VersionMismatch, load_checkpoint, save_checkpoint)
from navguard.nn.layers import Conv2D, Dense, Flatten, Layer, ReLU, ShapeMismatch, Tanh
from navguard.nn.network import Network, NetworkSpec, Tape
from navguard.nn.optim import Adam, AdamConfig, backward_and_step, soft_update
from navguard.nn.policy import (FeatureSpec, PolicyBundle, featurize, forward_actor, forward_critic,
                                make_bundle)

__all__ = [
    "Adam", "AdamConfig", "BadMagic", "ChecksumMismatch", "CheckpointError", "Conv2D", "Dense",
    "FeatureSpec", "Flatten", "Layer", "Network", "NetworkSpec", "PolicyBundle", "ReLU",
    "ShapeMismatch", "Tanh", "Tape", "TruncatedFile", "VersionMismatch", "backward_and_step",
    "featurize", "forward_actor", "forward_critic", "load_checkpoint", "make_bundle",
    "save_checkpoint", "soft_update",
]
