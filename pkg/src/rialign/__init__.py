"""Real interference alignment with joint receive-antenna processing."""

from .errors import AlignmentViolation, CapExceeded, ConfigError
from .netmodel import ChannelMatrix, Kind, NetworkConfig, load_config, make_config, sample_channel

__all__ = [
    "AlignmentViolation",
    "CapExceeded",
    "ConfigError",
    "ChannelMatrix",
    "Kind",
    "NetworkConfig",
    "load_config",
    "make_config",
    "sample_channel",
]
