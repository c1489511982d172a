"""Network configurations and constant channel sampling.

Indices are 0-based in memory. Everything that crosses the I/O boundary
(JSON configs, demand sets, CSV headers) is 1-based.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import jsonschema
import numpy as np

from .errors import ConfigError

__all__ = [
    "Kind",
    "NetworkConfig",
    "ChannelMatrix",
    "make_config",
    "sample_channel",
    "config_from_dict",
    "load_config",
    "config_hash",
    "CONFIG_SCHEMA",
]


class Kind(str, Enum):
    IC = "ic"
    GENERAL = "general"
    X = "x"


CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["ic", "general", "x"]},
        "K": {"type": "integer", "minimum": 1},
        "J": {"type": "integer", "minimum": 1},
        "M": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "N": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "demands": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer"}},
        },
        "seed": {"type": "integer", "minimum": 0},
    },
    "required": ["kind", "K", "J", "M", "N"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class NetworkConfig:
    """K transmitters, J receivers, antenna counts and message demands.

    ``demands[j]`` is the 0-based set of transmitters whose messages
    receiver ``j`` wants. For X networks it is empty: every (j, k) pair
    carries its own message.
    """

    kind: Kind
    K: int
    J: int
    M: tuple[int, ...]
    N: tuple[int, ...]
    demands: tuple[frozenset[int], ...] = ()

    def complement(self, j: int) -> frozenset[int]:
        """Transmitters whose signals are pure interference at receiver j."""
        if self.kind is Kind.X:
            raise ConfigError("X networks have no per-receiver demand complement")
        return frozenset(range(self.K)) - self.demands[j]

    @property
    def uniform(self) -> bool:
        return len(set(self.M)) == 1 and len(set(self.N)) == 1

    def to_dict(self, seed: int | None = None) -> dict:
        out: dict = {
            "kind": self.kind.value,
            "K": self.K,
            "J": self.J,
            "M": list(self.M),
            "N": list(self.N),
        }
        if self.kind is Kind.GENERAL:
            out["demands"] = [sorted(k + 1 for k in w) for w in self.demands]
        if seed is not None:
            out["seed"] = int(seed)
        return out


def make_config(
    kind: Kind | str,
    K: int,
    J: int,
    M: Sequence[int],
    N: Sequence[int],
    demands: Iterable[Iterable[int]] | None = None,
) -> NetworkConfig:
    """Validate and build a :class:`NetworkConfig`.

    ``demands`` uses 1-based transmitter indices and must be given exactly
    when ``kind`` is ``general``.
    """
    try:
        kind = Kind(kind)
    except ValueError as exc:
        raise ConfigError(f"unknown network kind {kind!r}") from exc
    if K < 1 or J < 1:
        raise ConfigError("K and J must be positive")
    M = tuple(int(m) for m in M)
    N = tuple(int(n) for n in N)
    if len(M) != K:
        raise ConfigError(f"M has {len(M)} entries, expected K={K}")
    if len(N) != J:
        raise ConfigError(f"N has {len(N)} entries, expected J={J}")
    if min(M) < 1 or min(N) < 1:
        raise ConfigError("antenna counts must be positive")

    if kind is Kind.GENERAL:
        if demands is None:
            raise ConfigError("general-demand networks need a demand set per receiver")
        sets = []
        for j, w in enumerate(demands):
            w = frozenset(int(k) - 1 for k in w)
            if not w:
                raise ConfigError(f"empty demand set at receiver {j + 1}")
            if min(w) < 0 or max(w) >= K:
                raise ConfigError(f"demand set of receiver {j + 1} is not within 1..{K}")
            sets.append(w)
        if len(sets) != J:
            raise ConfigError(f"got {len(sets)} demand sets, expected J={J}")
        return NetworkConfig(kind, K, J, M, N, tuple(sets))

    if demands is not None:
        raise ConfigError(f"demands are only accepted for general networks, not {kind.value}")
    if kind is Kind.IC:
        if J != K:
            raise ConfigError("IC requires J=K")
        return NetworkConfig(kind, K, J, M, N, tuple(frozenset([k]) for k in range(K)))
    return NetworkConfig(kind, K, J, M, N)


def config_from_dict(doc: dict) -> tuple[NetworkConfig, int]:
    """Parse a JSON config document into ``(config, seed)``."""
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema error: {exc.message}") from exc
    cfg = make_config(doc["kind"], doc["K"], doc["J"], doc["M"], doc["N"], doc.get("demands"))
    return cfg, int(doc.get("seed", 0))


def load_config(path) -> tuple[NetworkConfig, int]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(doc)


def config_hash(config: NetworkConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """All real channel coefficients; ``blocks[j][k]`` is H_{j,k} (N_j x M_k)."""

    config: NetworkConfig
    blocks: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        cfg = self.config
        if len(self.blocks) != cfg.J or any(len(row) != cfg.K for row in self.blocks):
            raise ConfigError("channel block layout does not match the config")
        for j, row in enumerate(self.blocks):
            for k, blk in enumerate(row):
                if blk.shape != (cfg.N[j], cfg.M[k]):
                    raise ConfigError(f"H[{j + 1},{k + 1}] has shape {blk.shape}")
                if not np.all(np.isfinite(blk)) or np.any(blk == 0):
                    raise ConfigError(f"H[{j + 1},{k + 1}] has zero or non-finite entries")
                blk.setflags(write=False)

    def h(self, j: int, k: int, r: int, t: int) -> float:
        return float(self.blocks[j][k][r, t])

    def full(self) -> np.ndarray:
        """The stacked (sum N_j) x (sum M_k) block matrix."""
        return np.block([list(row) for row in self.blocks])

    def __eq__(self, other):
        if not isinstance(other, ChannelMatrix):
            return NotImplemented
        return self.config == other.config and np.array_equal(self.full(), other.full())


def sample_channel(config: NetworkConfig, seed: int) -> ChannelMatrix:
    """Draw i.i.d. coefficients: magnitude U[0.5, 2], independent random sign."""
    rng = np.random.default_rng([int(seed), 0])
    blocks = []
    for j in range(config.J):
        row = []
        for k in range(config.K):
            shape = (config.N[j], config.M[k])
            mag = rng.uniform(0.5, 2.0, size=shape)
            sign = rng.choice(np.array([-1.0, 1.0]), size=shape)
            row.append(mag * sign)
        blocks.append(tuple(row))
    return ChannelMatrix(config, tuple(blocks))
