"""Monomial transmit directions as exact integer exponent vectors.

A direction is a monomial in the cross-link channel coefficients times a
power of a per-stream constant delta. Membership and alignment logic only
ever compares exponent vectors; floats appear when a set is evaluated on a
concrete channel.

Generator order is lexicographic on 0-based (j, k, r, t). Directions in a
set are listed in lexicographic order of their exponent vectors, which is
also the order of ``itertools.product(range(radix), repeat=E)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, NamedTuple, Sequence

import numpy as np

from .errors import CapExceeded, ConfigError
from .netmodel import ChannelMatrix, Kind, NetworkConfig

DEFAULT_DIRECTION_CAP = 100_000

Coord = tuple[int, int, int, int]


@dataclass(frozen=True)
class GeneratorIndex:
    """Ordered channel coordinates that act as monomial generators."""

    coords: tuple[Coord, ...]
    _pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if list(self.coords) != sorted(self.coords) or len(set(self.coords)) != len(self.coords):
            raise ValueError("generator coordinates must be strictly increasing")
        object.__setattr__(self, "_pos", {c: i for i, c in enumerate(self.coords)})

    def __len__(self) -> int:
        return len(self.coords)

    def position(self, coord: Coord) -> int:
        """Index of ``coord`` in the list, or -1 when it is not a generator."""
        return self._pos.get(tuple(coord), -1)

    def channel_vector(self, channel: ChannelMatrix) -> np.ndarray:
        return np.array([channel.blocks[j][k][r, t] for j, k, r, t in self.coords], dtype=float)


def generator_index(config: NetworkConfig, receiver: int | None = None) -> GeneratorIndex:
    """Generators for ``config``.

    IC: every cross link (j, k), k != j. General demand: every (j, k) with
    k outside the demand set of j. X network: every link into a receiver
    other than ``receiver`` (the target of the streams).
    """
    if config.kind is Kind.X:
        if receiver is None:
            raise ConfigError("X-network generators depend on the target receiver")
        links = [(j, k) for j in range(config.J) if j != receiver for k in range(config.K)]
    elif config.kind is Kind.IC:
        links = [(j, k) for j in range(config.K) for k in range(config.K) if k != j]
    else:
        links = [(j, k) for j in range(config.J) for k in sorted(config.complement(j))]
    coords = tuple(
        (j, k, r, t) for j, k in links for r in range(config.N[j]) for t in range(config.M[k])
    )
    return GeneratorIndex(coords)


class DirectionCounts(NamedTuple):
    E: int
    D: int
    D_ext: int


def direction_counts(config: NetworkConfig, n: int, receiver: int | None = None) -> DirectionCounts:
    """Generator count E with D = n**E and D' = (n+1)**E as exact integers.

    For X networks the counts belong to the streams aimed at ``receiver``
    (receiver 0 when omitted).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if config.kind is Kind.X and receiver is None:
        receiver = 0
    E = len(generator_index(config, receiver))
    return DirectionCounts(E, n**E, (n + 1) ** E)


@dataclass(frozen=True)
class Direction:
    exponents: tuple[int, ...]
    delta_tag: Hashable | None = None
    delta_exponent: int = 0

    def to_json(self) -> dict:
        return {
            "exponents": list(self.exponents),
            "delta_tag": _tag_to_json(self.delta_tag),
            "delta_exponent": self.delta_exponent,
        }


def _tag_to_json(tag):
    if tag is None:
        return None
    if isinstance(tag, tuple):
        return [int(x) + 1 for x in tag]
    return int(tag) + 1


def _box(E: int, radix: int) -> np.ndarray:
    """All vectors in {0..radix-1}^E, lexicographic."""
    size = radix**E
    idx = np.arange(size, dtype=np.int64)
    weights = radix ** np.arange(E - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // weights[None, :]) % radix


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """A full box of monomials: base (exponents <= n-1) or extended (<= n).

    ``standalone`` adds one extra power of delta on top of the sum of the
    channel exponents; transmitted directions carry it, extended
    (alignment) sets do not.
    """

    generators: GeneratorIndex
    n: int
    extended: bool
    delta_tag: Hashable | None
    exponents: np.ndarray
    delta_exponents: np.ndarray
    standalone: bool

    @property
    def bound(self) -> int:
        return self.n if self.extended else self.n - 1

    def __len__(self) -> int:
        return self.exponents.shape[0]

    def __getitem__(self, i: int) -> Direction:
        return Direction(
            tuple(int(a) for a in self.exponents[i]), self.delta_tag, int(self.delta_exponents[i])
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def index_of(self, exponents: Sequence[int], delta_exponent: int | None = None) -> int:
        """Exact lookup of a monomial; -1 if it is not a member."""
        a = np.asarray(exponents, dtype=np.int64)
        if a.shape != (len(self.generators),) or a.min(initial=0) < 0 or a.max(initial=0) > self.bound:
            return -1
        radix = self.bound + 1
        i = 0
        for x in a:
            i = i * radix + int(x)
        if not np.array_equal(self.exponents[i], a):
            return -1
        if delta_exponent is not None and int(self.delta_exponents[i]) != delta_exponent:
            return -1
        return i

    def values(self, channel: ChannelMatrix, deltas: dict | None = None) -> np.ndarray:
        """Evaluate every monomial on ``channel``."""
        h = self.generators.channel_vector(channel)
        with np.errstate(over="ignore", under="ignore"):
            vals = np.prod(h[None, :] ** self.exponents, axis=1)
            if self.delta_tag is not None:
                vals = vals * _delta(deltas, self.delta_tag) ** self.delta_exponents
        bad = ~np.isfinite(vals) | (vals == 0)
        if bad.any():
            i = int(np.argmax(bad))
            raise OverflowError(
                f"direction {i} (exponent sum {int(self.exponents[i].sum())}) "
                "is outside double range"
            )
        return vals

    def to_json(self) -> list[dict]:
        return [d.to_json() for d in self]


def _delta(deltas, tag) -> float:
    if deltas is None or tag not in deltas:
        raise KeyError(f"no delta value for stream tag {tag!r}")
    return float(deltas[tag])


def build_direction_set(
    generators: GeneratorIndex,
    n: int,
    *,
    extended: bool = False,
    delta_tag: Hashable | None = None,
    standalone: bool | None = None,
    cap: int = DEFAULT_DIRECTION_CAP,
) -> DirectionSet:
    if n < 1:
        raise ValueError("n must be >= 1")
    E = len(generators)
    D, D_ext = n**E, (n + 1) ** E
    if D + D_ext > cap:
        raise CapExceeded(f"D={D} and D'={D_ext} exceed the direction cap {cap} (D + D' > cap)")
    if standalone is None:
        standalone = not extended and delta_tag is not None
    radix = n + 1 if extended else n
    exps = _box(E, radix)
    dexp = exps.sum(axis=1) + (1 if standalone else 0)
    if delta_tag is None:
        dexp = np.zeros_like(dexp)
    exps.setflags(write=False)
    dexp.setflags(write=False)
    return DirectionSet(generators, n, extended, delta_tag, exps, dexp, bool(standalone))


def build_directions(
    config: NetworkConfig,
    n: int,
    n_streams: int,
    *,
    extended: bool = False,
    receiver: int | None = None,
    cap: int = DEFAULT_DIRECTION_CAP,
) -> list[DirectionSet]:
    """One direction set per stream index l (tags l, or (receiver, l) for X)."""
    if n_streams < 1:
        raise ValueError("stream count must be >= 1")
    gens = generator_index(config, receiver)
    sets = []
    for l in range(n_streams):
        tag = (receiver, l) if config.kind is Kind.X else l
        sets.append(build_direction_set(gens, n, extended=extended, delta_tag=tag, cap=cap))
    return sets


def draw_deltas(tags, seed: int) -> dict:
    """delta ~ U[1/2, 1] per stream tag, reproducible per (seed, tag)."""
    out = {}
    for tag in tags:
        key = list(tag) if isinstance(tag, tuple) else [tag]
        rng = np.random.default_rng([int(seed), 1, *[int(x) for x in key]])
        out[tag] = float(rng.uniform(0.5, 1.0))
    return out


def eval_direction(
    d: Direction, generators: GeneratorIndex, channel: ChannelMatrix, deltas: dict | None = None
) -> float:
    """prod h^alpha over the generators times delta^delta_exponent."""
    if len(d.exponents) != len(generators):
        raise ValueError("exponent vector does not match the generator index")
    val = 1.0
    for a, (j, k, r, t) in zip(d.exponents, generators.coords):
        if a:
            val *= float(channel.blocks[j][k][r, t]) ** a
    if d.delta_tag is not None and d.delta_exponent:
        val *= _delta(deltas, d.delta_tag) ** d.delta_exponent
    if not np.isfinite(val) or val == 0.0:
        raise OverflowError(f"monomial with exponent sum {sum(d.exponents)} is outside double range")
    return val
