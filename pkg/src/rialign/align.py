"""Stream allocation, transmit encoding and per-receiver lattice models.

Message identifiers: transmitter index ``k`` for IC and general-demand
networks, ``(j, k)`` for X networks. Stream tags: ``l`` for IC/general,
``(j, l)`` for X. All indices are 0-based.

Symbol layout for a message from transmitter ``k`` is an integer array of
shape ``(M_k, S)`` where ``S = dbar * D`` runs stream-major, then direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Mapping, Sequence

import numpy as np

from .directions import (
    DEFAULT_DIRECTION_CAP,
    DirectionSet,
    build_direction_set,
    draw_deltas,
    generator_index,
)
from .errors import AlignmentViolation, CapExceeded, ConfigError
from .netmodel import ChannelMatrix, Kind, NetworkConfig

DEFAULT_COLUMN_CAP = 1_000_000


# ---------------------------------------------------------------------------
# stream allocation
# ---------------------------------------------------------------------------


def as_rational(x) -> Fraction:
    if isinstance(x, bool) or isinstance(x, float):
        raise TypeError(f"DoF entries must be exact rationals, got {type(x).__name__} {x!r}")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"DoF entries must be exact rationals, got {type(x).__name__}")


@dataclass(frozen=True)
class StreamAllocation:
    """Integer stream counts dbar = rho * d / M with the least such rho."""

    rho: int
    dbar: tuple
    dof_point: tuple

    def streams(self, msg) -> int:
        if isinstance(msg, tuple):
            j, k = msg
            return self.dbar[j][k]
        return self.dbar[msg]


def allocate_streams(config: NetworkConfig, dof_point) -> StreamAllocation:
    """Least rho making every rho * d / M_k a non-negative integer.

    ``dof_point`` is a length-K vector (IC/general) or a J x K nested
    sequence (X network) of ints, Fractions or "p/q" strings.
    """
    if config.kind is Kind.X:
        point = tuple(tuple(as_rational(x) for x in row) for row in dof_point)
        if len(point) != config.J or any(len(row) != config.K for row in point):
            raise ConfigError("X-network DoF point must be J x K")
        flat = [(d, config.M[k]) for row in point for k, d in enumerate(row)]
    else:
        point = tuple(as_rational(x) for x in dof_point)
        if len(point) != config.K:
            raise ConfigError("DoF point must have K entries")
        flat = [(d, config.M[k]) for k, d in enumerate(point)]
    if any(d < 0 for d, _ in flat):
        raise ValueError("DoF entries must be non-negative")
    rho = 1
    for d, m in flat:
        rho = math.lcm(rho, (d / m).denominator)

    def bar(d, m):
        v = rho * d / m
        assert v.denominator == 1
        return int(v)

    if config.kind is Kind.X:
        dbar = tuple(tuple(bar(d, config.M[k]) for k, d in enumerate(row)) for row in point)
    else:
        dbar = tuple(bar(d, config.M[k]) for k, d in enumerate(point))
    return StreamAllocation(rho, dbar, point)


def unit_allocation(config: NetworkConfig) -> StreamAllocation:
    """One stream per message (the single-stream scheme)."""
    if config.kind is Kind.X:
        point = tuple(tuple(Fraction(1, config.M[k]) for k in range(config.K)) for _ in range(config.J))
    else:
        point = tuple(Fraction(1, m) for m in config.M)
    return allocate_streams(config, point)


# ---------------------------------------------------------------------------
# message bookkeeping (exponent level, no channel needed)
# ---------------------------------------------------------------------------


def messages(config: NetworkConfig) -> list:
    if config.kind is Kind.X:
        return [(j, k) for j in range(config.J) for k in range(config.K)]
    return list(range(config.K))


def transmitter_of(msg) -> int:
    return msg[1] if isinstance(msg, tuple) else msg


def stream_tag(config: NetworkConfig, msg, l: int):
    return (msg[0], l) if config.kind is Kind.X else l


def useful_messages(config: NetworkConfig, j: int) -> list:
    if config.kind is Kind.X:
        return [(j, k) for k in range(config.K)]
    return sorted(config.demands[j])


def interfering_messages(config: NetworkConfig, j: int) -> list:
    if config.kind is Kind.X:
        return [(jh, k) for jh in range(config.J) if jh != j for k in range(config.K)]
    return sorted(config.complement(j))


def aligned_groups(config: NetworkConfig, alloc: StreamAllocation, j: int) -> list[tuple]:
    """Aligned interference groups at receiver j as ``(group_id, tags)``.

    IC/general: one group, stream tags up to the largest interfering stream
    count. X: one group per other receiver jh, with tags (jh, l).
    """
    if config.kind is Kind.X:
        out = []
        for jh in range(config.J):
            if jh == j:
                continue
            L = max(alloc.dbar[jh])
            if L:
                out.append((jh, [(jh, l) for l in range(L)]))
        return out
    L = max((alloc.dbar[k] for k in interfering_messages(config, j)), default=0)
    return [(None, list(range(L)))] if L else []


def all_stream_tags(config: NetworkConfig, alloc: StreamAllocation) -> list:
    if config.kind is Kind.X:
        return [(j, l) for j in range(config.J) for l in range(max(alloc.dbar[j]))]
    return list(range(max(alloc.dbar)))


@dataclass(frozen=True)
class DirectionPlan:
    """Exponent-level scheme: base and extended sets per stream tag."""

    config: NetworkConfig
    n: int
    allocation: StreamAllocation
    base: dict
    ext: dict

    @property
    def tags(self) -> list:
        return list(self.base)


def plan_directions(
    config: NetworkConfig,
    n: int,
    allocation: StreamAllocation | None = None,
    cap: int = DEFAULT_DIRECTION_CAP,
) -> DirectionPlan:
    alloc = allocation or unit_allocation(config)
    base, ext = {}, {}
    gens_cache = {}
    for tag in all_stream_tags(config, alloc):
        target = tag[0] if config.kind is Kind.X else None
        if target not in gens_cache:
            gens_cache[target] = generator_index(config, target)
        gens = gens_cache[target]
        base[tag] = build_direction_set(gens, n, delta_tag=tag, cap=cap)
        ext[tag] = build_direction_set(gens, n, extended=True, delta_tag=tag, cap=cap)
    return DirectionPlan(config, n, alloc, base, ext)


def route_through_generator(base: DirectionSet, ext: DirectionSet, coord) -> tuple[np.ndarray, np.ndarray]:
    """Multiply every base monomial by generator ``coord`` and look it up in ``ext``.

    Returns ``(index, ok)``: the extended-set index of each product and a
    mask of exact membership (exponent vector and delta power both equal).
    """
    D = len(base)
    p = base.generators.position(coord)
    if p < 0 or base.generators != ext.generators:
        return np.full(D, -1), np.zeros(D, dtype=bool)
    prod = base.exponents.copy()
    prod[:, p] += 1
    radix = ext.bound + 1
    E = prod.shape[1]
    in_box = (prod <= ext.bound).all(axis=1)
    weights = radix ** np.arange(E - 1, -1, -1, dtype=np.int64)
    idx = np.where(in_box, prod @ weights, -1)
    safe = np.clip(idx, 0, len(ext) - 1)
    ok = (
        in_box
        & (ext.exponents[safe] == prod).all(axis=1)
        & (ext.delta_exponents[safe] == base.delta_exponents)
    )
    return np.where(ok, idx, -1), ok


@dataclass(frozen=True)
class AlignmentReport:
    receiver: int
    checked: int
    violations: tuple
    occupied: dict
    capacity: dict

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "receiver": self.receiver + 1,
            "checked": self.checked,
            "violations": [list(v) for v in self.violations],
            "occupied": {str(k): v for k, v in self.occupied.items()},
            "capacity": {str(k): v for k, v in self.capacity.items()},
        }


def _group_of(config, tag):
    return tag[0] if config.kind is Kind.X else None


def verify_alignment(plan: DirectionPlan, j: int) -> AlignmentReport:
    """Certify that all interference at receiver j lands in extended sets.

    Every interfering message, stream, and cross generator (r, t) is
    checked by exact exponent lookup. Violations are reported as 1-based
    ``(j, k, r, t, l, alpha)`` tuples.
    """
    cfg, alloc = plan.config, plan.allocation
    checked = 0
    violations = []
    occupied_sets: dict = {}
    for msg in interfering_messages(cfg, j):
        k = transmitter_of(msg)
        for l in range(alloc.streams(msg)):
            tag = stream_tag(cfg, msg, l)
            base, ext = plan.base[tag], plan.ext[tag]
            for r in range(cfg.N[j]):
                for t in range(cfg.M[k]):
                    idx, ok = route_through_generator(base, ext, (j, k, r, t))
                    checked += len(ok)
                    for i in np.flatnonzero(~ok):
                        alpha = tuple(int(a) for a in base.exponents[i])
                        violations.append((j + 1, k + 1, r + 1, t + 1, l + 1, alpha))
                    key = (_group_of(cfg, tag), r)
                    occupied_sets.setdefault(key, set()).update((tag, int(x)) for x in idx[ok])
    occupied, capacity = {}, {}
    for gid, tags in aligned_groups(cfg, alloc, j):
        occupied[gid] = max((len(s) for (g, _), s in occupied_sets.items() if g == gid), default=0)
        capacity[gid] = sum(len(plan.ext[t]) for t in tags)
    return AlignmentReport(j, checked, tuple(violations), occupied, capacity)


# ---------------------------------------------------------------------------
# evaluated scheme
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AlignmentScheme:
    """A direction plan evaluated on a channel with drawn delta constants."""

    plan: DirectionPlan
    channel: ChannelMatrix
    seed: int
    deltas: dict
    base_values: dict
    ext_values: dict

    @property
    def config(self) -> NetworkConfig:
        return self.plan.config

    @property
    def allocation(self) -> StreamAllocation:
        return self.plan.allocation

    def message_directions(self, msg) -> np.ndarray:
        """Transmit direction vector of a message: delta_l T_l for each stream."""
        cfg = self.config
        vecs = [self.base_values[stream_tag(cfg, msg, l)] for l in range(self.allocation.streams(msg))]
        return np.concatenate(vecs) if vecs else np.zeros(0)

    def symbol_count(self, msg) -> int:
        return self.message_directions(msg).size

    def nu2(self) -> float:
        """Largest per-antenna sum of squared transmit directions."""
        cfg = self.config
        per_tx = np.zeros(cfg.K)
        for msg in messages(cfg):
            per_tx[transmitter_of(msg)] += float(np.sum(self.message_directions(msg) ** 2))
        return float(per_tx.max())


def design_scheme(
    config: NetworkConfig,
    channel: ChannelMatrix,
    n: int,
    allocation: StreamAllocation | None = None,
    seed: int = 0,
    cap: int = DEFAULT_DIRECTION_CAP,
) -> AlignmentScheme:
    plan = plan_directions(config, n, allocation, cap)
    deltas = draw_deltas(plan.tags, seed)
    base_values = {t: s.values(channel, deltas) for t, s in plan.base.items()}
    ext_values = {t: s.values(channel, deltas) for t, s in plan.ext.items()}
    return AlignmentScheme(plan, channel, int(seed), deltas, base_values, ext_values)


@dataclass(frozen=True)
class SymbolVector:
    """Integer symbols per message, shape (M_k, dbar * D), all in [-Q, Q]."""

    ints: Mapping[Hashable, np.ndarray]
    Q: int
    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        for msg, q in self.ints.items():
            if q.size and int(np.abs(q).max()) > self.Q:
                raise ValueError(f"symbols of message {msg!r} exceed Q={self.Q}")


def random_symbols(scheme: AlignmentScheme, Q: int, lam: float, rng: np.random.Generator) -> SymbolVector:
    cfg = scheme.config
    ints = {}
    for msg in messages(cfg):
        shape = (cfg.M[transmitter_of(msg)], scheme.symbol_count(msg))
        ints[msg] = rng.integers(-Q, Q + 1, size=shape)
    return SymbolVector(ints, Q, lam)


def encode_antenna(directions: np.ndarray, ints: np.ndarray, lam: float) -> float:
    """Transmit value of one antenna: directions . (lam * ints)."""
    directions = np.asarray(directions, dtype=float)
    ints = np.asarray(ints)
    if directions.shape != ints.shape:
        raise ValueError(f"direction/symbol shape mismatch {directions.shape} vs {ints.shape}")
    return float(lam * (directions @ ints))


def encode(scheme: AlignmentScheme, symbols: SymbolVector) -> list[np.ndarray]:
    """Transmit vectors x_k (length M_k); X messages are summed per transmitter."""
    cfg = scheme.config
    xs = [np.zeros(m) for m in cfg.M]
    for msg in messages(cfg):
        k = transmitter_of(msg)
        q = symbols.ints[msg]
        T = scheme.message_directions(msg)
        if q.shape != (cfg.M[k], T.size):
            raise ValueError(f"message {msg!r}: symbols shape {q.shape}, expected {(cfg.M[k], T.size)}")
        for t in range(cfg.M[k]):
            xs[k][t] += encode_antenna(T, q[t], symbols.lam)
    return xs


def propagate(channel: ChannelMatrix, xs: Sequence[np.ndarray], j: int) -> np.ndarray:
    """Noiseless physical receive signal sum_k H_{j,k} x_k."""
    return sum(channel.blocks[j][k] @ xs[k] for k in range(channel.config.K))


# ---------------------------------------------------------------------------
# receive model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReceiveModel:
    """Generator matrix of the noiseless receive lattice at one receiver.

    ``A = W @ A0`` where ``A0 = [useful | blockdiag(T', ..., T')]``.
    ``column_bounds`` holds per-column integer radii in units of Q: 1 for
    useful columns, and for interference columns the number of transmitted
    symbols that can add up on that monomial (at least 1).
    ``codebook_bounds`` is the same without the floor at 1: interference
    columns that no symbol reaches are pinned to zero, which is the set the
    ML decoder actually searches.
    """

    receiver: int
    A: np.ndarray
    A0: np.ndarray
    W: np.ndarray
    useful_spans: tuple
    interference_spans: tuple
    n_useful: int
    n_interference: int
    column_bounds: np.ndarray
    codebook_bounds: np.ndarray
    scatter: dict = field(repr=False)
    redraws: int = 0

    @property
    def G(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def noise_cov(self) -> np.ndarray:
        return self.W @ self.W.T

    def to_csv(self) -> str:
        """Dense row-major dump with a commented header of 1-based spans."""
        lines = [f"# receiver={self.receiver + 1} rows={self.n_rows} G={self.G}"]
        for msg, a, b in self.useful_spans:
            lines.append(f"# useful {_msg_label(msg)} columns {a + 1}-{b}")
        for gid, r, a, b in self.interference_spans:
            label = "aligned" if gid is None else f"aligned rx{gid + 1}"
            lines.append(f"# {label} antenna {r + 1} columns {a + 1}-{b}")
        for row in self.A:
            lines.append(",".join(repr(float(x)) for x in row))
        return "\n".join(lines) + "\n"


def _msg_label(msg) -> str:
    if isinstance(msg, tuple):
        return f"x{msg[0] + 1},{msg[1] + 1}"
    return f"x{msg + 1}"


def draw_weighting(N: int, seed: int, j: int, tol: float = 1e-9) -> tuple[np.ndarray, int]:
    """Unit-diagonal W with off-diagonal gamma ~ U[1/2, 1]; redraws singular ones."""
    rng = np.random.default_rng([int(seed), 2, int(j)])
    redraws = 0
    while True:
        W = rng.uniform(0.5, 1.0, size=(N, N))
        np.fill_diagonal(W, 1.0)
        if abs(np.linalg.det(W)) > tol:
            return W, redraws
        redraws += 1


def expected_columns(config: NetworkConfig, plan: DirectionPlan, j: int) -> int:
    """Column count G_j from the closed-form bookkeeping."""
    alloc = plan.allocation
    useful = 0
    for msg in useful_messages(config, j):
        k = transmitter_of(msg)
        d = alloc.streams(msg)
        if d:
            useful += config.M[k] * d * len(plan.base[stream_tag(config, msg, 0)])
    interference = 0
    for _, tags in aligned_groups(config, alloc, j):
        interference += config.N[j] * len(tags) * len(plan.ext[tags[0]])
    return useful + interference


def build_receive_model(
    scheme: AlignmentScheme,
    j: int,
    *,
    weighting: bool = True,
    cap: int = DEFAULT_COLUMN_CAP,
) -> ReceiveModel:
    cfg, plan, H = scheme.config, scheme.plan, scheme.channel
    alloc = plan.allocation
    Nj = cfg.N[j]
    G = expected_columns(cfg, plan, j)
    if G > cap:
        raise CapExceeded(f"receiver {j + 1} needs G={G} columns, cap is {cap}")

    cols = []
    useful_spans = []
    start = 0
    for msg in useful_messages(cfg, j):
        k = transmitter_of(msg)
        T = scheme.message_directions(msg)
        if not T.size:
            continue
        Hjk = H.blocks[j][k]
        block = np.empty((Nj, cfg.M[k] * T.size))
        for t in range(cfg.M[k]):
            block[:, t * T.size:(t + 1) * T.size] = Hjk[:, t:t + 1] * T[None, :]
        cols.append(block)
        useful_spans.append((msg, start, start + block.shape[1]))
        start += block.shape[1]
    n_useful = start

    # one copy of the stacked extended vector per receive antenna
    groups = aligned_groups(cfg, alloc, j)
    tag_offset = {}
    width = 0
    for _, tags in groups:
        for tag in tags:
            tag_offset[tag] = width
            width += len(plan.ext[tag])
    stacked = (
        np.concatenate([scheme.ext_values[tag] for _, tags in groups for tag in tags])
        if groups else np.zeros(0)
    )
    interference = np.zeros((Nj, Nj * width))
    interference_spans = []
    for r in range(Nj):
        interference[r, r * width:(r + 1) * width] = stacked
        off = n_useful + r * width
        for gid, tags in groups:
            span = sum(len(plan.ext[t]) for t in tags)
            a = off + tag_offset[tags[0]]
            interference_spans.append((gid, r, a, a + span))
    cols.append(interference)
    A0 = np.concatenate(cols, axis=1) if cols else np.zeros((Nj, 0))

    # integer routing of every interfering symbol onto its aligned column
    scatter = {}
    multiplicity = np.zeros(Nj * width, dtype=np.int64)
    for msg in interfering_messages(cfg, j):
        k = transmitter_of(msg)
        d = alloc.streams(msg)
        if not d:
            continue
        D = len(plan.base[stream_tag(cfg, msg, 0)])
        target = np.empty((Nj, cfg.M[k], d * D), dtype=np.int64)
        for l in range(d):
            tag = stream_tag(cfg, msg, l)
            for r in range(Nj):
                for t in range(cfg.M[k]):
                    idx, ok = route_through_generator(plan.base[tag], plan.ext[tag], (j, k, r, t))
                    if not ok.all():
                        bad = int(np.flatnonzero(~ok)[0])
                        alpha = tuple(int(a) for a in plan.base[tag].exponents[bad])
                        raise AlignmentViolation(
                            f"interference monomial (j={j + 1}, k={k + 1}, r={r + 1}, "
                            f"t={t + 1}, l={l + 1}, alpha={alpha}) is not in the extended set"
                        )
                    target[r, t, l * D:(l + 1) * D] = r * width + tag_offset[tag] + idx
        np.add.at(multiplicity, target.ravel(), 1)
        scatter[msg] = target

    if weighting and Nj > 1:
        W, redraws = draw_weighting(Nj, scheme.seed, j)
    else:
        W, redraws = np.eye(Nj), 0
    A = W @ A0
    bounds = np.concatenate([np.ones(n_useful, dtype=np.int64), np.maximum(multiplicity, 1)])
    support = np.concatenate([np.ones(n_useful, dtype=np.int64), multiplicity])
    for arr in (A, A0, W, bounds, support):
        arr.setflags(write=False)
    return ReceiveModel(
        receiver=j,
        A=A,
        A0=A0,
        W=W,
        useful_spans=tuple(useful_spans),
        interference_spans=tuple(interference_spans),
        n_useful=n_useful,
        n_interference=Nj * width,
        column_bounds=bounds,
        codebook_bounds=support,
        scatter=scatter,
        redraws=redraws,
    )


def full_integer_vector(model: ReceiveModel, symbols: SymbolVector) -> np.ndarray:
    """Joint integer vector [useful; aligned interference] seen by the receiver."""
    useful = [np.asarray(symbols.ints[msg]).ravel() for msg, _, _ in model.useful_spans]
    u = np.concatenate(useful) if useful else np.zeros(0, dtype=np.int64)
    z = np.zeros(model.n_interference, dtype=np.int64)
    for msg, target in model.scatter.items():
        q = np.asarray(symbols.ints[msg])
        np.add.at(z, target.ravel(), np.broadcast_to(q[None], target.shape).ravel())
    return np.concatenate([u.astype(np.int64), z])


def useful_part(model: ReceiveModel, full: np.ndarray) -> np.ndarray:
    return np.asarray(full)[: model.n_useful]
