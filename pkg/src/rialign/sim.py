"""Power sweeps of the full link: encode, propagate, add noise, decode.

Each sweep point fixes Q and lambda from P0, sends random integer symbols
for every message through the real channel, and decodes each receiver's
full integer vector jointly. Block errors count only the useful part.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .align import (
    AlignmentScheme,
    ReceiveModel,
    StreamAllocation,
    build_receive_model,
    design_scheme,
    encode,
    full_integer_vector,
    propagate,
    random_symbols,
    unit_allocation,
)
from .directions import DEFAULT_DIRECTION_CAP, direction_counts
from .errors import CapExceeded, ConfigError
from .lattice import (
    DEFAULT_DECODE_CAP,
    DEFAULT_ENUM_CAP,
    CodeParams,
    box_size,
    code_params_from_p0,
    decoder_for,
    error_prob_bound,
    error_rate,
    whitened_min_distance,
)
from .netmodel import NetworkConfig, config_hash, sample_channel

DEFAULT_P0_GRID = tuple(10.0**e for e in range(2, 9))
RELIABILITY_THRESHOLD = 0.1

CSV_COLUMNS = (
    "P0", "P", "receiver", "Q", "lam", "nu2", "G", "n_useful", "d_min", "union_bound",
    "rate", "slope_P0", "slope_P", "trials", "errors", "block_error", "ci_lo", "ci_hi",
)


@dataclass(frozen=True)
class ExperimentPlan:
    config: NetworkConfig
    n: int
    seed: int = 0
    allocation: StreamAllocation | None = None
    p0_grid: tuple[float, ...] = DEFAULT_P0_GRID
    epsilon: float = 0.1
    delta_slack: float | None = None
    trials: int = 2000
    decode_cap: int = DEFAULT_DECODE_CAP
    enum_cap: int = DEFAULT_ENUM_CAP
    direction_cap: int = DEFAULT_DIRECTION_CAP
    threads: int = 1
    with_distance: bool = True

    def __post_init__(self):
        grid = tuple(float(p) for p in self.p0_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("power grid must be non-empty and strictly increasing")
        if grid[0] <= 0:
            raise ConfigError("powers must be positive")
        if self.trials < 1 or self.threads < 1:
            raise ConfigError("trials and threads must be >= 1")
        object.__setattr__(self, "p0_grid", grid)


@dataclass(frozen=True)
class SweepRow:
    P0: float
    P: float
    receiver: int
    Q: int
    lam: float
    nu2: float
    G: int
    n_useful: int
    d_min: float | None
    union_bound: float | None
    rate: float
    slope_P0: float
    slope_P: float
    trials: int
    errors: int
    block_error: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True)
class SlopeFit:
    status: str
    slope: float | None
    stderr: float | None
    n_rows: int

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SlopeReport:
    config_hash: str
    seed: int
    n: int
    epsilon: float
    rows: tuple[SweepRow, ...]
    finite_n: dict = field(default_factory=dict)
    asymptotic: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# config_hash={self.config_hash} seed={self.seed} n={self.n} epsilon={self.epsilon}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            rec = asdict(r)
            rec["receiver"] += 1
            w.writerow([_fmt(rec[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "n": self.n,
            "epsilon": self.epsilon,
            "predictions": {
                "finite_n": {str(j + 1): str(v) for j, v in self.finite_n.items()},
                "asymptotic": {str(j + 1): str(v) for j, v in self.asymptotic.items()},
                "finite_n_formula": "n_useful * N_j / (G_j + N_j)",
            },
            "fits": {str(j + 1): {k: f.to_json() for k, f in v.items()} for j, v in self.fits.items()},
            "rows": len(self.rows),
        }


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


# ---------------------------------------------------------------------------
# predictions
# ---------------------------------------------------------------------------


def finite_n_prediction(N: int, D: int, D_ext: int) -> Fraction:
    """Per-user DoF N D / (D + D' + 1) of the finite-n scheme."""
    return Fraction(N * D, D + D_ext + 1)


def ic_finite_n_predictions(config: NetworkConfig, ns: Sequence[int]) -> list[Fraction]:
    out = []
    for n in ns:
        c = direction_counts(config, n)
        out.append(finite_n_prediction(config.N[0], c.D, c.D_ext))
    return out


def receiver_prediction(model: ReceiveModel) -> Fraction:
    """Useful symbols times the per-symbol DoF N_j / (G_j + N_j)."""
    return Fraction(model.n_useful * model.n_rows, model.G + model.n_rows)


def asymptotic_prediction(model: ReceiveModel, D: int, D_ext: int) -> Fraction:
    """Limit of :func:`receiver_prediction` as n grows.

    Useful columns scale like D and interference columns like D', and
    D'/D -> 1, so the limit is u N / (u + i) with u = useful / D and
    i = interference / D'.
    """
    N = model.n_rows
    u = Fraction(model.n_useful, D)
    i = Fraction(model.n_interference, D_ext)
    return u * N / (u + i)


# ---------------------------------------------------------------------------
# slope fitting
# ---------------------------------------------------------------------------


def slope_estimate(
    rates: Sequence[float],
    powers: Sequence[float],
    errors: Sequence[float],
    threshold: float = RELIABILITY_THRESHOLD,
) -> SlopeFit:
    """Least-squares slope of rate against 0.5 log P through the origin.

    Rows whose block error is at or above ``threshold`` are dropped; fewer
    than three remaining rows gives an inconclusive fit.
    """
    keep = [i for i, e in enumerate(errors) if e < threshold]
    if len(keep) < 3:
        return SlopeFit("inconclusive", None, None, len(keep))
    x = np.array([0.5 * math.log(powers[i]) for i in keep])
    y = np.array([rates[i] for i in keep], dtype=float)
    sxx = float(x @ x)
    c = float(x @ y) / sxx
    resid = y - c * x
    var = float(resid @ resid) / (len(x) - 1)
    return SlopeFit("ok", c, math.sqrt(var / sxx), len(keep))


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


def _params(plan: ExperimentPlan, scheme_nu2: float, w: int, P0: float) -> CodeParams:
    return code_params_from_p0(P0, plan.epsilon, w, scheme_nu2, plan.delta_slack)


def validate_plan(plan: ExperimentPlan, scheme: AlignmentScheme, models: list[ReceiveModel]) -> None:
    """Check every cap at the largest Q before anything runs."""
    w = max(m.G for m in models)
    params = _params(plan, scheme.nu2(), w, plan.p0_grid[-1])
    for m in models:
        size = box_size(params.Q * np.asarray(m.codebook_bounds))
        if size > plan.decode_cap:
            raise CapExceeded(
                f"receiver {m.receiver + 1}: codebook of {size} points at Q={params.Q} "
                f"exceeds the decoding cap {plan.decode_cap}"
            )
        if plan.with_distance:
            size = box_size(2 * params.Q * np.asarray(m.codebook_bounds))
            if size > plan.enum_cap:
                raise CapExceeded(
                    f"receiver {m.receiver + 1}: distance enumeration of {size} vectors at Q={params.Q} "
                    f"exceeds the enumeration cap {plan.enum_cap}"
                )


def _run_point(plan, scheme, models, w, i, P0) -> list[SweepRow]:
    params = _params(plan, scheme.nu2(), w, P0)
    rng = np.random.default_rng([int(plan.seed), 3, i])
    cfg = scheme.config
    decoders = [decoder_for(m, params, plan.decode_cap) for m in models]
    errors = [0] * len(models)
    batch = 2048
    done = 0
    while done < plan.trials:
        b = min(batch, plan.trials - done)
        truth = [np.empty((b, m.G), dtype=np.int64) for m in models]
        ys = [np.empty((b, m.n_rows)) for m in models]
        for t in range(b):
            sym = random_symbols(scheme, params.Q, params.lam, rng)
            xs = encode(scheme, sym)
            for a, m in enumerate(models):
                j = m.receiver
                y = propagate(scheme.channel, xs, j) + rng.standard_normal(cfg.N[j])
                ys[a][t] = m.W @ y
                truth[a][t] = full_integer_vector(m, sym)
        for a, m in enumerate(models):
            est = decoders[a].decode_batch(ys[a])
            u = m.n_useful
            errors[a] += int(np.any(est[:, :u] != truth[a][:, :u], axis=1).sum())
        done += b

    rows = []
    for a, m in enumerate(models):
        d_min = bound = None
        if plan.with_distance:
            d_min = whitened_min_distance(m, params, plan.enum_cap)
            bound = error_prob_bound(m.G, m.n_rows, params.Q, d_min, decoders[a].size).union
        rate = m.n_useful * math.log(2 * params.Q + 1)
        er = error_rate(errors[a], plan.trials)
        rows.append(
            SweepRow(
                P0=P0,
                P=params.P,
                receiver=m.receiver,
                Q=params.Q,
                lam=params.lam,
                nu2=params.nu2,
                G=m.G,
                n_useful=m.n_useful,
                d_min=d_min,
                union_bound=bound,
                rate=rate,
                slope_P0=rate / (0.5 * math.log(P0)),
                slope_P=rate / (0.5 * math.log(params.P)),
                trials=plan.trials,
                errors=er.errors,
                block_error=er.rate,
                ci_lo=er.ci_lo,
                ci_hi=er.ci_hi,
            )
        )
    return rows


def run_link_experiment(plan: ExperimentPlan) -> SlopeReport:
    cfg = plan.config
    alloc = plan.allocation or unit_allocation(cfg)
    channel = sample_channel(cfg, plan.seed)
    scheme = design_scheme(cfg, channel, plan.n, alloc, plan.seed, plan.direction_cap)
    models = [build_receive_model(scheme, j) for j in range(cfg.J)]
    validate_plan(plan, scheme, models)
    w = max(m.G for m in models)

    points = list(enumerate(plan.p0_grid))
    if plan.threads > 1:
        with ThreadPoolExecutor(plan.threads) as pool:
            chunks = list(pool.map(lambda ip: _run_point(plan, scheme, models, w, *ip), points))
    else:
        chunks = [_run_point(plan, scheme, models, w, i, P0) for i, P0 in points]
    rows = tuple(r for chunk in chunks for r in chunk)

    fits = {}
    for m in models:
        mine = [r for r in rows if r.receiver == m.receiver]
        errs = [r.block_error for r in mine]
        rates = [r.rate for r in mine]
        fits[m.receiver] = {
            "P0": slope_estimate(rates, [r.P0 for r in mine], errs),
            "P": slope_estimate(rates, [r.P for r in mine], errs),
        }
    return SlopeReport(
        config_hash=config_hash(cfg),
        seed=plan.seed,
        n=plan.n,
        epsilon=plan.epsilon,
        rows=rows,
        finite_n={m.receiver: receiver_prediction(m) for m in models},
        asymptotic={m.receiver: asymptotic_prediction(m, *_set_sizes(scheme, m.receiver)) for m in models},
        fits=fits,
    )


def _set_sizes(scheme: AlignmentScheme, j: int) -> tuple[int, int]:
    plan = scheme.plan
    tag = next((t for t in plan.tags if not isinstance(t, tuple) or t[0] == j), plan.tags[0])
    return len(plan.base[tag]), len(plan.ext[tag])


def report_json(report: SlopeReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True)
