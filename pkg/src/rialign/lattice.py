"""Integer-lattice constellations over a receive model.

Codewords are integer vectors in a box around the origin, scaled by
lambda and mapped through A. Everything here works with exhaustive
enumeration and is meant for desk-scale instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree
from scipy.stats import binomtest

from .errors import CapExceeded

DEFAULT_ENUM_CAP = 10**8
DEFAULT_DECODE_CAP = 10**6

# guards floor() against P0**x landing a hair under an integer
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class CodeParams:
    """Constellation radius Q and scaling lambda for per-antenna power P.

    P0 = P / nu2 is the power per integer symbol, Q = floor(P0^((1-eps)/(2(1+w))))
    (at least 1) and lambda = sqrt(P0) / Q.
    """

    P: float
    P0: float
    epsilon: float
    delta_slack: float
    w: float
    Q: int
    lam: float
    nu2: float

    def to_json(self) -> dict:
        return asdict(self)


def max_delta_slack(epsilon: float, w: float) -> float:
    return epsilon * (1 + w) / (1 - epsilon)


def choose_code_params(
    P: float, epsilon: float, w: float, nu2: float = 1.0, delta_slack: float | None = None
) -> CodeParams:
    if P <= 0 or nu2 <= 0:
        raise ValueError("P and nu2 must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if w <= 0:
        raise ValueError("w must be positive")
    hi = max_delta_slack(epsilon, w)
    if delta_slack is None:
        delta_slack = hi / 2
    if not 0 < delta_slack < hi:
        raise ValueError(f"delta slack must lie in (0, {hi:g}) for epsilon={epsilon}, w={w}")
    P0 = P / nu2
    Q = max(1, math.floor(P0 ** ((1 - epsilon) / (2 * (1 + w))) + _FLOOR_EPS))
    lam = math.sqrt(P0) / Q
    assert lam * lam * Q * Q * nu2 <= P * (1 + 1e-12)
    return CodeParams(P, P0, epsilon, delta_slack, w, Q, lam, nu2)


def code_params_from_p0(P0: float, epsilon: float, w: float, nu2: float = 1.0, delta_slack=None) -> CodeParams:
    return choose_code_params(P0 * nu2, epsilon, w, nu2, delta_slack)


# ---------------------------------------------------------------------------
# minimum distance
# ---------------------------------------------------------------------------


def box_size(radii: Sequence[int]) -> int:
    return math.prod(2 * int(r) + 1 for r in radii)


def box_vectors(radii: Sequence[int]) -> np.ndarray:
    """All integer vectors with |q_i| <= radii[i], lexicographic order."""
    radii = np.asarray(radii, dtype=np.int64)
    sizes = 2 * radii + 1
    total = int(np.prod(sizes)) if len(sizes) else 1
    idx = np.arange(total, dtype=np.int64)
    return box_index_to_vector(idx, radii)


def box_index_to_vector(idx: np.ndarray, radii: Sequence[int]) -> np.ndarray:
    radii = np.asarray(radii, dtype=np.int64)
    sizes = 2 * radii + 1
    out = np.empty((len(idx), len(radii)), dtype=np.int64)
    rest = np.asarray(idx, dtype=np.int64).copy()
    for c in range(len(radii) - 1, -1, -1):
        out[:, c] = rest % sizes[c] - radii[c]
        rest //= sizes[c]
    return out


def _shortest_nonzero(A: np.ndarray, radii: np.ndarray) -> tuple[float, np.ndarray]:
    """min ||A q|| over nonzero q in the box, by meet-in-the-middle.

    Columns are split in two halves; all partial sums of the second half go
    into a KD-tree and every partial sum of the first half queries its
    exact nearest neighbour at the negated point.
    """
    m = A.shape[1]
    live = np.flatnonzero(radii > 0)
    q_best = np.zeros(m, dtype=np.int64)
    if live.size == 0:
        return math.inf, q_best
    A = A[:, live]
    radii = radii[live]
    sizes = 2 * radii + 1
    logs = np.cumsum(np.log(sizes))
    split = int(np.argmin(np.maximum(logs, logs[-1] - logs))) + 1
    if split >= len(radii):
        split = len(radii) - 1
    Q1, Q2 = box_vectors(radii[:split]), box_vectors(radii[split:])
    S1 = Q1 @ A[:, :split].T
    S2 = Q2 @ A[:, split:].T
    zero2 = box_size(radii[split:]) // 2  # the all-zero vector sits in the middle
    zero1 = len(Q1) // 2
    k = 2 if len(Q2) > 1 else 1
    dist, nbr = cKDTree(S2).query(-S1, k=k)
    dist = dist.reshape(len(Q1), k)
    nbr = nbr.reshape(len(Q1), k)
    # the pair (0, 0) is not a codeword difference
    if nbr[zero1, 0] == zero2:
        if k == 2:
            dist[zero1, 0], nbr[zero1, 0] = dist[zero1, 1], nbr[zero1, 1]
        else:
            dist[zero1, 0] = math.inf
    row = int(np.argmin(dist[:, 0]))
    if not np.isfinite(dist[row, 0]):
        return math.inf, q_best
    q = np.concatenate([Q1[row], Q2[nbr[row, 0]]])
    nz = q[np.flatnonzero(q)[0]]
    if nz < 0:
        q = -q
    q_best[live] = q
    return float(np.linalg.norm(A @ q)), q_best


def diophantine_bound(Q: float, m: int, n_rows: int, delta: float) -> float:
    """Q^(-m/n - delta), the lower bound that holds for all large enough Q."""
    return float(Q) ** (-m / n_rows - delta)


def pairwise_bound(lam: float, K: int, N: int, D: int, D_ext: int, Q: int, delta: float) -> float:
    """lambda (2 (K-1) N Q)^(-(D+D') - delta) between received points."""
    base = 2 * (K - 1) * N * Q
    if base <= 0:
        return math.inf
    return lam * math.exp(-((D + D_ext) + delta) * math.log(base))


@dataclass(frozen=True)
class DistanceReport:
    d_min: float
    argmin: tuple
    Q: int
    m: int
    n_rows: int
    delta: float
    bound_diophantine: float
    pass_diophantine: bool
    bound_pairwise: float | None
    pass_pairwise: bool | None
    enumeration_size: int

    def to_json(self) -> dict:
        out = asdict(self)
        out["argmin"] = list(self.argmin)
        return out


def min_distance(
    A,
    Q: int,
    *,
    delta: float = 0.5,
    radii: Sequence[int] | None = None,
    pairwise: dict | None = None,
    cap: int = DEFAULT_ENUM_CAP,
) -> DistanceReport:
    """Exact min ||A q||_2 over nonzero codeword differences q.

    Differences of codewords in Z_Q^m range over Z_{2Q}^m; ``radii``
    overrides the per-column difference radius. ``pairwise`` (keys lam, K,
    N, D, D_ext) adds the comparison against the pairwise-distance bound.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n_rows, m = A.shape
    radii = np.full(m, 2 * Q, dtype=np.int64) if radii is None else np.asarray(radii, dtype=np.int64)
    size = box_size(radii)
    if size > cap:
        raise CapExceeded(f"distance enumeration needs {size} candidates, cap is {cap}")
    d, q = _shortest_nonzero(A, radii)
    b1 = diophantine_bound(Q, m, n_rows, delta)
    b2 = pass2 = None
    if pairwise is not None:
        b2 = pairwise_bound(pairwise["lam"], pairwise["K"], pairwise["N"], pairwise["D"], pairwise["D_ext"], Q, delta)
        pass2 = bool(pairwise["lam"] * d >= b2)
    return DistanceReport(
        d_min=d,
        argmin=tuple(int(x) for x in q),
        Q=int(Q),
        m=m,
        n_rows=n_rows,
        delta=delta,
        bound_diophantine=b1,
        pass_diophantine=bool(d >= b1),
        bound_pairwise=b2,
        pass_pairwise=pass2,
        enumeration_size=size - 1,
    )


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------


class ErrorBound(NamedTuple):
    union: float
    loose: float


def error_prob_bound(m: int, n_rows: int, Q: int, d_min: float, codebook_size: int | None = None) -> ErrorBound:
    """Union/Chernoff block-error bounds (2Q+1)^m e^{-d^2/8} and (3Q)^m e^{-d^2/8}.

    ``d_min`` is the minimum distance between noiseless received points in
    units of the (whitened) noise standard deviation. Values above 1 are
    returned as is.
    """
    if m < 1 or n_rows < 1 or Q < 0:
        raise ValueError("need m >= 1, n_rows >= 1, Q >= 0")
    tail = math.exp(-d_min * d_min / 8) if math.isfinite(d_min) else 0.0
    size = codebook_size if codebook_size is not None else (2 * Q + 1) ** m
    return ErrorBound(size * tail, (3 * Q) ** m * tail)


class Decoder:
    """Exhaustive ML decoder for y = lam A u + W nu with nu ~ N(0, I).

    The metric is (y - lam A u)^T (W W^T)^{-1} (y - lam A u), evaluated in
    coordinates whitened by the Cholesky factor of W W^T. Candidates are
    the integer box with per-column radii ``Q * bounds`` enumerated
    lexicographically; exact ties go to the lexicographically smallest.
    """

    def __init__(self, A, W, lam: float, radii: Sequence[int], cap: int = DEFAULT_DECODE_CAP):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        self.radii = np.asarray(radii, dtype=np.int64)
        if self.radii.shape != (A.shape[1],):
            raise ValueError("one radius per column required")
        self.size = box_size(self.radii)
        if self.size > cap:
            raise CapExceeded(f"codebook has {self.size} entries, decoding cap is {cap}")
        W = np.atleast_2d(np.asarray(W, dtype=float))
        self.chol = linalg.cholesky(W @ W.T, lower=True)
        self.B = linalg.solve_triangular(self.chol, lam * A, lower=True)
        self._points = None
        self._tree = None

    def whiten(self, y) -> np.ndarray:
        return linalg.solve_triangular(self.chol, np.asarray(y, dtype=float).T, lower=True).T

    @property
    def points(self) -> np.ndarray:
        if self._points is None:
            chunk = 1 << 16
            out = np.empty((self.size, self.B.shape[0]))
            for a in range(0, self.size, chunk):
                idx = np.arange(a, min(a + chunk, self.size))
                out[a:a + len(idx)] = box_index_to_vector(idx, self.radii) @ self.B.T
            self._points = out
        return self._points

    def vector(self, index) -> np.ndarray:
        return box_index_to_vector(np.atleast_1d(index), self.radii)

    def decode(self, y) -> np.ndarray:
        z = self.whiten(y)
        d2 = np.sum((self.points - z[None, :]) ** 2, axis=1)
        return self.vector(int(np.argmin(d2)))[0]

    def decode_batch(self, Y) -> np.ndarray:
        Z = self.whiten(np.atleast_2d(Y))
        if self.size == 1:
            return np.zeros((len(Z), len(self.radii)), dtype=np.int64)
        if self._tree is None:
            self._tree = cKDTree(self.points)
        dist, idx = self._tree.query(Z, k=2)
        tie = dist[:, 0] == dist[:, 1]
        best = np.where(tie, np.minimum(idx[:, 0], idx[:, 1]), idx[:, 0])
        return self.vector(best)


def decoder_for(model, params: CodeParams, cap: int = DEFAULT_DECODE_CAP, *, full_box: bool = False) -> Decoder:
    """ML decoder over the reachable codebook, or the full lattice box."""
    bounds = model.column_bounds if full_box else model.codebook_bounds
    return Decoder(model.A, model.W, params.lam, params.Q * np.asarray(bounds), cap)


def ml_decode(y, model, params: CodeParams, cap: int = DEFAULT_DECODE_CAP, *, full_box: bool = False) -> np.ndarray:
    """Joint ML estimate of the full integer vector at one receiver."""
    return decoder_for(model, params, cap, full_box=full_box).decode(y)


def whitened_min_distance(model, params: CodeParams, cap: int = DEFAULT_ENUM_CAP, *, full_box: bool = False) -> float:
    """Minimum received distance in noise standard deviations."""
    chol = linalg.cholesky(model.noise_cov, lower=True)
    Aw = linalg.solve_triangular(chol, np.asarray(model.A), lower=True)
    bounds = model.column_bounds if full_box else model.codebook_bounds
    radii = 2 * params.Q * np.asarray(bounds)
    return params.lam * min_distance(Aw, params.Q, radii=radii, cap=cap).d_min


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorRate:
    trials: int
    errors: int
    rate: float
    ci_lo: float
    ci_hi: float

    def to_json(self) -> dict:
        return asdict(self)


def error_rate(errors: int, trials: int, confidence: float = 0.95) -> ErrorRate:
    ci = binomtest(int(errors), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return ErrorRate(int(trials), int(errors), errors / trials, float(ci.low), float(ci.high))


def monte_carlo_error(
    model,
    params: CodeParams,
    trials: int,
    seed: int,
    *,
    noise_scale: float = 1.0,
    batch: int = 4096,
    cap: int = DEFAULT_DECODE_CAP,
    full_box: bool = False,
) -> ErrorRate:
    """Block error of joint ML decoding for uniform codewords from the box."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    dec = decoder_for(model, params, cap, full_box=full_box)
    rng = np.random.default_rng([int(seed), 4])
    A, W = np.asarray(model.A), np.asarray(model.W)
    errors = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        u = rng.integers(-dec.radii, dec.radii + 1, size=(b, len(dec.radii)))
        noise = rng.standard_normal((b, W.shape[0])) * noise_scale
        y = params.lam * u @ A.T + noise @ W.T
        errors += int(np.any(dec.decode_batch(y) != u, axis=1).sum())
        done += b
    return error_rate(errors, trials)
