"""DoF regions as exact rational polytopes.

Regions are lists of linear constraints ``coeffs . d <= rhs`` over the
non-negative orthant. IC and general-demand points are length-K vectors;
X-network points are J x K matrices flattened row-major.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .align import as_rational
from .errors import CapExceeded, ConfigError
from .netmodel import Kind, NetworkConfig

MAX_VERTEX_DIM = 6
MAX_VERTEX_CONSTRAINTS = 64
MAX_SELECTOR_CONSTRAINTS = 4096
MAX_OUTER_K = 8
_MAX_SUBSETS = 5_000_000


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[Fraction, ...]
    rhs: Fraction
    provenance: str

    def value(self, point: Sequence[Fraction]) -> Fraction:
        return sum((c * x for c, x in zip(self.coeffs, point) if c), Fraction(0))

    def holds(self, point) -> bool:
        return self.value(point) <= self.rhs

    def to_json(self) -> dict:
        return {
            "coeffs": [str(c) for c in self.coeffs],
            "rhs": str(self.rhs),
            "provenance": self.provenance,
        }


def _dedupe(constraints) -> tuple[Constraint, ...]:
    seen = {}
    for c in constraints:
        seen.setdefault((c.coeffs, c.rhs), c)
    return tuple(seen.values())


@dataclass(frozen=True)
class DofRegion:
    """Bounded polytope {d >= 0 : every constraint holds}."""

    labels: tuple[str, ...]
    constraints: tuple[Constraint, ...]
    name: str

    @property
    def dim(self) -> int:
        return len(self.labels)

    def _point(self, point) -> tuple[Fraction, ...]:
        flat = []
        for x in point:
            if isinstance(x, (list, tuple)):
                flat.extend(as_rational(v) for v in x)
            else:
                flat.append(as_rational(x))
        if len(flat) != self.dim:
            raise ValueError(f"point has {len(flat)} coordinates, region has {self.dim}")
        return tuple(flat)

    def violated(self, point) -> list[Constraint]:
        p = self._point(point)
        out = [c for c in self.constraints if not c.holds(p)]
        for i, x in enumerate(p):
            if x < 0:
                unit = tuple(Fraction(-1) if a == i else Fraction(0) for a in range(self.dim))
                out.append(Constraint(unit, Fraction(0), f"{self.labels[i]} >= 0"))
        return out

    def contains(self, point) -> bool:
        return not self.violated(point)

    def vertices(
        self, max_dim: int = MAX_VERTEX_DIM, max_constraints: int = MAX_VERTEX_CONSTRAINTS
    ) -> list[tuple[Fraction, ...]]:
        if self.dim > max_dim:
            raise CapExceeded(f"vertex enumeration limited to dimension {max_dim}, region has {self.dim}")
        if len(self.constraints) > max_constraints:
            raise CapExceeded(
                f"vertex enumeration limited to {max_constraints} constraints, region has {len(self.constraints)}"
            )
        return enumerate_vertices(self.constraints, self.dim)

    def maximize(self, objective) -> tuple[Fraction, list[tuple[Fraction, ...]]]:
        """Exact maximum of a linear objective and every vertex attaining it."""
        w = self._point(objective)
        verts = self.vertices()
        vals = [sum((a * b for a, b in zip(w, v)), Fraction(0)) for v in verts]
        best = max(vals)
        return best, [v for v, x in zip(verts, vals) if x == best]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "labels": list(self.labels),
            "constraints": [c.to_json() for c in self.constraints],
        }


def _integer_row(coeffs, rhs) -> tuple[list[int], int]:
    scale = 1
    for x in (*coeffs, rhs):
        scale = math.lcm(scale, x.denominator)
    return [int(c * scale) for c in coeffs], int(rhs * scale)


def _solve_exact(rows: list[list[int]], rhs: list[int]) -> tuple[Fraction, ...] | None:
    n = len(rows)
    a = [[Fraction(x) for x in row] + [Fraction(b)] for row, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col] / a[col][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return tuple(a[i][n] / a[i][i] for i in range(n))


def enumerate_vertices(constraints: Sequence[Constraint], dim: int) -> list[tuple[Fraction, ...]]:
    """Vertices of {x >= 0, constraints} by trying every dim-subset of tight rows.

    Subsets are screened in floating point on integer-scaled rows (integer
    matrices have integer determinants, so |det| < 1/2 means singular);
    surviving candidates are re-solved and re-checked exactly.
    """
    rows, rhs = [], []
    for c in constraints:
        r, b = _integer_row(c.coeffs, c.rhs)
        rows.append(r)
        rhs.append(b)
    for i in range(dim):
        rows.append([-1 if a == i else 0 for a in range(dim)])
        rhs.append(0)
    R = np.array(rows, dtype=float)
    b = np.array(rhs, dtype=float)
    n_sub = math.comb(len(rows), dim)
    if n_sub > _MAX_SUBSETS:
        raise CapExceeded(f"vertex enumeration would test {n_sub} constraint subsets")
    tol = 1e-7 * (1 + np.abs(b).max())
    candidates = {}
    combos = itertools.combinations(range(len(rows)), dim)
    while True:
        chunk = np.array(list(itertools.islice(combos, 200_000)), dtype=np.int64)
        if not len(chunk):
            break
        mats = R[chunk]
        dets = np.linalg.det(mats)
        keep = np.abs(dets) > 0.5
        if not keep.any():
            continue
        chunk, mats = chunk[keep], mats[keep]
        xs = np.linalg.solve(mats, b[chunk][..., None])[..., 0]
        feasible = np.all(xs @ R.T <= b[None, :] + tol, axis=1)
        for sub, x in zip(chunk[feasible], xs[feasible]):
            key = tuple(np.round(x, 7))
            candidates.setdefault(key, sub)
    out = set()
    for sub in candidates.values():
        x = _solve_exact([rows[i] for i in sub], [rhs[i] for i in sub])
        if x is None:
            continue
        if all(sum((a * v for a, v in zip(row, x)), Fraction(0)) <= bb for row, bb in zip(rows, rhs)):
            out.add(x)
    return sorted(out)


# ---------------------------------------------------------------------------
# achievable regions
# ---------------------------------------------------------------------------


def point_labels(config: NetworkConfig) -> tuple[str, ...]:
    if config.kind is Kind.X:
        return tuple(f"d{j + 1},{k + 1}" for j in range(config.J) for k in range(config.K))
    return tuple(f"d{k + 1}" for k in range(config.K))


def inner_region(config: NetworkConfig, selector_cap: int = MAX_SELECTOR_CONSTRAINTS) -> DofRegion:
    """Achievable region with every max-term expanded into linear rows."""
    K, J, M, N = config.K, config.J, config.M, config.N
    dim = J * K if config.kind is Kind.X else K
    rows = []

    def row(entries: dict, rhs, prov):
        coeffs = [Fraction(0)] * dim
        for i, c in entries.items():
            coeffs[i] += c
        rows.append(Constraint(tuple(coeffs), Fraction(rhs), prov))

    if config.kind is Kind.IC:
        for k in range(K):
            if K == 1:
                row({k: Fraction(1, N[k])}, 1, f"IC rx{k + 1}")
                row({k: Fraction(1, M[k])}, 1, f"IC tx{k + 1} single-user cut")
            for kh in range(K):
                if kh != k:
                    row({k: Fraction(1, N[k]), kh: Fraction(1, M[kh])}, 1, f"IC rx{k + 1} interferer tx{kh + 1}")
    elif config.kind is Kind.GENERAL:
        for j in range(J):
            want = sorted(config.demands[j])
            base = {k: Fraction(1, N[j]) for k in want}
            comp = sorted(config.complement(j))
            if not comp:
                row(base, 1, f"general rx{j + 1} (exact) no interferers")
            for kh in comp:
                row({**base, kh: Fraction(1, N[j])}, 1, f"general rx{j + 1} (exact) interferer tx{kh + 1}")
    else:
        n_sel = J * K ** (J - 1)
        if n_sel > selector_cap:
            raise CapExceeded(f"X-network region needs {n_sel} selector constraints, cap is {selector_cap}")
        for j in range(J):
            others = [jh for jh in range(J) if jh != j]
            for sel in itertools.product(range(K), repeat=len(others)):
                entries = {j * K + k: Fraction(1, N[j]) for k in range(K)}
                for jh, kh in zip(others, sel):
                    entries[jh * K + kh] = entries.get(jh * K + kh, Fraction(0)) + Fraction(1, M[kh])
                picks = ",".join(f"rx{jh + 1}:tx{kh + 1}" for jh, kh in zip(others, sel))
                row(entries, 1, f"X rx{j + 1} selector[{picks}]")
    return DofRegion(point_labels(config), _dedupe(rows), f"inner-{config.kind.value}")


def inner_contains(config: NetworkConfig, point) -> bool:
    """Membership by evaluating the max-form inequalities directly."""
    K, J, M, N = config.K, config.J, config.M, config.N
    if config.kind is Kind.X:
        d = [[as_rational(x) for x in r] for r in point]
        if any(x < 0 for r in d for x in r):
            return False
        for j in range(J):
            lhs = sum(d[j], Fraction(0)) / N[j]
            lhs += sum(max(d[jh][kh] / M[kh] for kh in range(K)) for jh in range(J) if jh != j)
            if lhs > 1:
                return False
        return True
    d = [as_rational(x) for x in point]
    if any(x < 0 for x in d):
        return False
    if config.kind is Kind.IC:
        for k in range(K):
            worst = max((d[kh] / M[kh] for kh in range(K) if kh != k), default=Fraction(0))
            if d[k] / N[k] + worst > 1:
                return False
        return True
    for j in range(J):
        worst = max((d[kh] for kh in config.complement(j)), default=Fraction(0))
        if sum((d[k] for k in config.demands[j]), Fraction(0)) + worst > N[j]:
            return False
    return True


# ---------------------------------------------------------------------------
# transmitter-grouping outer bound
# ---------------------------------------------------------------------------


def group_size(K: int, M: int, N: int, g: int) -> int:
    """|G_T2| = min(K - g, floor(g N / M))."""
    return min(K - g, (g * N) // M)


def outer_region(K: int, M: int, N: int, max_K: int = MAX_OUTER_K) -> DofRegion:
    """Outer bound for the (K, [M], [N]) IC from every transmitter grouping.

    All g, all G_T1 of size g and every admissible G_T2 are enumerated, a
    superset of the point-dependent maximizing choice.
    """
    if K > max_K:
        raise CapExceeded(f"outer-bound subset enumeration limited to K <= {max_K}")
    if min(K, M, N) < 1:
        raise ConfigError("K, M, N must be positive")
    mn = min(M, N)
    rows = []

    def row(idx, rhs, prov):
        coeffs = tuple(Fraction(1) if k in idx else Fraction(0) for k in range(K))
        rows.append(Constraint(coeffs, Fraction(rhs), prov))

    for g in range(1, K + 1):
        c = group_size(K, M, N, g)
        for t1 in itertools.combinations(range(K), g):
            s1 = "{" + ",".join(str(k + 1) for k in t1) + "}"
            row(set(t1), g * mn, f"outer g={g} T1={s1} (single group)")
            rest = [k for k in range(K) if k not in t1]
            for t2 in itertools.combinations(rest, c):
                s2 = "{" + ",".join(str(k + 1) for k in t2) + "}"
                if c:
                    row(set(t2), c * mn, f"outer g={g} T2={s2} (second group)")
                row(set(t1) | set(t2), g * N, f"outer g={g} T1={s1} T2={s2} (sum)")
    return DofRegion(tuple(f"d{k + 1}" for k in range(K)), _dedupe(rows), "outer-ic")


class OuterTotal(NamedTuple):
    value: Fraction
    g: int
    zero_forcing: Fraction


def outer_total_dof(K: int, M: int, N: int) -> OuterTotal:
    """min over g of g N K / min(K, floor(g (N+M) / M)), plus the zero-forcing value."""
    best, best_g = None, None
    for g in range(1, K + 1):
        v = Fraction(g * N * K, min(K, (g * (N + M)) // M))
        if best is None or v < best:
            best, best_g = v, g
    zf = Fraction(min(max(M, N), K * min(M, N)))
    return OuterTotal(best, best_g, zf)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FormulaRow:
    label: str
    expression: str
    value: Fraction
    witness: Fraction | None
    note: str

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "expression": self.expression,
            "value": str(self.value),
            "witness": None if self.witness is None else str(self.witness),
            "note": self.note,
        }


def total_dof_formulas(config: NetworkConfig) -> list[FormulaRow]:
    """Every closed-form total DoF value that applies to a uniform config."""
    if not config.uniform:
        return []
    K, J, M, N = config.K, config.J, config.M[0], config.N[0]
    out = []
    if config.kind is Kind.IC:
        if M == N:
            out.append(FormulaRow("ic-total", "NK/2", Fraction(N * K, 2), Fraction(N, 2), "exact total DoF"))
        out.append(
            FormulaRow("ic-symmetric", "KMN/(M+N)", Fraction(K * M * N, M + N), Fraction(M * N, M + N), "achievable")
        )
        ob = outer_total_dof(K, M, N)
        out.append(FormulaRow("ic-outer", "min_g gNK/min(K,floor(g(N+M)/M))", ob.value, None, f"outer bound, g={ob.g}"))
        out.append(FormulaRow("ic-zero-forcing", "min(max(M,N),K min(M,N))", ob.zero_forcing, None, "achievable"))
    elif config.kind is Kind.X:
        if M == N:
            out.append(
                FormulaRow("x-total", "KJN/(K+J-1)", Fraction(K * J * N, K + J - 1), Fraction(N, K + J - 1), "exact total DoF")
            )
        if M == 1:
            if K > N:
                out.append(
                    FormulaRow(
                        "simo-x-total",
                        "NKJ/(K+N(J-1))",
                        Fraction(N * K * J, K + N * (J - 1)),
                        Fraction(N, K + N * (J - 1)),
                        "exact total DoF",
                    )
                )
            else:
                out.append(FormulaRow("simo-x-total", "N", Fraction(N), None, "single-user bound via zero-forcing"))
    return out


def maximize_total(region: DofRegion) -> Fraction:
    return region.maximize([1] * region.dim)[0]


def witness_point(config: NetworkConfig, value: Fraction):
    if config.kind is Kind.X:
        return [[value] * config.K for _ in range(config.J)]
    return [value] * config.K



