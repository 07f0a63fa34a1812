"""Exact ground truth at desk scale.

``exact_delta_distribution`` runs a dense forward DP over the Markov state
``(n, d1, d2)`` (O(N^2) states, O(N^3) work) and ``exact_rmaj`` reads the
majority-estimator error off the resulting ``d1`` marginal.
``enumerate_trees`` sums exact probabilities over *all* attach/flip
sequences for N <= 6, which machine-checks that the tree process reduces to
the walk.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction

import numpy as np

from .models import Family, ModelParams, ParamError
from .walk import DeltaState

__all__ = [
    "ExactDistribution",
    "exact_delta_distribution",
    "exact_rmaj",
    "enumerate_trees",
    "tree_shape_distribution",
]

DEFAULT_N_CAP = 2000
ENUMERATION_CAP = 6
_SUM_TOL = 1e-9


def _col_count(family: Family, n: int) -> int:
    return n if family is Family.VSI else 2 * n - 1


def _d2_from_col(family: Family, n: int, j: np.ndarray | int):
    if family is Family.VSI:
        return 2 * j - (n - 1)
    return 2 * j - 2 * (n - 1)


def _col_from_d2(family: Family, n: int, d2: int) -> int | None:
    if family is Family.VSI:
        if abs(d2) > n - 1 or (d2 - (n - 1)) % 2 != 0:
            return None
        return (d2 + n - 1) // 2
    if abs(d2) > 2 * (n - 1) or d2 % 2 != 0:
        return None
    return (d2 + 2 * (n - 1)) // 2


class ExactDistribution:
    """Law of ``(d1, d2)`` at a fixed tree size.

    Backed by a dense grid (rows: ``d1 = 2*i - N``; columns: ``d2`` on the
    family-specific lattice).  ``entries`` exposes the sparse
    ``(d1, d2) -> probability`` view; for large N prefer the array
    accessors, the dict is built lazily.
    """

    def __init__(self, params: ModelParams, q: float, n_vertices: int, grid: np.ndarray):
        expected = (n_vertices + 1, _col_count(params.family, n_vertices))
        if grid.shape != expected:
            raise ValueError(f"grid shape {grid.shape} != {expected}")
        total = float(grid.sum())
        if abs(total - 1.0) > _SUM_TOL:
            raise ArithmeticError(
                f"probability mass {total!r} drifted beyond {_SUM_TOL}; refusing to renormalize"
            )
        self.params = params
        self.q = float(q)
        self.n_vertices = n_vertices
        self.grid = grid
        self._entries: dict[tuple[int, int], float] | None = None

    @classmethod
    def from_entries(
        cls,
        params: ModelParams,
        q: float,
        n_vertices: int,
        mapping: dict[tuple[int, int], float],
    ) -> "ExactDistribution":
        n = n_vertices
        grid = np.zeros((n + 1, _col_count(params.family, n)))
        for (d1, d2), prob in mapping.items():
            DeltaState(n, d1, d2).check(params)
            j = _col_from_d2(params.family, n, d2)
            grid[(d1 + n) // 2, j] += prob
        return cls(params, q, n, grid)

    @property
    def entries(self) -> dict[tuple[int, int], float]:
        if self._entries is None:
            self._entries = dict(self.items())
        return self._entries

    def items(self):
        n = self.n_vertices
        rows, cols = np.nonzero(self.grid)
        for i, j in zip(rows, cols):
            d1 = 2 * int(i) - n
            d2 = int(_d2_from_col(self.params.family, n, int(j)))
            yield (d1, d2), float(self.grid[i, j])

    def prob(self, d1: int, d2: int) -> float:
        n = self.n_vertices
        if abs(d1) > n or (d1 - n) % 2 != 0:
            return 0.0
        j = _col_from_d2(self.params.family, n, d2)
        if j is None:
            return 0.0
        return float(self.grid[(d1 + n) // 2, j])

    def total(self) -> float:
        return float(self.grid.sum())

    def d1_marginal(self) -> dict[int, float]:
        n = self.n_vertices
        sums = self.grid.sum(axis=1)
        return {2 * i - n: float(sums[i]) for i in range(n + 1) if sums[i] != 0.0}

    def rmaj(self) -> float:
        """Majority-estimator error: P(d1 < 0) + P(d1 = 0)/2."""
        n = self.n_vertices
        sums = self.grid.sum(axis=1)
        neg = float(sums[: (n - 1) // 2 + 1].sum()) if n >= 1 else 0.0
        tie = float(sums[n // 2]) if n % 2 == 0 else 0.0
        return neg + 0.5 * tie

    def to_csv(self, path) -> None:
        """``d1,d2,prob`` rows under a metadata comment line."""
        p = self.params
        with open(path, "w", newline="") as fh:
            fh.write(
                f"# family={p.label} alpha={p.alpha!r} q={self.q!r} N={self.n_vertices}\n"
            )
            fh.write("d1,d2,prob\n")
            for (d1, d2), prob in sorted(self.items()):
                fh.write(f"{d1},{d2},{prob!r}\n")


def _p_red_grid(params: ModelParams, n: int, rows: int, cols: int) -> np.ndarray:
    """Red-attach probability over the layer-n state grid."""
    d1 = (2.0 * np.arange(rows) - n).reshape(-1, 1)
    j = np.arange(cols)
    d2 = _d2_from_col(params.family, n, j).astype(np.float64).reshape(1, -1)
    if params.neg_d is not None:
        d = params.neg_d
        num = d * d1 - d2
        if params.family is Family.VSI:
            den = float(d * n - (n - 1))
        else:
            den = float(d * n - 2 * (n - 1))
    else:
        a = params.alpha
        num = d1 + a * d2
        if params.family is Family.VSI:
            den = n + a * (n - 1)
        else:
            den = n + a * (2 * (n - 1))
    p = 0.5 * (1.0 + num / den)
    np.clip(p, 0.0, 1.0, out=p)
    return p


def exact_delta_distribution(
    params: ModelParams,
    q: float,
    n_vertices: int,
    *,
    n_cap: int = DEFAULT_N_CAP,
) -> ExactDistribution:
    """Forward DP from the point mass at ``(1, 0)``.

    Double precision throughout, with a final mass check (never a silent
    renormalization).  Work is O(N^3); ``n_cap`` guards against accidental
    huge runs.
    """
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ParamError(f"flip probability must lie in [0, 1], got {q}")
    if n_vertices < 1:
        raise ParamError("n_vertices must be >= 1")
    if n_vertices > n_cap:
        raise ParamError(f"N={n_vertices} exceeds the configured cap {n_cap}")
    vsi = params.family is Family.VSI
    w = np.zeros((2, 1))
    w[1, 0] = 1.0  # (d1, d2) = (1, 0) at n = 1
    for n in range(1, n_vertices):
        rows, cols = w.shape
        p = _p_red_grid(params, n, rows, cols)
        wr = w * p  # mass attaching to a red vertex
        wb = w - wr  # complement keeps the layer total exact
        new = np.zeros((rows + 1, cols + (1 if vsi else 2)))
        if vsi:
            new[1:, 1:] += wr * (1.0 - q)  # red child on red parent: (+1, +1)
            new[:-1, 1:] += wr * q  # blue child on red parent: (-1, +1)
            new[1:, :-1] += wb * q  # red child on blue parent: (+1, -1)
            new[:-1, :-1] += wb * (1.0 - q)  # blue child on blue parent
        else:
            new[1:, 2:] += wr * (1.0 - q)  # (+1, +2)
            new[:-1, 1:-1] += wr * q  # (-1, 0)
            new[1:, 1:-1] += wb * q  # (+1, 0)
            new[:-1, :-2] += wb * (1.0 - q)  # (-1, -2)
        w = new
    return ExactDistribution(params, q, n_vertices, w)


def _rational_distribution(
    params: ModelParams, q, n_vertices: int
) -> dict[tuple[int, int], Fraction]:
    """Same DP in exact rational arithmetic (costly; tiny N only)."""
    qf = Fraction(q)
    if params.neg_d is not None:
        af = Fraction(-1, params.neg_d)
    else:
        af = Fraction(params.alpha)
    vsi = params.family is Family.VSI
    half = Fraction(1, 2)
    states: dict[tuple[int, int], Fraction] = {(1, 0): Fraction(1)}
    for n in range(1, n_vertices):
        den = n + af * ((n - 1) if vsi else 2 * (n - 1))
        new: dict[tuple[int, int], Fraction] = defaultdict(Fraction)
        for (d1, d2), mass in states.items():
            p = half * (1 + (d1 + af * d2) / den)
            moves = (
                ((d1 + 1, d2 + (1 if vsi else 2)), p * (1 - qf)),
                ((d1 - 1, d2 + (1 if vsi else 0)), p * qf),
                ((d1 + 1, d2 - (1 if vsi else 0)), (1 - p) * qf),
                ((d1 - 1, d2 - (1 if vsi else 2)), (1 - p) * (1 - qf)),
            )
            for key, pr in moves:
                if pr:
                    new[key] += mass * pr
        states = dict(new)
    return states


def exact_rmaj(
    params: ModelParams,
    q: float,
    n_vertices: int,
    *,
    method: str = "float64",
    n_cap: int = DEFAULT_N_CAP,
) -> float:
    """Exact majority-estimator error probability at horizon ``n_vertices``.

    ``method="float64"`` uses the array DP (default; error within a few
    ulps).  ``method="rational"`` computes in exact rational arithmetic and
    rounds once at the end -- affordable only for small N, but it makes
    hand-derived values like ``q/2`` at N=2 come out bit-exact.
    """
    if method == "float64":
        return exact_delta_distribution(params, q, n_vertices, n_cap=n_cap).rmaj()
    if method != "rational":
        raise ParamError(f"unknown method: {method!r}")
    states = _rational_distribution(params, q, n_vertices)
    r = Fraction(0)
    for (d1, _), mass in states.items():
        if d1 < 0:
            r += mass
        elif d1 == 0:
            r += mass / 2
    return float(r)


def _vertex_weight_num(params: ModelParams, outdeg: int, is_root: bool) -> float:
    """Attachment weight numerator; for alpha = -1/d the shared denominator
    is d and is handled by the caller via the total."""
    k = outdeg if params.family is Family.VSI or is_root else outdeg + 1
    if params.neg_d is not None:
        return float(params.neg_d - k)
    return params.alpha * k + 1.0


def _total_weight_num(params: ModelParams, n: int) -> float:
    if params.neg_d is not None:
        d = params.neg_d
        if params.family is Family.VSI:
            return float(d * n - (n - 1))
        return float(d * n - 2 * (n - 1))
    return params.total_weight(n)


def enumerate_trees(params: ModelParams, q: float, n_vertices: int) -> ExactDistribution:
    """Exact ``(d1, d2)`` law by brute force over all attach/flip sequences.

    Each of the ``(N-1)! * 2^(N-1)`` sequences contributes the product of
    its attachment weights and flip factors; weights come straight from the
    family definition, independently of the walk's probability formula.
    """
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ParamError(f"flip probability must lie in [0, 1], got {q}")
    if not 1 <= n_vertices <= ENUMERATION_CAP:
        raise ParamError(f"enumeration supports 1 <= N <= {ENUMERATION_CAP}")
    vsi = params.family is Family.VSI
    acc: dict[tuple[int, int], float] = defaultdict(float)
    outdeg = [0] * (n_vertices + 1)
    red = [False] * (n_vertices + 1)
    red[1] = True

    def rec(n: int, d1: int, d2: int, prob: float) -> None:
        if n == n_vertices:
            acc[(d1, d2)] += prob
            return
        total = _total_weight_num(params, n)
        for v in range(1, n + 1):
            wv = _vertex_weight_num(params, outdeg[v], v == 1)
            if wv == 0.0:
                continue
            p_attach = prob * (wv / total)
            parent_red = red[v]
            outdeg[v] += 1
            for child_red, p_color in ((parent_red, 1.0 - q), (not parent_red, q)):
                if p_color == 0.0:
                    continue
                nd1 = d1 + (1 if child_red else -1)
                nd2 = d2 + (1 if parent_red else -1)
                if not vsi:
                    nd2 += 1 if child_red else -1
                red[n + 1] = child_red
                rec(n + 1, nd1, nd2, p_attach * p_color)
            outdeg[v] -= 1

    rec(1, 1, 0, 1.0)
    return ExactDistribution.from_entries(params, q, n_vertices, dict(acc))


def tree_shape_distribution(
    params: ModelParams, n_vertices: int
) -> dict[tuple[int, ...], float]:
    """Exact law over parent arrays ``(parent[2], ..., parent[N])``, N <= 6."""
    if not 1 <= n_vertices <= ENUMERATION_CAP:
        raise ParamError(f"enumeration supports 1 <= N <= {ENUMERATION_CAP}")
    acc: dict[tuple[int, ...], float] = defaultdict(float)
    outdeg = [0] * (n_vertices + 1)
    parents: list[int] = []

    def rec(n: int, prob: float) -> None:
        if n == n_vertices:
            acc[tuple(parents)] += prob
            return
        total = _total_weight_num(params, n)
        for v in range(1, n + 1):
            wv = _vertex_weight_num(params, outdeg[v], v == 1)
            if wv == 0.0:
                continue
            outdeg[v] += 1
            parents.append(v)
            rec(n + 1, prob * (wv / total))
            parents.pop()
            outdeg[v] -= 1

    rec(1, 1.0)
    return dict(acc)
