"""Color-difference walk: the O(1)-memory Markov representation.

The pair ``(d1, d2)`` tracks red-minus-blue vertex counts and red-minus-blue
(out)degree sums.  Together with the time ``n`` it is Markov: the chance
that the next vertex attaches to a red vertex is
``(1 + (d1 + alpha*d2) / (Z(n) * n)) / 2`` with normalisation
``Z(n) = alpha*(1-1/n) + 1`` (VSI) or ``2*alpha*(1-1/n) + 1`` (SE), and the
flip coin then sets the new vertex's color.  This module also carries the
escape apparatus used by the small-q diagnostics: boundary constants, the
crossing times of ``A*Z(n)*sqrt(n)`` / ``B*Z(n)*sqrt(n)``, and the ratio
``Y(n) = n / (d1 + alpha*d2)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .models import Family, InvariantError, ModelParams, ParamError

__all__ = [
    "DeltaState",
    "INITIAL_STATE",
    "WalkResult",
    "StoppingConfig",
    "z_alpha",
    "z_limit_value",
    "beta_value",
    "rho_value",
    "increment_support",
    "m2_value",
    "red_attach_prob",
    "increment_distribution",
    "walk_step",
    "run_walk",
    "combined_series",
    "y_value",
    "y_series",
    "stopping_bounds",
    "detect_stopping_times",
    "write_trajectory_csv",
]


@dataclass(frozen=True)
class DeltaState:
    """Walk state at time ``n``: color difference ``d1``, weight difference ``d2``."""

    n: int
    d1: int
    d2: int

    def check(self, params: ModelParams) -> None:
        """Raise :class:`InvariantError` if the state is unreachable."""
        n, d1, d2 = self.n, self.d1, self.d2
        if n < 1:
            raise InvariantError(f"n must be >= 1, got {n}")
        if abs(d1) > n or (d1 - n) % 2 != 0:
            raise InvariantError(f"d1={d1} invalid at n={n}")
        if params.family is Family.VSI:
            if abs(d2) > n - 1 or (d2 - (n - 1)) % 2 != 0:
                raise InvariantError(f"d2={d2} invalid at n={n} (vsi)")
        else:
            if abs(d2) > 2 * (n - 1) or d2 % 2 != 0:
                raise InvariantError(f"d2={d2} invalid at n={n} (se)")
        num, den = params.attach_terms(d1, d2, n)
        if abs(num) > den * (1 + 1e-12):
            raise InvariantError(f"|d1 + alpha*d2| exceeds Z(n)*n at {self}")


INITIAL_STATE = DeltaState(1, 1, 0)


def z_alpha(params: ModelParams, n: int) -> float:
    """Normalisation making the total attachment weight ``Z(n) * n``."""
    if n < 1:
        raise ParamError("n must be >= 1")
    a = params.alpha
    if params.family is Family.VSI:
        return a * (1.0 - 1.0 / n) + 1.0
    return 2.0 * a * (1.0 - 1.0 / n) + 1.0


def z_limit_value(params: ModelParams) -> float:
    """Large-n limit of ``z_alpha``."""
    a = params.alpha
    return a + 1.0 if params.family is Family.VSI else 2.0 * a + 1.0


def beta_value(params: ModelParams) -> float:
    """Drift floor used in the lower-boundary constant."""
    a = params.alpha
    if params.family is Family.VSI:
        return a + 2.0 / 3.0
    return 1.5 * a + 0.75


def rho_value(params: ModelParams, q: float) -> float:
    """Coefficient of the conditional drift of ``d1 + alpha*d2``."""
    a = params.alpha
    if params.family is Family.VSI:
        return a + 1.0 - 2.0 * q
    return 2.0 * a + 1.0 - 2.0 * q * (a + 1.0)


def increment_support(params: ModelParams) -> tuple[tuple[int, int], ...]:
    """The four ``(d1, d2)`` increments: red/blue child onto red/blue parent."""
    if params.family is Family.VSI:
        return ((1, 1), (-1, 1), (1, -1), (-1, -1))
    return ((1, 2), (-1, 0), (1, 0), (-1, -2))


def m2_value(params: ModelParams) -> float:
    """Max of ``(D1 + alpha*D2)^2`` over the increment support."""
    return max(
        (dd1 + params.alpha * dd2) ** 2 for dd1, dd2 in increment_support(params)
    )


def red_attach_prob(params: ModelParams, state: DeltaState) -> float:
    """Probability that the next vertex attaches to a red vertex."""
    num, den = params.attach_terms(state.d1, state.d2, state.n)
    if abs(num) > den * (1 + 1e-12):
        raise InvariantError(f"|d1 + alpha*d2| exceeds Z(n)*n at {state}")
    p = 0.5 * (1.0 + num / den)
    if p < 0.0:
        return 0.0
    if p > 1.0:
        return 1.0
    return p


def _check_q(q: float) -> float:
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ParamError(f"flip probability must lie in [0, 1], got {q}")
    return q


def increment_distribution(
    params: ModelParams, q: float, state: DeltaState
) -> tuple[tuple[tuple[int, int], float], ...]:
    """The four ``(increment, probability)`` pairs at ``state``.

    Order is fixed: red-onto-red, blue-onto-red, red-onto-blue,
    blue-onto-blue.
    """
    q = _check_q(q)
    p = red_attach_prob(params, state)
    sup = increment_support(params)
    probs = (p * (1.0 - q), p * q, (1.0 - p) * q, (1.0 - p) * (1.0 - q))
    return tuple(zip(sup, probs))


def walk_step(
    state: DeltaState, params: ModelParams, q: float, rng: np.random.Generator
) -> DeltaState:
    """One step of the walk; draws the attach uniform, then the flip uniform."""
    q = _check_q(q)
    p = red_attach_prob(params, state)
    attach_red = rng.random() < p
    child_red = attach_red != (rng.random() < q)
    d1 = state.d1 + (1 if child_red else -1)
    if params.family is Family.VSI:
        d2 = state.d2 + (1 if attach_red else -1)
    else:
        d2 = state.d2 + (1 if attach_red else -1) + (1 if child_red else -1)
    return DeltaState(state.n + 1, d1, d2)


@dataclass
class WalkResult:
    """Final state plus (optionally) the recorded trajectory.

    ``ns``/``d1s``/``d2s`` cover times ``1..N`` decimated by ``stride``;
    ``y`` holds ``n / (d1 + alpha*d2)^2`` at the same times when requested
    (NaN where the denominator vanishes).
    """

    final: DeltaState
    ns: np.ndarray | None = None
    d1s: np.ndarray | None = None
    d2s: np.ndarray | None = None
    y: np.ndarray | None = None
    stride: int = 1

    @property
    def has_trajectory(self) -> bool:
        return self.ns is not None


def combined_series(
    params: ModelParams, d1s: np.ndarray, d2s: np.ndarray
) -> np.ndarray:
    if params.neg_d is not None:
        return (params.neg_d * d1s - d2s) / params.neg_d
    return d1s + params.alpha * d2s


def _z_series(params: ModelParams, ns: np.ndarray) -> np.ndarray:
    a = params.alpha
    scale = 1.0 if params.family is Family.VSI else 2.0
    return scale * a * (1.0 - 1.0 / ns) + 1.0


def y_series(params: ModelParams, ns, d1s, d2s) -> np.ndarray:
    comb = combined_series(params, np.asarray(d1s), np.asarray(d2s))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(comb == 0.0, np.nan, np.asarray(ns) / (comb * comb))


def run_walk(
    params: ModelParams,
    q: float,
    n_vertices: int,
    rng: np.random.Generator,
    *,
    record_trajectory: bool = False,
    stride: int = 1,
    track_y: bool = False,
) -> WalkResult:
    """Simulate the walk from the initial state ``(1, 1, 0)`` to size
    ``n_vertices``.

    O(N) time and, without recording, O(1) memory.  Consumes the attach
    uniform block and then the flip uniform block from ``rng``, so runs are
    bit-reproducible given a seed.
    """
    q = _check_q(q)
    if n_vertices < 1:
        raise ParamError("n_vertices must be >= 1")
    if stride < 1:
        raise ParamError("stride must be >= 1")
    record = record_trajectory or track_y
    (d1, d2, *_), rec = _kernels.simulate(params, q, n_vertices - 1, rng, record)
    final = DeltaState(n_vertices, int(d1), int(d2))
    if not record:
        return WalkResult(final)
    ns = np.arange(1, n_vertices + 1, dtype=np.int64)
    d1s = np.concatenate((np.array([1], dtype=np.int64), rec[0]))
    d2s = np.concatenate((np.array([0], dtype=np.int64), rec[1]))
    if stride > 1:
        ns, d1s, d2s = ns[::stride].copy(), d1s[::stride].copy(), d2s[::stride].copy()
    y = y_series(params, ns, d1s, d2s) if track_y else None
    if not record_trajectory:
        return WalkResult(final, y=y, stride=stride)
    return WalkResult(final, ns, d1s, d2s, y, stride)


def y_value(state: DeltaState, params: ModelParams) -> float:
    """``n / (d1 + alpha*d2)^2``; undefined on the zero set."""
    comb = params.combined(state.d1, state.d2)
    if comb == 0.0:
        raise ValueError("y_value undefined: d1 + alpha*d2 is zero")
    return state.n / (comb * comb)


@dataclass(frozen=True)
class StoppingConfig:
    """Boundary constants for the escape analysis.

    ``a_bound = q**(gamma - 1/2)`` scales the upper crossing boundary and
    ``b_bound = sqrt((3*m2 + c_tilde) / (z_limit * (2*beta - z_limit)))`` the
    lower one (NaN when the radicand is not positive).  ``a_gt_b`` records
    whether ``a_bound > b_bound > 1`` (required for the escape analysis) and
    ``drift_positive`` whether ``2*rho - z_limit > 0`` (the supermartingale
    regime).  Neither flag is silently enforced.
    """

    gamma: float
    c_tilde: float
    m2: float
    beta: float
    rho: float
    z_limit: float
    a_bound: float
    b_bound: float
    a_gt_b: bool
    drift_positive: bool


def stopping_bounds(
    params: ModelParams,
    q: float,
    gamma: float = 0.25,
    c_tilde: float | None = None,
) -> StoppingConfig:
    """Derive the boundary constants for flip probability ``q``.

    The default ``gamma = 1/4`` balances the two crossing bounds; the
    default ``c_tilde`` is the smallest value making ``b_bound > 1`` plus a
    0.1 margin (and is reported in the returned config).
    """
    if not 0.0 < gamma < 0.5:
        raise ParamError("gamma must lie in (0, 1/2)")
    q = float(q)
    if not 0.0 < q <= 1.0:
        raise ParamError("q must lie in (0, 1]; the upper bound is undefined at q=0")
    m2 = m2_value(params)
    beta = beta_value(params)
    rho = rho_value(params, q)
    z_lim = z_limit_value(params)
    k = z_lim * (2.0 * beta - z_lim)
    if c_tilde is None:
        c_tilde = max(0.0, k - 3.0 * m2) + 0.1
    c_tilde = float(c_tilde)
    if c_tilde <= 0.0:
        raise ParamError("c_tilde must be positive")
    a = q ** (gamma - 0.5)
    b = math.sqrt((3.0 * m2 + c_tilde) / k) if k > 0 else math.nan
    a_gt_b = bool(k > 0 and a > b > 1.0)
    drift_positive = bool(2.0 * rho - z_lim > 0.0)
    return StoppingConfig(
        gamma=gamma,
        c_tilde=c_tilde,
        m2=m2,
        beta=beta,
        rho=rho,
        z_limit=z_lim,
        a_bound=a,
        b_bound=b,
        a_gt_b=a_gt_b,
        drift_positive=drift_positive,
    )


def _trajectory_arrays(trajectory) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if hasattr(trajectory, "ns"):
        if getattr(trajectory, "stride", 1) != 1:
            raise ParamError("stopping-time detection needs an undecimated trajectory")
        if trajectory.ns is None:
            raise ParamError("trajectory was not recorded")
        return trajectory.ns, trajectory.d1s, trajectory.d2s
    ns, d1s, d2s = trajectory
    return np.asarray(ns), np.asarray(d1s), np.asarray(d2s)


def _b_boundary(
    params: ModelParams, config: StoppingConfig, ns: np.ndarray, mode: str
) -> np.ndarray:
    if mode == "limit":
        return np.full(ns.shape, config.b_bound)
    if mode != "n_dependent":
        raise ParamError(f"unknown b_mode: {mode!r}")
    zn = _z_series(params, ns.astype(np.float64))
    rad = (3.0 * config.m2 + config.c_tilde) / (zn * (2.0 * config.beta - zn))
    with np.errstate(invalid="ignore"):
        return np.sqrt(np.where(rad > 0, rad, np.nan))


def detect_stopping_times(
    trajectory,
    config: StoppingConfig,
    params: ModelParams,
    *,
    b_mode: str = "limit",
) -> tuple[int | float, int | float]:
    """First crossing times of the escape boundaries.

    ``tau_high`` is the first ``n`` with
    ``d1 + alpha*d2 > a_bound * Z(n) * sqrt(n)`` (strict); ``tau_low`` the
    first later ``n`` where the process is ``<=`` the ``b_bound`` boundary.
    ``math.inf`` encodes "no crossing within the horizon".  ``b_mode``
    selects the limit-form constant (default) or the n-dependent variant.
    """
    ns, d1s, d2s = _trajectory_arrays(trajectory)
    nf = ns.astype(np.float64)
    comb = combined_series(params, d1s, d2s)
    base = _z_series(params, nf) * np.sqrt(nf)
    hi = np.flatnonzero(comb > config.a_bound * base)
    if hi.size == 0:
        return math.inf, math.inf
    tau_high = int(ns[hi[0]])
    bvals = _b_boundary(params, config, ns, b_mode)
    lo_mask = (ns > tau_high) & (comb <= bvals * base)
    lo = np.flatnonzero(lo_mask)
    tau_low = int(ns[lo[0]]) if lo.size else math.inf
    return tau_high, tau_low


def write_trajectory_csv(result: WalkResult, params: ModelParams, path) -> None:
    """Trajectory CSV with the mandatory header ``n,delta1,delta2,combined,y``."""
    if not result.has_trajectory:
        raise ParamError("no trajectory recorded")
    comb = combined_series(params, result.d1s, result.d2s)
    y = y_series(params, result.ns, result.d1s, result.d2s)
    with open(path, "w", newline="") as fh:
        fh.write("n,delta1,delta2,combined,y\n")
        for n, d1, d2, c, yy in zip(result.ns, result.d1s, result.d2s, comb, y):
            fh.write(f"{n},{d1},{d2},{float(c)!r},{float(yy)!r}\n")
