"""Four-type Pólya urn with randomized replacement.

Types 1/2 are the red/blue *weight* masses (activity 1), types 3/4 the
red/blue vertex counts (activity 0).  Each step draws a color proportional
to weight mass, deterministically adds weight ``alpha`` to the drawn pile
(the parent gains an edge) and places the new vertex's weight and count on
the same color with probability ``1-q``, the opposite with probability
``q``.  The expected replacement matrix has leading eigenvalues
``(alpha+1, alpha+1-2q)`` (VSI) or ``(2*alpha+1, 2*alpha+1-2q*(alpha+1))``
(SE), and ``lambda1 >= 2*lambda2`` exactly when ``q`` reaches the critical
flip probability ``f(alpha)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .models import Family, InvariantError, ModelParams, ParamError

__all__ = [
    "Regime",
    "UrnState",
    "initial_urn",
    "replacement_matrix",
    "leading_eigenvalues",
    "critical_q",
    "critical_q_reachable",
    "classify_regime",
    "simulate_urn",
    "spectrum_report",
]


class Regime(enum.Enum):
    SUPERDIFFUSIVE = "superdiffusive"  # q < f(alpha)
    CRITICAL = "critical"  # q = f(alpha)
    DIFFUSIVE = "diffusive"  # q > f(alpha)


@dataclass
class UrnState:
    """Integer urn tallies; real-valued type masses are derived on demand.

    ``s_red``/``s_blue`` are per-color outdegree sums for VSI and degree
    sums for SE, so ``s_red + s_blue`` is ``n-1`` or ``2*(n-1)``.
    """

    n: int
    n_red: int
    n_blue: int
    s_red: int
    s_blue: int

    @property
    def delta1(self) -> int:
        return self.n_red - self.n_blue

    @property
    def delta2(self) -> int:
        return self.s_red - self.s_blue

    def weight_masses(self, params: ModelParams) -> tuple[float, float]:
        """Type-1 and type-2 masses ``(x1, x2)``."""
        if params.neg_d is not None:
            d = params.neg_d
            return (
                (d * self.n_red - self.s_red) / d,
                (d * self.n_blue - self.s_blue) / d,
            )
        a = params.alpha
        return a * self.s_red + self.n_red, a * self.s_blue + self.n_blue

    def type_counts(self, params: ModelParams) -> tuple[float, float, int, int]:
        x1, x2 = self.weight_masses(params)
        return x1, x2, self.n_red, self.n_blue


def initial_urn() -> UrnState:
    """Start vector (1, 0, 1, 0): one red vertex of weight 1."""
    return UrnState(1, 1, 0, 0, 0)


def replacement_matrix(params: ModelParams, q: float) -> np.ndarray:
    """Expected replacement matrix, columns scaled by the type activities.

    Column ``j`` is the expected added vector when a type-``j`` ball is
    drawn; the count types have activity 0, so columns 3 and 4 vanish.
    """
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ParamError(f"flip probability must lie in [0, 1], got {q}")
    a = params.alpha
    m = np.zeros((4, 4))
    if params.family is Family.VSI:
        same, cross = a + 1.0 - q, q
    else:
        same, cross = a + (1.0 - q) * (a + 1.0), q * (a + 1.0)
    m[0, 0] = m[1, 1] = same
    m[0, 1] = m[1, 0] = cross
    m[2, 0] = m[3, 1] = 1.0 - q
    m[3, 0] = m[2, 1] = q
    return m


def leading_eigenvalues(params: ModelParams, q: float) -> tuple[float, float]:
    """Closed-form top two eigenvalues of the replacement matrix."""
    q = float(q)
    a = params.alpha
    if params.family is Family.VSI:
        return a + 1.0, a + 1.0 - 2.0 * q
    return 2.0 * a + 1.0, 2.0 * a + 1.0 - 2.0 * q * (a + 1.0)


def critical_q(params: ModelParams) -> float:
    """Critical flip probability ``f(alpha)``.

    ``(alpha+1)/4`` for VSI and ``(2*alpha+1)/(4*(alpha+1))`` for SE.  For
    VSI with ``alpha > 3`` the value exceeds 1 and the threshold is
    unreachable for any valid ``q``; see :func:`critical_q_reachable`.
    """
    a = params.alpha
    if params.family is Family.VSI:
        return (a + 1.0) / 4.0
    return (2.0 * a + 1.0) / (4.0 * (a + 1.0))


def critical_q_reachable(params: ModelParams) -> bool:
    return critical_q(params) <= 1.0


def _critical_q_fraction(params: ModelParams) -> Fraction:
    if params.neg_d is not None:
        d = params.neg_d
        if params.family is Family.VSI:
            return Fraction(d - 1, 4 * d)
        return Fraction(d - 2, 4 * (d - 1))
    a = Fraction(params.alpha)
    if params.family is Family.VSI:
        return (a + 1) / 4
    return (2 * a + 1) / (4 * (a + 1))


def classify_regime(params: ModelParams, q: float, *, tol: float = 1e-12) -> Regime:
    """Compare ``q`` against the critical flip probability.

    Exact rational comparison when ``alpha = -1/d``; otherwise the critical
    case is declared within ``tol``.
    """
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ParamError(f"flip probability must lie in [0, 1], got {q}")
    if params.neg_d is not None:
        f = _critical_q_fraction(params)
        qf = Fraction(q)
        if qf == f:
            return Regime.CRITICAL
        return Regime.DIFFUSIVE if qf > f else Regime.SUPERDIFFUSIVE
    f = critical_q(params)
    if abs(q - f) <= tol:
        return Regime.CRITICAL
    return Regime.DIFFUSIVE if q > f else Regime.SUPERDIFFUSIVE


def simulate_urn(
    params: ModelParams, q: float, n_vertices: int, rng: np.random.Generator
) -> UrnState:
    """Run ``n_vertices - 1`` draw-and-replace steps from the start vector.

    The induced ``(delta1, delta2)`` law is identical to the walk and tree
    simulations; the implementation is an independent loop over the urn
    tallies rather than a wrapper around either.  Per step the color draw
    comes first, then the flip draw.
    """
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ParamError(f"flip probability must lie in [0, 1], got {q}")
    if n_vertices < 1:
        raise ParamError("n_vertices must be >= 1")
    st = initial_urn()
    se = params.family is Family.SE
    d = params.neg_d
    a = params.alpha
    for _ in range(n_vertices - 1):
        if d is not None:
            # masses scaled by d: the ratio is what matters for the draw
            x1 = d * st.n_red - st.s_red
            x2 = d * st.n_blue - st.s_blue
        else:
            x1 = a * st.s_red + st.n_red
            x2 = a * st.s_blue + st.n_blue
        total = x1 + x2
        if total <= 0:
            raise InvariantError("urn ran out of weight mass")
        drew_red = rng.random() * total < x1
        child_red = drew_red != (rng.random() < q)
        if drew_red:
            st.s_red += 1
        else:
            st.s_blue += 1
        if child_red:
            st.n_red += 1
            if se:
                st.s_red += 1
        else:
            st.n_blue += 1
            if se:
                st.s_blue += 1
        st.n += 1
    return st


def spectrum_report(params: ModelParams, q: float) -> dict:
    """JSON-ready spectrum summary for one ``(family, alpha, q)`` point."""
    lam1, lam2 = leading_eigenvalues(params, q)
    return {
        "family": params.label,
        "alpha": params.alpha,
        "q": float(q),
        "matrix": replacement_matrix(params, q).tolist(),
        "lambda1": lam1,
        "lambda2": lam2,
        "f_alpha": critical_q(params),
        "f_alpha_reachable": critical_q_reachable(params),
        "regime": classify_regime(params, q).value,
    }
