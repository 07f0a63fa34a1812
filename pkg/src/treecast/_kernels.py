"""Hot loops for the fused grow-and-color simulation.

Compiled with numba when available (the normal install); otherwise the same
functions run interpreted, which keeps every result identical but slow.
State stays in integers; only the per-step attach probability is a float.
"""

from __future__ import annotations

import numpy as np

from .models import Family, ModelParams

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


_EMPTY = np.empty(0, dtype=np.int64)


@njit(cache=True)
def _steps_vsi(neg_d, alpha, q, n0, d1, d2, u_attach, u_flip, rec_d1, rec_d2, record):
    rr = 0
    rb = 0
    br = 0
    bb = 0
    for k in range(u_attach.shape[0]):
        n = n0 + k
        if neg_d > 0:
            num = neg_d * d1 - d2
            den = neg_d * n - (n - 1)
            p = 0.5 * (1.0 + num / den)
        else:
            p = 0.5 * (1.0 + (d1 + alpha * d2) / (n + alpha * (n - 1)))
        attach_red = u_attach[k] < p
        child_red = attach_red != (u_flip[k] < q)
        if child_red:
            d1 += 1
        else:
            d1 -= 1
        if attach_red:
            d2 += 1
            if child_red:
                rr += 1
            else:
                rb += 1
        else:
            d2 -= 1
            if child_red:
                br += 1
            else:
                bb += 1
        if record:
            rec_d1[k] = d1
            rec_d2[k] = d2
    return d1, d2, rr, rb, br, bb


@njit(cache=True)
def _steps_se(neg_d, alpha, q, n0, d1, d2, u_attach, u_flip, rec_d1, rec_d2, record):
    rr = 0
    rb = 0
    br = 0
    bb = 0
    for k in range(u_attach.shape[0]):
        n = n0 + k
        if neg_d > 0:
            num = neg_d * d1 - d2
            den = neg_d * n - 2 * (n - 1)
            p = 0.5 * (1.0 + num / den)
        else:
            p = 0.5 * (1.0 + (d1 + alpha * d2) / (n + alpha * (2 * (n - 1))))
        attach_red = u_attach[k] < p
        child_red = attach_red != (u_flip[k] < q)
        if child_red:
            d1 += 1
            d2 += 1
        else:
            d1 -= 1
            d2 -= 1
        if attach_red:
            d2 += 1
            if child_red:
                rr += 1
            else:
                rb += 1
        else:
            d2 -= 1
            if child_red:
                br += 1
            else:
                bb += 1
        if record:
            rec_d1[k] = d1
            rec_d2[k] = d2
    return d1, d2, rr, rb, br, bb


def simulate(
    params: ModelParams,
    q: float,
    steps: int,
    rng: np.random.Generator,
    record: bool,
):
    """Run ``steps`` fused attach-and-color steps from the initial state.

    Consumes two uniform blocks from ``rng``: the attach uniforms first,
    then the flip uniforms.  Returns ``(d1, d2, rr, rb, br, bb)`` plus the
    recorded per-step ``(d1, d2)`` arrays when ``record`` is set.
    """
    u_attach = rng.random(steps)
    u_flip = rng.random(steps)
    if record:
        rec1 = np.empty(steps, dtype=np.int64)
        rec2 = np.empty(steps, dtype=np.int64)
    else:
        rec1 = _EMPTY
        rec2 = _EMPTY
    fn = _steps_vsi if params.family is Family.VSI else _steps_se
    out = fn(
        params.neg_d or 0,
        float(params.alpha),
        float(q),
        1,
        1,
        0,
        u_attach,
        u_flip,
        rec1,
        rec2,
        record,
    )
    return out, ((rec1, rec2) if record else None)


def warmup() -> None:
    """Trigger JIT compilation (cached on disk after the first ever call)."""
    rng = np.random.default_rng(0)
    from .models import validate_params

    for params in (
        validate_params(Family.VSI, alpha=1.0),
        validate_params(Family.SE, alpha=1.0),
        validate_params(Family.VSI, neg_d=2),
        validate_params(Family.SE, neg_d=3),
    ):
        simulate(params, 0.1, 8, rng, True)
        simulate(params, 0.1, 8, rng, False)
