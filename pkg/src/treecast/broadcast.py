"""Broadcast coloring and the majority estimator.

The root is red (+1) by symmetry; every later vertex copies its parent's
color and flips with probability ``q``.  The majority estimator outputs the
sign of the color sum (a fair coin on ties) and errs exactly when the color
difference ``d1`` ends negative, plus half of the ties.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .models import Family, ModelParams, ParamError, _draw_parent, attach, new_tree
from .walk import DeltaState

__all__ = [
    "BroadcastResult",
    "assign_color",
    "majority_estimator",
    "simulate_broadcast",
]


def assign_color(parent_color: int, q: float, rng: np.random.Generator) -> int:
    """Child color: the parent's with probability ``1-q``, flipped otherwise."""
    if parent_color not in (-1, 1):
        raise ParamError(f"colors are +-1, got {parent_color}")
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ParamError(f"flip probability must lie in [0, 1], got {q}")
    return -parent_color if rng.random() < q else parent_color


def majority_estimator(delta1_final: int, rng: np.random.Generator) -> int:
    """Sign of the color sum; a fair +-1 coin on a tie."""
    if delta1_final > 0:
        return 1
    if delta1_final < 0:
        return -1
    return 1 if rng.random() < 0.5 else -1


@dataclass
class BroadcastResult:
    """Outcome of one broadcast run.

    ``pair_counts`` tallies the transitions ``2..N`` by (parent color,
    child color) as ``(rr, rb, br, bb)``; they always satisfy
    ``rr + rb + br + bb = N - 1`` and
    ``d1 = 1 + rr + br - rb - bb``.
    """

    n_vertices: int
    final: DeltaState
    pair_counts: tuple[int, int, int, int]
    ns: np.ndarray | None = field(default=None, repr=False)
    d1s: np.ndarray | None = field(default=None, repr=False)
    d2s: np.ndarray | None = field(default=None, repr=False)
    stride: int = 1

    @property
    def trajectory(self) -> list[DeltaState] | None:
        if self.ns is None:
            return None
        return [
            DeltaState(int(n), int(a), int(b))
            for n, a, b in zip(self.ns, self.d1s, self.d2s)
        ]

    def to_json_dict(self) -> dict:
        return {
            "N": self.n_vertices,
            "delta1": self.final.d1,
            "delta2": self.final.d2,
            "pair_counts": list(self.pair_counts),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def _simulate_fused(params, q, n_vertices, rng, record):
    (d1, d2, rr, rb, br, bb), rec = _kernels.simulate(
        params, q, n_vertices - 1, rng, record
    )
    final = DeltaState(n_vertices, int(d1), int(d2))
    if not record:
        return BroadcastResult(n_vertices, final, (rr, rb, br, bb))
    ns = np.arange(1, n_vertices + 1, dtype=np.int64)
    d1s = np.concatenate((np.array([1], dtype=np.int64), rec[0]))
    d2s = np.concatenate((np.array([0], dtype=np.int64), rec[1]))
    return BroadcastResult(n_vertices, final, (rr, rb, br, bb), ns, d1s, d2s)


def _simulate_tree(params, q, n_vertices, rng, record):
    tree = new_tree(params)
    colors = [0, 1]  # colors[v] in {+1, -1}; root is red
    d1, d2 = 1, 0
    rr = rb = br = bb = 0
    if record:
        d1s = np.empty(n_vertices, dtype=np.int64)
        d2s = np.empty(n_vertices, dtype=np.int64)
        d1s[0], d2s[0] = d1, d2
    se = params.family is Family.SE
    for k in range(n_vertices - 1):
        parent, idx = _draw_parent(tree, params, rng)
        color = assign_color(colors[parent], q, rng)
        attach(tree, params, parent, _free_index=idx)
        colors.append(color)
        parent_red = colors[parent] == 1
        child_red = color == 1
        d1 += 1 if child_red else -1
        d2 += 1 if parent_red else -1
        if se:
            d2 += 1 if child_red else -1
        if parent_red:
            if child_red:
                rr += 1
            else:
                rb += 1
        elif child_red:
            br += 1
        else:
            bb += 1
        if record:
            d1s[k + 1], d2s[k + 1] = d1, d2
    final = DeltaState(n_vertices, d1, d2)
    if not record:
        return BroadcastResult(n_vertices, final, (rr, rb, br, bb))
    ns = np.arange(1, n_vertices + 1, dtype=np.int64)
    return BroadcastResult(n_vertices, final, (rr, rb, br, bb), ns, d1s, d2s)


def simulate_broadcast(
    params: ModelParams,
    q: float,
    n_vertices: int,
    rng: np.random.Generator,
    *,
    record_trajectory: bool = False,
    method: str = "fused",
) -> BroadcastResult:
    """Grow-and-color in one pass and return the walk statistics.

    ``method="fused"`` never materialises the tree: each step samples the
    parent *color* directly from the integer tallies.  ``method="tree"``
    grows an explicit tree and colors it vertex by vertex.  The two paths
    are identical in law (not in their random streams).  Per step the
    parent draw(s) come first, then the flip draw.
    """
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ParamError(f"flip probability must lie in [0, 1], got {q}")
    if n_vertices < 1:
        raise ParamError("n_vertices must be >= 1")
    if method == "fused":
        return _simulate_fused(params, q, n_vertices, rng, record_trajectory)
    if method == "tree":
        return _simulate_tree(params, q, n_vertices, rng, record_trajectory)
    raise ParamError(f"unknown method: {method!r}")
