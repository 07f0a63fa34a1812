"""Random recursive tree families with linear (out)degree attachment weights.

Two families are supported:

* ``Family.VSI`` -- very simple increasing trees: vertex ``v`` attracts the
  next vertex with weight ``alpha * outdeg(v) + 1``.
* ``Family.SE`` -- shape exchangeable trees: the weight is
  ``alpha * deg(v) + 1``.

``alpha`` is either a nonnegative real or an exact negative reciprocal
``-1/d``.  The latter is stored as the integer ``d`` and all weights are
then evaluated as integer ratios ``(d - k)/d``, so degree-capped trees
(uniform attachment on d-ary / d-regular trees) never see a spurious
negative weight from float rounding.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Family",
    "ParamError",
    "InvariantError",
    "ModelParams",
    "validate_params",
    "TreeState",
    "new_tree",
    "attach",
    "attachment_distribution",
    "sample_parent",
    "grow",
    "tree_to_parent_text",
    "tree_from_parent_text",
]


class Family(enum.Enum):
    """Which (out)degree enters the attachment weight."""

    VSI = "vsi"  # weight alpha * outdeg(v) + 1
    SE = "se"  # weight alpha * deg(v) + 1


class ParamError(ValueError):
    """Rejected model or run parameters."""


class InvariantError(RuntimeError):
    """Internal state violated a structural invariant (a bug, not bad input)."""


@dataclass(frozen=True)
class ModelParams:
    """Validated tree-family configuration.

    ``neg_d`` is set exactly when ``alpha`` is the negative reciprocal
    ``-1/neg_d``; in that case ``neg_d`` is authoritative and ``alpha`` is
    only its float image.  Build instances through :func:`validate_params`.
    """

    family: Family
    alpha: float
    neg_d: int | None = None

    @property
    def is_negative(self) -> bool:
        return self.neg_d is not None

    @property
    def label(self) -> str:
        return self.family.value

    def total_weight(self, n: int) -> float:
        """Sum of attachment weights over an n-vertex tree."""
        if self.neg_d is not None:
            d = self.neg_d
            if self.family is Family.VSI:
                return (d * n - (n - 1)) / d
            return (d * n - 2 * (n - 1)) / d
        if self.family is Family.VSI:
            return n + self.alpha * (n - 1)
        return n + self.alpha * (2 * (n - 1))

    def attach_terms(self, d1: int, d2: int, n: int) -> tuple[float, float]:
        """Numerator/denominator pair with red-attach probability
        ``(1 + num/den) / 2``.

        For ``alpha = -1/d`` both terms are exact integers over the shared
        denominator ``d``, which keeps the boundary states ``num = +-den``
        exact and the probability exactly 0 or 1 there.
        """
        if self.neg_d is not None:
            d = self.neg_d
            num = d * d1 - d2
            if self.family is Family.VSI:
                den = d * n - (n - 1)
            else:
                den = d * n - 2 * (n - 1)
            return float(num), float(den)
        a = self.alpha
        if self.family is Family.VSI:
            return d1 + a * d2, n + a * (n - 1)
        return d1 + a * d2, n + a * (2 * (n - 1))

    def combined(self, d1: int, d2: int) -> float:
        """The drift-controlling combination ``d1 + alpha * d2``."""
        if self.neg_d is not None:
            return (self.neg_d * d1 - d2) / self.neg_d
        return d1 + self.alpha * d2


def validate_params(
    family: Family | str,
    alpha: float | None = None,
    neg_d: int | None = None,
) -> ModelParams:
    """Validate a family/alpha combination and build :class:`ModelParams`.

    Exactly one of ``alpha`` (nonnegative real) and ``neg_d`` (integer
    ``d`` giving ``alpha = -1/d``) must be supplied.  Degree-capped trees
    require ``d >= 2`` for VSI and ``d >= 3`` for SE; the path-degenerate
    values ``alpha = -1`` (both) and ``alpha = -1/2`` (SE) are excluded.
    """
    try:
        family = Family(family)
    except ValueError:
        raise ParamError(f"unknown family: {family!r}") from None
    if (alpha is None) == (neg_d is None):
        raise ParamError("specify exactly one of alpha (>= 0) or neg_d (alpha = -1/d)")
    if alpha is not None:
        alpha = float(alpha)
        if not math.isfinite(alpha):
            raise ParamError(f"alpha must be finite, got {alpha!r}")
        if alpha < 0:
            raise ParamError(
                "negative alpha must be passed as neg_d so that -1/d stays exact"
            )
        return ModelParams(family, alpha, None)
    if isinstance(neg_d, bool) or not isinstance(neg_d, (int, np.integer)):
        raise ParamError(f"neg_d must be an integer, got {neg_d!r}")
    d = int(neg_d)
    min_d = 2 if family is Family.VSI else 3
    if d < min_d:
        raise ParamError(f"family {family.value} requires neg_d >= {min_d}, got {d}")
    return ModelParams(family, -1.0 / d, d)


class TreeState:
    """Growing recursive tree plus sampler bookkeeping for O(1) draws.

    Vertices are 1-based; index 0 of the ``parent``/``outdeg`` arrays is an
    unused placeholder and ``parent[1] = 0``.  Exactly one sampling aid is
    active, matching the parameters the tree was created with:

    * ``slots`` (``alpha > 0``): one weight-``alpha`` slot per directed edge
      at its parent endpoint (VSI), or at both endpoints (SE);
    * ``free_slots`` (``alpha = -1/d``): remaining open slots per vertex,
      i.e. vertex ``v`` appears ``d - outdeg(v)`` (VSI) or ``d - deg(v)``
      (SE) times;
    * neither (``alpha = 0``): uniform attachment needs no aid.
    """

    __slots__ = ("parent", "outdeg", "slots", "free_slots")

    def __init__(
        self,
        parent: list[int],
        outdeg: list[int],
        slots: list[int] | None,
        free_slots: list[int] | None,
    ):
        self.parent = parent
        self.outdeg = outdeg
        self.slots = slots
        self.free_slots = free_slots

    @property
    def n(self) -> int:
        return len(self.parent) - 1

    def degree(self, v: int) -> int:
        return self.outdeg[v] + (0 if v == 1 else 1)

    def __repr__(self) -> str:
        return f"TreeState(n={self.n})"


def new_tree(params: ModelParams) -> TreeState:
    """Single-vertex tree with sampler state matching ``params``."""
    slots: list[int] | None = None
    free: list[int] | None = None
    if params.neg_d is not None:
        free = [1] * params.neg_d  # the root starts with d open slots
    elif params.alpha > 0:
        slots = []
    return TreeState([0, 0], [0, 0], slots, free)


def attach(
    tree: TreeState,
    params: ModelParams,
    parent: int,
    *,
    _free_index: int | None = None,
) -> int:
    """Attach vertex ``n+1`` to ``parent``, updating sampler state.

    ``_free_index`` is the position of a known free slot of ``parent`` (used
    by :func:`grow` to stay O(1)); without it the degree-capped family falls
    back to a linear scan.
    """
    n = tree.n
    if not 1 <= parent <= n:
        raise ParamError(f"parent {parent} out of range 1..{n}")
    child = n + 1
    tree.parent.append(parent)
    tree.outdeg.append(0)
    tree.outdeg[parent] += 1
    if tree.slots is not None:
        tree.slots.append(parent)
        if params.family is Family.SE:
            tree.slots.append(child)
    if tree.free_slots is not None:
        free = tree.free_slots
        i = free.index(parent) if _free_index is None else _free_index
        if free[i] != parent:
            raise InvariantError("free-slot index does not match the chosen parent")
        free[i] = free[-1]
        free.pop()
        d = params.neg_d
        fresh = d if params.family is Family.VSI else d - 1
        free.extend([child] * fresh)
    return child


def attachment_distribution(tree: TreeState, params: ModelParams) -> np.ndarray:
    """Probability vector over vertices ``1..n``; entry ``v-1`` is the
    probability that the next vertex attaches to ``v``."""
    n = tree.n
    k = np.asarray(tree.outdeg[1:], dtype=np.int64)
    if params.family is Family.SE and n > 1:
        k = k.copy()
        k[1:] += 1  # degree = outdeg + 1 except at the root
    if params.neg_d is not None:
        d = params.neg_d
        w = (d - k).astype(np.float64)
        if w.min() < 0:
            raise InvariantError("vertex exceeded its degree cap")
        return w / (d * params.total_weight(n))
    w = params.alpha * k.astype(np.float64) + 1.0
    return w / params.total_weight(n)


def _draw_parent(
    tree: TreeState, params: ModelParams, rng: np.random.Generator
) -> tuple[int, int | None]:
    """Sample an attachment target; also returns the free-slot index when
    the degree-capped sampler was used (so the caller can remove it O(1))."""
    n = tree.n
    if params.neg_d is not None:
        free = tree.free_slots
        i = int(rng.integers(0, len(free)))
        return free[i], i
    if params.alpha == 0.0:
        return int(rng.integers(1, n + 1)), None
    # Two-stage mixture: total weight splits into n (one unit per vertex)
    # plus alpha per endpoint slot.
    total = params.total_weight(n)
    if rng.random() * total < n:
        return int(rng.integers(1, n + 1)), None
    slots = tree.slots
    return slots[int(rng.integers(0, len(slots)))], None


def sample_parent(
    tree: TreeState, params: ModelParams, rng: np.random.Generator
) -> int:
    """Sample the parent of the next vertex per the attachment distribution.

    Expected O(1) time; does not mutate the tree.
    """
    return _draw_parent(tree, params, rng)[0]


def grow(params: ModelParams, n_vertices: int, rng: np.random.Generator) -> TreeState:
    """Grow a tree to ``n_vertices`` by repeated sample-and-attach."""
    if n_vertices < 1:
        raise ParamError("a tree needs at least one vertex")
    tree = new_tree(params)
    for _ in range(n_vertices - 1):
        parent, idx = _draw_parent(tree, params, rng)
        attach(tree, params, parent, _free_index=idx)
    return tree


def tree_to_parent_text(tree: TreeState) -> str:
    """Parent-array text format: first line is the vertex count, line ``k``
    (for ``k >= 2``) holds ``parent[k]``."""
    lines = [str(tree.n)]
    lines.extend(str(tree.parent[k]) for k in range(2, tree.n + 1))
    return "\n".join(lines) + "\n"


def tree_from_parent_text(text: str, params: ModelParams) -> TreeState:
    """Parse the parent-array format, rebuilding sampler state for ``params``.

    Free-slot order is not preserved from the original growth run, which is
    irrelevant: draws are uniform over the slot multiset.
    """
    tokens = text.split()
    if not tokens:
        raise ParamError("empty tree serialization")
    n = int(tokens[0])
    if n < 1 or len(tokens) != n:
        raise ParamError(f"expected {max(n - 1, 0)} parent lines for n={n}")
    tree = new_tree(params)
    for k in range(2, n + 1):
        p = int(tokens[k - 1])
        if not 1 <= p <= k - 1:
            raise ParamError(f"parent of vertex {k} must be in 1..{k - 1}, got {p}")
        attach(tree, params, p)
    return tree
