"""Integer lattice geometry.

Contents
--------
* box enumeration helpers (``box_points``, ``centered_box``, ``ball_points``)
* ``LinearOrder``: addition-compatible total orders on Z^d (plain and graded
  lexicographic)
* ``HalfSpace``: the two half-space lattice families, coordinate half-spaces
  {j : j_p >= 0} and order cones {j : 0 <= j}
* thin functional wrappers (``order_compare``, ``order_min``,
  ``halfspace_contains``, ``enumerate_window``)

All index arrays are int64 with points along the first axis, so arithmetic
is exact and vectorized membership tests stay cheap.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError

__all__ = [
    "LinearOrder",
    "HalfSpace",
    "as_index_array",
    "box_points",
    "centered_box",
    "ball_points",
    "shell_points",
    "order_compare",
    "order_min",
    "halfspace_contains",
    "enumerate_window",
]


def as_index_array(points, dim: int | None = None) -> np.ndarray:
    """Coerce ``points`` to an (n, d) int64 array.

    Accepts a single index (length-d sequence) or a stack of indices.
    Raises DimensionMismatchError if the trailing dimension disagrees
    with ``dim``.
    """
    arr = np.asarray(points, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise DimensionMismatchError(
            f"expected a point or stack of points, got array of ndim {arr.ndim}"
        )
    if dim is not None and arr.shape[1] != dim:
        raise DimensionMismatchError(
            f"points have dimension {arr.shape[1]}, expected {dim}"
        )
    return arr


def box_points(lo, hi) -> np.ndarray:
    """All integer points k with lo <= k <= hi componentwise, row-major order."""
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def centered_box(dim: int, radius: int) -> np.ndarray:
    """Integer points of [-radius, radius]^dim in row-major order."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    r = np.full(dim, radius, dtype=np.int64)
    return box_points(-r, r)


def ball_points(dim: int, radius: float) -> np.ndarray:
    """Integer points with Euclidean norm <= radius, row-major order."""
    pts = centered_box(dim, int(np.floor(radius)))
    keep = np.einsum("ij,ij->i", pts, pts) <= radius * radius
    return pts[keep]


def shell_points(dim: int, radius: int) -> np.ndarray:
    """Integer points with infinity norm exactly ``radius``.

    Enumerated face by face without duplicates: a point belongs to the face
    of the first axis on which it attains the radius.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius == 0:
        return np.zeros((1, dim), dtype=np.int64)
    faces = []
    for ax in range(dim):
        ranges = []
        for b in range(dim):
            if b < ax:
                ranges.append(np.arange(-(radius - 1), radius, dtype=np.int64))
            elif b == ax:
                ranges.append(np.array([-radius, radius], dtype=np.int64))
            else:
                ranges.append(np.arange(-radius, radius + 1, dtype=np.int64))
        grids = np.meshgrid(*ranges, indexing="ij")
        faces.append(np.stack([g.ravel() for g in grids], axis=-1))
    return np.concatenate(faces, axis=0)


def _sign_cascade(columns) -> np.ndarray:
    """Sign of the first nonzero entry across the given key columns.

    ``columns`` are 1-d integer arrays ordered most significant first.
    """
    out = np.zeros(len(columns[0]), dtype=np.int8)
    for col in columns:
        s = np.sign(col).astype(np.int8)
        out = np.where(out == 0, s, out)
    return out


class LinearOrder:
    """Total order on Z^d compatible with addition.

    Two families are provided:

    * ``lex``: compare coordinates along a fixed axis-priority sequence
      (default: axis 1 first).
    * ``graded_lex``: compare coordinate sums first, break ties on the
      last coordinate, then the next-to-last, and so on.

    Comparisons depend only on the difference of the operands, which makes
    translation invariance automatic.
    """

    def __init__(self, dim: int, kind: str, priority=None):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        if kind not in ("lex", "graded_lex"):
            raise ValueError(f"unknown order kind {kind!r}")
        if kind == "graded_lex":
            if priority is not None:
                raise ValueError("graded_lex does not take a priority permutation")
            # tie-break axes, 0-based, last coordinate first
            key_axes = tuple(range(dim - 1, -1, -1))
        else:
            if priority is None:
                priority = tuple(range(1, dim + 1))
            priority = tuple(int(p) for p in priority)
            if sorted(priority) != list(range(1, dim + 1)):
                raise ValueError(
                    f"priority must be a permutation of 1..{dim}, got {priority}"
                )
            key_axes = tuple(p - 1 for p in priority)
        self.dim = int(dim)
        self.kind = kind
        self._key_axes = key_axes

    @classmethod
    def lex(cls, dim: int, priority=None) -> "LinearOrder":
        """Lexicographic order; ``priority`` lists 1-based axes, highest first."""
        return cls(dim, "lex", priority)

    @classmethod
    def graded_lex(cls, dim: int) -> "LinearOrder":
        """Order by coordinate sum, ties broken from the last axis down."""
        return cls(dim, "graded_lex")

    @property
    def priority(self) -> tuple:
        """Axis priority as 1-based indices, highest first (lex only)."""
        if self.kind != "lex":
            raise AttributeError("priority is defined for lex orders only")
        return tuple(a + 1 for a in self._key_axes)

    def _key_columns(self, pts: np.ndarray) -> list:
        cols = [pts[:, a] for a in self._key_axes]
        if self.kind == "graded_lex":
            cols.insert(0, pts.sum(axis=1))
        return cols

    def sign_many(self, points) -> np.ndarray:
        """Vectorized sign of each point against 0: -1 below, 0 at, +1 above."""
        pts = as_index_array(points, self.dim)
        return _sign_cascade(self._key_columns(pts))

    def compare_many(self, j, k) -> np.ndarray:
        """Vectorized comparison: -1 where j < k, 0 where equal, +1 where j > k."""
        a = as_index_array(j, self.dim)
        b = as_index_array(k, self.dim)
        diff = a - b if a.shape == b.shape else np.subtract(a, b)
        return _sign_cascade(self._key_columns(diff))

    def compare(self, j, k) -> int:
        return int(self.compare_many(j, k)[0])

    def argsort(self, points) -> np.ndarray:
        """Indices that sort ``points`` ascending in this order."""
        pts = as_index_array(points, self.dim)
        cols = self._key_columns(pts)
        # np.lexsort treats its last key as primary
        return np.lexsort(tuple(reversed(cols)))

    def sort(self, points) -> np.ndarray:
        pts = as_index_array(points, self.dim)
        return pts[self.argsort(pts)]

    def max_point(self, points) -> np.ndarray:
        """The order-largest of the given points."""
        pts = as_index_array(points, self.dim)
        return pts[self.argsort(pts)[-1]].copy()

    def __eq__(self, other):
        return (
            isinstance(other, LinearOrder)
            and self.dim == other.dim
            and self.kind == other.kind
            and self._key_axes == other._key_axes
        )

    def __hash__(self):
        return hash((self.dim, self.kind, self._key_axes))

    def __repr__(self):
        if self.kind == "lex":
            return f"LinearOrder.lex(dim={self.dim}, priority={self.priority})"
        return f"LinearOrder.graded_lex(dim={self.dim})"


class HalfSpace:
    """Half-space sublattice of Z^d.

    Two variants:

    * ``coordinate(dim, axis)``: all j with j_axis >= 0 (axis is 1-based,
      default the last). Closed under addition; for d > 1 it contains the
      full sublattice {j_axis = 0}, so H and -H overlap beyond {0}.
    * ``ordered(order)``: the cone {j : 0 <= j} of a LinearOrder. Closed
      under addition and meets its mirror image only at the origin.
    """

    def __init__(self, dim: int, variant: str, axis: int | None = None,
                 order: LinearOrder | None = None):
        if variant == "coordinate":
            if axis is None:
                axis = dim
            if not 1 <= axis <= dim:
                raise ValueError(f"axis must lie in 1..{dim}, got {axis}")
            if order is not None:
                raise ValueError("coordinate half-space does not take an order")
        elif variant == "ordered":
            if order is None:
                raise ValueError("ordered half-space requires a LinearOrder")
            if order.dim != dim:
                raise DimensionMismatchError(
                    f"order has dimension {order.dim}, half-space has {dim}"
                )
            if axis is not None:
                raise ValueError("ordered half-space does not take an axis")
        else:
            raise ValueError(f"unknown half-space variant {variant!r}")
        self.dim = int(dim)
        self.variant = variant
        self.axis = axis
        self.order = order

    @classmethod
    def coordinate(cls, dim: int, axis: int | None = None) -> "HalfSpace":
        return cls(dim, "coordinate", axis=axis)

    @classmethod
    def ordered(cls, order: LinearOrder) -> "HalfSpace":
        return cls(order.dim, "ordered", order=order)

    def contains_many(self, points) -> np.ndarray:
        pts = as_index_array(points, self.dim)
        if self.variant == "coordinate":
            return pts[:, self.axis - 1] >= 0
        return self.order.sign_many(pts) >= 0

    def contains(self, point) -> bool:
        return bool(self.contains_many(point)[0])

    def split_sign_many(self, points) -> np.ndarray:
        """Antisymmetric sign used to split symmetric coefficient mass.

        Returns +1 strictly inside the splitting region, -1 strictly in the
        mirror, and 0 on the self-paired set (the axis hyperplane for the
        coordinate variant, the origin for the ordered one). Satisfies
        sign(-j) = -sign(j), so half weights at 0 pair up exactly.
        """
        pts = as_index_array(points, self.dim)
        if self.variant == "coordinate":
            return np.sign(pts[:, self.axis - 1]).astype(np.int8)
        return self.order.sign_many(pts)

    def window(self, box_radius: int) -> np.ndarray:
        """H intersected with the cube [-box_radius, box_radius]^d.

        Ordered variant: sorted ascending by its order. Coordinate variant:
        row-major. Both deterministic.
        """
        if box_radius < 0:
            raise ValueError("box_radius must be nonnegative")
        pts = centered_box(self.dim, box_radius)
        pts = pts[self.contains_many(pts)]
        if self.variant == "ordered":
            return self.order.sort(pts)
        return pts

    def descriptor(self):
        """Compact numeric form (code, axis0, key_axes) for compiled kernels.

        code 0: coordinate, test column ``axis0``.
        code 1: lex cone, sign cascade over ``key_axes``.
        code 2: graded cone, coordinate-sum sign then cascade over ``key_axes``.
        """
        if self.variant == "coordinate":
            return 0, self.axis - 1, np.arange(self.dim, dtype=np.int64)
        code = 1 if self.order.kind == "lex" else 2
        return code, 0, np.asarray(self.order._key_axes, dtype=np.int64)

    def __eq__(self, other):
        return (
            isinstance(other, HalfSpace)
            and self.dim == other.dim
            and self.variant == other.variant
            and self.axis == other.axis
            and self.order == other.order
        )

    def __hash__(self):
        return hash((self.dim, self.variant, self.axis, self.order))

    def __repr__(self):
        if self.variant == "coordinate":
            return f"HalfSpace.coordinate(dim={self.dim}, axis={self.axis})"
        return f"HalfSpace.ordered({self.order!r})"


def order_compare(order: LinearOrder, j, k) -> int:
    """-1, 0, or +1 as j is below, equal to, or above k."""
    return order.compare(j, k)


def order_min(order: LinearOrder, j, k) -> np.ndarray:
    """The order-smaller of j and k (either when equal)."""
    a = as_index_array(j, order.dim)[0]
    b = as_index_array(k, order.dim)[0]
    return a.copy() if order.compare(a, b) <= 0 else b.copy()


def halfspace_contains(halfspace: HalfSpace, j) -> bool:
    return halfspace.contains(j)


def enumerate_window(halfspace: HalfSpace, box_radius: int) -> np.ndarray:
    return halfspace.window(box_radius)
