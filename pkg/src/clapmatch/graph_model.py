"""Graph data model: node sets with descriptors, edge-attribute matrices,
node similarity, the accuracy metric, and the graph-pair JSON schema."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .errors import DegenerateGeometryError, InvalidInputError

ATTRIBUTE_KINDS = ("length", "adjacency", "inner_product")


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GraphSide:
    """One graph of a matching problem: 2D node coordinates plus a descriptor
    vector per node. Immutable after construction."""

    points: np.ndarray
    descriptors: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        desc = _frozen(self.descriptors)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidInputError(f"points must be (n, 2), got {pts.shape}")
        if desc.ndim != 2 or desc.shape[1] < 1:
            raise InvalidInputError(f"descriptors must be (n, d) with d >= 1, got {desc.shape}")
        if pts.shape[0] != desc.shape[0]:
            raise InvalidInputError(
                f"point count {pts.shape[0]} != descriptor count {desc.shape[0]}")
        if not (np.isfinite(pts).all() and np.isfinite(desc).all()):
            raise InvalidInputError("points and descriptors must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "descriptors", desc)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.descriptors.shape[1]


@dataclass(frozen=True)
class EdgeAttributeMatrix:
    """Symmetric pairwise edge attributes with a zero diagonal.

    Symmetry is exact by construction (entries are mirrored, not recomputed),
    so downstream identities that rely on D = D^T hold bit for bit.
    """

    values: np.ndarray
    kind: str

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise InvalidInputError(f"edge attributes must be square, got {vals.shape}")
        if not np.isfinite(vals).all():
            raise InvalidInputError("edge attributes must be finite")
        if not np.array_equal(vals, vals.T):
            raise InvalidInputError("edge attributes must be exactly symmetric")
        if np.any(np.diagonal(vals) != 0.0):
            raise InvalidInputError("edge attributes must have a zero diagonal")
        if self.kind not in ATTRIBUTE_KINDS:
            raise InvalidInputError(f"unknown attribute kind {self.kind!r}")
        object.__setattr__(self, "values", vals)

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class NodeSimilarityMatrix:
    """Dense node-to-node similarity scores, one row per left node."""

    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 2:
            raise InvalidInputError(f"node similarity must be 2D, got {vals.shape}")
        if not np.isfinite(vals).all():
            raise InvalidInputError("node similarity must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class HardAssignment:
    """Binary assignment matrix: every row matched exactly once, every column
    at most once."""

    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 2:
            raise InvalidInputError(f"assignment must be 2D, got {vals.shape}")
        if not np.isin(vals, (0.0, 1.0)).all():
            raise InvalidInputError("assignment entries must be 0 or 1")
        if np.any(vals.sum(axis=1) != 1.0):
            raise InvalidInputError("every assignment row must sum to exactly 1")
        if np.any(vals.sum(axis=0) > 1.0):
            raise InvalidInputError("assignment columns must sum to at most 1")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_cols(cls, cols, m: int) -> "HardAssignment":
        """Build from the column index assigned to each row."""
        cols = np.asarray(cols, dtype=int)
        vals = np.zeros((cols.shape[0], m))
        vals[np.arange(cols.shape[0]), cols] = 1.0
        return cls(vals)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(self.values)
        return list(zip(rows.tolist(), cols.tolist()))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _mirror_upper(upper: np.ndarray) -> np.ndarray:
    """Copy the strict upper triangle onto the lower one, zero the diagonal."""
    out = np.triu(upper, k=1)
    return out + out.T


def _as_matrix(values, name: str) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=float)
    except (ValueError, TypeError) as exc:
        raise InvalidInputError(f"{name} is not a rectangular numeric array: {exc}") from exc
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2D, got shape {arr.shape}")
    return arr


def build_length_attributes(points, normalize: bool = False) -> EdgeAttributeMatrix:
    """Pairwise Euclidean distances between nodes.

    With ``normalize`` the matrix is divided by its largest entry, which makes
    it invariant under uniform scaling of the coordinates.
    """
    pts = _as_matrix(points, "points")
    if pts.shape[1] != 2:
        raise InvalidInputError(f"points must be (n, 2), got {pts.shape}")
    if pts.shape[0] < 2:
        raise InvalidInputError("need at least 2 points for length attributes")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = _mirror_upper(np.sqrt((diff ** 2).sum(axis=-1)))
    if normalize:
        longest = dist.max()
        if longest == 0.0:
            raise DegenerateGeometryError("all points coincide, cannot normalize lengths")
        dist = dist / longest
    return EdgeAttributeMatrix(dist, "length")


def build_adjacency_attributes(points) -> EdgeAttributeMatrix:
    """0/1 adjacency from the Delaunay triangulation of the points.

    Degenerate inputs (fewer than 3 points, collinear sets) fall back to a
    chain along the dominant coordinate axis. Cocircular quads are resolved
    deterministically: the kept diagonal is the one touching the lowest node
    index.
    """
    pts = _as_matrix(points, "points")
    if pts.shape[1] != 2:
        raise InvalidInputError(f"points must be (n, 2), got {pts.shape}")
    n = pts.shape[0]
    if n < 2:
        raise InvalidInputError("need at least 2 points for adjacency attributes")
    vals = np.zeros((n, n))
    for i, j in _delaunay_edges(pts):
        vals[i, j] = vals[j, i] = 1.0
    return EdgeAttributeMatrix(vals, "adjacency")


def _chain_edges(pts: np.ndarray) -> set[tuple[int, int]]:
    spans = np.ptp(pts, axis=0)
    dominant = 0 if spans[0] >= spans[1] else 1
    order = np.lexsort((pts[:, 1 - dominant], pts[:, dominant]))
    return {tuple(sorted((int(a), int(b)))) for a, b in zip(order[:-1], order[1:])}


def _incircle_det(pts: np.ndarray, a: int, b: int, c: int, d: int) -> float:
    rows = []
    for v in (a, b, c):
        dx, dy = pts[v] - pts[d]
        rows.append((dx, dy, dx * dx + dy * dy))
    m = np.array(rows)
    return float(np.linalg.det(m))


def _flip_cocircular_once(pts: np.ndarray, triangles: set[tuple[int, int, int]],
                          tol: float) -> bool:
    opposite: dict[tuple[int, int], list[int]] = {}
    for t in triangles:
        for e in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2])):
            other = (set(t) - set(e)).pop()
            opposite.setdefault(e, []).append(other)
    for edge in sorted(opposite):
        opp = opposite[edge]
        if len(opp) != 2:
            continue
        i, j = edge
        k, l = sorted(opp)
        if abs(_incircle_det(pts, i, j, k, l)) > tol:
            continue
        if min(i, j, k, l) in (i, j):
            continue
        triangles.discard(tuple(sorted((i, j, k))))
        triangles.discard(tuple(sorted((i, j, l))))
        triangles.add(tuple(sorted((k, l, i))))
        triangles.add(tuple(sorted((k, l, j))))
        return True
    return False


def _delaunay_edges(pts: np.ndarray) -> set[tuple[int, int]]:
    if pts.shape[0] < 3:
        return _chain_edges(pts)
    try:
        tri = Delaunay(pts)
    except QhullError:
        return _chain_edges(pts)
    if tri.simplices.size == 0:
        return _chain_edges(pts)
    triangles = {tuple(sorted(int(v) for v in s)) for s in tri.simplices}
    # work on unit-scaled coordinates so the cocircularity test is scale-free
    span = float(np.ptp(pts, axis=0).max())
    scaled = (pts - pts.min(axis=0)) / (span if span > 0 else 1.0)
    for _ in range(3 * pts.shape[0]):
        if not _flip_cocircular_once(scaled, triangles, tol=1e-9):
            break
    edges: set[tuple[int, int]] = set()
    for t in triangles:
        edges.update(((t[0], t[1]), (t[0], t[2]), (t[1], t[2])))
    return edges


def build_inner_product_attributes(descriptors) -> EdgeAttributeMatrix:
    """Descriptor inner products between distinct nodes, zero diagonal."""
    desc = _as_matrix(descriptors, "descriptors")
    if desc.shape[0] < 2:
        raise InvalidInputError("need at least 2 descriptors for inner-product attributes")
    return EdgeAttributeMatrix(_mirror_upper(desc @ desc.T), "inner_product")


def node_similarity(a: GraphSide, b: GraphSide, scale: float = 1.0) -> NodeSimilarityMatrix:
    """Similarity U = scale * psi(A) psi(B)^T between every node pair."""
    if a.dim != b.dim:
        raise InvalidInputError(f"descriptor dimensions differ: {a.dim} vs {b.dim}")
    if not (np.isfinite(scale) and scale > 0):
        raise InvalidInputError(f"scale must be a positive real, got {scale}")
    return NodeSimilarityMatrix(scale * (a.descriptors @ b.descriptors.T))


def accuracy(p: HardAssignment, truth: HardAssignment) -> float:
    """Fraction of rows whose assigned column agrees with the ground truth."""
    if p.shape != truth.shape:
        raise InvalidInputError(f"assignment shapes differ: {p.shape} vs {truth.shape}")
    n = p.shape[0]
    return float(np.sum(p.values * truth.values) / n)


# ---------------------------------------------------------------------------
# Graph-pair JSON schema: {"a": {...}, "b": {...}, "truth": [[i, j], ...]}
# ---------------------------------------------------------------------------

def pair_to_dict(a: GraphSide, b: GraphSide, truth: HardAssignment | None = None) -> dict:
    obj = {
        "a": {"points": a.points.tolist(), "descriptors": a.descriptors.tolist()},
        "b": {"points": b.points.tolist(), "descriptors": b.descriptors.tolist()},
    }
    if truth is not None:
        obj["truth"] = [[i, j] for i, j in truth.pairs]
    return obj


def pair_from_dict(obj) -> tuple[GraphSide, GraphSide, HardAssignment | None]:
    if not isinstance(obj, dict) or "a" not in obj or "b" not in obj:
        raise InvalidInputError("graph pair must be an object with fields 'a' and 'b'")
    sides = []
    for key in ("a", "b"):
        side = obj[key]
        if not isinstance(side, dict) or "points" not in side or "descriptors" not in side:
            raise InvalidInputError(f"side {key!r} must carry 'points' and 'descriptors'")
        try:
            sides.append(GraphSide(np.array(side["points"], dtype=float),
                                   np.array(side["descriptors"], dtype=float)))
        except (ValueError, TypeError) as exc:
            raise InvalidInputError(f"side {key!r} is malformed: {exc}") from exc
    a, b = sides
    truth = None
    if obj.get("truth") is not None:
        vals = np.zeros((a.size, b.size))
        try:
            for i, j in obj["truth"]:
                vals[int(i), int(j)] = 1.0
        except (ValueError, TypeError, IndexError) as exc:
            raise InvalidInputError(f"truth pairs are malformed: {exc}") from exc
        truth = HardAssignment(vals)
    return a, b, truth
