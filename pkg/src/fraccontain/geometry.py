"""Convex hulls, containment distances and run reports.

Hulls are supported for d in {1, 2, 3}. A point set whose affine hull has
lower dimension (coincident, collinear or coplanar points) collapses to a
lower-dimensional hull with zero volume.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import ConvexHull as _Qhull

from . import _kernels
from .errors import ArgumentError, UnsupportedDimensionError

_RANK_TOL = 1e-12


@dataclass(frozen=True)
class ConvexHull:
    """Extreme-point representation of ``Co(points)``.

    ``vertices`` is ``(v, d)`` in ambient coordinates. For an intrinsic
    dimension of 1 they are the two segment endpoints (sorted when d = 1),
    for 2 a polygon that is counterclockwise in the plane spanned by
    ``basis`` (the coordinate plane when d = 2), and for 3 the polytope's
    extreme points with ``triangles`` indexing the boundary surface.
    """

    dimension: int
    vertices: np.ndarray
    intrinsic_dim: int
    triangles: np.ndarray | None = None
    origin: np.ndarray | None = None
    basis: np.ndarray | None = None


class HullMembership(NamedTuple):
    inside: bool
    distance: float


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ArgumentError("points must be a nonempty (n, d) array")
    if pts.shape[1] > 3:
        raise UnsupportedDimensionError(f"exact hulls are limited to d <= 3 (got d = {pts.shape[1]})")
    return pts


def _chain(xy):
    """Indices of the counterclockwise hull of 2-d points (monotone chain)."""
    order = np.lexsort((xy[:, 1], xy[:, 0]))

    def cross(o, a, b):
        return (xy[a, 0] - xy[o, 0]) * (xy[b, 1] - xy[o, 1]) - (xy[a, 1] - xy[o, 1]) * (xy[b, 0] - xy[o, 0])

    lower, upper = [], []
    for p in order:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in order[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def convex_hull(points) -> ConvexHull:
    pts = _as_points(points)
    d = pts.shape[1]
    origin = pts.mean(axis=0)
    centered = pts - origin
    scale = max(1.0, float(np.abs(centered).max()))
    _, sing, vt = np.linalg.svd(centered, full_matrices=False)
    rank = int(np.sum(sing > _RANK_TOL * scale * max(1, len(pts))))

    if rank == 0:
        return ConvexHull(d, pts[:1].copy(), 0)
    if rank == 1:
        t = centered @ vt[0]
        lo, hi = int(np.argmin(t)), int(np.argmax(t))
        ends = pts[[lo, hi]]
        if d == 1:
            ends = np.sort(ends, axis=0)
        return ConvexHull(d, ends, 1)
    if rank == 2:
        if d == 2:
            return ConvexHull(d, pts[_chain(pts)], 2)
        basis = vt[:2]
        planar = centered @ basis.T
        idx = _chain(planar)
        return ConvexHull(d, pts[idx], 2, origin=origin, basis=basis)
    qh = _Qhull(pts)
    verts = qh.vertices
    remap = {v: r for r, v in enumerate(verts)}
    tris = np.array([[remap[v] for v in simplex] for simplex in qh.simplices], dtype=int)
    return ConvexHull(d, pts[verts], 3, triangles=tris)


def _segment_distance(p, a, b):
    """Distances from points ``p`` (m, d) to the segment ``[a, b]``."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(p - a, axis=1)
    t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


def _polygon_distance(p, poly):
    """Distances from 2-d points to a counterclockwise polygon (0 inside)."""
    v = len(poly)
    nxt = np.roll(poly, -1, axis=0)
    edge = nxt - poly
    rel = p[:, None, :] - poly[None, :, :]
    cross = edge[None, :, 0] * rel[:, :, 1] - edge[None, :, 1] * rel[:, :, 0]
    inside = np.all(cross >= 0, axis=1)
    dist = np.min(np.stack([_segment_distance(p, poly[e], nxt[e]) for e in range(v)], axis=1), axis=1)
    return np.where(inside, 0.0, dist)


def _triangle_distance(p, a, b, c):
    normal = np.cross(b - a, c - a)
    nn = float(normal @ normal)
    edges = np.minimum(
        np.minimum(_segment_distance(p, a, b), _segment_distance(p, b, c)), _segment_distance(p, c, a)
    )
    if nn == 0.0:
        return edges
    h = (p - a) @ normal / nn
    foot = p - h[:, None] * normal
    # barycentric sign test of the projected point
    s1 = np.cross(b - a, foot - a) @ normal
    s2 = np.cross(c - b, foot - b) @ normal
    s3 = np.cross(a - c, foot - c) @ normal
    within = ((s1 >= 0) & (s2 >= 0) & (s3 >= 0)) | ((s1 <= 0) & (s2 <= 0) & (s3 <= 0))
    return np.where(within, np.abs(h) * math.sqrt(nn), edges)


def hull_distances(points, hull: ConvexHull) -> np.ndarray:
    """Euclidean distance from each point to the hull set (0 inside)."""
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p[:, None] if hull.dimension == 1 else p[None, :]
    if p.shape[1] != hull.dimension:
        raise ArgumentError(f"dimension mismatch: point d={p.shape[1]}, hull d={hull.dimension}")
    v = hull.vertices
    if hull.intrinsic_dim == 0:
        return np.linalg.norm(p - v[0], axis=1)
    if hull.intrinsic_dim == 1:
        return _segment_distance(p, v[0], v[1])
    if hull.intrinsic_dim == 2:
        if hull.dimension == 2:
            return _polygon_distance(p, v)
        rel = p - hull.origin
        planar = rel @ hull.basis.T
        off_plane = rel - planar @ hull.basis
        in_plane = _polygon_distance(planar, (v - hull.origin) @ hull.basis.T)
        return np.sqrt(in_plane**2 + np.einsum("ij,ij->i", off_plane, off_plane))
    centroid = v.mean(axis=0)
    inside = np.ones(len(p), dtype=bool)
    dist = np.full(len(p), np.inf)
    for tri in hull.triangles:
        a, b, c = v[tri]
        normal = np.cross(b - a, c - a)
        if (centroid - a) @ normal > 0:
            normal = -normal
        inside &= (p - a) @ normal <= 0
        dist = np.minimum(dist, _triangle_distance(p, a, b, c))
    return np.where(inside, 0.0, dist)


def point_in_hull(point, hull: ConvexHull, tol: float = 1e-3) -> HullMembership:
    p = np.atleast_1d(np.asarray(point, dtype=float))
    if p.shape != (hull.dimension,):
        raise ArgumentError(f"dimension mismatch: point d={p.size}, hull d={hull.dimension}")
    dist = float(hull_distances(p[None, :], hull)[0])
    return HullMembership(inside=dist <= tol, distance=dist)


def hull_volume(hull: ConvexHull) -> float:
    """Length, area or volume of the hull; 0 when it is degenerate."""
    if hull.dimension > 3:
        raise UnsupportedDimensionError("volume is only defined for d <= 3")
    if hull.intrinsic_dim < hull.dimension:
        return 0.0
    v = hull.vertices
    if hull.dimension == 1:
        return float(v[1, 0] - v[0, 0])
    if hull.dimension == 2:
        x, y = v[:, 0], v[:, 1]
        return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))
    c = v.mean(axis=0)
    tets = v[hull.triangles] - c
    return float(np.abs(np.linalg.det(tets)).sum() / 6.0)


def hull_volume_series(states) -> np.ndarray:
    """Hull volume of all agents at every recorded step of a ``(R, n, d)`` array."""
    s = np.asarray(states, dtype=float)
    d = s.shape[2]
    if d == 1:
        return np.ptp(s[:, :, 0], axis=1)
    if d == 2:
        return _kernels.hull_area_batch(np.ascontiguousarray(s))
    if d == 3:
        return np.array([hull_volume(convex_hull(frame)) for frame in s])
    raise UnsupportedDimensionError("hull volume is only defined for d <= 3")


def spread(states) -> np.ndarray:
    """Per-coordinate max minus min over agents."""
    q = np.asarray(states, dtype=float)
    if q.ndim == 1:
        q = q[:, None]
    if q.shape[0] == 0:
        raise ArgumentError("spread needs at least one state")
    return np.ptp(q, axis=-2)


# --------------------------------------------------------------------------
# reports


@dataclass
class ContainmentReport:
    """Verdicts of one run. Series are indexed like ``times``.

    ``hull_mode`` is ``"exact"`` for d <= 3; for larger d the hull volume and
    hull distances are replaced by the per-coordinate interval proxy
    (``"interval-proxy"``), a necessary condition only.
    """

    scenario_id: str
    scheme: str
    alpha: float
    complete: bool
    failure: dict | None
    connectivity_preserved: bool
    min_margin_over_run: float
    final_hull_distances: dict
    containment_tol: float
    contained: bool
    hull_mode: str
    leader_hull_volume: float
    times: list
    hull_volume_series: list
    max_hull_volume_increase: float
    spread_series: list
    max_spread_increase: float
    follower_hull_distance_series: list
    equilibrium_residuals: dict
    pi_offdiag_min: float
    pi_rowsum_max: float
    coef_min: float | None = None
    coef_sum_err_max: float | None = None
    added_edges: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _interval_distances(points, leaders):
    lo, hi = leaders.min(axis=0), leaders.max(axis=0)
    gap = np.maximum(lo - points, 0.0) + np.maximum(points - hi, 0.0)
    return np.linalg.norm(gap, axis=-1)


def _max_increase(series):
    s = np.asarray(series, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if len(s) < 2:
        return 0.0
    return float(max(0.0, np.max(np.diff(s, axis=0))))


def build_report(trajectory, topology=None, params=None, containment_tol: float = 1e-3) -> ContainmentReport:
    """Aggregate connectivity, containment, hull and equilibrium verdicts.

    ``topology`` and ``params`` default to those of ``trajectory.config``.
    An aborted run yields ``complete = False`` with the failure metadata and
    verdicts computed over the recorded prefix.
    """
    from .engine import equilibrium_residual

    config = trajectory.config
    topology = topology or config.topology
    params = params or config.params
    states = trajectory.states
    followers = list(topology.followers)
    leaders = config.initial_states[list(topology.leaders)]
    d = states.shape[2]

    if d <= 3:
        leader_hull = convex_hull(leaders)
        leader_volume = hull_volume(leader_hull)
        flat = states[:, followers].reshape(-1, d)
        dist_series = hull_distances(flat, leader_hull).reshape(len(states), len(followers))
        volumes = hull_volume_series(states)
        mode = "exact"
    else:
        leader_volume = float("nan")
        dist_series = _interval_distances(states[:, followers], leaders)
        volumes = np.prod(spread(states), axis=-1)
        mode = "interval-proxy"

    spreads = spread(states)
    final_dist = dist_series[-1]
    min_margin = float(trajectory.min_margin_overall)
    connectivity = bool(min_margin > 0)

    residuals = {}
    if connectivity:
        try:
            res = equilibrium_residual(states[-1], topology, params)
            residuals = {str(i): float(r) for i, r in zip(followers, res)}
        except ArithmeticError:
            residuals = {}

    coef_min = coef_err = None
    if trajectory.coef_min is not None and len(trajectory.coef_min):
        coef_min = float(trajectory.coef_min.min())
        coef_err = float(trajectory.coef_sum_err.max())

    return ContainmentReport(
        scenario_id=config.scenario_id,
        scheme=trajectory.scheme,
        alpha=config.alpha.alpha,
        complete=bool(trajectory.completed),
        failure=trajectory.failure,
        connectivity_preserved=connectivity,
        min_margin_over_run=min_margin,
        final_hull_distances={str(i): float(x) for i, x in zip(followers, final_dist)},
        containment_tol=containment_tol,
        contained=bool(np.all(final_dist <= containment_tol)),
        hull_mode=mode,
        leader_hull_volume=leader_volume,
        times=trajectory.times.tolist(),
        hull_volume_series=np.asarray(volumes, dtype=float).tolist(),
        max_hull_volume_increase=_max_increase(volumes),
        spread_series=spreads.tolist(),
        max_spread_increase=_max_increase(spreads),
        follower_hull_distance_series=dist_series.max(axis=1).tolist(),
        equilibrium_residuals=residuals,
        pi_offdiag_min=float(trajectory.pi_offdiag_min.min()) if len(trajectory.pi_offdiag_min) else math.nan,
        pi_rowsum_max=float(trajectory.pi_rowsum_err.max()) if len(trajectory.pi_rowsum_err) else math.nan,
        coef_min=coef_min,
        coef_sum_err_max=coef_err,
        added_edges=list(trajectory.added_edges),
    )
