"""Point-cloud geometry kernels: primitive solids with uniform interior
sampling, convex hulls with containment tests, per-point affine transforms,
and z-locked ICP alignment.

All clouds are float64 arrays of shape (N, 3), coordinates in meters.
Tolerances: HULL_TOL (facet fitting) and CONTAIN_TOL (strict interior test)
are module constants so tests and callers share one convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull as _QHull, QhullError, cKDTree

HULL_TOL = 1e-9
CONTAIN_TOL = 1e-12

IDENTITY_TRANSFORM_ROW = np.array([1.0, 0, 0, 0, 0, 1.0, 0, 0, 0, 0, 1.0, 0])


class GeometryError(ValueError):
    """Degenerate geometry (zero volume, coplanar hull input, ...)."""


def as_cloud(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
        raise GeometryError(f"point cloud must be (N, 3) with N >= 1, got {pts.shape}")
    if not np.isfinite(pts).all():
        raise GeometryError("point cloud contains non-finite coordinates")
    return pts


def rotz(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# ------------------------------------------------------------------ solids

@dataclass
class Pose:
    """Rigid placement: world position of the solid center + yaw about z."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)

    def to_world(self, local: np.ndarray) -> np.ndarray:
        return local @ rotz(self.yaw).T + self.position

    def to_local(self, world: np.ndarray) -> np.ndarray:
        return (world - self.position) @ rotz(self.yaw)

    def to_dict(self):
        return {"position": self.position.tolist(), "yaw": float(self.yaw)}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["position"]), float(d["yaw"]))


class Solid:
    """A primitive solid with a pose.  Subclasses define the local-frame
    half-extent bounding box, containment, and volume."""

    kind = "solid"

    def __init__(self, pose: Pose | None = None):
        self.pose = pose or Pose()

    # local-frame interface -------------------------------------------------
    def local_bounds(self) -> np.ndarray:
        raise NotImplementedError

    def contains_local(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def volume(self) -> float:
        raise NotImplementedError

    # world-frame interface -------------------------------------------------
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """World-frame AABB (lo, hi) covering the solid."""
        lo, hi = self.local_bounds()
        corners = np.array([[x, y, z] for x in (lo[0], hi[0])
                            for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
        world = self.pose.to_world(corners)
        return world.min(axis=0), world.max(axis=0)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return self.contains_local(self.pose.to_local(np.atleast_2d(pts)))

    def params_dict(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, "pose": self.pose.to_dict(), **self.params_dict()}


class Box(Solid):
    kind = "box"

    def __init__(self, extents, pose=None):
        super().__init__(pose)
        self.extents = np.asarray(extents, dtype=np.float64).reshape(3)

    def local_bounds(self):
        h = self.extents / 2.0
        return -h, h

    def contains_local(self, pts):
        return (np.abs(pts) <= self.extents / 2.0).all(axis=1)

    def volume(self):
        return float(np.prod(self.extents))

    def params_dict(self):
        return {"extents": self.extents.tolist()}


class Cylinder(Solid):
    kind = "cylinder"

    def __init__(self, radius, height, pose=None):
        super().__init__(pose)
        self.radius = float(radius)
        self.height = float(height)

    def local_bounds(self):
        r, h = self.radius, self.height / 2.0
        return np.array([-r, -r, -h]), np.array([r, r, h])

    def contains_local(self, pts):
        radial = pts[:, 0] ** 2 + pts[:, 1] ** 2 <= self.radius ** 2
        return radial & (np.abs(pts[:, 2]) <= self.height / 2.0)

    def volume(self):
        return math.pi * self.radius ** 2 * self.height

    def params_dict(self):
        return {"radius": self.radius, "height": self.height}


class Capsule(Solid):
    """Cylinder of `height` between two hemisphere caps of `radius`,
    axis along local z, centered at the segment midpoint."""

    kind = "capsule"

    def __init__(self, radius, height, pose=None):
        super().__init__(pose)
        self.radius = float(radius)
        self.height = float(height)

    def local_bounds(self):
        r, h = self.radius, self.height / 2.0
        return np.array([-r, -r, -h - r]), np.array([r, r, h + r])

    def contains_local(self, pts):
        h = self.height / 2.0
        z = np.clip(pts[:, 2], -h, h)
        d2 = pts[:, 0] ** 2 + pts[:, 1] ** 2 + (pts[:, 2] - z) ** 2
        return d2 <= self.radius ** 2

    def volume(self):
        r = self.radius
        return math.pi * r * r * self.height + 4.0 / 3.0 * math.pi * r ** 3

    def params_dict(self):
        return {"radius": self.radius, "height": self.height}


class ExtrudedPolygon(Solid):
    """A convex polygon (CCW vertices in the local xy plane) extruded along z,
    centered at mid-height."""

    kind = "polygon"

    def __init__(self, vertices_2d, height, pose=None):
        super().__init__(pose)
        self.vertices = np.asarray(vertices_2d, dtype=np.float64).reshape(-1, 2)
        self.height = float(height)
        if len(self.vertices) < 3:
            raise GeometryError("polygon needs at least 3 vertices")

    def local_bounds(self):
        lo2, hi2 = self.vertices.min(axis=0), self.vertices.max(axis=0)
        h = self.height / 2.0
        return np.array([lo2[0], lo2[1], -h]), np.array([hi2[0], hi2[1], h])

    def _area(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)

    def contains_local(self, pts):
        inside = np.abs(pts[:, 2]) <= self.height / 2.0
        a = self.vertices
        b = np.roll(a, -1, axis=0)
        for (ax, ay), (bx, by) in zip(a, b):
            cross = (bx - ax) * (pts[:, 1] - ay) - (by - ay) * (pts[:, 0] - ax)
            inside &= cross >= 0.0
        return inside

    def volume(self):
        return abs(self._area()) * self.height

    def params_dict(self):
        return {"vertices": self.vertices.tolist(), "height": self.height}


class CompoundSolid(Solid):
    """Union of child solids; children are posed in the compound's local frame."""

    kind = "compound"

    def __init__(self, children: list[Solid], pose=None):
        super().__init__(pose)
        if not children:
            raise GeometryError("compound solid needs at least one child")
        self.children = children

    def local_bounds(self):
        los, his = zip(*(c.bounds() for c in self.children))
        return np.min(los, axis=0), np.max(his, axis=0)

    def contains_local(self, pts):
        hit = np.zeros(len(pts), dtype=bool)
        for c in self.children:
            hit |= c.contains(pts)
        return hit

    def volume(self):
        # Overlaps ignored: only used as a non-degeneracy check and as a
        # sampling-acceptance sanity bound.
        return sum(c.volume() for c in self.children)

    def params_dict(self):
        return {"children": [c.to_dict() for c in self.children]}


_SOLID_KINDS = {c.kind: c for c in (Box, Cylinder, Capsule, ExtrudedPolygon)}


def solid_from_dict(d: dict) -> Solid:
    pose = Pose.from_dict(d["pose"])
    kind = d["kind"]
    if kind == "compound":
        return CompoundSolid([solid_from_dict(c) for c in d["children"]], pose)
    if kind == "box":
        return Box(d["extents"], pose)
    if kind == "cylinder":
        return Cylinder(d["radius"], d["height"], pose)
    if kind == "capsule":
        return Capsule(d["radius"], d["height"], pose)
    if kind == "polygon":
        return ExtrudedPolygon(d["vertices"], d["height"], pose)
    raise GeometryError(f"unknown solid kind {kind!r}")


def sample_interior(solid: Solid, n: int, seed: int) -> np.ndarray:
    """n i.i.d. uniform samples from the solid's interior, by rejection
    against its world-frame bounding box.  Deterministic in `seed`."""
    if n < 1:
        raise GeometryError("n must be >= 1")
    if solid.volume() <= 0.0:
        raise GeometryError(f"solid {solid.kind!r} has zero volume")
    lo, hi = solid.bounds()
    if np.any(hi - lo <= 0.0):
        raise GeometryError(f"solid {solid.kind!r} has a degenerate bounding box")
    rng = np.random.default_rng(seed)
    out = np.empty((n, 3))
    have = 0
    while have < n:
        batch = max(64, 2 * (n - have))
        cand = rng.uniform(lo, hi, size=(batch, 3))
        good = cand[solid.contains(cand)]
        take = min(len(good), n - have)
        out[have:have + take] = good[:take]
        have += take
    return out


# ------------------------------------------------------------------ hulls

@dataclass
class Hull:
    """Convex hull: vertices plus outward facet planes (n . x + b <= 0 inside)."""

    vertices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray

    @property
    def n_facets(self) -> int:
        return len(self.normals)


def hull_and_centroid(cloud) -> tuple[Hull, np.ndarray, float]:
    """Convex hull of a cloud, the cloud's arithmetic-mean centroid, and d0 =
    the minimum centroid-to-facet-plane distance.  Rejects degenerate input."""
    pts = as_cloud(cloud)
    try:
        qh = _QHull(pts)
    except QhullError as e:
        raise GeometryError(f"degenerate hull input (coplanar or collinear): {e}") from e
    hull = Hull(vertices=pts[qh.vertices],
                normals=qh.equations[:, :3].copy(),
                offsets=qh.equations[:, 3].copy())
    centroid = pts.mean(axis=0)
    d0 = float(np.min(-(hull.normals @ centroid + hull.offsets)))
    return hull, centroid, d0


def contains(hull: Hull, p, tol: float = CONTAIN_TOL) -> bool:
    """True iff p is strictly inside every facet plane."""
    p = np.asarray(p, dtype=np.float64).reshape(3)
    return bool(np.max(hull.normals @ p + hull.offsets) < -tol)


def contains_many(hull: Hull, pts, tol: float = CONTAIN_TOL) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    return (pts @ hull.normals.T + hull.offsets).max(axis=1) < -tol


# ------------------------------------------------------------- transforms

def apply_transform(row, p) -> np.ndarray:
    """Apply one 12-number affine row (top 3 rows of a homogeneous 4x4) to p."""
    m = np.asarray(row, dtype=np.float64).reshape(3, 4)
    p = np.asarray(p, dtype=np.float64).reshape(3)
    return m[:, :3] @ p + m[:, 3]


def apply_transform_rows(rows, pts) -> np.ndarray:
    """Per-point transforms: rows (N, 12) applied to pts (N, 3) -> (N, 3)."""
    rows = np.asarray(rows, dtype=np.float64).reshape(-1, 3, 4)
    pts = as_cloud(pts)
    return np.einsum("nij,nj->ni", rows[:, :, :3], pts) + rows[:, :, 3]


def compose_transform_rows(first, second) -> np.ndarray:
    """Row of applying `first` then `second` (homogeneous product)."""
    a = np.vstack([np.asarray(first, dtype=np.float64).reshape(3, 4), [0, 0, 0, 1]])
    b = np.vstack([np.asarray(second, dtype=np.float64).reshape(3, 4), [0, 0, 0, 1]])
    return (b @ a)[:3].reshape(12)


# -------------------------------------------------------------------- ICP

@dataclass
class AlignmentReport:
    """Result of z-locked ICP: transform mapping source onto target."""

    theta: float
    translation: np.ndarray
    fitness: float
    inlier_mse: float
    correspondence_pct: float
    iterations: int

    def __post_init__(self):
        if not (0.0 <= self.fitness <= 1.0):
            raise GeometryError(f"fitness out of range: {self.fitness}")
        if not (0.0 <= self.correspondence_pct <= 100.0):
            raise GeometryError(f"correspondence_pct out of range: {self.correspondence_pct}")

    @property
    def rotation(self) -> np.ndarray:
        return rotz(self.theta)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return as_cloud(pts) @ self.rotation.T + self.translation


def icp_align_z_locked(source, target, max_iters: int = 50,
                       inlier_radius: float = 0.1) -> AlignmentReport:
    """ICP restricted to translation + rotation about z.

    Correspondences are nearest neighbors within `inlier_radius`; each
    iteration re-estimates the total transform in closed form from the 2D
    cross-covariance of the matched pairs.  Fitness is the matched fraction
    of the source; if no pair is within the radius at the start, a fitness-0
    report is returned.
    """
    src = as_cloud(source)
    tgt = as_cloud(target)
    tree = cKDTree(tgt)
    theta, trans = 0.0, np.zeros(3)
    iterations = 0
    for iterations in range(1, max_iters + 1):
        moved = src @ rotz(theta).T + trans
        dist, idx = tree.query(moved)
        mask = dist <= inlier_radius
        if not mask.any():
            if iterations == 1:
                return AlignmentReport(0.0, np.zeros(3), 0.0, 0.0, 0.0, 1)
            break
        p, q = src[mask], tgt[idx[mask]]
        p_bar, q_bar = p.mean(axis=0), q.mean(axis=0)
        pc, qc = p - p_bar, q - q_bar
        sxx = float(np.sum(pc[:, 0] * qc[:, 0] + pc[:, 1] * qc[:, 1]))
        sxy = float(np.sum(pc[:, 0] * qc[:, 1] - pc[:, 1] * qc[:, 0]))
        new_theta = math.atan2(sxy, sxx) if (sxx != 0.0 or sxy != 0.0) else 0.0
        new_trans = q_bar - rotz(new_theta) @ p_bar
        if abs(new_theta - theta) < 1e-14 and np.max(np.abs(new_trans - trans)) < 1e-14:
            theta, trans = new_theta, new_trans
            break
        theta, trans = new_theta, new_trans
    moved = src @ rotz(theta).T + trans
    dist, _ = tree.query(moved)
    corr = dist <= inlier_radius
    fitness = float(corr.mean())
    inlier_mse = float(np.mean(dist[corr] ** 2)) if corr.any() else 0.0
    return AlignmentReport(theta, trans, fitness, inlier_mse, 100.0 * fitness, iterations)
