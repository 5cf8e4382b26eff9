"""Point-set evaluation metrics: Chamfer distance, Earth Mover's distance
(exact Hungarian and auction approximation), F1 score, guiding-point MSE, and
the 3D interpenetration fraction.

Conventions (used consistently across all comparisons): Chamfer is the sum of
both directional mean squared nearest distances (m^2); EMD is the minimum mean
matched distance (m); scenes are normalized before evaluation by centering on
the human centroid and scaling the entity bounding box's max extent to 2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .geometry import GeometryError, Hull, as_cloud, contains_many, hull_and_centroid

F1_TAU_DEFAULT = 0.1
EMD_EXACT_LIMIT = 512


class MetricError(ValueError):
    pass


@dataclass
class MetricReport:
    cd: float
    emd: float
    f1: float
    guiding_mse: float | None = None
    ip3d: float | None = None

    def __post_init__(self):
        if self.cd < 0 or self.emd < 0:
            raise MetricError("distances must be non-negative")
        if not 0.0 <= self.f1 <= 1.0:
            raise MetricError(f"f1 out of range: {self.f1}")
        if self.ip3d is not None and not 0.0 <= self.ip3d <= 1.0:
            raise MetricError(f"ip3d out of range: {self.ip3d}")

    def to_dict(self):
        d = {"cd": self.cd, "emd": self.emd, "f1": self.f1}
        if self.guiding_mse is not None:
            d["guiding_mse"] = self.guiding_mse
        if self.ip3d is not None:
            d["ip3d"] = self.ip3d
        return d


# ---------------------------------------------------------------- chamfer

def chamfer(a, b) -> float:
    """Sum of both directions' mean squared nearest-neighbor distance."""
    a, b = as_cloud(a), as_cloud(b)
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(np.mean(d_ab ** 2) + np.mean(d_ba ** 2))


def chamfer_bruteforce(a, b) -> float:
    """O(n^2) reference implementation (full pairwise distance matrix)."""
    a, b = as_cloud(a), as_cloud(b)
    d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    return float(d2.min(axis=1).mean() + d2.min(axis=0).mean())


# -------------------------------------------------------------------- EMD

def _dist_matrix(a, b):
    return np.sqrt(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2))


def emd(a, b, mode: str = "exact") -> float:
    """Minimum mean matched distance between equal-size clouds."""
    if mode == "exact":
        a, b = as_cloud(a), as_cloud(b)
        if len(a) != len(b):
            raise MetricError(f"EMD needs equal sizes, got {len(a)} and {len(b)}")
        cost = _dist_matrix(a, b)
        rows, cols = linear_sum_assignment(cost)
        return float(cost[rows, cols].mean())
    if mode == "approx":
        value, _ = emd_auction(a, b)
        return value
    raise MetricError(f"unknown EMD mode {mode!r}")


def emd_auction(a, b, eps_scale: float = 4.0, rel_eps_min: float = 1e-4
                ) -> tuple[float, float]:
    """Auction-algorithm EMD approximation.

    Returns (mean matched distance, relative duality gap).  The gap is
    computed from the final object prices against the assignment LP dual, so
    it certifies how far the matching can be from optimal.
    """
    a, b = as_cloud(a), as_cloud(b)
    n = len(a)
    if n != len(b):
        raise MetricError(f"EMD needs equal sizes, got {n} and {len(b)}")
    cost = _dist_matrix(a, b)
    value = -cost
    price = np.zeros(n)
    owner = np.full(n, -1)
    assigned = np.full(n, -1)
    scale = max(cost.max(), 1e-12)
    eps = scale / 2.0
    eps_min = rel_eps_min * scale
    while True:
        owner[:] = -1
        assigned[:] = -1
        free = list(range(n))
        while free:
            i = free.pop()
            gains = value[i] - price
            j = int(np.argmax(gains))
            best = gains[j]
            gains[j] = -np.inf
            second = gains.max() if n > 1 else best
            price[j] += (best - second) + eps
            prev = owner[j]
            owner[j] = i
            assigned[i] = j
            if prev >= 0:
                assigned[prev] = -1
                free.append(prev)
        if eps <= eps_min:
            break
        eps /= eps_scale
    primal = float(cost[np.arange(n), assigned].sum())
    u = (cost + price[None, :]).min(axis=1)
    dual = float(u.sum() - price.sum())
    gap = max(0.0, primal - dual) / max(primal, 1e-12)
    return primal / n, gap


# --------------------------------------------------------------------- F1

def f1(a, b, tau: float = F1_TAU_DEFAULT) -> float:
    """Harmonic mean of precision (a covered by b) and recall (b covered by a)
    at distance threshold tau."""
    if tau <= 0:
        raise MetricError("tau must be positive")
    a, b = as_cloud(a), as_cloud(b)
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    precision = float(np.mean(d_ab <= tau))
    recall = float(np.mean(d_ba <= tau))
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def f1_bruteforce(a, b, tau: float = F1_TAU_DEFAULT) -> float:
    a, b = as_cloud(a), as_cloud(b)
    d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    precision = float(np.mean(d2.min(axis=1) <= tau * tau))
    recall = float(np.mean(d2.min(axis=0) <= tau * tau))
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


# ----------------------------------------------------- guiding points / IP

def guiding_mse(s_tilde, target_centroid) -> float:
    """Mean squared distance from each guiding point to the target centroid."""
    pts = as_cloud(s_tilde)
    c = np.asarray(target_centroid, dtype=np.float64).reshape(3)
    return float(np.mean(np.sum((pts - c) ** 2, axis=1)))


def ip_3d(pred, entities) -> float:
    """Fraction of predicted points that penetrate any scene entity's convex
    hull interior.  `entities` may be Hull objects or raw clouds; degenerate
    entities are skipped with a warning."""
    pred = as_cloud(pred)
    inside_any = np.zeros(len(pred), dtype=bool)
    for i, ent in enumerate(entities):
        if isinstance(ent, Hull):
            hull = ent
        else:
            try:
                hull, _, _ = hull_and_centroid(ent)
            except GeometryError:
                warnings.warn(f"entity {i} has a degenerate hull; skipped in ip_3d")
                continue
        inside_any |= contains_many(hull, pred)
    return float(inside_any.mean())


# ----------------------------------------------------- scene normalization

def scene_frame(entity_clouds, human_index: int = 0) -> tuple[np.ndarray, float]:
    """Normalization frame from the condition entities: center on the human
    centroid and scale so the entity bounding box's max extent becomes 2."""
    clouds = [as_cloud(c) for c in entity_clouds]
    center = clouds[human_index].mean(axis=0)
    allpts = np.vstack(clouds)
    extent = float((allpts.max(axis=0) - allpts.min(axis=0)).max())
    scale = 2.0 / extent if extent > 0 else 1.0
    return center, scale


def to_frame(cloud, center, scale) -> np.ndarray:
    return (as_cloud(cloud) - center) * scale


def from_frame(cloud, center, scale) -> np.ndarray:
    return as_cloud(cloud) / scale + center
