"""Convex hulls, per-vertex shape descriptors and cosine tip selection."""
from __future__ import annotations

import math

import numpy as np


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> list[tuple[float, float]]:
    """Monotone-chain hull, counter-clockwise (positive cross product), collinear points dropped.

    All-collinear input gives its two extreme points; a single distinct point gives itself.
    """
    pts = sorted({(float(x), float(y)) for x, y in points})
    if not pts:
        raise ValueError("convex hull of an empty point set")
    if len(pts) <= 2:
        return pts
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return hull if len(hull) >= 2 else [pts[0], pts[-1]]


def polygon_centroid(poly) -> np.ndarray:
    """Area centroid; falls back to the vertex mean for degenerate polygons."""
    p = np.asarray(poly, dtype=np.float64)
    if len(p) < 3:
        return p.mean(axis=0)
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    c = x * yn - xn * y
    area = c.sum() / 2.0
    if abs(area) < 1e-12:
        return p.mean(axis=0)
    return np.array([((x + xn) * c).sum(), ((y + yn) * c).sum()]) / (6.0 * area)


DESCRIPTOR_FIELDS = (
    "angle_cosine",
    "centroid_dist",
    "corner_dist_1",
    "corner_dist_2",
    "corner_dist_3",
    "corner_dist_4",
    "center_dist",
)


def vertex_descriptor(hull, i: int, bbox_size, centroid=None) -> np.ndarray:
    """Rotation-tolerant geometry at hull vertex ``i``.

    Components: cosine of the interior angle (near 1 at a sharp point),
    distance to the hull centroid, the four distances to the box corners in
    ascending order, and distance to the box centre. Distances are divided by the box diagonal (the centre distance by
    half of it).
    """
    w, h = bbox_size
    diag = math.hypot(w, h)
    v = np.asarray(hull[i], dtype=np.float64)
    n = len(hull)
    if n >= 3:
        a = np.asarray(hull[i - 1]) - v
        b = np.asarray(hull[(i + 1) % n]) - v
        sharp = max(-1.0, min(1.0, float(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))))
    else:
        sharp = 1.0
    if centroid is None:
        centroid = polygon_centroid(hull)
    corners = np.array([(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)])
    corner_d = np.sort(np.linalg.norm(corners - v, axis=1)) / diag
    center_d = np.linalg.norm(v - (w / 2.0, h / 2.0)) / (diag / 2.0)
    return np.concatenate([[sharp, np.linalg.norm(v - centroid) / diag], corner_d, [center_d]])


def candidate_descriptors(hull, bbox_size) -> list[tuple[tuple, np.ndarray]]:
    centroid = polygon_centroid(hull)
    return [(tuple(hull[i]), vertex_descriptor(hull, i, bbox_size, centroid)) for i in range(len(hull))]


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))


def select_tip(candidates, reference) -> tuple[tuple, int, float]:
    """Candidate point whose descriptor is most cosine-similar to ``reference``.

    Returns ``(point, index, similarity)``. Zero-norm descriptors are skipped and
    ties keep the lowest index.
    """
    ref = np.asarray(reference, dtype=np.float64)
    if not np.linalg.norm(ref) > 0:
        raise ValueError("reference descriptor has zero norm")
    best, best_i, best_s = None, -1, -math.inf
    for i, (pt, d) in enumerate(candidates):
        if not np.linalg.norm(d) > 0:
            continue
        s = cosine(ref, d)
        if s > best_s:
            best, best_i, best_s = pt, i, s
    if best is None:
        raise ValueError("no candidate with a non-zero descriptor")
    return best, best_i, best_s
