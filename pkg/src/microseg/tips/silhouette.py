"""Instrument silhouettes: synthetic templates, rasterisation and RLE masks."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import candidate_descriptors, convex_hull, select_tip


@dataclass
class Silhouette:
    mask: np.ndarray  # bool (h, w), bbox-local grid
    origin: tuple  # (x0, y0) of the grid in frame coordinates

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.sum() < 3:
            raise ValueError("silhouette needs at least 3 foreground pixels")

    @property
    def size(self) -> tuple:
        h, w = self.mask.shape
        return (w, h)

    def points(self) -> np.ndarray:
        """Foreground pixel centres in local (x, y) coordinates."""
        r, c = np.nonzero(self.mask)
        return np.column_stack([c + 0.5, r + 0.5])


def wedge_polygon(length: float, half_width: float, handle: float) -> np.ndarray:
    """Tapered instrument outline with its apex at the origin pointing along +x."""
    return np.array([
        (0.0, 0.0),
        (-length, half_width),
        (-length - handle, half_width),
        (-length - handle, -half_width),
        (-length, -half_width),
    ])


# instrument class -> (length, half_width, handle)
TEMPLATES = {
    0: (40.0, 8.0, 20.0),
    1: (36.0, 9.0, 18.0),
    2: (30.0, 10.0, 25.0),
    3: (28.0, 11.0, 22.0),
}


def rotate(poly, angle: float, about=(0.0, 0.0)) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    p = np.asarray(poly, dtype=np.float64) - about
    return p @ np.array([[c, s], [-s, c]]) + about


def rasterize_convex(poly, pad: int = 1) -> Silhouette:
    """Pixels whose centres fall inside (or on) a convex polygon given in frame coordinates."""
    poly = np.asarray(poly, dtype=np.float64)
    if len(convex_hull(poly)) != len(poly):
        raise ValueError("rasterize_convex needs a convex polygon without repeated vertices")
    # orient counter-clockwise so "inside" means non-negative cross products
    area = np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])
    if area < 0:
        poly = poly[::-1]
    x0 = math.floor(poly[:, 0].min()) - pad
    y0 = math.floor(poly[:, 1].min()) - pad
    w = math.ceil(poly[:, 0].max()) + pad - x0
    h = math.ceil(poly[:, 1].max()) + pad - y0
    ys, xs = np.mgrid[0:h, 0:w]
    px = xs + 0.5 + x0
    py = ys + 0.5 + y0
    inside = np.ones((h, w), dtype=bool)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        cross = (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])
        edge = math.hypot(b[0] - a[0], b[1] - a[1])
        inside &= cross >= -1e-9 * edge
    return Silhouette(inside, (x0, y0))


def instrument_silhouette(class_id: int, apex, angle: float) -> Silhouette:
    """Template of ``class_id`` with its apex at ``apex`` (frame coords), rotated by ``angle``."""
    poly = rotate(wedge_polygon(*TEMPLATES[class_id]), angle) + np.asarray(apex, dtype=np.float64)
    return rasterize_convex(poly)


def silhouette_candidates(sil: Silhouette):
    hull = convex_hull(sil.points())
    return candidate_descriptors(hull, sil.size)


def localize_tip(sil: Silhouette, reference) -> tuple[float, float]:
    """Tip of ``sil`` in frame coordinates."""
    local, _, _ = select_tip(silhouette_candidates(sil), reference)
    return to_global(local, sil.origin)


def to_global(local, origin) -> tuple[float, float]:
    return (float(local[0] + origin[0]), float(local[1] + origin[1]))


def measure_reference(class_id: int) -> np.ndarray:
    """Descriptor of the hull vertex at the apex of the unrotated template."""
    apex = (0.5, 0.5)  # a pixel centre, so the apex is itself a foreground sample
    sil = instrument_silhouette(class_id, apex, 0.0)
    local_apex = np.subtract(apex, sil.origin)
    cands = silhouette_candidates(sil)
    dists = [np.hypot(*(np.asarray(p) - local_apex)) for p, _ in cands]
    return cands[int(np.argmin(dists))][1]


REFERENCE_FILE = Path(__file__).with_name("references.json")


def build_reference_table() -> dict:
    return {str(c): measure_reference(c).tolist() for c in sorted(TEMPLATES)}


def load_references(path=REFERENCE_FILE) -> dict[int, np.ndarray]:
    doc = json.loads(Path(path).read_text())
    return {int(k): np.asarray(v, dtype=np.float64) for k, v in doc["descriptors"].items()}


def write_references(path=REFERENCE_FILE) -> None:
    doc = {"format": "microseg-tip-references/1", "descriptors": build_reference_table()}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def rle_encode(mask) -> list[int]:
    """Run lengths of the row-major flattened mask, starting with a (possibly empty) 0-run."""
    flat = np.asarray(mask, dtype=bool).reshape(-1)
    if flat.size == 0:
        return []
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    return ([0] + runs) if flat[0] else runs


def rle_decode(runs, shape) -> np.ndarray:
    flat = np.zeros(int(np.prod(shape)), dtype=bool)
    pos, val = 0, False
    for n in runs:
        flat[pos : pos + n] = val
        pos += n
        val = not val
    if pos != flat.size:
        raise ValueError(f"run lengths cover {pos} pixels, mask has {flat.size}")
    return flat.reshape(shape)


def write_silhouettes(path, records) -> None:
    """``records``: iterable of ``(frame, track_id, Silhouette)``."""
    with open(path, "w") as fh:
        for frame, track_id, sil in records:
            fh.write(json.dumps({
                "frame": int(frame), "track_id": int(track_id), "origin": [int(v) for v in sil.origin],
                "shape": list(sil.mask.shape), "rle": rle_encode(sil.mask),
            }) + "\n")


def read_silhouettes(path) -> list[tuple[int, int, Silhouette]]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            r = json.loads(line)
            mask = rle_decode(r["rle"], tuple(r["shape"]))
            out.append((int(r["frame"]), int(r["track_id"]), Silhouette(mask, tuple(r["origin"]))))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad silhouette record ({exc})") from exc
    return out
