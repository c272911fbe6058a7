"""Circular Hough transform on binary masks."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .morphology import CROSS, as_mask


class NoCircleError(LookupError):
    pass


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float
    score: float = 0.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("circle radius must be positive")

    def to_dict(self):
        return {"cx": self.cx, "cy": self.cy, "r": self.r, "score": self.score}


def boundary_pixels(mask) -> np.ndarray:
    """Foreground pixels with at least one 4-neighbour inside the image that is background."""
    m = as_mask(mask)
    # border_value=1: the image edge does not make a pixel a boundary pixel
    eroded = ndimage.binary_erosion(m, structure=CROSS, border_value=1)
    return m & ~eroded


@lru_cache(maxsize=256)
def ring_offsets(r: int):
    """Integer offsets ``(dy, dx)`` whose Euclidean length rounds to ``r``."""
    span = np.arange(-r - 1, r + 2)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    sel = np.rint(np.hypot(dy, dx)) == r
    return dy[sel], dx[sel]


def hough_accumulator(mask, radii) -> np.ndarray:
    """Vote counts ``acc[k, cy, cx]`` for a circle of radius ``radii[k]``.

    Every boundary pixel votes once for each centre whose distance to it
    rounds to the radius.
    """
    m = as_mask(mask)
    h, w = m.shape
    ys, xs = np.nonzero(boundary_pixels(m))
    acc = np.zeros((len(radii), h, w), dtype=np.int64)
    if ys.size == 0:
        return acc
    for k, r in enumerate(radii):
        dy, dx = ring_offsets(int(r))
        cy = (ys[:, None] + dy[None, :]).ravel()
        cx = (xs[:, None] + dx[None, :]).ravel()
        ok = (cy >= 0) & (cy < h) & (cx >= 0) & (cx < w)
        acc[k] = np.bincount(cy[ok] * w + cx[ok], minlength=h * w).reshape(h, w)
    return acc


def detect_circles(mask, r_min: int, r_max: int, min_score_fraction: float = 0.25) -> list[Circle]:
    """Circles at local maxima of the (r, cy, cx) accumulator.

    A cell qualifies if it is a maximum of its 3x3x3 neighbourhood and has at
    least ``min_score_fraction * 2*pi*r`` votes. Centres are refined to the
    vote-weighted centroid of the 3x3 neighbourhood at that radius. Results
    are sorted by radius, then score, both descending.
    """
    m = as_mask(mask)
    h, w = m.shape
    if not (0 < r_min < r_max <= min(h, w) / 2):
        raise ValueError(f"invalid radius range [{r_min}, {r_max}] for a {w}x{h} mask")
    if not m.any():
        return []
    radii = np.arange(int(r_min), int(r_max) + 1)
    acc = hough_accumulator(m, radii)
    peak = ndimage.maximum_filter(acc, size=3, mode="constant", cval=0)
    need = min_score_fraction * 2 * np.pi * radii[:, None, None]
    cand = (acc == peak) & (acc >= need) & (acc > 0)
    ks, ys, xs = np.nonzero(cand)
    scores = acc[ks, ys, xs]
    order = np.lexsort((xs, ys, -scores))

    taken = np.zeros_like(cand)
    padded = np.pad(acc, ((0, 0), (1, 1), (1, 1))).astype(float)
    offs = np.array([-1.0, 0.0, 1.0])
    circles = []
    for i in order:
        k, y, x = ks[i], ys[i], xs[i]
        # plateau cells of an already reported peak are not separate circles
        if taken[max(k - 1, 0):k + 2, max(y - 1, 0):y + 2, max(x - 1, 0):x + 2].any():
            continue
        taken[k, y, x] = True
        win = padded[k, y:y + 3, x:x + 3]
        tot = win.sum()
        cy = y + float((win.sum(axis=1) * offs).sum() / tot)
        cx = x + float((win.sum(axis=0) * offs).sum() / tot)
        circles.append(Circle(cx, cy, float(radii[k]), float(scores[i])))
    circles.sort(key=lambda c: (-c.r, -c.score, c.cy, c.cx))
    return circles


def select_largest(circles) -> Circle:
    if not circles:
        raise NoCircleError("no circle found")
    return min(circles, key=lambda c: (-c.r, -c.score, c.cy, c.cx))


def rasterize_disk(c: Circle, width: int, height: int) -> np.ndarray:
    yy, xx = np.mgrid[:height, :width]
    return (xx - c.cx) ** 2 + (yy - c.cy) ** 2 <= c.r ** 2
