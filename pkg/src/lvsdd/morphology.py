"""Binary mask operations used by the LV extraction step.

Masks are 2-D ``bool`` arrays indexed ``[row, col]``.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from skimage.draw import line as draw_line

# 3x3 cross, the radius-1 disk used for dilating the Hough circle
CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
SQUARE = np.ones((3, 3), dtype=bool)


class MaskShapeError(ValueError):
    pass


def as_mask(m) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.size == 0:
        raise MaskShapeError(f"expected a non-empty 2-D mask, got shape {m.shape}")
    return m.astype(bool, copy=False)


def _check_se(se):
    se = np.asarray(se, dtype=bool)
    if se.shape != (3, 3) or not se[1, 1]:
        raise ValueError("structuring element must be 3x3 with its centre set")
    return se


def dilate(m, se=CROSS, iterations: int = 1) -> np.ndarray:
    """Dilate ``iterations`` times; pixels outside the image count as background."""
    m = as_mask(m)
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    se = _check_se(se)
    if iterations == 0 or not m.any():
        return m.copy()
    # scipy treats iterations=0 as "until stable", so it is handled above
    return ndimage.binary_dilation(m, structure=se, iterations=iterations, border_value=0)


def intersect(a, b) -> np.ndarray:
    a, b = as_mask(a), as_mask(b)
    if a.shape != b.shape:
        raise MaskShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a & b


def connected_components(m, connectivity: int = 8):
    """Label foreground pixels; returns ``(labels, areas)`` with ``areas[k-1]`` for label k."""
    m = as_mask(m)
    if connectivity == 8:
        structure = SQUARE
    elif connectivity == 4:
        structure = CROSS
    else:
        raise ValueError("connectivity must be 4 or 8")
    labels, n = ndimage.label(m, structure=structure)
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return labels, areas


def remove_small_blobs(m, min_area: int, connectivity: int = 8) -> np.ndarray:
    if min_area < 0:
        raise ValueError("min_area must be >= 0")
    m = as_mask(m)
    if min_area == 0:
        return m.copy()
    labels, areas = connected_components(m, connectivity)
    keep = np.concatenate([[False], areas >= min_area])
    return keep[labels]


def largest_component(m) -> np.ndarray:
    m = as_mask(m)
    labels, areas = connected_components(m, 8)
    if areas.size == 0:
        return np.zeros_like(m)
    # argmax returns the first maximum, i.e. the smallest label in scan order
    return labels == int(np.argmax(areas)) + 1


def _hull_vertices(points: np.ndarray) -> np.ndarray:
    """Monotone chain convex hull of integer points, counter-clockwise, no collinear vertices."""
    pts = np.unique(points, axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    pts = [tuple(p) for p in pts]
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=np.int64)


def convex_hull_mask(m) -> np.ndarray:
    """Pixels whose centres lie in the convex hull of the foreground pixel centres.

    Degenerate (collinear) foreground is rasterised as the digital segment
    between its extreme points.
    """
    m = as_mask(m)
    out = np.zeros_like(m)
    pts = np.argwhere(m)  # (row, col)
    if len(pts) == 0:
        return out
    hull = _hull_vertices(pts)
    if len(hull) <= 2:
        (r0, c0), (r1, c1) = hull[0], hull[-1]
        rr, cc = draw_line(int(r0), int(c0), int(r1), int(c1))
        out[rr, cc] = True
        return out
    rmin, cmin = hull.min(axis=0)
    rmax, cmax = hull.max(axis=0)
    rr, cc = np.mgrid[rmin:rmax + 1, cmin:cmax + 1]
    inside = np.ones(rr.shape, dtype=bool)
    # vertices are in increasing-angle order in (row, col) space; exact integer test
    nxt = np.roll(hull, -1, axis=0)
    for (r0, c0), (r1, c1) in zip(hull, nxt):
        inside &= (r1 - r0) * (cc - c0) - (c1 - c0) * (rr - r0) >= 0
    out[rmin:rmax + 1, cmin:cmax + 1] = inside
    return out | m
