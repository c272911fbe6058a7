"""Overlap and contour-distance measures between a predicted and a reference mask."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .morphology import CROSS, MaskShapeError, as_mask


class EmptyMaskError(ValueError):
    pass


class EmptyPairWarning(UserWarning):
    """Both masks are empty; overlap scores default to 1."""


@dataclass(frozen=True)
class MetricsReport:
    dice: float
    jaccard: float
    apd: float
    hausdorff: float
    n_pairs: int = 1

    def to_dict(self):
        return asdict(self)

    def table_row(self) -> dict:
        """The four summary fields: overlap in percent, distances in mm."""
        return {
            "DICE": f"{100 * self.dice:.2f}%",
            "APD": f"{self.apd:.2f}",
            "Hausdorff": f"{self.hausdorff:.2f}",
            "Jaccard index": f"{100 * self.jaccard:.2f}%",
        }


def _pair(a, b):
    a, b = as_mask(a), as_mask(b)
    if a.shape != b.shape:
        raise MaskShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def dice(a, b) -> float:
    a, b = _pair(a, b)
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        warnings.warn("dice of two empty masks", EmptyPairWarning, stacklevel=2)
        return 1.0
    return 2.0 * int((a & b).sum()) / total


def jaccard(a, b) -> float:
    a, b = _pair(a, b)
    union = int((a | b).sum())
    if union == 0:
        warnings.warn("jaccard of two empty masks", EmptyPairWarning, stacklevel=2)
        return 1.0
    return int((a & b).sum()) / union


def extract_contour(m) -> np.ndarray:
    """Boundary pixels as an ``(n, 2)`` array of ``(x, y)``, in row-major scan order.

    Pixels outside the image count as background here, so a mask touching
    the border is closed off by the border and a non-empty mask always has
    a non-empty contour.
    """
    m = as_mask(m)
    inner = ndimage.binary_erosion(m, structure=CROSS, border_value=0)
    ys, xs = np.nonzero(m & ~inner)
    return np.column_stack([xs, ys])


def _nearest(src: np.ndarray, dst: np.ndarray, spacing) -> np.ndarray:
    """Distance from every ``src`` point to its nearest ``dst`` point, all pairs, in chunks.

    Pixel offsets are scaled before squaring so the result is exactly
    ``sqrt((dx*sx)**2 + (dy*sy)**2)`` of the closest pair.
    """
    scale = np.asarray(spacing, dtype=float)
    src = src.astype(float)
    dst = dst.astype(float)
    out = np.empty(len(src))
    step = max(1, (1 << 22) // max(len(dst), 1))
    for i in range(0, len(src), step):
        d = (dst[None, :, :] - src[i:i + step, None, :]) * scale
        out[i:i + step] = np.sqrt((d ** 2).sum(axis=2)).min(axis=1)
    return out


def _mean(d: np.ndarray) -> float:
    # correctly rounded sum, so the result does not depend on contour order
    return math.fsum(d.tolist()) / len(d)


def _contours(a, b, spacing):
    a, b = _pair(a, b)
    ca, cb = extract_contour(a), extract_contour(b)
    if len(ca) == 0 or len(cb) == 0:
        raise EmptyMaskError("undefined for empty mask")
    return _nearest(ca, cb, spacing), _nearest(cb, ca, spacing)


def hausdorff(a, b, spacing=(1.0, 1.0)) -> float:
    """Symmetric Hausdorff distance between contours; ``spacing`` is (sx, sy) in mm/px."""
    d_ab, d_ba = _contours(a, b, spacing)
    return float(max(d_ab.max(), d_ba.max()))


def apd(a, b, spacing=(1.0, 1.0), mode: str = "symmetric") -> float:
    """Average perpendicular distance between contours.

    ``symmetric`` averages the two directed means; ``directed`` uses only the
    distances from the contour of ``a`` to that of ``b``.
    """
    d_ab, d_ba = _contours(a, b, spacing)
    if mode == "symmetric":
        return (_mean(d_ab) + _mean(d_ba)) / 2
    if mode == "directed":
        return _mean(d_ab)
    raise ValueError(f"unknown APD mode {mode!r}")


def evaluate_pair(pred, truth, spacing=(1.0, 1.0), apd_mode="symmetric") -> MetricsReport:
    """All four measures; distances are NaN when either mask is empty."""
    pred, truth = _pair(pred, truth)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyPairWarning)
        d, j = dice(pred, truth), jaccard(pred, truth)
    if pred.any() and truth.any():
        return MetricsReport(d, j, apd(pred, truth, spacing, apd_mode), hausdorff(pred, truth, spacing))
    return MetricsReport(d, j, float("nan"), float("nan"))


def aggregate(reports) -> MetricsReport:
    """Unweighted mean of every field over the given reports.

    NaN distances (empty-mask pairs) are left out of the distance means.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("cannot aggregate an empty list of reports")
    arr = np.array([[r.dice, r.jaccard, r.apd, r.hausdorff] for r in reports], dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        means = np.nanmean(arr, axis=0)
    return MetricsReport(*map(float, means), n_pairs=len(reports))
