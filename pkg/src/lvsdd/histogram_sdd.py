"""Histogram construction, low-pass smoothing and slope difference distribution.

The slope difference distribution (SDD) of a histogram is obtained by fitting
a least-squares line to the ``window_n`` bins on each side of every bin and
taking the difference of the two slopes (left minus right).  Histogram peaks
then show up as SDD maxima and valleys as SDD minima.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft


class SddError(ValueError):
    pass


@dataclass(frozen=True)
class Histogram:
    counts: np.ndarray
    intensity_min: float
    intensity_max: float

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        if counts.ndim != 1 or counts.size < 8:
            raise SddError("histogram needs at least 8 bins")
        if np.any(counts < 0):
            raise SddError("negative histogram count")
        if not self.intensity_max > self.intensity_min:
            raise SddError("intensity_max must exceed intensity_min")
        object.__setattr__(self, "counts", counts)

    @property
    def bin_count(self) -> int:
        return self.counts.size

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def bin_width(self) -> float:
        return (self.intensity_max - self.intensity_min) / self.bin_count

    def bin_center(self, index) -> float:
        return self.intensity_min + (np.asarray(index) + 0.5) * self.bin_width

    def centers(self) -> np.ndarray:
        return self.bin_center(np.arange(self.bin_count))

    def with_counts(self, counts) -> "Histogram":
        return Histogram(counts, self.intensity_min, self.intensity_max)


@dataclass(frozen=True)
class SddCurve:
    """SDD values; entries outside ``[window_n, bin_count - window_n)`` are NaN."""

    values: np.ndarray
    window_n: int
    smoothing_bandwidth: int | None = None

    @property
    def start(self) -> int:
        return self.window_n

    @property
    def stop(self) -> int:
        return self.values.size - self.window_n

    def defined(self) -> np.ndarray:
        return self.values[self.start:self.stop]


@dataclass(frozen=True)
class ThresholdPair:
    t_low: float
    t_high: float
    peak_bin: int = -1
    low_bin: int = -1
    high_bin: int = -1
    fallback: tuple = field(default=())

    def __post_init__(self):
        if not self.t_low < self.t_high:
            raise SddError(f"t_low {self.t_low} must be below t_high {self.t_high}")

    @property
    def boundary_fallback(self) -> bool:
        return bool(self.fallback)


def build_histogram(roi_pixels, bin_count: int = 256, value_range=None) -> Histogram:
    """Histogram of ``roi_pixels`` with uniform bins over their [min, max].

    ``value_range`` overrides the data range. Constant input gets the range
    ``[v, v + 1]`` so that every pixel lands in bin 0.
    """
    values = np.asarray(roi_pixels, dtype=float).ravel()
    if values.size == 0:
        raise SddError("empty ROI")
    if bin_count < 8:
        raise SddError("bin_count must be >= 8")
    if value_range is None:
        lo, hi = float(values.min()), float(values.max())
    else:
        lo, hi = map(float, value_range)
    if hi <= lo:
        hi = lo + 1.0
    idx = np.floor((values - lo) / (hi - lo) * bin_count).astype(np.int64)
    np.clip(idx, 0, bin_count - 1, out=idx)
    counts = np.bincount(idx, minlength=bin_count).astype(float)
    return Histogram(counts, lo, hi)


def smooth_histogram(h: Histogram, bandwidth: int = 10) -> Histogram:
    """Ideal low-pass filter applied to the evenly extended histogram.

    The histogram is mirrored at both ends (DCT-II basis) so that mass piled
    at one end of the intensity range does not wrap around to the other.
    Keeping ``bandwidth`` frequency pairs of the length-``bin_count`` DFT
    corresponds to DCT coefficients ``0 .. 2*bandwidth + 1``; the result is
    clamped at zero.
    """
    n = h.bin_count
    if not 1 <= bandwidth < n / 2:
        raise SddError(f"bandwidth must lie in [1, {n / 2}), got {bandwidth}")
    coeffs = fft.dct(h.counts, type=2, norm="ortho")
    coeffs[2 * bandwidth + 2:] = 0.0
    smoothed = fft.idct(coeffs, type=2, norm="ortho")
    np.maximum(smoothed, 0.0, out=smoothed)
    return h.with_counts(smoothed)


def _slope_weights(n: int) -> np.ndarray:
    x = np.arange(n, dtype=float)
    x -= x.mean()
    return x / np.dot(x, x)


def compute_sdd(h: Histogram, window_n: int = 13) -> SddCurve:
    n = window_n
    size = h.bin_count
    if n < 3:
        raise SddError("window_n must be >= 3")
    if size <= 2 * n:
        raise SddError(f"bin_count {size} must exceed 2*window_n = {2 * n}")
    w = _slope_weights(n)
    y = h.counts
    # slopes[k] is the fitted slope over y[k : k + n]
    windows = np.lib.stride_tricks.sliding_window_view(y, n)
    slopes = windows @ w
    values = np.full(size, np.nan)
    idx = np.arange(n, size - n)
    values[idx] = slopes[idx - n + 1] - slopes[idx]
    return SddCurve(values, n)


def local_extrema(values: np.ndarray, kind: str = "min") -> np.ndarray:
    """Indices of strict local extrema of a 1-D array.

    A plateau counts as one extremum if both neighbouring values lie strictly
    above (``min``) or below (``max``) it; it is reported at its leftmost
    index. Runs touching either end of the array are never extrema.
    """
    v = np.asarray(values, dtype=float)
    if kind == "max":
        v = -v
    elif kind != "min":
        raise ValueError(kind)
    out = []
    i = 1
    size = v.size
    while i < size - 1:
        if v[i] < v[i - 1]:
            j = i
            while j + 1 < size and v[j + 1] == v[i]:
                j += 1
            if j + 1 < size and v[j + 1] > v[i]:
                out.append(i)
            i = j + 1
        else:
            i += 1
    return np.asarray(out, dtype=np.int64)


def select_double_threshold(sdd: SddCurve, h: Histogram) -> ThresholdPair:
    """Thresholds at the two SDD valleys nearest to the largest SDD peak.

    If no valley exists on one side, the edge of the defined SDD range is used
    and the side is recorded in ``fallback``.
    """
    lo, hi = sdd.start, sdd.stop
    seg = sdd.defined()
    if seg.size == 0 or not np.all(np.isfinite(seg)):
        raise SddError("invalid SDD curve")
    peak = int(np.argmax(seg))
    if seg[peak] <= 0:
        raise SddError("no SDD peak")
    minima = local_extrema(seg, "min")
    left = minima[minima < peak]
    right = minima[minima > peak]
    fallback = []
    if left.size:
        low = int(left[-1])
    else:
        low = 0
        fallback.append("low")
    if right.size:
        high = int(right[0])
    else:
        high = seg.size - 1
        fallback.append("high")
    low_bin, high_bin, peak_bin = low + lo, high + lo, peak + lo
    return ThresholdPair(
        float(h.bin_center(low_bin)),
        float(h.bin_center(high_bin)),
        peak_bin=peak_bin,
        low_bin=low_bin,
        high_bin=high_bin,
        fallback=tuple(fallback),
    )


def sdd_thresholds(pixels, bins: int = 256, bandwidth: int = 10, window_n: int = 13,
                   value_range=None):
    """Run the whole chain; returns ``(raw, smoothed, sdd, thresholds)``."""
    raw = build_histogram(pixels, bins, value_range)
    smoothed = smooth_histogram(raw, bandwidth)
    sdd = compute_sdd(smoothed, window_n)
    sdd = SddCurve(sdd.values, window_n, bandwidth)
    return raw, smoothed, sdd, select_double_threshold(sdd, smoothed)
