"""Per-slice and per-case LV segmentation.

ROI -> intensity normalisation -> SDD double threshold -> myocardium mask ->
Hough circle on the myocardium -> dilated disk -> inverse threshold ->
intersection -> blob removal, largest component, convex hull.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from skimage.filters import threshold_otsu

from .config import SegmentConfig
from .histogram_sdd import SddError, ThresholdPair, sdd_thresholds
from .hough import Circle, detect_circles, rasterize_disk, select_largest
from .morphology import CROSS, dilate, intersect, largest_component, remove_small_blobs, convex_hull_mask

BOUNDARY_FALLBACK = "boundary_fallback"
NO_CIRCLE_FALLBACK = "no_circle_fallback"
EMPTY_RESULT = "empty_result"
SDD_FAILURE = "sdd_failure"

DILATE_ITERATIONS = 3


@dataclass(frozen=True)
class RoiBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError("ROI must have positive size")

    def check(self, shape):
        rows, cols = shape
        if self.x < 0 or self.y < 0 or self.x + self.w > cols or self.y + self.h > rows:
            raise ValueError(f"ROI {self} outside image of shape {shape}")

    @property
    def slices(self):
        return np.s_[self.y:self.y + self.h, self.x:self.x + self.w]

    def to_dict(self):
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


@dataclass
class SliceResult:
    roi: RoiBox
    thresholds: ThresholdPair | None
    circle: Circle | None  # full-image coordinates
    myocardium_mask: np.ndarray
    lv_raw_mask: np.ndarray
    dilated_circle_mask: np.ndarray
    localized_mask: np.ndarray
    final_mask: np.ndarray
    flags: frozenset = frozenset()


@dataclass
class CaseResult:
    case_id: str
    frame_id: str
    slices: list = field(default_factory=list)

    def __post_init__(self):
        if not self.case_id or not self.frame_id:
            raise ValueError("case and frame identifiers must be non-empty")

    def final_volume(self) -> np.ndarray:
        return np.stack([s.final_mask for s in self.slices])


def _square(center_xy, side, shape) -> RoiBox:
    rows, cols = shape
    side = max(1, min(int(round(side)), rows, cols))
    x = int(round(center_xy[0] - side / 2))
    y = int(round(center_xy[1] - side / 2))
    x = min(max(x, 0), cols - side)
    y = min(max(y, 0), rows - side)
    return RoiBox(x, y, side, side)


def centered_roi(shape, fraction: float) -> RoiBox:
    rows, cols = shape
    side = int(round(fraction * min(rows, cols)))
    side = max(1, side)
    return RoiBox((cols - side) // 2, (rows - side) // 2, side, side)


def generate_roi(frames, fallback_fraction: float = 0.4) -> RoiBox:
    """Square ROI around the strongest temporal intensity change.

    The per-pixel standard deviation over the frames is thresholded at its
    Otsu level and the box is centred on the largest component. With fewer
    than two frames, or no temporal change at all, a centred box is returned.
    """
    frames = [np.asarray(f, dtype=float) for f in frames]
    shape = frames[0].shape
    side = fallback_fraction * min(shape)
    if len(frames) < 2:
        return centered_roi(shape, fallback_fraction)
    std = np.std(np.stack(frames), axis=0)
    if not std.max() > std.min():
        return centered_roi(shape, fallback_fraction)
    moving = largest_component(std > threshold_otsu(std))
    if not moving.any():
        return centered_roi(shape, fallback_fraction)
    ys, xs = np.nonzero(moving)
    return _square((xs.mean(), ys.mean()), side, shape)


def normalize_intensity(img):
    """Min-max map onto [0, 255]; ``None`` for a constant image."""
    img = np.asarray(img, dtype=float)
    lo, hi = img.min(), img.max()
    if not hi > lo:
        return None
    return (img - lo) / (hi - lo) * 255.0


def segment_myocardium(roi_image, t: ThresholdPair) -> np.ndarray:
    r = np.asarray(roi_image, dtype=float)
    return (r > t.t_low) & (r < t.t_high)


def segment_lv_raw(roi_image, t: ThresholdPair) -> np.ndarray:
    r = np.asarray(roi_image, dtype=float)
    return (r < t.t_low) | (r > t.t_high)


def dilated_disk(circle: Circle, shape) -> np.ndarray:
    rows, cols = shape
    return dilate(rasterize_disk(circle, cols, rows), CROSS, DILATE_ITERATIONS)


def localize_lv(lv_raw, circle: Circle) -> np.ndarray:
    lv_raw = np.asarray(lv_raw, dtype=bool)
    return intersect(lv_raw, dilated_disk(circle, lv_raw.shape))


def postprocess(v_l, min_area: int) -> np.ndarray:
    kept = largest_component(remove_small_blobs(v_l, min_area))
    return convex_hull_mask(kept)


def radius_range(shape, cfg: SegmentConfig):
    side = min(shape)
    r_min = max(1, int(round(cfg.r_min_frac * side)))
    r_max = min(int(cfg.r_max_frac * side), side // 2)
    return r_min, r_max


def _center_half(shape) -> np.ndarray:
    rows, cols = shape
    m = np.zeros(shape, dtype=bool)
    m[rows // 4:rows - rows // 4, cols // 4:cols - cols // 4] = True
    return m


def segment_slice(image, roi: RoiBox | None = None, config: SegmentConfig | None = None) -> SliceResult:
    cfg = config or SegmentConfig()
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("expected a 2-D slice")
    roi = roi or RoiBox(0, 0, image.shape[1], image.shape[0])
    roi.check(image.shape)

    empty = np.zeros(image.shape, dtype=bool)

    def embed(m):
        out = empty.copy()
        if m is not None:
            out[roi.slices] = m
        return out

    flags = set()
    crop = normalize_intensity(image[roi.slices])
    thresholds = None
    if crop is not None:
        try:
            thresholds = sdd_thresholds(crop, cfg.bins, cfg.bandwidth, cfg.window_n, (0.0, 255.0))[3]
        except SddError:
            thresholds = None
    if thresholds is None:
        flags |= {SDD_FAILURE, EMPTY_RESULT}
        return SliceResult(roi, None, None, empty, empty.copy(), empty.copy(), empty.copy(),
                           empty.copy(), frozenset(flags))
    if thresholds.boundary_fallback:
        flags.add(BOUNDARY_FALLBACK)

    s_m = segment_myocardium(crop, thresholds)
    s_lv = segment_lv_raw(crop, thresholds)
    r_min, r_max = radius_range(crop.shape, cfg)
    circles = []
    if r_min < r_max:
        circles = detect_circles(s_m, r_min, r_max, cfg.min_score_fraction)

    if circles:
        circle = select_largest(circles)
        c_d = dilated_disk(circle, crop.shape)
        v_l = intersect(s_lv, c_d)
        full_circle = replace(circle, cx=circle.cx + roi.x, cy=circle.cy + roi.y)
    else:
        flags.add(NO_CIRCLE_FALLBACK)
        full_circle, c_d = None, None
        v_l = largest_component(s_lv & _center_half(crop.shape))

    min_area = int(round(cfg.min_area_frac * crop.size))
    final = postprocess(v_l, min_area)
    if not final.any():
        flags.add(EMPTY_RESULT)
    return SliceResult(roi, thresholds, full_circle, embed(s_m), embed(s_lv), embed(c_d),
                       embed(v_l), embed(final), frozenset(flags))


def segment_case(slices, config: SegmentConfig | None = None, frames=None, rois=None,
                 case_id: str = "case", frame_id: str = "0", jobs: int = 1) -> CaseResult:
    """Segment every slice of one cardiac phase.

    ``frames[i]`` optionally holds the temporal frames at slice position ``i``
    for ROI detection; ``rois[i]`` overrides ROI detection for that slice.
    """
    cfg = config or SegmentConfig()
    slices = [np.asarray(s, dtype=float) for s in slices]
    if not slices:
        raise ValueError("a case needs at least one slice")

    def one(i):
        if rois is not None and rois[i] is not None:
            roi = rois[i]
        else:
            stack = frames[i] if frames is not None else [slices[i]]
            roi = generate_roi(stack, cfg.fallback_fraction)
        return segment_slice(slices[i], roi, cfg)

    if jobs > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(len(slices))))
    else:
        results = [one(i) for i in range(len(slices))]
    return CaseResult(case_id, frame_id, results)
