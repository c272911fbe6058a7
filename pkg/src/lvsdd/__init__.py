"""Fully automated left ventricle segmentation: SDD double thresholding plus circular Hough localisation."""

from .config import SegmentConfig
from .pipeline import CaseResult, RoiBox, SliceResult, segment_case, segment_slice

__all__ = ["SegmentConfig", "RoiBox", "SliceResult", "CaseResult", "segment_slice", "segment_case"]
