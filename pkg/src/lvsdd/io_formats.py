"""Image, mask, volume and report files."""

from __future__ import annotations

import csv
import gzip
import json
import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .config import ACDC_LABELS, CLASSES
from .metrics import MetricsReport, aggregate, extract_contour

NIFTI_DTYPES = {2: np.uint8, 4: np.int16, 16: np.float32, 512: np.uint16}
OVERLAY_COLOR = (255, 0, 0)


class FormatError(ValueError):
    pass


class UnmappedLabelWarning(UserWarning):
    pass


class MissingSpacingWarning(UserWarning):
    pass


# --------------------------------------------------------------------- PGM/PNG

def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace separated header tokens; returns (tokens, offset after the last)."""
    tokens, pos, n = [], 0, len(data)
    while len(tokens) < count:
        while pos < n and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        if pos >= n:
            raise FormatError(f"PGM header truncated at byte {pos}: expected {count - len(tokens)} more field(s)")
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append((data[start:pos], start))
    return tokens, pos


def parse_pgm(data: bytes) -> np.ndarray:
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise FormatError(f"bad PGM magic at byte 0: {data[:2]!r}")
    tokens, pos = _pgm_tokens(data, 4)
    (magic, _), (w, w_off), (h, h_off), (mx, m_off) = tokens
    vals = []
    for tok, off, name in ((w, w_off, "width"), (h, h_off, "height"), (mx, m_off, "maxval")):
        if not tok.isdigit():
            raise FormatError(f"PGM {name} at byte {off} is not a positive integer: {tok!r}")
        vals.append(int(tok))
    width, height, maxval = vals
    if width <= 0 or height <= 0:
        raise FormatError(f"PGM dimensions must be positive, got {width}x{height} (byte {w_off})")
    if not 0 < maxval < 65536:
        raise FormatError(f"PGM maxval {maxval} at byte {m_off} outside 1..65535")
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        need = width * height * np.dtype(dtype).itemsize
        have = len(data) - pos
        if have < need:
            raise FormatError(f"PGM pixel data truncated at byte {len(data)}: missing {need - have} byte(s)")
        img = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    else:
        fields = data[pos:].split()
        if len(fields) < width * height:
            raise FormatError(
                f"PGM pixel data truncated at byte {len(data)}: missing {width * height - len(fields)} value(s)")
        img = np.array([int(f) for f in fields[:width * height]], dtype=np.int64)
        if img.max(initial=0) > maxval:
            raise FormatError(f"PGM value exceeds maxval {maxval}")
    out = img.reshape(height, width)
    return out.astype(np.uint8 if maxval < 256 else np.uint16)


def load_grayscale(path) -> np.ndarray:
    """PGM (P2/P5, 8 or 16 bit) or grayscale PNG as an integer array ``[row, col]``."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P2", b"P5"):
        try:
            return parse_pgm(data)
        except FormatError as exc:
            raise FormatError(f"{path}: {exc}") from None
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        with Image.open(path) as im:
            if im.mode in ("L", "1"):
                return np.array(im.convert("L"), dtype=np.uint8)
            if im.mode in ("I;16", "I;16B", "I"):
                return np.array(im, dtype=np.int64).astype(np.uint16)
            raise FormatError(f"{path}: PNG mode {im.mode} is not grayscale")
    raise FormatError(f"{path}: unrecognised image format (magic {data[:8]!r} at byte 0)")


def write_pgm(img, path):
    img = np.asarray(img)
    if img.ndim != 2:
        raise FormatError("PGM images are 2-D")
    if img.min(initial=0) < 0 or img.max(initial=0) > 65535:
        raise FormatError("PGM values must lie in 0..65535")
    maxval = 255 if img.max(initial=0) < 256 else 65535
    dtype = np.uint8 if maxval == 255 else np.dtype(">u2")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode()
    Path(path).write_bytes(header + np.ascontiguousarray(img, dtype=dtype).tobytes())


def write_png(img, path):
    img = np.asarray(img)
    if img.dtype == np.uint16 or img.max(initial=0) > 255:
        Image.fromarray(img.astype(np.uint16)).save(path)
    else:
        Image.fromarray(img.astype(np.uint8), mode="L").save(path)


def write_mask(mask, path):
    """Binary mask as 0/255; format picked from the suffix (``.pgm`` or ``.png``)."""
    img = np.asarray(mask, dtype=bool).astype(np.uint8) * 255
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        write_pgm(img, path)
    elif suffix == ".png":
        write_png(img, path)
    else:
        raise FormatError(f"unsupported mask format {suffix!r}")


def load_mask(path) -> np.ndarray:
    return load_grayscale(path) > 0


def to_uint8(img) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    lo, hi = img.min(), img.max()
    if hi <= lo:
        return np.zeros(img.shape, dtype=np.uint8)
    return np.round((img - lo) / (hi - lo) * 255).astype(np.uint8)


def write_overlay(image, mask, path, color=OVERLAY_COLOR):
    """Grayscale image as RGB PNG with the mask contour drawn in ``color``."""
    gray = to_uint8(image)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    pts = extract_contour(mask)
    if len(pts):
        rgb[pts[:, 1], pts[:, 0]] = color
    Image.fromarray(rgb, mode="RGB").save(path)


# ----------------------------------------------------------------------- NIfTI

@dataclass
class Volume:
    """Voxel data ``[x, y, z]`` or ``[x, y, z, t]`` with in-plane spacing in mm."""

    data: np.ndarray
    spacing: tuple

    @property
    def n_frames(self) -> int:
        return self.data.shape[3] if self.data.ndim == 4 else 1

    @property
    def n_slices(self) -> int:
        return self.data.shape[2] if self.data.ndim >= 3 else 1

    def slice(self, z: int, t: int = 0) -> np.ndarray:
        """2-D image ``[row=y, col=x]``."""
        d = self.data
        if d.ndim == 2:
            return d.T
        if d.ndim == 3:
            return d[:, :, z].T
        return d[:, :, z, t].T

    def slices(self, t: int = 0) -> list:
        return [self.slice(z, t) for z in range(self.n_slices)]

    def frames(self, z: int) -> list:
        return [self.slice(z, t) for t in range(self.n_frames)]


def _read_header_bytes(path: Path) -> bytes:
    opener = gzip.open if path.suffix == ".gz" else open
    try:
        with opener(path, "rb") as fh:
            return fh.read(352)
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _check_nifti_header(path: Path):
    hdr = _read_header_bytes(path)
    if len(hdr) < 348:
        raise FormatError(f"{path}: NIfTI header truncated at byte {len(hdr)}: missing {348 - len(hdr)} byte(s)")
    for endian in "<>":
        if struct.unpack(endian + "i", hdr[:4])[0] == 348:
            break
    else:
        raise FormatError(f"{path}: sizeof_hdr at byte 0 is not 348")
    magic = hdr[344:348]
    if magic != b"n+1\x00":
        raise FormatError(f"{path}: wrong NIfTI-1 magic {magic!r} at byte 344 (single-file n+1 required)")
    code = struct.unpack(endian + "h", hdr[70:72])[0]
    if code not in NIFTI_DTYPES:
        raise FormatError(f"{path}: unsupported NIfTI datatype code {code} at byte 70")


def load_volume(path) -> Volume:
    """Single-file NIfTI-1 (.nii or .nii.gz) with scl_slope/scl_inter applied."""
    import nibabel as nib

    path = Path(path)
    _check_nifti_header(path)
    img = nib.load(str(path))
    hdr = img.header
    raw = np.asarray(img.dataobj.get_unscaled())
    # nibabel moves scl_* from the header onto the array proxy at load time
    slope, inter = (float(v) if v is not None else math.nan
                    for v in (img.dataobj.slope, img.dataobj.inter))
    if not math.isfinite(slope) or slope == 0:
        slope, inter = 1.0, 0.0
    if not math.isfinite(inter):
        inter = 0.0
    if slope == 1.0 and inter == 0.0:
        data = raw
    else:
        data = raw.astype(np.float64) * slope + inter
    pix = hdr["pixdim"]
    sx, sy = float(pix[1]), float(pix[2])
    if not (sx > 0 and sy > 0):
        warnings.warn(f"{path}: no pixel spacing in header, using 1.0 mm", MissingSpacingWarning, stacklevel=2)
        sx = sy = 1.0
    return Volume(data, (sx, sy))


def write_volume(data, path, spacing=(1.0, 1.0), slice_thickness=1.0, dtype=None,
                 slope=None, inter=None):
    """Write ``data`` (indexed ``[x, y, z(, t)]``) as single-file NIfTI-1.

    ``data`` holds the stored values; ``slope``/``inter`` go into the header
    unchanged so that readers see ``slope * data + inter``.
    """
    import nibabel as nib

    path = Path(path)
    data = np.asarray(data)
    if dtype is not None:
        data = data.astype(dtype)
    if data.dtype.type not in set(NIFTI_DTYPES.values()):
        raise FormatError(f"unsupported dtype {data.dtype}")
    img = nib.Nifti1Image(data, np.diag([spacing[0], spacing[1], slice_thickness, 1.0]))
    zooms = [spacing[0], spacing[1], slice_thickness] + [1.0] * (data.ndim - 3)
    img.header.set_zooms(zooms[:data.ndim])
    nib.save(img, str(path))
    # nibabel resets the scaling fields for unscaled arrays, so set them afterwards
    gz = path.suffix == ".gz"
    raw = bytearray(gzip.decompress(path.read_bytes()) if gz else path.read_bytes())
    endian = "<" if struct.unpack("<i", raw[:4])[0] == 348 else ">"
    if slope is not None:
        raw[112:120] = struct.pack(endian + "ff", slope, 0.0 if inter is None else inter)
    path.write_bytes(gzip.compress(bytes(raw), mtime=0) if gz else bytes(raw))


def masks_to_volume(masks, label: int = 3) -> np.ndarray:
    """Stack ``[row, col]`` slices into a ``[x, y, z]`` uint8 label volume."""
    vol = np.stack([np.asarray(m, dtype=bool).T for m in masks], axis=2)
    return vol.astype(np.uint8) * np.uint8(label)


def extract_class_mask(label_image, label_map=None, cls: str = "LV") -> np.ndarray:
    label_map = ACDC_LABELS if label_map is None else {int(k): v for k, v in label_map.items()}
    if cls not in CLASSES:
        raise KeyError(f"unknown class {cls!r}")
    codes = [k for k, v in label_map.items() if v == cls]
    if not codes:
        raise KeyError(f"class {cls!r} is not in the label map")
    labels = np.rint(np.asarray(label_image)).astype(np.int64)
    unmapped = sorted(set(np.unique(labels).tolist()) - set(label_map))
    if unmapped:
        warnings.warn(f"unmapped label values {unmapped}", UnmappedLabelWarning, stacklevel=2)
    return np.isin(labels, codes)


# --------------------------------------------------------------------- reports

def _num(x: float):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else round(float(x), 10)


def aggregate_record(agg: MetricsReport) -> dict:
    return {
        "DICE": _num(agg.dice),
        "APD": _num(agg.apd),
        "Hausdorff": _num(agg.hausdorff),
        "Jaccard": _num(agg.jaccard),
        "n_pairs": agg.n_pairs,
        "table_row": agg.table_row(),
    }


def write_report(reports, names, csv_path, json_path=None) -> MetricsReport:
    """Per-slice CSV plus an aggregate JSON carrying the four summary fields."""
    reports = list(reports)
    names = list(names)
    if len(reports) != len(names):
        raise ValueError("one name per report required")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "dice", "jaccard", "apd", "hausdorff"])
        for name, r in zip(names, reports):
            w.writerow([name] + [f"{v:.10g}" for v in (r.dice, r.jaccard, r.apd, r.hausdorff)])
    agg = aggregate(reports)
    if json_path is not None:
        Path(json_path).write_text(json.dumps(aggregate_record(agg), indent=2, sort_keys=True) + "\n")
    return agg
