"""Command line front end: ``segment``, ``evaluate``, ``phantom`` and ``debug-sdd``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io_formats as iof
from .config import ConfigError, SegmentConfig
from .histogram_sdd import SddError, sdd_thresholds
from .metrics import evaluate_pair
from .phantom import PhantomSpec, generate_phantom, generate_suite
from .pipeline import RoiBox, generate_roi, normalize_intensity, segment_case

log = logging.getLogger("lvsdd")

IMAGE_SUFFIXES = (".pgm", ".png")
VOLUME_SUFFIXES = (".nii", ".nii.gz")


class CliError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    segment: SegmentConfig
    inputs: list = field(default_factory=list)
    output: Path | None = None
    jobs: int = 1
    verbosity: int = 0

    def __post_init__(self):
        if self.jobs < 1:
            raise ConfigError("--jobs must be >= 1")


class RunLog:
    """Collects warnings and errors; mirrored to ``run_log.jsonl`` in the output directory."""

    def __init__(self):
        self.events = []

    def add(self, level, event, message, **extra):
        rec = {"level": level, "event": event, "message": message}
        rec.update(extra)
        self.events.append(rec)
        getattr(log, "error" if level == "error" else "warning")("%s: %s", event, message)

    @property
    def failed(self) -> bool:
        return any(e["level"] == "error" for e in self.events)

    def capture(self, caught, **extra):
        for w in caught:
            self.add("warning", w.category.__name__, str(w.message), **extra)

    def write(self, directory):
        if directory is None:
            return
        path = Path(directory) / "run_log.jsonl"
        with open(path, "w") as fh:
            for e in self.events:
                fh.write(json.dumps(e, sort_keys=True) + "\n")


def stem_of(path: Path) -> str:
    name = path.name
    for suffix in (".nii.gz", ".nii", ".pgm", ".png"):
        if name.lower().endswith(suffix):
            return name[: -len(suffix)]
    return path.stem


def is_volume(path: Path) -> bool:
    return path.name.lower().endswith(VOLUME_SUFFIXES)


def is_image(path: Path) -> bool:
    return path.suffix.lower() in IMAGE_SUFFIXES


def collect_inputs(paths) -> list[Path]:
    files = []
    for p in map(Path, paths):
        if not p.exists():
            raise CliError(f"input path does not exist: {p}")
        if p.is_dir():
            files.extend(sorted(f for f in p.iterdir() if f.is_file() and (is_image(f) or is_volume(f))))
        else:
            files.append(p)
    if not files:
        raise CliError("no input images or volumes found")
    return files


def load_config(path) -> SegmentConfig:
    return SegmentConfig.from_file(path) if path else SegmentConfig()


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _slice_record(res):
    t = res.thresholds
    return {
        "roi": res.roi.to_dict(),
        "thresholds": None if t is None else {
            "t_low": t.t_low, "t_high": t.t_high, "peak_bin": t.peak_bin,
            "low_bin": t.low_bin, "high_bin": t.high_bin, "fallback_flags": list(t.fallback),
        },
        "circle": None if res.circle is None else res.circle.to_dict(),
        "flags": sorted(res.flags),
    }


def _write_slice(res, image, out_dir: Path, name: str, dump: bool):
    """Mask in ``out_dir``; overlay and intermediates in subdirectories so stems stay unique."""
    iof.write_mask(res.final_mask, out_dir / f"{name}.png")
    (out_dir / "overlays").mkdir(exist_ok=True)
    iof.write_overlay(image, res.final_mask, out_dir / "overlays" / f"{name}.png")
    if dump:
        d = out_dir / "intermediates" / name
        d.mkdir(parents=True, exist_ok=True)
        iof.write_mask(res.myocardium_mask, d / "S_M.pgm")
        iof.write_mask(res.lv_raw_mask, d / "S_LV.pgm")
        iof.write_mask(res.dilated_circle_mask, d / "C_D.pgm")
        iof.write_mask(res.localized_mask, d / "V_L.pgm")
        _dump_json(_slice_record(res), d / "result.json")
        if res.circle is not None:
            _dump_json(res.circle.to_dict(), d / "circle.json")


def _report_flags(runlog, case, results, names):
    for res, name in zip(results, names):
        where = case if name == case else f"{case}/{name}"
        for flag in sorted(res.flags):
            runlog.add("warning", flag, f"{where}: {flag.replace('_', ' ')}", case=case, slice=name)


def cmd_segment(args, runlog: RunLog) -> None:
    cfg = load_config(args.config)
    run = RunConfig("segment", cfg, args.inputs, Path(args.out), args.jobs or os.cpu_count() or 1)
    run.output.mkdir(parents=True, exist_ok=True)
    files = collect_inputs(run.inputs)
    lv_code = next(k for k, v in cfg.label_map.items() if v == "LV")
    for path in files:
        stem = stem_of(path)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if is_volume(path):
                vol = iof.load_volume(path)
                frame = args.frame if vol.n_frames > 1 else 0
                if frame >= vol.n_frames:
                    raise CliError(f"{path}: frame {frame} out of range ({vol.n_frames} frames)")
                slices = vol.slices(frame)
                frames = None
                if vol.n_frames > 1:
                    frames = [vol.frames(z) for z in range(vol.n_slices)]
                elif args.cine:
                    cine = iof.load_volume(args.cine)
                    if cine.n_slices != vol.n_slices:
                        raise CliError(f"{args.cine}: slice count does not match {path}")
                    frames = [cine.frames(z) for z in range(cine.n_slices)]
                case = segment_case(slices, cfg, frames=frames, case_id=stem, frame_id=str(frame), jobs=run.jobs)
                case_dir = run.output / stem
                case_dir.mkdir(exist_ok=True)
                names = [f"slice_{z:03d}" for z in range(len(slices))]
                for res, img, name in zip(case.slices, slices, names):
                    _write_slice(res, img, case_dir, name, args.dump_intermediates)
                vol_out = iof.masks_to_volume(case.final_volume(), lv_code)
                iof.write_volume(vol_out, run.output / f"{stem}.nii.gz", vol.spacing)
                _report_flags(runlog, stem, case.slices, names)
            elif is_image(path):
                img = iof.load_grayscale(path)
                case = segment_case([img], cfg, case_id=stem)
                _write_slice(case.slices[0], img, run.output, stem, args.dump_intermediates)
                _report_flags(runlog, stem, case.slices, [stem])
            else:
                raise CliError(f"unsupported input file: {path}")
        runlog.capture(caught, case=stem)
        log.info("segmented %s", path)


def _pair_files(pred_dir: Path, truth_dir: Path, manifest):
    if manifest:
        with open(manifest) as fh:
            pairs = json.load(fh)
        return [(pred_dir / p, truth_dir / t) for p, t in pairs]
    for d in (pred_dir, truth_dir):
        if not d.is_dir():
            raise CliError(f"not a directory: {d}")
    pred = {stem_of(f): f for f in sorted(pred_dir.iterdir()) if is_image(f) or is_volume(f)}
    truth = {stem_of(f): f for f in sorted(truth_dir.iterdir()) if is_image(f) or is_volume(f)}
    orphans = sorted(set(pred) ^ set(truth))
    if orphans:
        lines = [f"  {'prediction' if s in pred else 'truth'} only: {s}" for s in orphans]
        raise CliError("unmatched files:\n" + "\n".join(lines))
    return [(pred[s], truth[s]) for s in sorted(pred)]


def _class_slices(path: Path, label_map):
    """LV masks per slice plus spacing (None for 2-D images)."""
    if is_volume(path):
        vol = iof.load_volume(path)
        return [iof.extract_class_mask(s, label_map, "LV") for s in vol.slices()], vol.spacing
    img = iof.load_grayscale(path)
    # 0/255 files are plain binary masks, anything else is a label image
    if set(np.unique(img).tolist()) <= {0, 255}:
        return [img > 0], None
    return [iof.extract_class_mask(img, label_map, "LV")], None


def cmd_evaluate(args, runlog: RunLog) -> None:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pairs = _pair_files(Path(args.pred), Path(args.truth), args.manifest)
    reports, names = [], []
    for pred_path, truth_path in pairs:
        stem = stem_of(truth_path)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            pred, _ = _class_slices(pred_path, cfg.label_map)
            truth, spacing = _class_slices(truth_path, cfg.label_map)
        runlog.capture(caught, case=stem)
        if args.spacing:
            spacing = tuple(args.spacing)
        elif spacing is None:
            runlog.add("warning", "MissingSpacing", f"{stem}: no spacing source, using 1.0 mm", case=stem)
            spacing = (1.0, 1.0)
        if len(pred) != len(truth) or pred[0].shape != truth[0].shape:
            raise CliError(f"{stem}: prediction and truth shapes differ")
        for z, (p, t) in enumerate(zip(pred, truth)):
            name = stem if len(truth) == 1 else f"{stem}:{z:03d}"
            if not p.any() and not t.any():
                runlog.add("warning", "both_empty", f"{name}: both masks empty, overlap scored 1", case=stem)
            elif not p.any() or not t.any():
                runlog.add("warning", "one_empty", f"{name}: one mask empty, distances undefined", case=stem)
            reports.append(evaluate_pair(p, t, spacing, cfg.apd_mode))
            names.append(name)
    agg = iof.write_report(reports, names, out / "per_slice.csv", out / "aggregate.json")
    print(json.dumps(iof.aggregate_record(agg), sort_keys=True))


def cmd_phantom(args, runlog: RunLog) -> None:
    out = Path(args.out)
    if args.phantom_cmd == "generate":
        spec = PhantomSpec(
            image_size=args.size,
            lv_center=(args.size / 2, args.size / 2) if args.center is None else tuple(args.center),
            pool_radius=args.pool_radius,
            wall_thickness=args.wall_thickness,
            intensities=tuple(args.intensities),
            noise_sigma=args.noise,
            seed=args.seed,
        )
        phantoms = [generate_phantom(spec)]
    else:
        phantoms = generate_suite(args.n, master_seed=args.seed)
    for sub in ("images", "truth", "truth_parts"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    manifest = []
    for i, ph in enumerate(phantoms):
        name = f"phantom_{i:03d}"
        iof.write_pgm(np.round(ph.image).astype(np.uint8), out / "images" / f"{name}.pgm")
        iof.write_mask(ph.pool_with_papillary_hull, out / "truth" / f"{name}.pgm")
        for key, mask in ph.truths().items():
            iof.write_mask(mask, out / "truth_parts" / f"{name}_{key}.pgm")
        s = ph.spec
        manifest.append({
            "name": name,
            "image_size": s.image_size,
            "lv_center": list(s.lv_center),
            "pool_radius": s.pool_radius,
            "wall_thickness": s.wall_thickness,
            "intensities": list(s.intensities),
            "papillary": [[p.angle, p.radius_offset, p.blob_radius] for p in s.papillary],
            "noise_sigma": s.noise_sigma,
            "seed": s.seed,
        })
    _dump_json({"phantoms": manifest}, out / "manifest.json")
    # phantom images are already ROI sized, so the whole image is the ROI
    _dump_json(SegmentConfig(fallback_fraction=1.0).to_dict(), out / "config.json")


def cmd_debug_sdd(args, runlog: RunLog) -> None:
    cfg = load_config(args.config)
    img = iof.load_volume(args.image).slice(args.slice) if is_volume(Path(args.image)) \
        else iof.load_grayscale(args.image)
    img = np.asarray(img, dtype=float)
    if args.roi:
        roi = RoiBox(*args.roi)
    else:
        roi = generate_roi([img], cfg.fallback_fraction)
    roi.check(img.shape)
    crop = normalize_intensity(img[roi.slices])
    if crop is None:
        raise CliError("ROI is constant; no histogram to analyse")
    try:
        raw, smooth, sdd, t = sdd_thresholds(crop, cfg.bins, cfg.bandwidth, cfg.window_n, (0.0, 255.0))
    except SddError as exc:
        raise CliError(f"SDD failed: {exc}") from None
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_index", "intensity", "raw_count", "smoothed_count", "sdd_value"])
        centers = raw.centers()
        for i in range(raw.bin_count):
            v = sdd.values[i]
            w.writerow([i, f"{centers[i]:.6f}", int(raw.counts[i]), f"{smooth.counts[i]:.6f}",
                        "" if np.isnan(v) else f"{v:.6f}"])
    finally:
        if args.out:
            fh.close()
    rec = {"t_low": t.t_low, "t_high": t.t_high, "peak_bin": t.peak_bin, "fallback_flags": list(t.fallback)}
    print(json.dumps(rec, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lvsdd", description="SDD + Hough left ventricle segmentation")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("segment", help="segment volumes or images")
    s.add_argument("inputs", nargs="+", help="NIfTI volumes, PGM/PNG slices, or directories of them")
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.add_argument("--config", help="JSON config file")
    s.add_argument("--jobs", type=int, default=None, help="slice-level threads (default: all cores)")
    s.add_argument("--frame", type=int, default=0, help="frame of a 4-D volume to segment")
    s.add_argument("--cine", help="4-D volume whose frames drive ROI detection for a 3-D input")
    s.add_argument("--dump-intermediates", action="store_true")

    e = sub.add_parser("evaluate", help="score predictions against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("-o", "--out", required=True)
    e.add_argument("--config")
    e.add_argument("--spacing", type=float, nargs=2, metavar=("SX", "SY"),
                   help="mm per pixel; default: NIfTI header of the truth file")
    e.add_argument("--manifest", help="JSON list of [prediction, truth] file name pairs")

    p = sub.add_parser("phantom", help="synthetic phantoms")
    psub = p.add_subparsers(dest="phantom_cmd", required=True)
    g = psub.add_parser("generate")
    g.add_argument("-o", "--out", required=True)
    g.add_argument("--size", type=int, default=160)
    g.add_argument("--center", type=float, nargs=2)
    g.add_argument("--pool-radius", type=float, default=20.0)
    g.add_argument("--wall-thickness", type=float, default=8.0)
    g.add_argument("--intensities", type=float, nargs=3, default=(0.0, 110.0, 255.0))
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    su = psub.add_parser("suite")
    su.add_argument("-o", "--out", required=True)
    su.add_argument("-n", type=int, default=50)
    su.add_argument("--seed", type=int, default=0)

    d = sub.add_parser("debug-sdd", help="dump histogram and SDD curve of one slice")
    d.add_argument("image")
    d.add_argument("--slice", type=int, default=0)
    d.add_argument("--roi", type=int, nargs=4, metavar=("X", "Y", "W", "H"))
    d.add_argument("--config")
    d.add_argument("-o", "--out", help="CSV path (default: stdout)")
    return ap


COMMANDS = {"segment": cmd_segment, "evaluate": cmd_evaluate, "phantom": cmd_phantom,
            "debug-sdd": cmd_debug_sdd}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    runlog = RunLog()
    out_dir = getattr(args, "out", None)
    try:
        COMMANDS[args.cmd](args, runlog)
    except (CliError, ConfigError, iof.FormatError, OSError, ValueError, KeyError) as exc:
        runlog.add("error", type(exc).__name__, str(exc))
        print(f"error: {exc}", file=sys.stderr)
    if out_dir and args.cmd != "debug-sdd" and Path(out_dir).is_dir():
        runlog.write(out_dir)
    return 1 if runlog.failed else 0


if __name__ == "__main__":
    sys.exit(main())
