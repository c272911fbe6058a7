"""Write an ACDC-shaped synthetic case (image, label volume, 4-D cine) plus an evaluate manifest."""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from synth import write_acdc_case  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=Path)
    ap.add_argument("--patient", default="patient001")
    ap.add_argument("--slices", type=int, default=4)
    ap.add_argument("--frames", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    img, gt, cine = write_acdc_case(args.out, args.patient, args.slices, args.frames, args.seed)
    (args.out / "gt").mkdir(exist_ok=True)
    (args.out / "gt" / gt.name).write_bytes(gt.read_bytes())
    (args.out / "pairs.json").write_text(json.dumps([[img.name, gt.name]]) + "\n")
    for p in (img, gt, cine):
        print(p)


if __name__ == "__main__":
    main()
