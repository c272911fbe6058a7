import csv
import json

import numpy as np
import pytest

from lvsdd import io_formats as iof
from lvsdd.cli import main, stem_of
from synth import SPACING, write_acdc_case


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    d = tmp_path_factory.mktemp("suite")
    assert run("phantom", "suite", "-o", d, "-n", 4, "--seed", 2) == 0
    return d


def test_stems():
    from pathlib import Path
    assert stem_of(Path("a/b.nii.gz")) == "b"
    assert stem_of(Path("x.PGM")) == "x"


def test_phantom_suite_layout(suite):
    names = sorted(p.name for p in (suite / "images").iterdir())
    assert names == [f"phantom_{i:03d}.pgm" for i in range(4)]
    man = json.loads((suite / "manifest.json").read_text())
    assert len(man["phantoms"]) == 4 and man["phantoms"][0]["name"] == "phantom_000"
    assert json.loads((suite / "config.json").read_text())["fallback_fraction"] == 1.0
    assert (suite / "truth_parts" / "phantom_001_pool.pgm").exists()


def test_phantom_generate(tmp_path):
    assert run("phantom", "generate", "-o", tmp_path, "--noise", 3, "--seed", 5) == 0
    img = iof.load_grayscale(tmp_path / "images" / "phantom_000.pgm")
    assert img.shape == (160, 160)
    assert run("phantom", "generate", "-o", tmp_path / "bad", "--pool-radius", 90) == 1


def test_segment_then_evaluate_phantoms(suite, tmp_path):
    seg = tmp_path / "seg"
    assert run("segment", suite / "images", "-o", seg, "--config", suite / "config.json", "--jobs", 1) == 0
    for i in range(4):
        assert (seg / f"phantom_{i:03d}.png").exists()
        assert (seg / "overlays" / f"phantom_{i:03d}.png").exists()
    assert (seg / "run_log.jsonl").exists()
    ev = tmp_path / "ev"
    assert run("evaluate", "--pred", seg, "--truth", suite / "truth", "-o", ev) == 0
    agg = json.loads((ev / "aggregate.json").read_text())
    assert agg["n_pairs"] == 4 and agg["DICE"] > 0.9
    rows = list(csv.DictReader(open(ev / "per_slice.csv")))
    assert [r["name"] for r in rows] == [f"phantom_{i:03d}" for i in range(4)]


def test_missing_input_fails(tmp_path, capsys):
    assert run("segment", tmp_path / "nope.pgm", "-o", tmp_path / "out") == 1
    assert "does not exist" in capsys.readouterr().err
    log = [json.loads(line) for line in open(tmp_path / "out" / "run_log.jsonl")]
    assert log[-1]["level"] == "error"


def test_dump_intermediates(suite, tmp_path):
    out = tmp_path / "seg"
    assert run("segment", suite / "images" / "phantom_000.pgm", "-o", out,
               "--config", suite / "config.json", "--dump-intermediates") == 0
    d = out / "intermediates" / "phantom_000"
    for name in ("S_M.pgm", "S_LV.pgm", "V_L.pgm", "C_D.pgm", "result.json"):
        assert (d / name).exists()
    s_m, s_lv = iof.load_mask(d / "S_M.pgm"), iof.load_mask(d / "S_LV.pgm")
    assert not (s_m & s_lv).any()
    assert iof.load_mask(d / "V_L.pgm").sum() <= s_lv.sum()


def test_evaluate_identity_and_orphans(suite, tmp_path, capsys):
    assert run("evaluate", "--pred", suite / "truth", "--truth", suite / "truth", "-o", tmp_path / "a") == 0
    assert json.loads((tmp_path / "a" / "aggregate.json").read_text())["DICE"] == 1.0
    pred = tmp_path / "pred"
    pred.mkdir()
    for name in ("phantom_000.pgm", "phantom_001.pgm"):
        (pred / name).write_bytes((suite / "truth" / name).read_bytes())
    (pred / "extra.pgm").write_bytes((suite / "truth" / "phantom_000.pgm").read_bytes())
    assert run("evaluate", "--pred", pred, "--truth", suite / "truth", "-o", tmp_path / "b") == 1
    err = capsys.readouterr().err
    assert "prediction only: extra" in err and "truth only: phantom_002" in err


def test_evaluate_uses_header_spacing(tmp_path):
    lab = np.zeros((30, 30, 1), np.uint8)
    lab[5:15, 5:15, 0] = 3
    shifted = np.roll(lab, 2, axis=0)  # 2 px along x
    (tmp_path / "p").mkdir()
    (tmp_path / "t").mkdir()
    iof.write_volume(shifted, tmp_path / "p" / "c.nii.gz", spacing=(0.5, 3.0))
    iof.write_volume(lab, tmp_path / "t" / "c.nii.gz", spacing=(0.5, 3.0))
    assert run("evaluate", "--pred", tmp_path / "p", "--truth", tmp_path / "t", "-o", tmp_path / "e") == 0
    agg = json.loads((tmp_path / "e" / "aggregate.json").read_text())
    assert agg["Hausdorff"] == 1.0
    assert run("evaluate", "--pred", tmp_path / "p", "--truth", tmp_path / "t", "-o", tmp_path / "f",
               "--spacing", 1, 1) == 0
    assert json.loads((tmp_path / "f" / "aggregate.json").read_text())["Hausdorff"] == 2.0


def test_debug_sdd(suite, tmp_path, capsys):
    out = tmp_path / "sdd.csv"
    assert run("debug-sdd", suite / "images" / "phantom_000.pgm", "--config", suite / "config.json", "-o", out) == 0
    rec = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert set(rec) == {"t_low", "t_high", "peak_bin", "fallback_flags"}
    assert rec["t_low"] < rec["t_high"]
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["bin_index", "intensity", "raw_count", "smoothed_count", "sdd_value"]
    assert len(rows) == 257
    # undefined SDD values at the ends are left blank
    assert rows[1][4] == "" and rows[128][4] != ""


def test_bad_config_rejected(suite, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bandwdth": 3}))
    assert run("segment", suite / "images", "-o", tmp_path / "o", "--config", cfg) == 1
    assert "unknown config keys" in capsys.readouterr().err


def test_reruns_byte_identical_and_jobs_independent(suite, tmp_path):
    outs = []
    for k, jobs in enumerate((1, 1, 4)):
        out = tmp_path / f"r{k}"
        assert run("segment", suite / "images", "-o", out, "--config", suite / "config.json",
                   "--jobs", jobs, "--dump-intermediates") == 0
        outs.append({p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    assert outs[0] == outs[1] == outs[2]


def test_volume_case_with_cine(tmp_path):
    img, gt, cine = write_acdc_case(tmp_path, n_slices=2, n_frames=4)
    seg = tmp_path / "seg"
    assert run("segment", img, "--cine", cine, "-o", seg, "--jobs", 2) == 0
    vol = iof.load_volume(seg / "patient001_frame01.nii.gz")
    assert vol.spacing == SPACING and vol.n_slices == 2
    assert set(np.unique(vol.data).tolist()) <= {0, 3}
    assert (seg / "patient001_frame01" / "slice_001.png").exists()
    # a 4-D input drives its own ROI and picks the frame
    assert run("segment", cine, "--frame", 0, "-o", tmp_path / "seg4") == 0
    a = iof.load_volume(tmp_path / "seg4" / "patient001_4d.nii.gz").data
    assert np.array_equal(a, vol.data)
    assert run("segment", cine, "--frame", 9, "-o", tmp_path / "seg5") == 1
