import io
import json
import subprocess
import sys

import numpy as np
import pytest

from motifsift import cli
from motifsift.image import read_image


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run_command([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def motif_png(tmp_path):
    path = tmp_path / "m.png"
    code, _, _ = run("synth", "--family", "SymmetricDiamond", "--size", "240x160", "--seed", "0", "--out", path)
    assert code == 0
    return path


def test_synth_writes_png_and_spec(motif_png):
    assert read_image(motif_png).shape == (160, 240)
    spec = json.loads(motif_png.with_suffix(".json").read_text())
    assert spec["family"] == "SymmetricDiamond" and spec["width"] == 240


def test_self_match_100(motif_png):
    code, out, _ = run("match", motif_png, motif_png, "--threshold", "0.2")
    assert code == 0 and "retained 100.00%" in out


def test_match_with_ransac_and_viz(tmp_path, motif_png):
    d = tmp_path / "d.png"
    assert run("deform", motif_png, "--kind", "zoomrotation", "--level", "2", "--out", d)[0] == 0
    code, out, _ = run("match", motif_png, d, "--threshold", "0.8", "--ransac", "--seed", "3",
                       "--viz", tmp_path / "v.png", "--out", tmp_path / "m.json")
    assert code == 0 and "ransac inliers" in out
    assert (tmp_path / "v.png").exists()
    assert set(json.loads((tmp_path / "m.json").read_text())) == {"H", "inliers", "seed", "matches"}


def test_detect_and_match_feature_files(tmp_path, motif_png):
    f = tmp_path / "f.json"
    code, out, _ = run("detect", motif_png, "--out", f)
    assert code == 0
    n = len(json.loads(f.read_text())["features"])
    assert out.startswith(f"{n} features")
    code, out, _ = run("match", f, f, "--threshold", "0.2")
    assert code == 0 and "retained 100.00%" in out


def test_deform_bad_level_is_usage_error(motif_png, tmp_path):
    code, out, err = run("deform", motif_png, "--kind", "blur", "--level", "9", "--out", tmp_path / "o.png")
    assert code == 1 and err.count("\n") == 1 and "level" in err


def test_usage_errors(tmp_path):
    assert run()[0] == 1
    assert run("frobnicate")[0] == 1
    assert run("deform", "x.png", "--kind", "blur", "--level", "2", "--out", "o.png", "--bogus")[0] == 1
    assert run("synth", "--family", "Paisley", "--out", tmp_path / "o.png")[0] == 1


def test_input_errors(tmp_path):
    code, _, err = run("deform", tmp_path / "missing.png", "--kind", "blur", "--level", "2", "--out", tmp_path / "o.png")
    assert code == 2 and err.startswith("motifsift: error:")
    (tmp_path / "bad.csv").write_text("x,y\n1,2\n")
    assert run("report", tmp_path / "bad.csv", "--kind", "Blur", "--level", "2", "--threshold", "0.2")[0] == 2


def test_deform_gt_sidecar(motif_png, tmp_path):
    code, _, _ = run("deform", motif_png, "--kind", "Viewpoint", "--level", "5", "--out", tmp_path / "o.png",
                     "--gt", tmp_path / "gt.json")
    gt = json.loads((tmp_path / "gt.json").read_text())
    assert code == 0 and gt["kind"] == "Viewpoint" and len(gt["H"]) == 9


def test_bench_and_report(tmp_path, motif_png):
    cfg = {"classes": [{"name": "m", "path": "m.png"}], "kinds": ["Blur", "Light"], "levels": [1, 5],
           "thresholds": [0.2, 0.8], "ransac": {"enabled": False}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    code, out, _ = run("bench", "--config", tmp_path / "c.json", "--out", tmp_path / "r.csv",
                       "--report", tmp_path / "r.md")
    assert code == 0 and out.startswith("8 records")
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 9
    assert "| Blur-1_sift 0.2 | 100.00% |" in (tmp_path / "r.md").read_text()
    code, out, _ = run("report", tmp_path / "r.csv", "--kind", "Blur", "--level", "1", "--threshold", "0.2")
    assert code == 0 and out.strip() == "100.00"
    code, _, err = run("report", tmp_path / "r.csv", "--kind", "Viewpoint", "--level", "1", "--threshold", "0.2")
    assert code == 2


def test_outputs_byte_identical(tmp_path, motif_png):
    for name in ("a", "b"):
        run("deform", motif_png, "--kind", "Compression", "--level", "4", "--out", tmp_path / f"{name}.png")
        run("detect", motif_png, "--out", tmp_path / f"{name}.json")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_help_lists_flags():
    r = subprocess.run([sys.executable, "-m", "motifsift", "match", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for flag in ("--threshold", "--ransac", "--seed", "--viz", "--ratio", "--out"):
        assert flag in r.stdout
    r = subprocess.run([sys.executable, "-m", "motifsift", "bench", "--help"], capture_output=True, text=True)
    for flag in ("--config", "--out", "--report", "--jobs", "--deformed-dir", "--viz-dir", "--no-ransac"):
        assert flag in r.stdout
