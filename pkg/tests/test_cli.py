import csv
import json

import pytest

from rbrc.cli import main
from rbrc.report import parse_values
from rbrc.synthetic import SyntheticSpec, gen_sequence
from rbrc.yuv_io import VideoSpec, write_sequence

W, H, N = 64, 48, 8


@pytest.fixture(scope="module")
def clip(tmp_path_factory):
    path = tmp_path_factory.mktemp("clip") / "clip.yuv"
    frames = gen_sequence(SyntheticSpec("textured", shift=(1, 0), seed=6), VideoSpec(W, H, 15, N))
    write_sequence(path, [f.luma for f in frames])
    return path


def _args(clip, out, *extra):
    return ["--input", str(clip), "--width", str(W), "--height", str(H), "--frames", str(N),
            "--bitrate", "16000", "--output", str(out), *extra]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_encode_outputs(clip, tmp_path):
    out = tmp_path / "enc"
    assert main(["encode", *_args(clip, out, "--mode", "t2", "--dump-regions", "--dump-recon",
                                  "--dump-models")]) == 0
    rows = _rows(out / "frames.csv")
    assert len(rows) == N
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["mode"] == "t2" and summary["config"]["input"] == str(clip)
    assert len(list((out / "regions").glob("*.pgm"))) == N - 1
    pgm = (out / "regions" / "frame_00001.pgm").read_bytes()
    assert pgm.startswith(b"P5\n64 48\n255\n")
    assert (out / "recon.yuv").stat().st_size == N * W * H * 3 // 2
    models = _rows(out / "models.csv")
    p_frames = sum(r["type"] == "P" for r in rows)
    assert p_frames >= 1 and len(models) == 3 * p_frames


def test_frame_skip_counts_coded_frames(clip, tmp_path):
    out = tmp_path / "skip"
    assert main(["encode", *_args(clip, out, "--frame-skip", "1")]) == 0
    rows = _rows(out / "frames.csv")
    assert [int(r["frame"]) for r in rows] == [0, 2, 4, 6]


def test_encode_byte_identical(clip, tmp_path):
    for d in ("a", "b"):
        assert main(["encode", *_args(clip, tmp_path / d, "--mode", "t1")]) == 0
    assert (tmp_path / "a" / "frames.csv").read_bytes() == (tmp_path / "b" / "frames.csv").read_bytes()


def test_missing_input(tmp_path, capsys):
    missing = tmp_path / "nope.yuv"
    assert main(["encode", *_args(missing, tmp_path / "o")]) != 0
    assert str(missing) in capsys.readouterr().err


def test_truncated_input(clip, tmp_path, capsys):
    assert main(["encode", *_args(clip, tmp_path / "o")[:-2], "--output", str(tmp_path / "o"),
                 "--frames", str(N + 5)]) != 0
    assert "bytes" in capsys.readouterr().err


def test_bad_config_value(clip, tmp_path, capsys):
    assert main(["encode", *_args(clip, tmp_path / "o", "--mu", "3")]) != 0
    assert "mu" in capsys.readouterr().err


def test_config_file_with_flag_override(clip, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"input={clip}\nwidth={W}\nheight={H}\nframes={N}\nmode=fl\nbitrate=20000\n"
                   f"output={tmp_path / 'cf'}\n")
    assert main(["encode", "--config", str(cfg), "--mode", "t1"]) == 0
    summary = json.loads((tmp_path / "cf" / "summary.json").read_text())
    assert summary["mode"] == "t1" and summary["config"]["bitrate"] == 20000.0


def test_compare(clip, tmp_path):
    out = tmp_path / "cmp"
    assert main(["compare", *_args(clip, out)]) == 0
    rows = _rows(out / "compare.csv")
    assert [r["mode"] for r in rows] == ["mbl", "fl", "t1", "t2"]
    per = _rows(out / "per-region.csv")
    assert len(per) == 12
    t2 = {r["region"]: r for r in per if r["mode"] == "t2"}
    assert set(t2) == {"MR", "Complex", "Flat"}
    curves = _rows(out / "curves.csv")
    assert len(curves) == 4 * N


def test_compare_cqp_matches_encode(clip, tmp_path):
    assert main(["compare", *_args(clip, tmp_path / "c", "--modes", "cqp", "--qp", "30")]) == 0
    assert main(["encode", *_args(clip, tmp_path / "e", "--mode", "cqp", "--qp", "30")]) == 0
    row = _rows(tmp_path / "c" / "compare.csv")[0]
    summary = json.loads((tmp_path / "e" / "summary.json").read_text())
    assert float(row["mean_psnr"]) == pytest.approx(summary["mean_psnr"], abs=1e-4)


def test_compare_byte_identical(clip, tmp_path):
    for d in ("a", "b"):
        assert main(["compare", *_args(clip, tmp_path / d, "--modes", "fl,t2")]) == 0
    for name in ("compare.csv", "per-region.csv", "curves.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, name


def test_qp_sweep_rows(clip, tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", *_args(clip, out), "--axis", "qp", "--values", "32:2:48",
                 "--probes", "4"]) == 0
    rows = _rows(out / "sweep.csv")
    by_region = {}
    for r in rows:
        by_region.setdefault(r["region"], []).append(int(r["qp"]))
    for qps in by_region.values():
        assert qps == list(range(32, 49, 2))
    fits = _rows(out / "fits.csv")
    assert {f["region"] for f in fits} == set(by_region)
    assert all(0 <= float(f["r2_rate"]) <= 1 for f in fits)


def test_frame_skip_sweep(clip, tmp_path):
    out = tmp_path / "fs"
    assert main(["sweep", *_args(clip, out), "--axis", "frame_skip", "--values", "0,1,2",
                 "--modes", "fl,t1"]) == 0
    rows = _rows(out / "sweep.csv")
    assert [(r["value"], r["mode"]) for r in rows] == [
        (v, m) for v in ("0", "1", "2") for m in ("fl", "t1")]


def test_empty_values_usage_error(clip, tmp_path):
    assert main(["sweep", *_args(clip, tmp_path / "x"), "--axis", "bitrate", "--values", ""]) != 0
    assert main(["sweep", *_args(clip, tmp_path / "x"), "--axis", "qp", "--values", "60"]) != 0


def test_regions_command(tmp_path):
    clip = tmp_path / "pan.yuv"
    frames = gen_sequence(SyntheticSpec("translate", shift=(1, 0), seed=6), VideoSpec(W, H, 15, N))
    write_sequence(clip, [f.luma for f in frames])
    out = tmp_path / "rg"
    assert main(["regions", *_args(clip, out)]) == 0
    assert len(list(out.glob("*.pgm"))) == N - 1
    rows = _rows(out / "regions.csv")
    assert len(rows) == N - 1
    for r in rows:
        assert int(r["n_mr"]) + int(r["n_complex"]) + int(r["n_flat"]) == 12
        assert (int(r["gmv_x"]), int(r["gmv_y"])) == (1, 0)


def test_parse_values():
    assert parse_values("32:2:48", integer=True) == [32, 34, 36, 38, 40, 42, 44, 46, 48]
    assert parse_values("16000,32000") == [16000.0, 32000.0]
    for bad in ("", "1:0:5", "1:2"):
        with pytest.raises(ValueError):
            parse_values(bad)
