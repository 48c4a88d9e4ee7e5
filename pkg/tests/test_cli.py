import numpy as np
import pytest

from lanewatch import load_model, parse_feature_vector, parse_report
from lanewatch.cli import main

from _scene import build_scene, write_raw

CONFIG = (
    "lane only\n"
    "quad 10,10 74,10 74,250 10,250\n"
    "blocks 6\n"
    "stopline front\n"
)


@pytest.fixture()
def scene_files(tmp_path):
    scene = build_scene(40, 17, width=96, height=260, fps=5, config_text=CONFIG)
    cfg = tmp_path / "lanes.cfg"
    cfg.write_text(scene.config_text)
    raw = tmp_path / "stream.y"
    write_raw(scene, raw)
    return scene, cfg, raw


def run_args(scene, cfg, raw, tmp_path, *extra):
    out = tmp_path / "reports.txt"
    argv = ["--config", str(cfg), "--raw", str(raw),
            "--width", str(scene.width), "--height", str(scene.height),
            "--source-fps", "5", "--target-fps", "5",
            "--init-samples", "120", "--seed", "3",
            "--output", str(out), *extra]
    return main(argv), out


def test_detection_run_writes_reports(scene_files, tmp_path):
    scene, cfg, raw = scene_files
    code, out = run_args(scene, cfg, raw, tmp_path)
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 40 - 20  # 120 samples / 6 blocks = 20 init frames
    for line in lines:
        report = parse_report(line)
        assert report.lanes[0].lane_id == "only"
        assert len(report.lanes[0].occupancy) == 6


def test_dump_features(scene_files, tmp_path):
    scene, cfg, raw = scene_files
    dump = tmp_path / "features.csv"
    code, _ = run_args(scene, cfg, raw, tmp_path, "--dump-features", str(dump))
    assert code == 0
    rows = dump.read_text().splitlines()
    assert len(rows) == 40 * 6
    vec = parse_feature_vector(rows[0])
    assert vec.shape == (8,)
    assert ((vec >= 0) & (vec <= 1)).all()


def test_snapshot_out_and_resume(scene_files, tmp_path):
    scene, cfg, raw = scene_files
    snap = tmp_path / "model.json"
    code, out_a = run_args(scene, cfg, raw, tmp_path, "--snapshot-out", str(snap))
    assert code == 0
    model = load_model(snap)
    assert model.tagged

    out_b = tmp_path / "resumed.txt"
    code = main(["--config", str(cfg), "--raw", str(raw),
                 "--width", str(scene.width), "--height", str(scene.height),
                 "--source-fps", "5", "--target-fps", "5",
                 "--snapshot-in", str(snap), "--seed", "3",
                 "--output", str(out_b)])
    assert code == 0
    # resumed run reports from the very first frame
    assert len(out_b.read_text().splitlines()) == 40


def test_missing_config_is_config_error(tmp_path, monkeypatch):
    monkeypatch.delenv("LANEWATCH_CONFIG", raising=False)
    assert main(["--raw", "x.y"]) == 1
    assert main(["--config", str(tmp_path / "nope.cfg"), "--raw", "x.y"]) == 1


def test_no_source_is_config_error(scene_files):
    _, cfg, _ = scene_files
    assert main(["--config", str(cfg)]) == 1


def test_bad_flag_exits_one(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--definitely-not-a-flag"])
    assert err.value.code == 1


def test_bad_config_is_config_error(scene_files, tmp_path):
    scene, _, raw = scene_files
    bad = tmp_path / "bad.cfg"
    bad.write_text("lane a\nquad 1,2 3,4\n")
    code = main(["--config", str(bad), "--raw", str(raw),
                 "--width", str(scene.width), "--height", str(scene.height)])
    assert code == 1


def test_truncated_stream_is_stream_error(scene_files, tmp_path):
    scene, cfg, raw = scene_files
    clipped = tmp_path / "clipped.y"
    clipped.write_bytes(raw.read_bytes()[: scene.width * scene.height * 3 + 100])
    code = main(["--config", str(cfg), "--raw", str(clipped),
                 "--width", str(scene.width), "--height", str(scene.height),
                 "--source-fps", "5", "--target-fps", "5",
                 "--init-samples", "120", "--output", str(tmp_path / "o.txt")])
    assert code == 2


def test_env_var_overrides_config_flag(scene_files, tmp_path, monkeypatch):
    scene, cfg, raw = scene_files
    monkeypatch.setenv("LANEWATCH_CONFIG", str(cfg))
    code, out = run_args(scene, cfg.with_name("missing.cfg"), raw, tmp_path)
    assert code == 0
    assert out.read_text()


def test_fisher_ranking(tmp_path, capsys):
    rng = np.random.default_rng(0)
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    # dimension 0 separates strongly, the rest are identical noise
    base = rng.random((50, 8))
    xa = base.copy()
    xb = base.copy()
    xa[:, 0] = rng.normal(0.2, 0.01, 50)
    xb[:, 0] = rng.normal(0.8, 0.01, 50)
    a.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in xa) + "\n")
    b.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in xb) + "\n")
    assert main(["--fisher", str(a), str(b)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("feature")
    assert out[1].startswith("E'")  # strongest separator ranks first
    assert len(out) == 9


def test_fisher_missing_file_is_config_error(tmp_path):
    assert main(["--fisher", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 1
