import json
import subprocess
import sys

import numpy as np
import pytest

from colosynth.cli import main
from colosynth.volume_io import load_mask, load_polyline, read_png


def _write_config(make_config, tmp_path, **kw):
    p = tmp_path / "config.json"
    p.write_text(json.dumps(make_config(**kw).to_dict()))
    return p


def test_phantom_centerline_unwrap(tmp_path, capsys):
    mask = tmp_path / "cyl.mhdr"
    assert main(["phantom", "cylinder", "4", "20", "-o", str(mask)]) == 0
    assert load_mask(mask).foreground_count > 0
    cl = tmp_path / "cl.csv"
    assert main(["centerline", "--mask", str(mask), "--auto", "--spacing", "3", "-o", str(cl)]) == 0
    pts, s = load_polyline(cl)
    assert len(pts) > 10 and np.all(np.diff(s) > 0)
    assert (tmp_path / "cl_waypoints.csv").is_file()
    obj = tmp_path / "m.obj"
    assert main(["unwrap", "--mask", str(mask), "--centerline", str(cl), "-o", str(obj)]) == 0
    assert "watertight=True" in capsys.readouterr().out
    assert obj.read_text().count("\nvt ") > 0


def test_texture_command(tmp_path):
    out = tmp_path / "t.png"
    assert main(["texture", "--mode", "checker", "--seed", "4", "-o", str(out)]) == 0
    assert read_png(out).shape == (512, 512, 3)
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"resolution": [64, 128]}))
    assert main(["texture", "--spec", str(spec), "-o", str(out)]) == 0
    assert read_png(out).shape == (128, 64, 3)


def test_run_and_render_pose(make_config, tmp_path):
    cfg = _write_config(make_config, tmp_path, max_frames=3)
    out = tmp_path / "run"
    assert main(["run", str(cfg), "-o", str(out), "--threads", "2"]) == 0
    assert len(list((out / "traversal_0").glob("*.png"))) == 3
    assert main(["render-pose", "--config", str(cfg), "--pose-index", "1", "--variants", "2", "-o", str(out)]) == 0
    assert (out / "same_pose_000001" / "contact_sheet.png").is_file()


def test_exit_codes(make_config, tmp_path, capsys):
    cfg = _write_config(make_config, tmp_path, endpoints=((0, 0, 0), (7, 7, 20)))
    assert main(["run", str(cfg)]) == 4
    assert "centerline: EndpointInBackground" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 3
    good = _write_config(make_config, tmp_path)
    assert main(["render-pose", "--config", str(good), "--pose-index", "0", "--variants", "1"]) == 3
    assert main(["centerline", "--mask", str(tmp_path / "none.mhdr"), "--auto"]) == 2


def test_argparse_rejects_bad_triple(tmp_path):
    with pytest.raises(SystemExit):
        main(["centerline", "--mask", "x", "--start", "1,2"])


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "colosynth", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "render-pose" in r.stdout
