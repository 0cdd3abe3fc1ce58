import json
import subprocess
import sys

import pytest

from nonholo.cli import dumps, run

from conftest import SCENES, load_scene


def invoke(cmd, scene, out, *extra):
    return run([cmd, "--scene", str(scene), "--out", str(out), *extra])


def report(out):
    return json.loads((out / "report.json").read_text())


def write_scene(tmp_path, data, name="scene.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def test_geometry_flat(tmp_path):
    assert invoke("geometry", SCENES / "flat.json", tmp_path) == 0
    rep = report(tmp_path)
    assert rep["status"] == "pass"
    assert all(r["max"] < 1e-10 for r in rep["residuals"].values())
    for name in rep["artifacts"]:
        assert (tmp_path / name).exists()
    assert set(rep) >= {"command", "inputs_digest", "status", "residuals", "constants", "artifacts", "tolerances"}


def test_geometry_constant_scene(tmp_path):
    assert invoke("geometry", SCENES / "constant.json", tmp_path) == 0
    assert report(tmp_path)["constants"]["R_blocks_spread"] < 1e-9


def test_malformed_json_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "out"
    assert invoke("geometry", bad, out) == 1
    assert not (out / "report.json").exists()
    assert "error" in capsys.readouterr().err


def test_usage_errors_exit_1(tmp_path):
    assert run(["nonsense", "--scene", "x", "--out", str(tmp_path)]) == 1
    assert run(["geometry"]) == 1
    scene = write_scene(tmp_path, {"seed": 1})
    assert invoke("geometry", scene, tmp_path / "o") == 1


def test_unwritable_output_exit_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert invoke("soliton-metric", SCENES / "soliton_metric.json", blocker / "sub") == 1


def test_generate_vacuum(tmp_path):
    assert invoke("generate", SCENES / "vacuum.json", tmp_path, "--vacuum") == 0
    rep = report(tmp_path)
    assert rep["residuals"]["einstein"]["max"] < 1e-7
    head = (tmp_path / "metric.csv").read_text().splitlines()[0]
    assert head.startswith("x1,x2,v,y4")


def test_generate_f_constant_fails(tmp_path):
    sc = load_scene("vacuum.json")
    sc["ansatz"]["f"] = "2"
    assert invoke("generate", write_scene(tmp_path, sc), tmp_path / "o", "--vacuum") == 2
    rep = report(tmp_path / "o")
    assert rep["status"] == "fail" and rep["failure"]["code"] == "f_star_zero"


def test_generate_sourced_reports_convention_constant(tmp_path):
    assert invoke("generate", SCENES / "sourced.json", tmp_path) == 0
    const = report(tmp_path)["constants"]["convention_constant"]
    assert const["h_block"] == pytest.approx(-1.0, abs=1e-6)


def test_flow_k1(tmp_path):
    assert invoke("flow", SCENES / "flow_k1.json", tmp_path) == 0
    rep = report(tmp_path)
    assert rep["residuals"]["H0_drift"]["max"] < 1e-8
    assert rep["constants"]["H2_conserved_variant"] in ("H2_printed", "H2_squared")
    assert (tmp_path / "trajectory.csv").read_bytes().count(b"\r") == 0


def test_flow_k0_advection(tmp_path):
    assert invoke("flow", SCENES / "flow_k0.json", tmp_path) == 0
    assert report(tmp_path)["residuals"]["advection"]["max"] < 1e-6


def test_flow_dt_above_bound(tmp_path):
    sc = load_scene("flow_k1.json")
    sc["flow"]["dt"] = 0.1
    scene = write_scene(tmp_path, sc)
    assert invoke("flow", scene, tmp_path / "o") == 1
    assert not (tmp_path / "o" / "report.json").exists()


def test_flow_blow_up_fails(tmp_path):
    sc = load_scene("flow_k1.json")
    sc["flow"].update(dt=0.5, steps=200, N=64)
    assert invoke("flow", write_scene(tmp_path, sc), tmp_path / "o", "--override-dt") == 2
    assert report(tmp_path / "o")["failure"]["code"] == "blow_up"


def test_soliton_metric(tmp_path):
    assert invoke("soliton-metric", SCENES / "soliton_metric.json", tmp_path) == 0
    res = report(tmp_path)["residuals"]
    assert res["solit1"]["max"] < 1e-6 and res["einstein"]["max"] < 1e-6


def test_soliton_metric_kappa_zero(tmp_path):
    sc = load_scene("soliton_metric.json")
    sc["soliton"]["kappa"] = 0.0
    assert invoke("soliton-metric", write_scene(tmp_path, sc), tmp_path / "o") == 2
    assert report(tmp_path / "o")["failure"]["code"] == "h4_sign_change"


@pytest.mark.parametrize("cmd,scene,extra", [
    ("geometry", "generic.json", ()),
    ("generate", "sourced.json", ()),
    ("flow", "flow_k0.json", ()),
    ("soliton-metric", "soliton_metric.json", ()),
])
def test_reports_are_byte_identical(tmp_path, cmd, scene, extra):
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        invoke(cmd, SCENES / scene, o, *extra)
    for name in ["report.json"] + report(outs[0])["artifacts"]:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_thread_cap_does_not_change_output(tmp_path, monkeypatch):
    monkeypatch.setenv("TOOL_THREADS", "1")
    invoke("geometry", SCENES / "generic.json", tmp_path / "a")
    monkeypatch.setenv("TOOL_THREADS", "3")
    invoke("geometry", SCENES / "generic.json", tmp_path / "b")
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    monkeypatch.setenv("TOOL_THREADS", "zero")
    assert invoke("geometry", SCENES / "generic.json", tmp_path / "c") == 1


def test_dumps_formatting():
    text = dumps({"b": 0.1, "a": float("nan"), "c": [1.0, 2], "d": 1 / 3})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    back = json.loads(text)
    assert back["a"] is None and back["d"] == 1 / 3 and back["c"] == [1.0, 2]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nonholo.cli", "geometry", "--scene", str(SCENES / "flat.json"),
                           "--out", str(tmp_path)], capture_output=True)
    assert proc.returncode == 0
