import json
from pathlib import Path

import numpy as np
import pytest

from sparsemimo.cli import main
from sparsemimo.errors import ParseError, ValidationError
from sparsemimo.io import read_image, read_topology
from sparsemimo.scenario import load_scenario, parse_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

SMALL = """
name = "small"

[frequency]
f_start = 30e9
f_stop = 32e9
n_steps = 5

[topology]
generator = "uniform-linear"
n_tx = 2
tx_pitch = 0.2
n_rx = 10
rx_pitch = 0.02

[region]
R0 = 1.0
D_x = 0.2

[synthesis.rx]
top_n = 6

[baselines.equally_spaced]
rx = { shape = [6], pitch = 0.036 }

[baselines.random]
seed = 7

[imaging]
display_pitch = 0.005
"""


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL, "utf-8")
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# -- scenario loading -------------------------------------------------------------

def test_linear_scenario_file():
    scn = load_scenario(SCENARIOS / "linear_1d.toml")
    assert scn.full.n_rx == 26 and scn.full.n_tx == 2
    np.testing.assert_allclose(np.diff(scn.full.rx_positions[:, 0]), 0.02)
    assert scn.full.tx_positions[1, 0] - scn.full.tx_positions[0, 0] == pytest.approx(0.52)
    assert scn.R0 == 1.0 and scn.freqs.n_steps == 101


def test_defaults_filled():
    scn = parse_scenario(SMALL)
    assert scn.apodization == "uniform"
    assert scn.dynamic_range == 15.0
    assert scn.configs["rx"].relative_epsilon == 1e-2
    assert [s.name for s in scn.scenes] == ["center", "edge"]
    assert scn.scenes[1].scene.positions[0, 0] == pytest.approx(0.09)


def test_empty_file_lists_required_fields():
    with pytest.raises(ValidationError) as exc:
        parse_scenario("")
    for key in ("frequency.f_start", "topology.generator", "region.R0"):
        assert key in str(exc.value)


def test_reversed_frequencies_rejected():
    text = SMALL.replace("f_stop = 32e9", "f_stop = 29e9")
    with pytest.raises(ValidationError) as exc:
        parse_scenario(text)
    assert exc.value.path.startswith("frequency")


@pytest.mark.parametrize("old,new,path", [
    ("n_rx = 10", "n_rx = 10\nn_rxx = 3", "topology"),
    ("top_n = 6", "top_n = 6\nbogus = 1", "synthesis.rx.bogus"),
    ("top_n = 6", "top_n = 60", "synthesis.rx.top_n"),
    ('generator = "uniform-linear"', 'generator = "spiral"', "topology.generator"),
    ("seed = 7", "seed = -1", "baselines.random.seed"),
    ("D_x = 0.2", "D_x = -0.2", "region.D_x"),
])
def test_validation_paths(old, new, path):
    with pytest.raises(ValidationError) as exc:
        parse_scenario(SMALL.replace(old, new))
    assert exc.value.path.startswith(path)


def test_syntax_error_has_line():
    with pytest.raises(ParseError) as exc:
        parse_scenario(SMALL.replace("n_steps = 5", "n_steps = = 5"))
    assert exc.value.line == 7


def test_topology_from_file(tmp_path):
    (tmp_path / "arr.csv").write_text(
        "role,x_m,y_m,z_m,weight_re,weight_im\ntx,0,0,0,1,0\nrx,0.01,0,0,1,0\n"
        "rx,0.03,0,0,1,0\n", "utf-8")
    text = SMALL.split("[topology]")[0] + (
        '[topology]\ngenerator = "file"\npath = "arr.csv"\n'
        "[region]\nR0 = 1.0\nD_x = 0.2\n[synthesis.rx]\ntop_n = 1\n")
    (tmp_path / "f.toml").write_text(text, "utf-8")
    scn = load_scenario(tmp_path / "f.toml")
    assert scn.full.n_rx == 2
    (tmp_path / "arr.csv").unlink()
    with pytest.raises(ValidationError, match="topology.path"):
        load_scenario(tmp_path / "f.toml")


# -- command line --------------------------------------------------------------------

def test_synthesize_command(small, tmp_path, capsys):
    code, out, _ = run(capsys, small, "synthesize", "--out", tmp_path / "o")
    assert code == 0
    summary = json.loads(out)
    assert summary["elements"]["n_rx"] == 6
    assert all(h["feasible"] for h in summary["half_rounds"])
    assert read_topology(tmp_path / "o" / "synthesized_topology.csv").n_rx == 6


def test_compare_is_deterministic(small, tmp_path, capsys):
    for name in ("a", "b"):
        assert run(capsys, small, "compare", "--out", tmp_path / name)[0] == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name
    rand = read_topology(tmp_path / "a" / "random_topology.csv")
    assert rand.n_rx == 6
    report = json.loads((tmp_path / "a" / "compare.json").read_text())
    assert set(report["elements"]) == {"synthesized", "equally_spaced", "random", "full"}
    assert report["metrics"]["reports"]["full"]["center"]["psnr_db"] == 99.0


def test_seed_override_changes_random_baseline(small, tmp_path, capsys):
    run(capsys, small, "compare", "--out", tmp_path / "a")
    run(capsys, small, "compare", "--out", tmp_path / "b", "--seed", "0x1234567890abcdef")
    a = (tmp_path / "a" / "random_topology.csv").read_bytes()
    b = (tmp_path / "b" / "random_topology.csv").read_bytes()
    assert a != b


def test_image_and_metrics_commands(small, tmp_path, capsys):
    assert run(capsys, small, "image", "--out", tmp_path)[0] == 0
    img = read_image(tmp_path / "images" / "synthesized_center.nfim")
    assert img.grid.rect.n_x == 41
    code, out, _ = run(capsys, small, "metrics", "--out", tmp_path, "--dynamic-range", "30")
    assert code == 0
    assert json.loads(out)["dynamic_range_db"] == 30.0


def test_psf_reports_center_and_edge(tmp_path, capsys):
    code, out, _ = run(capsys, SCENARIOS / "linear_1d.toml", "psf", "--out", tmp_path)
    assert code == 0
    reports = json.loads(out)
    assert set(reports) == {"synthesized", "equally_spaced", "random", "full"}
    for per in reports.values():
        assert set(per) == {"center", "edge"}
    assert (tmp_path / "psf.csv").read_text().count("\n") == 9


def test_errors_are_machine_readable(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("", "utf-8")
    code, _, err = run(capsys, bad, "synthesize")
    assert code == 2
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["error"] == "ValidationError"
    code, _, err = run(capsys, tmp_path / "missing.toml", "synthesize")
    assert code == 2 and json.loads(err)["error"] == "OSError"


def test_thread_env_is_validated(small, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SPARSEMIMO_THREADS", "zero")
    code, _, err = run(capsys, small, "synthesize", "--out", tmp_path)
    assert code == 2 and "SPARSEMIMO_THREADS" in err
    monkeypatch.setenv("SPARSEMIMO_THREADS", "1")
    assert run(capsys, small, "synthesize", "--out", tmp_path)[0] == 0


def test_compare_needs_seed(small, tmp_path, capsys):
    small.write_text(SMALL.replace("[baselines.random]\nseed = 7\n", ""), "utf-8")
    code, _, err = run(capsys, small, "compare", "--out", tmp_path)
    assert code == 2 and "seed" in err


@pytest.mark.slow
def test_planar_scenario_selects_120(tmp_path, capsys):
    code, out, _ = run(capsys, SCENARIOS / "planar_2d.toml", "synthesize", "--out", tmp_path)
    assert code == 0
    assert json.loads(out)["elements"]["n_rx"] == 120
