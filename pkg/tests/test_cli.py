import csv
import json

import numpy as np
import pytest

from mme_lab.cli import build_parser, main
from mme_lab.pipeline import strip_metadata

SMALL = ["--resolution", "1024", "--n", "5000"]


def test_parser_flags():
    a = build_parser().parse_args(["analyze", "--config", "basilica", "--out", "x", "--seed", "3",
                                   "--resolution", "64", "--n", "10"])
    assert (a.config, a.out, a.seed, a.resolution, a.n) == ("basilica", "x", 3, 64, 10)
    a = build_parser().parse_args(["fixtures", "--only", "basilica", "--only", "cubic"])
    assert a.only == ["basilica", "cubic"]


def test_no_command_is_error(capsys):
    assert main([]) == 1


def test_malformed_config_exit_1(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text('name = "x"\n[map]\nnumerator = [[1.0]]\n')
    assert main(["analyze", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "line 3" in capsys.readouterr().err


def test_missing_config_exit_1(tmp_path):
    assert main(["sample", "--config", str(tmp_path / "absent.toml")]) == 1


def test_unknown_fixture_exit_1(tmp_path):
    assert main(["fixtures", "--only", "nope", "--out", str(tmp_path)]) == 1


def test_bad_thread_env_exit_1(tmp_path, monkeypatch):
    monkeypatch.setenv("MME_LAB_THREADS", "zero")
    assert main(["sample", "--config", "circle", "--n", "10", "--out", str(tmp_path)]) == 1
    monkeypatch.setenv("MME_LAB_THREADS", "0")
    assert main(["sample", "--config", "circle", "--n", "10", "--out", str(tmp_path)]) == 1


def test_thread_env_accepted(tmp_path, monkeypatch):
    monkeypatch.setenv("MME_LAB_THREADS", "1")
    assert main(["sample", "--config", "circle", "--n", "10", "--out", str(tmp_path)]) == 0


def test_analyze_outputs_and_determinism(tmp_path, capsys):
    runs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        assert main(["analyze", "--config", "basilica", "--out", str(out), "--seed", "4"] + SMALL) == 0
        runs.append(out)
    a, b = (json.loads((r / "report.json").read_text()) for r in runs)
    assert strip_metadata(a) == strip_metadata(b)
    assert a["summary"]["classification"] == "HYPERBOLIC"
    assert a["samples"]["n"] == 5000 and a["samples"]["rng_seed"] == 4
    assert (runs[0] / "samples.csv").read_bytes() == (runs[1] / "samples.csv").read_bytes()
    assert (runs[0] / "atlas.bin").read_bytes() == (runs[1] / "atlas.bin").read_bytes()
    assert sorted(p.name for p in runs[0].glob("ray_*.csv")) == ["ray_0_1.csv", "ray_1_3.csv", "ray_2_3.csv"]
    assert "HYPERBOLIC" in capsys.readouterr().out


def test_coarse_resolution_rejects_ladder(tmp_path, capsys):
    # the default epsilon ladder needs cells below 0.005
    assert main(["analyze", "--config", "basilica", "--out", str(tmp_path), "--resolution", "256", "--n", "100"]) == 1
    assert "epsilon" in capsys.readouterr().err


def test_trace_ray(tmp_path, capsys):
    p = tmp_path / "r.csv"
    assert main(["trace-ray", "--config", "basilica", "--theta", "1/3", "--out", str(p)]) == 0
    assert "LANDED at -0.618033988" in capsys.readouterr().out
    rows = list(csv.DictReader(p.open()))
    assert len(rows) == 400 and set(rows[0]) == {"r", "re", "im", "log_r"}


def test_trace_ray_needs_polynomial(tmp_path):
    assert main(["trace-ray", "--config", "example2", "--theta", "0", "--out", str(tmp_path)]) == 1


def test_sample_writes_original_coordinates(tmp_path, capsys):
    assert main(["sample", "--config", "parabolic2", "--n", "2000", "--seed", "2", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert sum(l.startswith("invariance ") for l in out.splitlines()) == 3 and "FAIL" not in out
    data = np.loadtxt(tmp_path / "samples.csv", delimiter=",", skiprows=1)
    assert data.shape == (2000, 2)
    # in the original coordinate the Julia set of z + 1/z + 3/2 is unbounded;
    # the chart coordinate would keep every point within the window
    assert np.abs(data[:, 0] + 1j * data[:, 1]).max() > 3


def test_render_byte_stable(tmp_path):
    outs = []
    for i in range(2):
        d = tmp_path / f"r{i}"
        assert main(["render", "--config", "basilica", "--resolution", "64", "--n", "2000", "--out", str(d)]) == 0
        outs.append(d)
    names = sorted(p.name for p in outs[0].glob("*.png"))
    assert names == ["atlas.png", "atlas_density.png", "atlas_rays.png"]
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()


@pytest.mark.parametrize("name", ["cubic"])
def test_fixtures_table(tmp_path, capsys, name):
    code = main(["fixtures", "--only", name, "--out", str(tmp_path)] + SMALL)
    out = capsys.readouterr().out
    assert code in (0, 2)
    assert name in out and "classification" in out
    assert (tmp_path / name / "report.json").exists()
