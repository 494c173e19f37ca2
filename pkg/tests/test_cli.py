import json
import subprocess
import sys

import numpy as np
import pytest

from specflow import cli, custom, io
from specflow.functionals import to_descriptor
from specflow.flow import FlowAbort
from specflow.gallery import FIXTURES, gallery


def _fixture(tmp_path, name):
    assert cli.main(["gallery", name, "--out", str(tmp_path)]) == 0
    return str(tmp_path / "functional.json"), str(tmp_path / f"{name}.csv")


def test_gallery_examples(tmp_path):
    assert np.array_equal(gallery("tv-step4")[1], [1, 1, -1, -1])
    assert np.array_equal(gallery("l1-spike")[1], [2, -1, 0])
    with pytest.raises(KeyError, match="available"):
        gallery("nope")
    assert cli.main(["gallery", "nope", "--out", str(tmp_path)]) == cli.EXIT_USAGE
    for name in FIXTURES:
        fj, csv = _fixture(tmp_path / name, name)
        F = io.read_functional_json(fj)
        assert io.read_signal_csv(csv).n == F.n
        assert np.array_equal(io.read_signal_csv(csv).values, gallery(name)[1])


def test_decompose_outputs_validate(tmp_path):
    fj, csv = _fixture(tmp_path, "l1-spike")
    out = tmp_path / "run"
    assert cli.main(["decompose", "--functional", fj, "--input", csv, "--out", str(out)]) == 0
    traj = json.loads((out / "trajectory.json").read_text())
    spec = json.loads((out / "spectrum.json").read_text())
    io.validate(traj, "trajectory")
    io.validate(spec, "spectrum")
    assert np.allclose(traj["breakpoints"], [0, 1, 2])
    assert np.allclose([a["lambda"] for a in spec["atoms"]], [np.sqrt(2), 1])
    tr = io.trajectory_from_dict(traj)
    assert np.allclose(tr.slopes, [[1, -1, 0], [1, 0, 0]])
    m = io.spectrum_from_dict(spec)
    assert np.allclose(m.f_bar + m.masses.sum(axis=0), [2, -1, 0])
    assert (out / "spectrum.csv").read_text().splitlines()[0] == "lambda,mass_norm"


def test_determinism(tmp_path):
    fj, csv = _fixture(tmp_path, "random-minsub")
    blobs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert cli.main(["decompose", "--functional", fj, "--input", csv, "--out", str(out)]) == 0
        assert cli.main(["extinction", "--functional", fj, "--input", csv, "--out", str(out)]) == 0
        blobs.append([(out / n).read_bytes() for n in ("trajectory.json", "spectrum.json", "extinction.json")])
    assert blobs[0] == blobs[1]


def test_floats_round_trip():
    x = [0.1, 1 / 3, 2.0 ** -40, 12345.678901234567]
    assert json.loads(io.dumps(x)) == x


@pytest.mark.parametrize("name", ["tv-step4", "linf-pair", "two-scale-step", "random-minsub"])
def test_verify_passes_on_minsub_fixtures(tmp_path, name):
    fj, csv = _fixture(tmp_path, name)
    assert cli.main(["verify", "--functional", fj, "--input", csv, "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "verify.json").read_text())
    io.validate(rep, "verify")
    assert rep["passed"] and all(c["passed"] for c in rep["checks"] if c["asserted"])


def test_verify_reports_but_does_not_assert_off_hypothesis(tmp_path):
    fj = tmp_path / "F.json"
    fj.write_text(json.dumps(to_descriptor(custom([[1.0, 2.0], [0.0, 1.0]]))))
    csv = tmp_path / "f.csv"
    io.write_signal_csv(csv, [1.0, 0.0])
    assert cli.main(["verify", "--functional", str(fj), "--input", str(csv), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "verify.json").read_text())
    eig = next(c for c in rep["checks"] if c["name"] == "segment_eigenvectors")
    assert not eig["asserted"] and not eig["passed"]


def test_verify_failure_exit_code(tmp_path):
    fj, csv = _fixture(tmp_path, "two-scale-step")
    code = cli.main(["verify", "--functional", fj, "--input", csv, "--out", str(tmp_path), "--tol", "1e-300"])
    assert code == cli.EXIT_VERIFY


def test_numeric_abort_exit_code(tmp_path, monkeypatch):
    fj, csv = _fixture(tmp_path, "tv-step4")

    def boom(F, f, opts=None):
        from specflow.flow import Trajectory

        partial = Trajectory(F, np.zeros(1), np.asarray(f)[None, :], np.zeros((0, F.n)), [], False,
                             np.zeros(F.n), [], "max_events")
        raise FlowAbort("event cap 0 exceeded", partial)

    monkeypatch.setattr(cli, "run_event_driven", boom)
    assert cli.main(["decompose", "--functional", fj, "--input", csv, "--out", str(tmp_path)]) == cli.EXIT_NUMERIC
    io.validate(json.loads((tmp_path / "trajectory.json").read_text()), "trajectory")


def test_usage_errors(tmp_path, capsys):
    fj, csv = _fixture(tmp_path, "tv-step4")
    assert cli.main(["decompose", "--input", csv]) == cli.EXIT_USAGE
    assert cli.main(["decompose", "--functional", fj]) == cli.EXIT_USAGE
    assert cli.main(["filter", "--functional", fj, "--input", csv, "--out", str(tmp_path)]) == cli.EXIT_USAGE
    assert cli.main(["decompose", "--functional", fj, "--input", csv, "--tol", "-1"]) == cli.EXIT_USAGE
    assert cli.main(["decompose", "--functional", fj, "--input", str(tmp_path / "missing.csv")]) == cli.EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"type": "tv1d"}))
    assert cli.main(["decompose", "--functional", str(bad), "--input", csv]) == cli.EXIT_USAGE
    short = tmp_path / "short.csv"
    io.write_signal_csv(short, [1.0, 2.0])
    assert cli.main(["decompose", "--functional", fj, "--input", str(short)]) == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        cli.main(["explode"])
    assert exc.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        cli.main(["filter", "--band", "1"])
    assert exc.value.code == cli.EXIT_USAGE


def test_filter_band(tmp_path):
    fj, csv = _fixture(tmp_path, "l1-spike")
    assert cli.main(["filter", "--functional", fj, "--input", csv, "--out", str(tmp_path), "--band", "1.2,inf"]) == 0
    assert np.allclose(io.read_signal_csv(tmp_path / "filtered.csv").values, [1, -1, 0])


def test_batch_with_workers(tmp_path):
    fj, _ = _fixture(tmp_path, "two-scale-step")
    rng = np.random.default_rng(0)
    paths = []
    for k in range(4):
        p = tmp_path / f"datum{k}.csv"
        io.write_signal_csv(p, rng.standard_normal(8))
        paths.append(str(p))
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"
    assert cli.main(["decompose", "--functional", fj, "--input", *paths, "--out", str(serial)]) == 0
    assert cli.main(["decompose", "--functional", fj, "--input", *paths, "--out", str(parallel), "--workers", "2"]) == 0
    for k in range(4):
        a = (serial / f"datum{k}" / "spectrum.json").read_bytes()
        assert a == (parallel / f"datum{k}" / "spectrum.json").read_bytes()


def test_extinction_prints_bound_chain(tmp_path, capsys):
    fj, csv = _fixture(tmp_path, "linf-pair")
    capsys.readouterr()
    assert cli.main(["extinction", "--functional", fj, "--input", csv, "--out", str(tmp_path)]) == 0
    line = capsys.readouterr().out
    assert "T* = 4" in line and "|f|_* = 4" in line
    rep = json.loads((tmp_path / "extinction.json").read_text())
    io.validate(rep, "extinction")
    assert rep["profile"] == [0.5, 0.5]


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "specflow.cli", "gallery", "tv-step4", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and (tmp_path / "tv-step4.csv").exists()
