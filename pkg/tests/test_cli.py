import json

import numpy as np
import pytest

from rtnqubit import cli, pulses



def test_parse_number():
    assert cli.parse_number("7pi/3") == pytest.approx(7 * np.pi / 3)
    assert cli.parse_number("pi") == pytest.approx(np.pi)
    assert cli.parse_number("-2*pi") == pytest.approx(-2 * np.pi)
    assert cli.parse_number("0.125") == 0.125
    with pytest.raises(Exception):
        cli.parse_number("abc")


def test_help_mentions_units(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    assert "hbar/a_max" in capsys.readouterr().out


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["fidelity-sweep", "--ntraj", "many"])
    assert exc.value.code == 2


def test_unknown_pulse_exit_2(tmp_path, capsys):
    assert cli.main(["gate-check", str(tmp_path / "missing.json")]) == 2
    assert "unknown pulse" in capsys.readouterr().err


def test_malformed_pulse_file_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["gate-check", str(bad)]) == 2


def test_unwritable_output_exit_3(tmp_path):
    out = tmp_path / "no" / "such" / "dir" / "s.csv"
    assert cli.main(["fidelity-sweep", "--ntraj", "10", "--tauc", "1", "--out", str(out)]) == 3


@pytest.mark.parametrize("name", ["pi", "corpse", "scorpse"])
def test_gate_check_analytic(name, capsys):
    assert cli.main(["gate-check", name, "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["not_distance"] <= 1e-12
    assert report["bound"] == "ok"


def test_gate_check_zero_pulse(tmp_path, capsys):
    path = tmp_path / "zero.json"
    pulses.save_pulse(pulses.ControlGrid(np.zeros(5), 0.2), path)
    assert cli.main(["gate-check", str(path), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["not_distance"] == pytest.approx(1.0, abs=1e-15)


def test_gate_check_clipped_random_pulse(tmp_path, capsys, rng):
    path = tmp_path / "random.json"
    amps = np.clip(rng.normal(0, 2, 30), -1, 1)
    pulses.save_pulse(pulses.ControlGrid(amps, 0.1), path)
    assert cli.main(["gate-check", str(path)]) == 0
    out = capsys.readouterr().out
    assert "bound compliance: ok" in out
    assert "distance to NOT" in out


def test_fidelity_sweep_and_replay(tmp_path):
    out = tmp_path / "sweep.csv"
    argv = ["fidelity-sweep", "--pulse", "pi,corpse", "--tauc", "1,10", "--delta", "0.125", "--ntraj", "200",
            "--seed", "7", "--out", str(out)]
    assert cli.main(argv) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "pulse_name,tau_c,delta,kind,fidelity,stderr,n_traj,seed"
    assert len(lines) == 5
    manifest = tmp_path / "sweep.csv.manifest.json"
    data = json.loads(manifest.read_text())
    assert data["subcommand"] == "fidelity-sweep" and data["seed"] == 7
    first = out.read_bytes()
    out.unlink()
    assert cli.main(["replay", str(manifest)]) == 0
    assert out.read_bytes() == first


def test_sweep_zero_noise_is_perfect(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["fidelity-sweep", "--delta", "0", "--tauc", "1", "--ntraj", "20", "--out", str(out)]) == 0
    for line in out.read_text().splitlines()[1:]:
        assert float(line.split(",")[4]) == pytest.approx(1.0, abs=1e-12)


def test_sweep_gate_kind(tmp_path):
    out = tmp_path / "g.csv"
    assert cli.main(["fidelity-sweep", "--kind", "notgate", "--tauc", "3", "--ntraj", "50", "--out", str(out)]) == 0
    assert all(",gate," in line for line in out.read_text().splitlines()[1:])


def test_trajectory_sample(tmp_path, capsys):
    assert cli.main(["trajectory-sample", "--n", "3", "--horizon", "5", "--tauc", "1", "--seed", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "index,initial_sign,jump_times"
    assert len(lines) == 4
    out = tmp_path / "t.csv"
    assert cli.main(["trajectory-sample", "--n", "3", "--horizon", "5", "--tauc", "1", "--seed", "2",
                     "--out", str(out)]) == 0
    assert out.read_text().splitlines() == lines
    first = out.read_bytes()
    assert cli.main(["replay", str(tmp_path / "t.csv.manifest.json")]) == 0
    assert out.read_bytes() == first


def test_optimize_and_replay(tmp_path, capsys):
    out = tmp_path / "opt"
    argv = ["optimize", "--delta", "0", "--T", "pi", "--dt", "pi/10", "--batch", "4", "--out-dir", str(out)]
    assert cli.main(argv) == 0
    assert "fidelity=" in capsys.readouterr().out
    for name in ("pulse.json", "history.csv", "summary.csv", "manifest.json"):
        assert (out / name).exists()
    grid = pulses.load_pulse(out / "pulse.json")
    np.testing.assert_allclose(grid.amplitudes, 1.0, atol=1e-6)
    snapshot = {name: (out / name).read_bytes() for name in ("pulse.json", "history.csv", "summary.csv")}
    assert cli.main(["replay", str(out / "manifest.json")]) == 0
    for name, data in snapshot.items():
        assert (out / name).read_bytes() == data


def test_optimize_time_grid(tmp_path):
    out = tmp_path / "opt"
    argv = ["optimize", "--delta", "0.125", "--tauc", "5", "--T-grid", "pi,2pi", "--dt", "pi/6", "--batch", "20",
            "--max-iter", "20", "--out-dir", str(out)]
    assert cli.main(argv) == 0
    rows = (out / "summary.csv").read_text().splitlines()
    assert rows[0] == "T,fidelity,stderr,batch_fidelity,converged,status"
    assert len(rows) == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert "warning" in manifest["parameters"]


def test_optimize_requires_time(tmp_path):
    assert cli.main(["optimize", "--out-dir", str(tmp_path)]) == 2


def test_threads_flag_does_not_change_results(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["fidelity-sweep", "--tauc", "2", "--ntraj", "100", "--seed", "3"]
    assert cli.main(["--threads", "1"] + base + ["--out", str(a)]) == 0
    assert cli.main(["--threads", "4"] + base + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
