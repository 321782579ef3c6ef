"""Command-line interface: file formats, manifests, determinism, exit codes."""

import json
from pathlib import Path

import numpy as np
import pytest

from grovertn import analytic, cli

FIXTURE = Path(__file__).parent / "fixtures" / "synthetic_phase_flip.csv"


def read_rows(path: Path):
    header = None
    rows = []
    comments = []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            comments.append(line)
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    return comments, header, rows


def test_ideal_command(tmp_path):
    code = cli.main(["ideal", "--n", "4", "--out", str(tmp_path)])
    assert code == 0
    csv_path = tmp_path / "ideal_n4.csv"
    comments, header, rows = read_rows(csv_path)
    assert comments[0] == "# schema: grovertn/ideal-v1"
    assert comments[1].startswith("# manifest: ideal_n4.manifest.json")
    assert header == ["k", "P_omega", "S_vN_bits"]
    assert len(rows) == analytic.optimal_iterations(4) + 1
    for row in rows:
        k = int(row[0])
        assert float(row[1]) == pytest.approx(analytic.ideal_success_probability(4, k), abs=1e-10)
        assert float(row[2]) <= 1.0 + 1e-12
    manifest = json.loads((tmp_path / "ideal_n4.manifest.json").read_text())
    assert manifest["command"] == "ideal"
    assert manifest["outputs"] == ["ideal_n4.csv"]


def test_ideal_rejects_odd_n(tmp_path):
    assert cli.main(["ideal", "--n", "5", "--out", str(tmp_path)]) == cli.EXIT_VALIDATION


def test_two_qubit_peak(tmp_path):
    assert cli.main(["ideal", "--n", "2", "--out", str(tmp_path)]) == 0
    _, _, rows = read_rows(tmp_path / "ideal_n2.csv")
    assert float(rows[1][1]) == pytest.approx(1.0, abs=1e-12)


def test_trajectories_command_and_determinism(tmp_path):
    args = [
        "trajectories", "--n", "4", "--channel", "pf", "--p", "0.05", "--strategy", "naive",
        "--iters", "3", "--traj", "16", "--seed", "3", "--out", str(tmp_path),
    ]
    assert cli.main(args) == 0
    name = "trajectories_pf_p0.05_naive.csv"
    first = (tmp_path / name).read_bytes()
    comments, header, rows = read_rows(tmp_path / name)
    assert comments[0] == "# schema: grovertn/trajectories-v1"
    assert header[:8] == ["k", "S_T", "p5", "p25", "p50", "p75", "p95", "min"]
    assert len(rows) == 4

    # rerun with a different worker count: byte-identical output
    assert cli.main(args[:-2] + ["--out", str(tmp_path / "again"), "--workers", "2"]) == 0
    second = (tmp_path / "again" / name).read_bytes()
    assert first == second


def test_trajectories_entropy_matrix_output(tmp_path):
    args = [
        "trajectories", "--n", "4", "--channel", "ad", "--p", "0.1", "--strategy", "naive",
        "--iters", "2", "--traj", "5", "--seed", "1", "--save-trajectories", "--out", str(tmp_path),
    ]
    assert cli.main(args) == 0
    comments, header, rows = read_rows(tmp_path / "trajectories_ad_p0.1_naive_entropies.csv")
    assert comments[0] == "# schema: grovertn/trajectory-entropies-v1"
    assert header == ["trajectory", "k0", "k1", "k2"]
    assert len(rows) == 5
    assert [row[0] for row in rows] == ["0", "1", "2", "3", "4"]


def test_mpdo_command(tmp_path):
    args = [
        "mpdo", "--n", "4", "--channel", "ad", "--p", "0.05", "--chi", "32",
        "--out", str(tmp_path),
    ]
    assert cli.main(args) == 0
    comments, header, rows = read_rows(tmp_path / "mpdo_ad_n4_p0.05.csv")
    assert comments[0] == "# schema: grovertn/mpdo-v1"
    assert header == ["k", "P_omega", "OE_bits", "trace_drift", "discarded_weight"]
    assert len(rows) == analytic.optimal_iterations(4) + 1
    assert all(0.0 <= float(r[1]) <= 1.0 for r in rows)


def test_sweep_and_fit_commands(tmp_path):
    sweep_args = [
        "sweep", "--channel", "pf", "--n-list", "4,6", "--p-grid", "0.02,0.1,0.4",
        "--engine", "dense", "--out", str(tmp_path),
    ]
    assert cli.main(sweep_args) == 0
    comments, header, rows = read_rows(tmp_path / "sweep_pf.csv")
    assert comments[0] == "# schema: grovertn/sweep-v1"
    assert header == ["n", "p", "P_f", "excess", "chi_flag"]
    assert len(rows) == 6
    assert all(row[4] == "0" for row in rows)

    # byte-identical rerun
    assert cli.main(sweep_args[:-1] + [str(tmp_path / "again")]) == 0
    assert (tmp_path / "sweep_pf.csv").read_bytes() == (tmp_path / "again" / "sweep_pf.csv").read_bytes()


def test_fit_on_shipped_fixture(tmp_path):
    args = [
        "fit", "--dataset", str(FIXTURE), "--model", "pf", "--out", str(tmp_path),
    ]
    assert cli.main(args) == 0
    payload = json.loads((tmp_path / "fit_pf.json").read_text())
    assert payload["rate_exponent"] == pytest.approx(1.735, abs=1e-9)
    assert payload["qubit_exponent"] == pytest.approx(0.7844, abs=1e-9)
    assert "window_sensitivity" in payload
    assert payload["n_points"] >= 8


def test_fit_error_exit_code(tmp_path):
    bad = tmp_path / "tiny.csv"
    bad.write_text("# schema: grovertn/sweep-v1\n# manifest: none\nn,p,P_f,excess,chi_flag\n8,0.1,0.5,0.496,0\n")
    code = cli.main(["fit", "--dataset", str(bad), "--model", "pf", "--out", str(tmp_path)])
    assert code == cli.EXIT_TOLERANCE


def test_crosscheck_command(tmp_path, capsys):
    code = cli.main([
        "crosscheck", "--n", "4", "--channel", "pf", "--p", "0.02", "--traj", "64",
        "--chi", "32", "--seed", "5", "--out", str(tmp_path),
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "dense vs mpdo" in out
    assert "standard errors" in out


def test_crosscheck_resource_guard(tmp_path):
    code = cli.main(["crosscheck", "--n", "12", "--out", str(tmp_path)])
    assert code == cli.EXIT_RESOURCE


def test_validation_exit_code(tmp_path):
    assert cli.main(["mpdo", "--n", "4", "--omega", "10", "--out", str(tmp_path)]) == cli.EXIT_VALIDATION


def test_config_file_round_trip(tmp_path):
    config = tmp_path / "run.conf"
    config.write_text("n=4\nchannel=pf\np=0.05\niters=3\ntraj=8\nstrategy=naive\nseed=9\n")
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert cli.main(["trajectories", "--config", str(config), "--out", str(out_a)]) == 0
    # explicit flag overrides the config value
    assert cli.main([
        "trajectories", "--config", str(config), "--traj", "8", "--out", str(out_b),
    ]) == 0
    name = "trajectories_pf_p0.05_naive.csv"
    assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_config_file_rejects_garbage(tmp_path):
    config = tmp_path / "bad.conf"
    config.write_text("this is not a key value line\n")
    assert cli.main(["trajectories", "--config", str(config)]) == cli.EXIT_VALIDATION
