"""End-to-end CLI tests: every subcommand is driven through cli.main(argv)
with a small grid config and a tmp output directory."""

import json
import math

import numpy as np
import pytest

from radmonge.cli import main

SMALL = {"n_r": 301, "n_theta": 65, "n_lam": 301}


@pytest.fixture()
def cfg_path(tmp_path):
    p = tmp_path / "config.json"
    p.write_text(json.dumps(SMALL))
    return str(p)


def run(args, cfg_path, out):
    return main(args + ["--config", cfg_path, "--out", str(out)])


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


class TestBasics:
    def test_validate(self, cfg_path, tmp_path, capsys):
        assert run(["validate"], cfg_path, tmp_path / "o") == 0
        assert "compatibility defect" in capsys.readouterr().out
        assert (tmp_path / "o" / "manifest_validate.json").exists()

    def test_w1_prints_value(self, cfg_path, tmp_path, capsys):
        assert run(["w1"], cfg_path, tmp_path / "o") == 0
        value = float(capsys.readouterr().out.strip())
        assert abs(value - 1.375) < 1e-4

    def test_bad_config_exits_1(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"eps_list": [0.1, 2.0]}))
        assert main(["w1", "--config", str(bad),
                     "--out", str(tmp_path / "o")]) == 1

    def test_obstacle(self, cfg_path, tmp_path, capsys):
        out = tmp_path / "o"
        assert run(["obstacle"], cfg_path, out) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("K = ")
        assert abs(float(lines[0].split("=")[1]) - 9 * math.pi / 8) < 1e-3
        record = json.loads(lines[1])
        assert record["n_theta"] == 65
        header, data = read_csv(out / "obstacle.csv")
        assert header == ["theta", "R1", "Phi"]
        assert data.shape == (65, 3)

    def test_counterexample(self, cfg_path, tmp_path):
        out = tmp_path / "o"
        assert run(["counterexample", "--alpha", "10", "--n", "4000"],
                   cfg_path, out) == 0
        header, data = read_csv(out / "counterexample.csv")
        assert header == ["alpha", "cost_U", "cost_T_alpha", "margin"]
        assert abs(data[0, 1] - 4.0) < 1e-9
        assert data[0, 3] > 0


class TestMapsAndEnergy:
    def test_roundtrip(self, cfg_path, tmp_path):
        out = tmp_path / "o"
        assert run(["build-maps", "--kind", "original"], cfg_path, out) == 0
        header, bp = read_csv(out / "breakpoints_original.csv")
        assert header == ["theta", "rho1", "rho2"]
        assert np.max(np.abs(bp[:, 1] - 1 / math.sqrt(2))) < 1e-3
        assert run(["energy", "--map", str(out / "maps_original.csv"),
                    "--eps", "0.1", "0.01"], cfg_path, out) == 0
        header, data = read_csv(out / "energy.csv")
        assert header == ["eps", "J", "F_direct", "term1", "term2", "term3",
                          "term4"]
        # F identity: direct equals the four-term sum
        total = data[:, 3:].sum(axis=1)
        assert np.max(np.abs(data[:, 2] - total)
                      / (1 + np.abs(data[:, 2]))) < 1e-10

    def test_monotone_breakpoints_nan(self, cfg_path, tmp_path):
        out = tmp_path / "o"
        assert run(["build-maps", "--kind", "monotone"], cfg_path, out) == 0
        _, bp = read_csv(out / "breakpoints_monotone.csv")
        assert np.all(np.isnan(bp[:, 1]))

    def test_energy_missing_map_exits_1(self, cfg_path, tmp_path):
        assert run(["energy", "--map", str(tmp_path / "nope.csv"),
                    "--eps", "0.1"], cfg_path, tmp_path / "o") == 1


class TestRecoverySweep:
    def test_sweep(self, cfg_path, tmp_path):
        out = tmp_path / "o"
        assert run(["recovery-sweep", "--eps-list", "0.01", "0.001",
                    "--patch-m", "64"], cfg_path, out) == 0
        header, data = read_csv(out / "recovery_sweep.csv")
        assert header[:4] == ["eps", "delta", "J", "F"]
        assert data.shape == (2, 11)
        assert np.all(np.isfinite(data))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli_pipeline")
    cfg = tmp / "config.json"
    cfg.write_text(json.dumps(SMALL))
    out = tmp / "o"
    eps = [f"{e:g}" for e in np.geomspace(1e-3, 1e-1, 4)]
    rc = main(["minimize", "--N", "500", "--eps-list", *eps,
               "--patch-m", "64", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    return cfg, out


class TestMinimizeFitReport:
    def test_minimize_csv(self, pipeline):
        _, out = pipeline
        header, data = read_csv(out / "minimize.csv")
        assert header == ["eps", "J_discrete", "monge_part",
                          "dirichlet_part", "accept_rate"]
        assert data.shape == (4, 5)
        assert np.all(data[:, 1] >= data[:, 2])  # J >= Monge part

    def test_minimize_deterministic(self, pipeline, tmp_path):
        cfg, out = pipeline
        first = (out / "minimize.csv").read_bytes()
        out2 = tmp_path / "o2"
        eps = [f"{e:g}" for e in np.geomspace(1e-3, 1e-1, 4)]
        assert main(["minimize", "--N", "500", "--eps-list", *eps,
                     "--patch-m", "64", "--threads", "4",
                     "--config", str(cfg), "--out", str(out2)]) == 0
        assert (out2 / "minimize.csv").read_bytes() == first

    def test_fit(self, pipeline, capsys):
        cfg, out = pipeline
        assert main(["fit", "--config", str(cfg), "--out", str(out)]) == 0
        assert "c1 =" in capsys.readouterr().out
        header, data = read_csv(out / "fit.csv")
        assert header == ["c0", "c1", "c2", "se1", "se2"]
        assert abs(data[0, 0] - 1.375) < 1e-3  # c0 fixed to the duality W1

    def test_fit_missing_input_exits_1(self, cfg_path, tmp_path):
        assert run(["fit"], cfg_path, tmp_path / "empty") == 1


class TestReport:
    def hand_written(self, tmp_path, c1):
        out = tmp_path / "o"
        out.mkdir()
        eps = np.geomspace(1e-3, 1e-1, 6)
        J = 1.375 + c1 * eps * np.abs(np.log(eps))
        lines = ["eps,J_discrete,monge_part,dirichlet_part,accept_rate"]
        lines += [f"{e:g},{j:.12g},0,0,0" for e, j in zip(eps, J)]
        (out / "minimize.csv").write_text("\n".join(lines) + "\n")
        (out / "fit.csv").write_text(
            "c0,c1,c2,se1,se2\n" + f"1.375,{c1},0,0,0\n")
        return out

    def test_report_from_csvs_only(self, cfg_path, tmp_path):
        out = self.hand_written(tmp_path, 1.17)
        mtimes = {p.name: p.stat().st_mtime_ns for p in out.glob("*.csv")}
        assert run(["report"], cfg_path, out) == 0
        # report never recomputes or rewrites the physics CSVs
        assert {p.name: p.stat().st_mtime_ns
                for p in out.glob("*.csv")} == mtimes
        gp = (out / "report.gp").read_text()
        assert "f(x) = c0 + c1*x*abs(log(x)) + c2*x" in gp
        assert (out / "report.png").stat().st_size > 1000

    def test_check_pass(self, cfg_path, tmp_path, capsys):
        out = self.hand_written(tmp_path, 3 * math.pi / 8)
        assert run(["report", "--check"], cfg_path, out) == 0
        assert "relative error" in capsys.readouterr().out

    def test_check_fail_exits_3(self, cfg_path, tmp_path):
        out = self.hand_written(tmp_path, 0.3)
        assert run(["report", "--check"], cfg_path, out) == 3

    def test_report_without_inputs_exits_1(self, cfg_path, tmp_path):
        assert run(["report"], cfg_path, tmp_path / "empty") == 1
