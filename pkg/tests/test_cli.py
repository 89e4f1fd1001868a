import math
import subprocess
import sys

import numpy as np
import pytest

from biharmonic_slp import io as bio
from biharmonic_slp.cli import kernel_checks, main, parse_grid, parse_points
from biharmonic_slp.geometry import multicurve_from_spec
from biharmonic_slp.kernels import KernelParams


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = main([*argv, "--out", str(out)])
    return code, out


def _error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return err[0]


class TestParsing:
    def test_grid(self):
        np.testing.assert_allclose(parse_grid("0.1:0.5:5"), [0.1, 0.2, 0.3, 0.4, 0.5])

    @pytest.mark.parametrize("text", ["0.1:0.5", "-1:1:5", "0.5:0.1:5", "0.1:0.5:1"])
    def test_bad_grid(self, text):
        with pytest.raises(ValueError):
            parse_grid(text)

    def test_points(self):
        pts = parse_points("-1:1:3,0:1:2")
        assert pts.shape == (6, 2)
        np.testing.assert_allclose(pts[:2], [[-1, 0], [-1, 1]])


class TestRobin:
    def test_unit_circle(self, tmp_path):
        code, out = run(tmp_path, "robin", "--curve", "circle:r=1", "--kappa0", "1", "--kappa1", "0", "--n", "256")
        assert code == 0
        rep = bio.read_report(out / "robin.txt")
        assert float(rep["L00"]) == pytest.approx(-0.0397887, abs=1e-7)
        assert float(rep["L11"]) == pytest.approx(-0.0795775, abs=1e-7)
        assert float(rep["L22"]) == pytest.approx(-0.0795775, abs=1e-7)
        assert rep["definiteness"] == "negative"
        assert rep["hole_curves"] == "none"
        assert float(rep["bordered_rcond"]) > 1e-10
        mat = np.loadtxt(out / "robin_matrix.csv", delimiter=",")
        assert mat.shape == (3, 3)

    def test_annulus_reports_same_matrix(self, tmp_path):
        _, a = run(tmp_path / "a", "robin", "--curve", "circle:r=1", "--n", "128")
        _, b = run(tmp_path / "b", "robin", "--curve", "circle:r=1+circle:r=0.3,cx=0.2", "--n", "128")
        ra, rb = bio.read_report(a / "robin.txt"), bio.read_report(b / "robin.txt")
        for key in ("L00", "L11", "L22", "L01"):
            assert float(ra[key]) == pytest.approx(float(rb[key]), abs=1e-9)
        assert rb["exterior_curves"] == "0" and rb["hole_curves"] == "1"

    def test_malformed_spec(self, tmp_path, capsys):
        code, _ = run(tmp_path, "robin", "--curve", "circle:r=-1")
        assert code == 2
        line = _error_line(capsys)
        assert line.startswith("error code=2 kind=geometry message=")

    def test_overlapping_curves(self, tmp_path, capsys):
        assert run(tmp_path, "robin", "--curve", "circle:r=1+circle:r=1,cx=1")[0] == 2

    def test_asymmetry_not_reached(self, tmp_path, capsys):
        code, _ = run(tmp_path, "robin", "--curve", "kite", "--n", "8", "--max-n", "16", "--asym-tol", "1e-15")
        assert code == 3
        assert "kind=convergence" in _error_line(capsys)

    @pytest.mark.parametrize("argv", [["robin", "--n", "7"], ["robin", "--bogus"], ["robin", "--kappa0", "-1"],
                                      ["solve", "--mode", "other"], ["frobnicate"]])
    def test_bad_input(self, tmp_path, capsys, argv):
        assert run(tmp_path, *argv)[0] == 2

    def test_stdout_report(self, capsys):
        assert main(["robin", "--curve", "circle:r=1", "--n", "64"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "curve=circle:r=1"
        assert any(line.startswith("det=") for line in lines)

    def test_config_overridden_by_flags(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# circle run\ncurve = circle:r=2\nn = 64\nkappa0 = 2\n")
        _, out = run(tmp_path, "robin", "--config", str(cfg), "--kappa0", "1")
        rep = bio.read_report(out / "robin.txt")
        assert rep["curve"] == "circle:r=2" and float(rep["kappa0"]) == 1.0 and rep["n"] == "64"

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("colour = red\n")
        assert run(tmp_path, "robin", "--config", str(cfg))[0] == 2


class TestScales:
    def test_unit_circle(self, tmp_path):
        code, out = run(tmp_path, "scales", "--curve", "circle:r=1", "--n", "64", "--grid", "0.3:0.45:8")
        assert code == 0
        header, rows = bio.read_csv(out / "roots.csv")
        assert header == ["rho", "branch", "multiplicity"]
        assert rows.shape == (1, 3)
        assert rows[0, 0] == pytest.approx(1 / math.e, abs=1e-6) and rows[0, 2] == 2
        header, rows = bio.read_csv(out / "branches.csv")
        assert header == ["rho", "lambda1", "lambda2", "lambda3", "det"] and rows.shape == (8, 5)

    def test_sigma_column(self, tmp_path):
        code, out = run(tmp_path, "scales", "--curve", "circle:r=1", "--n", "32", "--grid", "0.3:0.45:6",
                        "--sigma-min", "--sigma-n", "32")
        assert code == 0
        assert bio.read_csv(out / "branches.csv")[0][-1] == "sigma_min"
        header, rows = bio.read_csv(out / "roots.csv")
        assert header[-1] == "sigma_dip_rho"
        assert rows[0, 3] == pytest.approx(rows[0, 0], abs=1e-3)

    def test_two_circles_confined(self, tmp_path):
        code, out = run(tmp_path, "scales", "--curve", "circle:r=1,cx=-2+circle:r=1,cx=2", "--n", "32")
        assert code == 0
        _, rows = bio.read_csv(out / "roots.csv")
        # after normalisation R- = 1 and R+ = 5; padded interval
        lo, hi = 0.9 / (5 * math.e), 1.1 / math.e
        assert len(rows) and np.all((rows[:, 0] > lo) & (rows[:, 0] < hi))

    def test_deterministic(self, tmp_path):
        argv = ["scales", "--curve", "ellipse:a=2,b=1", "--n", "32", "--grid", "0.15:0.4:6"]
        _, a = run(tmp_path / "a", *argv)
        _, b = run(tmp_path / "b", *argv)
        for name in ("roots.csv", "branches.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestSolve:
    def test_manufactured_solution(self, tmp_path):
        code, out = run(tmp_path, "solve", "--curve", "kite", "--n", "256", "--data", "source:3,0",
                        "--points=-1:0.5:4,-0.5:0.5:3")
        assert code == 0
        _, rows = bio.read_csv(out / "field.csv")
        # the grid straddles the kite; the interior solution is unique
        rows = rows[multicurve_from_spec("kite").in_bounded_region(rows[:, :2])]
        assert len(rows) >= 4
        z = np.array([3.0, 0.0])
        d = rows[:, :2] - z
        r2 = np.sum(d**2, axis=1)
        exact = (r2 * np.log(np.sqrt(r2)) + 0.0) / (8 * math.pi)
        assert np.max(np.abs(rows[:, 2] - exact)) < 1e-6

    def test_affine_data(self, tmp_path):
        code, out = run(tmp_path, "solve", "--curve", "ellipse:a=2,b=1", "--n", "64", "--data", "affine:0,1,0")
        assert code == 0
        _, rows = bio.read_csv(out / "field.csv")
        np.testing.assert_allclose(rows[:, 2], rows[:, 0], atol=1e-9)
        np.testing.assert_allclose(rows[:, 3], 0, atol=1e-8)
        rep = bio.read_report(out / "solve.txt")
        assert [float(v) for v in rep["a"].split()] == pytest.approx([0, 1, 0], abs=1e-12)

    def test_near_boundary_skipped(self, tmp_path, capsys):
        code, out = run(tmp_path, "solve", "--curve", "circle:r=1", "--n", "64", "--points=0.99:1.01:3,0:0:1")
        assert code == 0
        rep = bio.read_report(out / "solve.txt")
        assert rep["warnings"] == "near_boundary_skipped:3" and rep["evaluated"] == "0"
        assert "near_boundary_skipped=3" in capsys.readouterr().err

    def test_density_export(self, tmp_path):
        _, out = run(tmp_path, "solve", "--curve", "circle:r=1+circle:r=0.3,cx=0.2", "--n", "16")
        header, rows = bio.read_csv(out / "density.csv")
        assert header == ["curve", "node", "t", "x1", "x2", "q0", "q1"] and rows.shape == (32, 7)

    def test_degenerate_scale(self, tmp_path, capsys):
        code, _ = run(tmp_path, "solve", "--curve", f"circle:r={1 / math.e}", "--n", "64", "--mode", "single-layer")
        assert code == 4
        line = _error_line(capsys)
        assert "kind=degenerate" in line
        rho = float(line.split("nearest_rho=")[1].split()[0])
        assert rho == pytest.approx(1.0, abs=1e-6)

    def test_modes_agree(self, tmp_path):
        argv = ["solve", "--curve", "ellipse:a=2,b=1", "--n", "128", "--data", "source:4,1", "--points=-1:1:3,-0.3:0.3:2"]
        _, a = run(tmp_path / "a", *argv)
        _, b = run(tmp_path / "b", *argv, "--mode", "single-layer")
        np.testing.assert_allclose(bio.read_csv(a / "field.csv")[1], bio.read_csv(b / "field.csv")[1], atol=1e-8)


class TestConverge:
    def test_circle(self, tmp_path):
        code, out = run(tmp_path, "converge", "--curve", "circle:r=1", "--n-min", "16", "--n-max", "128")
        assert code == 0
        header, rows = bio.read_csv(out / "converge.csv")
        assert header == ["n", "err_ref", "err_closed", "asymmetry"]
        np.testing.assert_array_equal(rows[:, 0], [16, 32, 64, 128])
        assert np.all(rows[:, 2] < 1e-10)

    def test_kite_monotone(self, tmp_path):
        code, out = run(tmp_path, "converge", "--curve", "kite", "--n-min", "16", "--n-max", "256")
        assert code == 0
        _, rows = bio.read_csv(out / "converge.csv")
        err = rows[:-1, 1]
        assert np.all(np.diff(err) < 0)
        assert np.all(np.isnan(rows[:, 2]))

    def test_not_converged(self, tmp_path):
        code, _ = run(tmp_path, "converge", "--curve", "kite", "--n-min", "8", "--n-max", "16")
        assert code == 3


class TestKernelCheck:
    def test_passes(self, tmp_path):
        code, out = run(tmp_path, "kernel-check", "--kappa0", "2", "--kappa1", "0.5")
        assert code == 0
        text = (out / "kernel_check.csv").read_text().splitlines()
        assert text[0] == "check,error,tolerance,passed"
        assert all(line.endswith(",1") for line in text[1:])

    def test_errors_below_tolerance(self):
        for name, err, tol in kernel_checks(KernelParams(1.0, 0.0), seed=3):
            assert err < tol, name


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "biharmonic_slp", "robin", "--curve", "circle:r=-1"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stderr.startswith("error code=2")
