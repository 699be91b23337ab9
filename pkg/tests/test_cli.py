import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from bregsmooth import (
    PAPER_TABLE1,
    Dataset,
    GridSpec,
    LocalFitConfig,
    SimDesign,
    __version__,
    empirical_df,
    fit_curve,
    generate,
    select_bandwidth,
    table2_constants,
)
from bregsmooth.cli import run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def read_csv(text):
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(body))
    return rows[0], rows[1:]


def provenance(text):
    return {ln[2:].split(": ", 1)[0]: ln[2:].split(": ", 1)[1] for ln in text.splitlines() if ln.startswith("# ")}


@pytest.fixture
def uni_csv(tmp_path):
    d = generate(SimDesign("uni_poisson_3", 150, 4))
    path = tmp_path / "uni.csv"
    # deliberately unsorted rows
    order = np.random.default_rng(0).permutation(d.n)
    path.write_text("x,y\n" + "".join(f"{float(d.x[i])!r},{float(d.y[i])!r}\n" for i in order))
    return path, d


@pytest.fixture
def vc_csv(tmp_path):
    d = generate(SimDesign("vc_poisson_1", 150, 4))
    path = tmp_path / "vc.csv"
    rows = np.column_stack([d.u, d.X, d.y]).tolist()
    path.write_text("u,x1,x2,y\n" + "".join(",".join(map(repr, r)) + "\n" for r in rows))
    return path, d


@pytest.fixture
def pl_csv(tmp_path):
    rng = np.random.default_rng(3)
    n = 200
    u = np.sort(rng.uniform(0, 1, n))
    Z = rng.normal(size=(n, 2))
    y = np.sin(2 * np.pi * u) + Z @ [1.0, -0.5] + 0.5 * rng.normal(size=n)
    path = tmp_path / "pl.csv"
    rows = np.column_stack([u, Z, y]).tolist()
    path.write_text("u,z1,z2,y\n" + "".join(",".join(map(repr, r)) + "\n" for r in rows))
    return path


# table1 / losses ---------------------------------------------------------------


def test_table1_columns_and_values(tmp_path):
    out = tmp_path / "t1.csv"
    code, _, err = call("table1", "--out", out)
    assert code == 0 and err == ""
    text = out.read_text()
    header, rows = read_csv(text)
    assert header == ["family", "example", "h_ampec", "h_amise", "paper_h_ampec", "paper_h_amise", "delta"]
    assert len(rows) == 6
    for fam, ex, ha, hm, pa, pm, delta in rows:
        assert (float(pa), float(pm)) == PAPER_TABLE1[(fam, int(ex))]
        assert abs(float(ha) - float(pa)) <= 0.002 and abs(float(hm) - float(pm)) <= 0.002
    prov = provenance(text)
    assert prov["tool"] == f"bregsmooth {__version__}" and prov["command"].startswith("bregsmooth table1")


def test_table1_to_stdout_is_byte_identical():
    a, b = call("table1"), call("table1")
    assert a[0] == 0 and a[1] == b[1] and a[1].endswith("\n")


def test_losses_columns():
    code, out, _ = call("losses", "--margins=-1:1:5")
    header, rows = read_csv(out)
    assert code == 0 and header == ["margin", "quadratic", "deviance", "exploss", "hinge", "misclass"]
    assert [float(r[0]) for r in rows] == [-1.0, -0.5, 0.0, 0.5, 1.0]
    # every loss decreases in the margin
    for col in range(1, 6):
        vals = [float(r[col]) for r in rows]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


# fitting -------------------------------------------------------------------


def test_fit_matches_library(tmp_path, uni_csv):
    path, d = uni_csv
    out, summ = tmp_path / "fit.csv", tmp_path / "fit.json"
    code, _, _ = call("fit", "--data", path, "--family", "poisson", "--bandwidth", 0.2, "--out", out,
                      "--summary", summ, "--xmin", 0, "--xmax", 1)
    assert code == 0
    header, rows = read_csv(out.read_text())
    assert header[:3] == ["x", "theta_hat", "m_hat"] and header[-3:] == ["y", "H", "S"]
    ref = fit_curve(Dataset(d.x, d.y, (0.0, 1.0)), "poisson", LocalFitConfig(0.2))
    got = np.array([[float(v) for v in r[:2]] for r in rows])
    assert np.allclose(got[:, 0], d.x) and np.allclose(got[:, 1], ref.theta_hat, rtol=1e-10, atol=1e-10)
    s = json.loads(summ.read_text())
    assert s["sum_H"] == pytest.approx(np.sum(ref.H), rel=1e-10) and s["n"] == 150
    assert list(s)[0] == "provenance"


def test_fit_eval_points_from_design():
    code, out, _ = call("fit", "--design", "uni_bernoulli_2", "--n", 200, "--bandwidth", 0.25,
                        "--eval-points", "0:1:11")
    header, rows = read_csv(out)
    assert code == 0 and len(rows) == 11 and "H" not in header


def test_fit_vc(tmp_path, vc_csv):
    path, d = vc_csv
    out = tmp_path / "vc_fit.csv"
    code, _, err = call("fit-vc", "--data", path, "--family", "poisson", "--bandwidth", 0.3, "--out", out)
    assert code == 0, err
    header, rows = read_csv(out.read_text())
    assert header[:5] == ["u", "a1", "a2", "a1'", "a2'"] and "se_a2" in header and len(rows) == d.n


def test_select_and_summary(tmp_path):
    out, summ = tmp_path / "sel.csv", tmp_path / "sel.json"
    code, _, _ = call("select", "--design", "uni_poisson_2", "--n", 200, "--seed", 3, "--grid", "::12",
                      "--out", out, "--summary", summ)
    assert code == 0
    header, rows = read_csv(out.read_text())
    assert header == ["h", "criterion"] and len(rows) == 12
    s = json.loads(summ.read_text())
    ref = select_bandwidth(generate(SimDesign("uni_poisson_2", 200, 3)), "poisson", "deviance", "ecv",
                           GridSpec(npts=12))
    assert s["selected_h"] == pytest.approx(ref.selected_h, rel=1e-12)
    assert s["family"] == "poisson" and s["criterion"] == "ecv"


def test_select_vc_from_design():
    code, out, err = call("select-vc", "--design", "vc_bernoulli_1", "--n", 150, "--grid", "::6",
                          "--criterion", "hybrid-ecv")
    header, rows = read_csv(out)
    assert code == 0, err
    assert len(rows) == 6 and float(rows[0][0]) == pytest.approx(0.1)


def test_semipar(tmp_path, pl_csv):
    out, summ = tmp_path / "a.csv", tmp_path / "pl.json"
    code, _, err = call("semipar", "--data", pl_csv, "--grid", "::10", "--out", out, "--summary", summ)
    assert code == 0, err
    s = json.loads(summ.read_text())
    assert np.allclose(s["beta_hat"], [1.0, -0.5], atol=0.15) and s["experimental"] is False


def test_dof_matches_library(tmp_path):
    out = tmp_path / "dof.csv"
    code, _, _ = call("dof", "--family", "poisson", "--design", "uni_poisson_1", "--n", 400, "--seed", 1,
                      "--grid", "::8", "--out", out)
    assert code == 0
    header, rows = read_csv(out.read_text())
    assert header == ["h", "sum_H_actual", "sum_H_empirical"] and len(rows) == 8
    d = generate(SimDesign("uni_poisson_1", 400, 1))
    h = float(rows[3][0])
    fit = fit_curve(d, "poisson", LocalFitConfig(h))
    assert float(rows[3][1]) == pytest.approx(np.sum(fit.H), rel=1e-9)
    assert float(rows[3][2]) == pytest.approx(empirical_df(1, 400, h, "epanechnikov", 1.0, table2_constants(1)),
                                              rel=1e-9)


def test_simulate_artifacts_are_reproducible(tmp_path):
    args = ["simulate", "--design", "uni_poisson_3", "--reps", 3, "--n", 100, "--npts", 8, "--seed", 5]
    a, b = tmp_path / "a", tmp_path / "b"
    assert call(*args, "--outdir", a)[0] == 0
    assert call(*args, "--outdir", b, "--threads", 2)[0] == 0
    for name in ("summary.json", "boxplot.csv", "typical_fits.csv"):
        ta, tb = (a / name).read_text(), (b / name).read_text()
        # only the recorded command line differs
        strip = lambda t: "\n".join(ln for ln in t.splitlines() if "command" not in ln)
        assert strip(ta) == strip(tb)
    s = json.loads((a / "summary.json").read_text())
    assert s["reps"] == 3 and len(s["per_rep"]) == 3 and set(s["typical_indices"]) == {"p25", "p50", "p75"}
    header, rows = read_csv((a / "typical_fits.csv").read_text())
    assert header == ["grid", "truth", "p25", "p50", "p75"] and len(rows) == 101
    header, rows = read_csv((a / "boxplot.csv").read_text())
    assert [r[0] for r in rows] == ["ampec", "amise", "h", "ase"]


def test_rerun_is_byte_identical(tmp_path):
    out = tmp_path / "sel.csv"
    args = ["select", "--design", "uni_bernoulli_3", "--n", 120, "--grid", "::6", "--out", out]
    call(*args)
    first = out.read_bytes()
    call(*args)
    assert out.read_bytes() == first


# exit codes -----------------------------------------------------------------


@pytest.mark.parametrize("argv", [
    ["table1", "--bogus"],
    [],
    ["select", "--design", "uni_poisson_1", "--criterion", "hybrid"],
    ["select", "--design", "uni_poisson_1", "--divergence", "hinge"],
    ["fit", "--data", "/nonexistent.csv", "--bandwidth", "0.1", "--family", "poisson"],
    ["fit", "--design", "vc_poisson_1", "--bandwidth", "0.1"],
    ["fit", "--design", "uni_poisson_1", "--bandwidth", "-1"],
    ["select", "--design", "uni_poisson_1", "--grid", "1:2"],
    ["table1", "--threads", "0"],
    ["dof", "--design", "uni_poisson_1", "--family", "bernoulli"],
])
def test_validation_exit_two(tmp_path, argv):
    out = tmp_path / "never.csv"
    code, stdout, err = call(*argv, "--out", out) if argv else call()
    assert code == 2 and stdout == ""
    assert err.startswith("error: ") and err.count("\n") == 1
    assert not out.exists()


def test_bad_input_file_exit_two(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n0.1,abc\n")
    assert call("fit", "--data", bad, "--family", "poisson", "--bandwidth", 0.2)[0] == 2
    bad.write_text("a,b\n0.1,1\n")
    assert call("fit", "--data", bad, "--family", "poisson", "--bandwidth", 0.2)[0] == 2


def test_computational_failure_exit_one(tmp_path):
    data = tmp_path / "tiny.csv"
    data.write_text("x,y\n0.1,1\n0.2,0\n0.3,2\n0.9,1\n")
    out = tmp_path / "fit.csv"
    out.write_text("previous\n")
    code, stdout, err = call("fit", "--data", data, "--family", "poisson", "--bandwidth", 0.01, "--out", out)
    assert code == 1 and stdout == ""
    diag = json.loads(err)
    assert diag["status"] == "failed" and diag["error"] == "InsufficientDataError" and diag["command"] == "fit"
    assert out.read_text() == "previous\n"
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".tmp-")] == []


def test_help_and_version():
    assert call("--version")[0] == 0
    assert call("table1", "--help")[0] == 0


def test_module_entry_point(tmp_path):
    out = tmp_path / "losses.csv"
    env = dict(os.environ, BREGSMOOTH_THREADS="2")
    proc = subprocess.run([sys.executable, "-m", "bregsmooth", "losses", "--out", str(out)],
                          capture_output=True, text=True, env=env, timeout=60)
    assert proc.returncode == 0 and out.exists()
    proc = subprocess.run([sys.executable, "-m", "bregsmooth", "fit"], capture_output=True, text=True, timeout=60)
    assert proc.returncode == 2 and proc.stderr.startswith("error: ")
