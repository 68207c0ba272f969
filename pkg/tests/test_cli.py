import json

import numpy as np
import pytest

from helpers import orthonormal_design, random_instance
from lassosig import __version__
from lassosig.cli import main
from lassosig.config import preset_text
from lassosig.lasso import compute_path
from lassosig.textio import format_design, format_response, format_table, parse_table


def write_xy(tmp_path, X, y, stem="d"):
    xf, yf = tmp_path / f"{stem}_X.txt", tmp_path / f"{stem}_y.txt"
    xf.write_text(format_design(X))
    yf.write_text(format_response(y))
    return str(xf), str(yf)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(out):
    meta, cols, rows = parse_table(out)
    return dict(m.split(": ", 1) for m in meta), cols, rows


# ---------------------------------------------------------------- path


def test_path_single_predictor(tmp_path, capsys):
    x = np.array([[0.6], [0.8]])
    code, out, _ = run(capsys, "path", *write_xy(tmp_path, x, np.array([1.0, 2.0])))
    meta, cols, rows = table(out)
    assert code == 0
    assert cols == ["step", "kind", "variable", "lambda", "n_active"]
    assert rows == [["1", "enter", "0", "2.2", "1"]]
    assert meta["completed"] == "1"


def test_path_orthonormal_knots(tmp_path, capsys):
    rng = np.random.default_rng(0)
    X = orthonormal_design(rng, 12, 4)
    y = rng.standard_normal(12)
    _, out, _ = run(capsys, "path", *write_xy(tmp_path, X, y))
    lams = [float(r[3]) for r in table(out)[2]]
    np.testing.assert_allclose(lams, np.sort(np.abs(X.T @ y))[::-1], rtol=1e-5)


def test_path_matches_library_golden(tmp_path, capsys):
    rng = np.random.default_rng(1)
    X, y = random_instance(rng, 15, 25)
    xf, yf = write_xy(tmp_path, X, y)
    out_file = tmp_path / "path.tsv"
    assert run(capsys, "path", xf, yf, "--max-steps", "10", "--out", str(out_file))[0] == 0
    X2 = np.loadtxt(xf, skiprows=1)
    path = compute_path(X2, np.loadtxt(yf), max_steps=10)
    rows = [(e.step, e.kind, e.variable, path.knots[i], len(path.active_sets[i])) for i, e in enumerate(path.events)]
    golden = format_table(["step", "kind", "variable", "lambda", "n_active"], rows)
    body = "".join(line + "\n" for line in out_file.read_text().splitlines() if not line.startswith("#"))
    assert body == golden
    side = json.loads((tmp_path / "path.tsv.manifest.json").read_text())
    assert side["argv"][0] == "path" and side["version"] == __version__


def test_parse_error_exit_code(tmp_path, capsys):
    xf = tmp_path / "X.txt"
    xf.write_text("2 2\n1 2\n3 oops\n")
    yf = tmp_path / "y.txt"
    yf.write_text("1\n2\n")
    code, _, err = run(capsys, "path", str(xf), str(yf))
    assert code == 2 and "X.txt:3" in err
    code, _, _ = run(capsys, "path", str(tmp_path / "none.txt"), str(yf))
    assert code == 2


# ---------------------------------------------------------------- covtest / refit


def test_covtest_table(tmp_path, capsys):
    rng = np.random.default_rng(2)
    X = orthonormal_design(rng, 40, 8)
    y = X @ np.r_[8.0, np.zeros(7)] + rng.standard_normal(40)
    code, out, _ = run(capsys, "covtest", *write_xy(tmp_path, X, y), "--sigma2", "1", "--steps", "3")
    meta, cols, rows = table(out)
    assert code == 0
    assert cols == ["k", "variable", "path_step", "statistic", "p_value", "reference"]
    assert [r[0] for r in rows] == ["1", "2", "3"]
    assert rows[0][1] == "0" and float(rows[0][4]) < 1e-6
    assert meta["cov_selected"] == "0"
    assert meta["sigma2"].startswith("1 (given)")


def test_covtest_numerical_failure(tmp_path, capsys):
    X = np.eye(4)
    code, _, err = run(capsys, "covtest", *write_xy(tmp_path, X, np.zeros(4)), "--sigma-source", "scaled_lasso")
    assert code == 3 and "numerical" in err


def test_covtest_rejects_bad_alpha(tmp_path, capsys):
    X, y = random_instance(np.random.default_rng(3), 10, 5)
    code, _, _ = run(capsys, "covtest", *write_xy(tmp_path, X, y), "--alpha", "2")
    assert code == 4


def test_refit_reference_column(tmp_path, capsys):
    rng = np.random.default_rng(4)
    X, y = random_instance(rng, 30, 10)
    files = write_xy(tmp_path, X, y)
    _, out, _ = run(capsys, "refit", *files, "--sigma2", "1", "--steps", "2", "--null", "order")
    meta, cols, rows = table(out)
    assert cols == ["k", "variable", "path_step", "statistic", "p_value", "reference", "singular"]
    assert rows[1][5] == "order_stat(k=2,p=10)"
    _, out, _ = run(capsys, "refit", *files, "--sigma2", "1", "--steps", "2")
    assert table(out)[2][0][5] == "chi2(1)"


# ---------------------------------------------------------------- despars


def test_despars_schema_and_strong_signal(tmp_path, capsys):
    rng = np.random.default_rng(5)
    X, _ = random_instance(rng, 60, 30)
    y = 15.0 * X[:, 4] + rng.standard_normal(60)
    code, out, _ = run(capsys, "despars", *write_xy(tmp_path, X, y))
    meta, cols, rows = table(out)
    assert code == 0
    assert cols == ["variable", "estimate", "se", "p", "p_holm", "ci_low", "ci_high"]
    assert len(rows) == 30
    assert "4" in meta["holm_rejected"].split(",")


def test_despars_null_rarely_rejects(tmp_path, capsys):
    clean = 0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        X, y = random_instance(rng, 60, 30)
        _, out, _ = run(capsys, "despars", *write_xy(tmp_path, X, y, stem=str(seed)))
        clean += table(out)[0]["holm_rejected"] == "-"
    assert clean >= 18


def test_despars_known_sigma_requires_value(tmp_path, capsys):
    X, y = random_instance(np.random.default_rng(6), 20, 5)
    code, _, _ = run(capsys, "despars", *write_xy(tmp_path, X, y), "--sigma-source", "known")
    assert code == 4


# ---------------------------------------------------------------- simulate


def small_table(tmp_path):
    f = tmp_path / "small.toml"
    text = preset_text("table1").replace("runs = 500", "runs = 3").replace("p = 80", "p = 30")
    f.write_text(text.replace("coef_size = [0.5, 1, 2, 4]", "coef_size = [2]"))
    return str(f)


def test_simulate_single_run(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", "--scenario", small_table(tmp_path), "--runs", "1", "--out-dir", str(tmp_path))
    assert code == 0
    meta, cols, rows = table((tmp_path / "table1_summary.tsv").read_text())
    assert cols == ["coef_size", "method", "fwer", "tp", "runs_completed", "failures"]
    assert [r[1] for r in rows] == ["de-spars", "cov", "cov.pval"]
    assert all(r[4] == "1" for r in rows)
    assert meta["runs"] == "1" and "config_digest" in meta


def test_simulate_jobs_byte_identical(tmp_path, capsys):
    scen = small_table(tmp_path)
    outs = []
    for jobs in ("1", "2"):
        d = tmp_path / f"j{jobs}"
        assert run(capsys, "simulate", "--scenario", scen, "--jobs", jobs, "--out-dir", str(d))[0] == 0
        outs.append((d / "table1_summary.tsv").read_bytes())
        assert json.loads((d / "table1_summary.tsv.manifest.json").read_text())["jobs"] == int(jobs)
    assert outs[0] == outs[1]


def test_simulate_figure_outputs(tmp_path, capsys):
    f = tmp_path / "fig.toml"
    f.write_text(
        'which = "figure1"\n[scenario]\nn = 40\np = 60\nruns = 4\n[grid]\ncoef_size = [1, 8]\nk0 = [2, 3]\n'
    )
    assert run(capsys, "simulate", "--scenario", str(f), "--out-dir", str(tmp_path))[0] == 0
    _, cols, rows = table((tmp_path / "figure1_plot.tsv").read_text())
    assert cols == ["coef_size", "k0_2", "k0_3"] and [r[0] for r in rows] == ["1", "8"]
    _, cols, rows = table((tmp_path / "figure1_summary.tsv").read_text())
    assert cols[:3] == ["coef_size", "k0", "p_event_b"] and len(rows) == 4


def test_simulate_config_errors(tmp_path, capsys, monkeypatch):
    bad = tmp_path / "bad.toml"
    bad.write_text('which = "table1"\n[scenario]\nn = 0\n[grid]\ncoef_size = [1]\n')
    assert run(capsys, "simulate", "--scenario", str(bad))[0] == 4
    assert run(capsys, "simulate")[0] == 4
    assert run(capsys, "simulate", "--which", "table2", "--preset", "table1")[0] == 4
    monkeypatch.setenv("LASSOSIG_JOBS", "many")
    assert run(capsys, "simulate", "--scenario", small_table(tmp_path), "--out-dir", str(tmp_path))[0] == 4


def test_preset_and_version(capsys):
    code, out, _ = run(capsys, "preset", "table2")
    assert code == 0 and "p = 200" in out
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out
