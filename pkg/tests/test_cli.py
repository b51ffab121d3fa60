import json

import numpy as np
from numpy.testing import assert_allclose

from missglasso import modelio
from missglasso.cli import main
from missglasso.em import (GaussianModel, conditional_mean_impute,
                           fit_missglasso, observed_neg_loglik)
from missglasso.incomplete import IncompleteMatrix
from missglasso.select import cross_validate, lambda_grid


def write_csv(path, rows, header=None):
    with open(path, "w", newline="\n") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def make_data_csv(path, rng, n=20, p=3, frac=0.2):
    x = rng.standard_normal((n, p))
    cells = []
    for i in range(n):
        row = []
        for j in range(p):
            if rng.random() < frac:
                row.append("NA")
                x[i, j] = np.nan
            else:
                row.append(repr(float(x[i, j])))
        cells.append(row)
    write_csv(path, cells, header=[f"v{j}" for j in range(p)])
    return x


def test_fit_fixed_lambda_matches_library(tmp_path):
    rng = np.random.default_rng(0)
    csv = tmp_path / "data.csv"
    x = make_data_csv(csv, rng, frac=0.0)
    out = tmp_path / "model.json"
    code = main(["fit", str(csv), "--lambda", "2.5", "--out", str(out)])
    assert code == 0
    model, meta = modelio.load_model(out)
    direct, _ = fit_missglasso(x, 2.5)
    assert np.array_equal(model.K, direct.K)
    assert np.array_equal(model.mu, direct.mu)
    assert meta["lambda"] == 2.5


def test_fit_tune_cv_matches_library(tmp_path):
    rng = np.random.default_rng(1)
    csv = tmp_path / "data.csv"
    x = make_data_csv(csv, rng, n=24, frac=0.15)
    out = tmp_path / "model.json"
    code = main(["fit", str(csv), "--tune", "cv", "--cv-folds", "4",
                 "--seed", "7", "--grid-count", "5", "--grid-ratio", "0.1",
                 "--out", str(out)])
    assert code == 0
    _, meta = modelio.load_model(out)
    data = IncompleteMatrix(x)
    grid = lambda_grid(data, count=5, ratio=0.1)
    path = cross_validate(data, grid, v=4, seed=7)
    assert meta["lambda"] == path.best_lambda


def test_fit_malformed_row_exits_2(tmp_path, capsys):
    csv = tmp_path / "bad.csv"
    write_csv(csv, [["1.0", "2.0"], ["3.0"]], header=["a", "b"])
    code = main(["fit", str(csv), "--lambda", "1.0",
                 "--out", str(tmp_path / "m.json")])
    assert code == 2
    assert "line 3" in capsys.readouterr().err


def test_fit_all_missing_column_exits_3(tmp_path):
    csv = tmp_path / "deg.csv"
    write_csv(csv, [["1.0", "NA"], ["2.0", ""], ["0.5", "NA"]], header=["a", "b"])
    code = main(["fit", str(csv), "--lambda", "1.0",
                 "--out", str(tmp_path / "m.json")])
    assert code == 3


def test_fit_nonconvergence_exits_4_but_writes_model(tmp_path):
    rng = np.random.default_rng(2)
    csv = tmp_path / "data.csv"
    make_data_csv(csv, rng, n=30, frac=0.3)
    out = tmp_path / "model.json"
    code = main(["fit", str(csv), "--lambda", "0.5", "--max-em", "1",
                 "--tol", "1e-12", "--out", str(out)])
    assert code == 4
    _, meta = modelio.load_model(out)
    assert meta["converged"] is False


def test_impute_complete_file_identity(tmp_path):
    rng = np.random.default_rng(3)
    csv = tmp_path / "data.csv"
    # quirky but valid numeric formats must survive byte-identically
    rows = [["1.50", "2e0"], ["0.25", "-3"], ["7", "0.125"]]
    write_csv(csv, rows, header=["a", "b"])
    model_path = tmp_path / "model.json"
    modelio.save_model(model_path, GaussianModel(mu=np.zeros(2), K=np.eye(2)))
    out = tmp_path / "out.csv"
    assert main(["impute", str(csv), "--model", str(model_path),
                 "--out", str(out)]) == 0
    assert out.read_bytes() == csv.read_bytes()


def test_impute_identity_model_fills_means(tmp_path):
    csv = tmp_path / "data.csv"
    write_csv(csv, [["NA", "3.0"], ["0.5", "NA"]], header=["a", "b"])
    mu = np.array([1.0, -2.0])
    model_path = tmp_path / "model.json"
    modelio.save_model(model_path, GaussianModel(mu=mu, K=np.eye(2)))
    out = tmp_path / "out.csv"
    assert main(["impute", str(csv), "--model", str(model_path),
                 "--out", str(out)]) == 0
    values, _ = modelio.read_matrix_csv(out)
    assert_allclose(values, [[1.0, 3.0], [0.5, -2.0]])


def test_impute_matches_library_and_preserves_observed(tmp_path):
    rng = np.random.default_rng(4)
    csv = tmp_path / "data.csv"
    x = make_data_csv(csv, rng, n=15, p=4, frac=0.25)
    model, _ = fit_missglasso(x, 2.0)
    model_path = tmp_path / "model.json"
    modelio.save_model(model_path, model)
    out = tmp_path / "out.csv"
    assert main(["impute", str(csv), "--model", str(model_path),
                 "--out", str(out)]) == 0
    got, _ = modelio.read_matrix_csv(out)
    expected = conditional_mean_impute(IncompleteMatrix(x), model)
    assert_allclose(got, expected, rtol=1e-15)
    # observed cells byte-identical
    original_lines = csv.read_text().splitlines()
    new_lines = out.read_text().splitlines()
    mask = ~np.isnan(x)
    for i, (orig, new) in enumerate(zip(original_lines[1:], new_lines[1:])):
        for j, (a, b) in enumerate(zip(orig.split(","), new.split(","))):
            if mask[i, j]:
                assert a == b


def test_impute_dimension_mismatch_exits_2(tmp_path):
    csv = tmp_path / "data.csv"
    write_csv(csv, [["1.0", "2.0", "3.0"]], header=["a", "b", "c"])
    model_path = tmp_path / "model.json"
    modelio.save_model(model_path, GaussianModel(mu=np.zeros(2), K=np.eye(2)))
    assert main(["impute", str(csv), "--model", str(model_path),
                 "--out", str(tmp_path / "o.csv")]) == 2


def test_model_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    x = rng.standard_normal((25, 3))
    x[rng.random(x.shape) < 0.2] = np.nan
    data = IncompleteMatrix(x)
    model, report = fit_missglasso(data, 1.5)
    path = tmp_path / "model.json"
    modelio.save_model(path, model, lam=1.5, report=report)
    loaded, _ = modelio.load_model(path)
    assert np.array_equal(loaded.mu, model.mu)
    assert np.array_equal(loaded.K, model.K)
    # ULP-identical likelihood after a save/load round trip
    assert observed_neg_loglik(data, loaded) == observed_neg_loglik(data, model)


def test_model_file_writes_exact_zeros_as_int(tmp_path):
    path = tmp_path / "model.json"
    k = np.array([[1.0, 0.0], [0.0, 2.0]])
    modelio.save_model(path, GaussianModel(mu=np.zeros(2), K=k))
    doc = json.loads(path.read_text())
    assert doc["K"][0][1] == 0
    assert isinstance(doc["K"][0][1], int)


def test_regress_complete_matches_scaled_lasso(tmp_path):
    rng = np.random.default_rng(6)
    n, p = 30, 4
    x = rng.standard_normal((n, p))
    beta = np.array([2.0, 0.0, -1.0, 0.0])
    y = x @ beta + 0.3 * rng.standard_normal(n)
    ycsv, xcsv = tmp_path / "y.csv", tmp_path / "x.csv"
    write_csv(ycsv, [[repr(float(v))] for v in y], header=["y"])
    write_csv(xcsv, [[repr(float(v)) for v in row] for row in x],
              header=[f"x{j}" for j in range(p)])
    out, coef = tmp_path / "m.json", tmp_path / "coef.csv"
    code = main(["regress", str(ycsv), str(xcsv), "--lambda1", "3.0",
                 "--lambda2", "2.0", "--no-center", "--out", str(out),
                 "--coef-out", str(coef)])
    assert code == 0
    from missglasso.scaled_lasso import InnerProducts, scaled_lasso_fit
    direct = scaled_lasso_fit(InnerProducts.from_data(y, x), 2.0)
    model, _ = modelio.load_regression_model(out)
    assert np.abs(model.beta - direct.beta).max() <= 1e-8
    lines = coef.read_text().splitlines()
    assert lines[0] == "feature,coefficient"
    assert len(lines) == 1 + p


def test_regress_huge_penalty_zeroes_beta(tmp_path):
    rng = np.random.default_rng(7)
    n, p = 20, 3
    x = rng.standard_normal((n, p))
    y = x[:, 0] + 0.1 * rng.standard_normal(n)
    ycsv, xcsv = tmp_path / "y.csv", tmp_path / "x.csv"
    write_csv(ycsv, [[repr(float(v))] for v in y], header=["y"])
    write_csv(xcsv, [[repr(float(v)) for v in row] for row in x],
              header=[f"x{j}" for j in range(p)])
    out, coef = tmp_path / "m.json", tmp_path / "coef.csv"
    code = main(["regress", str(ycsv), str(xcsv), "--lambda1", "3.0",
                 "--lambda2", "1e6", "--no-center", "--out", str(out),
                 "--coef-out", str(coef)])
    assert code == 0
    model, _ = modelio.load_regression_model(out)
    assert np.all(model.beta == 0.0)


def test_tune_prints_path(tmp_path, capsys):
    rng = np.random.default_rng(8)
    csv = tmp_path / "data.csv"
    make_data_csv(csv, rng, n=20, frac=0.1)
    code = main(["tune", str(csv), "--criterion", "bic", "--grid-count", "4",
                 "--grid-ratio", "0.1"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("lambda,score")
    assert "best lambda:" in out


SCENARIO = """
task = covariance
model = ar1
p = 4
n = 25
n_val = 20
mechanism = mcar
levels = 0.2
runs = 2
seed = 9
methods = missglasso
tuning = validation
grid_count = 4
grid_ratio = 0.1
"""


def test_simulate_deterministic_csv(tmp_path):
    scen = tmp_path / "scenario.cfg"
    scen.write_text(SCENARIO)
    out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    assert main(["simulate", str(scen), "--out", str(out1)]) == 0
    assert main(["simulate", str(scen), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    header = out1.read_text().splitlines()[0]
    assert header == "method,missing_pct,run,kl_loss,tpr,tnr,l2,runtime_s,em_iters"


def test_simulate_bad_config_exits_2(tmp_path):
    scen = tmp_path / "scenario.cfg"
    scen.write_text("task = covariance\nnonsense_key = 3\n")
    assert main(["simulate", str(scen), "--out", str(tmp_path / "r.csv")]) == 2


def test_simulate_timing_flag_adds_runtimes(tmp_path):
    scen = tmp_path / "scenario.cfg"
    scen.write_text(SCENARIO)
    out = tmp_path / "r.csv"
    assert main(["simulate", str(scen), "--out", str(out), "--timing"]) == 0
    lines = out.read_text().splitlines()
    runtime_field = lines[1].split(",")[7]
    assert float(runtime_field) > 0.0


def test_simulate_heatmap_output(tmp_path):
    scen = tmp_path / "scenario.cfg"
    scen.write_text(SCENARIO + f"heatmap_out = {tmp_path}/zf\n")
    out = tmp_path / "r.csv"
    assert main(["simulate", str(scen), "--out", str(out)]) == 0
    freq_file = tmp_path / "zf.20.csv"
    assert freq_file.exists()
    freq = np.loadtxt(freq_file, delimiter=",")
    assert freq.shape == (4, 4)
    assert np.all((freq >= 0) & (freq <= 1))
    assert np.all(np.diag(freq) == 0.0)  # diagonal of K never zero


def test_shipped_scenarios_parse():
    import pathlib

    from missglasso.simulate import parse_scenario
    root = pathlib.Path(__file__).resolve().parents[1] / "scenarios"
    files = sorted(root.glob("*.cfg"))
    assert files, "shipped scenario files missing"
    for f in files:
        config = parse_scenario(f.read_text())
        assert config.runs >= 1


def test_threads_env_fallback(monkeypatch):
    import argparse

    from missglasso.cli import _threads
    monkeypatch.setenv("MISSGLASSO_THREADS", "3")
    assert _threads(argparse.Namespace(threads=None)) == 3
    assert _threads(argparse.Namespace(threads=4)) == 4
    assert _threads(argparse.Namespace(threads=0)) == -1
    monkeypatch.delenv("MISSGLASSO_THREADS")
    assert _threads(argparse.Namespace(threads=None)) == 1


def test_fit_no_penalize_diag_flag(tmp_path):
    rng = np.random.default_rng(21)
    csv = tmp_path / "data.csv"
    x = make_data_csv(csv, rng, n=25, p=3, frac=0.0)
    out = tmp_path / "m.json"
    assert main(["fit", str(csv), "--lambda", "2.0", "--no-penalize-diag",
                 "--out", str(out)]) == 0
    model, _ = modelio.load_model(out)
    mu = x.mean(axis=0)
    s_diag = np.diag((x - mu).T @ (x - mu) / x.shape[0])
    # unpenalized diagonal: Sigma diagonal equals the empirical variances
    assert_allclose(np.diag(np.linalg.inv(model.K)), s_diag, rtol=1e-6)
