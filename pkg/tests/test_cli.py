import csv
import json

import numpy as np
import pytest

from dnedispatch.cli import main
from dnedispatch.model import load_bundled_case
from dnedispatch.sampling import read_wind_csv
from dnedispatch.synthetic import WindModel, generate_wind, grid_case


@pytest.fixture(scope="module")
def smoke_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    assert main(["gen-synthetic", "--case", "smoke3", "--seed", "3", "--n-history", "400", "--n-validation", "24", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def six_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("six")
    assert main(["gen-synthetic", "--case", "six_bus", "--seed", "4", "--n-history", "600", "--n-validation", "4", "--out", str(out)]) == 0
    return out


def data_args(d):
    return ["--history", str(d / "history.csv"), "--validation", str(d / "validation.csv")]


def test_gen_synthetic_is_byte_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert main(["gen-synthetic", "--case", "six_bus", "--seed", "9", "--n-history", "200", "--n-validation", "10", "--out", str(tmp_path / sub)]) == 0
    for name in ("history.csv", "validation.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_generated_forecasts_within_capacity_and_spread_grows(tmp_path):
    assert main(["gen-synthetic", "--case", "six_bus", "--seed", "1", "--n-history", "6000", "--n-validation", "50", "--out", str(tmp_path)]) == 0
    cap = load_bundled_case("six_bus").vrg_capacity
    recs = read_wind_csv(tmp_path / "history.csv", ["W1", "W2"])
    f = np.array([r.forecast for r in recs])
    e = np.array([r.error for r in recs])
    assert f.min() >= 0.0 and np.all(f.max(axis=0) <= cap)
    assert np.all(f + e >= -1e-6) and np.all(f + e <= cap + 1e-6)
    for j in range(2):
        lo, hi = np.quantile(f[:, j], [1 / 3, 2 / 3])
        ratio = e[f[:, j] >= hi, j].std() / e[f[:, j] <= lo, j].std()
        assert ratio >= 1.5
    val = read_wind_csv(tmp_path / "validation.csv", ["W1", "W2"])
    assert all(r.observed is not None for r in val)
    assert val[0].timestamp == 6000


def test_generator_api_matches_cli_and_is_seeded():
    a, _ = generate_wind([50.0], 20, 0, seed=2)
    b, _ = generate_wind([50.0], 20, 0, seed=2)
    c, _ = generate_wind([50.0], 20, 0, seed=3, model=WindModel(ar=0.5))
    assert [r.forecast.tolist() for r in a] == [r.forecast.tolist() for r in b]
    assert [r.forecast.tolist() for r in a] != [r.forecast.tolist() for r in c]
    g = grid_case()
    assert g.n_bus == 20 and g.n_vrg == 4


def test_dne_single_period(six_data, tmp_path, capsys):
    rc = main(["dne", "--case", "six_bus", *data_args(six_data), "--n-dne", "60", "--out", str(tmp_path), "--emit-lp"])
    assert rc == 0
    rec = json.loads((tmp_path / "dne.json").read_text())
    assert len(rec["lower"]) == len(rec["upper"]) == 2
    assert rec["n_samples"] == 60 and 0 <= rec["coverage_count"] <= 60
    assert (tmp_path / "dne.lp").read_text().startswith("\\ dne3")
    assert "coverage" in capsys.readouterr().out


def test_obp_single_period(six_data, tmp_path):
    assert main(["dne", "--case", "six_bus", *data_args(six_data), "--n-dne", "40", "--out", str(tmp_path)]) == 0
    rc = main(["obp", "--case", "six_bus", *data_args(six_data), "--n-obp", "10", "--limits", str(tmp_path / "dne.json"), "--out", str(tmp_path)])
    assert rc == 0
    rec = json.loads((tmp_path / "obp.json").read_text())
    assert len(rec["base_obp"]) == 2 and len(rec["per_sample_costs"]) == 10


@pytest.mark.parametrize(
    "argv",
    [
        ["dne", "--case", "six_bus", "--samples", "0"],
        ["dne", "--case", "six_bus", "--n-obp", "-1"],
        ["dne", "--case", "six_bus", "--epsilon", "0"],
        ["frobnicate"],
        ["run", "--case", "six_bus", "--method", "greedy"],
        ["dne", "--case", "six_bus", "--penalty", "5", "--strict"],
        ["gen-synthetic", "--case", "six_bus", "--seed", "1", "--ar", "1.5"],
    ],
)
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_missing_files_and_cases_exit_2(smoke_data, tmp_path):
    assert main(["dne", "--case", "no_such_case", *data_args(smoke_data)]) == 2
    assert main(["dne", "--case", "smoke3", "--history", str(tmp_path / "nope.csv"), "--validation", "x"]) == 2
    assert main(["dne", "--case", "smoke3", *data_args(smoke_data), "--period", "99"]) == 2


def test_runtime_failure_exit_1(smoke_data, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"buses": []}')
    assert main(["dne", "--case", str(bad), *data_args(smoke_data)]) == 1


def read_rows(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_one_row_per_period(smoke_data, tmp_path):
    for method in ("proposed", "odne"):
        out = tmp_path / method
        rc = main(["run", "--case", "smoke3", *data_args(smoke_data), "--method", method, "--n-dne", "40", "--n-obp", "8", "--out", str(out), "--quiet"])
        assert rc == 0
        rows = read_rows(out / "periods.csv")
        assert len(rows) == 24 and {r["method"] for r in rows} == {method}
        summary = json.loads((out / "summary.json").read_text())
        assert summary["periods"] == 24 and 0.0 <= summary["coverage_rate"] <= 1.0


def test_run_from_manifest(smoke_data, tmp_path):
    manifest = {
        "case_path": "smoke3",
        "history_path": str(smoke_data / "history.csv"),
        "validation_path": str(smoke_data / "validation.csv"),
        "output_dir": str(tmp_path / "m"),
        "config": {"method": "odne", "n_dne": 30, "n_obp": 5, "horizon": [0, 1, 2]},
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    assert main(["run", "--manifest", str(path), "--quiet"]) == 0
    assert len(read_rows(tmp_path / "m" / "periods.csv")) == 3
    manifest["config"]["bogus"] = 1
    path.write_text(json.dumps(manifest))
    assert main(["run", "--manifest", str(path), "--quiet"]) == 2


def test_compare_reports_in_sample_dominance(smoke_data, tmp_path):
    rc = main(["compare", "--case", "smoke3", *data_args(smoke_data), "--n-dne", "40", "--n-obp", "8", "--periods", "8", "--out", str(tmp_path), "--quiet"])
    assert rc == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["in_sample_dominance"] is True
    assert summary["proposed"]["periods"] == summary["odne"]["periods"] == 8
    prop = read_rows(tmp_path / "proposed" / "periods.csv")
    base = read_rows(tmp_path / "odne" / "periods.csv")
    assert all(int(a["in_sample_covered"]) >= int(b["in_sample_covered"]) for a, b in zip(prop, base))
