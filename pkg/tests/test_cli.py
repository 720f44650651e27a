"""Command line behavior: payload shapes, exit codes, byte determinism."""

import csv
import io
import json
import subprocess
import sys

import pytest

from pelsurv.cli import main
from pelsurv.data import (
    CategorySpace,
    SampleUnit,
    StratifiedSample,
    make_strata,
    serialize_sample,
)
from pelsurv.rng import TAG_STUDY, derive_seed

from conftest import build_sample

LABELS = ("1", "2", "3", "4")


def write_inputs(directory, sample, strata_sizes=(400, 600)):
    meta = {
        "categories": [int(l) for l in sample.categories.labels],
        "strata": [
            {"h": m.h, "N": m.population_size} for m in sample.strata
        ],
    }
    (directory / "meta.json").write_text(json.dumps(meta))
    (directory / "data.csv").write_text(serialize_sample(sample))
    (directory / "model.json").write_text(json.dumps({"family": "proportional_odds"}))
    return [
        "--data", str(directory / "data.csv"),
        "--meta", str(directory / "meta.json"),
        "--model", str(directory / "model.json"),
    ]


@pytest.fixture(scope="module")
def cli_env(tmp_path_factory):
    directory = tmp_path_factory.mktemp("cli")
    sample = build_sample(seed=7)
    common = write_inputs(directory, sample)
    return directory, sample, common


def test_estimate_payload(cli_env, tmp_path):
    directory, sample, common = cli_env
    out = tmp_path / "est.json"
    assert main(["estimate", *common, "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert set(payload) == {"beta", "y_bar", "cell_means", "simple", "diagnostics"}
    assert len(payload["beta"]) == 1
    assert isinstance(payload["y_bar"], float)
    assert len(payload["cell_means"]) == 4
    assert len(payload["simple"]["cell_means"]) == 4
    assert len(payload["simple"]["cell_sample_means"]) == 2  # one row per stratum
    search = payload["diagnostics"]["search"]
    assert search["converged"] in (True, False)
    assert search["evals"] > 0
    assert 0.0 <= search["rejected_fraction"] <= 1.0


def test_estimate_stdout_default(cli_env, capsys):
    _, _, common = cli_env
    assert main(["estimate", *common]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert "y_bar" in payload


def test_estimate_bootstrap_block(cli_env, tmp_path):
    _, _, common = cli_env
    out = tmp_path / "est.json"
    assert main(["estimate", *common, "--B", "8", "--seed", "3", "--out", str(out)]) == 0
    block = json.loads(out.read_text())["bootstrap"]
    expected = {"beta_1", "y_bar", "simple_y_bar"}
    expected |= {f"cell_{l}" for l in LABELS}
    expected |= {f"simple_cell_{l}" for l in LABELS}
    assert set(block) == expected
    for entry in block.values():
        assert set(entry) == {"vboot", "ci", "failures"}
        assert len(entry["ci"]) == 2
        # tiny resamples may empty a respondent cell; affected replicates
        # are dropped and counted rather than silently kept
        assert 0 <= entry["failures"] <= 8
    assert block["y_bar"]["failures"] == 0


def test_impute_csv_complete(cli_env, tmp_path):
    _, sample, common = cli_env
    out = tmp_path / "imp.csv"
    assert main(["impute", *common, "--method", "pel_mean", "--out", str(out)]) == 0
    text = out.read_text()
    rows = list(csv.DictReader(io.StringIO(text)))
    assert text.splitlines()[0] == "stratum,weight,z,y,imputed"
    assert len(rows) == len(sample.units)
    assert all(row["y"] != "" for row in rows)
    n_missing = sum(1 for u in sample.units if u.y is None)
    assert sum(int(row["imputed"]) for row in rows) == n_missing
    # respondent rows keep their original y
    for row, unit in zip(rows, sample.units):
        if row["imputed"] == "0":
            assert float(row["y"]) == unit.y


def test_bootstrap_payload_with_method(cli_env, tmp_path):
    _, _, common = cli_env
    out = tmp_path / "boot.json"
    rc = main([
        "bootstrap", *common, "--B", "10", "--seed", "2",
        "--method", "simple_mean", "--out", str(out),
    ])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert "simple_mean_y_bar" in payload
    assert {f"simple_mean_cell_{l}" for l in LABELS} <= set(payload)
    entry = payload["y_bar"]
    assert set(entry) == {"point", "vboot", "ci", "failures"}
    assert entry["ci"][0] <= entry["point"] <= entry["ci"][1]


def test_exit_code_data_errors(cli_env, tmp_path):
    directory, _, common = cli_env
    missing = ["--data", str(tmp_path / "nope.csv"), *common[2:]]
    assert main(["estimate", *missing]) == 2

    bad_meta = tmp_path / "meta.json"
    bad_meta.write_text("{not json")
    args = [common[0], common[1], "--meta", str(bad_meta), *common[4:]]
    assert main(["estimate", *args]) == 2

    bad_model = tmp_path / "model.json"
    bad_model.write_text(json.dumps({"family": "unheard_of"}))
    args = [*common[:4], "--model", str(bad_model)]
    assert main(["estimate", *args]) == 2

    bad_csv = tmp_path / "bad.csv"
    bad_csv.write_text("stratum,weight,z,y\n1,0.5,9,1.0\n")
    args = ["--data", str(bad_csv), *common[2:]]
    assert main(["estimate", *args]) == 2


def test_exit_code_usage(cli_env, capsys):
    _, _, common = cli_env
    assert main(["estimate", *common[:4]]) == 1  # --model missing
    assert main(["frobnicate"]) == 1
    assert main(["simulate", "--replicates", "2"]) == 1  # --gamma missing
    capsys.readouterr()


def test_exit_code_estimation(tmp_path, capsys):
    # category 2 appears only as a nonrespondent, so simple imputation
    # has no cell mean to fill from
    units = (
        SampleUnit(stratum=1, weight=0.25, z=1, y=1.0),
        SampleUnit(stratum=1, weight=0.25, z=1, y=2.0),
        SampleUnit(stratum=1, weight=0.25, z=3, y=3.0),
        SampleUnit(stratum=1, weight=0.25, z=2, y=None),
    )
    sample = StratifiedSample(CategorySpace((1, 2, 3)), make_strata((10,)), units)
    common = write_inputs(tmp_path, sample)
    assert main(["impute", *common, "--method", "simple_mean"]) == 3
    assert "category 2" in capsys.readouterr().err


def test_estimate_deterministic_bytes(cli_env, tmp_path):
    _, _, common = cli_env
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["estimate", *common, "--B", "6", "--seed", "9",
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_impute_seed_determinism(cli_env, tmp_path):
    _, _, common = cli_env
    outs = []
    for name, seed in (("a", 5), ("b", 5), ("c", 6)):
        out = tmp_path / f"{name}.csv"
        assert main(["impute", *common, "--method", "pel_random",
                     "--seed", str(seed), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


def test_console_entry_byte_identical(cli_env, tmp_path):
    _, _, common = cli_env
    results = []
    for _ in range(2):
        proc = subprocess.run(
            [sys.executable, "-m", "pelsurv", "estimate", *common,
             "--B", "5", "--seed", "4"],
            capture_output=True, timeout=300,
        )
        assert proc.returncode == 0
        results.append(proc.stdout)
    assert results[0] == results[1]
    json.loads(results[0])


def test_simulate_tiny(cli_env, tmp_path, capsys):
    out = tmp_path / "study.json"
    args = ["simulate", "--gamma", "0.3", "--replicates", "2", "--B", "0",
            "--seed", "5", "--threads", "1", "--out", str(out)]
    assert main(args) == 0
    text = capsys.readouterr().out
    assert "pel_y_bar" in text
    payload = json.loads(out.read_text())
    assert payload["seed"] == 5
    assert len(payload["studies"]) == 1
    config = payload["studies"][0]["config"]
    assert config["gamma"] == 0.3
    assert config["seed"] == derive_seed(5, TAG_STUDY, 0)
    assert "beta" in payload["studies"][0]["statistics"]

    again = tmp_path / "again.json"
    args[args.index(str(out))] = str(again)
    assert main(args) == 0
    capsys.readouterr()
    assert again.read_bytes() == out.read_bytes()


def test_simulate_multiple_gammas_get_distinct_seeds(tmp_path, capsys):
    out = tmp_path / "study.json"
    assert main(["simulate", "--gamma", "0.3", "0.7", "--replicates", "2",
                 "--B", "0", "--seed", "1", "--threads", "1",
                 "--out", str(out)]) == 0
    capsys.readouterr()
    studies = json.loads(out.read_text())["studies"]
    seeds = [s["config"]["seed"] for s in studies]
    assert seeds == [derive_seed(1, TAG_STUDY, 0), derive_seed(1, TAG_STUDY, 1)]
    assert seeds[0] != seeds[1]


def test_out_write_is_atomic(cli_env, tmp_path):
    _, _, common = cli_env
    out = tmp_path / "est.json"
    assert main(["estimate", *common, "--out", str(out)]) == 0
    leftovers = [p for p in tmp_path.iterdir() if p.name.startswith(".pelsurv-")]
    assert leftovers == []
    # a destination whose directory does not exist is a data error, not a crash
    assert main(["estimate", *common,
                 "--out", str(tmp_path / "no_dir" / "est.json")]) == 2
