import csv
import io
import json

import numpy as np
import pytest

from fairrecip.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from fairrecip.datagen import GenConfig, export_instance, generate
from fairrecip.experiment import (
    FAILED,
    SWEEP_COLUMNS,
    ConfigError,
    Method,
    RunSpec,
    load_config,
    load_policy,
    parse_method,
    parse_seeds,
    parse_size,
    run,
    save_policy,
    spec_from_dict,
    sweep,
)
from fairrecip.metrics import METRIC_COLUMNS

SMALL = ["--n", "6", "--m", "5", "--lambda", "0.3", "--no-timing"]


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def run_cli(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


# --- parsing ------------------------------------------------------------------------


def test_parse_seeds_forms():
    assert parse_seeds("0..9") == list(range(10))
    assert parse_seeds("3, 1,4") == [3, 1, 4]
    assert parse_seeds("0..2,7") == [0, 1, 2, 7]
    assert parse_seeds([5, 6]) == [5, 6]
    for bad in ("3..1", "x"):
        with pytest.raises(ConfigError):
            parse_seeds(bad)


def test_parse_method_and_labels():
    assert parse_method("NSW").label("exact") == "NSW"
    assert parse_method("nsw").label("sinkhorn") == "NSW/sinkhorn"
    assert parse_method("alpha=0.5") == Method("alpha", 0.5)
    assert parse_method("alpha=1") == Method("sw")
    assert parse_method("IterLP").label("sinkhorn") == "IterLP"
    for bad in ("foo", "alpha=2"):
        with pytest.raises((ConfigError, ValueError)):
            parse_method(bad)


def test_parse_size():
    assert parse_size("20") == (20, 20)
    assert parse_size("30x10") == (30, 10)
    with pytest.raises(ConfigError):
        parse_size("big")


def test_spec_from_dict_aliases_and_errors():
    spec = spec_from_dict({"lambda": 0.4, "K": 3, "methods": "naive,nsw", "seeds": "0..2"})
    assert (spec.lam, spec.threshold, spec.methods, spec.seeds) == (0.4, 3, ("naive", "nsw"), (0, 1, 2))
    with pytest.raises(ConfigError, match="unknown config key"):
        spec_from_dict({"lamda": 0.4})
    for bad in (dict(oracle="lp"), dict(lam=2.0), dict(methods=()), dict(p1="a.csv"), dict(jobs=0)):
        with pytest.raises(ConfigError):
            RunSpec(**bad).validate()


def test_load_config_formats(tmp_path):
    (tmp_path / "a.json").write_text(json.dumps({"n": 4}))
    (tmp_path / "b.yaml").write_text("n: 4\nseeds: 0..1\n")
    (tmp_path / "c.yaml").write_text("- 1\n")
    assert load_config(tmp_path / "a.json") == {"n": 4}
    assert load_config(tmp_path / "b.yaml") == {"n": 4, "seeds": "0..1"}
    with pytest.raises(ConfigError, match="mapping"):
        load_config(tmp_path / "c.yaml")
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.yaml")


def test_shipped_config_is_valid():
    from importlib.resources import files

    data = load_config(files("fairrecip") / "configs" / "synthetic.yaml")
    spec = spec_from_dict(data).validate()
    assert spec.seeds == tuple(range(10)) and (spec.n, spec.m) == (75, 50)


# --- library-level run / sweep ---------------------------------------------------


def test_run_rows_ordered_by_seed_then_method():
    spec = RunSpec(methods=("nsw", "naive"), seeds=(2, 0), n=5, m=4, lam=0.2, timing=False)
    rows, errors = run(spec)
    assert errors == []
    assert [(r["seed"], r["method"]) for r in rows] == [(0, "NSW"), (0, "Naive"), (2, "NSW"), (2, "Naive")]
    assert all(tuple(r) == METRIC_COLUMNS for r in rows)


def test_parallel_run_matches_serial():
    spec = RunSpec(methods=("naive", "sw"), seeds=(0, 1), n=5, m=4, timing=False)
    serial, _ = run(spec)
    parallel, _ = run(RunSpec(**{**spec.__dict__, "jobs": 2}))
    assert serial == parallel


def test_alpha_sweep_substitutes_values():
    spec = RunSpec(methods=("alpha",), seeds=(0,), n=5, m=4, lam=0.8, timing=False)
    rows, errors = sweep(spec, "alpha", ["0.2", "1.0"])
    assert errors == []
    assert [r["method"] for r in rows] == ["alpha=0.2", "SW"]
    assert [r["axis_value"] for r in rows] == ["0.2", "1.0"]


def test_sweep_axis_errors():
    spec = RunSpec(methods=("nsw",), n=5, m=4)
    with pytest.raises(ConfigError, match="tau axis"):
        sweep(spec, "tau", ["10"])
    with pytest.raises(ConfigError, match="alpha"):
        sweep(spec, "alpha", ["0.5"])
    with pytest.raises(ConfigError, match="axis"):
        sweep(spec, "beta", ["1"])


def test_perturbed_cell_uses_noisy_policy_and_true_metrics():
    base = RunSpec(methods=("naive",), seeds=(4,), n=6, m=5, lam=0.0, timing=False)
    clean, _ = run(base)
    noisy, _ = run(RunSpec(**{**base.__dict__, "sigma": 0.5}))
    assert clean[0]["expected_matches"] != noisy[0]["expected_matches"]


def test_policy_npz_round_trip(tmp_path, rng):
    from conftest import random_policy

    pol = random_policy(rng, 3, 2)
    save_policy(pol, tmp_path / "p.npz")
    back = load_policy(tmp_path / "p.npz")
    np.testing.assert_array_equal(back.a, pol.a)
    np.testing.assert_array_equal(back.b, pol.b)


# --- command line -------------------------------------------------------------------


def test_cli_run_popular_market(capsys):
    code, out, _ = run_cli(["run", "--methods", "naive,prod,tu", "--lambda", "1.0", "--no-timing"], capsys)
    assert code == EXIT_OK
    rows = read_csv(out)
    assert [r["method"] for r in rows] == ["Naive", "Prod", "TU"]
    assert all((r["left_envy"], r["right_envy"]) == ("2701", "1176") for r in rows)


def test_cli_reruns_byte_identical(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert main(["run", "--methods", "naive,iterlp,nsw", "--seeds", "0..1", *SMALL, "--out", str(p)]) == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert "wall_time_s" in paths[0].read_text().splitlines()[0]


def test_cli_config_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("methods: [naive]\nseeds: 0..2\nn: 5\nm: 4\nlambda: 0.5\n")
    code, out, _ = run_cli(["run", "--config", str(cfg), "--seeds", "7", "--no-timing"], capsys)
    assert code == EXIT_OK
    rows = read_csv(out)
    assert [r["seed"] for r in rows] == ["7"] and rows[0]["lambda"] == "0.5"


def test_cli_missing_csv_names_path(tmp_path, capsys):
    out_file = tmp_path / "out.csv"
    missing = tmp_path / "nowhere" / "p1.csv"
    code, out, err = run_cli(
        ["run", "--methods", "naive", "--p1", str(missing), "--p2", str(missing), "--out", str(out_file)], capsys
    )
    assert code == EXIT_CONFIG
    assert str(missing) in err
    assert not out_file.exists() and out == ""


def test_cli_bad_flag_value(capsys):
    code, _, err = run_cli(["run", "--methods", "magic"], capsys)
    assert code == EXIT_CONFIG and "magic" in err


def test_cli_sweep_empty_values_gives_header(capsys):
    code, out, _ = run_cli(["sweep", "--methods", "naive", "--axis", "lambda", "--values", "", *SMALL], capsys)
    assert code == EXIT_OK
    assert out == ",".join(SWEEP_COLUMNS) + "\n"


def test_cli_sweep_lambda(capsys):
    code, out, _ = run_cli(
        ["sweep", "--methods", "naive,sw", "--seeds", "0,1", "--axis", "lambda", "--values", "0,0.5", *SMALL[:4]], capsys
    )
    assert code == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 8
    assert [r["axis_value"] for r in rows[::2]] == ["0.0", "0.0", "0.5", "0.5"]


def test_cli_failed_tau_cell_is_flagged(capsys):
    argv = ["sweep", "--methods", "sw", "--oracle", "sinkhorn", "--axis", "tau", "--values", "5,100000", *SMALL]
    code, out, err = run_cli(argv, capsys)
    assert code == EXIT_RUNTIME
    rows = read_csv(out)
    assert len(rows) == 2
    assert rows[0]["expected_matches"] != FAILED
    assert rows[1]["expected_matches"] == FAILED
    assert "lower tau" in err


def test_cli_generate_then_run_from_csv(tmp_path, capsys):
    d = tmp_path / "market"
    assert main(["generate", "--n", "5", "--m", "4", "--lambda", "0.2", "--seed", "3", "--out", str(d)]) == EXIT_OK
    assert {p.name for p in d.iterdir()} == {"p1.csv", "p2.csv", "meta.txt"}
    np.testing.assert_allclose(
        np.loadtxt(d / "p1.csv", delimiter=","), generate(GenConfig(5, 4, 0.2, seed=3)).p1, atol=0
    )
    code, out, _ = run_cli(
        ["run", "--methods", "naive", "--p1", str(d / "p1.csv"), "--p2", str(d / "p2.csv"), "--no-timing"], capsys
    )
    assert code == EXIT_OK
    assert read_csv(out)[0]["lambda"] == ""


def test_cli_evaluate_saved_policy(tmp_path, capsys):
    cfg = GenConfig(5, 4, 0.0, seed=1)
    export_instance(generate(cfg), tmp_path, cfg)
    pol_dir = tmp_path / "pols"
    code, out, _ = run_cli(["run", "--methods", "nsw", "--n", "5", "--m", "4", "--lambda", "0.0", "--seeds", "1",
                            "--save-policies", str(pol_dir), "--no-timing"], capsys)
    assert code == EXIT_OK
    expected = read_csv(out)[0]
    saved = pol_dir / "NSW_seed1.npz"
    code, out, _ = run_cli(["evaluate", "--policy", str(saved), "--p1", str(tmp_path / "p1.csv"),
                            "--p2", str(tmp_path / "p2.csv"), "--label", "NSW"], capsys)
    assert code == EXIT_OK
    row = read_csv(out)[0]
    assert row["expected_matches"] == expected["expected_matches"]
    assert (row["left_envy"], row["right_envy"]) == (expected["left_envy"], expected["right_envy"])
