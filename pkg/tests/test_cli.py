import csv
import io
import json
import subprocess
import sys

import pytest

from sibling_collector import cli
from sibling_collector import families as F

ZIPF = '{"kind": "zipf", "p": 1.0}'
EQUAL = '{"kind": "equal"}'


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0] == cli.CSV_HEADER
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_compute_csv(capsys):
    code, out, _ = run(["compute", "--family", EQUAL, "--N", "10", "--j", "2"], capsys)
    assert code == 0
    (row,) = parse_csv(out)
    assert abs(float(row["value"]) - 7381 / 2520) < 1e-8
    assert row["method"] == "quadrature" and row["ms"] == ""


def test_compute_exact_json(capsys):
    code, out, _ = run(["compute", "--family", EQUAL, "--N", "5", "--j", "2-3", "--method", "exact",
                        "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["command"] == "compute"
    assert (doc["rows"][0]["value_num"], doc["rows"][0]["value_den"]) == ("137", "60")
    assert len(doc["rows"]) == 2


def test_compute_unit_interval_and_timing(capsys):
    code, out, _ = run(["compute", "--family", ZIPF, "--Nlist", "3,30", "--method", "unit_interval",
                        "--timing"], capsys)
    assert code == 0
    rows = parse_csv(out)
    assert [r["N"] for r in rows] == ["3", "30"]
    assert all(float(r["ms"]) >= 0 for r in rows)


def test_simulate(capsys):
    code, out, _ = run(["simulate", "--family", EQUAL, "--N", "20", "--jmax", "3", "--reps", "20000",
                        "--seed", "3"], capsys)
    assert code == 0
    rows = parse_csv(out)
    assert [r["j"] for r in rows] == ["T", "2", "3"]
    r2 = rows[1]
    assert abs(float(r2["mean"]) - 3.597739657143682) <= 3 * float(r2["se"])


def test_asympt(capsys):
    code, out, _ = run(["asympt", "--family", ZIPF, "--Nlist", "1000,1000000", "--j", "2,3"], capsys)
    assert code == 0
    rows = parse_csv(out)
    assert len(rows) == 4
    for r in rows:
        total = float(r["term0"]) + float(r["term1"]) + float(r["term2"])
        assert abs(total - float(r["value"])) < 1e-9 * abs(total)


def test_limit_finite(capsys):
    code, out, _ = run(["limit", "--family", '{"kind": "linear"}', "--j", "2", "--format", "json"], capsys)
    assert code == 0
    (row,) = json.loads(out)["rows"]
    assert row["verdict"] == "FiniteByCor2"
    assert abs(row["I_value"] - 2.148125785536701) < 1e-9
    assert row["x_alpha"] == 1.0


def test_limit_divergent_exits_4(capsys):
    code, out, _ = run(["limit", "--family", '{"kind": "loglog", "c": 2}', "--j", "2"], capsys)
    assert code == cli.EXIT_DIVERGENT
    (row,) = parse_csv(out)
    assert row["verdict"] == "DivergentByProp2"
    assert row["note"] == "diagnosed, not proven"


def test_compare_equal(capsys):
    code, out, _ = run(["compare", "--family", EQUAL, "--N", "10", "--j", "2", "--format", "json"], capsys)
    assert code == 0
    (row,) = json.loads(out)["rows"]
    assert abs(row["exact"] - 7381 / 2520) < 1e-15
    assert abs(row["quadrature"] - row["exact"]) < 1e-8
    assert abs(row["sim_mean"] - row["quadrature"]) <= 3 * row["sim_se"]


def test_compare_zipf_large_N_within_five_percent():
    (row,) = cli.compare(F.zipf(1.0), [10**4], 2, reps=0)
    assert abs(row["quadrature"] - row["asymptotic"]) / row["quadrature"] < 0.05


def test_compare_log_growth_plateaus():
    rows = cli.compare(F.log_growth(), [10**2, 10**3, 10**4], 2, reps=0)
    q = [r["quadrature"] for r in rows]
    assert q[0] < q[1] < q[2]
    assert q[2] - q[1] < q[1] - q[0]
    assert all(r["exact"] is None and r["asymptotic"] is None for r in rows)


def test_experiment_small_cases():
    r = cli.experiment_conjecture(2, 2, 200, seed=1)
    assert r["uniform"] == pytest.approx(1.5, abs=1e-12)
    assert r["violations"] == 0 and r["max_sampled"] <= 1.5 + 1e-9
    r = cli.experiment_conjecture(3, 2, 1000, seed=2)
    assert r["violations"] == 0
    r = cli.experiment_conjecture(1, 3, 5, seed=0)
    assert r["max_sampled"] == r["uniform"] and r["violations"] == 0
    with pytest.raises(cli.ConfigError):
        cli.experiment_conjecture(201, 2, 1, seed=0)


def test_experiment_command(capsys):
    code, out, _ = run(["experiment", "--N", "2-4", "--j", "2", "--trials", "50", "--seed", "9"], capsys)
    assert code == 0
    rows = parse_csv(out)
    assert [r["N"] for r in rows] == ["2", "3", "4"]
    assert all(r["violations"] == "0" for r in rows)


@pytest.mark.parametrize(
    "argv",
    [
        ["compute", "--family", '{"kind": "nope"}', "--N", "5"],
        ["compute", "--family", ZIPF],
        ["compute", "--family", ZIPF, "--Nlist", "100,10"],
        ["compute", "--family", ZIPF, "--N", "5", "--j", "1"],
        ["compute", "--family", ZIPF, "--N", "5", "--method", "exact"],
        ["compute", "--family", ZIPF, "--N", "5", "--tol", "-1"],
        ["asympt", "--family", '{"kind": "linear"}', "--N", "1000"],
        ["asympt", "--family", ZIPF, "--N", "3"],
        ["limit", "--family", ZIPF],
        ["experiment", "--N", "500"],
        ["bogus"],
        ["compute", "--family", "/no/such/file.json", "--N", "5"],
    ],
)
def test_config_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == cli.EXIT_CONFIG
    assert err


def test_nonconvergence_exits_3(capsys):
    code, _, err = run(["compute", "--family", ZIPF, "--N", "5", "--tol", "1e-300", "--max-doublings", "3"],
                       capsys)
    assert code == cli.EXIT_NONCONVERGENCE
    assert "doubling" in err


def test_unwritable_out_exits_2(capsys, tmp_path):
    target = tmp_path / "missing" / "out.csv"
    code, _, _ = run(["compute", "--family", EQUAL, "--N", "3", "--out", str(target)], capsys)
    assert code == cli.EXIT_CONFIG


def test_family_from_file(tmp_path, capsys):
    path = tmp_path / "fam.json"
    path.write_text(ZIPF)
    code, out, _ = run(["compute", "--family", str(path), "--N", "4"], capsys)
    assert code == 0 and len(parse_csv(out)) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["compute", "--family", ZIPF, "--Nlist", "10,200", "--j", "2-4"],
        ["simulate", "--family", ZIPF, "--N", "25", "--jmax", "4", "--reps", "3000", "--seed", "77"],
        ["compare", "--family", EQUAL, "--Nlist", "5,10", "--reps", "500", "--format", "json"],
        ["experiment", "--N", "3", "--trials", "30", "--seed", "5", "--format", "json"],
        ["asympt", "--family", '{"kind": "stretched_exp", "p": 1, "q": 0.5}', "--N", "1e8", "--j", "2-4"],
    ],
    ids=["compute", "simulate", "compare", "experiment", "asympt"],
)
def test_outputs_are_byte_identical(argv, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(argv + ["--out", str(a)]) == 0
    assert cli.main(argv + ["--out", str(b), "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "sibling_collector", "compute", "--family", EQUAL, "--N", "2"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith(cli.CSV_HEADER)
