import csv
import json
import subprocess
import sys

import pytest

from scaledfb import io
from scaledfb.cli import main, verify_report

DENSITY = ["--experiment", "density", "--seed", "7", "--n", "60"]


def strip_time(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    drop = [i for i, name in enumerate(rows[0]) if name == "time_s"]
    return [[v for i, v in enumerate(r) if i not in drop] for r in rows]


@pytest.fixture(scope="module")
def density_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cmp")
    code = main(["compare", *DENSITY, "--solvers", "sfbem,fista,sgp,gp", "--max-iter", "300",
                 "--out", str(out)])
    assert code == 0
    return out


def test_generate_is_byte_identical(tmp_path):
    args = ["generate", *DENSITY, "--out"]
    assert main(args + [str(tmp_path / "a")]) == 0
    assert main(args + [str(tmp_path / "b")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["density_seed7.json", "density_seed7.vmfb"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_generate_manifest_echoes_sizes(tmp_path):
    assert main(["generate", "--experiment", "cs", "--seed", "1", "--m", "100", "--n", "500",
                 "--s", "5", "--out", str(tmp_path)]) == 0
    man = io.read_json(tmp_path / "cs_seed1.json")
    assert (man["m"], man["n"], man["s"], man["seed"]) == (100, 500, 5, 1)


@pytest.mark.parametrize("argv", [
    ["generate", "--seed", "1", "--out", "x"],
    ["generate", "--experiment", "density", "--out", "x"],
    ["compare", *DENSITY, "--solvers", "sfbem,newton", "--out", "x"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 2


@pytest.mark.parametrize("argv", [
    ["generate", "--experiment", "density", "--seed", "1", "--m", "10"],
    ["generate", "--experiment", "cs", "--seed", "1", "--m", "50", "--n", "20"],
    ["compare", *DENSITY, "--max-iter", "100", "--ref-budget", "200"],
    ["compare", *DENSITY, "--delta", "1.5"],
])
def test_invalid_values_exit_2(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == 2


def test_unwritable_output_exits_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["generate", *DENSITY, "--out", str(blocker / "sub")]) == 2


def test_compare_outputs(density_run):
    for alg in ("fista", "gp", "sfbem", "sgp"):
        rows = io.read_history_csv(density_run / f"history_{alg}.csv")
        assert [r["k"] for r in rows] == list(range(1, len(rows) + 1))
        assert all(r["gap"] >= -1e-12 for r in rows)
    assert not (density_run / "history_bb_fb.csv").exists()
    solvers = [r[0] for r in strip_time(density_run / "summary.csv")[1:]]
    assert solvers == sorted(solvers)
    summary = io.read_json(density_run / "summary.json")
    assert summary["solvers"] == ["fista", "gp", "sfbem", "sgp"]
    assert summary["F_star"] <= summary["F_reference"]
    header = strip_time(density_run / "curves.csv")[0]
    assert header == ["solver", "k", "gap"]
    assert len(io.read_jsonl(density_run / "metric_report_sfbem.jsonl")) == 300


def test_history_csv_parses_back_identically(density_run):
    path = density_run / "history_sfbem.csv"
    rows = io.read_history_csv(path)
    io.write_history_csv(path.with_name("copy.csv"), rows)
    assert path.with_name("copy.csv").read_bytes() == path.read_bytes()


def test_compare_is_deterministic_apart_from_time(density_run, tmp_path):
    assert main(["compare", *DENSITY, "--solvers", "sfbem,fista,sgp,gp", "--max-iter", "300",
                 "--out", str(tmp_path)]) == 0
    for p in sorted(density_run.glob("*.csv")):
        if p.name == "copy.csv":
            continue
        assert strip_time(p) == strip_time(tmp_path / p.name), p.name


def test_verify_passes_on_density(density_run):
    assert main(["verify", *DENSITY, "--out", str(density_run)]) == 0
    rep = json.loads((density_run / "verify_report.json").read_text())
    assert set(rep) == {"experiment", "seed", "iterations", "F_star", "metric_conditions",
                        "rate", "backtracking", "ok"}
    assert rep["metric_conditions"]["ok"] and rep["rate"]["ok"] and rep["backtracking"]["ok"]
    assert rep["backtracking"]["alpha_bound_ok"]


def test_verify_flags_corrupted_history(density_run):
    summary = io.read_json(density_run / "summary.json")
    history = io.read_history_csv(density_run / "history_sfbem.csv")
    trace = io.read_jsonl(density_run / "trace_sfbem.jsonl")
    metrics = io.read_jsonl(density_run / "metric_report_sfbem.jsonl")
    for r in history[49:]:
        r["F"] = history[48]["F"]
    rep = verify_report(summary, history, trace, metrics)
    assert not rep["rate"]["ok"] and not rep["ok"]


def test_verify_without_run_exits_2(tmp_path):
    assert main(["verify", *DENSITY, "--out", str(tmp_path)]) == 2


def test_verify_rejects_mismatched_run(density_run):
    assert main(["verify", "--experiment", "density", "--seed", "8", "--n", "60",
                 "--out", str(density_run)]) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "scaledfb", "generate", *DENSITY,
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
    res = subprocess.run([sys.executable, "-m", "scaledfb", "generate", "--seed", "1"],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "required" in res.stderr


def test_compare_exits_1_when_every_solver_fails(tmp_path, monkeypatch):
    from scaledfb import cli
    from scaledfb.solvers import NumericalFailure

    def broken(*args, **kwargs):
        raise NumericalFailure("non-finite objective")

    monkeypatch.setattr(cli, "run", broken)
    code = main(["compare", *DENSITY, "--solvers", "fista,gp", "--max-iter", "20",
                 "--out", str(tmp_path)])
    assert code == 1
    with open(tmp_path / "summary.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["status"] for r in rows} == {"failed"}
