import math
import os
import tempfile

import pandas as pd

import config
from errors import EXIT_INVALID_ARGUMENT, EXIT_OK, EXIT_VERIFY_FAILED
from main import main as cli
from sweep import COLUMNS, parse_mu_range, trend_decreasing
from utils import read_json, read_sweep_csv, write_json


def test_scatlen_reports_square_well():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "scat.json")
        assert cli(["scatlen", "--potential", "squarewell:1:1", "--out", out]) == EXIT_OK
        data = read_json(out)
    assert abs(data["a_bs"] - (1.0 - math.tan(1.0))) <= 1e-8
    assert data["bound_states"] == 0
    assert data["potential"]["family"] == "squarewell"


def test_invalid_arguments_exit_two():
    assert cli(["gap", "--potential", "cubic:1:1", "--mu", "0.3"]) == EXIT_INVALID_ARGUMENT
    assert cli(["gap", "--potential", "squarewell:1:1", "--mu", "0.3"]) == EXIT_INVALID_ARGUMENT
    assert cli(["gap", "--mu", "1e-6"]) == EXIT_INVALID_ARGUMENT
    assert cli(["no-such-command"]) == EXIT_INVALID_ARGUMENT


def test_verify_golden_values():
    assert cli(["verify", "--only", "golden"]) == EXIT_OK


def test_tampered_golden_fails():
    golden = read_json(config.GOLDEN)
    golden["values"]["gaussian_born_term"]["value"] += 1e-3
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "tampered.json")
        write_json(golden, path)
        out = os.path.join(tmp, "report.json")
        assert cli(["verify", "--only", "golden", "--golden", path, "--out", out]) == EXIT_VERIFY_FAILED
        report = read_json(out)
    assert report["overall"] is False
    failing = [c["name"] for c in report["criteria"] if not c["pass"]]
    assert failing == ["golden:gaussian_born_term"]


def test_golden_holds_solver_values():
    golden = read_json(config.GOLDEN)
    assert golden["settings"]["derived"]["potential"] == "gaussian:1:1"
    assert {"gap_functional_sign_mu_0.3", "universal_ratio_mu_0.1"} <= set(golden["values"])
    # a solve that collapsed to zero gap would report these values
    golden["values"]["gap_functional_sign_mu_0.3"]["value"] = 0.0
    golden["values"]["universal_ratio_mu_0.1"]["value"] = 0.0
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "collapsed.json")
        write_json(golden, path)
        out = os.path.join(tmp, "report.json")
        assert cli(["verify", "--only", "golden", "--golden", path, "--out", out]) == EXIT_VERIFY_FAILED
        report = read_json(out)
    failing = sorted(c["name"] for c in report["criteria"] if not c["pass"])
    assert failing == ["golden:gap_functional_sign_mu_0.3", "golden:universal_ratio_mu_0.1"]


def test_mu_range_parsing():
    assert parse_mu_range("0.3:0.3:0") == []
    values = parse_mu_range("0.1:0.001:3")
    assert values[0] == 0.1 and abs(values[1] - 0.01) < 1e-15 and abs(values[2] - 0.001) < 1e-15


def test_empty_sweep():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "empty.csv")
        assert cli(["sweep", "--mu-range", "0.3:0.3:0", "--out", out]) == EXIT_OK
        with open(out) as f:
            assert f.read() == "# schema: sweep-v1\n"


def test_sweep_isolates_failures_and_is_deterministic():
    with tempfile.TemporaryDirectory() as tmp:
        first, second = os.path.join(tmp, "a.csv"), os.path.join(tmp, "b.csv")
        args = ["sweep", "--mu-range", "0.3:1e-6:2", "--no-tc"]
        assert cli(args + ["--out", first]) == EXIT_OK
        assert cli(args + ["--out", second]) == EXIT_OK
        with open(first) as f, open(second) as g:
            assert f.read() == g.read()
        frame = read_sweep_csv(first)
    assert list(frame.columns) == COLUMNS
    assert len(frame) == 2
    assert pd.isna(frame["error"][0])
    assert frame["delta_fermi"][0] > 0.0
    assert frame["xi"][0] <= frame["delta_fermi"][0]
    assert "BelowFloorError" in frame["error"][1]


def test_positional_potential():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "scat.json")
        assert cli(["scatlen", "squarewell:1:1", "--out", out]) == EXIT_OK
        data = read_json(out)
    assert data["potential"]["family"] == "squarewell"
    assert abs(data["a_bs"] - (1.0 - math.tan(1.0))) <= 1e-8
    assert cli(["scatlen", "squarewell:1:1", "--potential", "gaussian:1:1"]) == EXIT_INVALID_ARGUMENT


def test_gap_csv_dump():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "gap.csv")
        assert cli(["gap", "gaussian:1:1", "--mu", "0.3", "--format", "csv", "--out", out]) == EXIT_OK
        frame = pd.read_csv(out)
    assert list(frame.columns) == ["mu", "p", "delta", "E"]
    assert (frame["delta"] > 0.0).all()
    assert (frame["E"] >= frame["delta"]).all()
    assert (frame["p"].diff().dropna() > 0).all()


def test_tc_json_carries_error_bar():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "tc.json")
        assert cli(["tc", "gaussian:1:1", "--mu", "0.1", "--out", out]) == EXIT_OK
        data = read_json(out)
    entry = data["results"][0]
    assert entry["converged"] is True
    assert entry["lambda_min_error"] >= 0.0
    assert len(entry["margin_trace"]) == len(entry["lambda_min_trace"])


def test_grid_dump():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "grid.csv")
        assert cli(["grid-dump", "--mu", "0.5", "--inner-scale", "1e-4", "--out", out]) == EXIT_OK
        frame = pd.read_csv(out)
    assert list(frame.columns) == ["node", "weight", "s", "tag"]
    assert (frame["node"].diff().dropna() > 0).all()


def test_trend_helper():
    assert trend_decreasing([5.0, 3.0, 2.0, 1.0])
    assert not trend_decreasing([1.0, 2.0, 1.5])
    assert not trend_decreasing([2.0, float("nan"), 1.0])
    assert not trend_decreasing([1.0])
    # gaps already below resolution do not have to keep shrinking
    assert trend_decreasing([3.29e-7, 4.68e-7, 1.18e-7], floor=1e-6)
    assert not trend_decreasing([3.0e-5, 4.0e-5, 1.0e-5], floor=1e-6)


def main():
    print("--- Starting CLI Test Suite ---")
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for name, fn in tests:
        print(f"\n--- {name} ---")
        fn()
        print("ok")
    print("\n--- All CLI tests passed ---")


if __name__ == "__main__":
    main()
