"""End-to-end CLI tests: every subcommand through ``main(argv)`` in-process."""

from __future__ import annotations

import json

import numpy as np
import pytest

from artifact import (
    HypothesisShape,
    StatisticVector,
    directional_pvalues,
    NullDensitySpec,
    read_pvalues_csv,
)
from artifact.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def stats_csv(tmp_path):
    """Statistics file with margin column: the control worked example."""
    path = tmp_path / "stats.csv"
    rows = ["index,statistic,margin"]
    for j, t in enumerate([5.0, 4.0, 3.0, -3.5]):
        rows.append(f"{j},{t},0.0")
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture
def bare_stats_csv(tmp_path):
    """Statistics file without a margin column."""
    path = tmp_path / "bare.csv"
    path.write_text("index,statistic\n0,5.0\n1,4.0\n2,3.0\n3,-3.5\n")
    return path


@pytest.fixture
def grouped_csv(tmp_path):
    path = tmp_path / "grouped.csv"
    path.write_text(
        "group,f1,f2\n"
        "treat,0.0,1.0\n"
        "treat,0.0,1.0\n"
        "ctrl,-2.0,0.0\n"
        "ctrl,-2.0,0.0\n"
    )
    return path


@pytest.fixture
def single_column_csv(tmp_path):
    path = tmp_path / "ones.csv"
    path.write_text("x\n1.0\n1.0\n1.0\n")
    return path


# --- estimate ---------------------------------------------------------------


class TestEstimate:
    def test_table_output(self, capsys, stats_csv):
        code, out, err = run(capsys, "estimate", str(stats_csv), "--t", "1")
        assert code == 0 and err == ""
        assert "estimator" in out and "directional" in out
        assert "r          3" in out
        assert "v_tilde    1" in out
        assert "rejected   0 1 2" in out

    def test_csv_output(self, capsys, stats_csv):
        code, out, _ = run(capsys, "estimate", str(stats_csv), "--t", "1", "--csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "field,value"
        assert "r,3" in lines
        assert "fdp_hat,0.333333" in lines

    def test_t_defaults_to_zero(self, capsys, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("index,statistic\n0,0.5\n1,-0.2\n")
        code, out, _ = run(capsys, "estimate", str(path), "--delta", "0")
        assert code == 0
        assert "r          1" in out
        assert "fdp_hat    1" in out

    def test_json_document(self, capsys, stats_csv, tmp_path):
        out_path = tmp_path / "est.json"
        code, _, _ = run(
            capsys, "estimate", str(stats_csv), "--t", "1", "--out", str(out_path)
        )
        assert code == 0
        payload = json.loads(out_path.read_text())
        assert set(payload) == {
            "version", "command", "seed", "config_hash", "config", "result",
        }
        assert payload["command"] == "estimate"
        assert payload["seed"] is None
        assert len(payload["config_hash"]) == 12
        result = payload["result"]
        assert result["r"] == 3 and result["v_tilde"] == 1
        assert result["rejected"] == [0, 1, 2]
        assert result["requires_independence"] is False
        assert result["randomized"] is False

    def test_delta_overrides_margin_column(self, capsys, stats_csv):
        # with delta=2.5 only 5 and 4 clear t=1
        code, out, _ = run(
            capsys, "estimate", str(stats_csv), "--t", "1", "--delta", "2.5"
        )
        assert code == 0
        assert "rejected   0 1" in out

    def test_missing_margin_is_an_error(self, capsys, bare_stats_csv):
        code, _, err = run(capsys, "estimate", str(bare_stats_csv), "--t", "1")
        assert code == 2
        assert "no margin available" in err and "--delta" in err

    def test_raw_data_needs_delta(self, capsys, grouped_csv):
        code, _, err = run(capsys, "estimate", str(grouped_csv))
        assert code == 2
        assert "raw data input needs an explicit margin" in err

    def test_two_group_statistics_from_raw_data(self, capsys, grouped_csv, tmp_path):
        out_path = tmp_path / "raw.json"
        code, out, _ = run(
            capsys,
            "estimate", str(grouped_csv),
            "--statistic", "two-group", "--delta", "0", "--t", "1",
            "--out", str(out_path),
        )
        assert code == 0
        # f1: sqrt(2)*(0-(-2)) = 2.83, f2: sqrt(2)*1 = 1.41 -- both above t=1
        assert "rejected   0 1" in out
        payload = json.loads(out_path.read_text())
        assert payload["result"]["rejected_features"] == ["f1", "f2"]

    def test_randomized_with_seed(self, capsys, stats_csv, tmp_path):
        out_path = tmp_path / "rand.json"
        code, out, _ = run(
            capsys,
            "estimate", str(stats_csv),
            "--t", "1", "--randomized", "--seed", "7", "--out", str(out_path),
        )
        assert code == 0
        assert "seed:" not in out  # an explicit seed is not re-announced
        assert "coin" in out
        payload = json.loads(out_path.read_text())
        assert payload["seed"] == 7
        assert payload["result"]["randomized"] is True

    def test_randomized_without_seed_prints_one(self, capsys, stats_csv):
        code, out, _ = run(capsys, "estimate", str(stats_csv), "--randomized")
        assert code == 0
        first = out.splitlines()[0]
        assert first.startswith("seed: ")
        int(first.removeprefix("seed: "))

    def test_randomized_rejects_equivalence(self, capsys, stats_csv):
        code, _, err = run(
            capsys,
            "estimate", str(stats_csv),
            "--shape", "equivalence", "--delta", "2", "--randomized",
        )
        assert code == 2
        assert "directional estimator only" in err

    def test_windowed_equivalence(self, capsys, tmp_path):
        path = tmp_path / "eq.csv"
        path.write_text("index,statistic\n0,0.2\n1,-0.3\n2,2.6\n3,7.0\n")
        args = ["estimate", str(path), "--shape", "equivalence",
                "--delta", "2", "--t", "0.5"]
        code, plain, _ = run(capsys, *args)
        assert code == 0 and "v_tilde    2" in plain
        code, windowed, _ = run(capsys, *args, "--windowed")
        assert code == 0
        assert "equivalence-windowed" in windowed
        assert "v_tilde    1" in windowed

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "estimate", str(tmp_path / "nope.csv"))
        assert code == 2 and "error:" in err


# --- control ----------------------------------------------------------------


class TestControl:
    def test_worked_example(self, capsys, stats_csv):
        code, out, _ = run(capsys, "control", str(stats_csv), "--gamma", "0.4")
        assert code == 0
        assert "s         3" in out
        assert "s_plus    3.5" in out
        assert "rejected  0 1" in out

    def test_never_exceeded_reads_clearly(self, capsys, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("index,statistic\n0,5.0\n1,6.0\n")
        code, out, _ = run(capsys, "control", str(path), "--gamma", "0.4", "--delta", "0")
        assert code == 0
        assert "never-exceeded" in out
        assert "s_plus    0" in out

    def test_json_document(self, capsys, stats_csv, tmp_path):
        out_path = tmp_path / "ctl.json"
        code, _, _ = run(
            capsys, "control", str(stats_csv), "--gamma", "0.4", "--out", str(out_path)
        )
        assert code == 0
        payload = json.loads(out_path.read_text())
        assert payload["command"] == "control"
        assert payload["seed"] is None
        assert payload["result"]["s"] == 3.0
        assert payload["result"]["s_plus"] == 3.5
        assert payload["result"]["rejected"] == [0, 1]

    def test_gamma_is_required(self, capsys, stats_csv):
        with pytest.raises(SystemExit) as exc:
            main(["control", str(stats_csv)])
        assert exc.value.code == 2

    def test_bad_gamma(self, capsys, stats_csv):
        code, _, err = run(capsys, "control", str(stats_csv), "--gamma", "1.0")
        assert code == 2 and "gamma" in err


# --- pvalues ----------------------------------------------------------------


class TestPvalues:
    @pytest.fixture
    def pair_csv(self, tmp_path):
        path = tmp_path / "pair.csv"
        path.write_text("index,statistic\n0,0.0\n1,2.0\n")
        return path

    def test_table_output(self, capsys, pair_csv):
        code, out, _ = run(capsys, "pvalues", str(pair_csv), "--delta", "0")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].split() == ["index", "pvalue"]
        assert lines[1].split() == ["0", "0.5"]
        assert lines[2].split() == ["1", "0.02275013195"]

    def test_csv_output_full_precision(self, capsys, pair_csv):
        code, out, _ = run(capsys, "pvalues", str(pair_csv), "--delta", "0", "--csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "index,pvalue"
        assert float(lines[2].split(",")[1]) == 0.022750131948179195

    def test_out_file_round_trips(self, capsys, pair_csv, tmp_path):
        out_path = tmp_path / "p.csv"
        code, out, _ = run(
            capsys, "pvalues", str(pair_csv), "--delta", "0", "--out", str(out_path)
        )
        assert code == 0
        assert f"wrote 2 p-values to {out_path}" in out
        pv = read_pvalues_csv(out_path)
        sv = StatisticVector(np.array([0.0, 2.0]), 0.0, HypothesisShape.DIRECTIONAL)
        expected = directional_pvalues(sv, NullDensitySpec.standard_normal())
        np.testing.assert_array_equal(pv, expected.values)

    def test_alternative_nulls(self, capsys, pair_csv):
        code, out, _ = run(
            capsys, "pvalues", str(pair_csv), "--delta", "0", "--null", "scaled-normal:2"
        )
        assert code == 0
        # T=2 under sigma=2 is one standard unit out
        assert "0.1586552539" in out
        code, _, _ = run(
            capsys, "pvalues", str(pair_csv), "--delta", "0", "--null", "student-t:5"
        )
        assert code == 0

    def test_unknown_null(self, capsys, pair_csv):
        code, _, err = run(
            capsys, "pvalues", str(pair_csv), "--delta", "0", "--null", "cauchy"
        )
        assert code == 2
        assert "unknown null density" in err

    def test_equivalence_shape(self, capsys, pair_csv):
        code, out, _ = run(
            capsys, "pvalues", str(pair_csv), "--shape", "equivalence", "--delta", "2"
        )
        assert code == 0
        # |T| = delta sits exactly on the band edge
        assert lines_value(out, "1") == "0.5"


def lines_value(out: str, index: str) -> str:
    for line in out.strip().splitlines()[1:]:
        fields = line.split()
        if fields[0] == index:
            return fields[1]
    raise AssertionError(f"index {index} not in output")


# --- simulate ---------------------------------------------------------------


class TestSimulate:
    @pytest.fixture
    def spec_path(self, tmp_path):
        spec = {
            "n": 5, "m": 20, "pi0": 0.5, "rho": 0.0, "d": 1.5,
            "methods": ["novel", "BH"], "t": 1.0, "gamma": 0.25,
            "replicates": 20, "seed": 99,
        }
        path = tmp_path / "study.json"
        path.write_text(json.dumps(spec))
        return path

    def test_table_and_artifacts(self, capsys, spec_path, tmp_path):
        out_dir = tmp_path / "results"
        out_dir.mkdir()
        code, out, _ = run(
            capsys, "simulate", "--spec", str(spec_path), "--out-dir", str(out_dir)
        )
        assert code == 0
        assert "mean_fdp_estimate" in out
        assert (out_dir / "metrics.csv").exists()
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["command"] == "simulate"
        assert summary["seed"] == 99
        assert summary["study"]["m"] == 20
        assert len(summary["rows"]) > 0

    def test_csv_mode(self, capsys, spec_path):
        code, out, _ = run(capsys, "simulate", "--spec", str(spec_path), "--csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "cell_id,pi0,rho,d,method,metric,value,se"
        assert all(line.startswith("0,") for line in lines[1:])

    def test_runs_are_reproducible(self, capsys, spec_path, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        a.mkdir(), b.mkdir()
        run(capsys, "simulate", "--spec", str(spec_path), "--out-dir", str(a), "--threads", "1")
        run(capsys, "simulate", "--spec", str(spec_path), "--out-dir", str(b), "--threads", "2")
        assert (a / "metrics.csv").read_text() == (b / "metrics.csv").read_text()

    def test_seed_override(self, capsys, spec_path, tmp_path):
        out_dir = tmp_path / "o"
        out_dir.mkdir()
        code, _, _ = run(
            capsys, "simulate", "--spec", str(spec_path),
            "--seed", "123", "--out-dir", str(out_dir),
        )
        assert code == 0
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["seed"] == 123

    def test_infeasible_spec_exits_3(self, capsys, tmp_path):
        spec = {
            "n": 13, "m": 10, "pi0": 0.5, "rho": 0.0, "d": 1.0,
            "methods": ["SAM-full"], "t": 1.0, "gamma": 0.25,
        }
        path = tmp_path / "big.json"
        path.write_text(json.dumps(spec))
        code, _, err = run(capsys, "simulate", "--spec", str(path))
        assert code == 3
        assert "use SAM-2 or reduce n" in err

    def test_bad_spec_exits_2(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"typo": 1}')
        code, _, err = run(capsys, "simulate", "--spec", str(path))
        assert code == 2
        assert "unknown study spec keys" in err or "missing required keys" in err


# --- verify-ct --------------------------------------------------------------


class TestVerifyCt:
    def test_single_family(self, capsys, tmp_path):
        out_path = tmp_path / "report.json"
        code, out, _ = run(
            capsys,
            "verify-ct", "--family", "directional-basic",
            "--m", "4", "--instances", "5", "--seed", "1",
            "--out", str(out_path),
        )
        assert code == 0
        assert "directional-basic: 5 instances" in out
        assert "0 mismatches" in out
        payload = json.loads(out_path.read_text())
        assert payload["command"] == "verify-ct"
        assert payload["result"]["total_mismatches"] == 0
        assert len(payload["result"]["reports"]) == 1

    def test_all_families(self, capsys):
        code, out, _ = run(
            capsys, "verify-ct", "--m", "4", "--instances", "3", "--seed", "2"
        )
        assert code == 0
        for kind in (
            "directional-basic", "directional-randomized",
            "equivalence-basic", "equivalence-windowed",
        ):
            assert f"{kind}: 3 instances" in out

    def test_unseeded_run_announces_seed(self, capsys):
        code, out, _ = run(
            capsys, "verify-ct", "--family", "equivalence-basic",
            "--m", "3", "--instances", "2",
        )
        assert code == 0
        assert out.startswith("seed: ")

    def test_m_cap_is_a_usage_error(self, capsys):
        code, _, err = run(
            capsys, "verify-ct", "--m", "13", "--instances", "1", "--seed", "0"
        )
        assert code == 2
        assert "max_m" in err


# --- exact-test -------------------------------------------------------------


class TestExactTest:
    def test_sign_flip(self, capsys, single_column_csv, tmp_path):
        out_path = tmp_path / "sf.json"
        code, out, _ = run(
            capsys,
            "exact-test", str(single_column_csv),
            "--test", "sign-flip", "--alpha", "0.25",
            "--out", str(out_path),
        )
        assert code == 0
        assert "reject          true" in out
        assert "n_transforms    8" in out
        assert "order_index     6" in out
        payload = json.loads(out_path.read_text())
        assert payload["result"]["reject"] is True
        assert payload["result"]["t_observed"] == pytest.approx(3 / np.sqrt(3))

    def test_sign_flip_csv_mode(self, capsys, single_column_csv):
        code, out, _ = run(
            capsys,
            "exact-test", str(single_column_csv),
            "--test", "sign-flip", "--alpha", "0.25", "--csv",
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "field,value"
        assert "reject,true" in lines

    def test_permutation(self, capsys, tmp_path):
        path = tmp_path / "perm.csv"
        path.write_text("group,y\na,10.0\na,10.0\nb,0.0\nb,0.0\n")
        code, out, _ = run(
            capsys,
            "exact-test", str(path),
            "--test", "permutation", "--alpha", "0.16666666666666666",
        )
        assert code == 0
        assert "reject          true" in out
        assert "n_transforms    6" in out

    def test_feature_selection(self, capsys, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text("a,b\n1.0,-1.0\n1.0,-1.0\n1.0,-1.0\n")
        code, out, _ = run(
            capsys, "exact-test", str(path), "--test", "sign-flip",
            "--alpha", "0.25", "--feature", "b",
        )
        assert code == 0
        assert "feature         b" in out
        assert "reject          false" in out

    def test_unknown_feature(self, capsys, single_column_csv):
        code, _, err = run(
            capsys, "exact-test", str(single_column_csv),
            "--test", "sign-flip", "--alpha", "0.25", "--feature", "zzz",
        )
        assert code == 2
        assert "not found" in err

    def test_sign_flip_rejects_grouped_data(self, capsys, grouped_csv):
        code, _, err = run(
            capsys, "exact-test", str(grouped_csv),
            "--test", "sign-flip", "--alpha", "0.25",
        )
        assert code == 2
        assert "ungrouped" in err

    def test_permutation_needs_groups(self, capsys, single_column_csv):
        code, _, err = run(
            capsys, "exact-test", str(single_column_csv),
            "--test", "permutation", "--alpha", "0.25",
        )
        assert code == 2
        assert "group column" in err

    def test_enumeration_cap_exits_3(self, capsys, tmp_path):
        path = tmp_path / "big.csv"
        path.write_text("x\n" + "\n".join(["1.0"] * 21) + "\n")
        code, _, err = run(
            capsys, "exact-test", str(path), "--test", "sign-flip", "--alpha", "0.05"
        )
        assert code == 3


# --- global behaviour -------------------------------------------------------


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == "artifact 0.1.0"


def test_missing_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
