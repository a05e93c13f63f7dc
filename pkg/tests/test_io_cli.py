import json
import math
import os

import numpy as np
import pytest

import lpcoreset as lc
from lpcoreset.cli import run_cli
from lpcoreset.errors import MatrixParseError
from lpcoreset.io import (
    emit_report,
    generate_instance,
    json_dumps,
    load_matrix,
    load_vector,
    save_matrix_csv,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def canonical(report_text):
    """Parse report JSON and re-serialize without the timing fields."""
    doc = json.loads(report_text)
    doc.pop("timings_ms", None)
    return json_dumps(doc)


class TestCsv:
    def test_basic(self, tmp_path):
        M = load_matrix(write(tmp_path, "m.csv", "1,2\n3,4\n"))
        np.testing.assert_array_equal(M, [[1.0, 2.0], [3.0, 4.0]])

    def test_header_detection(self, tmp_path):
        M = load_matrix(write(tmp_path, "m.csv", "colA,colB\n1,2\n3,4\n"))
        np.testing.assert_array_equal(M, [[1.0, 2.0], [3.0, 4.0]])

    def test_ragged_row_reports_line(self, tmp_path):
        with pytest.raises(MatrixParseError) as err:
            load_matrix(write(tmp_path, "m.csv", "1,2\n3,4,5\n"))
        assert err.value.line == 2

    def test_non_numeric_cell_reports_line(self, tmp_path):
        with pytest.raises(MatrixParseError) as err:
            load_matrix(write(tmp_path, "m.csv", "1,2\n3,oops\n"))
        assert err.value.line == 2

    def test_empty_file(self, tmp_path):
        with pytest.raises(MatrixParseError):
            load_matrix(write(tmp_path, "m.csv", ""))

    def test_roundtrip_entrywise(self, tmp_path, rng):
        M = rng.standard_normal((7, 3)) * 10.0 ** rng.integers(-8, 8, (7, 3))
        path = str(tmp_path / "round.csv")
        save_matrix_csv(M, path)
        M2 = load_matrix(path)
        np.testing.assert_array_equal(M, M2)
        save_matrix_csv(M2, path + ".again")
        np.testing.assert_array_equal(load_matrix(path + ".again"), M)

    def test_mm_to_csv_roundtrip(self, tmp_path):
        text = (
            "%%MatrixMarket matrix coordinate real general\n"
            "2 3 3\n1 2 0.125\n2 1 -7.5\n2 3 3.25\n"
        )
        M = load_matrix(write(tmp_path, "m.mtx", text))
        out = str(tmp_path / "m.csv")
        save_matrix_csv(M, out)
        np.testing.assert_array_equal(load_matrix(out), M)


class TestMatrixMarket:
    def test_array_column_major(self, tmp_path):
        text = "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n"
        M = load_matrix(write(tmp_path, "m.mtx", text))
        np.testing.assert_array_equal(M, [[1.0, 3.0], [2.0, 4.0]])

    def test_array_single_column(self, tmp_path):
        text = "%%MatrixMarket matrix array real general\n% a comment\n2 1\n5\n6\n"
        M = load_matrix(write(tmp_path, "m.mtx", text))
        np.testing.assert_array_equal(M, [[5.0], [6.0]])

    def test_coordinate_duplicates_summed(self, tmp_path):
        text = (
            "%%MatrixMarket matrix coordinate real general\n"
            "2 2 3\n1 1 1.5\n1 1 2.5\n2 2 -1\n"
        )
        M = load_matrix(write(tmp_path, "m.mtx", text))
        np.testing.assert_array_equal(M, [[4.0, 0.0], [0.0, -1.0]])

    def test_symmetric_rejected(self, tmp_path):
        text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 3\n"
        with pytest.raises(MatrixParseError) as err:
            load_matrix(write(tmp_path, "m.mtx", text))
        assert "symmetry" in str(err.value)

    def test_complex_rejected(self, tmp_path):
        text = "%%MatrixMarket matrix array complex general\n1 1\n1 0\n"
        with pytest.raises(MatrixParseError):
            load_matrix(write(tmp_path, "m.mtx", text))

    def test_wrong_entry_count(self, tmp_path):
        text = "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n"
        with pytest.raises(MatrixParseError):
            load_matrix(write(tmp_path, "m.mtx", text))

    def test_out_of_bounds_index(self, tmp_path):
        text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n"
        with pytest.raises(MatrixParseError) as err:
            load_matrix(write(tmp_path, "m.mtx", text))
        assert err.value.line == 3

    def test_declared_layout_checked(self, tmp_path):
        text = "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.0\n"
        path = write(tmp_path, "m.mtx", text)
        np.testing.assert_array_equal(
            load_matrix(path, fmt="matrix-market-coordinate"), [[2.0]]
        )
        with pytest.raises(MatrixParseError):
            load_matrix(path, fmt="matrix-market-array")


class TestVectors:
    def test_column(self, tmp_path):
        v = load_vector(write(tmp_path, "v.csv", "1\n2\n3\n"))
        np.testing.assert_array_equal(v, [1.0, 2.0, 3.0])

    def test_matrix_rejected(self, tmp_path):
        with pytest.raises(MatrixParseError):
            load_vector(write(tmp_path, "v.csv", "1,2\n3,4\n"))


class TestGenerate:
    def test_deterministic_bytes(self, tmp_path):
        d1 = tmp_path / "a"
        d2 = tmp_path / "b"
        for out in (d1, d2):
            generate_instance(50, 3, 1.5, "sparse-gross", 0.1, 7, str(out))
        for name in ("A.csv", "b.csv", "meta.json"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_corrupted_count_flagged(self, tmp_path):
        _, _, meta_path = generate_instance(
            200, 2, 1.0, "sparse-gross", 0.1, 3, str(tmp_path / "g")
        )
        meta = json.loads(open(meta_path).read())
        assert len(meta["corrupted_rows"]) == 20
        assert meta["x_star"] == [1.0, 1.0]

    def test_files_load_consistently(self, tmp_path):
        a_path, b_path, _ = generate_instance(
            40, 2, 2.0, "gaussian", 0.0, 1, str(tmp_path / "g")
        )
        A = load_matrix(a_path)
        b = load_vector(b_path)
        assert A.shape == (40, 2) and b.shape == (40,)


class TestReportJson:
    @pytest.fixture
    def report(self):
        inst = lc.reference_instance(n=120, d=2, p=1.5, seed=3)
        cfg = lc.SamplerConfig(p=1.5, d=2, epsilon=0.1, r1_scale=1e-4, r2_scale=1e-4)
        return lc.two_stage_solve(inst, cfg, seed=5, compute_exact=True)

    def test_roundtrip_exact(self, report):
        doc = json.loads(emit_report(report))
        assert doc["Z_exact"] == report.Z_exact
        assert doc["approx_ratio"] == report.approx_ratio
        assert doc["stage1"]["objective_full"] == report.stage1.full_objective
        assert doc["stage2"]["objective_sampled"] == report.stage2.sampled_objective
        assert doc["stage2"]["coreset_indices"] == [
            int(i) for i in report.coreset_indices
        ]
        np.testing.assert_array_equal(doc["stage2"]["scales"], report.coreset_scales)

    def test_seventeen_digit_floats_roundtrip(self):
        vals = [0.1, 1 / 3, math.pi, 1e-300, 123456.789]
        text = json_dumps({"vals": vals})
        assert json.loads(text)["vals"] == vals

    def test_ratio_omitted_without_exact(self):
        inst = lc.reference_instance(n=120, d=2, p=1.5, seed=3)
        cfg = lc.SamplerConfig(p=1.5, d=2, epsilon=0.1, r1_scale=1e-4, r2_scale=1e-4)
        rep = lc.two_stage_solve(inst, cfg, seed=5, compute_exact=False)
        doc = json.loads(emit_report(rep))
        assert "Z_exact" not in doc and "approx_ratio" not in doc

    def test_failed_report_has_status(self, rng):
        A = rng.standard_normal((40, 3))
        inst = lc.RegressionInstance(A=A, b=rng.standard_normal(40), p=2.0)
        cfg = lc.SamplerConfig(p=2.0, d=3, r1_scale=1e-15, r2_scale=1e-15)
        rep = lc.two_stage_solve(inst, cfg, seed=0)
        doc = json.loads(emit_report(rep))
        assert doc["status"] == "failed"
        assert "error" in doc

    def test_fixed_field_order(self, report):
        doc = json.loads(emit_report(report))
        assert list(doc)[:6] == ["n", "m", "d", "p", "epsilon", "seed"]
        assert list(doc["stage1"]) == [
            "expected_count",
            "actual_count",
            "objective_full",
            "objective_sampled",
        ]


@pytest.fixture
def instance_files(tmp_path):
    generate_instance(150, 2, 1.5, "sparse-gross", 0.1, 11, str(tmp_path))
    return tmp_path


class TestCli:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert run_cli(["solve", "--nope"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_missing_subcommand(self, capsys):
        assert run_cli([]) == 1

    def test_missing_file(self, tmp_path, capsys):
        code = run_cli(
            ["solve", "--input", str(tmp_path / "nope.csv"), "--rhs", "x", "--p", "2"]
        )
        assert code == 1

    def test_epsilon_out_of_cli_range(self, instance_files, capsys):
        code = run_cli(
            [
                "solve",
                "--input", str(instance_files / "A.csv"),
                "--rhs", str(instance_files / "b.csv"),
                "--p", "1.5",
                "--epsilon", "0.2",
            ]
        )
        assert code == 1

    def test_gen_then_solve_exact(self, tmp_path, capsys):
        assert run_cli(["gen", "--n", "80", "--d", "2", "--seed", "4",
                        "--out", str(tmp_path / "inst")]) == 0
        out = str(tmp_path / "report.json")
        code = run_cli(
            [
                "solve",
                "--input", str(tmp_path / "inst" / "A.csv"),
                "--rhs", str(tmp_path / "inst" / "b.csv"),
                "--p", "1.5",
                "--epsilon", "0.1",
                "--seed", "42",
                "--r1-scale", "1e-4",
                "--r2-scale", "1e-4",
                "--exact",
                "--output", out,
            ]
        )
        assert code == 0
        doc = json.loads(open(out).read())
        assert doc["approx_ratio"] >= 1.0 - 1e-10

    def test_full_sampling_ratio_one(self, instance_files, tmp_path):
        out = str(tmp_path / "full.json")
        code = run_cli(
            [
                "solve",
                "--input", str(instance_files / "A.csv"),
                "--rhs", str(instance_files / "b.csv"),
                "--p", "1.5",
                "--seed", "1",
                "--r1-scale", "1e9",
                "--r2-scale", "1e9",
                "--exact",
                "--output", out,
            ]
        )
        assert code == 0
        doc = json.loads(open(out).read())
        assert doc["approx_ratio"] <= 1.0 + 1e-6

    def test_stage1_only(self, instance_files, tmp_path):
        out = str(tmp_path / "s1.json")
        code = run_cli(
            [
                "solve",
                "--input", str(instance_files / "A.csv"),
                "--rhs", str(instance_files / "b.csv"),
                "--p", "1.5",
                "--stages", "1",
                "--r1-scale", "1e-4",
                "--output", out,
            ]
        )
        assert code == 0
        doc = json.loads(open(out).read())
        assert "stage2" not in doc
        assert "coreset_indices" in doc["stage1"]

    def test_solve_determinism(self, instance_files, tmp_path):
        args = [
            "solve",
            "--input", str(instance_files / "A.csv"),
            "--rhs", str(instance_files / "b.csv"),
            "--p", "1.5",
            "--seed", "9",
            "--r1-scale", "1e-4",
            "--r2-scale", "1e-4",
            "--exact",
        ]
        out1, out2 = str(tmp_path / "r1.json"), str(tmp_path / "r2.json")
        assert run_cli(args + ["--output", out1]) == 0
        assert run_cli(args + ["--output", out2]) == 0
        assert canonical(open(out1).read()) == canonical(open(out2).read())

    def test_weighted_variant(self, instance_files, tmp_path):
        w_path = str(tmp_path / "w.csv")
        save_matrix_csv(np.ones((150, 1)), w_path)
        out = str(tmp_path / "w.json")
        code = run_cli(
            [
                "solve",
                "--input", str(instance_files / "A.csv"),
                "--rhs", str(instance_files / "b.csv"),
                "--p", "1.5",
                "--variant", "weighted",
                "--weights", w_path,
                "--r1-scale", "1e-4",
                "--r2-scale", "1e-4",
                "--output", out,
            ]
        )
        assert code == 0

    def test_oracle_and_augmented_variants(self, instance_files, tmp_path):
        for variant in ("oracle", "augmented"):
            out = str(tmp_path / f"{variant}.json")
            code = run_cli(
                [
                    "solve",
                    "--input", str(instance_files / "A.csv"),
                    "--rhs", str(instance_files / "b.csv"),
                    "--p", "1.5",
                    "--variant", variant,
                    "--r2-scale", "2e-4",
                    "--exact",
                    "--output", out,
                ]
            )
            assert code == 0
            doc = json.loads(open(out).read())
            assert doc["config"]["variant"] == variant
            assert doc["approx_ratio"] >= 1.0 - 1e-10

    def test_certify_output(self, instance_files, capsys):
        code = run_cli(
            ["certify", "--input", str(instance_files / "A.csv"), "--p", "1"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "certificates_hold = true" in out

    def test_bench_writes_statistics(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LPC_THREADS", "2")
        out = str(tmp_path / "bench")
        code = run_cli(
            [
                "bench",
                "--seeds", "4",
                "--p", "1,2",
                "--n", "150",
                "--d", "2",
                "--epsilon", "0.1",
                "--r1-scale", "1e-3",
                "--r2-scale", "1e-3",
                "--out", out,
            ]
        )
        assert code == 0
        agg = json.loads(open(os.path.join(out, "bench.json")).read())
        for key in ("p=1", "p=2"):
            freqs = agg["results"][key]["statistics"]["frequencies"]
            assert set(freqs) == set("abcde")
            assert len(agg["results"][key]["ratio_sweep"]) == 3
        assert os.path.exists(os.path.join(out, "stats_p1.json"))

    def test_bench_determinism(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LPC_THREADS", "2")
        outs = []
        for name in ("b1", "b2"):
            out = str(tmp_path / name)
            assert run_cli(
                [
                    "bench",
                    "--seeds", "3",
                    "--p", "1.5",
                    "--n", "120",
                    "--d", "2",
                    "--epsilon", "0.1",
                    "--r1-scale", "1e-3",
                    "--r2-scale", "1e-3",
                    "--out", out,
                ]
            ) == 0
            outs.append(open(os.path.join(out, "bench.json")).read())
        assert outs[0] == outs[1]
