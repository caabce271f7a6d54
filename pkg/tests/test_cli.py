"""Command-line client tests, exercised in-process through main()."""

import json

import pytest

from datd import __version__
from datd.cli import main
from datd.harness import (
    CREDIBILITY_COLUMNS,
    PER_TASK_COLUMNS,
    SWEEP_COLUMNS,
    WEIGHT_COLUMNS,
)

RUN_ARGS = ["run", "--seed", "7", "--tasks", "6", "--scheme", "both"]


def read_lines(path):
    return path.read_text(encoding="utf-8").splitlines()


class TestRunCommand:
    def test_writes_tables_twins_and_manifest(self, tmp_path, capsys):
        code = main(RUN_ARGS + ["--out", str(tmp_path)])
        assert code == 0
        names = {p.name for p in tmp_path.iterdir()}
        assert names == {
            "per_task.csv",
            "per_task.dat",
            "credibility.csv",
            "credibility.dat",
            "weights.csv",
            "weights.dat",
            "manifest.json",
        }
        out = capsys.readouterr().out
        assert "datd:" in out and "baseline:" in out

    def test_csv_headers_match_pinned_schemas(self, tmp_path):
        main(RUN_ARGS + ["--out", str(tmp_path)])
        assert read_lines(tmp_path / "per_task.csv")[0] == ",".join(PER_TASK_COLUMNS)
        assert read_lines(tmp_path / "credibility.csv")[0] == ",".join(
            CREDIBILITY_COLUMNS
        )
        assert read_lines(tmp_path / "weights.csv")[0] == ",".join(WEIGHT_COLUMNS)

    def test_per_task_row_count_and_lf_endings(self, tmp_path):
        main(RUN_ARGS + ["--out", str(tmp_path)])
        raw = (tmp_path / "per_task.csv").read_bytes()
        assert b"\r" not in raw
        assert len(read_lines(tmp_path / "per_task.csv")) == 1 + 6

    def test_dat_twin_mirrors_csv(self, tmp_path):
        main(RUN_ARGS + ["--out", str(tmp_path)])
        dat = read_lines(tmp_path / "per_task.dat")
        assert dat[0] == "# " + " ".join(PER_TASK_COLUMNS)
        assert len(dat) == len(read_lines(tmp_path / "per_task.csv"))
        assert all(len(line.split()) == len(PER_TASK_COLUMNS) for line in dat[1:])

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        main(RUN_ARGS + ["--out", str(first)])
        main(RUN_ARGS + ["--out", str(second)])
        for stem in ("per_task", "credibility", "weights"):
            assert (first / f"{stem}.csv").read_bytes() == (
                second / f"{stem}.csv"
            ).read_bytes()
            assert (first / f"{stem}.dat").read_bytes() == (
                second / f"{stem}.dat"
            ).read_bytes()

    def test_manifest_records_resolved_run(self, tmp_path):
        main(RUN_ARGS + ["--out", str(tmp_path)])
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["tool"] == "datd"
        assert manifest["version"] == __version__
        assert manifest["command"] == "run"
        assert manifest["scheme"] == "both"
        assert manifest["duration_seconds"] > 0
        assert manifest["config"]["seed"] == 7
        assert manifest["config"]["n_tasks"] == 6
        assert manifest["config"]["alpha"] == 0.4

    def test_flags_override_config_file(self, tmp_path):
        config_path = tmp_path / "scenario.cfg"
        config_path.write_text("seed = 11\nn_tasks = 5\ngamma = 0.3\n")
        code = main(
            [
                "run",
                "--config",
                str(config_path),
                "--gamma",
                "0.7",
                "--out",
                str(tmp_path / "out"),
            ]
        )
        assert code == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 11
        assert manifest["config"]["n_tasks"] == 5
        assert manifest["config"]["gamma"] == 0.7

    def test_out_defaults_to_environment_variable(self, tmp_path, monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv("DATD_OUT_DIR", str(target))
        code = main(["run", "--seed", "2", "--tasks", "4"])
        assert code == 0
        assert (target / "per_task.csv").exists()

    def test_single_scheme_leaves_other_cells_empty(self, tmp_path):
        main(
            ["run", "--seed", "4", "--tasks", "4", "--scheme", "datd", "--out", str(tmp_path)]
        )
        header, first_row = read_lines(tmp_path / "per_task.csv")[:2]
        cells = dict(zip(header.split(","), first_row.split(",")))
        assert cells["estimate_baseline"] == ""
        assert cells["estimate_datd"] != ""
        dat_row = read_lines(tmp_path / "per_task.dat")[1].split()
        baseline_index = PER_TASK_COLUMNS.index("estimate_baseline")
        assert dat_row[baseline_index] == "nan"

    def test_booleans_render_lowercase(self, tmp_path):
        main(["run", "--seed", "1", "--tasks", "8", "--tau", "1.0", "--out", str(tmp_path)])
        rows = read_lines(tmp_path / "per_task.csv")[1:]
        assert all(",true," in row for row in rows)


class TestExitCodes:
    def test_missing_seed_is_usage_error(self, tmp_path, capsys):
        code = main(["run", "--tasks", "4", "--out", str(tmp_path)])
        assert code == 2
        assert "seed" in capsys.readouterr().err

    def test_rejected_config_value_is_usage_error(self, tmp_path, capsys):
        code = main(
            ["run", "--seed", "1", "--alpha", "1.5", "--tasks", "4", "--out", str(tmp_path)]
        )
        assert code == 2
        assert "alpha" in capsys.readouterr().err

    def test_unreadable_config_file_is_io_failure(self, tmp_path):
        code = main(
            ["run", "--seed", "1", "--config", str(tmp_path / "missing.cfg")]
        )
        assert code == 1

    def test_malformed_config_file_is_usage_error(self, tmp_path, capsys):
        config_path = tmp_path / "bad.cfg"
        config_path.write_text("seed = 1\nnot_a_key = 3\n")
        code = main(["run", "--config", str(config_path), "--out", str(tmp_path)])
        assert code == 2
        assert "not_a_key" in capsys.readouterr().err

    def test_unknown_flag_value_exits_two(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["run", "--seed", "1", "--scheme", "bogus"])
        assert excinfo.value.code == 2

    def test_missing_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_empty_sweep_values_exit_two(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(
                [
                    "sweep",
                    "--seed",
                    "1",
                    "--param",
                    "gamma",
                    "--values",
                    "",
                    "--out",
                    str(tmp_path),
                ]
            )
        assert excinfo.value.code == 2

    def test_unknown_sweep_param_exits_two(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(
                [
                    "sweep",
                    "--seed",
                    "1",
                    "--param",
                    "seed",
                    "--values",
                    "1,2",
                    "--out",
                    str(tmp_path),
                ]
            )
        assert excinfo.value.code == 2


class TestSweepCommand:
    def test_one_row_per_value_and_scheme(self, tmp_path):
        code = main(
            [
                "sweep",
                "--seed",
                "3",
                "--tasks",
                "5",
                "--param",
                "gamma",
                "--values",
                "0.2,0.8",
                "--seeds",
                "2",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 0
        lines = read_lines(tmp_path / "sweep.csv")
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert len(lines) == 1 + 2 * 2
        schemes = [line.split(",")[2] for line in lines[1:]]
        assert schemes == ["datd", "baseline", "datd", "baseline"]
        assert (tmp_path / "sweep.dat").exists()

    def test_manifest_records_sweep_settings(self, tmp_path):
        main(
            [
                "sweep",
                "--seed",
                "3",
                "--tasks",
                "5",
                "--param",
                "omega",
                "--values",
                "0.5,1.0",
                "--seeds",
                "2",
                "--out",
                str(tmp_path),
            ]
        )
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "sweep"
        assert manifest["sweep"] == {
            "param": "omega",
            "values": [0.5, 1.0],
            "seeds": 2,
        }
        assert manifest["config"]["seed"] == 3


class TestTable2Command:
    def test_prints_all_checks_and_exits_zero(self, capsys):
        code = main(["table2"])
        assert code == 0
        out = capsys.readouterr().out
        lines = [line for line in out.splitlines() if line.endswith("pass")]
        assert len(lines) == 18
        assert "18/18 checks passed" in out
        assert "provisional_truth" in out
        assert "final_truth" in out
