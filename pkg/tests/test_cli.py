"""CLI behavior: exit codes, determinism, emitted file structure."""

import os
import xml.etree.ElementTree as ET

import pytest

from phasetip.cli import main
from phasetip.dataio import write_dataset
from phasetip.simulate import SimConfig, simulate_trial

SMALL_SIM = SimConfig(
    n_experimental=140, n_control=110,
    combo_event_hazard=0.07, switch_hazard=0.05, mono_event_hazard=0.10,
    hr_combo=0.75, hr_mono=0.35,
    accrual_months=18, cutoff_months=40, dropout_hazard=0.004,
)


@pytest.fixture
def small_dataset(tmp_path):
    path = tmp_path / "trial.csv"
    write_dataset(simulate_trial(SMALL_SIM, seed=1), path)
    return str(path)


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["tpa", "--nope"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 1

    def test_no_command_prints_help(self, capsys):
        assert main([]) == 1
        assert "analyze" in capsys.readouterr().err

    def test_missing_input_file_is_data_error(self, tmp_path, capsys):
        assert main(["analyze", "--input", str(tmp_path / "none.csv")]) == 2
        assert "data error" in capsys.readouterr().err

    def test_bad_row_is_data_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "subject_id,arm,pfs_months,event,mono_start_months,cutoff_months,stratum\n"
            "s1,E,10.0,1,12.0,30.0,\n"
        )
        assert main(["analyze", "--input", str(path)]) == 2

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        # complete separation: all control events strictly before experimental
        path = tmp_path / "sep.csv"
        header = "subject_id,arm,pfs_months,event,mono_start_months,cutoff_months,stratum\n"
        rows = [f"c{i},C,{1 + i},1,,60.0,\n" for i in range(4)]
        rows += [f"e{i},E,{30 + i},1,,60.0,\n" for i in range(4)]
        path.write_text(header + "".join(rows))
        assert main(["analyze", "--input", str(path)]) == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_unwritable_output_dir_is_data_error(self, small_dataset, tmp_path):
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory")
        code = main([
            "tpa", "--input", small_dataset, "--effect", "1", "--threshold", "a",
            "--replicates", "1", "--grid-step", "0.2", "--out", str(blocker),
        ])
        assert code == 2

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0


class TestAnalyze:
    def test_report_on_calibrated_defaults(self, tmp_path, capsys):
        path = tmp_path / "default.csv"
        write_dataset(simulate_trial(SimConfig(), seed=6), path)
        assert main(["analyze", "--input", str(path)]) == 0
        out = capsys.readouterr().out
        assert "Experimental arm: n=337" in out
        assert "Control arm: n=172" in out
        hr = float(out.split("Overall HR=")[1].split()[0])
        assert abs(hr - 0.705) < 0.05
        assert "Combination-phase HR=" in out
        assert "Monotherapy-phase HR=" in out

    def test_empty_dataset_errors_downstream(self, tmp_path, capsys):
        path = tmp_path / "empty.csv"
        path.write_text(
            "subject_id,arm,pfs_months,event,mono_start_months,cutoff_months,stratum\n"
        )
        assert main(["analyze", "--input", str(path)]) == 2
        assert "dataset is empty" in capsys.readouterr().err

    def test_no_transitions_flagged_in_report(self, tmp_path, capsys):
        cfg = SimConfig(
            n_experimental=60, n_control=60, switch_hazard=1e-9,
            combo_event_hazard=0.08, accrual_months=6, cutoff_months=30,
        )
        path = tmp_path / "nomono.csv"
        write_dataset(simulate_trial(cfg, seed=2), path)
        assert main(["analyze", "--input", str(path)]) == 0
        assert "not estimable" in capsys.readouterr().out


class TestTpaDeterminism:
    def _run(self, dataset, outdir, threads="1"):
        code = main([
            "tpa", "--input", dataset, "--effect", "2", "--threshold", "a",
            "--replicates", "4", "--seed", "7", "--grid-step", "0.1",
            "--threads", threads, "--out", outdir,
        ])
        assert code == 0
        with open(os.path.join(outdir, "results.csv"), "rb") as fh:
            return fh.read()

    def test_identical_seed_byte_identical_results(self, small_dataset, tmp_path):
        a = self._run(small_dataset, str(tmp_path / "run1"))
        b = self._run(small_dataset, str(tmp_path / "run2"))
        assert a == b

    def test_thread_count_does_not_change_bytes(self, small_dataset, tmp_path):
        a = self._run(small_dataset, str(tmp_path / "t1"), threads="1")
        b = self._run(small_dataset, str(tmp_path / "t4"), threads="4")
        assert a == b

    def test_results_csv_has_published_table_columns(self, small_dataset, tmp_path):
        out = str(tmp_path / "cols")
        self._run(small_dataset, out)
        header = open(os.path.join(out, "results.csv")).readline().strip().split(",")
        for col in ("effect_method", "adjustment_factor_at_tip", "avg_n_events",
                    "hr_at_tip", "p_at_tip"):
            assert col in header


class TestSimulateCommand:
    def test_emits_ingestible_csv(self, tmp_path, capsys):
        out = tmp_path / "sim.csv"
        code = main([
            "simulate", "--out", str(out), "--seed", "3",
            "--n-experimental", "50", "--n-control", "40",
        ])
        assert code == 0
        assert "wrote 90 subjects" in capsys.readouterr().out
        assert main(["analyze", "--input", str(out)]) == 0

    def test_seed_env_fallback(self, tmp_path, monkeypatch):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        monkeypatch.setenv("PHASETIP_SEED", "11")
        assert main(["simulate", "--out", str(out1), "--n-experimental", "30",
                     "--n-control", "30"]) == 0
        monkeypatch.delenv("PHASETIP_SEED")
        assert main(["simulate", "--out", str(out2), "--n-experimental", "30",
                     "--n-control", "30", "--seed", "11"]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_config_file_supplies_defaults_cli_overrides(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed=5\nn-experimental=25\nn_control=20\n")
        out1 = tmp_path / "c1.csv"
        assert main(["simulate", "--out", str(out1), "--config", str(cfg)]) == 0
        assert sum(1 for _ in open(out1)) == 1 + 45
        out2 = tmp_path / "c2.csv"
        assert main(["simulate", "--out", str(out2), "--config", str(cfg),
                     "--n-experimental", "30"]) == 0
        assert sum(1 for _ in open(out2)) == 1 + 50


class TestCurveCommand:
    def test_curve_csv_monotone_grid_and_svg_crossing(self, small_dataset, tmp_path):
        out = str(tmp_path / "curves")
        code = main([
            "curve", "--input", small_dataset, "--effect", "2", "--threshold", "a",
            "--seed", "5", "--grid-step", "0.05", "--grid-min", "0.15", "--out", out,
        ])
        assert code == 0
        csv_path = os.path.join(out, "curve_2_a.csv")
        lines = open(csv_path).read().strip().splitlines()
        assert lines[0] == "gamma,p,hr_overall,hr_mono"
        gammas = [float(line.split(",")[0]) for line in lines[1:]]
        assert gammas == sorted(gammas, reverse=True)

        svg_path = os.path.join(out, "curve_2_a.svg")
        root = ET.parse(svg_path).getroot()
        ns = {"svg": "http://www.w3.org/2000/svg"}
        polylines = root.findall(".//svg:polyline", ns)
        assert len(polylines) == 1
        circles = root.findall(".//svg:circle", ns)
        assert len(circles) == 1  # single significance crossing

    def test_three_point_curve_svg_structure(self, small_dataset, tmp_path):
        out = str(tmp_path / "c3")
        code = main([
            "curve", "--input", small_dataset, "--effect", "1", "--threshold", "a",
            "--seed", "5", "--grid-step", "0.25", "--grid-max", "1.5", "--out", out,
        ])
        assert code == 0
        root = ET.parse(os.path.join(out, "curve_1_a.svg")).getroot()
        ns = {"svg": "http://www.w3.org/2000/svg"}
        polylines = root.findall(".//svg:polyline", ns)
        assert len(polylines) == 1
        vertices = polylines[0].get("points").split()
        assert len(vertices) == 3

    def test_threshold_b_curve_uses_mono_hr(self, small_dataset, tmp_path):
        out = str(tmp_path / "cb")
        code = main([
            "curve", "--input", small_dataset, "--effect", "1", "--threshold", "b",
            "--seed", "5", "--grid-step", "0.25", "--grid-max", "4.0", "--out", out,
        ])
        assert code == 0
        assert os.path.exists(os.path.join(out, "curve_1_b.csv"))
        assert os.path.exists(os.path.join(out, "curve_1_b.svg"))

    def test_empty_grid_header_only_no_svg(self, small_dataset, tmp_path):
        out = str(tmp_path / "empty")
        code = main([
            "curve", "--input", small_dataset, "--effect", "1", "--threshold", "a",
            "--seed", "5", "--grid-max", "0.99", "--out", out,
        ])
        assert code == 0
        assert open(os.path.join(out, "curve_1_a.csv")).read() == "gamma,p,hr_overall,hr_mono\n"
        assert not os.path.exists(os.path.join(out, "curve_1_a.svg"))


class TestEmitResults:
    def test_one_row_per_effect_threshold(self, small_dataset, tmp_path):
        from phasetip.cli import emit_results
        from phasetip.counterfactual import Effect, Threshold
        from phasetip.dataio import read_dataset
        from phasetip.tipping import SearchConfig, find_tipping

        records = read_dataset(small_dataset)
        results = []
        for effect in Effect:
            for threshold in Threshold:
                cfg = SearchConfig(effect=effect, threshold=threshold,
                                   grid_step=0.2, mi_replicates=1, seed=2)
                results.append(find_tipping(records, cfg))
        path = emit_results(results, str(tmp_path / "all"))
        lines = open(path).read().strip().splitlines()
        assert len(lines) == 5
        tags = [line.split(",")[0] for line in lines[1:]]
        assert tags == [
            "effect1_threshold_a", "effect1_threshold_b",
            "effect2_threshold_a", "effect2_threshold_b",
        ]
