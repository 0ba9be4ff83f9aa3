import json

import numpy as np

from fsolink import pipeline, scenarios
from fsolink.cli import main
from fsolink.reporting import as_jsonable


def run_cli(*args):
    return main(list(args))


class TestDispatch:
    def test_budget_prints_table(self, capsys):
        assert run_cli("budget", "--scenario", "clear") == 0
        out = capsys.readouterr().out
        assert "scintillation_margin_db" in out
        assert "received_power_dbm" in out

    def test_budget_csv_and_json(self, tmp_path, capsys):
        assert run_cli("budget", "--scenario", "clear", "--format", "csv") == 0
        assert "component,value" in capsys.readouterr().out
        out = tmp_path / "budget.json"
        assert run_cli("budget", "--scenario", "clear", "--format", "json", "--out", str(out)) == 0
        data = json.loads(out.read_text())
        assert "losses" in data and "budget" in data

    def test_unknown_flag_is_usage_error(self, capsys):
        assert run_cli("budget", "--bogus-flag") == 2

    def test_unknown_subcommand_is_usage_error(self):
        assert run_cli("frobnicate") == 2

    def test_unknown_preset_is_usage_error(self, capsys):
        assert run_cli("budget", "--scenario", "fictional") == 2

    def test_unknown_override_key_is_usage_error(self, capsys):
        assert run_cli("budget", "--scenario", "clear", "--set", "scenario.bogus=1") == 2

    def test_runtime_error_exit_code(self, tmp_path, capsys):
        # Sweeping an unknown axis is a runtime failure, not a usage error.
        code = run_cli(
            "sweep", "--scenario", "clear", "--axis", "nope.nope",
            "--values", "1,2", "--out", str(tmp_path / "s.csv"),
            "--set", "n_symbols=10000",
        )
        assert code == 1
        assert "valid axes" in capsys.readouterr().err

    def test_scenarios_listing(self, capsys):
        assert run_cli("scenarios") == 0
        out = capsys.readouterr().out
        assert "clear:" in out and "hazy:" in out
        assert "visibility_km = 3.0" in out


class TestTransmit:
    def test_report_matches_direct_pipeline_call(self, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        code = run_cli(
            "transmit", "--scenario", "hazy", "--seed", "7",
            "--symbols", "20000", "--no-timestamp",
            "--report", str(report_path),
        )
        assert code == 0
        cfg = scenarios.resolve_config(preset="hazy")
        cfg["seed"] = 7
        cfg["n_symbols"] = 20000
        direct = pipeline.run_endtoend(pipeline.RunConfig.from_dict(cfg))
        written = json.loads(report_path.read_text())
        expected = as_jsonable(direct)
        expected.pop("elapsed_s")
        assert written == expected

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for path, workers in zip(paths, ("1", "4")):
            code = run_cli(
                "transmit", "--scenario", "clear", "--seed", "3",
                "--symbols", "15000", "--no-timestamp",
                "--workers", workers, "--report", str(path),
            )
            assert code == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_override_round_trips_into_config_echo(self, tmp_path):
        report_path = tmp_path / "report.json"
        code = run_cli(
            "transmit", "--scenario", "clear", "--symbols", "10000",
            "--set", "scenario.visibility_km=7.5",
            "--set", "modem.symbol_rate_hz=1e9",
            "--no-timestamp", "--report", str(report_path),
        )
        assert code == 0
        echo = json.loads(report_path.read_text())["config"]
        assert echo["scenario"]["visibility_km"] == 7.5
        assert echo["modem"]["symbol_rate_hz"] == 1e9

    def test_payload_round_trip(self, tmp_path, capsys):
        payload = tmp_path / "payload.bin"
        recovered = tmp_path / "recovered.bin"
        payload.write_bytes(np.random.default_rng(5).bytes(40_000))
        code = run_cli(
            "transmit", "--scenario", "clear", "--payload", str(payload),
            "--payload-out", str(recovered),
            "--set", "noise.mode=fixed_std", "--set", "noise.noise_std=0.0",
            "--set", "scenario.ground_cn2=1e-30",
            "--set", "geometry.distance_m=100.0",
            "--set", "geometry.rx_altitude_m=0.0",
        )
        assert code == 0
        assert recovered.read_bytes() == payload.read_bytes()
        assert "byte errors 0" in capsys.readouterr().out


class TestConfigFile:
    def test_config_file_layering(self, tmp_path, capsys):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"scenario": {"visibility_km": 4.2}}))
        report_path = tmp_path / "r.json"
        code = run_cli(
            "transmit", "--scenario", "clear", "--config", str(config),
            "--symbols", "10000", "--no-timestamp", "--report", str(report_path),
        )
        assert code == 0
        echo = json.loads(report_path.read_text())["config"]
        assert echo["scenario"]["visibility_km"] == 4.2
        # Preset values not touched by the file survive.
        assert echo["scenario"]["wind_speed_ground"] == 1.0

    def test_env_var_fallback(self, tmp_path, capsys, monkeypatch):
        config = tmp_path / "env.json"
        config.write_text(json.dumps({"scenario": {"visibility_km": 6.5}}))
        monkeypatch.setenv("FSO_SIM_CONFIG", str(config))
        report_path = tmp_path / "r.json"
        code = run_cli(
            "transmit", "--scenario", "clear", "--symbols", "10000",
            "--no-timestamp", "--report", str(report_path),
        )
        assert code == 0
        echo = json.loads(report_path.read_text())["config"]
        assert echo["scenario"]["visibility_km"] == 6.5


class TestOtherCommands:
    def test_trace_csv_output(self, tmp_path, capsys):
        out = tmp_path / "trace.csv"
        code = run_cli(
            "trace", "--scenario", "clear", "--rate", "1e4",
            "--duration", "0.1", "--seed", "2", "--out", str(out),
        )
        assert code == 0
        from fsolink.channel_trace import trace_from_csv

        trace = trace_from_csv(out)
        assert len(trace) == 1000

    def test_trace_binary_output(self, tmp_path):
        out = tmp_path / "trace.ftr"
        assert run_cli(
            "trace", "--scenario", "hazy", "--rate", "1e4",
            "--duration", "0.05", "--out", str(out),
        ) == 0
        from fsolink.channel_trace import trace_from_binary

        assert len(trace_from_binary(out)) == 500

    def test_pat_sim(self, tmp_path, capsys):
        out = tmp_path / "residual.csv"
        summary = tmp_path / "summary.json"
        code = run_cli(
            "pat-sim", "--m", "4", "--duration", "0.2", "--seed", "1",
            "--out", str(out), "--summary", str(summary), "--no-timestamp",
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "time_s,offset_x_m,offset_y_m"
        assert len(lines) == 201
        data = json.loads(summary.read_text())
        assert data["m"] == 4
        assert data["residual_rms_m"] < 1e-3

    def test_filter_sim(self, tmp_path, capsys):
        out = tmp_path / "filter.csv"
        code = run_cli(
            "filter-sim", "--n", "2", "--symbols", "200000", "--seed", "3",
            "--out", str(out),
        )
        assert code == 0
        rows = out.read_text().splitlines()
        assert rows[0].startswith("selection,")
        assert len(rows) == 3

    def test_sweep_csv(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run_cli(
            "sweep", "--scenario", "hazy", "--axis", "scenario.visibility_km",
            "--values", "3,10", "--set", "n_symbols=10000", "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 3

    def test_sweep_empty_values_writes_header_only(self, tmp_path):
        out = tmp_path / "empty.csv"
        code = run_cli(
            "sweep", "--scenario", "clear", "--axis", "scenario.visibility_km",
            "--values", "", "--set", "n_symbols=10000", "--out", str(out),
        )
        assert code == 0
        assert out.read_text().splitlines() == ["axis,value"]

    def test_transmit_summary_csv(self, tmp_path):
        out = tmp_path / "summary.csv"
        code = run_cli(
            "transmit", "--scenario", "clear", "--symbols", "10000",
            "--summary-csv", str(out),
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("seed,")
        assert len(lines) == 2

    def test_transmit_stdin_payload(self, tmp_path, monkeypatch, capsys):
        data = np.random.default_rng(9).bytes(5000)

        class FakeStdin:
            class buffer:
                @staticmethod
                def read():
                    return data

        monkeypatch.setattr("sys.stdin", FakeStdin)
        recovered = tmp_path / "out.bin"
        code = run_cli(
            "transmit", "--scenario", "clear", "--payload", "-",
            "--payload-out", str(recovered),
            "--set", "noise.mode=fixed_std", "--set", "noise.noise_std=0.0",
            "--set", "scenario.ground_cn2=1e-30",
            "--set", "geometry.distance_m=100.0",
            "--set", "geometry.rx_altitude_m=0.0",
        )
        assert code == 0
        assert recovered.read_bytes() == data

    def test_filter_sim_with_grid_csv(self, tmp_path, capsys):
        grid = tmp_path / "grid.csv"
        np.savetxt(grid, np.array([[0.9, 0.04], [0.03, 0.03]]), delimiter=",")
        code = run_cli(
            "filter-sim", "--grid", str(grid), "--symbols", "150000", "--seed", "4",
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "gain" in out
