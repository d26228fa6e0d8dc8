import csv
import json
import logging

import numpy as np
import pytest

from risfp.cli import main
from risfp.configio import ConfigError, load_config, parse_power

MINIMAL = """
[system]
num_bs_antennas = 2
num_ris_elements = 6
num_users = 2
rng_seed = 3

[optimizer]
tol = 1e-3
max_iters = 50
"""

SCENARIO = """
[system]
num_bs_antennas = 2
num_ris_elements = 6
num_users = 2
rng_seed = 4

[scenario]
name = demo
sweep = N
values = 6, 8
trials = 2
algorithms = fp-perfect, mmse-random
"""


def write(tmp_path, text, name="conf.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfigParsing:
    def test_power_suffixes(self):
        assert parse_power("10") == 10.0
        assert parse_power("10 dB") == pytest.approx(10.0)
        assert parse_power("10 dBW") == pytest.approx(10.0)
        assert parse_power("0 dBm") == pytest.approx(1e-3)
        assert parse_power("-90 dBm") == pytest.approx(1e-12)
        with pytest.raises(ConfigError, match="power"):
            parse_power("loud", "[system] transmit_power")

    def test_system_section(self, tmp_path):
        cfg = load_config(write(tmp_path, MINIMAL))
        assert cfg.system.num_ris_elements == 6
        assert cfg.optimizer.max_iters == 50

    def test_unknown_field_reported(self, tmp_path):
        path = write(tmp_path, "[system]\nnum_bs_antennas = 2\nantennae = 4\n")
        with pytest.raises(ConfigError, match="antennae"):
            load_config(path)

    def test_missing_scenario_field_reported(self, tmp_path):
        path = write(tmp_path, "[system]\nnum_users = 2\n\n[scenario]\nvalues = 1, 2\n")
        with pytest.raises(ConfigError, match="sweep"):
            load_config(path)

    def test_positions_parsed(self, tmp_path):
        text = MINIMAL + "\n"
        text = text.replace(
            "[optimizer]",
            "user_positions = 190, 40; 210, 55\n\n[optimizer]",
        )
        cfg = load_config(write(tmp_path, text))
        assert cfg.system.user_positions == ((190.0, 40.0), (210.0, 55.0))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.ini")

    def test_system_config_round_trip(self, tmp_path):
        from risfp.channel import SystemConfig
        from risfp.configio import dump_system_config

        cfg = SystemConfig(
            num_bs_antennas=3,
            num_users=2,
            rician_factor_h=(4.0, 0.25),
            user_positions=((190.0, 40.0), (210.0, 55.0)),
            noise_power=3.5e-13,
        )
        path = tmp_path / "dump.ini"
        dump_system_config(cfg, path)
        loaded = load_config(path).system
        assert loaded == cfg

    def test_per_user_rician_from_config(self, tmp_path):
        text = MINIMAL.replace("[optimizer]", "rician_factor_h = 10 dB, 3 dB\n\n[optimizer]")
        cfg = load_config(write(tmp_path, text))
        assert cfg.system.rician_factor_h == pytest.approx((10.0, 10 ** 0.3))


class TestRunOnce:
    def test_outputs_written(self, tmp_path):
        conf = write(tmp_path, MINIMAL)
        out = tmp_path / "out"
        assert main(["run-once", "--config", conf, "--out", str(out), "--quiet"]) == 0
        trace = (out / "trace.csv").read_text().splitlines()
        assert trace[0] == "iteration,f1,f1a,wall_time"
        solution = json.loads((out / "solution.json").read_text())
        assert len(solution["phi_phase_rad"]) == 6
        assert len(solution["per_user_rate_nats"]) == 2
        assert solution["sum_rate_bits"] == pytest.approx(
            solution["sum_rate_nats"] / np.log(2)
        )

    def test_minimal_single_antenna_system(self, tmp_path):
        text = MINIMAL.replace("num_bs_antennas = 2", "num_bs_antennas = 1")
        text = text.replace("num_ris_elements = 6", "num_ris_elements = 1")
        text = text.replace("num_users = 2", "num_users = 1")
        conf = write(tmp_path, text)
        out = tmp_path / "mini"
        assert main(["run-once", "--config", conf, "--out", str(out), "--quiet"]) == 0
        trace = (out / "trace.csv").read_text().splitlines()
        assert len(trace) - 1 <= 3  # matched-filter init is already optimal

    def test_deterministic_outputs(self, tmp_path):
        conf = write(tmp_path, MINIMAL)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run-once", "--config", conf, "--out", str(out1), "--quiet"]) == 0
        assert main(["run-once", "--config", conf, "--out", str(out2), "--quiet"]) == 0
        assert (out1 / "solution.json").read_bytes() == (out2 / "solution.json").read_bytes()
        # trace rows identical except the timing column
        rows1 = list(csv.reader((out1 / "trace.csv").open()))
        rows2 = list(csv.reader((out2 / "trace.csv").open()))
        assert [r[:3] for r in rows1] == [r[:3] for r in rows2]

    def test_seed_override_changes_solution(self, tmp_path):
        conf = write(tmp_path, MINIMAL)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["run-once", "--config", conf, "--out", str(out1), "--quiet"])
        main(["run-once", "--config", conf, "--out", str(out2), "--seed", "99", "--quiet"])
        a = json.loads((out1 / "solution.json").read_text())
        b = json.loads((out2 / "solution.json").read_text())
        assert a["per_user_sinr"] != b["per_user_sinr"]

    def test_estimated_requires_section(self, tmp_path, caplog):
        conf = write(tmp_path, MINIMAL)
        with caplog.at_level(logging.ERROR, logger="risfp"):
            code = main(
                ["run-once", "--config", conf, "--out", str(tmp_path / "o"),
                 "--estimated", "--quiet"]
            )
        assert code == 2
        assert any("estimation" in r.message for r in caplog.records)

    def test_infeasible_pilot_length(self, tmp_path, caplog):
        text = MINIMAL + "\n[estimation]\npilot_length = 4\n"
        conf = write(tmp_path, text)
        with caplog.at_level(logging.ERROR, logger="risfp"):
            code = main(
                ["run-once", "--config", conf, "--out", str(tmp_path / "o"),
                 "--estimated", "--quiet"]
            )
        assert code == 2
        assert any("pilot_length" in r.message for r in caplog.records)

    def test_estimated_run(self, tmp_path):
        text = MINIMAL + "\n[estimation]\npilot_length = 12\npilot_power = 10\n"
        conf = write(tmp_path, text)
        out = tmp_path / "o"
        assert main(["run-once", "--config", conf, "--out", str(out), "--estimated",
                     "--quiet"]) == 0
        solution = json.loads((out / "solution.json").read_text())
        assert solution["estimated_csi"] is True


class TestScenarioCommand:
    def test_scenario_outputs(self, tmp_path):
        conf = write(tmp_path, SCENARIO)
        out = tmp_path / "res"
        assert main(["run-scenario", "--config", conf, "--out", str(out), "--quiet"]) == 0
        rows = list(csv.reader((out / "demo.csv").open()))
        assert len(rows) == 5  # header + 2 values x 2 algorithms
        manifest = json.loads((out / "demo.manifest.json").read_text())
        assert manifest["seed"] == 4
        assert "risfp" in manifest["provenance"]

    def test_trials_override(self, tmp_path):
        conf = write(tmp_path, SCENARIO)
        out = tmp_path / "res"
        assert main(["run-scenario", "--config", conf, "--out", str(out), "--trials", "1",
                     "--quiet"]) == 0
        manifest = json.loads((out / "demo.manifest.json").read_text())
        assert manifest["spec"]["trials"] == 1

    def test_missing_scenario_section(self, tmp_path, caplog):
        conf = write(tmp_path, MINIMAL)
        with caplog.at_level(logging.ERROR, logger="risfp"):
            code = main(["run-scenario", "--config", conf, "--out", str(tmp_path), "--quiet"])
        assert code == 2

    def test_partial_failures_nonzero_exit(self, tmp_path):
        text = SCENARIO.replace("num_users = 2", "num_users = 3").replace(
            "algorithms = fp-perfect, mmse-random", "algorithms = fp-perfect, zf-random"
        )
        conf = write(tmp_path, text)
        out = tmp_path / "res"
        assert main(["run-scenario", "--config", conf, "--out", str(out), "--quiet"]) == 1
        failures = json.loads((out / "demo.failures.json").read_text())
        assert failures["failures"]


class TestOtherCommands:
    def test_estimate_command(self, tmp_path):
        text = MINIMAL + "\n[estimation]\npilot_length = 6\npilot_power = 10\n"
        conf = write(tmp_path, text)
        out = tmp_path / "e"
        assert main(["estimate", "--config", conf, "--out", str(out), "--trials", "5",
                     "--quiet"]) == 0
        rows = list(csv.reader((out / "estimation.csv").open()))
        assert len(rows) == 1 + 5 * 2
        summary = json.loads((out / "estimation_summary.json").read_text())
        assert summary["trials"] == 5

    def test_estimate_infeasible(self, tmp_path, caplog):
        text = MINIMAL + "\n[estimation]\npilot_length = 3\n"
        conf = write(tmp_path, text)
        with caplog.at_level(logging.ERROR, logger="risfp"):
            assert main(["estimate", "--config", conf, "--out", str(tmp_path), "--quiet"]) == 2

    def test_oracle_command(self, tmp_path):
        text = MINIMAL.replace("num_ris_elements = 6", "num_ris_elements = 3")
        text += "\n[oracle]\nlevels = 8\nprecoder = mmse\n"
        conf = write(tmp_path, text)
        out = tmp_path / "o"
        assert main(["oracle", "--config", conf, "--out", str(out), "--quiet"]) == 0
        payload = json.loads((out / "oracle.json").read_text())
        assert payload["fp_rate_nats"] >= payload["oracle_rate_nats"] - 0.05

    def test_bench_command(self, tmp_path):
        conf = write(tmp_path, MINIMAL)
        out = tmp_path / "b"
        assert main(["bench", "--config", conf, "--out", str(out), "--sizes", "8,16",
                     "--iterations", "20", "--quiet"]) == 0
        rows = list(csv.reader((out / "bench.csv").open()))
        assert len(rows) == 3
        assert rows[0] == ["backend", "num_ris_elements", "mean_iteration_seconds", "iterations"]

    def test_bench_empty_sizes(self, tmp_path, caplog):
        conf = write(tmp_path, MINIMAL)
        with caplog.at_level(logging.ERROR, logger="risfp"):
            assert main(["bench", "--config", conf, "--out", str(tmp_path), "--sizes", " ",
                         "--quiet"]) == 2

    def test_config_error_exit_code(self, tmp_path, caplog):
        conf = write(tmp_path, "[system]\nnum_users = -2\n")
        with caplog.at_level(logging.ERROR, logger="risfp"):
            assert main(["run-once", "--config", conf, "--out", str(tmp_path), "--quiet"]) == 2
