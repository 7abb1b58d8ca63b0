"""Config loading and CLI workflow tests."""

import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from mixbench import presets
from mixbench.budget import cascade_gain
from mixbench.cli import main
from mixbench.config import ConfigError, load_bench_config, parse_bench_config
from mixbench.loopback import read_scan_csv, write_scan_csv, ScanResult
from mixbench.rb import gen_synthetic_rb, infidelity_to_p, write_rb_csv

REPO_CONFIG = Path(__file__).resolve().parent.parent / "configs" / "example_bench.json"


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "bench.json"
    path.write_text(json.dumps(presets.example_bench_dict(), indent=2, sort_keys=True) + "\n")
    return path


class TestConfigLoading:
    def test_shipped_file_matches_presets(self):
        with open(REPO_CONFIG) as fh:
            assert json.load(fh) == presets.example_bench_dict()

    def test_chains_resolve(self, config_path):
        cfg = load_bench_config(config_path)
        assert set(cfg.chains) == {"dn", "uph", "upl"}
        assert cascade_gain(cfg.chains["dn"]) == pytest.approx(31.0)
        assert cascade_gain(cfg.chains["uph"]) == pytest.approx(7.0)
        assert cascade_gain(cfg.chains["upl"]) == pytest.approx(-13.0)
        assert cfg.loopback is not None
        assert cfg.loopback.config.readout == "single"

    def test_syntax_error_carries_position(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text('{\n  "chains": {\n')
        with pytest.raises(ConfigError, match=r"broken\.json:\d+:\d+"):
            load_bench_config(p)

    def test_missing_key_names_path(self):
        raw = presets.example_bench_dict()
        del raw["chains"]["dn"]["blocks"][1]["gain_db"]
        with pytest.raises(ConfigError, match=r"chains\.dn\.blocks\[1\]"):
            parse_bench_config(raw)

    def test_invariant_violation_names_path(self):
        raw = presets.example_bench_dict()
        raw["chains"]["dn"]["blocks"][2]["attenuation_db"] = -3.0
        with pytest.raises(ConfigError, match=r"chains\.dn\.blocks\[2\]"):
            parse_bench_config(raw)

    def test_unknown_chain_reference(self):
        raw = presets.example_bench_dict()
        raw["loopback"]["up_chain"] = "nope"
        with pytest.raises(ConfigError, match="unknown chain"):
            parse_bench_config(raw)

    def test_chain_without_mixer(self):
        raw = presets.example_bench_dict()
        raw["chains"]["dn"]["blocks"] = [
            {"type": "amp", "label": "a", "gain_db": 10.0, "nf_db": 1.0}
        ]
        with pytest.raises(ConfigError, match="mixer"):
            parse_bench_config(raw)

    def test_loopback_invariant_checked_at_load(self):
        raw = presets.example_bench_dict()
        raw["loopback"]["if_freq_hz"] = 63.3e6  # not integer-period
        with pytest.raises(ConfigError, match="integer"):
            parse_bench_config(raw)


class TestCliBudget:
    def test_runs_and_writes(self, config_path, tmp_path, capsys):
        outdir = tmp_path / "out"
        rc = main(["budget", str(config_path), "--outdir", str(outdir), "--no-plot"])
        assert rc == 0
        text = (outdir / "budget_report.txt").read_text()
        assert "totals: gain 31.00 dB" in text
        assert "totals: gain 7.00 dB" in text
        assert "totals: gain -13.00 dB" in text

    def test_invalid_config_exit_1(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{"chains": {}}')
        assert main(["budget", str(p), "--no-plot"]) == 1
        assert "config error" in capsys.readouterr().err

    def test_missing_file_exit_3(self, tmp_path, capsys):
        assert main(["budget", str(tmp_path / "absent.json"), "--no-plot"]) == 3

    def test_plots_rendered(self, config_path, tmp_path):
        outdir = tmp_path / "out"
        assert main(["budget", str(config_path), "--outdir", str(outdir)]) == 0
        for name in ("dn", "uph", "upl"):
            assert (outdir / f"budget_levels_{name}.png").exists()


class TestCliScan:
    def test_byte_reproducible(self, config_path, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        for out in (a, b):
            rc = main(["scan", str(config_path), "--out", str(out), "--points", "16", "--no-plot"])
            assert rc == 0
        assert a.read_bytes() == b.read_bytes()
        ra = (tmp_path / "a_report.json").read_bytes()
        rb = (tmp_path / "b_report.json").read_bytes()
        assert ra == rb

    def test_report_content_and_figures(self, config_path, tmp_path):
        out = tmp_path / "scan.csv"
        rc = main(["scan", str(config_path), "--out", str(out), "--points", "16"])
        assert rc == 0
        report = json.loads((tmp_path / "scan_report.json").read_text())
        assert report["n_points"] == 16
        assert 0 <= report["amp_linearity"] < 0.1
        assert report["readout"] == "single"
        assert "note" in report["imbalance"]
        assert (tmp_path / "scan_iq.png").exists()
        assert (tmp_path / "scan_response.png").exists()
        scan = read_scan_csv(out)
        assert len(scan) == 16

    def test_readout_override(self, config_path, tmp_path):
        out = tmp_path / "scan.csv"
        rc = main([
            "scan", str(config_path), "--out", str(out),
            "--points", "16", "--readout", "folded", "--no-plot",
        ])
        assert rc == 0
        report = json.loads((tmp_path / "scan_report.json").read_text())
        assert report["readout"] == "folded"
        assert "note" not in report["imbalance"]


class TestCliCalibrate:
    def test_lo_null(self, config_path, tmp_path, capsys):
        out = tmp_path / "settings.json"
        rc = main(["calibrate", str(config_path), "--mode", "lo-null", "--out", str(out)])
        assert rc == 0
        settings = json.loads(out.read_text())
        assert settings["converged"] is True
        assert settings["after_dbc"] == "-inf" or settings["after_dbc"] <= -80.0
        assert "bias" in settings
        captured = capsys.readouterr().out
        assert "lo-null" in captured

    def test_sideband(self, config_path, tmp_path):
        out = tmp_path / "settings.json"
        rc = main(["calibrate", str(config_path), "--mode", "sideband", "--out", str(out)])
        assert rc == 0
        settings = json.loads(out.read_text())
        after = settings["after_dbc"]
        assert after == "inf" or after >= 100.0
        assert "predistorter" in settings

    def test_settings_feed_back_into_scan(self, config_path, tmp_path):
        settings = tmp_path / "settings.json"
        assert main(["calibrate", str(config_path), "--mode", "sideband", "--out", str(settings)]) == 0
        out = tmp_path / "cal_scan.csv"
        rc = main([
            "scan", str(config_path), "--out", str(out), "--points", "16",
            "--calibration", str(settings), "--no-plot",
        ])
        assert rc == 0

    def test_from_scan_external_csv(self, config_path, tmp_path):
        # externally measured characterization scan: settings without simulation
        theta = 2 * np.pi * np.arange(32) / 32
        acc = 1000.0 * (np.exp(1j * theta) + 0.02 * np.exp(-1j * theta) + 0.01)
        csv = tmp_path / "external.csv"
        write_scan_csv(ScanResult(theta, acc), csv)
        out = tmp_path / "settings.json"
        rc = main([
            "calibrate", str(config_path), "--mode", "from-scan",
            "--scan", str(csv), "--out", str(out),
        ])
        assert rc == 0
        settings = json.loads(out.read_text())
        assert settings["attribution"] == "up"
        assert settings["estimated_irr_dbc"] == pytest.approx(20 * np.log10(1 / 0.02), abs=0.01)

    def test_from_scan_requires_csv(self, config_path, capsys):
        assert main(["calibrate", str(config_path), "--mode", "from-scan"]) == 1

    def test_nonconvergence_exit_2(self, config_path, tmp_path, capsys):
        raw = json.loads(config_path.read_text())
        raw["optimizer"] = {"max_evals": 10, "init_step_v": 1e-7, "tol_dbc": -250.0}
        hard = tmp_path / "hard.json"
        hard.write_text(json.dumps(raw))
        out = tmp_path / "settings.json"
        rc = main(["calibrate", str(hard), "--mode", "lo-null", "--out", str(out)])
        assert rc == 2
        assert json.loads(out.read_text())["converged"] is False


class TestCliRbfit:
    def test_anchor_file(self, tmp_path, capsys):
        p_true = infidelity_to_p(9.3e-4, 2)
        ds = gen_synthetic_rb(0.9, p_true, [2, 4, 8, 16, 32, 64, 128, 256, 512], 1000, 11)
        data = tmp_path / "rb.csv"
        write_rb_csv(ds, data)
        out = tmp_path / "fit.json"
        rc = main(["rbfit", str(data), "--dimension", "2", "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["process_infidelity"] == pytest.approx(9.3e-4, rel=0.25)
        assert (tmp_path / "fit.png").exists()
        assert len(report["curve"]) == 9

    def test_noiseless_p1_gives_zero_infidelity(self, tmp_path):
        ds = gen_synthetic_rb(0.9, 1.0, [2, 4, 8, 16], None, 0)
        data = tmp_path / "rb.csv"
        write_rb_csv(ds, data)
        out = tmp_path / "fit.json"
        rc = main(["rbfit", str(data), "--out", str(out), "--no-plot"])
        assert rc == 0
        assert json.loads(out.read_text())["process_infidelity"] == pytest.approx(0.0, abs=1e-9)

    def test_too_few_lengths_exit_1(self, tmp_path, capsys):
        data = tmp_path / "rb.csv"
        data.write_text("m,survival,shots\n2,0.9,100\n4,0.8,100\n")
        assert main(["rbfit", str(data), "--no-plot"]) == 1
        assert "3 distinct" in capsys.readouterr().err

    def test_malformed_row_exit_1(self, tmp_path, capsys):
        data = tmp_path / "rb.csv"
        data.write_text("m,survival,shots\n2,0.9,100\nx,0.8,100\n")
        assert main(["rbfit", str(data), "--no-plot"]) == 1
        assert "rb.csv:3" in capsys.readouterr().err


class TestCalibrationWorkflow:
    def test_scan_calibrate_rescan(self, tmp_path):
        # bench practice end to end: characterize the transmit converter with
        # a folded scan, derive settings, and verify the corrected scan.  The
        # UPL chain keeps the transmit path linear and the receive side is an
        # ideal mixer, so the corrections must reach the numeric floor.
        raw = presets.example_bench_dict()
        raw["chains"]["dn_ideal"] = {
            "role": "DN",
            "lo_drive_dbm": 0.0,
            "blocks": [{"type": "mixer", "label": "mixer", "conv_loss_db": 9.0}],
        }
        raw["loopback"].update(
            {
                "up_chain": "upl",
                "dn_chain": "dn_ideal",
                "noise_on": False,
                "readout": "folded",
                "dac_bits": 0,
                "adc_bits": 0,
                "rf_path_atten_db": 0.0,
            }
        )
        cfg = tmp_path / "cal_bench.json"
        cfg.write_text(json.dumps(raw))

        scan1 = tmp_path / "scan1.csv"
        assert main(["scan", str(cfg), "--out", str(scan1), "--no-plot"]) == 0
        before = json.loads((tmp_path / "scan1_report.json").read_text())
        assert before["imbalance"]["irr_dbc"] == pytest.approx(27.0, abs=0.5)

        settings = tmp_path / "settings.json"
        rc = main([
            "calibrate", str(cfg), "--mode", "from-scan",
            "--scan", str(scan1), "--out", str(settings),
        ])
        assert rc == 0

        scan2 = tmp_path / "scan2.csv"
        rc = main([
            "scan", str(cfg), "--out", str(scan2),
            "--calibration", str(settings), "--no-plot",
        ])
        assert rc == 0
        after = json.loads((tmp_path / "scan2_report.json").read_text())
        irr = after["imbalance"]["irr_dbc"]
        assert irr == "inf" or irr >= 100.0
        assert after["amp_linearity"] < 1e-9


@pytest.mark.skipif(shutil.which("mixbench") is None, reason="entry point not on PATH")
class TestConsoleScript:
    def test_budget_subprocess(self, config_path, tmp_path):
        proc = subprocess.run(
            ["mixbench", "budget", str(config_path), "--outdir", str(tmp_path), "--no-plot"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert "gain +31.00 dB" in proc.stdout

    def test_bad_config_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        proc = subprocess.run(
            ["mixbench", "budget", str(bad), "--no-plot"], capture_output=True, text=True
        )
        assert proc.returncode == 1
        assert "config error" in proc.stderr
