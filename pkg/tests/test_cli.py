import numpy as np
import pytest

from lvsense import (IntegratorOptions, LineshapeModel, LvParams, NoiseModel,
                     PopulationState, integrate, synthesize_waveform)
from lvsense.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main
from lvsense.fileio import read_trajectory, read_waveform, write_waveform
from conftest import make_pulse_train


def run_cli(capsys, *args) -> tuple[int, str]:
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out


def kv(stdout: str) -> dict:
    pairs = {}
    for line in stdout.strip().splitlines():
        key, _, value = line.partition("=")
        pairs[key] = value
    return pairs


class TestSimulateMode:
    def test_matches_library_computation(self, tmp_path, capsys):
        tr_path = tmp_path / "tr.csv"
        wf_path = tmp_path / "wf.csv"
        code, out = run_cli(
            capsys, "simulate", "--t-end", "5", "--sample-interval", "0.0025",
            "--max-shift", "-9", "--noise", "additive-gaussian", "--sigma", "0.003",
            "--seed", "7", "--out-trajectory", str(tr_path),
            "--out-waveform", str(wf_path))
        assert code == EXIT_OK

        params = LvParams(0.75, 0.25, 0.31755, 0.25)
        traj = integrate(params, PopulationState(12.0, 3.0), (0.0, 5.0),
                         IntegratorOptions(sample_interval=0.0025))
        model = LineshapeModel(max_shift=-9.0, y_half=3.0)
        w = synthesize_waveform(traj, model, NoiseModel("additive-gaussian", 0.003, 7))

        got_traj = read_trajectory(tr_path)
        got_wf = read_waveform(wf_path)
        np.testing.assert_array_equal(got_traj.times, traj.times)
        np.testing.assert_array_equal(got_traj.x, traj.x)
        np.testing.assert_array_equal(got_traj.y, traj.y)
        np.testing.assert_array_equal(got_wf.values, w.values)

    def test_summary_reports_parameters(self, tmp_path, capsys):
        code, out = run_cli(
            capsys, "simulate", "--t-end", "1",
            "--out-trajectory", str(tmp_path / "t.csv"),
            "--out-waveform", str(tmp_path / "w.csv"))
        pairs = kv(out)
        assert code == EXIT_OK
        assert pairs["mode"] == "simulate"
        assert pairs["alpha"] == "0.75"
        assert pairs["gamma"] == "0.31755"
        assert "pulse_count" in pairs

    def test_delayed_mode(self, tmp_path, capsys):
        code, out = run_cli(
            capsys, "simulate-delayed", "--t-end", "2", "--tau", "0.024",
            "--out-trajectory", str(tmp_path / "t.csv"),
            "--out-waveform", str(tmp_path / "w.csv"))
        assert code == EXIT_OK
        assert kv(out)["tau_ms"] == "0.024"


class TestConfigHandling:
    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("mode = simulate\nt_end = 1.0\nalpha = 0.9\nseed = 5\n"
                       f"out_trajectory = {tmp_path / 't.csv'}\n"
                       f"out_waveform = {tmp_path / 'w.csv'}\n")
        code, out = run_cli(capsys, "simulate", "--config", str(cfg),
                            "--alpha", "1.1")
        pairs = kv(out)
        assert code == EXIT_OK
        assert pairs["alpha"] == "1.1"  # flag wins
        assert pairs["seed"] == "5"

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("mystery_knob = 3\n")
        code, _ = run_cli(capsys, "simulate", "--config", str(cfg))
        assert code == EXIT_CONFIG

    def test_mode_mismatch_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("mode = spectra\n")
        code, _ = run_cli(capsys, "simulate", "--config", str(cfg))
        assert code == EXIT_CONFIG

    def test_bad_value_rejected(self, tmp_path, capsys):
        code, _ = run_cli(capsys, "simulate", "--t-end", "soon",
                          "--out-trajectory", str(tmp_path / "t.csv"),
                          "--out-waveform", str(tmp_path / "w.csv"))
        assert code == EXIT_CONFIG

    def test_nonpositive_rate_rejected(self, tmp_path, capsys):
        code, _ = run_cli(capsys, "simulate", "--alpha", "-0.5",
                          "--out-trajectory", str(tmp_path / "t.csv"),
                          "--out-waveform", str(tmp_path / "w.csv"))
        assert code == EXIT_CONFIG


class TestExitCodes:
    def test_malformed_csv_exits_2_with_diagnostic(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("t_ms,transmission\n0.0,0.5\n0.5,0.6\n0.2,0.7\n")
        code = main(["sense", "--input", str(bad)])
        err = capsys.readouterr().err
        assert code == EXIT_CONFIG
        assert "line 4" in err
        assert "column 1" in err

    def test_missing_input_exits_4(self, tmp_path, capsys):
        code = main(["sense", "--input", str(tmp_path / "nope.csv")])
        assert code == EXIT_IO

    def test_numerical_failure_exits_3(self, tmp_path, capsys):
        code = main(["simulate", "--t-end", "5", "--method", "fixed",
                     "--step", "1e-6", "--max-steps", "10",
                     "--out-trajectory", str(tmp_path / "t.csv"),
                     "--out-waveform", str(tmp_path / "w.csv")])
        assert code == EXIT_NUMERICAL

    def test_missing_required_option_exits_2(self, capsys):
        assert main(["fit"]) == EXIT_CONFIG


class TestSpectraMode:
    def test_single_level_symmetric_peak(self, tmp_path, capsys):
        out_path = tmp_path / "sp.csv"
        code, out = run_cli(capsys, "spectra", "--charge-levels", "0",
                            "--detuning-min", "-15", "--detuning-max", "15",
                            "--detuning-points", "301", "--output", str(out_path))
        assert code == EXIT_OK
        rows = np.loadtxt(out_path, delimiter=",", skiprows=5)
        det, val = rows[:, 0], rows[:, 2]
        assert val[np.argmax(val)] == pytest.approx(1.0, rel=1e-12)
        assert det[np.argmax(val)] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(val, val[::-1], rtol=1e-12)  # even function

    def test_two_levels_emit_envelope_pair(self, tmp_path, capsys):
        out_path = tmp_path / "sp.csv"
        code, out = run_cli(capsys, "spectra", "--charge-levels", "0,1e15",
                            "--output", str(out_path))
        pairs = kv(out)
        assert code == EXIT_OK
        assert float(pairs["peak_separation_mhz"]) == pytest.approx(9.0, abs=1e-9)
        rows = np.loadtxt(out_path, delimiter=",", skiprows=5)
        assert set(np.unique(rows[:, 1])) == {0.0, 1e15}


class TestFitMode:
    def test_fit_on_simulated_file(self, tmp_path, capsys):
        wf_path = tmp_path / "wf.csv"
        code, _ = run_cli(capsys, "simulate", "--t-end", "5",
                          "--sample-interval", "0.001", "--max-shift", "-9",
                          "--out-trajectory", str(tmp_path / "t.csv"),
                          "--out-waveform", str(wf_path))
        assert code == EXIT_OK
        fitted = tmp_path / "fitted.csv"
        code, out = run_cli(capsys, "fit", "--input", str(wf_path),
                            "--max-shift", "-9", "--constrain-beta-delta", "true",
                            "--alpha", "0.8", "--beta", "0.23", "--gamma", "0.3",
                            "--x0", "11", "--y0", "3.3",
                            "--n-starts", "2", "--spread", "0.05",
                            "--output", str(fitted))
        pairs = kv(out)
        assert code == EXIT_OK
        assert float(pairs["gamma"]) == pytest.approx(0.31755, abs=3e-4)
        assert float(pairs["beta"]) == float(pairs["delta"])
        model_wf = read_waveform(fitted)
        data_wf = read_waveform(wf_path)
        rms = float(np.sqrt(np.mean((model_wf.values - data_wf.values) ** 2)))
        assert rms < 1e-4


class TestDiscriminateMode:
    def test_report_and_csv(self, tmp_path, capsys):
        out_path = tmp_path / "disc.csv"
        code, out = run_cli(capsys, "discriminate", "--window", "90",
                            "--sample-interval", "0.01", "--max-shift", "-9",
                            "--output", str(out_path))
        pairs = kv(out)
        assert code == EXIT_OK
        assert float(pairs["rms_ratio"]) > 3.0
        assert pairs["drift_non_decreasing"] == "True"
        rows = np.loadtxt(out_path, delimiter=",", skiprows=5)
        assert rows.shape[0] == int(pairs["pulse_count"])

    def test_window_too_short_exits_3(self, tmp_path, capsys):
        code = main(["discriminate", "--window", "5", "--max-shift", "-9",
                     "--output", str(tmp_path / "d.csv")])
        assert code == EXIT_NUMERICAL


class TestSenseMode:
    def test_sense_pulse_train(self, tmp_path, capsys):
        w = make_pulse_train(1.0 / 11.9828)
        path = tmp_path / "w.csv"
        write_waveform(path, w)
        code, out = run_cli(capsys, "sense", "--input", str(path))
        pairs = kv(out)
        assert code == EXIT_OK
        assert float(pairs["b_gauss"]) == pytest.approx(11.6, rel=1e-9)

    def test_sense_below_threshold(self, tmp_path, capsys):
        t = 0.01 * np.arange(100)
        from lvsense import TransmissionWaveform
        write_waveform(tmp_path / "flat.csv",
                       TransmissionWaveform(t, np.full(100, 0.25)))
        code, out = run_cli(capsys, "sense", "--input", str(tmp_path / "flat.csv"))
        pairs = kv(out)
        assert code == EXIT_OK
        assert pairs["below_threshold"] == "True"
        assert "B < 4" in pairs["statement"]

    def test_sense_with_calibration_file(self, tmp_path, capsys):
        from lvsense import FieldCalibration
        from lvsense.fileio import calibration_to_config, write_config
        cal = FieldCalibration(freq_slope=2.0, freq_slope_err=0.01)
        cal_path = tmp_path / "cal.cfg"
        write_config(cal_path, calibration_to_config(cal))
        w = make_pulse_train(1.0 / (2.0 * 10.0))  # 20 kHz at B = 10 G
        write_waveform(tmp_path / "w.csv", w)
        code, out = run_cli(capsys, "sense", "--input", str(tmp_path / "w.csv"),
                            "--calibration", str(cal_path))
        assert code == EXIT_OK
        assert float(kv(out)["b_gauss"]) == pytest.approx(10.0, rel=1e-9)


class TestDeterminism:
    def test_repeated_runs_byte_identical(self, tmp_path, capsys):
        # identical config + seed, same output paths, run twice;
        # also exercised mode-by-mode in the acceptance suite
        tr = tmp_path / "t.csv"
        wf = tmp_path / "w.csv"
        args = ["simulate", "--t-end", "2", "--noise", "additive-gaussian",
                "--sigma", "0.01", "--seed", "3",
                "--out-trajectory", str(tr), "--out-waveform", str(wf)]
        outs = []
        for _ in range(2):
            code, out = run_cli(capsys, *args)
            assert code == EXIT_OK
            outs.append((tr.read_bytes(), wf.read_bytes(), out))
        assert outs[0] == outs[1]
