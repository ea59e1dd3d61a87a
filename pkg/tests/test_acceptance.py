"""Acceptance gate: quantitative anchors and property sweeps, one per criterion.

Each criterion prints a single PASS/FAIL line (run with -s, or execute this
file directly) and is asserted at its stated tolerance.

Criterion 4 is expected to fail: with the reference rates the minimum orbit
period is 2*pi/sqrt(alpha*gamma) = 12.875 ms, and the period only grows with
amplitude, so no 5 ms record can contain the two pulses the first/last-pulse
comparison needs. The identical check passes at a 90 ms window (see
test_c4_supplementary_long_window); the 5 ms variant is kept asserting the
stated window so the gap stays visible.
"""

import math
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))  # direct execution

from lvsense import (DelayParams, FieldCalibration, FitProblem, IntegratorOptions,
                     LvParams, MultiStart, NoiseModel, PopulationState,
                     WindowTooShortError, conserved_quantity, field_from_waveform,
                     fit, frequency_at_field, gamma_discrimination, integrate,
                     integrate_delayed, params_at_field, period,
                     synthesize_waveform)
from lvsense.cli import main as cli_main
from conftest import FIG4, GAMMA_PAIR, PULSE_MODEL, REF_INIT, make_pulse_train

T_LIN = 2.0 * math.pi / math.sqrt(FIG4.alpha * FIG4.gamma)  # 12.8749 ms


def _report(cid: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {cid}: {'PASS' if ok else 'FAIL'} - {detail}")


def check_conservation():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    rtol = 1e-9
    for _ in range(100):
        p = LvParams(*rng.uniform(0.1, 2.0, 4))
        coex = p.coexistence()
        init = PopulationState(coex.x * math.exp(rng.uniform(-1, 1)),
                               coex.y * math.exp(rng.uniform(-1, 1)))
        traj = integrate(p, init, (0.0, 20.0),
                         IntegratorOptions(rtol=rtol, sample_interval=0.02))
        v = (p.delta * traj.x - p.gamma * np.log(traj.x)
             + p.beta * traj.y - p.alpha * np.log(traj.y))
        v0 = conserved_quantity(init, p)
        worst = max(worst, float(np.max(np.abs(v - v0)) / abs(v0)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 100.0 * rtol and elapsed < 10.0
    return ok, f"worst drift {worst:.3e} (limit {100.0 * rtol:.0e}), {elapsed:.1f}s (limit 10s)"


def test_c1_conservation():
    ok, detail = check_conservation()
    _report("1 conservation", ok, detail)
    assert ok, detail


def test_c2_linearized_period():
    coex = FIG4.coexistence()
    init = PopulationState(coex.x * (1.0 + 1e-3), coex.y)
    measured = period(FIG4, init)
    rel = abs(measured - T_LIN) / T_LIN
    ok = rel < 1e-3
    detail = f"measured {measured:.6f} ms vs 2*pi/sqrt(alpha*gamma) = {T_LIN:.6f} ms (rel {rel:.2e})"
    _report("2 linearized-period", ok, detail)
    assert ok, detail


def test_c3_oracle_equivalence():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        p = LvParams(*rng.uniform(0.1, 2.0, 4))
        coex = p.coexistence()
        init = PopulationState(coex.x * math.exp(rng.uniform(-0.7, 0.7)),
                               coex.y * math.exp(rng.uniform(-0.7, 0.7)))
        adaptive = integrate(p, init, (0.0, 5.0),
                             IntegratorOptions(method="adaptive", rtol=1e-12,
                                               sample_interval=5.0))
        fixed = integrate(p, init, (0.0, 5.0),
                          IntegratorOptions(method="fixed", step=1e-5,
                                            sample_interval=5.0))
        rel = max(abs(adaptive.x[-1] - fixed.x[-1]) / abs(fixed.x[-1]),
                  abs(adaptive.y[-1] - fixed.y[-1]) / abs(fixed.y[-1]))
        worst = max(worst, rel)
    ok = worst <= 1e-8
    detail = f"worst relative disagreement {worst:.3e} (limit 1e-8) over 20 instances"
    _report("3 oracle-equivalence", ok, detail)
    assert ok, detail


def _discrimination_checks(window: float):
    report = gamma_discrimination(FIG4, GAMMA_PAIR[0], GAMMA_PAIR[1], window,
                                  REF_INIT, PULSE_MODEL)
    ratio_ok = report.rms_ratio >= 3.0
    drift_ok = bool(np.all(np.diff(report.peak_drift) >= -1e-12))
    detail = (f"window {window:g} ms: {report.pulse_positions.size} pulses, "
              f"last/first RMS ratio {report.rms_ratio:.1f} (need >= 3), "
              f"drift non-decreasing: {drift_ok}")
    return ratio_ok and drift_ok, detail


def test_c4_gamma_sensitivity_5ms_window():
    # stated window: 5 ms. This cannot pass: the orbit period is bounded
    # below by T_LIN = 12.875 ms (period grows with orbit amplitude), so at
    # most one pulse fits and the first/last comparison is undefined.
    try:
        ok, detail = _discrimination_checks(5.0)
    except WindowTooShortError as exc:
        ok = False
        detail = (f"unattainable as stated: minimum orbit period is "
                  f"2*pi/sqrt(alpha*gamma) = {T_LIN:.4f} ms and grows with "
                  f"amplitude, so a 5 ms record holds at most one pulse "
                  f"({exc}); the identical check passes at 90 ms, see "
                  f"test_c4_supplementary_long_window")
    _report("4 gamma-sensitivity (5 ms)", ok, detail)
    assert ok, detail


def test_c4_supplementary_long_window():
    # capability demonstration at a window long enough for several pulses
    ok, detail = _discrimination_checks(90.0)
    _report("4s gamma-sensitivity (90 ms)", ok, detail)
    assert ok, detail


def _reference_waveform(noise=NoiseModel()):
    opts = IntegratorOptions(method="fixed", step=2.5e-4, sample_interval=5e-4)
    traj = integrate(FIG4, REF_INIT, (0.0, 5.0), opts)
    return synthesize_waveform(traj, PULSE_MODEL, noise)


def test_c5_fit_round_trip():
    t0 = time.perf_counter()
    clean = _reference_waveform()
    guess = LvParams(FIG4.alpha * 1.15, FIG4.beta * 0.9, FIG4.gamma * 1.1, FIG4.delta * 0.9)
    guess_init = PopulationState(REF_INIT.x * 0.85, REF_INIT.y * 1.2)

    problem = FitProblem(data=clean, lineshape=PULSE_MODEL, constrain_beta_delta=True)
    res = fit(problem, MultiStart(params=guess, init=guess_init, n_starts=4,
                                  spread=0.15, seed=1))
    err_clean = abs(res.params.gamma - FIG4.gamma)
    clean_ok = err_clean <= 3e-4

    sigma = 0.02 * float(np.ptp(clean.values))
    errs = []
    for seed in range(20):
        noisy = _reference_waveform(NoiseModel("additive-gaussian", sigma, seed))
        noisy_problem = FitProblem(data=noisy, lineshape=PULSE_MODEL,
                                   constrain_beta_delta=True)
        r = fit(noisy_problem, MultiStart(params=guess, init=guess_init,
                                          n_starts=2, spread=0.1, seed=seed + 100))
        errs.append(abs(r.params.gamma - FIG4.gamma))
    median_err = float(np.median(errs))
    noisy_ok = median_err <= 1e-3
    elapsed = time.perf_counter() - t0

    ok = clean_ok and noisy_ok and elapsed < 120.0
    detail = (f"noise-free gamma error {err_clean:.2e} (limit 3e-4); "
              f"median gamma error over 20 noisy seeds {median_err:.2e} "
              f"(limit 1e-3); {elapsed:.0f}s (limit 120s)")
    _report("5 fit-round-trip", ok, detail)
    assert ok, detail


def test_c6_delay_reduction():
    init = PopulationState(2.0, 2.0)
    opts = IntegratorOptions(method="fixed", step=5e-4, sample_interval=0.05)
    plain = integrate(FIG4, init, (0.0, 2.0), opts)
    delayed0 = integrate_delayed(DelayParams(FIG4, tau=0.0), init, (0.0, 2.0), opts)
    reduction_err = max(float(np.max(np.abs(plain.x - delayed0.x))),
                        float(np.max(np.abs(plain.y - delayed0.y))))
    reduction_ok = reduction_err <= 10.0 * 1e-9

    errs = []
    for tau in (0.04, 0.02, 0.01, 0.005):
        d = integrate_delayed(DelayParams(FIG4, tau=tau), init, (0.0, 2.0), opts)
        errs.append(math.hypot(d.x[-1] - plain.x[-1], d.y[-1] - plain.y[-1]))
    ratios = [e1 / e2 for e1, e2 in zip(errs, errs[1:])]
    ratio_ok = all(1.5 <= r <= 2.5 for r in ratios)

    ok = reduction_ok and ratio_ok
    detail = (f"tau=0 max deviation {reduction_err:.2e} (limit 1e-8); "
              f"halving-tau ratios {[f'{r:.2f}' for r in ratios]} (need [1.5, 2.5])")
    _report("6 delay-reduction", ok, detail)
    assert ok, detail


def _log_parabola_vertex(x: np.ndarray, logv: np.ndarray) -> float:
    i = int(np.argmax(logv))
    i = min(max(i, 1), x.size - 2)
    left, center, right = logv[i - 1], logv[i], logv[i + 1]
    dx = x[i + 1] - x[i]
    return float(x[i] + 0.5 * dx * (left - right) / (left - 2.0 * center + right))


def test_c7_lineshape_anchors():
    from lvsense import LineshapeModel
    from lvsense.cli import spectra_scan
    model = LineshapeModel()  # fwhm 12, shift ceiling 9, unit amplitude
    grid = np.linspace(-30.0, 30.0, 1201)  # step 0.05, contains -6, 0, +6
    rows = spectra_scan(model, grid, (0.0, 1e15))
    data = np.array(rows)
    low = data[data[:, 1] == 0.0]
    high = data[data[:, 1] == 1e15]

    r0 = low[low[:, 0] == 0.0, 2][0]
    r6 = low[low[:, 0] == 6.0, 2][0]
    fwhm_measured = math.sqrt(4.0 * math.log(2.0) * 36.0 / math.log(r0 / r6))
    fwhm_err = abs(fwhm_measured - 12.0)
    fwhm_ok = fwhm_err <= 1e-12

    v_low = _log_parabola_vertex(low[:, 0], np.log(low[:, 2]))
    v_high = _log_parabola_vertex(high[:, 0], np.log(high[:, 2]))
    sep_err = abs(abs(v_high - v_low) - 9.0)
    sep_ok = sep_err <= 1e-9

    ok = fwhm_ok and sep_ok
    detail = (f"fwhm from scan {fwhm_measured:.14f} MHz (|err| {fwhm_err:.1e}, limit 1e-12); "
              f"asymptotic peak separation error {sep_err:.1e} MHz (limit 1e-9)")
    _report("7 lineshape-anchors", ok, detail)
    assert ok, detail


def test_c8_sensing_roundtrip():
    cal = FieldCalibration()
    worst = 0.0
    for b in (5.0, 8.0, 11.6, 15.0, 21.3, 25.0):
        freq = frequency_at_field(b, cal)
        est = field_from_waveform(make_pulse_train(1.0 / freq), cal)
        worst = max(worst, abs(est.b - b) / b)
    roundtrip_ok = worst <= 1e-6

    below = frequency_at_field(2.0, cal) is None
    anchors_ok = (params_at_field(12.1, cal) == LvParams(0.651, 0.217, 0.276, 0.217)
                  and params_at_field(21.3, cal) == LvParams(0.868, 0.434, 0.566, 0.434))

    ok = roundtrip_ok and below and anchors_ok
    detail = (f"roundtrip worst rel error {worst:.2e} (limit 1e-6); "
              f"B=2 G reports no oscillation: {below}; anchors exact: {anchors_ok}")
    _report("8 sensing-roundtrip", ok, detail)
    assert ok, detail


def test_c9_cli_determinism(tmp_path, capsys):
    wf_in = tmp_path / "input_wf.csv"
    cli_main(["simulate", "--t-end", "60", "--sample-interval", "0.01",
              "--max-shift", "-9",
              "--out-trajectory", str(tmp_path / "seed_tr.csv"),
              "--out-waveform", str(wf_in)])
    capsys.readouterr()

    mode_args = {
        "simulate": ["--t-end", "2", "--noise", "additive-gaussian",
                     "--sigma", "0.01", "--seed", "3",
                     "--out-trajectory", str(tmp_path / "s_tr.csv"),
                     "--out-waveform", str(tmp_path / "s_wf.csv")],
        "simulate-delayed": ["--t-end", "2", "--tau", "0.024", "--seed", "5",
                             "--out-trajectory", str(tmp_path / "d_tr.csv"),
                             "--out-waveform", str(tmp_path / "d_wf.csv")],
        "spectra": ["--output", str(tmp_path / "spectra.csv")],
        "fit": ["--input", str(wf_in), "--constrain-beta-delta", "true",
                "--max-shift", "-9", "--n-starts", "2", "--max-iterations", "60",
                "--seed", "2", "--output", str(tmp_path / "fitted.csv")],
        "discriminate": ["--window", "90", "--sample-interval", "0.02",
                         "--max-shift", "-9",
                         "--output", str(tmp_path / "disc.csv")],
        "sense": ["--input", str(wf_in), "--output", str(tmp_path / "sense.cfg")],
    }

    all_ok = True
    failures = []
    for mode, args in mode_args.items():
        snapshots = []
        for _ in range(2):
            code = cli_main([mode] + args)
            out = capsys.readouterr().out
            assert code == 0, f"{mode} exited {code}"
            files = {}
            for flag in ("--out-trajectory", "--out-waveform", "--output"):
                if flag in args:
                    path = args[args.index(flag) + 1]
                    files[flag] = open(path, "rb").read()
            snapshots.append((out, files))
        if snapshots[0] != snapshots[1]:
            all_ok = False
            failures.append(mode)
    detail = ("all six modes byte-identical across repeated runs" if all_ok
              else f"non-deterministic modes: {failures}")
    _report("9 cli-determinism", all_ok, detail)
    assert all_ok, detail


if __name__ == "__main__":
    # standalone run: one printed pass/fail line per criterion (the CLI
    # determinism criterion needs pytest fixtures; run `pytest -s` for it)
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c") and callable(fn):
            if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                continue
            try:
                fn()
            except AssertionError:
                failures += 1
    raise SystemExit(1 if failures else 0)
