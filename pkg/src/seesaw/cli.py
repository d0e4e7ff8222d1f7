"""Batch experiment runner.

Every subcommand runs one named, reproducible scenario end to end and
writes plot-ready CSV artifacts plus a JSON summary into the output
directory.  Each artifact embeds the fully resolved configuration and seed,
so re-running from the embedded config reproduces the numerical columns
byte for byte.

    seesaw spectrum  --preset paper_device --out out/
    seesaw impulse   --env air
    seesaw shuttle   --pump-power 6.76e-6
    seesaw map --set optics.kappa_hz=7.2e8
    seesaw threshold --preset reduced_stiffness

Exit codes: 0 success, 2 configuration/validation failure, 3 numerical
failure.  SEESAW_THREADS caps how many worker processes sweep subcommands
may use.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, config, optics
from .dynamics import (
    NonFiniteError,
    RegimeError,
    SimConfig,
    StepConstraintError,
    SystemState,
    find_limit_cycle,
    find_threshold,
    impulse_response,
    simulate_quasistatic,
)
from .mechanics import MechMode, MechState, NoiseSpec, langevin_trace, torque_sensitivity
from .params import DriveConfig, Laser
from scipy.constants import k as K_B

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

EXPERIMENTS = ("spectrum", "impulse", "selfosc", "shuttle", "map", "noise",
               "threshold", "strobo")


def _n_workers(n_jobs: int) -> int:
    cap = os.environ.get("SEESAW_THREADS")
    cap = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_jobs, cap))


def _resolve(args):
    """(device, drive, sim, flat_echo) from preset/config/overrides."""
    overrides = list(args.set or [])
    if args.config:
        with open(args.config) as fh:
            flat = config.parse_flat(fh.read())
    else:
        flat = {"preset": args.preset}
    if args.preset and "preset" not in flat:
        flat["preset"] = args.preset
    flat = config.apply_overrides(flat, overrides)
    if args.seed is not None:
        flat["sim.seed"] = args.seed
    device, drive, sim = config.build(flat)
    return device, drive, sim, flat


def _outdir(args, name: str) -> Path:
    out = Path(args.out or "seesaw_out") / name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_meta(device, drive, sim) -> dict:
    return config.flatten(device, drive, sim)


def _write_summary(out: Path, payload: dict, device, drive, sim) -> None:
    echo = config.dump(device, drive, sim)
    (out / "config_resolved.txt").write_text(echo)
    payload = dict(payload)
    payload["config_sha256"] = hashlib.sha256(echo.encode()).hexdigest()
    (out / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(json.dumps(payload, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _touch_amplitude(device) -> float:
    """Oscillation amplitude at which the two resonances just align."""
    opt = device.optics
    g_spread = device.disp_map.slope("right", 0.0) - device.disp_map.slope("left", 0.0)
    return abs((opt.omega_r0 - opt.omega_l0) / g_spread)


def _midpoint_omega(device) -> float:
    return 0.5 * (device.optics.omega_l0 + device.optics.omega_r0)


def run_spectrum(args) -> int:
    device, _, sim, _ = _resolve(args)
    out = _outdir(args, "spectrum")
    series = impulse_response(device, environment="vacuum",
                              duration=5e-4, dt=2.5e-9, output_stride=8)
    drive_used = DriveConfig()   # impulse_response builds its own; echo basics
    series.to_csv(out / "impulse_timeseries.csv", _echo_meta(device, None, sim))
    x = series["probe_transmission"]
    spec = analysis.fft_spectrum(series.t, x - np.mean(x))
    peaks = analysis.peak_frequencies(spec, n_peaks=2, min_freq=50e3)
    with open(out / "spectrum.csv", "w") as fh:
        fh.write("freq_hz,magnitude\n")
        for f, m in zip(spec.freq, spec.mag):
            fh.write("%.17g,%.17g\n" % (f, m))
    _write_summary(out, dict(experiment="spectrum",
                             peak_frequencies_hz=peaks,
                             fft_bin_hz=spec.df), device, drive_used, sim)
    return EXIT_OK


def run_impulse(args) -> int:
    device, _, sim, _ = _resolve(args)
    env = args.env
    out = _outdir(args, "impulse")
    series = impulse_response(device, environment=env,
                              output_stride=8 if env == "vacuum" else 1)
    series.to_csv(out / "impulse_timeseries.csv", _echo_meta(device, None, sim))
    x = series["probe_transmission"]
    payload = dict(experiment="impulse", environment=env)
    if env == "vacuum":
        spec = analysis.fft_spectrum(series.t, x - np.mean(x))
        peaks = analysis.peak_frequencies(spec, n_peaks=2, min_freq=50e3)
        with open(out / "spectrum.csv", "w") as fh:
            fh.write("freq_hz,magnitude\n")
            for f, m in zip(spec.freq, spec.mag):
                fh.write("%.17g,%.17g\n" % (f, m))
        payload["peak_frequencies_hz"] = peaks
    else:
        resp = x - x[0]
        i_pk = int(np.argmax(resp))
        later = np.where(resp[i_pk:] < 0)[0]
        payload["mech_peak_time_s"] = float(series.t[i_pk])
        payload["sign_change_time_s"] = (
            float(series.t[i_pk + later[0]]) if len(later) else None)
        payload["thermal_extremum_time_s"] = float(series.t[int(np.argmin(resp))])
    _write_summary(out, payload, device, None, sim)
    return EXIT_OK


def run_selfosc(args) -> int:
    device, drive, sim, _ = _resolve(args)
    out = _outdir(args, "selfosc")
    if drive.pump is None:
        pump = Laser.at_detuning(device, "left", 1.0 / math.sqrt(3.0),
                                 args.pump_power, role="pump")
        drive = DriveConfig(lasers=(pump,) + tuple(
            l for l in drive.lasers if l.role != "pump"))
    cyc = find_limit_cycle(device, drive)
    payload = dict(
        experiment="selfosc",
        converged=cyc.converged,
        amplitude_rad=cyc.amplitude,
        frequency_rad_s=cyc.frequency,
        work_per_cycle_j=cyc.work_per_cycle,
        dissipation_per_cycle_j=cyc.dissipation_per_cycle,
        energy_balance_residual=cyc.residual if cyc.converged else None,
        diagnostic=cyc.diagnostic,
    )
    if cyc.converged:
        t_mode = device.torsional
        period = 2 * math.pi / t_mode.omega_m
        simq = SimConfig(method="quasistatic", dt=period / 500,
                         duration=20 * period, output_stride=1,
                         environment=sim.environment)
        st = SystemState(mech=MechState(np.array([cyc.amplitude, 0.0]), np.zeros(2)))
        series = simulate_quasistatic(device, drive, simq, initial=st)
        series.to_csv(out / "selfosc_timeseries.csv", _echo_meta(device, drive, simq))
        payload["amplitude_drift_frac"] = float(
            abs(np.abs(series["theta_torsional_rad"][-500:]).max() - cyc.amplitude)
            / cyc.amplitude)
    _write_summary(out, payload, device, drive, sim)
    return EXIT_OK


def run_shuttle(args) -> int:
    device, drive, sim, _ = _resolve(args)
    out = _outdir(args, "shuttle")
    p_ref = 0.135e-6
    power = args.pump_power if args.pump_power else p_ref
    th_touch = _touch_amplitude(device)
    # prescribed-amplitude scenario: radiation pressure alone cannot sustain
    # these oscillations at sub-uW pump levels (see README), so the amplitude
    # is set by the touching angle and grows ~sqrt(power) above the reference,
    # clipped inside the dispersive-map range.
    if args.amplitude_frac:
        frac = args.amplitude_frac
    else:
        frac = min(math.sqrt(power / p_ref),
                   0.98 * device.disp_map.theta_max / th_touch)
    theta0 = frac * th_touch
    pump = Laser(cavity="left", power_w=power, omega=_midpoint_omega(device),
                 role="pump")
    drive = DriveConfig(lasers=(pump,))
    t_mode = device.torsional
    period = 2 * math.pi / t_mode.omega_m
    simq = SimConfig(method="quasistatic", dt=period / 1000,
                     duration=8 * period, output_stride=1)
    st = SystemState(mech=MechState(np.array([theta0, 0.0]), np.zeros(2)))
    series = simulate_quasistatic(device, drive, simq, initial=st)
    series.to_csv(out / "shuttle_timeseries.csv", _echo_meta(device, drive, simq))
    stats = analysis.count_shuttled_photons(series, device)
    dl, dr = analysis.detuning_trajectory(series, device, pump.omega)
    analysis.write_trajectory_csv(out / "trajectory.csv", series.t, dl, dr)
    _write_summary(out, dict(
        experiment="shuttle",
        pump_power_w=power,
        amplitude_rad=theta0,
        amplitude_over_touching=frac,
        n_tr=stats.n_tr,
        peaks_per_cycle=stats.peaks_per_cycle,
        cycle_period_s=stats.period,
    ), device, drive, simq)
    return EXIT_OK


def run_map(args) -> int:
    device, drive, sim, _ = _resolve(args)
    out = _outdir(args, "map")
    grid = np.linspace(-args.span, args.span, args.points)
    nr = optics.shuttle_map(device, grid, grid)
    optics.write_shuttle_map_csv(out / "shuttle_map.csv", nr, grid, grid)
    mid = args.points // 2
    _write_summary(out, dict(
        experiment="map",
        center_value=float(nr[mid, mid]),
        grid_span=args.span,
        grid_points=args.points,
    ), device, drive, sim)
    return EXIT_OK


def run_noise(args) -> int:
    device, drive, sim, _ = _resolve(args)
    out = _outdir(args, "noise")
    # equipartition demonstration runs on a soft test mode; the paper-device
    # torque floor is reported from the closed form.
    demo = MechMode(kind="torsional", omega_m=2 * math.pi * 1e3, q_m=2.0,
                    inertia=1e-20, ga_l=-1.0, ga_r=1.0)
    spec = NoiseSpec(temperature=device.temperature, seed=sim.noise.seed,
                     enabled=True)
    dt = 0.005 / demo.omega_m
    n_steps = int(2e6)
    trace = langevin_trace(demo, spec, dt, n_steps)
    burn = n_steps // 10
    theta2 = float(np.mean(trace[burn:] ** 2))
    expected = K_B * spec.temperature / (demo.inertia * demo.omega_m**2)
    t_mode = device.torsional
    _write_summary(out, dict(
        experiment="noise",
        demo_theta2=theta2,
        demo_theta2_expected=expected,
        equipartition_ratio=theta2 / expected,
        torque_sensitivity_nm_rthz=torque_sensitivity(t_mode, device.temperature),
        seed=spec.seed,
    ), device, drive, sim)
    return EXIT_OK


def run_threshold(args) -> int:
    device, drive, sim, _ = _resolve(args)
    out = _outdir(args, "threshold")
    if drive.pump is None:
        pump = Laser.at_detuning(device, "left", 1.0 / math.sqrt(3.0), 1e-6,
                                 role="pump")
        drive = DriveConfig(lasers=(pump,))
    try:
        res = find_threshold(device, drive)
        payload = dict(experiment="threshold",
                       threshold_w=res["threshold_w"],
                       marginal_amplitude_rad=res["marginal_amplitude_rad"],
                       photothermal_gain=device.thermal.photothermal_gain)
    except RuntimeError as exc:
        payload = dict(experiment="threshold", threshold_w=None,
                       error=str(exc))
    _write_summary(out, payload, device, drive, sim)
    return EXIT_OK


def _strobo_one(payload):
    """Worker: one probe-detuning trace of the prescribed oscillation."""
    flat, delta_b, theta0, n_cycles = payload
    device, _, _ = config.build(flat)
    t_mode = device.torsional
    period = 2 * math.pi / t_mode.omega_m
    probe = Laser.at_detuning(device, "right", delta_b, 2.3e-9, role="probe")
    drive = DriveConfig(lasers=(probe,))
    simq = SimConfig(method="quasistatic", dt=period / 400,
                     duration=n_cycles * period, output_stride=1)
    st = SystemState(mech=MechState(np.array([theta0, 0.0]), np.zeros(2)))
    return delta_b, simulate_quasistatic(device, drive, simq, initial=st)


def run_strobo(args) -> int:
    device, drive, sim, flat = _resolve(args)
    out = _outdir(args, "strobo")
    th_touch = _touch_amplitude(device)
    theta0 = args.amplitude_frac * th_touch
    deltas = np.linspace(-3.0, 3.0, args.n_probes)
    jobs = [(flat, float(d), theta0, 3) for d in deltas]
    workers = _n_workers(len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_strobo_one, jobs))
    else:
        traces = [_strobo_one(j) for j in jobs]
    traces.sort(key=lambda p: p[0])
    res = analysis.strobo_reconstruct(traces, device, cavity="right")
    with open(out / "resonance_trajectory.csv", "w") as fh:
        fh.write("t_s,shift_norm,omega_rad_s,confidence,covered\n")
        for row in zip(res.t, res.shift_norm, res.omega, res.confidence, res.covered):
            fh.write("%.17g,%.17g,%.17g,%.17g,%d\n" % row)
    if res.shift_vs_angle is not None:
        th, sh = res.shift_vs_angle
        with open(out / "shift_vs_angle.csv", "w") as fh:
            fh.write("theta_rad,shift_rad_s\n")
            for row in zip(th, sh):
                fh.write("%.17g,%.17g\n" % row)
    # true trajectory for residual reporting
    tr0 = traces[0][1]
    theta_t = np.asarray(tr0["theta_torsional_rad"])
    dmap = device.disp_map
    true_shift = dmap.shift("right", theta_t, allow_extrapolation=True) \
        * device.optics.tau_r
    rms = float(np.sqrt(np.mean((res.shift_norm - true_shift) ** 2)))
    sweep = float(true_shift.max() - true_shift.min())
    _write_summary(out, dict(
        experiment="strobo",
        amplitude_rad=theta0,
        rms_error_frac_of_sweep=rms / sweep if sweep else None,
        coverage_frac=float(np.mean(res.covered)),
        n_probes=args.n_probes,
        workers=workers,
    ), device, drive, sim)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="seesaw",
        description="Reproducible torsional two-cavity optomechanics experiments",
    )
    sub = ap.add_subparsers(dest="experiment", required=True)

    def common(p):
        p.add_argument("--preset", default="paper_device",
                       help="named parameter preset (paper_device, reduced_stiffness)")
        p.add_argument("--config", help="flat key-value config file")
        p.add_argument("--seed", type=int, default=None, help="noise seed")
        p.add_argument("--out", help="output directory (default seesaw_out/)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")

    p = sub.add_parser("spectrum", help="vacuum impulse response and its FFT peaks")
    common(p)
    p.set_defaults(fn=run_spectrum)

    p = sub.add_parser("impulse", help="pump-pulse impulse response (vacuum or air)")
    common(p)
    p.add_argument("--env", choices=("vacuum", "air"), default="vacuum")
    p.set_defaults(fn=run_impulse)

    p = sub.add_parser("selfosc", help="energy-balance self-oscillation solve")
    common(p)
    p.add_argument("--pump-power", type=float, default=3.4e-6,
                   help="pump power (W) when no drive is configured")
    p.set_defaults(fn=run_selfosc)

    p = sub.add_parser("shuttle", help="photon shuttling at prescribed amplitude")
    common(p)
    p.add_argument("--pump-power", type=float, default=None,
                   help="pump power in W (default threshold level 0.135 uW)")
    p.add_argument("--amplitude-frac", type=float, default=None,
                   help="oscillation amplitude / alignment-touching angle")
    p.set_defaults(fn=run_shuttle)

    p = sub.add_parser("map", help="normalized right-cavity photon-number map")
    common(p)
    p.add_argument("--span", type=float, default=3.0, help="detuning half-range")
    p.add_argument("--points", type=int, default=121, help="grid points per axis")
    p.set_defaults(fn=run_map)

    p = sub.add_parser("noise", help="Langevin equipartition check and torque floor")
    common(p)
    p.set_defaults(fn=run_noise)

    p = sub.add_parser("threshold", help="self-oscillation threshold power search")
    common(p)
    p.set_defaults(fn=run_threshold)

    p = sub.add_parser("strobo", help="stroboscopic resonance reconstruction")
    common(p)
    p.add_argument("--n-probes", type=int, default=9)
    p.add_argument("--amplitude-frac", type=float, default=1.2,
                   help="oscillation amplitude / alignment-touching angle")
    p.set_defaults(fn=run_strobo)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (config.ConfigError, FileNotFoundError, ValueError) as exc:
        if isinstance(exc, (StepConstraintError, RegimeError)):
            print("numerical configuration error: %s" % exc, file=sys.stderr)
            return EXIT_NUMERICAL
        print("configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteError as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
