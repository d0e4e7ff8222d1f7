"""Post-processing mirroring the measurement pipeline.

Spectra of impulse responses, ring-down fits for effective damping rates,
stroboscopic reconstruction of the instantaneous cavity resonance from
probe-transmission traces at many detunings, per-cycle shuttled-photon
statistics, and detuning-plane trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import find_peaks

from .dynamics import TimeSeries
from .params import DeviceParams


@dataclass
class Spectrum:
    freq: np.ndarray           # Hz, one-sided bins
    mag: np.ndarray            # magnitude spectrum of the windowed input
    window: str = "hann"
    df: float = 0.0            # bin width, Hz


@dataclass
class ShuttleStats:
    n_tr: float                # photons delivered through the right cavity / cycle
    peaks_per_cycle: int
    period: float              # s
    n_cycles: int = 0


def _uniform_dt(t: np.ndarray) -> float:
    dts = np.diff(t)
    dt = dts[0]
    if not np.allclose(dts, dt, rtol=1e-9, atol=0.0):
        raise ValueError("non-uniform sample stride")
    return float(dt)


def fft_spectrum(t: np.ndarray, x: np.ndarray, window: str = "hann") -> Spectrum:
    """One-sided magnitude spectrum of a uniformly sampled real trace.

    A Hann window is applied by default.  Parseval consistency between the
    windowed input and the spectrum is preserved by the plain rfft scaling.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least 2 samples")
    dt = _uniform_dt(t)
    if window == "hann":
        w = np.hanning(len(x))
    elif window in (None, "none", "rect"):
        w = np.ones(len(x))
    else:
        raise ValueError("unknown window %r" % window)
    spec = np.fft.rfft(x * w)
    freq = np.fft.rfftfreq(len(x), dt)
    return Spectrum(freq=freq, mag=np.abs(spec), window=window or "rect",
                    df=1.0 / (len(x) * dt))


def peak_frequencies(spec: Spectrum, n_peaks: int = 2,
                     min_freq: float = 0.0, prominence_frac: float = 1e-3):
    """Strongest spectral peaks with parabolic sub-bin interpolation (Hz)."""
    mask = spec.freq >= min_freq
    mag = spec.mag.copy()
    mag[~mask] = 0.0
    if mag.max() == 0.0:
        return []
    idx, _ = find_peaks(mag, prominence=prominence_frac * mag.max())
    if len(idx) == 0:
        return []
    order = np.argsort(mag[idx])[::-1][:n_peaks]
    out = []
    for i in sorted(idx[order]):
        if 0 < i < len(mag) - 1:
            y0, y1, y2 = mag[i - 1], mag[i], mag[i + 1]
            denom = y0 - 2 * y1 + y2
            shift = 0.5 * (y0 - y2) / denom if denom != 0.0 else 0.0
        else:
            shift = 0.0
        out.append(float((i + shift) * spec.df))
    return out


@dataclass
class RingdownFit:
    omega: float               # rad/s
    gamma_eff: float           # 1/s (energy decay rate; envelope falls at /2)
    amplitude: float
    phase: float
    offset: float
    residual: float            # rms residual / fitted amplitude
    low_confidence: bool = False


def ringdown_fit(t: np.ndarray, x: np.ndarray) -> RingdownFit:
    """Least-squares fit of A exp(-Gamma t / 2) cos(Omega t + phi) + C.

    Omega is seeded from the FFT peak and Gamma from a log-envelope linear
    fit before the nonlinear refinement, which avoids the common local
    minima.  A constant trace comes back flagged low-confidence with ~zero
    amplitude.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    t = t - t[0]
    c0 = float(np.mean(x))
    y = x - c0
    a0 = float(np.max(np.abs(y)))
    if a0 == 0.0 or np.ptp(x) < 1e-300:
        return RingdownFit(0.0, 0.0, 0.0, 0.0, c0, 0.0, low_confidence=True)

    spec = fft_spectrum(t, y)
    pk = peak_frequencies(spec, n_peaks=1, min_freq=spec.df * 1.5)
    w0 = 2 * math.pi * pk[0] if pk else 2 * math.pi * spec.df

    # crude envelope from per-period maxima -> log-linear decay estimate
    period = 2 * math.pi / w0
    dt = _uniform_dt(t)
    per = max(2, int(round(period / dt)))
    n_seg = len(y) // per
    g0 = 0.0
    if n_seg >= 3:
        seg_t = np.array([t[i * per + per // 2] for i in range(n_seg)])
        seg_a = np.array([np.max(np.abs(y[i * per:(i + 1) * per])) for i in range(n_seg)])
        good = seg_a > 0
        if good.sum() >= 3:
            slope, _ = np.polyfit(seg_t[good], np.log(seg_a[good]), 1)
            g0 = -2.0 * slope

    def model(tt, a, g, w, ph, c):
        return a * np.exp(-g * tt / 2.0) * np.cos(w * tt + ph) + c

    best = None
    for ph0 in (0.0, -math.pi / 2, math.pi / 2, math.pi):
        try:
            p, _ = curve_fit(model, t, x, p0=[a0, g0, w0, ph0, c0], maxfev=20000)
        except RuntimeError:
            continue
        res = float(np.sqrt(np.mean((model(t, *p) - x) ** 2)))
        if best is None or res < best[1]:
            best = (p, res)
    if best is None:
        raise RuntimeError("ring-down fit did not converge; best initial "
                           "(Omega, Gamma) = (%.4g, %.4g)" % (w0, g0))
    p, res = best
    a, g, w, ph, c = p
    if a < 0:
        a, ph = -a, ph + math.pi
    rel = res / a if a > 0 else math.inf
    return RingdownFit(omega=abs(w), gamma_eff=g, amplitude=a, phase=ph,
                       offset=c, residual=rel,
                       low_confidence=not (a > 10 * res))


# ---------------------------------------------------------------------------
# stroboscopic resonance reconstruction
# ---------------------------------------------------------------------------

@dataclass
class StroboResult:
    t: np.ndarray
    shift_norm: np.ndarray         # resonance shift in linewidth units
    omega: np.ndarray              # absolute resonance trajectory (rad/s)
    confidence: np.ndarray         # 1/(1+rms residual) per sample
    covered: np.ndarray            # bool, inside the sampled detuning band
    theta: np.ndarray = None       # angle trace used for shift-vs-angle
    shift_vs_angle: tuple = None   # (theta sorted, shift rad/s)


def strobo_reconstruct(
    traces,
    device: DeviceParams,
    cavity: str = "right",
    theta_column: str = "theta_torsional_rad",
    grid_points: int = 481,
) -> StroboResult:
    """Locate the instantaneous cavity resonance from probe-transmission traces.

    ``traces`` is a list of (delta_b, TimeSeries) pairs taken at fixed probe
    detunings delta_b (relative to the rest resonance), phase-aligned on a
    common trigger.  At each time sample the known side-coupled Lorentzian
    line shape is fit across the detuning axis with the single unknown being
    the instantaneous resonance shift; a coarse grid search is refined by
    parabolic interpolation of the error minimum.

    Needs at least 5 detunings spanning the sweep; samples where the
    resonance leaves the sampled band are flagged uncovered.
    """
    if len(traces) < 5:
        raise ValueError("need >= 5 probe detunings, got %d" % len(traces))
    opt = device.optics
    if cavity == "right":
        gi, ge = opt.gamma_ir, opt.gamma_er
        omega0, tau = opt.omega_r0, opt.tau_r
    else:
        gi, ge = opt.gamma_il, opt.gamma_el
        omega0, tau = opt.omega_l0, opt.tau_l
    c_dip = ((gi - ge) / (gi + ge)) ** 2

    def line(delta):
        d2 = delta * delta
        return (c_dip + d2) / (1.0 + d2)

    deltas = np.array([d for d, _ in traces], dtype=float)
    t = np.asarray(traces[0][1].t)
    mat = np.stack([np.asarray(tr["probe_transmission"]) for _, tr in traces])
    for _, tr in traces[1:]:
        if len(tr.t) != len(t) or not np.allclose(tr.t, t, rtol=1e-9):
            raise ValueError("traces are not sampled on a common time base")

    span = deltas.max() - deltas.min()
    s_grid = np.linspace(deltas.min() - 1.0, deltas.max() + 1.0, grid_points)
    # error surface: sum_i (line(delta_i - s) - T_i(t))^2, vectorized over t
    model = line(deltas[None, :] - s_grid[:, None])      # (n_s, n_probe)
    shifts = np.empty(len(t))
    resid = np.empty(len(t))
    chunk = max(1, 2_000_000 // (len(s_grid) * len(deltas)))
    for lo in range(0, len(t), chunk):
        hi = min(len(t), lo + chunk)
        block = mat[:, lo:hi].T                          # (n_t, n_probe)
        err = ((model[None, :, :] - block[:, None, :]) ** 2).sum(axis=2)
        k = np.argmin(err, axis=1)
        # parabolic refinement of the grid minimum
        k_in = np.clip(k, 1, len(s_grid) - 2)
        e0 = err[np.arange(len(k)), k_in - 1]
        e1 = err[np.arange(len(k)), k_in]
        e2 = err[np.arange(len(k)), k_in + 1]
        denom = e0 - 2 * e1 + e2
        frac = np.where(denom > 0, 0.5 * (e0 - e2) / np.where(denom == 0, 1, denom), 0.0)
        frac = np.clip(frac, -0.5, 0.5)
        shifts[lo:hi] = s_grid[k_in] + frac * (s_grid[1] - s_grid[0])
        resid[lo:hi] = np.sqrt(e1 / len(deltas))
    covered = (shifts > deltas.min() - 0.9) & (shifts < deltas.max() + 0.9)
    conf = 1.0 / (1.0 + resid / max(1e-12, float(np.std(mat))))

    theta = None
    sva = None
    tr0 = traces[0][1]
    if theta_column in tr0.data:
        theta = np.asarray(tr0[theta_column])
        order = np.argsort(theta)
        sva = (theta[order], (shifts / tau)[order])
    return StroboResult(t=t, shift_norm=shifts, omega=omega0 + shifts / tau,
                        confidence=conf, covered=covered, theta=theta,
                        shift_vs_angle=sva)


# ---------------------------------------------------------------------------
# shuttle statistics and trajectories
# ---------------------------------------------------------------------------

def _upward_crossings(t, theta):
    """Times of upward zero crossings of theta, linearly interpolated."""
    th = np.asarray(theta)
    s = np.signbit(th)
    idx = np.where(s[:-1] & ~s[1:])[0]
    out = []
    for i in idx:
        y0, y1 = th[i], th[i + 1]
        if y1 == y0:
            out.append(t[i])
        else:
            out.append(t[i] + (t[i + 1] - t[i]) * (-y0) / (y1 - y0))
    return np.array(out)


def count_shuttled_photons(
    series: TimeSeries,
    device: DeviceParams,
    prominence_frac: float = 0.05,
    theta_column: str = "theta_torsional_rad",
) -> ShuttleStats:
    """Photons delivered through the right cavity per oscillation cycle.

    n_tr integrates gamma_R * n_R(t) over one cycle; cycle boundaries are the
    upward zero crossings of the torsional angle.  The per-cycle local-maxima
    count of n_R(t) (with a prominence threshold relative to the cycle peak)
    distinguishes single-pass from crossover shuttling.  A static trace (no
    crossings) integrates one nominal mechanical period.
    """
    t = np.asarray(series.t)
    n_r = np.asarray(series["n_right"])
    gamma_r = device.optics.gamma_r
    omega_m = device.torsional.omega_m
    theta = np.asarray(series[theta_column])

    crossings = _upward_crossings(t, theta)
    if len(crossings) < 2:
        period = 2 * math.pi / omega_m
        if t[-1] - t[0] < 3 * period:
            raise ValueError("trace holds no full cycles and is shorter than "
                             "3 nominal periods")
        n_static = float(np.mean(n_r))
        return ShuttleStats(n_tr=gamma_r * n_static * period,
                            peaks_per_cycle=0, period=period, n_cycles=0)
    if len(crossings) < 4:
        raise ValueError("need >= 3 full cycles in steady oscillation")

    totals = []
    peak_counts = []
    for a, b in zip(crossings[:-1], crossings[1:]):
        sel = (t >= a) & (t < b)
        if sel.sum() < 8:
            continue
        seg = n_r[sel]
        totals.append(gamma_r * np.trapezoid(seg, t[sel]))
        prom = prominence_frac * float(seg.max()) if seg.max() > 0 else None
        if prom:
            # wrap the segment so a peak at the cycle boundary is counted once
            idx, _ = find_peaks(np.concatenate([seg[-4:], seg, seg[:4]]),
                                prominence=prom)
            idx = idx[(idx >= 4) & (idx < 4 + len(seg))]
            peak_counts.append(len(idx))
        else:
            peak_counts.append(0)
    if not totals:
        raise ValueError("no steady cycles detected")
    period = float(np.mean(np.diff(crossings)))
    return ShuttleStats(
        n_tr=float(np.mean(totals)),
        peaks_per_cycle=int(round(np.median(peak_counts))),
        period=period,
        n_cycles=len(totals),
    )


def detuning_trajectory(
    series: TimeSeries,
    device: DeviceParams,
    omega_pump: float,
    theta_column: str = "theta_torsional_rad",
):
    """Map theta(t) to the normalized pump detunings of both cavities.

    Returns (delta_l(t), delta_r(t)); overlay on a shuttle map to follow the
    system's path through the photon-transfer landscape.  Thermo-optic shifts
    recorded in the trace are included.
    """
    opt = device.optics
    theta = np.asarray(series[theta_column])
    dmap = device.disp_map
    sh_l = dmap.shift("left", theta, allow_extrapolation=True)
    sh_r = dmap.shift("right", theta, allow_extrapolation=True)
    flap = device.flapping
    if flap is not None and "theta_flapping_rad" in series.data:
        thf = np.asarray(series["theta_flapping_rad"])
        sh_l = sh_l + flap.ga_l * thf
        sh_r = sh_r + flap.ga_r * thf
    if "u_left_k" in series.data:
        sh_l = sh_l + device.thermal.dw_dt * np.asarray(series["u_left_k"])
        sh_r = sh_r + device.thermal.dw_dt * np.asarray(series["u_right_k"])
    delta_l = (omega_pump - (opt.omega_l0 + sh_l)) * opt.tau_l
    delta_r = (omega_pump - (opt.omega_r0 + sh_r)) * opt.tau_r
    return delta_l, delta_r


def write_trajectory_csv(path, t, delta_l, delta_r) -> None:
    with open(path, "w") as fh:
        fh.write("t_s,delta_L,delta_R\n")
        for row in zip(t, delta_l, delta_r):
            fh.write(",".join("%.17g" % v for v in row) + "\n")
