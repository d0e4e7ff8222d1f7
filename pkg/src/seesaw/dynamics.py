"""Time-domain integration and dynamical solvers.

Two integration modes cover the huge stiffness span of the physical device
(cavity decay ~ 4e4 times faster than the mechanics):

- ``full``        fixed-step RK4 on cavity fields + mechanics + thermal
                  together, one rotating frame per laser.  Feasible only
                  when the optical rates are scaled toward the mechanical
                  frequency (see ``reduced_stiffness_device``); used to
                  validate the quasistatic scheme.
- ``quasistatic`` cavity fields replaced by their instantaneous steady
                  state at every stage (the device is deep in the
                  sideband-unresolved regime), with an optional first-order
                  retardation correction a ~ a_ss + M^-1 da_ss/dt that
                  carries the dynamical backaction (optical damping and
                  spring).

Runs are deterministic: fixed step, fixed seeds; enabling thermal noise
switches the mechanical update to Euler-Maruyama with a seeded stream.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import hbar as HBAR

from .mechanics import MechState, NoiseSpec, TorqueNoise
from .params import DeviceParams, DriveConfig, Laser, MechMode
from .thermal import ThermalState

MAX_STEPS_GUARD = int(1e10)
RK4_STABILITY_LIMIT = 2.5      # |lambda| * dt ceiling for the field equations


class StepConstraintError(ValueError):
    """Raised when dt violates the method's step constraint."""


class RegimeError(ValueError):
    """Raised when the quasistatic method is requested outside its regime."""


class NonFiniteError(RuntimeError):
    """State became non-finite; carries the simulation time of failure."""

    def __init__(self, t: float):
        super().__init__("non-finite state at t = %.6e s" % t)
        self.t_fail = t


@dataclass(frozen=True)
class SimConfig:
    method: str = "quasistatic"        # 'full' | 'quasistatic'
    dt: float = 1e-8
    duration: float = 1e-4
    output_stride: int = 1
    environment: str = "vacuum"        # 'vacuum' | 'air'
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    thermal_enabled: bool = False
    retardation_enabled: bool = True
    allow_many_steps: bool = False

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class SystemState:
    """Initial condition; fields default to the CW steady state."""

    mech: MechState
    thermal: ThermalState = field(default_factory=ThermalState)
    fields: dict = None                # laser index -> (a_l, a_r), optional


@dataclass
class TimeSeries:
    """Uniformly sampled observables of one run."""

    t: np.ndarray
    data: dict
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    @property
    def columns(self):
        return ["t_s"] + list(self.data.keys())

    @property
    def dt_sample(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def to_csv(self, path, extra_meta: dict = None) -> None:
        """Write a self-describing CSV: commented header, content hash, data."""
        meta = dict(self.meta)
        if extra_meta:
            meta.update(extra_meta)
        buf = io.StringIO()
        cols = self.columns
        buf.write(",".join(cols) + "\n")
        mat = np.column_stack([self.t] + [self.data[c] for c in cols[1:]])
        for row in mat:
            buf.write(",".join("%.17g" % v for v in row) + "\n")
        body = buf.getvalue()
        digest = hashlib.sha256(body.encode()).hexdigest()
        with open(path, "w") as fh:
            for k in sorted(meta):
                fh.write("# %s = %s\n" % (k, meta[k]))
            fh.write("# content_sha256 = %s\n" % digest)
            fh.write(body)


@dataclass
class LimitCycle:
    amplitude: float = 0.0             # rad
    frequency: float = 0.0             # rad/s
    work_per_cycle: float = 0.0        # J, optical
    dissipation_per_cycle: float = 0.0  # J, mechanical
    converged: bool = False
    diagnostic: str = ""

    @property
    def residual(self) -> float:
        if self.dissipation_per_cycle == 0.0:
            return math.inf
        return abs(self.work_per_cycle - self.dissipation_per_cycle) \
            / self.dissipation_per_cycle


# ---------------------------------------------------------------------------
# shared setup helpers
# ---------------------------------------------------------------------------

def _two_modes(device: DeviceParams):
    """(torsional, flapping-or-dummy); integrators always carry two modes."""
    t = device.torsional
    f = device.flapping
    if f is None:
        f = MechMode(kind="flapping", omega_m=t.omega_m, q_m=t.q_m,
                     inertia=t.inertia, ga_l=0.0, ga_r=0.0, q_air=t.q_air)
    return t, f


def _map_shift_funcs(device: DeviceParams):
    """Fast per-cavity shift(theta) and slope(theta) callables."""
    dmap = device.disp_map
    cl = tuple(dmap.coeffs_left)
    cr = tuple(dmap.coeffs_right)
    if len(cl) == 1 and len(cr) == 1:
        al, ar = cl[0], cr[0]
        return (lambda th: al * th), (lambda th: ar * th), \
               (lambda th: al), (lambda th: ar)

    def mk(coeffs):
        rev = coeffs[::-1]

        def f(th):
            acc = 0.0
            for ck in rev:
                acc = (acc + ck) * th
            return acc
        return f

    def mk_slope(coeffs):
        rev = tuple((k + 1) * ck for k, ck in enumerate(coeffs))[::-1]

        def f(th):
            acc = 0.0
            for ck in rev[:-1]:
                acc = (acc + ck) * th
            return acc + rev[-1]
        return f

    return mk(cl), mk(cr), mk_slope(cl), mk_slope(cr)


def _laser_setup(device: DeviceParams, drive: DriveConfig):
    """Per-laser constants: frame detunings, drive amplitudes, sides."""
    opt = device.optics
    out = []
    for las in drive.lasers:
        fl = math.sqrt(opt.gamma_el * las.power_w) if las.cavity == "left" else 0.0
        fr = math.sqrt(opt.gamma_er * las.power_w) if las.cavity == "right" else 0.0
        out.append(dict(
            laser=las,
            dl0=las.omega - opt.omega_l0,      # frame detuning at theta = 0
            dr0=las.omega - opt.omega_r0,
            f_l=fl,
            f_r=fr,
            pulsed=las.pulse_width_s > 0.0,
            inv_hw=1.0 / (HBAR * las.omega),
        ))
    return out


def _validate_full(device: DeviceParams, lasers, sim: SimConfig):
    opt = device.optics
    gmax = max(opt.gamma_l, opt.gamma_r)
    if sim.dt > 0.05 / gmax * (1 + 1e-12):
        raise StepConstraintError(
            "full method requires dt <= 0.05/gamma_max = %.3e s (got %.3e)"
            % (0.05 / gmax, sim.dt)
        )
    lam = 0.0
    for ls in lasers:
        for d0, g in ((ls["dl0"], opt.gamma_l), (ls["dr0"], opt.gamma_r)):
            lam = max(lam, math.hypot(d0, g / 2.0))
    if lam * sim.dt > RK4_STABILITY_LIMIT:
        raise StepConstraintError(
            "field equations unstable at this step: |detuning| * dt = %.2f > %. 1f. "
            "Reduce dt to <= %.3e s or use a scaled instance / the quasistatic "
            "method." % (lam * sim.dt, RK4_STABILITY_LIMIT, RK4_STABILITY_LIMIT / lam)
        )
    if sim.n_steps > MAX_STEPS_GUARD and not sim.allow_many_steps:
        raise StepConstraintError(
            "%d steps exceeds the %d-step guard; set allow_many_steps to override"
            % (sim.n_steps, MAX_STEPS_GUARD)
        )


def _check_pulse_resolution(lasers, dt: float):
    for ls in lasers:
        if ls["pulsed"] and dt > ls["laser"].pulse_width_s / 2.0:
            raise StepConstraintError(
                "dt = %.3e s cannot resolve the %.3e s pulse; use dt <= "
                "half the pulse width" % (dt, ls["laser"].pulse_width_s)
            )


def _validate_quasistatic(device: DeviceParams, sim: SimConfig):
    om_max = max(m.omega_m for m in device.modes)
    if sim.dt > 0.01 * 2 * math.pi / om_max * (1 + 1e-12):
        raise StepConstraintError(
            "quasistatic method requires dt <= 0.01 * (2 pi / Omega_max) = %.3e s"
            % (0.01 * 2 * math.pi / om_max)
        )
    gmin = min(device.optics.gamma_l, device.optics.gamma_r)
    ratio = om_max / gmin
    if ratio >= 1e-2:
        raise RegimeError(
            "quasistatic adiabatic elimination needs Omega_m/gamma < 1e-2 "
            "(got %.2e): the cavity field is not fast enough to follow the "
            "mechanics instantaneously; use the full method" % ratio
        )
    if sim.n_steps > MAX_STEPS_GUARD and not sim.allow_many_steps:
        raise StepConstraintError(
            "%d steps exceeds the %d-step guard; set allow_many_steps to override"
            % (sim.n_steps, MAX_STEPS_GUARD)
        )


def _alloc(n_steps: int, stride: int):
    n_rec = (n_steps - 1) // stride + 1 if n_steps % stride else n_steps // stride + 1
    cols = ("theta_torsional_rad", "thetadot_torsional", "theta_flapping_rad",
            "thetadot_flapping", "n_left", "n_right", "probe_transmission",
            "p_out_right_w", "u_left_k", "u_right_k")
    return np.empty(n_rec), {c: np.empty(n_rec) for c in cols}


def _solve_2x2(ml, mr, f_l, f_r, kappa):
    det = ml * mr + kappa * kappa
    a_l = (-f_l * mr + 1j * kappa * f_r) / det
    a_r = (-f_r * ml + 1j * kappa * f_l) / det
    return a_l, a_r, det


# ---------------------------------------------------------------------------
# full integrator
# ---------------------------------------------------------------------------

def simulate_full(
    device: DeviceParams,
    drive: DriveConfig,
    sim: SimConfig,
    initial: SystemState = None,
) -> TimeSeries:
    """Integrate fields + mechanics (+ thermal) with fixed-step RK4.

    CW lasers start in their steady state at the initial angles (a pulse
    starts dark).  With noise enabled the update degrades to Euler-Maruyama
    so the seeded Langevin torque enters consistently.
    """
    lasers = _laser_setup(device, drive)
    _validate_full(device, lasers, sim)
    _check_pulse_resolution(lasers, sim.dt)
    if sim.thermal_enabled or sim.noise.enabled or len(lasers) != 1:
        return _integrate_general(device, drive, sim, initial, full=True)
    return _full_fast_single(device, lasers[0], sim, initial)


def _initial_state(device: DeviceParams, initial) -> SystemState:
    if initial is None:
        return SystemState(mech=MechState.zeros(2))
    mech = initial.mech
    if len(mech.theta) < 2:
        th = np.zeros(2)
        vd = np.zeros(2)
        th[: len(mech.theta)] = mech.theta
        vd[: len(mech.theta)] = mech.theta_dot
        initial = SystemState(mech=MechState(th, vd), thermal=initial.thermal,
                              fields=initial.fields)
    return initial


def _full_fast_single(device, ls, sim, initial):
    """Hot loop: one laser, two modes, no thermal, no noise."""
    opt = device.optics
    mode_t, mode_f = _two_modes(device)
    shl_f, shr_f, _, _ = _map_shift_funcs(device)
    st = _initial_state(device, initial)
    th_t, th_f = float(st.mech.theta[0]), float(st.mech.theta[1])
    v_t, v_f = float(st.mech.theta_dot[0]), float(st.mech.theta_dot[1])

    dt = sim.dt
    n_steps = sim.n_steps
    stride = sim.output_stride
    h = dt
    half = dt / 2.0
    sixth = dt / 6.0
    kap = opt.kappa
    ik = 1j * kap
    mgl = -opt.gamma_l / 2.0
    mgr = -opt.gamma_r / 2.0
    bl0 = 1j * ls["dl0"] + mgl
    br0 = 1j * ls["dr0"] + mgr
    gfl = mode_f.ga_l
    gfr = mode_f.ga_r
    f_l_cw = ls["f_l"]
    f_r_cw = ls["f_r"]
    pulsed = ls["pulsed"]
    p_width = ls["laser"].pulse_width_s
    inv_hw = ls["inv_hw"]
    env = sim.environment
    om2_t = mode_t.omega_m**2
    om2_f = mode_f.omega_m**2
    gm_t = mode_t.gamma_env(env)
    gm_f = mode_f.gamma_env(env)
    # torque coefficients per unit intracavity energy
    ctl = -mode_t.ga_l * inv_hw * HBAR / mode_t.inertia
    ctr = -mode_t.ga_r * inv_hw * HBAR / mode_t.inertia
    cfl = -mode_f.ga_l * inv_hw * HBAR / mode_f.inertia
    cfr = -mode_f.ga_r * inv_hw * HBAR / mode_f.inertia

    # initial fields
    if st.fields is not None and 0 in st.fields:
        a_l, a_r = st.fields[0]
    elif pulsed:
        a_l = 0j
        a_r = 0j
    else:
        sh_l = shl_f(th_t) + gfl * th_f
        sh_r = shr_f(th_t) + gfr * th_f
        a_l, a_r, _ = _solve_2x2(bl0 - 1j * sh_l, br0 - 1j * sh_r,
                                 f_l_cw, f_r_cw, kap)

    is_probe = ls["laser"].role == "probe"
    p_probe = ls["laser"].power_w
    ge_pr = opt.gamma_el if ls["laser"].cavity == "left" else opt.gamma_er
    sq_ge_pr = math.sqrt(ge_pr)
    ger = opt.gamma_er

    ts, cols = _alloc(n_steps, stride)
    c_tht = cols["theta_torsional_rad"]; c_vt = cols["thetadot_torsional"]
    c_thf = cols["theta_flapping_rad"]; c_vf = cols["thetadot_flapping"]
    c_nl = cols["n_left"]; c_nr = cols["n_right"]
    c_tr = cols["probe_transmission"]; c_po = cols["p_out_right_w"]
    c_ul = cols["u_left_k"]; c_ur = cols["u_right_k"]
    j = 0

    def record(i, a_l, a_r, th_t, v_t, th_f, v_f, j):
        ts[j] = i * dt
        c_tht[j] = th_t; c_vt[j] = v_t; c_thf[j] = th_f; c_vf[j] = v_f
        el = a_l.real * a_l.real + a_l.imag * a_l.imag
        er = a_r.real * a_r.real + a_r.imag * a_r.imag
        c_nl[j] = el * inv_hw
        c_nr[j] = er * inv_hw
        c_po[j] = ger * er
        if is_probe and p_probe > 0.0:
            a_p = a_l if ls["laser"].cavity == "left" else a_r
            s = math.sqrt(p_probe)
            tamp = (s - sq_ge_pr * a_p) / s
            c_tr[j] = tamp.real * tamp.real + tamp.imag * tamp.imag
        else:
            c_tr[j] = math.nan
        c_ul[j] = 0.0; c_ur[j] = 0.0
        return j + 1

    for i in range(n_steps):
        if i % stride == 0:
            if not (math.isfinite(th_t) and math.isfinite(a_l.real)):
                raise NonFiniteError(i * dt)
            j = record(i, a_l, a_r, th_t, v_t, th_f, v_f, j)
        if pulsed:
            t_now = i * dt
            f_l = f_l_cw if t_now < p_width else 0.0
            f_r = f_r_cw if t_now < p_width else 0.0
        else:
            f_l = f_l_cw
            f_r = f_r_cw
        # stage 1
        sh_l = shl_f(th_t) + gfl * th_f
        sh_r = shr_f(th_t) + gfr * th_f
        k1l = (bl0 - 1j * sh_l) * a_l + ik * a_r + f_l
        k1r = (br0 - 1j * sh_r) * a_r + ik * a_l + f_r
        el = a_l.real * a_l.real + a_l.imag * a_l.imag
        er = a_r.real * a_r.real + a_r.imag * a_r.imag
        k1vt = -om2_t * th_t - gm_t * v_t + ctl * el + ctr * er
        k1vf = -om2_f * th_f - gm_f * v_f + cfl * el + cfr * er
        # stage 2
        al2 = a_l + half * k1l; ar2 = a_r + half * k1r
        tht2 = th_t + half * v_t; vt2 = v_t + half * k1vt
        thf2 = th_f + half * v_f; vf2 = v_f + half * k1vf
        sh_l = shl_f(tht2) + gfl * thf2
        sh_r = shr_f(tht2) + gfr * thf2
        k2l = (bl0 - 1j * sh_l) * al2 + ik * ar2 + f_l
        k2r = (br0 - 1j * sh_r) * ar2 + ik * al2 + f_r
        el = al2.real * al2.real + al2.imag * al2.imag
        er = ar2.real * ar2.real + ar2.imag * ar2.imag
        k2vt = -om2_t * tht2 - gm_t * vt2 + ctl * el + ctr * er
        k2vf = -om2_f * thf2 - gm_f * vf2 + cfl * el + cfr * er
        # stage 3
        al3 = a_l + half * k2l; ar3 = a_r + half * k2r
        tht3 = th_t + half * vt2; vt3 = v_t + half * k2vt
        thf3 = th_f + half * vf2; vf3 = v_f + half * k2vf
        sh_l = shl_f(tht3) + gfl * thf3
        sh_r = shr_f(tht3) + gfr * thf3
        k3l = (bl0 - 1j * sh_l) * al3 + ik * ar3 + f_l
        k3r = (br0 - 1j * sh_r) * ar3 + ik * al3 + f_r
        el = al3.real * al3.real + al3.imag * al3.imag
        er = ar3.real * ar3.real + ar3.imag * ar3.imag
        k3vt = -om2_t * tht3 - gm_t * vt3 + ctl * el + ctr * er
        k3vf = -om2_f * thf3 - gm_f * vf3 + cfl * el + cfr * er
        # stage 4
        al4 = a_l + h * k3l; ar4 = a_r + h * k3r
        tht4 = th_t + h * vt3; vt4 = v_t + h * k3vt
        thf4 = th_f + h * vf3; vf4 = v_f + h * k3vf
        sh_l = shl_f(tht4) + gfl * thf4
        sh_r = shr_f(tht4) + gfr * thf4
        k4l = (bl0 - 1j * sh_l) * al4 + ik * ar4 + f_l
        k4r = (br0 - 1j * sh_r) * ar4 + ik * al4 + f_r
        el = al4.real * al4.real + al4.imag * al4.imag
        er = ar4.real * ar4.real + ar4.imag * ar4.imag
        k4vt = -om2_t * tht4 - gm_t * vt4 + ctl * el + ctr * er
        k4vf = -om2_f * thf4 - gm_f * vf4 + cfl * el + cfr * er

        a_l = a_l + sixth * (k1l + 2 * k2l + 2 * k3l + k4l)
        a_r = a_r + sixth * (k1r + 2 * k2r + 2 * k3r + k4r)
        th_t = th_t + sixth * (v_t + 2 * vt2 + 2 * vt3 + vt4)
        v_t = v_t + sixth * (k1vt + 2 * k2vt + 2 * k3vt + k4vt)
        th_f = th_f + sixth * (v_f + 2 * vf2 + 2 * vf3 + vf4)
        v_f = v_f + sixth * (k1vf + 2 * k2vf + 2 * k3vf + k4vf)

    if n_steps % stride == 0:
        j = record(n_steps, a_l, a_r, th_t, v_t, th_f, v_f, j)
    return _package(ts, cols, j, sim, "full", device)


# ---------------------------------------------------------------------------
# quasistatic integrator
# ---------------------------------------------------------------------------

def simulate_quasistatic(
    device: DeviceParams,
    drive: DriveConfig,
    sim: SimConfig,
    initial: SystemState = None,
) -> TimeSeries:
    """Integrate mechanics (+ thermal) with fields slaved to steady state."""
    _validate_quasistatic(device, sim)
    _check_pulse_resolution(_laser_setup(device, drive), sim.dt)
    return _integrate_general(device, drive, sim, initial, full=False)


def _integrate_general(device, drive, sim, initial, full: bool):
    """General loop: N lasers, 2 modes, optional thermal/noise/photothermal.

    Quasistatic stages solve the 2x2 system per laser (with the retardation
    correction when enabled); full mode evolves the complex fields.  Noise
    switches both to Euler-Maruyama.
    """
    opt = device.optics
    mode_t, mode_f = _two_modes(device)
    shl_f, shr_f, sll_f, slr_f = _map_shift_funcs(device)
    lasers = _laser_setup(device, drive)
    st = _initial_state(device, initial)
    tp = device.thermal

    dt = sim.dt
    n_steps = sim.n_steps
    stride = sim.output_stride
    env = sim.environment
    kap = opt.kappa
    ik = 1j * kap
    mgl = -opt.gamma_l / 2.0
    mgr = -opt.gamma_r / 2.0
    gil = opt.gamma_il
    gir = opt.gamma_ir
    ger = opt.gamma_er
    gfl = mode_f.ga_l
    gfr = mode_f.ga_r
    om2_t = mode_t.omega_m**2
    om2_f = mode_f.omega_m**2
    gm_t = mode_t.gamma_env(env)
    gm_f = mode_f.gamma_env(env)
    inv_it = 1.0 / mode_t.inertia
    inv_if = 1.0 / mode_f.inertia
    thermal_on = sim.thermal_enabled
    pt_on = tp.photothermal_gain != 0.0
    retard = sim.retardation_enabled and not full
    noise_on = sim.noise.enabled and sim.noise.temperature > 0.0
    stream = TorqueNoise(sim.noise) if noise_on else None

    probe = None
    for ls in lasers:
        if ls["laser"].role == "probe" and ls["laser"].power_w > 0.0:
            probe = ls

    # state vector
    th_t = float(st.mech.theta[0]); v_t = float(st.mech.theta_dot[0])
    th_f = float(st.mech.theta[1]); v_f = float(st.mech.theta_dot[1])
    u_l = float(st.thermal.u_l); u_r = float(st.thermal.u_r)
    w_pt = 0.0
    fields = []
    if full:
        for idx, ls in enumerate(lasers):
            if st.fields is not None and idx in st.fields:
                fields.append(tuple(st.fields[idx]))
            elif ls["pulsed"]:
                fields.append((0j, 0j))
            else:
                sh_l = shl_f(th_t) + gfl * th_f + (tp.dw_dt * u_l if thermal_on else 0.0)
                sh_r = shr_f(th_t) + gfr * th_f + (tp.dw_dt * u_r if thermal_on else 0.0)
                al, ar, _ = _solve_2x2(
                    1j * (ls["dl0"] - sh_l) + mgl, 1j * (ls["dr0"] - sh_r) + mgr,
                    ls["f_l"], ls["f_r"], kap)
                fields.append((al, ar))

    def optics_at(t_now, th_t, th_f, u_l, u_r, v_t, v_f, fields_now, w_pt_now=0.0):
        """Per-stage optical quantities.

        Returns (torque_t, torque_f, p_abs_l, p_abs_r, e_r_total, nl, nr,
        probe_T, dfields) where dfields are the complex field derivatives
        (full mode only).
        """
        sh_l = shl_f(th_t) + gfl * th_f
        sh_r = shr_f(th_t) + gfr * th_f
        if thermal_on:
            sh_l += tp.dw_dt * u_l
            sh_r += tp.dw_dt * u_r
        e_l_tot = 0.0
        e_r_tot = 0.0
        nl_tot = 0.0
        nr_tot = 0.0
        probe_t = math.nan
        dfields = []
        for idx, ls in enumerate(lasers):
            if ls["pulsed"]:
                on = 0.0 <= t_now < ls["laser"].pulse_width_s
                f_l = ls["f_l"] if on else 0.0
                f_r = ls["f_r"] if on else 0.0
            else:
                f_l = ls["f_l"]
                f_r = ls["f_r"]
            ml = 1j * (ls["dl0"] - sh_l) + mgl
            mr = 1j * (ls["dr0"] - sh_r) + mgr
            if full:
                al, ar = fields_now[idx]
                dfields.append(((ml * al + ik * ar + f_l), (mr * ar + ik * al + f_r)))
            else:
                det = ml * mr + kap * kap
                al = (-f_l * mr + 1j * kap * f_r) / det
                ar = (-f_r * ml + 1j * kap * f_l) / det
                if retard:
                    dsh_l = sll_f(th_t) * v_t + gfl * v_f
                    dsh_r = slr_f(th_t) * v_t + gfr * v_f
                    # a ~ a_ss + M^-1 da_ss/dt with da_ss/dt = -M^-1 Mdot a_ss
                    pl = -1j * dsh_l * al
                    pr = -1j * dsh_r * ar
                    ql = (mr * pl - 1j * kap * pr) / det
                    qr = (ml * pr - 1j * kap * pl) / det
                    rl = (mr * ql - 1j * kap * qr) / det
                    rr = (ml * qr - 1j * kap * ql) / det
                    al = al - rl
                    ar = ar - rr
            el = al.real * al.real + al.imag * al.imag
            er = ar.real * ar.real + ar.imag * ar.imag
            e_l_tot += el
            e_r_tot += er
            nl_tot += el * ls["inv_hw"]
            nr_tot += er * ls["inv_hw"]
            if ls is probe:
                a_p = al if ls["laser"].cavity == "left" else ar
                ge_p = opt.gamma_el if ls["laser"].cavity == "left" else opt.gamma_er
                s = math.sqrt(ls["laser"].power_w)
                tamp = (s - math.sqrt(ge_p) * a_p) / s
                probe_t = tamp.real * tamp.real + tamp.imag * tamp.imag
        tq_t = -HBAR * (mode_t.ga_l * nl_tot + mode_t.ga_r * nr_tot)
        tq_f = -HBAR * (mode_f.ga_l * nl_tot + mode_f.ga_r * nr_tot)
        if pt_on:
            tq_t += tp.photothermal_gain * w_pt_now
        p_abs_l = tp.eta_abs * gil * e_l_tot
        p_abs_r = tp.eta_abs * gir * e_r_tot
        return tq_t, tq_f, p_abs_l, p_abs_r, e_r_tot, nl_tot, nr_tot, probe_t, dfields

    ts, cols = _alloc(n_steps, stride)
    c_tht = cols["theta_torsional_rad"]; c_vt = cols["thetadot_torsional"]
    c_thf = cols["theta_flapping_rad"]; c_vf = cols["thetadot_flapping"]
    c_nl = cols["n_left"]; c_nr = cols["n_right"]
    c_tr = cols["probe_transmission"]; c_po = cols["p_out_right_w"]
    c_ul = cols["u_left_k"]; c_ur = cols["u_right_k"]
    j = 0

    def full_state():
        return (th_t, v_t, th_f, v_f, u_l, u_r, w_pt)

    for i in range(n_steps):
        t_now = i * dt
        if i % stride == 0:
            if not (math.isfinite(th_t) and math.isfinite(v_t)):
                raise NonFiniteError(t_now)
            tq_t, tq_f, pal, par, e_r, nl, nr, ptr, _ = optics_at(
                t_now, th_t, th_f, u_l, u_r, v_t, v_f, fields)
            ts[j] = t_now
            c_tht[j] = th_t; c_vt[j] = v_t; c_thf[j] = th_f; c_vf[j] = v_f
            c_nl[j] = nl; c_nr[j] = nr; c_tr[j] = ptr
            c_po[j] = ger * e_r
            c_ul[j] = u_l; c_ur[j] = u_r
            j += 1

        if noise_on:
            # Euler-Maruyama step
            tq_t, tq_f, pal, par, e_r, nl, nr, ptr, dfl = optics_at(
                t_now, th_t, th_f, u_l, u_r, v_t, v_f, fields, w_pt)
            tq_t += stream.sample(mode_t, dt, env)
            tq_f += stream.sample(mode_f, dt, env)
            acc_t = -om2_t * th_t - gm_t * v_t + tq_t * inv_it
            acc_f = -om2_f * th_f - gm_f * v_f + tq_f * inv_if
            th_t += v_t * dt; v_t += acc_t * dt
            th_f += v_f * dt; v_f += acc_f * dt
            if thermal_on:
                du_l = pal / tp.c_heat - u_l / tp.tau_local - (u_l - u_r) / tp.tau_cross
                du_r = par / tp.c_heat - u_r / tp.tau_local - (u_r - u_l) / tp.tau_cross
                u_l += du_l * dt; u_r += du_r * dt
            if pt_on:
                w_pt += ((pal - par) - w_pt) / tp.photothermal_delay * dt
            if full:
                fields = [(al + dal * dt, ar + dar * dt)
                          for (al, ar), (dal, dar) in zip(fields, dfl)]
            continue

        # RK4 step over the mech/thermal (+field) state
        def rhs(t_s, s, flds):
            th_t, v_t, th_f, v_f, u_l, u_r, w_pt = s
            tq_t, tq_f, pal, par, _, _, _, _, dfl = optics_at(
                t_s, th_t, th_f, u_l, u_r, v_t, v_f, flds, w_pt)
            if thermal_on:
                du_l = pal / tp.c_heat - u_l / tp.tau_local - (u_l - u_r) / tp.tau_cross
                du_r = par / tp.c_heat - u_r / tp.tau_local - (u_r - u_l) / tp.tau_cross
            else:
                du_l = du_r = 0.0
            dw = ((pal - par) - w_pt) / tp.photothermal_delay if pt_on else 0.0
            return (v_t, -om2_t * th_t - gm_t * v_t + tq_t * inv_it,
                    v_f, -om2_f * th_f - gm_f * v_f + tq_f * inv_if,
                    du_l, du_r, dw), dfl

        s0 = full_state()
        k1, df1 = rhs(t_now, s0, fields)
        s1 = tuple(x + 0.5 * dt * k for x, k in zip(s0, k1))
        fl1 = [(al + 0.5 * dt * dal, ar + 0.5 * dt * dar)
               for (al, ar), (dal, dar) in zip(fields, df1)] if full else fields
        k2, df2 = rhs(t_now + 0.5 * dt, s1, fl1)
        s2 = tuple(x + 0.5 * dt * k for x, k in zip(s0, k2))
        fl2 = [(al + 0.5 * dt * dal, ar + 0.5 * dt * dar)
               for (al, ar), (dal, dar) in zip(fields, df2)] if full else fields
        k3, df3 = rhs(t_now + 0.5 * dt, s2, fl2)
        s3 = tuple(x + dt * k for x, k in zip(s0, k3))
        fl3 = [(al + dt * dal, ar + dt * dar)
               for (al, ar), (dal, dar) in zip(fields, df3)] if full else fields
        k4, df4 = rhs(t_now + dt, s3, fl3)
        news = tuple(x + dt / 6.0 * (a + 2 * b + 2 * c + d)
                     for x, a, b, c, d in zip(s0, k1, k2, k3, k4))
        th_t, v_t, th_f, v_f, u_l, u_r, w_pt = news
        if full:
            fields = [
                (al + dt / 6.0 * (d1[0] + 2 * d2[0] + 2 * d3[0] + d4[0]),
                 ar + dt / 6.0 * (d1[1] + 2 * d2[1] + 2 * d3[1] + d4[1]))
                for (al, ar), d1, d2, d3, d4 in zip(fields, df1, df2, df3, df4)
            ]

    if n_steps % stride == 0:
        tq_t, tq_f, pal, par, e_r, nl, nr, ptr, _ = optics_at(
            n_steps * dt, th_t, th_f, u_l, u_r, v_t, v_f, fields)
        ts[j] = n_steps * dt
        c_tht[j] = th_t; c_vt[j] = v_t; c_thf[j] = th_f; c_vf[j] = v_f
        c_nl[j] = nl; c_nr[j] = nr; c_tr[j] = ptr
        c_po[j] = ger * e_r
        c_ul[j] = u_l; c_ur[j] = u_r
        j += 1
    return _package(ts, cols, j, sim, "full" if full else "quasistatic", device)


def _package(ts, cols, j, sim: SimConfig, method: str,
             device: DeviceParams = None) -> TimeSeries:
    data = {k: v[:j] for k, v in cols.items()}
    meta = dict(
        method=method, dt_s="%.17g" % sim.dt, duration_s="%.17g" % sim.duration,
        output_stride=sim.output_stride, environment=sim.environment,
        thermal_enabled=sim.thermal_enabled,
        retardation_enabled=sim.retardation_enabled,
        noise_enabled=sim.noise.enabled, noise_seed=sim.noise.seed,
        noise_temperature_k="%.17g" % sim.noise.temperature,
    )
    if device is not None and j:
        # angle excursions outside the dispersive-map range are a diagnostic
        # (the polynomial extrapolates), not a failure
        dmap = device.disp_map
        th = data["theta_torsional_rad"]
        exceeded = bool(th.max() > dmap.theta_max or th.min() < dmap.theta_min)
        meta["theta_range_exceeded"] = exceeded
    return TimeSeries(t=ts[:j], data=data, meta=meta)


# ---------------------------------------------------------------------------
# static equilibrium and impulse response
# ---------------------------------------------------------------------------

def equilibrium_state(
    device: DeviceParams,
    drive: DriveConfig,
    thermal_enabled: bool = False,
) -> SystemState:
    """Static deflections and temperatures under the CW part of the drive.

    Pulsed lasers are dark (pre-trigger).  Solved by damped fixed-point
    iteration of torque balance and the linear thermal balance; converges in
    a handful of iterations because the dispersive pull per photon is tiny.
    """
    mode_t, mode_f = _two_modes(device)
    shl_f, shr_f, _, _ = _map_shift_funcs(device)
    opt = device.optics
    tp = device.thermal
    lasers = [ls for ls in _laser_setup(device, drive) if not ls["pulsed"]]
    kap = opt.kappa
    mgl = -opt.gamma_l / 2.0
    mgr = -opt.gamma_r / 2.0
    th_t = th_f = u_l = u_r = 0.0
    # thermal steady state: [a b; b a] u = p / c_heat
    a_th = 1.0 / tp.tau_local + 1.0 / tp.tau_cross
    b_th = -1.0 / tp.tau_cross
    det_th = a_th * a_th - b_th * b_th
    for _ in range(200):
        sh_l = shl_f(th_t) + mode_f.ga_l * th_f + (tp.dw_dt * u_l if thermal_enabled else 0.0)
        sh_r = shr_f(th_t) + mode_f.ga_r * th_f + (tp.dw_dt * u_r if thermal_enabled else 0.0)
        nl = nr = 0.0
        e_l = e_r = 0.0
        for ls in lasers:
            al, ar, _ = _solve_2x2(1j * (ls["dl0"] - sh_l) + mgl,
                                   1j * (ls["dr0"] - sh_r) + mgr,
                                   ls["f_l"], ls["f_r"], kap)
            el = abs(al) ** 2
            er = abs(ar) ** 2
            e_l += el
            e_r += er
            nl += el * ls["inv_hw"]
            nr += er * ls["inv_hw"]
        th_t_new = -HBAR * (mode_t.ga_l * nl + mode_t.ga_r * nr) \
            / (mode_t.inertia * mode_t.omega_m**2)
        th_f_new = -HBAR * (mode_f.ga_l * nl + mode_f.ga_r * nr) \
            / (mode_f.inertia * mode_f.omega_m**2)
        if thermal_enabled:
            pl = tp.eta_abs * opt.gamma_il * e_l / tp.c_heat
            pr = tp.eta_abs * opt.gamma_ir * e_r / tp.c_heat
            u_l_new = (a_th * pl - b_th * pr) / det_th
            u_r_new = (a_th * pr - b_th * pl) / det_th
        else:
            u_l_new = u_r_new = 0.0
        change = max(abs(th_t_new - th_t), abs(th_f_new - th_f),
                     abs(u_l_new - u_l) * 1e-9, abs(u_r_new - u_r) * 1e-9)
        th_t, th_f = 0.5 * (th_t + th_t_new), 0.5 * (th_f + th_f_new)
        u_l, u_r = 0.5 * (u_l + u_l_new), 0.5 * (u_r + u_r_new)
        if change < 1e-20:
            break
    return SystemState(
        mech=MechState(np.array([th_t, th_f]), np.zeros(2)),
        thermal=ThermalState(u_l=u_l, u_r=u_r),
    )

def impulse_response(
    device: DeviceParams,
    pulse_width: float = 10e-9,
    pulse_peak_w: float = 4e-3,
    pump_detuning: float = 0.0,
    probe_detuning: float = -0.8,
    probe_power_w: float = 30e-9,
    environment: str = "vacuum",
    duration: float = None,
    dt: float = None,
    output_stride: int = 1,
    thermal_enabled: bool = None,
) -> TimeSeries:
    """Pump-pulse-into-left, probe-on-right impulse experiment.

    In vacuum the trace rings at the mechanical mode frequencies; in air the
    motion is near-critically damped and (with the thermal channel) the probe
    signal later reverses sign as conducted heat red-shifts the right cavity.
    """
    t_mode = device.torsional
    if pulse_width >= 0.1 * 2 * math.pi / t_mode.omega_m:
        raise ValueError("pulse width must be well below the mechanical period")
    if thermal_enabled is None:
        thermal_enabled = environment == "air"
    if duration is None:
        duration = 12e-6 if environment == "air" else 5e-4
    if dt is None:
        dt = pulse_width / 4.0
    lasers = [
        Laser.at_detuning(device, "left", pump_detuning, pulse_peak_w,
                          role="pump", pulse_width_s=pulse_width),
    ]
    if probe_power_w > 0.0:
        lasers.append(Laser.at_detuning(device, "right", probe_detuning,
                                        probe_power_w, role="probe"))
    drive = DriveConfig(lasers=tuple(lasers))
    sim = SimConfig(method="quasistatic", dt=dt, duration=duration,
                    output_stride=output_stride, environment=environment,
                    thermal_enabled=thermal_enabled)
    # start at the pre-pulse CW equilibrium so the pulse response rides on a
    # flat baseline
    initial = equilibrium_state(device, drive, thermal_enabled)
    return simulate_quasistatic(device, drive, sim, initial=initial)


# ---------------------------------------------------------------------------
# small-signal backaction
# ---------------------------------------------------------------------------

def backaction_rates(
    device: DeviceParams,
    delta: float,
    n_cav: float,
    mode: MechMode,
    cavity: str = "right",
):
    """Doppler-regime optical damping and spring shift.

    First-order expansion of the retarded radiation-pressure torque for a
    single driven cavity at normalized detuning ``delta`` holding ``n_cav``
    photons:

        Gamma_opt   = -16 hbar g_A^2 n delta / (I gamma^2 (1+delta^2)^2)
        Omega_shift = hbar g_A^2 tau delta n / (I Omega_m (1+delta^2))

    Blue detuning (delta > 0) gives Gamma_opt < 0, i.e. anti-damping /
    amplification; red detuning cools.  Valid deep in the sideband-unresolved
    regime.
    """
    opt = device.optics
    if cavity == "right":
        gamma, tau, g_a = opt.gamma_r, opt.tau_r, abs(mode.ga_r)
    else:
        gamma, tau, g_a = opt.gamma_l, opt.tau_l, abs(mode.ga_l)
    lor = 1.0 + delta * delta
    gamma_opt = -16.0 * HBAR * g_a**2 * n_cav * delta / (mode.inertia * gamma**2 * lor**2)
    omega_shift = HBAR * g_a**2 * tau * delta * n_cav / (mode.inertia * mode.omega_m * lor)
    return gamma_opt, omega_shift


# ---------------------------------------------------------------------------
# limit cycles and threshold
# ---------------------------------------------------------------------------

def _cycle_fields_vectorized(device, lasers, theta, theta_dot, retard=True):
    """Retarded steady-state energies over phase arrays (torsional only)."""
    opt = device.optics
    kap = opt.kappa
    dmap = device.disp_map
    sh_l = dmap.shift("left", theta, allow_extrapolation=True)
    sh_r = dmap.shift("right", theta, allow_extrapolation=True)
    sl_l = dmap.slope("left", theta, allow_extrapolation=True)
    sl_r = dmap.slope("right", theta, allow_extrapolation=True)
    e_l = np.zeros_like(theta)
    e_r = np.zeros_like(theta)
    for ls in lasers:
        ml = 1j * (ls["dl0"] - sh_l) - opt.gamma_l / 2.0
        mr = 1j * (ls["dr0"] - sh_r) - opt.gamma_r / 2.0
        det = ml * mr + kap * kap
        al = (-ls["f_l"] * mr + 1j * kap * ls["f_r"]) / det
        ar = (-ls["f_r"] * ml + 1j * kap * ls["f_l"]) / det
        if retard:
            pl = -1j * (sl_l * theta_dot) * al
            pr = -1j * (sl_r * theta_dot) * ar
            ql = (mr * pl - 1j * kap * pr) / det
            qr = (ml * pr - 1j * kap * pl) / det
            rl = (mr * ql - 1j * kap * qr) / det
            rr = (ml * qr - 1j * kap * ql) / det
            al = al - rl
            ar = ar - rr
        e_l += np.abs(al) ** 2
        e_r += np.abs(ar) ** 2
    return e_l, e_r


def per_cycle_work(
    device: DeviceParams,
    drive: DriveConfig,
    mode: MechMode,
    theta0: float,
    n_phase: int = 720,
    omega_p: float = None,
):
    """Optical work done on the mode over one cycle of amplitude theta0 (J).

    The mode is taken sinusoidal at Omega_m; the conservative part of the
    force integrates to zero over the closed cycle, so the result isolates
    the retardation (backaction) contribution.
    """
    lasers = _laser_setup(device, drive)
    if omega_p is None:
        omega_p = drive.lasers[0].omega
    phase = (np.arange(n_phase) + 0.5) * (2 * math.pi / n_phase)
    theta = theta0 * np.sin(phase)
    theta_dot = theta0 * mode.omega_m * np.cos(phase)
    e_l, e_r = _cycle_fields_vectorized(device, lasers, theta, theta_dot)
    inv_hw = 1.0 / (HBAR * omega_p)
    torque = -HBAR * (mode.ga_l * e_l + mode.ga_r * e_r) * inv_hw
    tp = device.thermal
    if tp.photothermal_gain != 0.0:
        # lagged photothermal torque over the cycle, applied spectrally:
        # each harmonic of the absorbed-power imbalance is filtered by
        # 1 / (1 + i k Omega tau_pt)
        p_diff = tp.eta_abs * (device.optics.gamma_il * e_l
                               - device.optics.gamma_ir * e_r)
        k = np.fft.fftfreq(n_phase, d=1.0 / n_phase)
        h = 1.0 / (1.0 + 1j * k * mode.omega_m * tp.photothermal_delay)
        lagged = np.fft.ifft(np.fft.fft(p_diff) * h).real
        torque = torque + tp.photothermal_gain * lagged
    dphi = 2 * math.pi / n_phase
    return float(np.sum(torque * theta0 * np.cos(phase)) * dphi)


def cycle_dissipation(mode: MechMode, theta0: float, environment: str = "vacuum") -> float:
    """Mechanical energy lost per cycle at amplitude theta0 (J)."""
    gamma = mode.gamma_env(environment)
    return math.pi * mode.inertia * gamma * mode.omega_m * theta0**2


def find_limit_cycle(
    device: DeviceParams,
    drive: DriveConfig,
    mode: MechMode = None,
    n_phase: int = 720,
    theta_floor: float = None,
    environment: str = "vacuum",
) -> LimitCycle:
    """Energy-balance amplitude of steady self-oscillation.

    Scans amplitudes up to the dispersive-map range for the balance
    W_opt(theta0) = W_diss(theta0) and bisects the stable (gain-to-loss)
    crossing.  Returns a non-converged result when the optical gain never
    exceeds the mechanical loss, and a diagnostic when the balance point
    would lie beyond the map range.
    """
    if mode is None:
        mode = device.torsional
    dmap = device.disp_map
    theta_max = 0.98 * min(abs(dmap.theta_min), abs(dmap.theta_max))
    if theta_floor is None:
        theta_floor = 1e-6 * theta_max

    def gain(th0):
        return per_cycle_work(device, drive, mode, th0, n_phase) \
            - cycle_dissipation(mode, th0, environment)

    grid = np.geomspace(theta_floor, theta_max, 60)
    g = np.array([gain(th) for th in grid])
    if np.all(g <= 0.0):
        return LimitCycle(converged=False, frequency=mode.omega_m,
                          diagnostic="optical gain below mechanical loss at "
                                     "all amplitudes (no self-oscillation)")
    # stable root: last + -> - transition
    idx = None
    for i in range(len(grid) - 1):
        if g[i] > 0.0 >= g[i + 1]:
            idx = i
    if idx is None:
        return LimitCycle(converged=False, frequency=mode.omega_m,
                          amplitude=theta_max,
                          diagnostic="energy balance not reached inside the "
                                     "dispersive-map range")
    lo, hi = grid[idx], grid[idx + 1]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if gain(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        w = per_cycle_work(device, drive, mode, mid, n_phase)
        d = cycle_dissipation(mode, mid, environment)
        if d > 0 and abs(w - d) < 1e-4 * d:
            break
    th0 = 0.5 * (lo + hi)
    w = per_cycle_work(device, drive, mode, th0, n_phase)
    d = cycle_dissipation(mode, th0, environment)
    return LimitCycle(amplitude=th0, frequency=mode.omega_m,
                      work_per_cycle=w, dissipation_per_cycle=d,
                      converged=True)


def find_threshold(
    device: DeviceParams,
    drive_template: DriveConfig,
    mode: MechMode = None,
    p_lo: float = 1e-12,
    p_hi: float = 1.0,
    rel_tol: float = 1e-3,
) -> dict:
    """Bisect pump power for the onset of a converged limit cycle.

    The template's pump laser sets cavity and detuning; its power is swept.
    Returns the threshold power and the marginal amplitude just above it.
    Raises when the bracket contains no transition.
    """
    if mode is None:
        mode = device.torsional

    def with_power(p):
        lasers = tuple(
            Laser(cavity=l.cavity, power_w=p, omega=l.omega, role=l.role,
                  pulse_width_s=l.pulse_width_s) if l.role == "pump" else l
            for l in drive_template.lasers
        )
        return DriveConfig(lasers=lasers)

    def oscillates(p):
        cyc = find_limit_cycle(device, with_power(p), mode)
        # gain past the map edge still means self-oscillation has started
        return cyc.converged or cyc.amplitude > 0.0

    if oscillates(p_lo):
        raise RuntimeError("bracket exhausted: oscillation already present at "
                           "p_lo = %g W" % p_lo)
    if not oscillates(p_hi):
        raise RuntimeError("bracket exhausted: no oscillation up to p_hi = %g W"
                           % p_hi)
    lo, hi = p_lo, p_hi
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        if oscillates(mid):
            hi = mid
        else:
            lo = mid
    cyc = find_limit_cycle(device, with_power(hi), mode)
    return dict(threshold_w=hi, marginal_amplitude_rad=cyc.amplitude,
                frequency=mode.omega_m)
