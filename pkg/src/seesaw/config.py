"""Flat key-value configuration files.

Format: one ``dotted.key = value`` per line, ``#`` comments, values parsed
as JSON scalars (numbers, true/false, quoted strings; bare words fall back
to strings).  The file is therefore equivalent to one flat JSON object.

All quantities are SI; angular frequencies are rad/s.  Any frequency-like
key may instead be written with an ``_hz`` suffix, in which case the value
is multiplied by 2*pi exactly once while loading.  ``dump`` always emits
the canonical rad/s form with full float precision, so a dump -> load ->
dump round trip is byte-identical.

Unknown keys are hard errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace

from .dynamics import SimConfig
from .mechanics import NoiseSpec
from .params import (
    DeviceParams,
    DispersiveMap,
    DriveConfig,
    Laser,
    MechMode,
    OpticalParams,
    PRESETS,
    paper_device,
    validate_params,
)
from .thermal import ThermalParams

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    pass


# keys whose _hz variant scales by 2*pi
_ANGULAR_KEYS = {
    "optics.omega_l0", "optics.omega_r0",
    "optics.gamma_il", "optics.gamma_el",
    "optics.gamma_ir", "optics.gamma_er",
    "optics.kappa",
    "mech.torsional.omega_m", "mech.flapping.omega_m",
    "mech.torsional.ga_l", "mech.torsional.ga_r",
    "mech.flapping.ga_l", "mech.flapping.ga_r",
    "map.c1_l", "map.c2_l", "map.c3_l",
    "map.c1_r", "map.c2_r", "map.c3_r",
    "thermal.dw_dt",
    "drive.pump.omega", "drive.probe.omega",
}

_SCALAR_KEYS = {
    "device.k_eff", "device.lever_arm_m", "device.temperature_k",
    "mech.torsional.q_m", "mech.torsional.inertia", "mech.torsional.q_air",
    "mech.flapping.q_m", "mech.flapping.inertia", "mech.flapping.q_air",
    "map.theta_min_rad", "map.theta_max_rad",
    "thermal.tau_local_s", "thermal.tau_cross_s", "thermal.eta_abs",
    "thermal.c_heat_j_per_k", "thermal.photothermal_gain",
    "thermal.photothermal_delay_s",
    "drive.pump.power_w", "drive.pump.delta", "drive.pump.pulse_width_s",
    "drive.probe.power_w", "drive.probe.delta", "drive.probe.pulse_width_s",
    "sim.dt_s", "sim.duration_s", "sim.noise_temperature_k",
}

_OTHER_KEYS = {
    "preset",
    "drive.pump.cavity", "drive.probe.cavity",
    "sim.method", "sim.environment",
    "sim.output_stride", "sim.seed",
    "sim.thermal_enabled", "sim.retardation_enabled", "sim.noise_enabled",
}

KNOWN_KEYS = (_ANGULAR_KEYS | {k + "_hz" for k in _ANGULAR_KEYS}
              | _SCALAR_KEYS | _OTHER_KEYS)


def parse_flat(text: str) -> dict:
    """Parse flat config text into a dict; unknown keys raise ConfigError."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected 'key = value'" % ln)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError("line %d: unknown key %r" % (ln, key))
        if key in out:
            raise ConfigError("line %d: duplicate key %r" % (ln, key))
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    # fold _hz variants into canonical rad/s keys, exactly one 2*pi
    folded = {}
    for key, val in out.items():
        if key.endswith("_hz") and key[:-3] in _ANGULAR_KEYS:
            base = key[:-3]
            if base in out:
                raise ConfigError("both %s and %s given" % (base, key))
            folded[base] = TWO_PI * float(val)
        else:
            folded[key] = val
    return folded


def apply_overrides(flat: dict, overrides) -> dict:
    """Apply repeatable 'key=value' overrides onto a flat dict."""
    out = dict(flat)
    for ov in overrides or ():
        if "=" not in ov:
            raise ConfigError("override %r is not key=value" % ov)
        key, val = (s.strip() for s in ov.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError("override references unknown key %r" % key)
        try:
            parsed = json.loads(val)
        except json.JSONDecodeError:
            parsed = val
        if key.endswith("_hz") and key[:-3] in _ANGULAR_KEYS:
            out[key[:-3]] = TWO_PI * float(parsed)
        else:
            out[key] = parsed
    return out


def _num(flat, key, default):
    v = flat.get(key, default)
    return float(v) if v is not None else None


def build(flat: dict):
    """(DeviceParams, DriveConfig, SimConfig) from a flat dict.

    Starts from the named preset (default ``paper_device``) and replaces any
    field present in the dict; validation failures raise ConfigError.
    """
    preset = flat.get("preset", "paper_device")
    if preset not in PRESETS:
        raise ConfigError("unknown preset %r (have: %s)"
                          % (preset, ", ".join(sorted(PRESETS))))
    device = PRESETS[preset]()

    opt = device.optics
    opt = OpticalParams(
        omega_l0=_num(flat, "optics.omega_l0", opt.omega_l0),
        omega_r0=_num(flat, "optics.omega_r0", opt.omega_r0),
        gamma_il=_num(flat, "optics.gamma_il", opt.gamma_il),
        gamma_el=_num(flat, "optics.gamma_el", opt.gamma_el),
        gamma_ir=_num(flat, "optics.gamma_ir", opt.gamma_ir),
        gamma_er=_num(flat, "optics.gamma_er", opt.gamma_er),
        kappa=_num(flat, "optics.kappa", opt.kappa),
    )

    modes = []
    for m in device.modes:
        pre = "mech.%s." % m.kind
        modes.append(MechMode(
            kind=m.kind,
            omega_m=_num(flat, pre + "omega_m", m.omega_m),
            q_m=_num(flat, pre + "q_m", m.q_m),
            inertia=_num(flat, pre + "inertia", m.inertia),
            ga_l=_num(flat, pre + "ga_l", m.ga_l),
            ga_r=_num(flat, pre + "ga_r", m.ga_r),
            q_air=_num(flat, pre + "q_air", m.q_air),
        ))

    dmap = device.disp_map

    def coeffs(side, default):
        got = [flat.get("map.c%d_%s" % (k, side)) for k in (1, 2, 3)]
        if all(g is None for g in got):
            return default
        out = [float(g) if g is not None else 0.0 for g in got]
        while out and out[-1] == 0.0:
            out.pop()
        return tuple(out) if out else (0.0,)

    dmap = DispersiveMap(
        coeffs_left=coeffs("l", dmap.coeffs_left),
        coeffs_right=coeffs("r", dmap.coeffs_right),
        theta_min=_num(flat, "map.theta_min_rad", dmap.theta_min),
        theta_max=_num(flat, "map.theta_max_rad", dmap.theta_max),
    )

    tp = device.thermal
    tp = ThermalParams(
        tau_local=_num(flat, "thermal.tau_local_s", tp.tau_local),
        tau_cross=_num(flat, "thermal.tau_cross_s", tp.tau_cross),
        eta_abs=_num(flat, "thermal.eta_abs", tp.eta_abs),
        c_heat=_num(flat, "thermal.c_heat_j_per_k", tp.c_heat),
        dw_dt=_num(flat, "thermal.dw_dt", tp.dw_dt),
        photothermal_gain=_num(flat, "thermal.photothermal_gain",
                               tp.photothermal_gain),
        photothermal_delay=_num(flat, "thermal.photothermal_delay_s",
                                tp.photothermal_delay),
    )

    device = DeviceParams(
        optics=opt, modes=tuple(modes), disp_map=dmap, thermal=tp,
        k_eff=_num(flat, "device.k_eff", device.k_eff),
        lever_arm=_num(flat, "device.lever_arm_m", device.lever_arm),
        temperature=_num(flat, "device.temperature_k", device.temperature),
    )

    rep = validate_params(device)
    if not rep.ok:
        raise ConfigError("invalid parameters:\n%s" % rep)

    lasers = []
    for role, default_power in (("pump", 0.0), ("probe", 0.0)):
        pre = "drive.%s." % role
        power = flat.get(pre + "power_w")
        if power is None:
            continue
        cavity = flat.get(pre + "cavity", "left" if role == "pump" else "right")
        if cavity not in ("left", "right"):
            raise ConfigError("%scavity must be left or right" % pre)
        omega = flat.get(pre + "omega")
        if omega is None:
            delta = _num(flat, pre + "delta", 0.0)
            las = Laser.at_detuning(device, cavity, delta, float(power),
                                    role=role,
                                    pulse_width_s=_num(flat, pre + "pulse_width_s", 0.0))
        else:
            las = Laser(cavity=cavity, power_w=float(power), omega=float(omega),
                        role=role,
                        pulse_width_s=_num(flat, pre + "pulse_width_s", 0.0))
        lasers.append(las)
    drive = DriveConfig(lasers=tuple(lasers))

    noise = NoiseSpec(
        temperature=_num(flat, "sim.noise_temperature_k", device.temperature),
        seed=int(flat.get("sim.seed", 0)),
        enabled=bool(flat.get("sim.noise_enabled", False)),
    )
    sim = SimConfig(
        method=flat.get("sim.method", "quasistatic"),
        dt=_num(flat, "sim.dt_s", 1e-8),
        duration=_num(flat, "sim.duration_s", 1e-4),
        output_stride=int(flat.get("sim.output_stride", 1)),
        environment=flat.get("sim.environment", "vacuum"),
        noise=noise,
        thermal_enabled=bool(flat.get("sim.thermal_enabled", False)),
        retardation_enabled=bool(flat.get("sim.retardation_enabled", True)),
    )
    if sim.method not in ("full", "quasistatic"):
        raise ConfigError("sim.method must be 'full' or 'quasistatic'")
    if sim.environment not in ("vacuum", "air"):
        raise ConfigError("sim.environment must be 'vacuum' or 'air'")
    return device, drive, sim


def load(path, overrides=None):
    """Load a config file; see ``build`` for semantics."""
    with open(path) as fh:
        flat = parse_flat(fh.read())
    return build(apply_overrides(flat, overrides))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.17g" % v
    if isinstance(v, int):
        return str(v)
    return json.dumps(v)


def flatten(device: DeviceParams, drive: DriveConfig = None,
            sim: SimConfig = None) -> dict:
    """Canonical flat dict (rad/s form) describing the configuration."""
    opt = device.optics
    flat = {
        "optics.omega_l0": opt.omega_l0,
        "optics.omega_r0": opt.omega_r0,
        "optics.gamma_il": opt.gamma_il,
        "optics.gamma_el": opt.gamma_el,
        "optics.gamma_ir": opt.gamma_ir,
        "optics.gamma_er": opt.gamma_er,
        "optics.kappa": opt.kappa,
        "device.k_eff": device.k_eff,
        "device.lever_arm_m": device.lever_arm,
        "device.temperature_k": device.temperature,
    }
    for m in device.modes:
        pre = "mech.%s." % m.kind
        flat[pre + "omega_m"] = m.omega_m
        flat[pre + "q_m"] = m.q_m
        flat[pre + "inertia"] = m.inertia
        flat[pre + "ga_l"] = m.ga_l
        flat[pre + "ga_r"] = m.ga_r
        flat[pre + "q_air"] = m.q_air
    dmap = device.disp_map
    for side, coeffs in (("l", dmap.coeffs_left), ("r", dmap.coeffs_right)):
        for k in (1, 2, 3):
            if k <= len(coeffs):
                flat["map.c%d_%s" % (k, side)] = coeffs[k - 1]
    flat["map.theta_min_rad"] = dmap.theta_min
    flat["map.theta_max_rad"] = dmap.theta_max
    tp = device.thermal
    flat["thermal.tau_local_s"] = tp.tau_local
    flat["thermal.tau_cross_s"] = tp.tau_cross
    flat["thermal.eta_abs"] = tp.eta_abs
    flat["thermal.c_heat_j_per_k"] = tp.c_heat
    flat["thermal.dw_dt"] = tp.dw_dt
    flat["thermal.photothermal_gain"] = tp.photothermal_gain
    flat["thermal.photothermal_delay_s"] = tp.photothermal_delay
    if drive is not None:
        for las in drive.lasers:
            pre = "drive.%s." % las.role
            flat[pre + "cavity"] = las.cavity
            flat[pre + "power_w"] = las.power_w
            flat[pre + "omega"] = las.omega
            if las.pulse_width_s:
                flat[pre + "pulse_width_s"] = las.pulse_width_s
    if sim is not None:
        flat["sim.method"] = sim.method
        flat["sim.dt_s"] = sim.dt
        flat["sim.duration_s"] = sim.duration
        flat["sim.output_stride"] = sim.output_stride
        flat["sim.environment"] = sim.environment
        flat["sim.thermal_enabled"] = sim.thermal_enabled
        flat["sim.retardation_enabled"] = sim.retardation_enabled
        flat["sim.noise_enabled"] = sim.noise.enabled
        flat["sim.seed"] = sim.noise.seed
        flat["sim.noise_temperature_k"] = sim.noise.temperature
    return flat


def dump(device: DeviceParams, drive: DriveConfig = None,
         sim: SimConfig = None) -> str:
    """Canonical flat config text; stable ordering, full precision."""
    flat = flatten(device, drive, sim)
    lines = ["%s = %s" % (k, _fmt(flat[k])) for k in sorted(flat)]
    return "\n".join(lines) + "\n"
