"""Device description, unit conventions, validation and derived quantities.

Unit conventions (used consistently by every module):

- every angular frequency and rate is stored in rad/s; plain-Hz inputs are
  multiplied by 2*pi exactly once, at the config boundary (``config.py``)
- intracavity field amplitudes ``a`` are normalised so ``|a|^2`` is energy (J);
  waveguide inputs ``s`` so ``|s|^2`` is power (W)
- the rotation angle ``theta > 0`` means the LEFT cavity moves toward the
  substrate, so its resonance red-shifts (``d omega_L / d theta < 0``) while
  the right cavity blue-shifts.  All sign choices downstream follow this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.constants import hbar as HBAR

from .thermal import ThermalParams

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# core parameter blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OpticalParams:
    """Two-cavity optical parameters, energy decay rates in rad/s.

    ``gamma_i*`` are intrinsic rates, ``gamma_e*`` external (waveguide)
    rates; the total is their sum. ``kappa`` is the inter-cavity field
    coupling rate.
    """

    omega_l0: float
    omega_r0: float
    gamma_il: float
    gamma_el: float
    gamma_ir: float
    gamma_er: float
    kappa: float

    @property
    def gamma_l(self) -> float:
        return self.gamma_il + self.gamma_el

    @property
    def gamma_r(self) -> float:
        return self.gamma_ir + self.gamma_er

    @property
    def tau_l(self) -> float:
        """Field decay time of the left cavity, tau = 2/gamma."""
        return 2.0 / self.gamma_l

    @property
    def tau_r(self) -> float:
        return 2.0 / self.gamma_r

    @property
    def tau_le(self) -> float:
        """External-coupling field decay time of the left cavity."""
        return 2.0 / self.gamma_el

    @property
    def tau_re(self) -> float:
        return 2.0 / self.gamma_er

    @classmethod
    def from_wavelengths(
        cls,
        lambda_l: float,
        lambda_r: float,
        q_loaded: float,
        q_intrinsic: float,
        kappa: float,
    ) -> "OpticalParams":
        """Build from vacuum wavelengths (m) and loaded/intrinsic Q factors.

        The external rate is the difference gamma_total - gamma_intrinsic
        (single-port side coupling).
        """
        omega_l = TWO_PI * C_LIGHT / lambda_l
        omega_r = TWO_PI * C_LIGHT / lambda_r
        gil = omega_l / q_intrinsic
        gir = omega_r / q_intrinsic
        gl = omega_l / q_loaded
        gr = omega_r / q_loaded
        return cls(
            omega_l0=omega_l,
            omega_r0=omega_r,
            gamma_il=gil,
            gamma_el=gl - gil,
            gamma_ir=gir,
            gamma_er=gr - gir,
            kappa=kappa,
        )


@dataclass(frozen=True)
class MechMode:
    """One mechanical mode of the beam.

    ``ga_l``/``ga_r`` are the dispersive couplings d(omega_cavity)/d(angle)
    in rad/s per rad.  A torsional mode has opposite signs (see-saw), a
    flapping mode equal signs (both cavities approach the substrate
    together).  ``q_air`` is the effective quality factor used when the
    simulation environment is 'air'.
    """

    kind: str                  # 'torsional' | 'flapping'
    omega_m: float             # rad/s
    q_m: float
    inertia: float             # kg m^2
    ga_l: float                # rad/s per rad
    ga_r: float
    q_air: float = 0.5

    @property
    def gamma_m(self) -> float:
        return self.omega_m / self.q_m

    def gamma_env(self, environment: str) -> float:
        if environment == "air":
            return self.omega_m / self.q_air
        return self.gamma_m


@dataclass(frozen=True)
class DispersiveMap:
    """Polynomial frequency shift of each cavity versus torsional angle.

    ``coeffs_*`` are (c1, c2, c3, ...) in rad/s per rad^k; there is no
    constant term, so the shift at theta = 0 is exactly zero.  Evaluation
    outside [theta_min, theta_max] raises unless extrapolation is allowed.
    """

    coeffs_left: tuple
    coeffs_right: tuple
    theta_min: float = -2e-3
    theta_max: float = 2e-3

    @classmethod
    def linear(cls, ga_l: float, ga_r: float, theta_range: float = 2e-3) -> "DispersiveMap":
        return cls(
            coeffs_left=(ga_l,),
            coeffs_right=(ga_r,),
            theta_min=-theta_range,
            theta_max=theta_range,
        )

    def _check(self, theta, allow_extrapolation: bool):
        if allow_extrapolation:
            return
        th = np.asarray(theta)
        if np.any(th < self.theta_min) or np.any(th > self.theta_max):
            raise ValueError(
                "angle %s outside dispersive-map range [%g, %g] rad"
                % (np.atleast_1d(th)[np.argmax(np.abs(th))] if th.ndim else theta,
                   self.theta_min, self.theta_max)
            )

    def shift(self, cavity: str, theta, allow_extrapolation: bool = False):
        """Frequency shift (rad/s) of 'left' or 'right' cavity at angle theta."""
        self._check(theta, allow_extrapolation)
        coeffs = self.coeffs_left if cavity == "left" else self.coeffs_right
        th = np.asarray(theta, dtype=float)
        out = np.zeros_like(th)
        p = th.copy()
        for ck in coeffs:
            out = out + ck * p
            p = p * th
        return float(out) if np.isscalar(theta) else out

    def slope(self, cavity: str, theta, allow_extrapolation: bool = False):
        """d(shift)/d(theta) at angle theta."""
        self._check(theta, allow_extrapolation)
        coeffs = self.coeffs_left if cavity == "left" else self.coeffs_right
        th = np.asarray(theta, dtype=float)
        out = np.zeros_like(th)
        p = np.ones_like(th)
        for k, ck in enumerate(coeffs, start=1):
            out = out + k * ck * p
            p = p * th
        return float(out) if np.isscalar(theta) else out


@dataclass(frozen=True)
class DeviceParams:
    """Complete physical description of one device."""

    optics: OpticalParams
    modes: tuple                       # MechMode, torsional first
    disp_map: DispersiveMap
    thermal: ThermalParams
    k_eff: float                       # linear spring constant at cavity (N/m)
    lever_arm: float                   # cavity-center to axis distance (m)
    temperature: float = 300.0         # K

    @property
    def torsional(self) -> MechMode:
        for m in self.modes:
            if m.kind == "torsional":
                return m
        raise ValueError("device has no torsional mode")

    @property
    def flapping(self):
        for m in self.modes:
            if m.kind == "flapping":
                return m
        return None


# ---------------------------------------------------------------------------
# drive description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Laser:
    """One input laser.

    ``omega`` is the absolute optical angular frequency.  A nonzero
    ``pulse_width_s`` makes the power envelope a rectangular pulse of that
    width starting at t = 0 (power_w is then the peak power); otherwise the
    drive is CW at ``power_w``.
    """

    cavity: str                # 'left' | 'right'
    power_w: float
    omega: float
    role: str = "pump"         # 'pump' | 'probe'
    pulse_width_s: float = 0.0

    @classmethod
    def at_detuning(
        cls,
        device: DeviceParams,
        cavity: str,
        delta: float,
        power_w: float,
        role: str = "pump",
        pulse_width_s: float = 0.0,
    ) -> "Laser":
        """Laser at normalized detuning delta = (omega - omega_cav0) * tau."""
        opt = device.optics
        if cavity == "left":
            omega = opt.omega_l0 + delta / opt.tau_l
        else:
            omega = opt.omega_r0 + delta / opt.tau_r
        return cls(cavity=cavity, power_w=power_w, omega=omega, role=role,
                   pulse_width_s=pulse_width_s)

    def power_at(self, t: float) -> float:
        if self.pulse_width_s > 0.0:
            return self.power_w if 0.0 <= t < self.pulse_width_s else 0.0
        return self.power_w


@dataclass(frozen=True)
class DriveConfig:
    lasers: tuple = ()

    @property
    def pump(self):
        for l in self.lasers:
            if l.role == "pump":
                return l
        return None

    @property
    def probe(self):
        for l in self.lasers:
            if l.role == "probe":
                return l
        return None


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __str__(self) -> str:
        lines = []
        for e in self.errors:
            lines.append("ERROR: " + e)
        for w in self.warnings:
            lines.append("warning: " + w)
        return "\n".join(lines) if lines else "ok"


def validate_params(device: DeviceParams) -> ValidationReport:
    """Check invariants; returns a report, never raises or mutates."""
    rep = ValidationReport()
    opt = device.optics
    for name in ("gamma_il", "gamma_el", "gamma_ir", "gamma_er", "kappa"):
        if getattr(opt, name) <= 0:
            rep.errors.append("optical rate %s must be > 0" % name)
    if opt.omega_l0 <= 0 or opt.omega_r0 <= 0:
        rep.errors.append("cavity frequencies must be > 0")
    if opt.kappa >= min(opt.gamma_l, opt.gamma_r) / 10.0:
        rep.warnings.append(
            "kappa = %.3g is not << cavity linewidth (weak-coupling regime "
            "assumed by the closed-form photon-number expression)" % opt.kappa
        )

    seen_torsional = False
    for m in device.modes:
        tag = "%s mode" % m.kind
        if m.omega_m <= 0:
            rep.errors.append(tag + ": omega_m must be > 0")
        if m.q_m <= 0:
            rep.errors.append(tag + ": Gamma_m > 0 requires q_m > 0")
        if m.inertia <= 0:
            rep.errors.append(tag + ": inertia must be > 0")
        if m.q_air <= 0:
            rep.errors.append(tag + ": q_air must be > 0")
        if m.kind == "torsional":
            seen_torsional = True
            if m.ga_l * m.ga_r >= 0:
                rep.errors.append(
                    "torsional mode: anti-symmetric signs required "
                    "(sign ga_l = -sign ga_r)"
                )
            elif m.ga_l > 0:
                rep.errors.append(
                    "torsional mode: sign convention requires ga_l < 0 "
                    "(theta > 0 red-shifts the left cavity)"
                )
        elif m.kind == "flapping":
            if m.ga_l * m.ga_r < 0:
                rep.errors.append("flapping mode: couplings must share a sign")
        else:
            rep.errors.append("unknown mode kind %r" % m.kind)
    if not seen_torsional:
        rep.errors.append("device needs a torsional mode")

    dmap = device.disp_map
    if dmap.theta_min >= dmap.theta_max:
        rep.errors.append("dispersive map: empty angle range")
    if len(dmap.coeffs_left) >= 1 and len(dmap.coeffs_right) >= 1 and seen_torsional:
        t = device.torsional
        if not math.isclose(dmap.coeffs_left[0], t.ga_l, rel_tol=1e-6) or \
           not math.isclose(dmap.coeffs_right[0], t.ga_r, rel_tol=1e-6):
            rep.warnings.append(
                "dispersive-map linear coefficients differ from the torsional "
                "mode couplings (measured/asymmetric map?)"
            )

    if device.k_eff <= 0:
        rep.errors.append("k_eff must be > 0")
    if device.lever_arm <= 0:
        rep.errors.append("lever_arm must be > 0")
    if device.temperature < 0:
        rep.errors.append("temperature must be >= 0")

    tp = device.thermal
    if tp.tau_local <= 0 or tp.tau_cross <= 0:
        rep.errors.append("thermal relaxation times must be > 0")
    if not 0.0 <= tp.eta_abs <= 1.0:
        rep.errors.append("eta_abs must lie in [0, 1]")
    if tp.c_heat <= 0:
        rep.errors.append("c_heat must be > 0")
    return rep


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DerivedQuantities:
    gamma_l: float
    gamma_r: float
    tau_l: float
    tau_r: float
    k_eff: float
    lever_arm: float
    g_om: float                # rad/s per m, linear coupling at the cavity
    g_a: float                 # rad/s per rad, |angular coupling|
    m_eff: float               # kg, effective mass at the cavity position
    x_zpf: float               # m
    g_0: float                 # rad/s, vacuum coupling
    delta_omega_c: float       # rad/s, single-photon cavity shift
    sideband_ratio: float      # Omega_m / gamma


def derive_quantities(device: DeviceParams) -> DerivedQuantities:
    """Populate every derived number quoted for a device.

    The single-photon shift is computed as hbar g_OM^2 / k; the identity
    with 2 g_0^2 / Omega_m holds algebraically because x_zpf is built from
    the same effective mass m_eff = k / Omega_m^2.
    """
    if device.k_eff <= 0:
        raise ValueError("k_eff must be > 0")
    t = device.torsional
    if t.inertia <= 0:
        raise ValueError("inertia must be > 0")
    opt = device.optics
    g_a = abs(t.ga_r)
    g_om = g_a / device.lever_arm
    m_eff = device.k_eff / t.omega_m**2
    x_zpf = math.sqrt(HBAR / (2.0 * m_eff * t.omega_m))
    g_0 = g_om * x_zpf
    delta_omega_c = HBAR * g_om**2 / device.k_eff
    return DerivedQuantities(
        gamma_l=opt.gamma_l,
        gamma_r=opt.gamma_r,
        tau_l=opt.tau_l,
        tau_r=opt.tau_r,
        k_eff=device.k_eff,
        lever_arm=device.lever_arm,
        g_om=g_om,
        g_a=g_a,
        m_eff=m_eff,
        x_zpf=x_zpf,
        g_0=g_0,
        delta_omega_c=delta_omega_c,
        sideband_ratio=t.omega_m / max(opt.gamma_l, opt.gamma_r),
    )


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

# Published device numbers.  Lever arm = half the 23 um cavity separation;
# inertia from the torsional stiffness k_eff * l^2 and the mode frequency.
PAPER = dict(
    lambda_l=1541.574e-9,
    lambda_r=1541.219e-9,
    q_loaded=1.0e4,
    q_intrinsic=1.6e4,
    kappa=TWO_PI * 0.72e9,
    g_om=TWO_PI * 2.13e18,
    k_eff=0.11,
    lever_arm=11.5e-6,
    f_torsional=441e3,
    f_flapping=514e3,
    q_torsional=1.66e4,
    q_flapping=1.68e4,
)

# Flapping-mode dispersive coupling is not published.  Equal magnitude to the
# torsional coupling makes the two near-critically-damped air responses cancel
# almost exactly (the velocity kicks per unit torque differ only through the
# mode inertias), which buries the see-saw signature; half magnitude keeps the
# mode visible in spectra without that degeneracy.
FLAPPING_COUPLING_FRACTION = 0.5


def paper_device(temperature: float = 300.0) -> DeviceParams:
    """The published device, every quoted value reproduced."""
    p = PAPER
    opt = OpticalParams.from_wavelengths(
        p["lambda_l"], p["lambda_r"], p["q_loaded"], p["q_intrinsic"], p["kappa"]
    )
    g_a = p["g_om"] * p["lever_arm"]
    om_t = TWO_PI * p["f_torsional"]
    om_f = TWO_PI * p["f_flapping"]
    inertia_t = p["k_eff"] * p["lever_arm"] ** 2 / om_t**2
    inertia_f = p["k_eff"] * p["lever_arm"] ** 2 / om_f**2
    gf = FLAPPING_COUPLING_FRACTION * g_a
    modes = (
        MechMode(kind="torsional", omega_m=om_t, q_m=p["q_torsional"],
                 inertia=inertia_t, ga_l=-g_a, ga_r=+g_a),
        MechMode(kind="flapping", omega_m=om_f, q_m=p["q_flapping"],
                 inertia=inertia_f, ga_l=gf, ga_r=gf),
    )
    return DeviceParams(
        optics=opt,
        modes=modes,
        disp_map=DispersiveMap.linear(-g_a, +g_a),
        thermal=ThermalParams(),
        k_eff=p["k_eff"],
        lever_arm=p["lever_arm"],
        temperature=temperature,
    )


def reduced_stiffness_device(
    gamma_over_omega: float = 1e3,
    q_mech: float = 5e3,
    temperature: float = 300.0,
) -> DeviceParams:
    """Dynamically similar instance with gamma = gamma_over_omega * Omega_m.

    Every optical rate and frequency offset (decay rates, kappa, cavity
    splitting) is scaled by the same factor, so all normalized detunings and
    the coupling ratio kappa*tau match the paper device exactly while full
    time-domain integration of the cavity fields becomes feasible.  The
    mechanical Q is lowered so ring-down rate changes are measurable within
    tens of cycles.
    """
    base = paper_device(temperature)
    opt = base.optics
    scale = gamma_over_omega * base.torsional.omega_m / opt.gamma_l
    split = opt.omega_r0 - opt.omega_l0
    new_opt = OpticalParams(
        omega_l0=opt.omega_l0,
        omega_r0=opt.omega_l0 + split * scale,
        gamma_il=opt.gamma_il * scale,
        gamma_el=opt.gamma_el * scale,
        gamma_ir=opt.gamma_ir * scale,
        gamma_er=opt.gamma_er * scale,
        kappa=opt.kappa * scale,
    )
    modes = tuple(replace(m, q_m=q_mech) for m in base.modes)
    return replace(base, optics=new_opt, modes=modes)


PRESETS = {
    "paper_device": paper_device,
    "reduced_stiffness": reduced_stiffness_device,
}
