"""Lumped thermo-optic channel.

Absorbed pump power heats the region around the left cavity; heat relaxes
locally to the substrate (tau_local) and conducts across the beam to the
right cavity (tau_cross), whose resonance then red-shifts by dw_dt per
kelvin of excess temperature.  Two coupled first-order compartments replace
a full finite-element treatment; the default time constants and thermo-optic
coefficient were calibrated once against the slow air-environment impulse
response (probe signal changing sign near 1.9 us, thermal extremum near
3.2 us for a 10 ns / 4 mW pump pulse) and then frozen.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ThermalParams:
    tau_local: float = 5e-6        # s, relaxation to the substrate
    tau_cross: float = 6e-6        # s, conduction across the beam
    eta_abs: float = 1.0           # absorbed fraction of intrinsic dissipation
    c_heat: float = 5e-9           # J/K, lumped heat capacity per compartment
    dw_dt: float = -3.5e10         # rad/s per K, thermo-optic shift (<0: red)
    # optional photothermal torque channel: first-order lag of the absorbed
    # power imbalance, converted to torque.  Off by default; any value used
    # to reach a measured threshold is a fit, not a device property.
    photothermal_gain: float = 0.0     # N m per W of (P_abs_L - P_abs_R)
    photothermal_delay: float = 1e-6   # s


@dataclass
class ThermalState:
    u_l: float = 0.0               # K, excess temperature, left compartment
    u_r: float = 0.0


def thermal_derivatives(state: ThermalState, p_abs_l: float, p_abs_r: float,
                        tp: ThermalParams):
    """du/dt for both compartments (K/s)."""
    du_l = p_abs_l / tp.c_heat - state.u_l / tp.tau_local \
        - (state.u_l - state.u_r) / tp.tau_cross
    du_r = p_abs_r / tp.c_heat - state.u_r / tp.tau_local \
        - (state.u_r - state.u_l) / tp.tau_cross
    return du_l, du_r


def thermo_optic_shift(state: ThermalState, tp: ThermalParams):
    """Resonance shifts (rad/s) of (left, right) cavity."""
    return tp.dw_dt * state.u_l, tp.dw_dt * state.u_r
