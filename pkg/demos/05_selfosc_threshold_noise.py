"""Self-oscillation thresholds, limit cycles, and thermal noise.

Three parts:

1. Radiation-pressure-only threshold of the physical device.  The energy
   balance gives ~5 mW -- orders above the measured 0.135 uW, so radiation
   pressure alone cannot explain the measured onset.  The optional
   photothermal torque channel (a first-order lag on the absorbed-power
   imbalance) can be tuned to move the threshold to the measured level;
   the value found here is a fit, not a device property.

2. A converged limit cycle on the reduced-stiffness instance, re-simulated
   to confirm the amplitude holds.

3. The thermomechanical torque floor and a Langevin equipartition check.
"""

import math
from dataclasses import replace

import numpy as np
from scipy.constants import k as k_B

from seesaw import find_limit_cycle, find_threshold, paper_device
from seesaw.dynamics import SimConfig, SystemState, simulate_quasistatic
from seesaw.mechanics import MechMode, MechState, NoiseSpec, langevin_trace, torque_sensitivity
from seesaw.params import DriveConfig, Laser, reduced_stiffness_device

TWO_PI = 2 * math.pi

# --- 1: thresholds ----------------------------------------------------------
dev = paper_device()
drive = DriveConfig(lasers=(
    Laser.at_detuning(dev, "left", 1 / math.sqrt(3), 1e-6, role="pump"),))
rp = find_threshold(dev, drive)
print("radiation-pressure-only threshold: %.2f mW  (measured onset: 0.135 uW,"
      % (rp["threshold_w"] * 1e3))
print("  a factor %.0e apart -- the measured gain mechanism is not radiation"
      % (rp["threshold_w"] / 0.135e-6))
print("  pressure alone)")

print("\nbisecting a photothermal gain that fits the measured threshold...")
lo, hi = 1e-16, 1e-8
for _ in range(60):
    mid = math.sqrt(lo * hi)
    dev_pt = replace(dev, thermal=replace(dev.thermal, photothermal_gain=mid))
    th = find_threshold(dev_pt, drive)["threshold_w"]
    if th > 0.135e-6:
        lo = mid
    else:
        hi = mid
gain_fit = math.sqrt(lo * hi)
dev_pt = replace(dev, thermal=replace(dev.thermal, photothermal_gain=gain_fit))
print("  fitted photothermal gain = %.3g N m / W  (delay %.1f us)"
      % (gain_fit, dev.thermal.photothermal_delay * 1e6))
print("  -> threshold %.3f uW  [FIT: matches the measurement by construction]"
      % (find_threshold(dev_pt, drive)["threshold_w"] * 1e6))

# --- 2: limit cycle on the reduced instance ---------------------------------
red = reduced_stiffness_device()
drive_r = DriveConfig(lasers=(
    Laser.at_detuning(red, "left", 1 / math.sqrt(3), 1e-6, role="pump"),))
th_red = find_threshold(red, drive_r, p_hi=1e-3)
p_run = 1.2 * th_red["threshold_w"]
cyc = find_limit_cycle(red, DriveConfig(lasers=(
    replace(drive_r.lasers[0], power_w=p_run),)))
print("\nreduced instance: threshold %.3f uW; at 1.2x threshold the energy"
      % (th_red["threshold_w"] * 1e6))
print("  balance converges at %.2f urad (residual %.1e)"
      % (cyc.amplitude * 1e6, cyc.residual))
period = TWO_PI / red.torsional.omega_m
sim = SimConfig(method="quasistatic", dt=period / 500, duration=100 * period)
st = SystemState(mech=MechState(np.array([cyc.amplitude, 0.0]), np.zeros(2)))
tr = simulate_quasistatic(red, DriveConfig(lasers=(
    replace(drive_r.lasers[0], power_w=p_run),)), sim, initial=st)
amp_end = np.abs(tr["theta_torsional_rad"][-2500:]).max()
print("  re-simulated 100 cycles: amplitude holds at %.2f urad (%+.1f%%)"
      % (amp_end * 1e6, 100 * (amp_end / cyc.amplitude - 1)))

# --- 3: noise ---------------------------------------------------------------
t_mode = dev.torsional
print("\nthermomechanical torque floor (300 K): %.3g N m / sqrt(Hz)"
      % torque_sensitivity(t_mode, 300.0))
demo = MechMode(kind="torsional", omega_m=TWO_PI * 1e3, q_m=2.0,
                inertia=1e-20, ga_l=-1.0, ga_r=1.0)
spec = NoiseSpec(temperature=300.0, seed=11, enabled=True)
trace = langevin_trace(demo, spec, 0.005 / demo.omega_m, 2_000_000)
theta2 = np.mean(trace[200_000:] ** 2)
expected = k_B * 300.0 / (demo.inertia * demo.omega_m**2)
print("Langevin equipartition on a soft test mode: <theta^2> / (kT/I Omega^2)"
      " = %.3f" % (theta2 / expected))
