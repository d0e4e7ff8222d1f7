"""Photon shuttling through an oscillation cycle, and its stroboscopic readout.

With the pump parked midway between the two rest resonances, a torsional
oscillation reaching the alignment-touching angle sweeps both cavities
through the pump simultaneously once per cycle: a pulse of photons crosses
to the right cavity.  Pushing the amplitude past the crossover splits the
transfer into two pulses per cycle.

The oscillation amplitude here is prescribed (at sub-microwatt pump levels
radiation pressure alone cannot sustain it; see README); the per-cycle
photon count and the pulse structure are what the model predicts for the
measured motion.

Also demonstrates the stroboscopic reconstruction: sweeping a weak probe
over many fixed detunings and re-fitting the known line shape at every
instant recovers the resonance trajectory of each cavity.
"""

import math
import pathlib

import numpy as np

from seesaw import count_shuttled_photons, paper_device, strobo_reconstruct
from seesaw.analysis import detuning_trajectory, write_trajectory_csv
from seesaw.dynamics import SimConfig, SystemState, simulate_quasistatic
from seesaw.mechanics import MechState
from seesaw.params import DriveConfig, Laser

TWO_PI = 2 * math.pi
HERE = pathlib.Path(__file__).parent

dev = paper_device()
opt = dev.optics
t_mode = dev.torsional
period = TWO_PI / t_mode.omega_m
w_mid = 0.5 * (opt.omega_l0 + opt.omega_r0)
g_spread = dev.disp_map.slope("right", 0.0) - dev.disp_map.slope("left", 0.0)
th_touch = abs((opt.omega_r0 - opt.omega_l0) / g_spread)
print("alignment-touching amplitude: %.3f mrad" % (th_touch * 1e3))


def run(amp_frac, power=0.135e-6, cycles=8):
    drive = DriveConfig(lasers=(
        Laser(cavity="left", power_w=power, omega=w_mid, role="pump"),))
    sim = SimConfig(method="quasistatic", dt=period / 1000,
                    duration=cycles * period, output_stride=1)
    st = SystemState(mech=MechState(np.array([amp_frac * th_touch, 0.0]),
                                    np.zeros(2)))
    return drive, simulate_quasistatic(dev, drive, sim, initial=st)


print("\npump 0.135 uW at the midpoint frequency:")
for frac in (0.8, 1.0, 1.5):
    drive, tr = run(frac)
    stats = count_shuttled_photons(tr, dev)
    print("  amplitude %.1f x touching: n_tr = %5.0f photons/cycle, "
          "%d peak(s) per cycle" % (frac, stats.n_tr, stats.peaks_per_cycle))

drive, tr = run(1.0)
dl, dr = detuning_trajectory(tr, dev, drive.lasers[0].omega)
write_trajectory_csv(HERE / "threshold_trajectory.csv", tr.t, dl, dr)
tr.to_csv(HERE / "shuttle_touching.csv")
print("\nwrote shuttle_touching.csv and threshold_trajectory.csv")
print("(overlay the trajectory on the map from `seesaw map` to reproduce the")
print(" photon-transfer landscape picture: the path is the anti-diagonal")
print(" delta_R = -delta_L, tangent to the origin at the turning point)")

# --- stroboscopic reconstruction at crossover amplitude --------------------
print("\nstroboscopic reconstruction at 1.2 x touching amplitude:")
theta0 = 1.2 * th_touch


def probe_traces(cavity, deltas):
    out = []
    for d in deltas:
        probe = Laser.at_detuning(dev, cavity, float(d), 2.3e-9, role="probe")
        sim = SimConfig(method="quasistatic", dt=period / 400,
                        duration=3 * period, output_stride=1)
        st = SystemState(mech=MechState(np.array([theta0, 0.0]), np.zeros(2)))
        out.append((float(d), simulate_quasistatic(
            dev, DriveConfig(lasers=(probe,)), sim, initial=st)))
    return out


deltas = np.linspace(-3, 3, 9)
res_r = strobo_reconstruct(probe_traces("right", deltas), dev, cavity="right")
res_l = strobo_reconstruct(probe_traces("left", deltas), dev, cavity="left")
true_r = dev.disp_map.shift("right", res_r.theta, allow_extrapolation=True) \
    * opt.tau_r
rms = np.sqrt(np.mean((res_r.shift_norm - true_r) ** 2))
print("  right-cavity trajectory recovered with RMS %.2e linewidths"
      % rms)
gap = res_r.omega - res_l.omega
print("  resonance gap swings %.1f .. %.1f GHz -> cavities cross: %s"
      % (gap.min() / TWO_PI / 1e9, gap.max() / TWO_PI / 1e9,
         gap.min() < 0 < gap.max()))
with open(HERE / "strobe_trajectories.csv", "w") as fh:
    fh.write("t_s,omega_left_rad_s,omega_right_rad_s,theta_rad\n")
    for row in zip(res_r.t, res_l.omega, res_r.omega, res_r.theta):
        fh.write(",".join("%.17g" % v for v in row) + "\n")
print("  wrote strobe_trajectories.csv")
