"""Tour of the device parameters and every derived headline number.

Prints the full parameter table of the bundled device preset, the derived
quantities (decay rates, zero-point scales, single-photon shift, torque per
photon), and the static optical landscape: transmission dips and the
photon-transfer map.
"""

import math

import numpy as np

from seesaw import (
    cavity_detunings,
    derive_quantities,
    paper_device,
    shuttle_map,
    steady_state_fields,
    validate_params,
    waveguide_transmission,
)
from seesaw.mechanics import optical_torque, torque_sensitivity

TWO_PI = 2 * math.pi

dev = paper_device()
print("validation:", validate_params(dev))

opt = dev.optics
print("\n--- optical frequencies and rates ---")
print("f_L0 = %.6f THz   f_R0 = %.6f THz" % (opt.omega_l0 / TWO_PI / 1e12,
                                             opt.omega_r0 / TWO_PI / 1e12))
print("cavity splitting  = %.2f GHz" % ((opt.omega_r0 - opt.omega_l0) / TWO_PI / 1e9))
print("gamma_L = 2 pi x %.2f GHz (tau_L = %.2f ps)"
      % (opt.gamma_l / TWO_PI / 1e9, opt.tau_l * 1e12))
print("kappa   = 2 pi x %.2f GHz  -> kappa * tau = %.4f (weak coupling)"
      % (opt.kappa / TWO_PI / 1e9, opt.kappa * opt.tau_l))

dq = derive_quantities(dev)
print("\n--- derived optomechanics ---")
print("g_OM   = 2 pi x %.2f GHz/nm" % (dq.g_om / TWO_PI / 1e18))
print("g_OM^A = 2 pi x %.2f GHz/mrad" % (dq.g_a * 1e-3 / TWO_PI / 1e9))
print("x_zpf  = %.3g m,  g_0 = 2 pi x %.1f Hz" % (dq.x_zpf, dq.g_0 / TWO_PI))
print("single-photon shift = 2 pi x %.2f kHz" % (dq.delta_omega_c / TWO_PI / 1e3))
print("sideband ratio Omega_m/gamma = %.2e  (deep Doppler regime)"
      % dq.sideband_ratio)

t_mode = dev.torsional
print("\n--- mechanics ---")
print("torsional: %.0f kHz, Q = %.0f, I = %.3g kg m^2"
      % (t_mode.omega_m / TWO_PI / 1e3, t_mode.q_m, t_mode.inertia))
print("flapping:  %.0f kHz, Q = %.0f" % (dev.flapping.omega_m / TWO_PI / 1e3,
                                         dev.flapping.q_m))
print("torque per left-cavity photon: %.3g N m" % optical_torque(1, 0, t_mode))
print("thermomechanical torque floor at 300 K: %.3g N m / sqrt(Hz)"
      % torque_sensitivity(t_mode, 300.0))

print("\n--- static optics ---")
print("transmission dip on resonance: T(0) = %.4f (both cavities)"
      % waveguide_transmission(dev, "left", 0.0))
w_mid = 0.5 * (opt.omega_l0 + opt.omega_r0)
det0 = cavity_detunings(dev, 0.0, w_mid)
fp = steady_state_fields(dev, det0, p_in_left=0.135e-6)
n_l, n_r = fp.photons(w_mid)
print("pump at the midpoint, 0.135 uW, beam at rest:")
print("  detunings (delta_L, delta_R) = (%.2f, %.2f)" % (det0.delta_l, det0.delta_r))
print("  n_L = %.3g   n_R = %.3g photons" % (n_l, n_r))

# the alignment-touching angle: rotate until both resonances meet the pump
g_spread = dev.disp_map.slope("right", 0.0) - dev.disp_map.slope("left", 0.0)
th_touch = abs((opt.omega_r0 - opt.omega_l0) / g_spread)
det_t = cavity_detunings(dev, -th_touch, w_mid)
fp_t = steady_state_fields(dev, det_t, p_in_left=0.135e-6)
print("rotated to %.3f mrad (alignment): n_R = %.3g photons  (x%.0f)"
      % (-th_touch * 1e3, fp_t.photons(w_mid)[1],
         fp_t.photons(w_mid)[1] / n_r))

grid = np.linspace(-3, 3, 7)
m = shuttle_map(dev, grid, grid)
print("\nnormalized n_R map, delta_L down / delta_R across:")
for i, row in enumerate(m):
    print("  %+0.0f | " % grid[i] + " ".join("%.3f" % v for v in row))
