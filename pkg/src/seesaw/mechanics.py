"""Mechanical modes: optical torque, damped-oscillator dynamics, thermal noise.

The optical torque on a mode with dispersive couplings (ga_l, ga_r) carrying
n_L and n_R intracavity photons is

    tau = -hbar (ga_l n_L + ga_r n_R),

the gradient of the dressed cavity energy with respect to angle.  With the
sign convention ga_l < 0 for the torsional mode, photons in the left cavity
pull the left side toward the substrate (tau > 0).

Thermal torque noise follows the fluctuation-dissipation theorem: the
delta-correlated Langevin torque with strength 2 k_B T I Gamma_m reproduces
equipartition <theta^2> = k_B T / (I Omega_m^2); its one-sided spectral
density S_tau = 4 k_B T I Gamma_m sets the torque detection floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar as HBAR
from scipy.constants import k as K_B

from .params import MechMode


@dataclass
class MechState:
    """Angles and angular velocities, one entry per mode."""

    theta: np.ndarray
    theta_dot: np.ndarray

    @classmethod
    def zeros(cls, n_modes: int) -> "MechState":
        return cls(theta=np.zeros(n_modes), theta_dot=np.zeros(n_modes))


@dataclass(frozen=True)
class NoiseSpec:
    temperature: float = 300.0
    seed: int = 0
    enabled: bool = False


def optical_torque(n_l: float, n_r: float, mode: MechMode) -> float:
    """Radiation-pressure torque (N m) on one mode from both photon numbers."""
    return -HBAR * (mode.ga_l * n_l + mode.ga_r * n_r)


def mech_derivatives(theta: float, theta_dot: float, torque: float,
                     mode: MechMode, environment: str = "vacuum"):
    """(d theta/dt, d theta_dot/dt) for a damped harmonic mode."""
    gamma = mode.gamma_env(environment)
    acc = -mode.omega_m**2 * theta - gamma * theta_dot + torque / mode.inertia
    return theta_dot, acc


class TorqueNoise:
    """Seeded Gaussian torque-noise stream for one simulation run.

    Each sample is the average Langevin torque over a step of length dt:
    zero mean, variance 2 k_B T I Gamma_m / dt.  (Equivalently S_tau/(2 dt)
    with the one-sided density S_tau = 4 k_B T I Gamma_m; the factor two is
    fixed by equipartition.)  Streams are reproducible bit-for-bit for a
    given seed.
    """

    def __init__(self, spec: NoiseSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)

    def sample(self, mode: MechMode, dt: float, environment: str = "vacuum") -> float:
        if not self.spec.enabled or self.spec.temperature == 0.0:
            return 0.0
        gamma = mode.gamma_env(environment)
        var = 2.0 * K_B * self.spec.temperature * mode.inertia * gamma / dt
        return math.sqrt(var) * self.rng.standard_normal()


def thermal_torque_sample(noise: TorqueNoise, mode: MechMode, dt: float,
                          environment: str = "vacuum") -> float:
    """One Langevin torque sample (N m) from an owned noise stream."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    return noise.sample(mode, dt, environment)


def torque_sensitivity(mode: MechMode, temperature: float) -> float:
    """Thermomechanical-noise-limited torque floor, sqrt(4 k_B T I Gamma_m).

    Units N m / sqrt(Hz); zero at T = 0.
    """
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    return math.sqrt(4.0 * K_B * temperature * mode.inertia * mode.gamma_m)


def langevin_trace(
    mode: MechMode,
    noise: NoiseSpec,
    dt: float,
    n_steps: int,
    environment: str = "vacuum",
    theta0: float = 0.0,
    theta_dot0: float = 0.0,
):
    """Euler-Maruyama integration of the noisy free mode; returns theta array.

    Plain mechanics-only helper for calibration checks (equipartition,
    noise spectra); the full system integrators live in ``dynamics``.
    """
    stream = TorqueNoise(noise)
    gamma = mode.gamma_env(environment)
    om2 = mode.omega_m**2
    inv_i = 1.0 / mode.inertia
    th = theta0
    v = theta_dot0
    out = np.empty(n_steps)
    sq = 0.0
    if noise.enabled and noise.temperature > 0.0:
        sq = math.sqrt(2.0 * K_B * noise.temperature * mode.inertia * gamma / dt)
    normals = stream.rng.standard_normal(n_steps) if sq else np.zeros(n_steps)
    for i in range(n_steps):
        out[i] = th
        acc = -om2 * th - gamma * v + sq * normals[i] * inv_i
        th += v * dt
        v += acc * dt
    return out
