"""Torsional two-cavity optomechanics: coupled-mode simulation and analysis.

A nanobeam carrying one photonic-crystal cavity on each side of its rotation
axis couples the two optical modes dispersively and anti-symmetrically: tilting
the beam red-shifts one cavity and blue-shifts the other. Pump light exerts a
torque, the torsional mode modulates both detunings, and near resonance
alignment photons transfer from the pumped cavity to the empty one once (or
twice) per oscillation cycle.

The package is organised as a plain numpy/scipy library:

- ``params``    device description, validation, derived quantities, presets
- ``optics``    quasi-static coupled-mode solutions, transmission, photon maps
- ``mechanics`` torsional/flapping modes, optical torque, Langevin noise
- ``thermal``   lumped two-compartment thermo-optic channel
- ``dynamics``  time-domain integrators, backaction, limit cycles, thresholds
- ``analysis``  spectra, ring-down fits, stroboscopic reconstruction, shuttle
  statistics
- ``cli``       batch experiment runner (``seesaw`` command)
"""

from .params import (
    DeviceParams,
    DerivedQuantities,
    DispersiveMap,
    DriveConfig,
    Laser,
    MechMode,
    OpticalParams,
    ValidationReport,
    derive_quantities,
    paper_device,
    reduced_stiffness_device,
    validate_params,
)
from .optics import (
    Detunings,
    FieldPair,
    cavity_detunings,
    photon_number_right,
    shuttle_map,
    steady_state_fields,
    waveguide_transmission,
)
from .mechanics import (
    MechState,
    NoiseSpec,
    TorqueNoise,
    mech_derivatives,
    optical_torque,
    thermal_torque_sample,
    torque_sensitivity,
)
from .thermal import ThermalParams, ThermalState, thermal_derivatives, thermo_optic_shift
from .dynamics import (
    LimitCycle,
    SimConfig,
    TimeSeries,
    backaction_rates,
    find_limit_cycle,
    find_threshold,
    impulse_response,
    simulate_full,
    simulate_quasistatic,
)
from .analysis import (
    ShuttleStats,
    Spectrum,
    count_shuttled_photons,
    detuning_trajectory,
    fft_spectrum,
    ringdown_fit,
    strobo_reconstruct,
)

__version__ = "0.1.0"
