"""Flat config parsing, unit handling, round-trip identity."""

import math

import pytest

from seesaw import config
from seesaw.params import paper_device

TWO_PI = 2 * math.pi


def test_round_trip_bit_identical(paper):
    from seesaw.dynamics import SimConfig
    from seesaw.params import DriveConfig, Laser
    drive = DriveConfig(lasers=(
        Laser.at_detuning(paper, "left", 0.5, 3.4e-6, role="pump"),
        Laser.at_detuning(paper, "right", -0.8, 30e-9, role="probe"),
    ))
    sim = SimConfig()
    text = config.dump(paper, drive, sim)
    dev2, drive2, sim2 = config.build(config.parse_flat(text))
    assert config.dump(dev2, drive2, sim2) == text


def test_unknown_key_is_hard_error():
    with pytest.raises(config.ConfigError, match="unknown key"):
        config.parse_flat("optics.kapa = 1.0\n")


def test_duplicate_key_rejected():
    with pytest.raises(config.ConfigError, match="duplicate"):
        config.parse_flat("optics.kappa = 1.0\noptics.kappa = 2.0\n")


def test_hz_suffix_applied_exactly_once():
    flat = config.parse_flat("optics.kappa_hz = 7.2e8\n")
    assert flat["optics.kappa"] == pytest.approx(TWO_PI * 7.2e8, rel=1e-15)
    dev, _, _ = config.build(flat)
    assert dev.optics.kappa == pytest.approx(TWO_PI * 7.2e8, rel=1e-15)


def test_hz_and_rad_together_rejected():
    with pytest.raises(config.ConfigError, match="both"):
        config.parse_flat("optics.kappa = 1.0\noptics.kappa_hz = 2.0\n")


def test_preset_default_is_paper_device(paper):
    dev, drive, sim = config.build({})
    assert dev.optics.kappa == paper.optics.kappa
    assert drive.lasers == ()


def test_invalid_parameter_raises():
    with pytest.raises(config.ConfigError, match="invalid parameters"):
        config.build({"mech.torsional.q_m": -1.0})


def test_overrides_applied():
    flat = config.apply_overrides({}, ["drive.pump.power_w=6.76e-6",
                                       "drive.pump.delta=0.5"])
    dev, drive, sim = config.build(flat)
    assert drive.pump.power_w == pytest.approx(6.76e-6)


def test_override_unknown_key_rejected():
    with pytest.raises(config.ConfigError):
        config.apply_overrides({}, ["nope.key=1"])


def test_comment_and_blank_lines():
    flat = config.parse_flat("""
# a comment
optics.kappa = 4.5e9   # trailing comment

""")
    assert flat["optics.kappa"] == 4.5e9


def test_laser_from_delta(paper):
    dev, drive, _ = config.build({
        "drive.probe.power_w": 30e-9,
        "drive.probe.cavity": "right",
        "drive.probe.delta": -0.8,
    })
    las = drive.probe
    assert las is not None
    tau = dev.optics.tau_r
    # recovering the detuning from the absolute frequency cancels ~15 digits
    assert (las.omega - dev.optics.omega_r0) * tau == pytest.approx(-0.8, rel=1e-9)


def test_bad_method_rejected():
    with pytest.raises(config.ConfigError):
        config.build({"sim.method": "magic"})
