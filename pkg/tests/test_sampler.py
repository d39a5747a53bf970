import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate

from wvlab.components.inference import jitter_variances
from wvlab.components.optics import BeamParams, StConfig, WvConfig, port_probability
from wvlab.components.sampler import (
    DetectorModulation,
    DisturbanceSet,
    LaserJitterSpec,
    laser_jitter_waveform,
    pdf_st,
    pdf_wv,
    photon_budget,
    sample_batch,
    sample_ports,
    sample_split_counts,
    st_family,
    wv_family,
)
from wvlab.errors import AliasingError, InvalidStreamError


def test_port_profiles_are_normalized_and_centered(beam, wv, st):
    k = 30.0
    dark = pdf_wv(beam, wv, k, "dark")
    bright = pdf_wv(beam, wv, k, "bright")
    focused = pdf_st(beam, st, k)
    assert dark.mean == pytest.approx(-2 * beam.sigma ** 2 * k / math.tan(0.19))
    assert bright.mean == pytest.approx(2 * beam.sigma ** 2 * k * math.tan(0.19))
    assert focused.std == pytest.approx(st.focused_radius(beam))
    for density in (dark, bright, focused):
        span = 12 * density.std
        total, _ = integrate.quad(density, density.mean - span, density.mean + span)
        assert total == pytest.approx(1.0, abs=1e-9)


def test_family_weights_are_port_probabilities(beam, wv, st):
    assert wv_family(beam, wv, "dark").weight == port_probability(wv, "dark")
    assert st_family(beam, st).weight == 1.0
    family = wv_family(beam, wv, "dark")
    x = np.linspace(-3e-3, 3e-3, 7)
    np.testing.assert_allclose(
        np.asarray(np.exp(family.logpdf(x, 5.0)), dtype=float), family.pdf(x, 5.0), rtol=1e-12
    )


def test_dark_batch_statistics(beam, wv):
    rng = np.random.default_rng(3)
    k = 50.0
    batch = sample_batch(beam, wv, k, DisturbanceSet(), t=0.0, n=1_000_000, rng=rng, port="dark")
    p_dark = port_probability(wv, "dark")
    expected_n = 1_000_000 * p_dark
    assert abs(batch.n - expected_n) < 5 * math.sqrt(expected_n)
    stderr = beam.sigma / math.sqrt(batch.n)
    assert abs(np.mean(batch.positions) - kick_mean(beam, wv, k)) < 5 * stderr
    assert batch.port == "dark" and batch.n_input == 1_000_000


def kick_mean(beam, wv, k):
    return -2 * beam.sigma ** 2 * k / math.tan(wv.phi / 2)


def test_focused_batch_keeps_every_photon(beam, st):
    batch = sample_batch(beam, st, 20.0, DisturbanceSet(), t=0.0, n=20_000, rng=np.random.default_rng(1))
    assert batch.n == 20_000
    assert batch.port == "st"
    assert np.std(batch.positions) == pytest.approx(st.focused_radius(beam), rel=0.03)


def test_modulations_shift_the_batch_mean(beam, st):
    noise = DisturbanceSet(d_mod=DetectorModulation(amplitude=5e-6, frequency=10.0))
    batch = sample_batch(beam, st, 0.0, noise, t=0.025, n=200_000, rng=np.random.default_rng(2))
    stderr = st.focused_radius(beam) / math.sqrt(batch.n)
    assert abs(np.mean(batch.positions) - 5e-6) < 5 * stderr


def test_same_stream_same_batch(beam, wv):
    first = sample_batch(beam, wv, 1.0, DisturbanceSet(), 0.0, 5000, np.random.default_rng(9))
    second = sample_batch(beam, wv, 1.0, DisturbanceSet(), 0.0, 5000, np.random.default_rng(9))
    np.testing.assert_array_equal(first.positions, second.positions)


def test_sampling_requires_a_generator(beam, wv):
    with pytest.raises(InvalidStreamError):
        sample_batch(beam, wv, 1.0, DisturbanceSet(), 0.0, 10, rng=42)
    with pytest.raises(InvalidStreamError):
        photon_budget(3.5, np.random.RandomState(0), size=3)


def test_ports_share_the_input_photons(beam, wv):
    dark, bright = sample_ports(beam, wv, 0.0, DisturbanceSet(), 0.0, 100_000, np.random.default_rng(4))
    assert dark.n + bright.n == 100_000
    assert dark.n < bright.n


def test_photon_budget_rounds_stochastically():
    budget = photon_budget(2.3, np.random.default_rng(0), size=200_000)
    assert set(np.unique(budget)) == {2, 3}
    assert budget.mean() == pytest.approx(2.3, abs=0.01)
    np.testing.assert_array_equal(photon_budget(4.0, np.random.default_rng(0), size=5), np.full(5, 4))


def test_split_counts_follow_the_profile_position():
    rng = np.random.default_rng(5)
    n_input = np.full(4, 1_000_000)
    n_port, n_right = sample_split_counts(n_input, np.array([0.0, 0.0, 1.0, -1.0]), 1.0, rng, p_port=0.25)
    assert np.all(np.abs(n_port - 250_000) < 5 * math.sqrt(250_000 * 0.75))
    fractions = n_right / n_port
    assert fractions[0] == pytest.approx(0.5, abs=0.005)
    assert fractions[2] == pytest.approx(0.8413, abs=0.005)
    assert fractions[3] == pytest.approx(0.1587, abs=0.005)


def test_laser_jitter_is_rescaled_to_its_peak_to_peak():
    spec = LaserJitterSpec.default()
    theta = laser_jitter_waveform(spec, duration=1.0, sample_rate=4000.0, rng=np.random.default_rng(0))
    assert theta.size == 4000
    assert np.ptp(theta) == pytest.approx(0.3e-6, rel=1e-9)
    assert abs(np.mean(theta)) < 0.05e-6


def test_laser_jitter_envelope_and_empty_spec():
    spec = LaserJitterSpec.default()
    ramp = laser_jitter_waveform(
        spec.model_copy(update={"peak_to_peak": None}), 1.0, 4000.0, np.random.default_rng(0), envelope=lambda t: t
    )
    assert np.abs(ramp[:400]).max() < np.abs(ramp[-400:]).max()
    np.testing.assert_array_equal(laser_jitter_waveform(None, 0.5, 100.0, np.random.default_rng(0)), np.zeros(50))


def test_laser_jitter_refuses_to_alias():
    with pytest.raises(AliasingError):
        laser_jitter_waveform(LaserJitterSpec.default(), 1.0, 250.0, np.random.default_rng(0))


def test_default_laser_jitter_by_name():
    noise = DisturbanceSet.model_validate({"laser_jitter": "default"})
    assert noise.laser_jitter == LaserJitterSpec.default()
    assert noise.laser_jitter.highest_frequency == 300.0


def test_angular_jitter_variance_matches_information_model():
    beam = BeamParams(sigma=1.12e-3, wavelength=780e-9, n_photons=1.0)
    wv = WvConfig(phi=0.46, lever_arm=2.05)
    st = StConfig(focal_length=1.0)
    noise = DisturbanceSet(angular_jitter=0.5e-6)
    expected = jitter_variances(beam, wv, st, angular_jitter=0.5e-6)

    batch = sample_batch(beam, wv, 0.0, noise, t=0.0, n=4_000_000, rng=np.random.default_rng(21), port="bright")
    assert np.var(batch.positions) == pytest.approx(expected.wv, rel=0.01)
    # The propagation term alone is about 1% of sigma^2 in this geometry.
    assert np.var(batch.positions) > beam.sigma ** 2 * 1.005

    focused = sample_batch(beam, st, 0.0, noise, t=0.0, n=2_000_000, rng=np.random.default_rng(22))
    assert np.var(focused.positions) == pytest.approx(expected.st, rel=0.01)


def test_detector_jitter_variance(beam, wv, st):
    noise = DisturbanceSet(detector_jitter=20e-6)
    expected = jitter_variances(beam, wv, st, detector_jitter=20e-6)
    focused = sample_batch(beam, st, 0.0, noise, t=0.0, n=2_000_000, rng=np.random.default_rng(23))
    assert np.var(focused.positions) == pytest.approx(expected.st, rel=0.01)
    bright = sample_batch(beam, wv, 0.0, noise, t=0.0, n=2_000_000, rng=np.random.default_rng(24), port="bright")
    assert np.var(bright.positions) == pytest.approx(beam.sigma ** 2 + (20e-6) ** 2, rel=0.01)


def test_modulation_amplitudes_carry_their_own_units():
    noise = DisturbanceSet.model_validate(
        {"d_mod": {"amplitude": "115nm", "frequency": "28Hz"}, "q_mod": {"amplitude": 10.0, "frequency": "56Hz"}}
    )
    assert noise.d_mod.amplitude == pytest.approx(115e-9)
    assert noise.q_mod.amplitude == 10.0
    with pytest.raises(ValidationError, match="wave number"):
        DisturbanceSet.model_validate({"q_mod": {"amplitude": "1.25urad", "frequency": "56Hz"}})
    with pytest.raises(ValidationError, match="not a momentum"):
        DisturbanceSet.model_validate({"q_mod": {"amplitude": "5mm", "frequency": "56Hz"}})
    with pytest.raises(ValidationError):
        DisturbanceSet.model_validate({"d_mod": {"amplitude": "1.25urad", "frequency": "28Hz"}})
