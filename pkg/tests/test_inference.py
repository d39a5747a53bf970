import math
from dataclasses import dataclass

import numpy as np
import pytest

from wvlab.components.detector import SplitDetector
from wvlab.components.inference import (
    crb_saturation,
    crb_with_noise,
    deviation_ratio,
    efficiency_angle_bound,
    estimate_k_mle,
    estimate_k_split,
    fisher_analytic,
    fisher_fraction_fit,
    fisher_fraction_from_snr,
    fisher_monte_carlo,
    fisher_numeric,
    fisher_with_angular_jitter,
    fisher_with_detector_jitter,
    jitter_variances,
    per_photon_information,
    summarize_reports,
)
from wvlab.components.optics import BeamParams, StConfig, WvConfig, weak_validity
from wvlab.components.sampler import DisturbanceSet, GaussianShiftFamily, sample_batch, st_family, wv_family
from wvlab.errors import DomainError, EmptyBatchError, EstimationError, NormalizationError


@dataclass(frozen=True)
class DoubledFamily(GaussianShiftFamily):
    """A density that integrates to two."""

    def logpdf(self, x, k):
        return super().logpdf(x, k) + np.log(np.longdouble(2.0))


def test_numeric_information_matches_closed_forms(beam, wv, st):
    half = 0.19
    assert fisher_numeric(wv_family(beam, wv, "dark"), 0.0) == pytest.approx(
        4 * beam.sigma ** 2 * math.cos(half) ** 2, rel=1e-4
    )
    assert fisher_numeric(wv_family(beam, wv, "bright"), 0.0) == pytest.approx(
        4 * beam.sigma ** 2 * math.sin(half) ** 2, rel=1e-4
    )
    assert fisher_numeric(st_family(beam, st), 0.0) == pytest.approx(4 * beam.sigma ** 2, rel=1e-4)


@pytest.mark.parametrize("case", range(20))
def test_numeric_information_on_random_geometries(case):
    draw = np.random.default_rng(1000 + case)
    beam = BeamParams(sigma=draw.uniform(0.5e-3, 2e-3), wavelength=draw.uniform(633e-9, 1064e-9), n_photons=1.0)
    phi = draw.uniform(0.1, 2.5)
    wv = WvConfig(phi=phi, lever_arm=draw.uniform(0.1, 3.0))
    st = StConfig(focal_length=draw.uniform(0.1, 2.0))
    # Weak regime: k^2 sigma^2 cot^2(phi/2) < 1e-3.
    k = draw.uniform(0.2, 0.9) * math.sqrt(1e-3) * math.tan(phi / 2) / beam.sigma
    assert weak_validity(beam, wv, k).value < 1e-3

    base = 4 * beam.sigma ** 2
    assert fisher_numeric(wv_family(beam, wv, "dark"), k) == pytest.approx(base * math.cos(phi / 2) ** 2, rel=1e-6)
    assert fisher_numeric(wv_family(beam, wv, "bright"), k) == pytest.approx(base * math.sin(phi / 2) ** 2, rel=1e-6)
    assert fisher_numeric(st_family(beam, st), k) == pytest.approx(base, rel=1e-6)


def test_information_does_not_depend_on_k(beam, wv):
    family = wv_family(beam, wv, "dark")
    assert fisher_numeric(family, 25.0) == pytest.approx(fisher_numeric(family, 0.0), rel=1e-4)


def test_unnormalized_density_is_rejected(beam):
    family = DoubledFamily(slope=1e-6, std=beam.sigma)
    with pytest.raises(NormalizationError):
        fisher_numeric(family, 0.0)


def test_monte_carlo_information_agrees(beam, st):
    family = st_family(beam, st)
    info, stderr = fisher_monte_carlo(family, 0.0, 50_000, np.random.default_rng(11))
    assert abs(info - 4 * beam.sigma ** 2) < 5 * stderr
    with pytest.raises(EstimationError):
        fisher_monte_carlo(family, 0.0, 1, np.random.default_rng(0))


def test_ports_add_up_to_the_focused_beam(beam, wv):
    report = fisher_analytic(beam.model_copy(update={"n_photons": 1e6}), wv, include_numeric=True)
    assert report.info_dark + report.info_bright == pytest.approx(report.info_st, rel=1e-12)
    assert report.info_numeric == pytest.approx(report.info_st, rel=1e-4)
    assert report.dark_fraction == pytest.approx(math.cos(0.19) ** 2)
    assert report.regime_valid


@pytest.mark.parametrize("phi", [0.01, 0.5, 1.5, 3.1])
def test_port_sum_is_phase_independent(beam, phi):
    report = fisher_analytic(beam, WvConfig(phi=phi, lever_arm=0.34))
    assert report.info_dark + report.info_bright == pytest.approx(4 * beam.sigma ** 2, rel=1e-12)


def test_per_photon_information_weighting(beam, wv):
    unweighted = per_photon_information(beam, wv, "dark", weighted=False)
    assert unweighted == pytest.approx(4 * beam.sigma ** 2 / math.tan(0.19) ** 2)
    assert per_photon_information(beam, wv, "dark") == pytest.approx(unweighted * math.sin(0.19) ** 2)


def test_jitter_degrades_information(beam, wv, st):
    base = 4 * beam.sigma ** 2
    wv_clean, st_clean = fisher_with_angular_jitter(beam, wv, st, 0.0)
    assert st_clean == pytest.approx(base)
    assert wv_clean == pytest.approx(base / (1 + (0.34 / (2 * beam.k0 * beam.sigma ** 2)) ** 2))
    wv_noisy, st_noisy = fisher_with_angular_jitter(beam, wv, st, 1e-6)
    assert wv_noisy < wv_clean and st_noisy < st_clean
    # The focused beam loses far more to the same angular jitter.
    assert wv_noisy / wv_clean > st_noisy / st_clean

    wv_j, st_j = fisher_with_detector_jitter(beam, wv, st, 0.0)
    assert wv_j == pytest.approx(base) and st_j == pytest.approx(base)
    wv_j, st_j = fisher_with_detector_jitter(beam, wv, st, 1e-5)
    assert wv_j / base > st_j / base
    with pytest.raises(DomainError):
        fisher_with_angular_jitter(beam, wv, st, -1.0)


def test_jitter_variances(beam, wv, st):
    clean = jitter_variances(beam, wv, st)
    assert clean.st == pytest.approx(st.focused_radius(beam) ** 2)
    assert clean.wv == pytest.approx(beam.sigma ** 2 + (0.34 / (2 * beam.k0 * beam.sigma)) ** 2)
    noisy = jitter_variances(beam, wv, st, angular_jitter=1e-6, detector_jitter=2e-6)
    assert noisy.st == pytest.approx(clean.st + 1e-12 + 4e-12)


def test_bound_with_noise():
    assert crb_with_noise(100.0, 0.0) == pytest.approx(0.1)
    assert crb_with_noise(100.0, 0.0, split=True) == pytest.approx(math.sqrt(math.pi / 200.0))
    assert crb_with_noise(100.0, 0.1) == pytest.approx(math.sqrt(0.02))
    with pytest.raises(DomainError):
        crb_with_noise(0.0, 0.1)


def test_deviation_ratio():
    assert deviation_ratio(0.0, 0.1) == 1.0
    assert deviation_ratio(0.1, 0.1) == pytest.approx(1 / math.sqrt(2))
    assert deviation_ratio(1.0, 0.1) == pytest.approx(1 / math.sqrt(101))


def test_split_estimate_inverts_constant_samples(beam, wv):
    det = SplitDetector(alpha_cal=0.66, v_total=0.5)
    k = 0.2
    volts = np.full(100, -0.5 * 2 * beam.sigma ** 2 * k / math.tan(0.19) / (2 * beam.sigma * 0.66))
    report = estimate_k_split(volts, det, beam, wv, "dark", delta_k_bound=0.01)
    assert report.k_hat == pytest.approx(k)
    assert report.delta_k == pytest.approx(0.0, abs=1e-12)
    assert report.efficiency is None
    assert report.n_used == 100


def test_split_estimate_leaves_out_saturated_samples(beam, st):
    det = SplitDetector(v_total=1.0, saturation_v=0.9)
    report = estimate_k_split([0.1, 0.2, 0.9, -0.9], det, beam, st)
    assert report.n_used == 2 and report.n_excluded == 2
    with pytest.raises(EstimationError):
        estimate_k_split([0.95, -0.95], det, beam, st)
    with pytest.raises(EstimationError):
        estimate_k_split([], det, beam, st)


def test_mle_reaches_the_bound(beam, st):
    k = 40.0
    batch = sample_batch(beam, st, k, DisturbanceSet(), 0.0, 100_000, np.random.default_rng(6))
    report = estimate_k_mle(batch, beam, st)
    assert abs(report.k_hat - k) < 5 * report.delta_k_bound
    assert report.efficiency == pytest.approx(1.0, rel=0.02)
    empty = batch.__class__(positions=np.zeros(0), port="st", t=0.0, n_input=0)
    with pytest.raises(EmptyBatchError):
        estimate_k_mle(empty, beam, st)


def test_crb_saturation_and_split_penalty(beam, wv):
    result = crb_saturation(beam, wv, "dark", n_photons=2000, trials=800, seed=5)
    assert result.mle_ratio == pytest.approx(1.0, rel=0.2)
    assert result.split_over_mle == pytest.approx(math.pi / 2, rel=0.2)


@pytest.mark.slow
@pytest.mark.parametrize("technique, port", [("wv", "dark"), ("wv", "bright"), ("st", "dark")])
def test_mle_saturates_the_bound(beam, wv, st, technique, port):
    config = wv if technique == "wv" else st
    result = crb_saturation(beam, config, port, n_photons=100_000, trials=8000, seed=17, threads=4)
    assert 0.95 <= result.mle_ratio <= 1.05
    assert result.split_over_mle == pytest.approx(math.pi / 2, rel=0.05)


def test_crb_saturation_is_thread_independent(beam, st):
    single = crb_saturation(beam, st, n_photons=500, trials=40, seed=2, threads=1)
    pooled = crb_saturation(beam, st, n_photons=500, trials=40, seed=2, threads=4)
    assert single == pooled


def test_fraction_fit_recovers_unit_coefficient():
    phis = np.linspace(0.22, 0.9, 20)
    fit = fisher_fraction_fit(phis, np.cos(phis / 2) ** 2, np.sin(phis / 2) ** 2)
    assert fit.c_dark == pytest.approx(1.0, abs=1e-6)
    assert fit.c_bright == pytest.approx(1.0, abs=1e-6)
    assert fit.r2_dark == pytest.approx(1.0)
    with pytest.raises(EstimationError):
        fisher_fraction_fit([0.3], [0.9])


def test_fractions_from_snr():
    dark, bright = fisher_fraction_from_snr(3.0, 1.0)
    assert dark == pytest.approx(0.9) and dark + bright == 1.0
    with pytest.raises(DomainError):
        fisher_fraction_from_snr(0.0, 0.0)


def test_efficiency_angle_bound():
    assert efficiency_angle_bound(0.01) == pytest.approx(0.2)
    with pytest.raises(DomainError):
        efficiency_angle_bound(1.5)


def test_summaries_need_reports():
    with pytest.raises(EstimationError):
        summarize_reports([])


@pytest.mark.parametrize("epsilon", [1e-1, 1e-2, 1e-3])
def test_efficiency_angle_keeps_the_dark_share(beam, epsilon):
    phi = efficiency_angle_bound(epsilon)
    assert phi == pytest.approx(2 * math.sqrt(epsilon))
    report = fisher_analytic(beam, WvConfig(phi=phi, lever_arm=0.34))
    assert report.dark_fraction >= 1 - epsilon
