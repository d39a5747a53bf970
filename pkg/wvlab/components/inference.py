"""
Fisher information, Cramer-Rao bounds and estimators of the momentum kick k.

Informations are with respect to k and carry units of m^2. Per-photon values
are multiplied by the photon count N where a function takes a BeamParams.
"""

import logging
import math
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import integrate, optimize, stats

from wvlab.components.detector import SplitDetector, electronic_noise_momentum, volts_to_displacement
from wvlab.components.optics import (
    BeamParams,
    KickLike,
    Port,
    StConfig,
    TechniqueConfig,
    WvConfig,
    _half_phase,
    _kick_value,
    detector_width,
    kick_slope,
    weak_validity,
)
from wvlab.components.sampler import PhotonBatch, wv_family
from wvlab.errors import DomainError, EmptyBatchError, EstimationError, NormalizationError
from wvlab.parallel import exact_mean, run_parallel, stream_for

logger = logging.getLogger(__name__)

SPLIT_INFORMATION_FACTOR = 2.0 / math.pi
QUADRATURE_HALF_WIDTH = 8.0
NORMALIZATION_TOLERANCE = 1e-6


class DensityFamily(Protocol):
    """Parameterized arrival density P(x; k) with a location and scale for integration."""
    weight: float

    def logpdf(self, x, k): ...

    def mean(self, k: float) -> float: ...

    def scale(self) -> float: ...


class FisherReport(BaseModel):
    """Analytic informations of both ports and of the focused beam."""
    info_dark: float = Field(ge=0, description="Dark-port information (m^2)")
    info_bright: float = Field(ge=0, description="Bright-port information (m^2)")
    info_st: float = Field(ge=0, description="Focused-beam information (m^2)")
    info_numeric: Optional[float] = Field(default=None, ge=0, description="Quadrature value over both ports")
    weakness: float = Field(ge=0, description="k^2 sigma^2 cot^2(phi/2)")
    regime_valid: bool

    @property
    def dark_fraction(self) -> float:
        total = self.info_dark + self.info_bright
        return self.info_dark / total if total > 0 else 0.0


class EstimationReport(BaseModel):
    k_hat: float = Field(description="Estimate of k (1/m)")
    delta_k: float = Field(ge=0, description="Observed deviation (1/m)")
    delta_k_bound: Optional[float] = Field(default=None, ge=0, description="Delta k_B (1/m)")
    efficiency: Optional[float] = Field(default=None, ge=0, description="(Delta k_B / Delta k)^2")
    n_used: int = Field(ge=0, description="Samples or photons contributing")
    n_excluded: int = Field(default=0, ge=0, description="Saturated samples left out")


class JitterVariances(BaseModel):
    wv: float = Field(description="Detector-plane variance of the weak-value profile (m^2)")
    st: float = Field(description="Detector-plane variance of the focused profile (m^2)")


class CrbSaturation(BaseModel):
    """Monte Carlo variances of the MLE and split estimators against 1/I."""
    k: float
    n_photons: int
    trials: int
    info_per_photon: float
    var_mle: float
    var_split: float
    mle_ratio: float = Field(description="var(k_hat) * N * I for the MLE")
    split_ratio: float = Field(description="var(k_hat) * N * I for the split estimator")
    split_over_mle: float


class FractionFit(BaseModel):
    """Fits of cos^2(c phi/2) and sin^2(c phi/2) to port information fractions."""
    c_dark: float
    r2_dark: float
    c_bright: Optional[float] = None
    r2_bright: Optional[float] = None


def _finite_step(k: float, step: Optional[float]) -> float:
    if step is not None:
        return float(step)
    return max(1e-6 * abs(k), 1e-9)


def _quad(fn, half_width: float, epsrel: float) -> float:
    value, _ = integrate.quad(fn, -half_width, half_width, epsabs=0.0, epsrel=epsrel, limit=200)
    return value


def fisher_numeric(
    family: DensityFamily,
    k: float,
    step: Optional[float] = None,
    epsrel: float = 1e-10,
) -> float:
    """
    Per-photon information of a density family by quadrature of P (d ln P / dk)^2.

    The score is a central difference of ln P; the integral runs over
    +-8 family scales in standardized coordinates. The family weight (port
    probability) multiplies the result.

    Args:
        family: Density family exposing logpdf, mean, scale and weight
        k: Kick at which the information is evaluated (1/m)
        step: Finite-difference step; defaults to max(1e-6 |k|, 1e-9)
        epsrel: Relative tolerance of the adaptive quadrature

    Returns:
        Information per input photon (m^2)
    """
    h = _finite_step(k, step)
    k_ld = np.longdouble(k)
    k_plus = k_ld + np.longdouble(h)
    k_minus = k_ld - np.longdouble(h)
    span = k_plus - k_minus
    if span <= 0:
        raise NormalizationError(f"finite-difference step {h} underflows at k={k}")

    center = float(family.mean(float(k)))
    scale = float(family.scale())

    def density(z: float) -> float:
        return float(np.exp(family.logpdf(center + scale * z, k_ld))) * scale

    total = _quad(density, QUADRATURE_HALF_WIDTH, epsrel)
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise NormalizationError(f"density integrates to {total}, not 1")

    def integrand(z: float) -> float:
        x = center + scale * z
        log_p = family.logpdf(x, k_ld)
        score = (family.logpdf(x, k_plus) - family.logpdf(x, k_minus)) / span
        return float(np.exp(log_p) * score * score) * scale

    return family.weight * _quad(integrand, QUADRATURE_HALF_WIDTH, epsrel)


def fisher_monte_carlo(
    family: DensityFamily,
    k: float,
    n: int,
    rng: np.random.Generator,
    step: Optional[float] = None,
) -> Tuple[float, float]:
    """Mean squared score over n draws, with its standard error."""
    if n < 2:
        raise EstimationError("need at least two draws for a Monte Carlo information")
    h = _finite_step(k, step)
    k_ld = np.longdouble(k)
    x = rng.normal(family.mean(k), family.scale(), n)
    score = (family.logpdf(x, k_ld + h) - family.logpdf(x, k_ld - h)) / (2 * np.longdouble(h))
    squared = np.asarray(score * score, dtype=float)
    info = family.weight * float(np.mean(squared))
    stderr = family.weight * float(np.std(squared, ddof=1)) / math.sqrt(n)
    return info, stderr


def per_photon_information(beam: BeamParams, config: TechniqueConfig, port: Port = "dark", weighted: bool = True) -> float:
    """
    Information carried by one photon: (dmu/dk)^2 / s^2.

    weighted multiplies by the port probability so the value is per input
    photon (4 sigma^2 cos^2(phi/2) for the dark port); otherwise it is per
    photon that reached the port.
    """
    slope = kick_slope(beam, config, port)
    info = (slope / detector_width(beam, config)) ** 2
    if weighted and isinstance(config, WvConfig):
        info *= wv_family(beam, config, port).weight
    return info


def fisher_analytic(
    beam: BeamParams,
    wv: WvConfig,
    kick: KickLike = 0.0,
    include_numeric: bool = False,
) -> FisherReport:
    """
    Closed-form informations: dark 4N sigma^2 cos^2(phi/2), bright 4N sigma^2 sin^2(phi/2), ST 4N sigma^2.

    include_numeric adds the quadrature of both port families, which must
    sum to the ST value in the weak regime.
    """
    half = _half_phase(wv)
    base = 4.0 * beam.n_photons * beam.sigma ** 2
    validity = weak_validity(beam, wv, kick)

    info_numeric = None
    if include_numeric:
        k = _kick_value(kick)
        info_numeric = beam.n_photons * sum(fisher_numeric(wv_family(beam, wv, port), k) for port in ("dark", "bright"))

    return FisherReport(
        info_dark=base * math.cos(half) ** 2,
        info_bright=base * math.sin(half) ** 2,
        info_st=base,
        info_numeric=info_numeric,
        weakness=validity.value,
        regime_valid=validity.valid,
    )


def fisher_with_angular_jitter(beam: BeamParams, wv: WvConfig, st: StConfig, angular_jitter: float) -> Tuple[float, float]:
    """
    Informations under Gaussian angular jitter of deviation Q (rad).

    The formulas take the momentum deviation k0*Q:
    WVT 4N sigma^2 / (1 + (L/2k0 sigma^2)^2 [1 + (2 sigma k0 Q)^2]),
    ST 4N sigma^2 / (1 + (2 sigma k0 Q)^2).
    """
    if angular_jitter < 0:
        raise DomainError(f"angular jitter must be non-negative, got {angular_jitter}")
    base = 4.0 * beam.n_photons * beam.sigma ** 2
    jitter_term = (2.0 * beam.sigma * beam.k0 * angular_jitter) ** 2
    geometry = (wv.lever_arm / (2.0 * beam.k0 * beam.sigma ** 2)) ** 2
    return base / (1.0 + geometry * (1.0 + jitter_term)), base / (1.0 + jitter_term)


def fisher_with_detector_jitter(beam: BeamParams, wv: WvConfig, st: StConfig, detector_jitter: float) -> Tuple[float, float]:
    """WVT 4N sigma^4/(sigma^2 + J^2); ST 4N sigma^2/(1 + (2 k0 sigma J / f)^2)."""
    if detector_jitter < 0:
        raise DomainError(f"detector jitter must be non-negative, got {detector_jitter}")
    sigma2 = beam.sigma ** 2
    info_wv = 4.0 * beam.n_photons * sigma2 ** 2 / (sigma2 + detector_jitter ** 2)
    info_st = 4.0 * beam.n_photons * sigma2 / (1.0 + (2.0 * beam.k0 * beam.sigma * detector_jitter / st.focal_length) ** 2)
    return info_wv, info_st


def jitter_variances(
    beam: BeamParams,
    wv: WvConfig,
    st: StConfig,
    angular_jitter: float = 0.0,
    detector_jitter: float = 0.0,
) -> JitterVariances:
    """
    Detector-plane variances behind the jitter-degraded informations.

    WVT: sigma^2 + (L/2k0 sigma)^2 (1 + (2 sigma k0 Q)^2) + J^2.
    ST: sigma_f^2 + f^2 Q^2 + J^2.
    """
    sigma = beam.sigma
    q = beam.k0 * angular_jitter
    var_wv = sigma ** 2 + (wv.lever_arm / (2.0 * beam.k0 * sigma)) ** 2 * (1.0 + (2.0 * sigma * q) ** 2)
    var_st = st.focused_radius(beam) ** 2 + (st.focal_length * angular_jitter) ** 2
    return JitterVariances(wv=var_wv + detector_jitter ** 2, st=var_st + detector_jitter ** 2)


def crb_with_noise(info0: float, electronic_noise: float, split: bool = False) -> float:
    """
    Delta k_B = sqrt(1/I0 + J^2).

    split applies the 2/pi information factor of split-detector readout to I0.
    """
    if info0 <= 0:
        raise DomainError(f"information must be positive, got {info0}")
    if split:
        info0 *= SPLIT_INFORMATION_FACTOR
    return math.sqrt(1.0 / info0 + electronic_noise ** 2)


def deviation_ratio(xi_rms: float, delta_k_bound: float) -> float:
    """Delta k_B / Delta k = 1 / sqrt(1 + xi_rms^2 / Delta k_B^2)."""
    if delta_k_bound <= 0:
        raise DomainError(f"bound must be positive, got {delta_k_bound}")
    return 1.0 / math.sqrt(1.0 + (xi_rms / delta_k_bound) ** 2)


def _efficiency(bound: Optional[float], delta_k: float) -> Optional[float]:
    if bound is None or delta_k <= 0:
        return None
    return (bound / delta_k) ** 2


def estimate_k_split(
    voltages: Sequence[float],
    det: SplitDetector,
    beam: BeamParams,
    config: TechniqueConfig,
    port: Port = "dark",
    delta_k_bound: Optional[float] = None,
) -> EstimationReport:
    """
    Invert split-detector samples taken at constant k.

    Each sample is turned into a displacement through the linearized
    calibration and divided by the signed geometry factor (-2 sigma^2
    cot(phi/2) for the dark port, f/k0 for the focused beam).

    Args:
        voltages: Samples on the plateau (V)
        det: Detector that produced them
        beam: Beam parameters
        config: WvConfig or StConfig
        port: WVT port of the samples
        delta_k_bound: Bound used for the efficiency

    Returns:
        EstimationReport with the mean estimate and the sample deviation
    """
    volts = np.asarray(voltages, dtype=float)
    if volts.size == 0:
        raise EstimationError("no samples to estimate from")

    n_excluded = 0
    if det.saturation_v is not None:
        keep = np.abs(volts) < det.saturation_v
        n_excluded = int(volts.size - np.count_nonzero(keep))
        if n_excluded:
            logger.warning("Saturated samples excluded", extra={"excluded": n_excluded, "total": int(volts.size)})
        volts = volts[keep]
        if volts.size == 0:
            raise EstimationError("every sample is saturated")

    estimates = k_from_voltages(volts, det, beam, config, port)
    delta_k = float(np.std(estimates, ddof=1)) if estimates.size > 1 else 0.0
    return EstimationReport(
        k_hat=exact_mean(estimates),
        delta_k=delta_k,
        delta_k_bound=delta_k_bound,
        efficiency=_efficiency(delta_k_bound, delta_k),
        n_used=int(estimates.size),
        n_excluded=n_excluded,
    )


def k_from_voltages(volts, det: SplitDetector, beam: BeamParams, config: TechniqueConfig, port: Port = "dark") -> np.ndarray:
    displacement = volts_to_displacement(volts, det, detector_width(beam, config))
    return np.asarray(displacement / kick_slope(beam, config, port), dtype=float)


def estimate_k_mle(batch: PhotonBatch, beam: BeamParams, config: TechniqueConfig) -> EstimationReport:
    """
    Maximum-likelihood k of a Gaussian location family: sample mean over the geometry factor.

    delta_k is the standard error of k_hat and the bound is 1/sqrt(n I) for
    the n photons in the batch.
    """
    if len(batch) == 0:
        raise EmptyBatchError("cannot estimate k from an empty batch")
    port = "dark" if batch.port == "st" else batch.port
    slope = kick_slope(beam, config, port)
    n = len(batch)
    k_hat = float(np.mean(batch.positions)) / slope
    delta_k = float(np.std(batch.positions, ddof=1)) / abs(slope) / math.sqrt(n) if n > 1 else 0.0
    bound = 1.0 / math.sqrt(n * per_photon_information(beam, config, port, weighted=False))
    return EstimationReport(
        k_hat=k_hat,
        delta_k=delta_k,
        delta_k_bound=bound,
        efficiency=_efficiency(bound, delta_k),
        n_used=n,
    )


def crb_saturation(
    beam: BeamParams,
    config: TechniqueConfig,
    port: Port = "dark",
    n_photons: int = 100_000,
    trials: int = 1000,
    seed: int = 0,
    kick: KickLike = 0.0,
    threads: int = 1,
) -> CrbSaturation:
    """
    Monte Carlo check that the MLE reaches 1/(N I) and split readout pays pi/2.

    Every trial draws n_photons arrivals in the chosen port from its own
    stream; the MLE and the split estimator see the same photons.
    """
    if trials < 2 or n_photons < 1:
        raise EstimationError("need at least two trials of at least one photon")
    k = _kick_value(kick)
    slope = kick_slope(beam, config, port)
    width = detector_width(beam, config)
    mean = slope * k
    clip = 0.5 / n_photons

    def run_trial(index: int) -> Tuple[float, float]:
        rng = stream_for(seed, index)
        positions = rng.normal(mean, width, n_photons)
        k_mle = float(np.mean(positions)) / slope
        p_right = np.clip(np.count_nonzero(positions > 0) / n_photons, clip, 1.0 - clip)
        k_split = width * float(stats.norm.ppf(p_right)) / slope
        return k_mle, k_split

    results = np.asarray(run_parallel(run_trial, range(trials), threads))
    info = per_photon_information(beam, config, port, weighted=False)
    var_mle = float(np.var(results[:, 0], ddof=1))
    var_split = float(np.var(results[:, 1], ddof=1))
    scale = n_photons * info
    logger.info("CRB saturation finished", extra={"trials": trials, "n_photons": n_photons, "port": port})
    return CrbSaturation(
        k=k,
        n_photons=n_photons,
        trials=trials,
        info_per_photon=info,
        var_mle=var_mle,
        var_split=var_split,
        mle_ratio=var_mle * scale,
        split_ratio=var_split * scale,
        split_over_mle=var_split / var_mle,
    )


def fisher_fraction_from_snr(snr_dark: float, snr_bright: float) -> Tuple[float, float]:
    """Port shares of the information from SNR^2 = k^2 I."""
    if snr_dark < 0 or snr_bright < 0:
        raise DomainError("SNR values must be non-negative")
    total = snr_dark ** 2 + snr_bright ** 2
    if total == 0:
        raise DomainError("both SNR values are zero")
    dark = snr_dark ** 2 / total
    return dark, 1.0 - dark


def _r_squared(observed: np.ndarray, predicted: np.ndarray) -> float:
    residual = float(np.sum((observed - predicted) ** 2))
    spread = float(np.sum((observed - np.mean(observed)) ** 2))
    return 1.0 - residual / spread if spread > 0 else 1.0


def fisher_fraction_fit(
    phis: Sequence[float],
    dark_fractions: Sequence[float],
    bright_fractions: Optional[Sequence[float]] = None,
) -> FractionFit:
    """Nonlinear least squares of cos^2(c phi/2) (and sin^2 for the bright port)."""
    phis = np.asarray(phis, dtype=float)
    dark = np.asarray(dark_fractions, dtype=float)
    if phis.size < 2 or phis.size != dark.size:
        raise EstimationError("fraction fit needs at least two matching (phi, fraction) points")

    def dark_model(phi, c):
        return np.cos(c * phi / 2.0) ** 2

    def bright_model(phi, c):
        return np.sin(c * phi / 2.0) ** 2

    (c_dark,), _ = optimize.curve_fit(dark_model, phis, dark, p0=[1.0])
    fit = FractionFit(c_dark=float(c_dark), r2_dark=_r_squared(dark, dark_model(phis, c_dark)))
    if bright_fractions is not None:
        bright = np.asarray(bright_fractions, dtype=float)
        (c_bright,), _ = optimize.curve_fit(bright_model, phis, bright, p0=[1.0])
        fit = fit.model_copy(update={"c_bright": float(c_bright), "r2_bright": _r_squared(bright, bright_model(phis, c_bright))})
    return fit


def efficiency_angle_bound(epsilon: float) -> float:
    """Largest phi keeping the dark-port share above 1 - epsilon: phi/2 < sqrt(epsilon)."""
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    return 2.0 * math.sqrt(epsilon)


def bound_for(
    beam: BeamParams,
    config: TechniqueConfig,
    det: SplitDetector,
    photons: float,
    port: Port = "dark",
    split: bool = True,
) -> float:
    """Delta k_B of one sample holding `photons` input photons read by det."""
    info0 = photons * per_photon_information(beam, config, port)
    return crb_with_noise(info0, electronic_noise_momentum(det, beam, config, port), split=split)


def summarize_reports(reports: List[EstimationReport]) -> dict:
    """Aggregate statistics of repeated estimates."""
    if not reports:
        raise EstimationError("no reports to summarize")
    efficiencies = [r.efficiency for r in reports if r.efficiency is not None]
    return {
        "repetitions": len(reports),
        "k_hat_mean": exact_mean([r.k_hat for r in reports]),
        "delta_k_mean": exact_mean([r.delta_k for r in reports]),
        "delta_k_bound": reports[0].delta_k_bound,
        "efficiency_mean": exact_mean(efficiencies) if efficiencies else None,
    }
