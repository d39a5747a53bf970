"""
Split-detector readout.

The detector reports V = V_total * (n_right - n_left) / n_total plus white
electronic noise. sigma_J is a noise density in V*sqrt(s); one sample of
duration T carries a deviation sigma_J / sqrt(T).
"""

import logging
import math
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import special, stats

from wvlab.components.optics import BeamParams, Port, TechniqueConfig, detector_width, kick_slope
from wvlab.components.sampler import PhotonBatch
from wvlab.errors import DomainError, EmptyBatchError, InvalidStreamError
from wvlab.units import Time

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Calibration constant of an ideal knife-edge split detector under a Gaussian beam.
ALPHA_CAL_IDEAL = math.sqrt(math.pi / 8.0)
ALPHA_CAL_MEASURED = 0.66


class SplitDetector(BaseModel):
    """Two-segment photodiode with its calibration and electronics."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha_cal: float = Field(default=ALPHA_CAL_MEASURED, gt=0, description="Calibration constant")
    sigma_J: float = Field(default=0.0, ge=0, description="Electronic noise density (V*sqrt(s))")
    v_total: float = Field(default=1.0, gt=0, description="Voltage of the total detected power (V)")
    sample_time: Time = Field(default=8e-6, gt=0, description="Sample time T (s)")
    saturation_v: Optional[float] = Field(default=None, gt=0, description="Clipping voltage (V)")
    responsivity: Optional[float] = Field(
        default=None, gt=0, description="V per W of detected power; derives v_total per technique when set"
    )

    @property
    def noise_per_sample(self) -> float:
        return self.sigma_J / math.sqrt(self.sample_time)

    def with_detected_power(self, power: Optional[float]) -> "SplitDetector":
        if self.responsivity is None or power is None or power <= 0:
            return self
        return self.model_copy(update={"v_total": self.responsivity * power})

    def with_sample_time(self, sample_time: float) -> "SplitDetector":
        return self.model_copy(update={"sample_time": float(sample_time)})

    def with_sigma_J(self, sigma_J: Optional[float]) -> "SplitDetector":
        if sigma_J is None:
            return self
        return self.model_copy(update={"sigma_J": float(sigma_J)})


def split_signal_exact(mean: ArrayLike, std: float) -> ArrayLike:
    """
    Normalized left/right difference of a Gaussian spot on a knife-edge split.

    Returns 2*Phi(mean/std) - 1, written as erf(mean / (std*sqrt(2))).
    """
    if std <= 0:
        raise DomainError(f"profile width must be positive, got {std}")
    return special.erf(np.asarray(mean, dtype=float) / (std * math.sqrt(2.0)))


def split_slope(std: float) -> float:
    """Derivative of split_signal_exact at zero shift, sqrt(2/pi)/std."""
    if std <= 0:
        raise DomainError(f"profile width must be positive, got {std}")
    return math.sqrt(2.0 / math.pi) / std


def linearized_signal(displacement: ArrayLike, width: float, alpha_cal: float = ALPHA_CAL_IDEAL) -> ArrayLike:
    """V_pp / V_total = dx / (2 width alpha_cal)."""
    return np.asarray(displacement, dtype=float) / (2.0 * width * alpha_cal)


def binary_fisher_information(std: float, mean: float = 0.0) -> float:
    """
    Per-photon information about the spot position carried by a left/right count.

    (dp/dmu)^2 / (p (1 - p)) with p = Phi(mu/s); equals 2/(pi s^2) at zero shift.
    """
    if std <= 0:
        raise DomainError(f"profile width must be positive, got {std}")
    z = mean / std
    p = stats.norm.cdf(z)
    dp = stats.norm.pdf(z) / std
    return float(dp * dp / (p * (1.0 - p)))


def _clip(volts: ArrayLike, det: SplitDetector) -> ArrayLike:
    if det.saturation_v is None:
        return volts
    return np.clip(volts, -det.saturation_v, det.saturation_v)


def counts_to_voltage(
    n_left: ArrayLike,
    n_right: ArrayLike,
    det: SplitDetector,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Vectorized readout of left/right photon counts.

    Windows with no photons read zero before noise is added. rng is
    required whenever the detector carries electronic noise.
    """
    n_left = np.asarray(n_left, dtype=float)
    n_right = np.asarray(n_right, dtype=float)
    total = n_left + n_right
    with np.errstate(invalid="ignore", divide="ignore"):
        fraction = np.where(total > 0, (n_right - n_left) / np.where(total > 0, total, 1.0), 0.0)
    volts = det.v_total * fraction

    if det.sigma_J > 0:
        if not isinstance(rng, np.random.Generator):
            raise InvalidStreamError("electronic noise needs a numpy Generator")
        volts = volts + rng.normal(0.0, det.noise_per_sample, np.shape(volts))
    return _clip(volts, det)


def batch_to_voltage(
    batch: PhotonBatch,
    det: SplitDetector,
    rng: Optional[np.random.Generator] = None,
    noise_only: bool = False,
) -> float:
    """
    One voltage sample from the photons of a batch.

    Args:
        batch: Arrivals collected during the sample window
        det: Detector model
        rng: Stream for the electronic noise
        noise_only: Accept an empty batch and return electronic noise alone

    Returns:
        The sample voltage, clipped when saturation is configured
    """
    if len(batch) == 0 and not noise_only:
        raise EmptyBatchError(f"batch at t={batch.t} holds no photons")
    n_right = int(np.count_nonzero(batch.positions > 0))
    n_left = len(batch) - n_right
    return float(counts_to_voltage(n_left, n_right, det, rng))


def electronic_noise_momentum(
    det: SplitDetector,
    beam: BeamParams,
    config: TechniqueConfig,
    port: Port = "dark",
) -> float:
    """
    Electronic noise expressed as a deviation of k (1/m).

    (sigma_J/sqrt(T)) * (alpha_cal * 2 s / V_total) / |dmu/dk| with s the
    detector-plane width; reduces to tan(phi/2)/(2 sigma^2) for the dark port
    and k0/f for the focused beam.
    """
    width = detector_width(beam, config)
    slope = abs(kick_slope(beam, config, port))
    return det.noise_per_sample * (det.alpha_cal * 2.0 * width / det.v_total) / slope


def volts_to_displacement(volts: ArrayLike, det: SplitDetector, width: float) -> ArrayLike:
    """Linearized inversion dx = (V / V_total) * 2 width alpha_cal."""
    return np.asarray(volts, dtype=float) / det.v_total * 2.0 * width * det.alpha_cal


def noise_floor_volts(det: SplitDetector, segment_length: int) -> float:
    """
    Expected magnitude of a white-noise bin in a one-sided amplitude spectrum.

    Bins of 2|X|/n are Rayleigh distributed with mean s*sqrt(pi/n) for a
    per-sample deviation s; averaging magnitudes keeps that mean.
    """
    if segment_length <= 0:
        raise DomainError(f"segment length must be positive, got {segment_length}")
    return det.noise_per_sample * math.sqrt(math.pi / segment_length)


def noise_floor_dbv(det: SplitDetector, segment_length: int) -> float:
    floor = noise_floor_volts(det, segment_length)
    if floor <= 0:
        return -math.inf
    return 20.0 * math.log10(floor / det.v_total)
