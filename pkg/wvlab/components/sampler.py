"""
Monte Carlo photon arrivals for both techniques.

Photons are independent. Deterministic modulations are evaluated once per
batch (a batch is one detector sample window), angular and detector jitter
are drawn per photon. Every draw comes from the Generator handed in by the
caller; nothing here owns random state.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import signal, stats

from wvlab.components.optics import (
    BeamParams,
    KickLike,
    Port,
    StConfig,
    TechniqueConfig,
    WvConfig,
    _kick_value,
    jittered_width,
    kick_slope,
    lever_arm,
    port_probabilities,
    port_probability,
)
from wvlab.errors import AliasingError, InvalidStreamError
from wvlab.units import Angle, Frequency, Length, Momentum

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
Envelope = Callable[[np.ndarray], np.ndarray]

_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


class Sinusoid(BaseModel):
    """A * sin(2 pi f t + phase)."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    amplitude: float = Field(ge=0, description="Amplitude in the units of the modulated quantity")
    frequency: Frequency = Field(gt=0, description="Frequency (Hz)")
    phase: Angle = Field(default=0.0, description="Phase at t = 0 (rad)")

    def __call__(self, t: ArrayLike) -> ArrayLike:
        return self.amplitude * np.sin(2.0 * math.pi * self.frequency * np.asarray(t) + self.phase)

    @property
    def rms(self) -> float:
        return self.amplitude / math.sqrt(2.0)


class DetectorModulation(Sinusoid):
    amplitude: Length = Field(ge=0, description="Transverse detector displacement amplitude (m)")


class MomentumModulation(Sinusoid):
    amplitude: Momentum = Field(ge=0, description="Transverse momentum amplitude (1/m)")


class JitterTone(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    frequency: Frequency = Field(gt=0, description="Tone frequency (Hz)")
    amplitude: Angle = Field(ge=0, description="Angular amplitude (rad)")
    phase: Angle = Field(default=0.0, description="Phase at t = 0 (rad)")


class BandNoise(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    cutoff: Frequency = Field(gt=0, description="Low-pass cutoff (Hz)")
    rms: Angle = Field(ge=0, description="rms of the filtered noise (rad)")


class LaserJitterSpec(BaseModel):
    """Angular beam wander as fixed tones plus low-passed Gaussian noise."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    tones: List[JitterTone] = Field(default_factory=list)
    noise: Optional[BandNoise] = None
    peak_to_peak: Optional[Angle] = Field(
        default=None, ge=0, description="When set, the finished series is rescaled to this peak-to-peak angle"
    )

    @classmethod
    def default(cls) -> "LaserJitterSpec":
        return cls(
            tones=[JitterTone(frequency=50.0, amplitude=0.06e-6), JitterTone(frequency=100.0, amplitude=0.04e-6)],
            noise=BandNoise(cutoff=300.0, rms=0.02e-6),
            peak_to_peak=0.3e-6,
        )

    @property
    def is_empty(self) -> bool:
        has_tones = any(tone.amplitude > 0 for tone in self.tones)
        has_noise = self.noise is not None and self.noise.rms > 0
        return not (has_tones or has_noise)

    @property
    def highest_frequency(self) -> float:
        freqs = [tone.frequency for tone in self.tones]
        if self.noise is not None:
            freqs.append(self.noise.cutoff)
        return max(freqs, default=0.0)


class DisturbanceSet(BaseModel):
    """Deterministic modulations and stochastic noises acting on a run."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    d_mod: Optional[DetectorModulation] = None
    q_mod: Optional[MomentumModulation] = None
    sigma_J: Optional[float] = Field(
        default=None, ge=0, description="Electronic noise density (V*sqrt(s)); overrides the detector value when set"
    )
    angular_jitter: Angle = Field(default=0.0, ge=0, description="Per-photon angular jitter deviation Q (rad)")
    detector_jitter: Length = Field(default=0.0, ge=0, description="Per-photon detector jitter deviation J (m)")
    laser_jitter: Optional[LaserJitterSpec] = None

    @field_validator("laser_jitter", mode="before")
    @classmethod
    def _named_laser_jitter(cls, value):
        if value == "default":
            return LaserJitterSpec.default()
        return value

    def d_at(self, t: ArrayLike) -> ArrayLike:
        if self.d_mod is None:
            return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0
        return self.d_mod(t)

    def q_at(self, t: ArrayLike) -> ArrayLike:
        if self.q_mod is None:
            return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0
        return self.q_mod(t)


@dataclass(frozen=True)
class GaussianDensity:
    """Normalized Gaussian arrival density on the detector."""
    mean: float
    std: float

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return stats.norm.pdf(x, loc=self.mean, scale=self.std)

    @property
    def variance(self) -> float:
        return self.std ** 2


@dataclass(frozen=True)
class GaussianShiftFamily:
    """
    Location family P(x; k) = N(x; offset + slope * k, std^2).

    weight is the probability that a photon reaches this family at all (the
    port probability for the WVT), kept apart from the normalized density.
    """
    slope: float
    std: float
    offset: float = 0.0
    weight: float = 1.0

    def mean(self, k: float) -> float:
        return self.offset + self.slope * k

    def density(self, k: float) -> GaussianDensity:
        return GaussianDensity(mean=self.mean(k), std=self.std)

    def pdf(self, x: ArrayLike, k: float) -> ArrayLike:
        return stats.norm.pdf(x, loc=self.mean(float(k)), scale=self.std)

    def logpdf(self, x: ArrayLike, k) -> np.ndarray:
        # Extended precision keeps central differences of tiny steps meaningful.
        x = np.asarray(x, dtype=np.longdouble)
        mu = np.longdouble(self.offset) + np.longdouble(self.slope) * np.longdouble(k)
        z = (x - mu) / np.longdouble(self.std)
        return -0.5 * z * z - np.log(np.longdouble(self.std)) - np.longdouble(_HALF_LOG_TWO_PI)

    def scale(self) -> float:
        return self.std


def wv_family(beam: BeamParams, wv: WvConfig, port: Port = "dark") -> GaussianShiftFamily:
    return GaussianShiftFamily(
        slope=kick_slope(beam, wv, port),
        std=beam.sigma,
        weight=port_probability(wv, port),
    )


def st_family(beam: BeamParams, st: StConfig) -> GaussianShiftFamily:
    return GaussianShiftFamily(slope=kick_slope(beam, st), std=st.focused_radius(beam))


def pdf_wv(beam: BeamParams, wv: WvConfig, kick: KickLike, port: Port = "dark") -> GaussianDensity:
    """Normalized port profile: mean -delta_d (dark) or +delta_b (bright), deviation sigma."""
    return wv_family(beam, wv, port).density(_kick_value(kick))


def pdf_st(beam: BeamParams, st: StConfig, kick: KickLike) -> GaussianDensity:
    """Focused profile: mean f*k/k0, deviation sigma_f."""
    return st_family(beam, st).density(_kick_value(kick))


@dataclass(frozen=True)
class PhotonBatch:
    """Arrival positions of the photons collected in one detector sample window."""
    positions: np.ndarray
    port: str
    t: float
    n_input: int
    stream_id: Optional[str] = None

    def __len__(self) -> int:
        return int(self.positions.size)

    @property
    def n(self) -> int:
        return len(self)


def _check_stream(rng) -> None:
    if not isinstance(rng, np.random.Generator):
        raise InvalidStreamError(f"expected a numpy Generator, got {type(rng).__name__}")


def _batch_offset(
    beam: BeamParams,
    config: TechniqueConfig,
    disturbances: DisturbanceSet,
    t: float,
    angle_offset: float,
) -> float:
    d = float(disturbances.d_at(t))
    q = float(disturbances.q_at(t))
    return d + lever_arm(config) * (q / beam.k0 + angle_offset)


def _draw_positions(
    beam: BeamParams,
    config: TechniqueConfig,
    mean: float,
    disturbances: DisturbanceSet,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    width = jittered_width(beam, config, disturbances.angular_jitter, disturbances.detector_jitter)
    return rng.normal(mean, width, n)


def sample_batch(
    beam: BeamParams,
    config: TechniqueConfig,
    kick: KickLike,
    disturbances: DisturbanceSet,
    t: float,
    n: int,
    rng: np.random.Generator,
    port: Port = "dark",
    angle_offset: float = 0.0,
    stream_id: Optional[str] = None,
) -> PhotonBatch:
    """
    Draw the arrivals of n input photons at time t.

    For the WVT each photon leaves the requested port with the port
    probability and the rest are discarded by the post-selection.

    Args:
        beam: Beam parameters
        config: WvConfig or StConfig
        kick: Signal kick at time t
        disturbances: Modulations and jitters
        t: Timestamp of the batch (s)
        n: Input photons
        rng: Stream owned by this batch
        port: WVT port to collect
        angle_offset: Extra common-mode upstream angle (rad), e.g. laser jitter
        stream_id: Label recorded on the batch

    Returns:
        PhotonBatch with the collected positions
    """
    _check_stream(rng)
    if n < 0:
        raise ValueError(f"photon count must be non-negative, got {n}")

    k = _kick_value(kick)
    offset = _batch_offset(beam, config, disturbances, t, angle_offset)
    if isinstance(config, StConfig):
        n_port, tag = n, "st"
    else:
        n_port = int(rng.binomial(n, port_probability(config, port))) if n > 0 else 0
        tag = port

    mean = kick_slope(beam, config, port) * k + offset
    positions = _draw_positions(beam, config, mean, disturbances, n_port, rng)
    return PhotonBatch(positions=positions, port=tag, t=float(t), n_input=int(n), stream_id=stream_id)


def sample_ports(
    beam: BeamParams,
    wv: WvConfig,
    kick: KickLike,
    disturbances: DisturbanceSet,
    t: float,
    n: int,
    rng: np.random.Generator,
    angle_offset: float = 0.0,
) -> Tuple[PhotonBatch, PhotonBatch]:
    """Split n input photons between the dark and bright ports and draw both."""
    _check_stream(rng)
    p_dark, _ = port_probabilities(wv)
    n_dark = int(rng.binomial(n, p_dark)) if n > 0 else 0
    offset = _batch_offset(beam, wv, disturbances, t, angle_offset)
    k = _kick_value(kick)

    batches = []
    for port, n_port in (("dark", n_dark), ("bright", n - n_dark)):
        mean = kick_slope(beam, wv, port) * k + offset
        positions = _draw_positions(beam, wv, mean, disturbances, n_port, rng)
        batches.append(PhotonBatch(positions=positions, port=port, t=float(t), n_input=int(n)))
    return batches[0], batches[1]


def photon_budget(mean_photons: ArrayLike, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Stochastic rounding of a mean photon number: floor(m) plus a Bernoulli(frac(m)) photon."""
    _check_stream(rng)
    mean = np.broadcast_to(np.asarray(mean_photons, dtype=float), (size,) if size is not None else np.shape(mean_photons))
    base = np.floor(mean)
    extra = rng.random(mean.shape) < (mean - base)
    return base.astype(np.int64) + extra.astype(np.int64)


def sample_split_counts(
    n_input: np.ndarray,
    mean: np.ndarray,
    width: float,
    rng: np.random.Generator,
    p_port: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Left/right counts of many sample windows at once.

    Counting photons with x > 0 out of independent Gaussian arrivals is a
    binomial draw with p = Phi(mean / width), so no positions are built.

    Args:
        n_input: Input photons per window
        mean: Profile mean per window (m)
        width: Profile deviation including per-photon jitter (m)
        rng: Stream for this block of windows
        p_port: Port probability for the WVT, None for the ST

    Returns:
        (n_port, n_right) integer arrays
    """
    _check_stream(rng)
    n_input = np.asarray(n_input, dtype=np.int64)
    n_port = rng.binomial(n_input, p_port) if p_port is not None else n_input
    p_right = stats.norm.cdf(np.asarray(mean, dtype=float) / width)
    n_right = rng.binomial(n_port, p_right)
    return n_port, n_right


def laser_jitter_waveform(
    spec: Optional[LaserJitterSpec],
    duration: float,
    sample_rate: float,
    rng: np.random.Generator,
    envelope: Optional[Envelope] = None,
) -> np.ndarray:
    """
    Angular laser wander sampled at sample_rate for duration seconds.

    Tones are added as programmed; the noise part is white Gaussian noise
    low-passed with a 4th-order Butterworth filter and scaled to its rms.
    envelope, when given, multiplies the series sample by sample and models
    non-stationary amplitude. A spec peak_to_peak rescales the final series.
    """
    _check_stream(rng)
    n = int(round(duration * sample_rate))
    if spec is None or spec.is_empty or n == 0:
        return np.zeros(n)
    if sample_rate <= 2.0 * spec.highest_frequency:
        raise AliasingError(
            f"sample rate {sample_rate} Hz does not exceed twice the highest jitter frequency "
            f"{spec.highest_frequency} Hz"
        )

    t = np.arange(n) / sample_rate
    theta = np.zeros(n)
    for tone in spec.tones:
        theta += tone.amplitude * np.sin(2.0 * math.pi * tone.frequency * t + tone.phase)

    if spec.noise is not None and spec.noise.rms > 0:
        white = rng.standard_normal(n)
        sos = signal.butter(4, spec.noise.cutoff, btype="low", fs=sample_rate, output="sos")
        band = signal.sosfiltfilt(sos, white) if n > 3 * (2 * len(sos) + 1) else signal.sosfilt(sos, white)
        spread = np.std(band)
        if spread > 0:
            theta += band * (spec.noise.rms / spread)

    if envelope is not None:
        theta = theta * envelope(t)

    if spec.peak_to_peak is not None:
        span = np.ptp(theta)
        if span > 0:
            theta *= spec.peak_to_peak / span

    logger.debug("Laser jitter synthesized", extra={"samples": n, "rms": float(np.std(theta))})
    return theta
