"""
Closed-form optics of the two beam-deflection techniques.

The weak-value technique (WVT) reads the dark (or bright) port of a Sagnac
interferometer whose beam splitter imparts a transverse momentum kick k; the
standard technique (ST) focuses the whole beam with a lens of focal length f.
All quantities are SI: meters, radians, 1/meter for momenta.

Sign convention: the dark-port profile is centered at x = -delta_d, the
bright-port profile at x = +delta_b and the focused spot at x = +f*k/k0.
The shift functions return the signed magnitudes delta_d, delta_b and f*k/k0.
"""

import logging
import math
from typing import Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import constants

from wvlab.errors import DomainError, ZeroModulationError
from wvlab.units import Angle, Length, Power

logger = logging.getLogger(__name__)

Port = Literal["dark", "bright"]
ModulationKind = Literal["d", "q"]

# Warn (never fail) once k^2 sigma^2 cot^2(phi/2) reaches this value.
WEAKNESS_THRESHOLD = 0.1

# Values reported by the bench experiment, kept for side-by-side summaries.
PREDICTED_SLOPES = {"q": 285.0, "d": 100.0}
MEASURED_SLOPES = {"q": 258.0, "d": 51.0}
MEASURED_FACTORS = {"signal": 3.2, "d": 11.0, "q": 28.0}
PIEZO_CALIBRATION_PM_PER_MV = {"alpha1": 68.6, "alpha2": 31.6, "alpha3": 75.8}


class BeamParams(BaseModel):
    """Gaussian beam and photon budget shared by both techniques."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma: Length = Field(gt=0, description="Beam radius parameter, intensity standard deviation (m)")
    wavelength: Length = Field(gt=0, description="Center wavelength (m)")
    n_photons: float = Field(default=0.0, ge=0, description="Photon count N per acquisition")
    power: Optional[Power] = Field(default=None, ge=0, description="Optical power (W)")

    @property
    def k0(self) -> float:
        """Wave number 2*pi/lambda."""
        return 2.0 * math.pi / self.wavelength


class WvConfig(BaseModel):
    """Sagnac weak-value geometry."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    phi: Angle = Field(gt=0, lt=math.pi, description="Post-selection phase (rad)")
    lever_arm: Length = Field(gt=0, description="Distance L from the external modulating mirror to the detector (m)")
    power: Optional[Power] = Field(default=None, ge=0, description="Input power for this technique (W)")


class StConfig(BaseModel):
    """Focusing-lens geometry."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    focal_length: Length = Field(gt=0, description="Focal length f (m)")
    power: Optional[Power] = Field(default=None, ge=0, description="Input power for this technique (W)")

    def focused_radius(self, beam: BeamParams) -> float:
        """sigma_f = f / (2 k0 sigma)."""
        return self.focal_length / (2.0 * beam.k0 * beam.sigma)


TechniqueConfig = Union[WvConfig, StConfig]


class SignalKick(BaseModel):
    """Transverse momentum kick k with its equivalent small deflection angle."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    k: float = Field(description="Transverse momentum kick (1/m)")
    k0: float = Field(gt=0, description="Wave number of the beam (1/m)")

    @property
    def equivalent_angle(self) -> float:
        return self.k / self.k0

    @classmethod
    def from_angle(cls, angle: float, beam: BeamParams) -> "SignalKick":
        # No reflection factor: a commanded angle theta is the kick k0*theta.
        return cls(k=beam.k0 * angle, k0=beam.k0)


KickLike = Union[SignalKick, float]


class ShiftRow(BaseModel):
    dx_k: float = Field(description="Displacement from the signal kick (m)")
    dx_d: float = Field(description="Displacement from the transverse detector modulation (m)")
    dx_q: float = Field(description="Displacement from the transverse momentum modulation (m)")


class ShiftTable(BaseModel):
    """Detector-plane displacements of both techniques for one set of inputs."""
    wv: ShiftRow
    st: ShiftRow


class RawSignalRatios(BaseModel):
    """WVT over ST ratios of displacement normalized by the detector beam width."""
    r_k: float = Field(description="Signal amplification, cot(phi/2)")
    r_q: float = Field(description="Momentum-modulation ratio, L/(2 k0 sigma^2)")
    r_d: float = Field(description="Detector-modulation ratio, f/(2 k0 sigma^2)")

    def dbv(self) -> dict:
        return {name: 20.0 * math.log10(value) for name, value in self.model_dump().items()}


class GeometricSurface(BaseModel):
    """Inverse comparison factor f'/(2 sigma^2 k0 cot(phi/2)) over a (sigma, f') grid."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    phi: float
    wavelength: float
    sigma: np.ndarray
    fprime: np.ndarray
    values: np.ndarray = Field(description="Shape (len(sigma), len(fprime))")
    max_value: float
    argmax: Tuple[float, float] = Field(description="(sigma, f') at the maximum")


class WeakValidity(BaseModel):
    value: float = Field(description="k^2 sigma^2 cot^2(phi/2)")
    valid: bool = Field(description="True while value stays below the warning threshold")


def _kick_value(kick: KickLike) -> float:
    if isinstance(kick, SignalKick):
        return kick.k
    return float(kick)


def _half_phase(wv: WvConfig) -> float:
    phi = float(wv.phi)
    if not 0.0 < phi < math.pi:
        raise DomainError(f"post-selection phase must lie in (0, pi), got {phi}")
    return 0.5 * phi


def dark_shift(beam: BeamParams, wv: WvConfig, kick: KickLike) -> float:
    """delta_d = 2 sigma^2 k cot(phi/2); the dark profile is centered at -delta_d."""
    half = _half_phase(wv)
    return 2.0 * beam.sigma ** 2 * _kick_value(kick) / math.tan(half)


def bright_shift(beam: BeamParams, wv: WvConfig, kick: KickLike) -> float:
    """delta_b = 2 sigma^2 k tan(phi/2); the bright profile is centered at +delta_b."""
    half = _half_phase(wv)
    return 2.0 * beam.sigma ** 2 * _kick_value(kick) * math.tan(half)


def st_shift(beam: BeamParams, st: StConfig, kick: KickLike) -> float:
    return st.focal_length * _kick_value(kick) / beam.k0


def port_probabilities(wv: WvConfig) -> Tuple[float, float]:
    """
    Fraction of photons leaving the dark and bright ports.

    The smaller probability is computed directly and the other as its
    complement, which makes the pair sum to exactly 1.0 in floating point.
    """
    half = _half_phase(wv)
    p_dark = math.sin(half) ** 2
    if p_dark <= 0.5:
        return p_dark, 1.0 - p_dark
    p_bright = math.cos(half) ** 2
    return 1.0 - p_bright, p_bright


def port_probability(wv: WvConfig, port: Port) -> float:
    p_dark, p_bright = port_probabilities(wv)
    return p_dark if port == "dark" else p_bright


def kick_slope(beam: BeamParams, config: TechniqueConfig, port: Port = "dark") -> float:
    """
    Signed derivative of the detector-plane mean with respect to k.

    Returns:
        -2 sigma^2 cot(phi/2) for the dark port, 2 sigma^2 tan(phi/2) for the
        bright port and f/k0 for the focused beam
    """
    if isinstance(config, StConfig):
        return config.focal_length / beam.k0
    half = _half_phase(config)
    if port == "dark":
        return -2.0 * beam.sigma ** 2 / math.tan(half)
    return 2.0 * beam.sigma ** 2 * math.tan(half)


def lever_arm(config: TechniqueConfig) -> float:
    """Distance over which an upstream angle turns into a displacement."""
    if isinstance(config, StConfig):
        return config.focal_length
    return config.lever_arm


def detector_width(beam: BeamParams, config: TechniqueConfig) -> float:
    """Standard deviation of the profile on the detector: sigma (WVT) or sigma_f (ST)."""
    if isinstance(config, StConfig):
        return config.focused_radius(beam)
    return beam.sigma


def jittered_width(
    beam: BeamParams,
    config: TechniqueConfig,
    angular_jitter: float = 0.0,
    detector_jitter: float = 0.0,
) -> float:
    """
    Profile deviation on the detector with per-photon jitter folded in.

    WVT: sigma^2 + (L/2k0 sigma)^2 (1 + (2 sigma k0 Q)^2) + J^2 once Q > 0,
    which is sigma^2 + (L/2k0 sigma)^2 + (L Q)^2 + J^2.
    ST: sigma_f^2 + (f Q)^2 + J^2.
    """
    lever = lever_arm(config)
    variance = detector_width(beam, config) ** 2 + detector_jitter ** 2
    if angular_jitter > 0:
        variance += (lever * angular_jitter) ** 2
        if isinstance(config, WvConfig):
            variance += (lever / (2.0 * beam.k0 * beam.sigma)) ** 2
    return math.sqrt(variance)


def shift_table(beam: BeamParams, wv: WvConfig, st: StConfig, kick: KickLike, d: float, q: float) -> ShiftTable:
    """
    Displacements produced by the signal k, a detector offset d and a momentum offset q.

    Args:
        beam: Beam parameters
        wv: Weak-value geometry
        st: Standard-technique geometry
        kick: Signal kick k (1/m)
        d: Transverse detector displacement (m)
        q: Transverse momentum modulation (1/m)

    Returns:
        ShiftTable with one row per technique
    """
    return ShiftTable(
        wv=ShiftRow(dx_k=dark_shift(beam, wv, kick), dx_d=d, dx_q=wv.lever_arm * q / beam.k0),
        st=ShiftRow(dx_k=st_shift(beam, st, kick), dx_d=d, dx_q=st.focal_length * q / beam.k0),
    )


def ratio_r(
    beam: BeamParams,
    config: TechniqueConfig,
    kick: KickLike,
    modulation: float,
    kind: ModulationKind = "q",
    port: Port = "dark",
) -> float:
    """
    Signal displacement divided by the displacement of one modulation.

    Args:
        beam: Beam parameters
        config: WvConfig or StConfig
        kick: Signal kick k (1/m)
        modulation: d in meters (kind "d") or q in 1/m (kind "q")
        kind: Which modulation the ratio is taken against
        port: WVT port whose shift is used

    Returns:
        The dimensionless ratio R
    """
    k = _kick_value(kick)
    if isinstance(config, StConfig):
        dx_k = st_shift(beam, config, k)
    elif port == "dark":
        dx_k = dark_shift(beam, config, k)
    else:
        dx_k = bright_shift(beam, config, k)

    if kind == "d":
        dx_mod = modulation
    else:
        dx_mod = lever_arm(config) * modulation / beam.k0
    if dx_mod == 0.0:
        raise ZeroModulationError(f"modulation of kind {kind!r} produces no displacement")
    return dx_k / dx_mod


def ratio_of_ratios(beam: BeamParams, wv: WvConfig, st: StConfig, kind: ModulationKind, port: Port = "dark") -> float:
    """Closed form of R_wv / R_st: 2 k0 sigma^2 cot(phi/2) divided by f (detector) or L (momentum)."""
    half = _half_phase(wv)
    trig = 1.0 / math.tan(half) if port == "dark" else math.tan(half)
    length = st.focal_length if kind == "d" else wv.lever_arm
    return 2.0 * beam.k0 * beam.sigma ** 2 * trig / length


def raw_signal_ratios(beam: BeamParams, wv: WvConfig, st: StConfig) -> RawSignalRatios:
    half = _half_phase(wv)
    scale = 2.0 * beam.k0 * beam.sigma ** 2
    return RawSignalRatios(
        r_k=1.0 / math.tan(half),
        r_q=wv.lever_arm / scale,
        r_d=st.focal_length / scale,
    )


def geometric_factor_surface(
    phi: float,
    sigma_range: Tuple[float, float] = (250e-6, 2e-3),
    fprime_range: Tuple[float, float] = (1e-3, 1.0),
    n_sigma: int = 40,
    n_fprime: int = 40,
    wavelength: float = 780e-9,
) -> GeometricSurface:
    """
    Evaluate f'/(2 sigma^2 k0 cot(phi/2)) on a regular grid.

    Values below 1 mean the weak-value technique rejects the modulation
    better than the standard one for that (sigma, f').
    """
    if not 0.0 < phi < math.pi:
        raise DomainError(f"post-selection phase must lie in (0, pi), got {phi}")
    if min(sigma_range) <= 0 or min(fprime_range) <= 0:
        raise DomainError("sigma and f' ranges must be strictly positive")

    k0 = 2.0 * math.pi / wavelength
    sigma = np.linspace(sigma_range[0], sigma_range[1], n_sigma)
    fprime = np.linspace(fprime_range[0], fprime_range[1], n_fprime)
    values = fprime[np.newaxis, :] * math.tan(0.5 * phi) / (2.0 * k0 * sigma[:, np.newaxis] ** 2)

    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    return GeometricSurface(
        phi=phi,
        wavelength=wavelength,
        sigma=sigma,
        fprime=fprime,
        values=values,
        max_value=float(values[i, j]),
        argmax=(float(sigma[i]), float(fprime[j])),
    )


def weak_validity(beam: BeamParams, wv: WvConfig, kick: KickLike) -> WeakValidity:
    """Weakness parameter k^2 sigma^2 cot^2(phi/2) and whether it stays below the threshold."""
    half = _half_phase(wv)
    value = (_kick_value(kick) * beam.sigma / math.tan(half)) ** 2
    valid = value < WEAKNESS_THRESHOLD
    if not valid:
        logger.warning(
            "Weak-interaction approximation violated",
            extra={"weakness": value, "phi": wv.phi, "threshold": WEAKNESS_THRESHOLD},
        )
    return WeakValidity(value=value, valid=valid)


def photon_number(power: float, wavelength: float, duration: float) -> float:
    """Mean photon count P*T/(h c / lambda)."""
    return power * duration * wavelength / (constants.h * constants.c)


def rms_from_peak_to_peak(peak_to_peak: float) -> float:
    """rms of a sinusoid with the given peak-to-peak excursion (pp = 2 sqrt(2) rms)."""
    return peak_to_peak / (2.0 * math.sqrt(2.0))


def peak_to_peak_from_rms(rms: float) -> float:
    return 2.0 * math.sqrt(2.0) * rms


def momentum_rms_from_quoted_angle(angle: float, beam: BeamParams) -> float:
    """q_rms for the momentum-modulation convention angle = sqrt(2) q_rms / k0."""
    return beam.k0 * angle / math.sqrt(2.0)
