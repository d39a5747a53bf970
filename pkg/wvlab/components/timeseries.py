"""
Scenario engine: drive waveforms, detector voltage traces, averaged spectra
and the sweeps behind the technique comparisons.

A trace is generated in fixed chunks of samples. Each chunk owns a stream
addressed by (master seed, channel salt, run key, chunk index), split into a
photon child and an electronics child, so a trace is identical for any
thread count and the electronic noise can be replayed with and without a
disturbance.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from wvlab.components.detector import counts_to_voltage, noise_floor_dbv
from wvlab.components.inference import (
    EstimationReport,
    bound_for,
    deviation_ratio,
    estimate_k_split,
    fisher_fraction_from_snr,
    k_from_voltages,
)
from wvlab.components.optics import (
    BeamParams,
    ModulationKind,
    StConfig,
    TechniqueConfig,
    jittered_width,
    kick_slope,
    lever_arm,
    port_probability,
    ratio_of_ratios,
    ratio_r,
)
from wvlab.components.sampler import (
    DetectorModulation,
    Envelope,
    LaserJitterSpec,
    MomentumModulation,
    laser_jitter_waveform,
    photon_budget,
    sample_split_counts,
)
from wvlab.errors import EstimationError, LengthMismatchError
from wvlab.parallel import exact_mean, run_parallel, seed_sequence_for, stream_for
from wvlab.units import Angle, Frequency, Time

if TYPE_CHECKING:
    from wvlab.scenario import Scenario

logger = logging.getLogger(__name__)

Channel = Literal["wv_dark", "wv_bright", "st"]

CHUNK_SAMPLES = 8192
TRACE_SALTS = {"wv_dark": 1, "wv_bright": 2, "st": 3}
LASER_SALT = 7
RESOLVED_MARGIN_DB = 6.0
FLOOR_GUARD_BINS = 2

# Bench values for the laser-jitter comparison.
REFERENCE_RELATIVE_ERRORS = {"st": 144.0, "wv": 5.0}
REFERENCE_SUPPRESSIONS = {"stochastic": 29.0, "single_tone": 44.0}


class DriveWaveform(BaseModel):
    """Programmed signal kick k(t)."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["sine", "trapezoid"] = "sine"
    amplitude: float = Field(default=0.0, description="Peak kick (1/m)")
    frequency: Frequency = Field(default=10.0, gt=0, description="Repetition frequency (Hz)")
    rise_time: Optional[Time] = Field(default=None, gt=0, description="Ramp duration, trapezoid only (s)")
    phase: Angle = Field(default=0.0, description="Phase at t = 0 (rad)")

    @model_validator(mode="after")
    def _check_plateau(self) -> "DriveWaveform":
        if self.kind == "trapezoid":
            if self.rise_time is None:
                raise ValueError("a trapezoid drive needs rise_time")
            if self.plateau_duration <= 0:
                raise ValueError(
                    f"rise time {self.rise_time} s leaves no plateau at {self.frequency} Hz"
                )
        return self

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    @property
    def plateau_duration(self) -> float:
        """Time spent at full amplitude per period (half period minus one ramp)."""
        if self.kind != "trapezoid":
            return 0.0
        return 0.5 * self.period - self.rise_time

    @property
    def plateau_center(self) -> float:
        """Middle of the first high plateau, phase included."""
        shift = self.phase / (2.0 * math.pi * self.frequency)
        return self.rise_time + 0.5 * self.plateau_duration - shift

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "sine":
            return self.amplitude * np.sin(2.0 * math.pi * self.frequency * t + self.phase)

        # 0 -> A over the rise, hold, A -> 0 over the fall, hold at 0.
        tau = np.mod(t + self.phase / (2.0 * math.pi * self.frequency), self.period)
        rise, half = self.rise_time, 0.5 * self.period
        shape = np.where(
            tau < rise,
            tau / rise,
            np.where(tau < half, 1.0, np.where(tau < half + rise, 1.0 - (tau - half) / rise, 0.0)),
        )
        return self.amplitude * shape


@dataclass(frozen=True)
class VoltageTrace:
    """Detector samples of one channel."""
    channel: str
    t: np.ndarray
    volts: np.ndarray
    kick: np.ndarray
    v_total: float
    sample_time: float
    n_detected: np.ndarray

    def __len__(self) -> int:
        return int(self.volts.size)


class SpectrumResult(BaseModel):
    """Magnitude spectrum averaged over equal segments, rectangular window."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    freqs: np.ndarray
    amplitude: np.ndarray = Field(description="One-sided peak amplitude per bin (V)")
    dbv: np.ndarray = Field(description="20 log10(amplitude / v_total)")
    n_averages: int
    segment_length: int
    sample_time: float
    v_total: float
    window: str = "rectangular"
    parseval_ratio: float = Field(description="Summed spectral power over time-domain variance")

    @property
    def resolution(self) -> float:
        return 1.0 / (self.segment_length * self.sample_time)

    def bin_index(self, freq: float) -> int:
        return int(round(freq / self.resolution))

    def amplitude_at(self, freq: float) -> float:
        return float(self.amplitude[self.bin_index(freq)])

    def dbv_at(self, freq: float) -> float:
        return float(self.dbv[self.bin_index(freq)])

    def floor_amplitude(self, exclude: Sequence[float] = (), statistic: str = "mean") -> float:
        """Typical noise magnitude with DC and guard bins around `exclude` left out."""
        mask = np.ones(self.amplitude.size, dtype=bool)
        mask[0] = False
        for freq in exclude:
            center = self.bin_index(freq)
            mask[max(center - FLOOR_GUARD_BINS, 0): center + FLOOR_GUARD_BINS + 1] = False
        values = self.amplitude[mask]
        if values.size == 0:
            raise EstimationError("no bins left to estimate the noise floor")
        return float(np.median(values) if statistic == "median" else np.mean(values))

    def floor_dbv(self, exclude: Sequence[float] = ()) -> float:
        floor = self.floor_amplitude(exclude, statistic="median")
        return 20.0 * math.log10(floor / self.v_total) if floor > 0 else -math.inf


class PeakRatio(BaseModel):
    name: str
    frequency: float
    dbv_wv: float
    dbv_st: float
    difference_db: float = Field(description="WVT minus ST (dB)")
    linear: float = Field(description="10^(difference/20)")
    resolved_wv: bool
    resolved_st: bool

    @property
    def resolved(self) -> bool:
        return self.resolved_wv and self.resolved_st


class RatioPoint(BaseModel):
    kind: str
    mode: str
    kick_pp: float = Field(description="Kick, peak-to-peak equivalent angle (rad)")
    amplitude_pp: float = Field(description="Modulation peak to peak (m or rad)")
    r_wv: float
    r_st: float


class SlopeFit(BaseModel):
    slope: float
    r2: float
    n_points: int
    predicted: Optional[float] = None


class DeviationPoint(BaseModel):
    kind: str
    channel: str
    amplitude_rms: float = Field(description="Modulation rms (m for d, rad for q)")
    xi_rms: float = Field(description="Modulation rms in k units (1/m)")
    delta_k_bound: float
    ratio_closed: float
    ratio_mc: Optional[float] = None
    stderr: Optional[float] = None


class TonePeak(BaseModel):
    frequency: float
    dbv_wv: float = Field(description="Level of the full trace at the tone (dBV)")
    dbv_st: float
    jitter_dbv_wv: float = Field(description="Level of the jitter contribution alone (dBV)")
    jitter_dbv_st: float
    margin_wv: float = Field(description="Jitter contribution over the analytic electronic floor (dB)")
    margin_st: float


class JitterSummary(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    spectrum_wv: SpectrumResult
    spectrum_st: SpectrumResult
    floor_dbv: Dict[str, float]
    tones: List[TonePeak]
    jitter_deviation: Dict[str, float] = Field(description="Deviation of k caused by the jitter alone (1/m)")
    delta_k: Dict[str, float]
    delta_k_bound: Dict[str, float]
    relative_error: Dict[str, float]
    suppression: float
    predicted_single_tone: float


class FractionPoint(BaseModel):
    phi: float
    snr_dark: float
    snr_bright: float
    fraction_dark: float
    fraction_bright: float
    fraction_dark_analytic: float


def _laser_angles(
    spec: Optional[LaserJitterSpec],
    n: int,
    sample_time: float,
    seed: int,
    run_key: int,
    envelope: Optional[Envelope] = None,
) -> np.ndarray:
    """Jitter angle averaged over each sample window; oversampled when T is long."""
    if spec is None or spec.is_empty:
        return np.zeros(n)
    factor = max(1, math.ceil(4.0 * spec.highest_frequency * sample_time))
    series = laser_jitter_waveform(spec, n * sample_time, factor / sample_time, stream_for(seed, LASER_SALT, run_key), envelope)
    return series[: n * factor].reshape(n, factor).mean(axis=1)


def _synthesize(
    scenario: "Scenario",
    channel: str,
    t: np.ndarray,
    kick: np.ndarray,
    offset_angle: np.ndarray,
    detector_shift: np.ndarray,
    sample_time: float,
    seed: int,
    run_key: int,
    threads: int,
) -> VoltageTrace:
    beam = scenario.beam
    config = scenario.config_for(channel)
    port = scenario.port_for(channel)
    det = scenario.detector_for(channel, sample_time)
    mean_photons = scenario.mean_photons(channel, sample_time)
    if mean_photons <= 0 and det.noise_per_sample == 0:
        raise EstimationError(f"channel {channel} has no photons and no electronic noise")

    lever = lever_arm(config)
    noise = scenario.disturbances
    mean = kick_slope(beam, config, port) * kick + detector_shift + lever * offset_angle
    width = jittered_width(beam, config, noise.angular_jitter, noise.detector_jitter)
    p_port = None if isinstance(config, StConfig) else port_probability(config, port)
    fixed = scenario.run.photons_per_sample is not None
    salt = TRACE_SALTS[channel]
    n = t.size

    def chunk(index: int) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = index * CHUNK_SAMPLES, min(n, (index + 1) * CHUNK_SAMPLES)
        photon_seq, electronics_seq = seed_sequence_for(seed, salt, run_key, index).spawn(2)
        photon_rng = np.random.default_rng(photon_seq)
        electronics_rng = np.random.default_rng(electronics_seq)
        if fixed:
            n_input = np.full(hi - lo, int(round(mean_photons)), dtype=np.int64)
        else:
            n_input = photon_budget(mean_photons, photon_rng, size=hi - lo)
        n_port, n_right = sample_split_counts(n_input, mean[lo:hi], width, photon_rng, p_port)
        volts = counts_to_voltage(n_port - n_right, n_right, det, electronics_rng)
        return volts, n_port

    parts = run_parallel(chunk, range(math.ceil(n / CHUNK_SAMPLES)), threads)
    return VoltageTrace(
        channel=channel,
        t=t,
        volts=np.concatenate([p[0] for p in parts]) if parts else np.zeros(0),
        kick=kick,
        v_total=det.v_total,
        sample_time=sample_time,
        n_detected=np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, dtype=np.int64),
    )


def run_timeseries(
    scenario: "Scenario",
    duration: Optional[float] = None,
    sample_time: Optional[float] = None,
    channels: Sequence[str] = ("wv_dark", "st"),
    start_time: float = 0.0,
    seed: Optional[int] = None,
    run_key: int = 0,
    threads: int = 1,
    include_laser_jitter: bool = True,
    envelope: Optional[Envelope] = None,
) -> Dict[str, VoltageTrace]:
    """
    Voltage traces of the requested channels for one scenario.

    Every sample evaluates the drive, the modulations and the laser jitter
    at its timestamp, draws its photon budget and left/right counts and
    adds electronic noise. All channels share the same laser-jitter series.

    Args:
        scenario: Scenario to run
        duration: Trace duration (s); defaults to segment duration times averages
        sample_time: T (s); defaults to the scenario run settings
        channels: Any of wv_dark, wv_bright, st
        start_time: Timestamp of the first sample (s)
        seed: Master seed; defaults to the scenario seed
        run_key: Distinguishes independent runs of the same scenario
        threads: Worker threads for chunk generation
        include_laser_jitter: Set False to replay the run without laser jitter
        envelope: Optional amplitude envelope of the laser jitter

    Returns:
        Mapping from channel name to VoltageTrace
    """
    T = float(sample_time or scenario.run.sample_time)
    duration = float(duration or scenario.run.total_duration)
    n = int(round(duration / T))
    if n <= 0:
        raise EstimationError(f"duration {duration} s holds no samples of {T} s")
    seed = scenario.run.master_seed if seed is None else seed

    t = start_time + np.arange(n) * T
    kick = scenario.drive(t)
    noise = scenario.disturbances
    jitter = noise.laser_jitter if include_laser_jitter else None
    theta = _laser_angles(jitter, n, T, seed, run_key, envelope)
    offset_angle = np.asarray(noise.q_at(t), dtype=float) / scenario.beam.k0 + theta
    detector_shift = np.asarray(noise.d_at(t), dtype=float)

    traces = {}
    for channel in channels:
        traces[channel] = _synthesize(
            scenario, channel, t, kick, offset_angle, detector_shift, T, seed, run_key, threads
        )
    logger.debug("Time series generated", extra={"scenario": scenario.name, "samples": n, "channels": list(channels)})
    return traces


def _segments(data, n_avg: Optional[int]) -> np.ndarray:
    if isinstance(data, (list, tuple)):
        lengths = {np.asarray(segment).size for segment in data}
        if len(lengths) > 1:
            raise LengthMismatchError(f"segments have different lengths: {sorted(lengths)}")
    array = np.atleast_2d(np.asarray(data, dtype=float))
    if n_avg is not None and array.shape[0] == 1:
        if n_avg < 1 or array.shape[1] % n_avg:
            raise LengthMismatchError(f"{array.shape[1]} samples do not split into {n_avg} equal segments")
        array = array.reshape(n_avg, -1)
    return array


def averaged_spectrum(
    traces,
    v_total: float,
    sample_time: float,
    n_avg: Optional[int] = None,
) -> SpectrumResult:
    """
    Average magnitude spectrum in dBV.

    Args:
        traces: Equal-length segments, or one trace split into n_avg segments
        v_total: Normalization voltage of the technique (V)
        sample_time: Sample spacing (s)
        n_avg: Number of segments when a single trace is given

    Returns:
        SpectrumResult with bins spaced 1/segment-duration apart
    """
    segments = _segments(traces, n_avg)
    m = segments.shape[1]
    if m < 2:
        raise LengthMismatchError("segments need at least two samples")

    transform = np.fft.rfft(segments, axis=1)
    magnitude = np.abs(transform) / m
    power = magnitude ** 2
    magnitude[:, 1:] *= 2.0
    power[:, 1:] *= 2.0
    if m % 2 == 0:
        magnitude[:, -1] /= 2.0
        power[:, -1] /= 2.0

    amplitude = magnitude.mean(axis=0)
    spectral = float(np.mean(power[:, 1:].sum(axis=1)))
    temporal = float(np.mean(np.var(segments, axis=1)))
    with np.errstate(divide="ignore"):
        dbv = 20.0 * np.log10(amplitude / v_total)

    return SpectrumResult(
        freqs=np.fft.rfftfreq(m, d=sample_time),
        amplitude=amplitude,
        dbv=dbv,
        n_averages=segments.shape[0],
        segment_length=m,
        sample_time=sample_time,
        v_total=v_total,
        parseval_ratio=spectral / temporal if temporal > 0 else 1.0,
    )


def trace_spectrum(trace: VoltageTrace, n_avg: int) -> SpectrumResult:
    return averaged_spectrum(trace.volts, trace.v_total, trace.sample_time, n_avg)


def peak_ratio_table(
    spec_wv: SpectrumResult,
    spec_st: SpectrumResult,
    freqs: Dict[str, float],
    margin_db: float = RESOLVED_MARGIN_DB,
) -> List[PeakRatio]:
    """
    WVT minus ST levels at named frequencies.

    A peak counts as resolved when it stands margin_db above the median
    floor of its own spectrum.
    """
    exclude = list(freqs.values())
    floor_wv = spec_wv.floor_dbv(exclude)
    floor_st = spec_st.floor_dbv(exclude)
    rows = []
    for name, freq in freqs.items():
        dbv_wv, dbv_st = spec_wv.dbv_at(freq), spec_st.dbv_at(freq)
        difference = dbv_wv - dbv_st
        row = PeakRatio(
            name=name,
            frequency=freq,
            dbv_wv=dbv_wv,
            dbv_st=dbv_st,
            difference_db=difference,
            linear=10.0 ** (difference / 20.0),
            resolved_wv=dbv_wv >= floor_wv + margin_db,
            resolved_st=dbv_st >= floor_st + margin_db,
        )
        if not row.resolved:
            logger.warning("Peak below noise floor", extra={"peak": name, "frequency": freq})
        rows.append(row)
    return rows


def _modulation_amplitude(beam: BeamParams, kind: ModulationKind, value: float) -> float:
    """d stays in meters; q angles become momenta k0 * angle."""
    return value if kind == "d" else beam.k0 * value


def _with_single_modulation(scenario: "Scenario", kind: ModulationKind, amplitude: float, frequency: float) -> "Scenario":
    if kind == "d":
        update = {"d_mod": DetectorModulation(amplitude=amplitude, frequency=frequency), "q_mod": None}
    else:
        update = {"d_mod": None, "q_mod": MomentumModulation(amplitude=amplitude, frequency=frequency)}
    return scenario.model_copy(update={"disturbances": scenario.disturbances.model_copy(update=update)})


def ratio_sweep(
    scenario: "Scenario",
    kind: ModulationKind,
    mode: Literal["ideal", "monte_carlo"] = "ideal",
    threads: int = 1,
) -> List[RatioPoint]:
    """
    R for both techniques over every (kick, modulation amplitude) of the sweep.

    The ideal mode evaluates the closed forms; the Monte Carlo mode drives a
    sine kick against a single modulation tone and reads both peaks from the
    averaged spectra of the simulated traces.
    """
    sweep = scenario.sweep
    amplitudes = sweep.d_peak_to_peak if kind == "d" else sweep.q_peak_to_peak
    beam = scenario.beam
    grid = [(kick_pp, amp_pp) for kick_pp in sweep.kicks for amp_pp in amplitudes]
    if not grid:
        raise EstimationError(f"sweep defines no kicks or {kind} amplitudes")

    def ideal(item) -> RatioPoint:
        kick_pp, amp_pp = item
        k = beam.k0 * kick_pp / 2.0
        modulation = _modulation_amplitude(beam, kind, amp_pp / 2.0)
        return RatioPoint(
            kind=kind,
            mode="ideal",
            kick_pp=kick_pp,
            amplitude_pp=amp_pp,
            r_wv=ratio_r(beam, scenario.wv, k, modulation, kind),
            r_st=ratio_r(beam, scenario.st, k, modulation, kind),
        )

    def simulated(indexed) -> RatioPoint:
        index, (kick_pp, amp_pp) = indexed
        drive = DriveWaveform(kind="sine", amplitude=beam.k0 * kick_pp / 2.0, frequency=sweep.kick_frequency)
        modulated = _with_single_modulation(
            scenario, kind, _modulation_amplitude(beam, kind, amp_pp / 2.0), sweep.modulation_frequency
        ).model_copy(update={"drive": drive})
        traces = run_timeseries(modulated, run_key=index + 1, include_laser_jitter=False)
        ratios = {}
        for channel, trace in traces.items():
            spectrum = trace_spectrum(trace, scenario.run.n_averages)
            ratios[channel] = spectrum.amplitude_at(sweep.kick_frequency) / spectrum.amplitude_at(sweep.modulation_frequency)
        return RatioPoint(
            kind=kind, mode="monte_carlo", kick_pp=kick_pp, amplitude_pp=amp_pp, r_wv=ratios["wv_dark"], r_st=ratios["st"]
        )

    if mode == "ideal":
        return [ideal(item) for item in grid]
    return run_parallel(simulated, list(enumerate(grid)), threads)


def slope_fit_r(points: Sequence[RatioPoint], predicted: Optional[float] = None) -> SlopeFit:
    """Least-squares slope of R_wv against R_st through the origin."""
    if len(points) < 3:
        raise EstimationError(f"slope fit needs at least 3 points, got {len(points)}")
    x = np.array([p.r_st for p in points])
    y = np.array([p.r_wv for p in points])
    slope = float(np.dot(x, y) / np.dot(x, x))
    residual = float(np.sum((y - slope * x) ** 2))
    spread = float(np.sum((y - y.mean()) ** 2))
    return SlopeFit(
        slope=slope,
        r2=1.0 - residual / spread if spread > 0 else 1.0,
        n_points=len(points),
        predicted=predicted,
    )


def technique_bound(scenario: "Scenario", channel: str, sample_time: Optional[float] = None) -> float:
    """Delta k_B of one sample of the channel under split readout."""
    T = sample_time or scenario.run.sample_time
    config = scenario.config_for(channel)
    return bound_for(
        scenario.beam,
        config,
        scenario.detector_for(channel, T),
        scenario.mean_photons(channel, T),
        scenario.port_for(channel),
        split=True,
    )


def xi_rms(beam: BeamParams, config: TechniqueConfig, kind: ModulationKind, amplitude_rms: float, port: str = "dark") -> float:
    """A modulation rms (m for d, rad for q) expressed as a deviation of k."""
    displacement = amplitude_rms if kind == "d" else lever_arm(config) * amplitude_rms
    return displacement / abs(kick_slope(beam, config, port))


def _plateau_window(scenario: "Scenario", repetition: int) -> Tuple[float, float]:
    drive = scenario.drive
    if drive.kind == "trapezoid":
        window = scenario.run.window or drive.plateau_duration
        start = repetition * drive.period + drive.plateau_center - 0.5 * window
        return start, window
    if drive.amplitude != 0.0:
        raise EstimationError("estimation needs a trapezoid drive or a constant kick")
    window = scenario.run.window or scenario.run.duration
    return repetition * window, window


def deviation_curve(
    scenario: "Scenario",
    channel: str,
    kind: ModulationKind,
    amplitudes_rms: Optional[Sequence[float]] = None,
    monte_carlo: bool = True,
    repetitions: Optional[int] = None,
    threads: int = 1,
) -> List[DeviationPoint]:
    """
    Delta k_B / Delta k against the modulation strength for one technique.

    The Monte Carlo value pools the sample variances of plateau windows
    carrying a single modulation tone and is compared with
    1/sqrt(1 + xi^2/Delta k_B^2).
    """
    sweep = scenario.sweep
    if amplitudes_rms is None:
        amplitudes_rms = sweep.d_rms if kind == "d" else sweep.q_rms
    repetitions = repetitions or sweep.repetitions
    config = scenario.config_for(channel)
    port = scenario.port_for(channel)
    bound = technique_bound(scenario, channel)
    det = scenario.detector_for(channel)
    beam = scenario.beam

    def point(indexed) -> DeviationPoint:
        index, amplitude = indexed
        xi = xi_rms(beam, config, kind, amplitude, port)
        row = DeviationPoint(
            kind=kind,
            channel=channel,
            amplitude_rms=amplitude,
            xi_rms=xi,
            delta_k_bound=bound,
            ratio_closed=deviation_ratio(xi, bound),
        )
        if not monte_carlo:
            return row

        peak = math.sqrt(2.0) * _modulation_amplitude(beam, kind, amplitude)
        modulated = _with_single_modulation(scenario, kind, peak, sweep.modulation_frequency)
        variances, n_used = [], 0
        for repetition in range(repetitions):
            start, window = _plateau_window(scenario, repetition)
            traces = run_timeseries(
                modulated,
                duration=window,
                channels=[channel],
                start_time=start,
                run_key=1 + index * repetitions + repetition,
                include_laser_jitter=False,
            )
            report = estimate_k_split(traces[channel].volts, det, beam, config, port)
            variances.append(report.delta_k ** 2)
            n_used = report.n_used
        delta_k = math.sqrt(exact_mean(variances))
        ratio = bound / delta_k
        stderr = ratio / math.sqrt(2.0 * repetitions * max(n_used - 1, 1))
        return row.model_copy(update={"ratio_mc": ratio, "stderr": stderr})

    return run_parallel(point, list(enumerate(amplitudes_rms)), threads)


def advantage_factor(points_wv: Sequence[DeviationPoint], points_st: Sequence[DeviationPoint], monte_carlo: bool = False) -> float:
    """WVT over ST deviation ratio at the largest modulation of the sweep."""
    if not points_wv or not points_st:
        raise EstimationError("advantage needs points for both techniques")
    wv = max(points_wv, key=lambda p: p.amplitude_rms)
    st = max(points_st, key=lambda p: p.amplitude_rms)
    if monte_carlo:
        return wv.ratio_mc / st.ratio_mc
    return wv.ratio_closed / st.ratio_closed


def jitter_comparison(scenario: "Scenario", threads: int = 1, envelope: Optional[Envelope] = None) -> JitterSummary:
    """
    Laser-jitter spectra of both techniques and the jitter suppression in k.

    Both the spectral and the time-domain parts run the same streams with
    and without the jitter; the difference isolates the jitter contribution
    of each technique. Tone margins compare that contribution with the
    analytic electronic floor.
    """
    run = scenario.run
    channels = ("wv_dark", "st")
    traces = run_timeseries(scenario, channels=channels, threads=threads, envelope=envelope)
    replay = run_timeseries(scenario, channels=channels, threads=threads, include_laser_jitter=False)
    spectra = {channel: trace_spectrum(traces[channel], run.n_averages) for channel in channels}
    jitter_only = {
        channel: trace_spectrum(replace(traces[channel], volts=traces[channel].volts - replay[channel].volts), run.n_averages)
        for channel in channels
    }
    segment = spectra["st"].segment_length
    floors = {channel: noise_floor_dbv(scenario.detector_for(channel), segment) for channel in channels}

    jitter = scenario.disturbances.laser_jitter
    tones = []
    for tone in (jitter.tones if jitter is not None else []):
        jitter_wv, jitter_st = jitter_only["wv_dark"].dbv_at(tone.frequency), jitter_only["st"].dbv_at(tone.frequency)
        tones.append(
            TonePeak(
                frequency=tone.frequency,
                dbv_wv=spectra["wv_dark"].dbv_at(tone.frequency),
                dbv_st=spectra["st"].dbv_at(tone.frequency),
                jitter_dbv_wv=jitter_wv,
                jitter_dbv_st=jitter_st,
                margin_wv=jitter_wv - floors["wv_dark"],
                margin_st=jitter_st - floors["st"],
            )
        )

    T = run.time_domain_sample_time or run.sample_time
    n = run.time_domain_samples or 1000
    with_jitter = run_timeseries(scenario, duration=n * T, sample_time=T, channels=channels, run_key=1, threads=threads, envelope=envelope)
    without = run_timeseries(scenario, duration=n * T, sample_time=T, channels=channels, run_key=1, threads=threads, include_laser_jitter=False)

    deviation, delta_k, bounds, relative = {}, {}, {}, {}
    for channel in channels:
        config, port = scenario.config_for(channel), scenario.port_for(channel)
        det = scenario.detector_for(channel, T)
        k_jit = k_from_voltages(with_jitter[channel].volts, det, scenario.beam, config, port)
        k_ref = k_from_voltages(without[channel].volts, det, scenario.beam, config, port)
        deviation[channel] = float(np.std(k_jit - k_ref, ddof=1))
        delta_k[channel] = float(np.std(k_jit, ddof=1))
        bounds[channel] = technique_bound(scenario, channel, T)
        relative[channel] = delta_k[channel] / bounds[channel]

    if deviation["wv_dark"] > 0:
        suppression = deviation["st"] / deviation["wv_dark"]
    else:
        suppression = 1.0

    return JitterSummary(
        spectrum_wv=spectra["wv_dark"],
        spectrum_st=spectra["st"],
        floor_dbv=floors,
        tones=tones,
        jitter_deviation=deviation,
        delta_k=delta_k,
        delta_k_bound=bounds,
        relative_error=relative,
        suppression=suppression,
        predicted_single_tone=ratio_of_ratios(scenario.beam, scenario.wv, scenario.st, "q"),
    )


def fisher_fraction_sweep(scenario: "Scenario", phis: Optional[Sequence[float]] = None, threads: int = 1) -> List[FractionPoint]:
    """
    Port shares of the information estimated from simulated spectra.

    SNR is the drive peak over the mean floor magnitude of each port's
    spectrum; both ports see the same floor statistic, so its bias cancels.
    """
    phis = list(phis if phis is not None else scenario.sweep.phis)
    if not phis:
        raise EstimationError("no post-selection phases to sweep")
    freq = scenario.drive.frequency

    def point(indexed) -> FractionPoint:
        index, phi = indexed
        rotated = scenario.with_phi(phi)
        traces = run_timeseries(rotated, channels=("wv_dark", "wv_bright"), run_key=index + 1, include_laser_jitter=False)
        snr = {}
        for channel, trace in traces.items():
            spectrum = trace_spectrum(trace, scenario.run.n_averages)
            snr[channel] = spectrum.amplitude_at(freq) / spectrum.floor_amplitude([freq])
        dark, bright = fisher_fraction_from_snr(snr["wv_dark"], snr["wv_bright"])
        return FractionPoint(
            phi=phi,
            snr_dark=snr["wv_dark"],
            snr_bright=snr["wv_bright"],
            fraction_dark=dark,
            fraction_bright=bright,
            fraction_dark_analytic=math.cos(phi / 2.0) ** 2,
        )

    return run_parallel(point, list(enumerate(phis)), threads)


def estimate_repetitions(
    scenario: "Scenario",
    repetitions: int,
    channels: Sequence[str] = ("wv_dark", "st"),
    threads: int = 1,
) -> Dict[str, List[EstimationReport]]:
    """One split-detector estimate per plateau window and channel."""
    if repetitions < 1:
        raise EstimationError(f"repetitions must be at least 1, got {repetitions}")
    bounds = {channel: technique_bound(scenario, channel) for channel in channels}

    def repetition(index: int) -> Dict[str, EstimationReport]:
        start, window = _plateau_window(scenario, index)
        traces = run_timeseries(scenario, duration=window, channels=channels, start_time=start, run_key=index + 1)
        return {
            channel: estimate_k_split(
                traces[channel].volts,
                scenario.detector_for(channel),
                scenario.beam,
                scenario.config_for(channel),
                scenario.port_for(channel),
                delta_k_bound=bounds[channel],
            )
            for channel in channels
        }

    results = run_parallel(repetition, range(repetitions), threads)
    return {channel: [result[channel] for result in results] for channel in channels}
