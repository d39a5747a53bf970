"""
Scenario files: one JSON document describing beam, geometries, drive,
disturbances, detector and run settings. Presets ship in wvlab/presets.
"""

import copy
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from wvlab import __version__
from wvlab.components.detector import SplitDetector
from wvlab.components.optics import (
    BeamParams,
    Port,
    StConfig,
    TechniqueConfig,
    WvConfig,
    photon_number,
    port_probability,
)
from wvlab.components.sampler import DisturbanceSet
from wvlab.components.timeseries import DriveWaveform
from wvlab.errors import ConfigError
from wvlab.units import Angle, Frequency, Length, Time, is_angle_string, parse_angle, parse_length

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PRESET_DIR = Path(__file__).parent / "presets"
CHANNELS = ("wv_dark", "wv_bright", "st")


class RunSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    master_seed: int = Field(ge=0, description="Seed of every random stream in the run")
    duration: Time = Field(default=1.0, gt=0, description="Duration of one spectrum segment (s)")
    sample_time: Time = Field(default=8e-6, gt=0, description="Detector sample time T (s)")
    n_averages: int = Field(default=1, ge=1, description="Segments averaged per spectrum")
    photons_per_sample: Optional[float] = Field(
        default=None, ge=0, description="Fixed input photons per sample; power-derived when unset"
    )
    window: Optional[Time] = Field(default=None, gt=0, description="Estimation window centered on the plateau (s)")
    time_domain_sample_time: Optional[Time] = Field(default=None, gt=0, description="T of the time-domain comparison (s)")
    time_domain_samples: Optional[int] = Field(default=None, ge=2, description="Samples of the time-domain comparison")

    @property
    def total_duration(self) -> float:
        return self.duration * self.n_averages


class SweepSettings(BaseModel):
    """Axes of the parameter sweeps; unused lists stay empty."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    phis: List[Angle] = Field(default_factory=list, description="Post-selection phases (rad)")
    kicks: List[Angle] = Field(default_factory=list, description="Kicks as peak-to-peak equivalent angles (rad)")
    kick_frequency: Frequency = Field(default=7.0, gt=0)
    d_peak_to_peak: List[Length] = Field(default_factory=list, description="Detector modulations for slope fits (m)")
    q_peak_to_peak: List[Angle] = Field(default_factory=list, description="Momentum modulations for slope fits (rad)")
    d_rms: List[Length] = Field(default_factory=list, description="Detector modulation rms for deviation curves (m)")
    q_rms: List[Angle] = Field(default_factory=list, description="Momentum modulation rms q/k0 for deviation curves (rad)")
    modulation_frequency: Frequency = Field(default=28.0, gt=0)
    repetitions: int = Field(default=4, ge=1, description="Plateau windows per Monte Carlo deviation point")
    monte_carlo: bool = Field(default=True, description="Run the simulated pipeline next to the closed forms")
    sigma_range: Tuple[Length, Length] = (250e-6, 2e-3)
    fprime_range: Tuple[Length, Length] = (1e-3, 1.0)
    n_sigma: int = Field(default=40, ge=2)
    n_fprime: int = Field(default=40, ge=2)
    geometry_phi: Optional[Angle] = Field(default=None, gt=0, lt=math.pi)


def _momentum(value: Any, k0: float) -> Any:
    if is_angle_string(value):
        return k0 * parse_angle(value)
    return value


class Scenario(BaseModel):
    """Everything needed to reproduce one run from its seed."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    description: str = ""
    beam: BeamParams
    wv: WvConfig
    st: StConfig
    drive: DriveWaveform = Field(default_factory=DriveWaveform)
    disturbances: DisturbanceSet = Field(default_factory=DisturbanceSet)
    detector: SplitDetector = Field(default_factory=SplitDetector)
    run: RunSettings
    sweep: SweepSettings = Field(default_factory=SweepSettings)

    @model_validator(mode="before")
    @classmethod
    def _angles_to_momenta(cls, data: Any) -> Any:
        """Momentum amplitudes may be written as angles ("24nrad"); they become k0 * angle."""
        if not isinstance(data, dict):
            return data
        beam = data.get("beam")
        if isinstance(beam, BeamParams):
            k0 = beam.k0
        elif isinstance(beam, dict) and "wavelength" in beam:
            try:
                k0 = 2.0 * math.pi / parse_length(beam["wavelength"])
            except (ValueError, ZeroDivisionError):
                return data
        else:
            return data

        data = copy.deepcopy(data)
        drive = data.get("drive")
        if isinstance(drive, dict) and "amplitude" in drive:
            drive["amplitude"] = _momentum(drive["amplitude"], k0)
        disturbances = data.get("disturbances")
        if isinstance(disturbances, dict) and isinstance(disturbances.get("q_mod"), dict):
            q_mod = disturbances["q_mod"]
            if "amplitude" in q_mod:
                q_mod["amplitude"] = _momentum(q_mod["amplitude"], k0)
        return data

    def config_for(self, channel: str) -> TechniqueConfig:
        return self.st if channel == "st" else self.wv

    def port_for(self, channel: str) -> Port:
        return "bright" if channel == "wv_bright" else "dark"

    def input_power(self, channel: str) -> Optional[float]:
        config = self.config_for(channel)
        return config.power if config.power is not None else self.beam.power

    def detected_power(self, channel: str) -> Optional[float]:
        power = self.input_power(channel)
        if power is None or channel == "st":
            return power
        return power * port_probability(self.wv, self.port_for(channel))

    def detector_for(self, channel: str, sample_time: Optional[float] = None) -> SplitDetector:
        """Detector of a channel: own V_total from detected power and the scenario's noise and T."""
        det = self.detector.with_detected_power(self.detected_power(channel))
        det = det.with_sigma_J(self.disturbances.sigma_J)
        return det.with_sample_time(sample_time or self.run.sample_time)

    def mean_photons(self, channel: str, sample_time: Optional[float] = None) -> float:
        """Mean input photons per sample, before post-selection."""
        if self.run.photons_per_sample is not None:
            return self.run.photons_per_sample
        power = self.input_power(channel)
        if power is None:
            raise ConfigError(f"scenario {self.name!r} sets neither a power nor photons_per_sample for {channel}")
        return photon_number(power, self.beam.wavelength, sample_time or self.run.sample_time)

    def with_phi(self, phi: float) -> "Scenario":
        try:
            wv = WvConfig.model_validate({**self.wv.model_dump(), "phi": phi})
        except ValidationError as e:
            raise ConfigError(f"invalid post-selection phase {phi!r}", [f"wv.{line}" for line in _diagnostics(e)]) from e
        return self.model_copy(update={"wv": wv})

    def with_seed(self, seed: Optional[int]) -> "Scenario":
        if seed is None:
            return self
        return self.model_copy(update={"run": self.run.model_copy(update={"master_seed": int(seed)})})


class ResultBundle(BaseModel):
    """summary.json of a CLI run."""
    schema_version: int = SCHEMA_VERSION
    scenario: str
    seed: int
    software_version: str = __version__
    command: str
    outputs: Dict[str, str] = Field(default_factory=dict, description="Output name to path relative to the output dir")
    summary: Dict[str, Any] = Field(default_factory=dict)


def list_presets() -> List[str]:
    return sorted(path.stem for path in PRESET_DIR.glob("*.json"))


def _diagnostics(error: ValidationError) -> List[str]:
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{location}: {item['msg']}")
    return lines


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark is not None else "unknown position"
        raise ConfigError(f"cannot parse {source}", [f"{where}: {getattr(e, 'problem', None) or e}"]) from e
    if not isinstance(data, dict):
        raise ConfigError(f"cannot parse {source}", ["<root>: expected an object"])
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid scenario {source}", _diagnostics(e)) from e


def load_scenario(source: str) -> Scenario:
    """
    Load a scenario from a preset name or a file path.

    Raises:
        ConfigError: Unknown preset, unreadable file, syntax or validation failure
    """
    path = PRESET_DIR / f"{source}.json" if source in list_presets() else Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(
            f"cannot read scenario {source!r}", [f"not a preset ({', '.join(list_presets())}) or a readable file"]
        ) from e
    scenario = parse_scenario(text, str(path))
    logger.info("Scenario loaded", extra={"scenario": scenario.name, "source": str(path)})
    return scenario


def dump_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
