"""
Exception hierarchy shared by the simulator, the inference layer and the CLI.
"""

from typing import List, Optional


class WvLabError(Exception):
    """Base class for every error raised by wvlab."""


class DomainError(WvLabError, ValueError):
    """A parameter lies outside the domain where a formula is defined."""


class ZeroModulationError(DomainError):
    """A ratio was requested against a modulation that produces no displacement."""


class AliasingError(WvLabError, ValueError):
    """A waveform contains content at or above the Nyquist frequency."""


class InvalidStreamError(WvLabError, TypeError):
    """An RNG stream argument is not a numpy Generator."""


class EmptyBatchError(WvLabError, ValueError):
    """A photon batch holds no photons where at least one is required."""


class EstimationError(WvLabError):
    """An estimator or a fit cannot run on the data it was given."""


class NormalizationError(WvLabError):
    """A density does not integrate to one, or a finite-difference step underflows."""


class LengthMismatchError(WvLabError, ValueError):
    """Traces that must share a length do not."""


class WeakRegimeError(WvLabError):
    """The weak-interaction approximation is violated and strict mode is on."""


class ConfigError(WvLabError):
    """
    A scenario could not be parsed or validated.

    Args:
        message: Summary of the failure
        diagnostics: One line per failing field or syntax location
    """

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []

    def __str__(self) -> str:
        if not self.diagnostics:
            return super().__str__()
        return super().__str__() + "\n" + "\n".join(f"  - {line}" for line in self.diagnostics)
