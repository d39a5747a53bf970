import pytest

from wvlab.components.detector import SplitDetector
from wvlab.components.optics import BeamParams, StConfig, WvConfig
from wvlab.scenario import load_scenario


@pytest.fixture
def beam():
    return BeamParams(sigma=1.075e-3, wavelength=780e-9, n_photons=1.0)


@pytest.fixture
def wv():
    return WvConfig(phi=0.38, lever_arm=0.34, power=1.45e-3)


@pytest.fixture
def st():
    return StConfig(focal_length=1.0, power=400e-6)


@pytest.fixture
def detector():
    return SplitDetector(alpha_cal=0.66, sigma_J=5e-7, v_total=1.0, sample_time=8e-6)


@pytest.fixture
def preset():
    """Load a shipped scenario by name."""
    return load_scenario


@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch):
    for name in ("WVLAB_LOG_LEVEL", "WVLAB_THREADS", "WVLAB_OUT_DIR"):
        monkeypatch.delenv(name, raising=False)
