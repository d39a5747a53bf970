"""
Parsing of suffixed physical quantities ("1.075mm", "24nrad", "8us").

Every parsed value is returned in SI units. Plain numbers pass through
unchanged so scenario files may mix both styles.
"""

import re
from typing import Annotated, Dict, Union

from pydantic import BeforeValidator

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QUANTITY = re.compile(rf"^\s*({_NUMBER})\s*([A-Za-zμµ]*)\s*$")

LENGTH_UNITS: Dict[str, float] = {
    "m": 1.0,
    "cm": 1e-2,
    "mm": 1e-3,
    "um": 1e-6,
    "μm": 1e-6,
    "µm": 1e-6,
    "nm": 1e-9,
    "pm": 1e-12,
}

ANGLE_UNITS: Dict[str, float] = {
    "rad": 1.0,
    "mrad": 1e-3,
    "urad": 1e-6,
    "μrad": 1e-6,
    "µrad": 1e-6,
    "nrad": 1e-9,
}

TIME_UNITS: Dict[str, float] = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "μs": 1e-6, "µs": 1e-6, "ns": 1e-9}

POWER_UNITS: Dict[str, float] = {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "μW": 1e-6, "µW": 1e-6, "nW": 1e-9}

FREQUENCY_UNITS: Dict[str, float] = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6}

Number = Union[int, float, str]


def _split(value: str):
    match = _QUANTITY.match(value)
    if match is None:
        raise ValueError(f"cannot parse quantity {value!r}")
    return float(match.group(1)), match.group(2)


def parse_quantity(value: Number, units: Dict[str, float], kind: str) -> float:
    """
    Convert a number or a suffixed string into SI units.

    Args:
        value: Plain number (already SI) or string such as "230nm"
        units: Suffix table for the quantity
        kind: Name used in error messages ("length", "angle", ...)

    Returns:
        The value in SI units
    """
    if isinstance(value, bool):
        raise ValueError(f"expected a {kind}, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a {kind}, got {type(value).__name__}")
    number, suffix = _split(value)
    if not suffix:
        return number
    if suffix not in units:
        allowed = ", ".join(sorted(units))
        raise ValueError(f"unknown {kind} unit {suffix!r} (expected one of {allowed})")
    return number * units[suffix]


def parse_length(value: Number) -> float:
    return parse_quantity(value, LENGTH_UNITS, "length")


def parse_angle(value: Number) -> float:
    return parse_quantity(value, ANGLE_UNITS, "angle")


def parse_time(value: Number) -> float:
    return parse_quantity(value, TIME_UNITS, "time")


def parse_power(value: Number) -> float:
    return parse_quantity(value, POWER_UNITS, "power")


def parse_frequency(value: Number) -> float:
    return parse_quantity(value, FREQUENCY_UNITS, "frequency")


def parse_momentum(value: Number) -> float:
    """
    Transverse momenta are plain numbers in 1/m.

    An angle needs the beam wave number to become a momentum, so only a
    scenario (which knows the wavelength) accepts one; a length never does.
    """
    if isinstance(value, str):
        number, suffix = _split(value)
        if suffix in ANGLE_UNITS:
            raise ValueError(f"angle {value!r} needs the beam wave number; give it in a scenario or as a momentum in 1/m")
        if suffix:
            raise ValueError(f"{value!r} is not a momentum (expected a plain number in 1/m)")
        return number
    return parse_quantity(value, {}, "momentum")


def is_angle_string(value: object) -> bool:
    """True when value is a string carrying an angle suffix."""
    if not isinstance(value, str):
        return False
    try:
        _, suffix = _split(value)
    except ValueError:
        return False
    return suffix in ANGLE_UNITS


Length = Annotated[float, BeforeValidator(parse_length)]
Angle = Annotated[float, BeforeValidator(parse_angle)]
Time = Annotated[float, BeforeValidator(parse_time)]
Power = Annotated[float, BeforeValidator(parse_power)]
Frequency = Annotated[float, BeforeValidator(parse_frequency)]
Momentum = Annotated[float, BeforeValidator(parse_momentum)]
