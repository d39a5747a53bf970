import math

import pytest

from wvlab.units import (
    is_angle_string,
    parse_angle,
    parse_frequency,
    parse_length,
    parse_momentum,
    parse_power,
    parse_time,
)


def test_suffixed_values_become_si():
    assert parse_length("1.075mm") == pytest.approx(1.075e-3)
    assert parse_length("780nm") == pytest.approx(780e-9)
    assert parse_angle("24nrad") == pytest.approx(24e-9)
    assert parse_angle("1.25urad") == pytest.approx(1.25e-6)
    assert parse_time("8us") == pytest.approx(8e-6)
    assert parse_power("1.45mW") == pytest.approx(1.45e-3)
    assert parse_frequency("2kHz") == pytest.approx(2000.0)


def test_plain_numbers_pass_through():
    assert parse_length(0.34) == 0.34
    assert parse_length("1e-06") == pytest.approx(1e-6)
    assert parse_angle(" 0.38 ") == pytest.approx(0.38)
    assert parse_time(1) == 1.0


def test_unknown_unit_is_rejected():
    with pytest.raises(ValueError, match="unknown length unit"):
        parse_length("3furlong")
    with pytest.raises(ValueError):
        parse_angle("24nm")
    with pytest.raises(ValueError):
        parse_length(True)
    with pytest.raises(ValueError):
        parse_length("abc")


def test_angle_strings_are_recognized():
    assert is_angle_string("24nrad")
    assert is_angle_string("0.3 urad")
    assert not is_angle_string("115nm")
    assert not is_angle_string(1.5)
    assert not is_angle_string("0.19")
    assert math.isclose(parse_angle("0.3 urad"), 3e-7)


def test_momenta_are_plain_numbers():
    assert parse_momentum(233.8) == 233.8
    assert parse_momentum("1e3") == 1000.0
    with pytest.raises(ValueError, match="wave number"):
        parse_momentum("24nrad")
    with pytest.raises(ValueError, match="not a momentum"):
        parse_momentum("5mm")
