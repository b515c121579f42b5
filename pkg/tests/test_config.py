import json

import pytest

from hadamard_plateau.config import (ConfigError, RunConfig, auto_s_max, config_from_dict, echo_config,
                                     parse_config)

MINIMAL = {"profile": {"kind": "constant", "value": -1.0}, "curve": {"name": "equator"}, "level": 5,
           "schedule": [1, 2, 3, 4, 5, 6]}


def test_minimal_config_valid():
    cfg = config_from_dict(MINIMAL)
    assert cfg.level == 5 and cfg.schedule == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    assert cfg.profile.s_max == 24.0
    assert cfg.curvature_profile().a == pytest.approx(1.0)


def test_echo_is_stable_and_roundtrips(tmp_path):
    cfg = config_from_dict(MINIMAL)
    text = echo_config(cfg)
    assert text == echo_config(config_from_dict(MINIMAL))
    (tmp_path / "c.json").write_text(text)
    again = parse_config(tmp_path / "c.json")
    assert echo_config(again) == text
    assert set(json.loads(text)) == set(RunConfig().to_dict())


@pytest.mark.parametrize("data,msg", [
    ({"levels": 5}, "unknown field levels"),
    ({"profile": {"kind": "constant", "valu": -1}}, "unknown field profile.valu"),
    ({"profile": {"kind": "constant", "value": 0.0}}, "must be negative"),
    ({"profile": {"kind": "constant", "value": 0.5}}, "must be negative"),
    ({"profile": {"kind": "samples", "grid": [0, 1], "values": [0.0, 0.0]}}, "a = 0"),
    ({"profile": {"kind": "spline"}}, "unknown profile kind"),
    ({"schedule": [2, 1]}, "strictly increasing"),
    ({"profile": {"kind": "constant", "value": -1.0, "s_max": 30.0}, "schedule": [1, 40]}, "below profile.s_max"),
    ({"level": 9}, "level"),
    ({"level": 2.5}, "expected an integer"),
    ({"expansion": {"recenter": 1}}, "expected true/false"),
    ({"schema_version": 7}, "unsupported version"),
    ({"dimension": 2}, "dimension"),
])
def test_rejections(data, msg):
    with pytest.raises(ConfigError, match=msg):
        config_from_dict(data)


def test_missing_and_invalid_files(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_config(tmp_path / "bad.json")


def test_sampled_profile_infers_bound():
    cfg = config_from_dict({"profile": {"kind": "samples", "grid": [0, 1, 2], "values": [-2.0, -3.0, -4.0]}})
    assert cfg.curvature_profile().a == pytest.approx(2 ** 0.5)


def test_auto_s_max():
    assert auto_s_max(1.0, [1, 6]) == 24.0
    assert auto_s_max(10.0, [30.0]) == 32.0
