import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostsim.config import SCHEMA_VERSION, emit_config, load_config, parse_config
from ghostsim.errors import ConfigError
from ghostsim.scenarios import builtin, builtin_raw, list_scenarios
from ghostsim.units import MS, NS, S, parse_duration


# -- durations ---------------------------------------------------------------
@pytest.mark.parametrize("text,ticks", [
    ("50ms", 50 * MS), ("51.2ns", 51_200), ("3e5h", 300_000 * 3600 * S), ("1.5s", 1500 * MS),
    ("500 ns", 500 * NS), ("7d", 7 * 24 * 3600 * S), ("12min", 720 * S), (42, 42), ("42", 42),
    (3.0, 3),
])
def test_parse_duration(text, ticks):
    assert parse_duration(text) == ticks


@pytest.mark.parametrize("bad", ["fast", "10 parsecs", "1.5", 1.5, True, "ms"])
def test_parse_duration_rejects(bad):
    with pytest.raises(ValueError):
        parse_duration(bad)


# -- scenario round trips ------------------------------------------------------
@pytest.mark.parametrize("name", list_scenarios())
def test_builtin_round_trips_through_emit(name):
    cfg = builtin(name)
    again = parse_config(json.loads(emit_config(cfg)))
    assert again == cfg
    assert emit_config(again) == emit_config(cfg)


def test_unknown_builtin_is_config_error():
    with pytest.raises(ConfigError):
        builtin_raw("no-such-scenario")


def test_builtin_raw_is_a_copy():
    raw = builtin_raw("timeout-bound")
    raw["seed"] = 99
    assert builtin("timeout-bound").seed == 1


durations = st.one_of(st.integers(1, 10**15), st.sampled_from(["1ms", "50ms", "2s", "51.2ns"]))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), horizon=durations, timeout=durations,
       retries=st.integers(0, 5), n_links=st.integers(1, 5),
       mttf=durations, kind=st.sampled_from(["fixed-timeout", "bfd", "phi-accrual"]))
def test_random_configs_round_trip(seed, horizon, timeout, retries, n_links, mttf, kind):
    links = [[f"L{i}", "A", f"B{i}"] for i in range(n_links)]
    det = {"type": kind, "observer": "o", "link": "L0"}
    if kind == "fixed-timeout":
        det.update(timeout=timeout, retries=retries)
    raw = {"schema_version": SCHEMA_VERSION, "name": "x", "seed": seed, "horizon": horizon,
           "topology": {"type": "links", "links": links},
           "faults": [{"type": "flaps", "flap_mttf": mttf,
                       "down": {"dist": "fixed", "value": "1ms"}}],
           "detectors": [det]}
    cfg = parse_config(raw)
    assert parse_config(json.loads(emit_config(cfg))) == cfg
    assert isinstance(cfg.horizon, int) and cfg.horizon == parse_duration(horizon)


def base():
    return builtin_raw("timeout-bound")


@pytest.mark.parametrize("mutate,path", [
    (lambda r: r["detectors"][0].update(type="psychic"), "detectors[0].type"),
    (lambda r: r["detectors"][2].update(timeout="soon"), "detectors[2].timeout"),
    (lambda r: r["detectors"][1].update(link="L9"), "detectors[1].link"),
    (lambda r: r["detectors"][0].update(bogus=1), "detectors[0].bogus"),
    (lambda r: r["faults"][0].pop("flap_mttf"), "faults[0].flap_mttf"),
    (lambda r: r["faults"][0]["down"].update(dist="cauchy"), "faults[0].down"),
    (lambda r: r.update(horizon=0), "horizon"),
    (lambda r: r.update(seed=-1), "seed"),
    (lambda r: r.update(schema_version=2), "schema_version"),
    (lambda r: r.update(colour="red"), "colour"),
    (lambda r: r["topology"].update(type="hypercube"), "topology.type"),
])
def test_bad_configs_name_the_key(mutate, path):
    raw = base()
    mutate(raw)
    with pytest.raises(ConfigError) as info:
        parse_config(raw)
    assert path in str(info.value)


def test_oae_faults_need_overlay():
    raw = builtin_raw("rlfd-triangle")
    raw["topology"]["oae"] = None
    with pytest.raises(ConfigError, match="faults\\[0\\]"):
        parse_config(raw)


def test_swim_needs_membership_topology():
    raw = base()
    raw["detectors"] = [{"type": "swim"}]
    with pytest.raises(ConfigError, match="swim"):
        parse_config(raw)


def test_load_config_reports_bad_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_with_overrides_revalidates():
    cfg = builtin("timeout-bound")
    assert cfg.with_overrides(seed=5).seed == 5
    with pytest.raises(ConfigError):
        cfg.with_overrides(horizon=-3)
