from __future__ import annotations

import copy
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cosmos.config import config_to_dict, load_config, parse_config
from cosmos.errors import ConfigError

FIXTURES = ["demo.json", "ring.json", "gradient.json", "wami.json"]


def raw(data_dir, name="demo.json"):
    return json.loads((data_dir / name).read_text())


@pytest.mark.parametrize("name", FIXTURES)
def test_fixtures_parse_and_round_trip(data_dir, name):
    cfg = load_config(data_dir / name)
    once = config_to_dict(cfg)
    again = config_to_dict(parse_config(once, cfg.base_dir))
    assert once == again
    assert parse_config(once, cfg.base_dir) == cfg


def test_wami_fixture_shape(data_dir):
    cfg = load_config(data_dir / "wami.json")
    synth = cfg.synthesizable
    assert len(synth) == 12
    assert cfg.fixed_latencies == {"MatrixInv": 0.05}
    assert all(8 <= c.max_unrolls <= 32 for c in synth)
    assert all(set(c.ports_options) <= {1, 2, 4, 8, 16} for c in synth)
    assert any(16 in c.ports_options for c in synth)
    assert cfg.max_combinations == 10**7


def test_unknown_binding_is_named(data_dir):
    d = raw(data_dir)
    d["graph"]["transitions"][0]["component"] = "nope"
    with pytest.raises(ConfigError, match="unknown binding 'nope'") as exc:
        parse_config(d)
    assert exc.value.field == "graph.transitions[0].component"


def test_json_syntax_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "clock_ns": 1.0,\n  "delta": ,\n}\n')
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d.pop("clock_ns"), "clock_ns"),
        (lambda d: d.update(delta=0), "delta"),
        (lambda d: d.update(extra=1), "extra"),
        (lambda d: d["components"][0].update(ports_options=[1, 3]), "components[0]"),
        (lambda d: d["components"][0].update(gamma_r="x"), "components[0].gamma_r"),
        (lambda d: d["components"][1].update(gamma_r=1), "components[1].gamma_r"),
        (lambda d: d["backend"].update(kind="table"), "backend.table"),
        (lambda d: d["graph"]["transitions"][1].update(delay_ms=1.0), "graph.transitions[1]"),
        (lambda d: d["graph"].update(marking=[0]), "graph"),
    ],
)
def test_field_errors(data_dir, mutate, field):
    d = raw(data_dir)
    mutate(d)
    with pytest.raises(ConfigError) as exc:
        parse_config(d)
    assert exc.value.field == field


def test_seed_precedence(data_dir, monkeypatch):
    assert load_config(data_dir / "demo.json").seed == 7
    monkeypatch.setenv("COSMOS_SEED", "11")
    assert load_config(data_dir / "demo.json").seed == 11
    assert load_config(data_dir / "demo.json", seed=3).seed == 3
    monkeypatch.setenv("COSMOS_SEED", "x")
    with pytest.raises(ConfigError):
        load_config(data_dir / "demo.json")


def test_table_path_relative_to_config(data_dir):
    cfg = load_config(data_dir / "ring.json")
    assert cfg.table_path() == data_dir / "ring_table.csv"


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.1, 10),
    st.floats(0.01, 2),
    st.integers(0, 2**31),
    st.integers(1, 8),
    st.floats(0, 1),
)
def test_round_trip_property(clock, delta, seed, eta, noise):
    from pathlib import Path

    data_dir = Path(__file__).resolve().parents[1] / "src" / "cosmos" / "data"
    d = copy.deepcopy(raw(data_dir))
    d.update(clock_ns=clock, delta=delta, seed=seed)
    d["components"][0].update(eta=eta, noise_rate=noise)
    cfg = parse_config(d)
    assert parse_config(config_to_dict(cfg)) == cfg
    assert config_to_dict(parse_config(config_to_dict(cfg))) == config_to_dict(cfg)
