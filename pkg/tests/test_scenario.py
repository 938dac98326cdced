from fractions import Fraction

import pytest
import yaml

from lunamarket.errors import ParseError, ValidationError
from lunamarket.scenario import bundled_names, bundled_scenario, load_scenario, parse_scenario
from lunamarket.selenography import MatrixDistances, TilingDistances


def table1_data() -> dict:
    return yaml.safe_load(bundled_scenario("table1").read_text())


def test_bundled_scenarios_load():
    assert {"table1", "reference", "single"} <= set(bundled_names())
    for name in bundled_names():
        load_scenario(bundled_scenario(name))


def test_table1_contents():
    cfg = load_scenario(bundled_scenario("table1"))
    assert cfg.seed == 1 and cfg.mode == "coordinated"
    dist = cfg.distance_model()
    assert isinstance(dist, MatrixDistances)
    assert dist.distance("D_home", "red") == 5.0 and dist.distance("C_home", "red") == 10.0
    assert cfg.coverage_cells() == ["red"]
    (client,) = cfg.client_specs()
    assert client.jobs[0].max_price == 50_000_000


def test_reference_uses_tiling():
    cfg = load_scenario(bundled_scenario("reference"))
    assert cfg.seed == 42 and len(cfg.robots) == 3
    assert isinstance(cfg.distance_model(), TilingDistances)
    assert len(cfg.coverage_cells()) == 42


def test_defaults_recorded_in_resolved_config():
    res = load_scenario(bundled_scenario("table1")).resolved()
    assert res["blockTimeMs"] == 4000
    assert Fraction(res["commissionRate"]) == Fraction(1, 20)
    assert Fraction(res["reputationFloor"]) == Fraction(1, 5)
    assert res["topology"]["earthLatencyMs"] >= 5000
    assert "undercutStep" in res["robots"][0]


def test_digest_stable_and_sensitive():
    a = load_scenario(bundled_scenario("table1"))
    assert a.digest() == load_scenario(bundled_scenario("table1")).digest()
    assert a.with_overrides(seed=2).digest() != a.digest()


@pytest.mark.parametrize("mutate,path", [
    (lambda d: d.pop("seed"), "seed"),
    (lambda d: d.update(seed=-1), "seed"),
    (lambda d: d.pop("durationMs"), "durationMs"),
    (lambda d: d.update(colour="red"), "colour"),
    (lambda d: d["robots"][1].update(speedMps=0), "robots.1.speedMps"),
    (lambda d: d["robots"][0].update(wheels=6), "robots.0.wheels"),
    (lambda d: d["topology"].update(earthLatencyMs=100) if "topology" in d else d.update(
        topology={"earthLatencyMs": 100}), "topology.earthLatencyMs"),
])
def test_validation_paths(mutate, path):
    d = table1_data()
    mutate(d)
    with pytest.raises(ValidationError) as info:
        parse_scenario(d)
    assert info.value.path == path


def test_geography_must_pick_one_model():
    d = table1_data()
    d["geography"]["tilingFrequency"] = 2
    with pytest.raises(ValidationError) as info:
        parse_scenario(d)
    assert info.value.path.startswith("geography")
    del d["geography"]["tilingFrequency"]
    del d["geography"]["explicitDistanceMatrix"]
    with pytest.raises(ValidationError):
        parse_scenario(d)


@pytest.mark.parametrize("mutate", [
    lambda d: d["robots"][0].update(homeCell="nowhere"),
    lambda d: d["robots"][1].update(id="C"),
    lambda d: d["clients"][0]["jobs"][0].update(targetCells=["blue"]),
    lambda d: d["geography"]["explicitDistanceMatrix"]["meters"][0].__setitem__(1, 11),
    lambda d: d.update(commissionRate="3/2"),
])
def test_semantic_errors(mutate):
    d = table1_data()
    mutate(d)
    with pytest.raises(ValidationError):
        parse_scenario(d)


def test_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        load_scenario(tmp_path / "missing.scenario")
    bad = tmp_path / "bad.scenario"
    bad.write_text("seed: [unclosed\n")
    with pytest.raises(ParseError):
        load_scenario(bad)
    lst = tmp_path / "list.scenario"
    lst.write_text("- 1\n- 2\n")
    with pytest.raises(ValidationError):
        load_scenario(lst)
