import numpy as np
import pytest
import yaml

from sharpnuc.scenario import DEFAULTS, Context, ScenarioError, load_scenario


def test_defaults_round_trip():
    sc = load_scenario()
    assert sc.data == DEFAULTS
    assert load_scenario("default").digest() == sc.digest()


def test_yaml_file(tmp_path):
    path = tmp_path / "s.yaml"
    path.write_text(yaml.safe_dump({"E": 3.0, "grid": {"n": 48}}))
    sc = load_scenario(path)
    assert sc["E"] == 3.0 and sc["grid"]["n"] == 48 and sc["grid"]["pmax"] == 8.0


@pytest.mark.parametrize("bad,match", [
    ({"Energy": 4.0}, "unknown key 'Energy'"),
    ({"grid": {"npts": 4}}, "unknown key 'grid.npts'"),
    ({"grid": 4}, "must be a mapping"),
    ({"gamma": 1.0}, "gamma"),
    ({"gamma": 0.4}, "gamma"),
    ({"epsilon": 1.0}, "epsilon"),
    ({"p": [0.5, 1.5]}, "p values"),
    ({"translations": {"bad": [[0, 1, 2]]}}, "coordinates"),
    ({"translations": {"single": [[0, 0, 0, 0]], "light": [[0, 0, 0, 0], [4, 3, 0, 0]],
                       "pair5": [[0, 0, 0, 0]], "quad5": [[0, 0, 0, 0]]}}, "delta"),
])
def test_load_errors(bad, match):
    with pytest.raises(ScenarioError, match=match):
        load_scenario("default", bad)


def test_missing_file():
    with pytest.raises(ScenarioError, match="not found"):
        load_scenario("no-such-scenario")


def test_s2_rejected_with_infrared_message():
    with pytest.raises(ScenarioError, match="infrared"):
        load_scenario("default", {"s": 2})


def test_missing_translation_name():
    with pytest.raises(ScenarioError):
        load_scenario().points("nowhere")


def test_digest_tracks_content():
    a = load_scenario()
    assert a.digest() != load_scenario("default", {"E": 3.5}).digest()
    assert a.digest() != a.with_seed(7).digest()
    assert a.with_seed(None) is a


def test_rng_streams_deterministic_and_distinct():
    a, b = load_scenario(), load_scenario()
    assert np.array_equal(a.rng("x").normal(size=4), b.rng("x").normal(size=4))
    assert not np.array_equal(a.rng("x").normal(size=4), a.rng("y").normal(size=4))
    assert not np.array_equal(a.rng("x").normal(size=4), a.with_seed(1).rng("x").normal(size=4))


def test_eps_pad_default():
    assert load_scenario()["eps_pad"] is None
    assert load_scenario().eps_pad == 0.25
    assert load_scenario("default", {"eps_pad": 0.1}).eps_pad == 0.1


def test_wide_scenario_loads():
    sc = load_scenario("wide")
    assert sc.grid_spec.n == 64
    ctx = Context(sc)
    assert ctx.grid.wrap_radius > 20


def test_context_caches(default_ctx):
    assert default_ctx.grid is default_ctx.grid
    assert default_ctx.refined(24).grid.spec.pmax == default_ctx.grid.spec.pmax
