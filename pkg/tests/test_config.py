"""Strict JSON configuration parsing."""

import json

import numpy as np
import pytest

import mertoneq as mq
from mertoneq.config import load_config, parse_config


def base_raw(**over):
    raw = {
        "grid": {"T": 1.0, "n": 50},
        "market": {"r0": 0.05, "mu": [0.08], "sigma": [[0.2]]},
        "discount": {"variant": "hyperbolic", "k": 1.0, "beta": 1.0},
        "utility": {"variant": "power", "a": 1.0, "gamma": 0.5},
    }
    raw.update(over)
    return raw


def test_parse_minimal_config():
    cfg = parse_config(base_raw())
    assert cfg.grid.steps == 50
    assert isinstance(cfg.discount, mq.Hyperbolic)
    assert isinstance(cfg.utility, mq.PowerUtility)
    assert cfg.solve.method == "closedform"
    assert cfg.out_dir == "out"


def test_unknown_field_rejected():
    with pytest.raises(mq.ValidationError, match="unknown fields"):
        parse_config(base_raw(bogus=1))
    with pytest.raises(mq.ValidationError, match="unknown fields"):
        parse_config(base_raw(solve={"method": "pde", "nx": 100}))


def test_missing_section_rejected():
    raw = base_raw()
    del raw["market"]
    with pytest.raises(mq.ValidationError, match="missing fields"):
        parse_config(raw)


def test_discount_variants():
    for disc, cls in [
        ({"variant": "exponential", "delta0": 0.1}, mq.Exponential),
        ({"variant": "mixture", "weights": [0.4, 0.6], "rates": [0.1, 0.3]}, mq.Mixture),
        ({"variant": "karp", "base": 0.1, "slope": 0.1}, mq.KarpRate),
    ]:
        cfg = parse_config(base_raw(discount=disc))
        assert isinstance(cfg.discount, cls)
    with pytest.raises(mq.ValidationError, match="variant"):
        parse_config(base_raw(discount={"variant": "quasi"}))


def test_karp_config_rate_is_linear():
    cfg = parse_config(base_raw(discount={"variant": "karp", "base": 0.1, "slope": 0.2}))
    assert cfg.discount.value(0.5) == pytest.approx(np.exp(-(0.1 * 0.5 + 0.1 * 0.25)), rel=1e-8)


def test_utility_parameter_errors_propagate():
    with pytest.raises(mq.ValidationError, match="gamma in \\(0, 1\\)"):
        parse_config(base_raw(utility={"variant": "power", "a": 1.0, "gamma": 1.5}))


def test_invalid_solve_method():
    with pytest.raises(mq.ValidationError, match="solve.method"):
        parse_config(base_raw(solve={"method": "spectral"}))


def test_settings_sections_parse():
    cfg = parse_config(base_raw(
        simulate={"x0": 2.0, "paths": 77, "seed": 5, "workers": 2},
        verify={"paths": 123, "consumption_scale": 2.0, "checkpoints": [0.0, 0.5]},
        compare={"delta_base": 0.2},
        out_dir="elsewhere",
    ))
    assert cfg.simulate.paths == 77 and cfg.simulate.workers == 2
    assert cfg.verify.consumption_scale == 2.0
    assert cfg.verify.checkpoints == (0.0, 0.5)
    assert cfg.compare.delta_base == 0.2
    assert cfg.out_dir == "elsewhere"


def test_load_config_file_errors(tmp_path):
    with pytest.raises(mq.ValidationError, match="cannot read"):
        load_config(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(mq.ValidationError, match="cannot read"):
        load_config(str(bad))
    good = tmp_path / "good.json"
    good.write_text(json.dumps(base_raw()))
    assert load_config(str(good)).grid.steps == 50
