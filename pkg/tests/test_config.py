import json

import pytest

from bgpwaves.config import NumericsConfig, RunConfig
from bgpwaves.errors import ConfigError


def test_defaults_roundtrip():
    cfg = NumericsConfig()
    assert NumericsConfig.from_dict(cfg.to_dict()) == cfg


def test_unknown_and_badly_typed_keys():
    with pytest.raises(ConfigError):
        NumericsConfig.from_dict({"n_cores": 10})
    with pytest.raises(ConfigError):
        NumericsConfig.from_dict({"n_core": 10.5})
    with pytest.raises(ConfigError):
        NumericsConfig.from_dict({"extend": "yes"})
    with pytest.raises(ConfigError):
        NumericsConfig(damping=0.0)
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"kappa": 1, "speed": 2})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"alpha": {"family": "power", "a0": 2, "eta": 0.5, "beta": 1}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"mode": "fast"})


def test_load_resolves_relative_paths(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"kappa": 1, "rho": 3, "kernel": "k.csv",
                                "numerics": {"n": 20, "n_core": 801}}))
    rc = RunConfig.load(path)
    assert rc.kernel == str(tmp_path / "k.csv")
    assert rc.numerics.n == 20.0 and rc.numerics.n_core == 801
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "bad.json")
