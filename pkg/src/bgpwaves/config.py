"""Numerical settings and run configuration (JSON with strict key checking)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .errors import ConfigError


@dataclass(frozen=True)
class NumericsConfig:
    """Domain truncation, grid density, tolerances, damping and iteration caps.

    The wave solver works on ``[x_left, x_right]`` with ``n_core`` nodes; the
    value-slope problem of the growth model lives on ``[-n, n]`` which, for the
    coupled solves, is also the wave grid.
    """

    # grid
    n: float = 40.0
    n_core: int = 1601
    stretch: float = 1.0
    x_left: float = -30.0
    x_right: float = 30.0
    x_right_max: float = 480.0
    # wave solver
    ode_atol: float = 1e-10
    ode_rtol: float = 1e-10
    value_tol: float = 1e-9
    tail_tol: float = 1e-8
    right_floor: float = 1e-200
    residual_tol: float = 1e-3
    fit_window: int = 0
    # growth model
    fp_tol: float = 1e-6
    crit_tol: float = 1e-3
    g_tol: float = 1e-8
    max_iter: int = 200
    damping: float = 0.5
    envelope_points: int = 8
    extend: bool = True
    threads: int = 0

    def __post_init__(self):
        checks = [
            (self.n >= 4, "n must be >= 4"),
            (self.n_core >= 16, "n_core must be >= 16"),
            (self.stretch >= 1.0, "stretch must be >= 1"),
            (self.x_left < 0.0 < self.x_right, "need x_left < 0 < x_right"),
            (self.x_right_max >= self.x_right, "x_right_max must be >= x_right"),
            (0.0 < self.damping <= 1.0, "damping must be in (0, 1]"),
            (self.max_iter >= 1, "max_iter must be >= 1"),
            (self.envelope_points >= 1, "envelope_points must be >= 1"),
        ]
        for name in ("ode_atol", "ode_rtol", "value_tol", "tail_tol", "right_floor",
                     "residual_tol", "fp_tol", "crit_tol", "g_tol"):
            checks.append((getattr(self, name) > 0, f"{name} must be positive"))
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @classmethod
    def from_dict(cls, data: dict) -> "NumericsConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown numerics keys: {sorted(unknown)}")
        kw = {}
        for k, v in data.items():
            typ = known[k].type
            try:
                if typ == "int":
                    if isinstance(v, bool) or float(v) != int(v):
                        raise ValueError
                    kw[k] = int(v)
                elif typ == "bool":
                    if not isinstance(v, bool):
                        raise ValueError
                    kw[k] = v
                else:
                    kw[k] = float(v)
            except (TypeError, ValueError):
                raise ConfigError(f"numerics.{k}: bad value {v!r}") from None
        return cls(**kw)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def updated(self, **kw) -> "NumericsConfig":
        return replace(self, **kw)


_ALPHA_KEYS = {"family", "a0", "eta", "table"}
_TOP_KEYS = {"kappa", "rho", "alpha", "numerics", "mode", "c", "x0", "ell0", "theta", "kernel"}


@dataclass(frozen=True)
class RunConfig:
    """Mirror of the JSON run configuration."""

    kappa: float = 1.0
    rho: float = 3.0
    alpha: dict = field(default_factory=lambda: {"family": "power", "a0": 2.0, "eta": 0.5})
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    mode: str = "critical"
    c: Optional[float] = None
    x0: float = 0.0
    ell0: float = 0.5
    theta: Optional[float] = None
    kernel: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict, base_dir: Optional[Path] = None) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for k in ("kappa", "rho", "c", "x0", "ell0", "theta"):
            if k in data and data[k] is not None:
                try:
                    kw[k] = float(data[k])
                except (TypeError, ValueError):
                    raise ConfigError(f"{k}: expected a number, got {data[k]!r}") from None
        if "mode" in data:
            if data["mode"] not in ("critical", "supercritical"):
                raise ConfigError("mode must be 'critical' or 'supercritical'")
            kw["mode"] = data["mode"]
        if "alpha" in data:
            a = data["alpha"]
            if not isinstance(a, dict):
                raise ConfigError("alpha must be an object")
            bad = set(a) - _ALPHA_KEYS
            if bad:
                raise ConfigError(f"unknown alpha keys: {sorted(bad)}")
            a = dict(a)
            if "table" in a and base_dir is not None and not Path(a["table"]).is_absolute():
                a["table"] = str(base_dir / a["table"])
            kw["alpha"] = a
        if "numerics" in data:
            if not isinstance(data["numerics"], dict):
                raise ConfigError("numerics must be an object")
            kw["numerics"] = NumericsConfig.from_dict(data["numerics"])
        if "kernel" in data and data["kernel"] is not None:
            k = str(data["kernel"])
            if base_dir is not None and not Path(k).is_absolute():
                k = str(base_dir / k)
            kw["kernel"] = k
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(data, base_dir=path.parent)

    def updated(self, **kw) -> "RunConfig":
        return replace(self, **kw)
