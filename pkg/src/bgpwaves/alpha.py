"""The concave learning technology ``alpha(s)`` and its calculus."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, DomainError


class LearningTech:
    """Base class.  Subclasses provide vectorized ``_eval``, ``_d1``, ``_d2``, ``_inv``."""

    family = "abstract"

    @property
    def alpha1(self) -> float:
        return float(self._eval(np.array([1.0]))[0])

    @property
    def deriv1(self) -> float:
        """``alpha'(1)``."""
        return float(self._d1(np.array([1.0]))[0])

    # public operations -----------------------------------------------------

    def eval(self, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(~np.isfinite(s_arr)) or np.any(s_arr < 0) or np.any(s_arr > 1):
            raise DomainError("alpha is defined on [0, 1]")
        out = self._eval(np.atleast_1d(s_arr))
        return float(out[0]) if s_arr.ndim == 0 else out.reshape(s_arr.shape)

    def deriv(self, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(~np.isfinite(s_arr)) or np.any(s_arr <= 0) or np.any(s_arr > 1):
            raise DomainError("alpha' is defined on (0, 1]")
        out = self._d1(np.atleast_1d(s_arr))
        return float(out[0]) if s_arr.ndim == 0 else out.reshape(s_arr.shape)

    def deriv2(self, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(~np.isfinite(s_arr)) or np.any(s_arr <= 0) or np.any(s_arr > 1):
            raise DomainError("alpha'' is defined on (0, 1]")
        out = self._d2(np.atleast_1d(s_arr))
        return float(out[0]) if s_arr.ndim == 0 else out.reshape(s_arr.shape)

    def inv_deriv(self, p):
        """Smallest ``s`` in (0, 1] with ``alpha'(s) <= p``: 1 when ``p <= alpha'(1)``."""
        p_arr = np.asarray(p, dtype=float)
        if np.any(np.isnan(p_arr)) or np.any(p_arr <= 0):
            raise DomainError("inv_deriv needs p > 0")
        flat = np.atleast_1d(p_arr).astype(float)
        out = np.ones_like(flat)
        inner = flat > self.deriv1
        if np.any(inner):
            out[inner] = self._inv(flat[inner])
        return float(out[0]) if p_arr.ndim == 0 else out.reshape(p_arr.shape)

    def validate(self, kappa: float, rho: float) -> "ValidationReport":
        if not (kappa > 0 and rho > 0):
            raise DomainError("validate needs kappa > 0 and rho > 0")
        s = np.linspace(0.0, 1.0, 401)[1:]
        a = self._eval(s)
        d1 = self._d1(s)
        increasing = bool(np.all(np.diff(np.concatenate([[self._eval(np.zeros(1))[0]], a])) > 0))
        second_diff = a[2:] - 2 * a[1:-1] + a[:-2]
        concave = bool(np.all(second_diff < 0) and np.all(np.diff(d1) < 0))
        a1 = self.alpha1
        tiny = np.array([1e-12])
        alpha2 = bool(self._d1(tiny)[0] > 1e4 * max(1.0, self.deriv1))
        # stiffness flag for near-linear pieces of alpha near s = 1
        curv = -self._d2(np.array([0.9, 0.99, 1.0]))
        stiff = bool(np.any(curv < 1e-6 * max(1.0, abs(self.deriv1))))
        return ValidationReport(
            alpha0=bool(self._eval(np.zeros(1))[0] == 0.0),
            alpha1=increasing and concave,
            alpha1_prime=a1 > kappa**2,
            alpha2=alpha2,
            alpha3=self.deriv1 > 0,
            ro=rho > kappa**2,
            rho_ge_2kappa_sqrt_alpha1=rho >= 2 * kappa * math.sqrt(a1),
            stiff_near_one=stiff,
        )


@dataclass(frozen=True)
class ValidationReport:
    alpha0: bool
    alpha1: bool
    alpha1_prime: bool
    alpha2: bool
    alpha3: bool
    ro: bool
    rho_ge_2kappa_sqrt_alpha1: bool
    stiff_near_one: bool = False

    @property
    def structural(self) -> bool:
        """The standing hypotheses needed by every solver entry."""
        return all((self.alpha0, self.alpha1, self.alpha1_prime, self.alpha2, self.alpha3, self.ro))

    @property
    def all_pass(self) -> bool:
        return self.structural and self.rho_ge_2kappa_sqrt_alpha1

    def failures(self) -> list:
        names = ("alpha0", "alpha1", "alpha1_prime", "alpha2", "alpha3", "ro",
                 "rho_ge_2kappa_sqrt_alpha1")
        return [n for n in names if not getattr(self, n)]

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class Power(LearningTech):
    """``alpha(s) = a0 * s**eta`` with ``0 < eta < 1``."""

    family = "power"

    def __init__(self, a0: float, eta: float):
        if not a0 > 0:
            raise ConfigError("a0 must be positive")
        if not 0 < eta < 1:
            raise ConfigError("eta must lie in (0, 1)")
        self.a0 = float(a0)
        self.eta = float(eta)

    def __repr__(self):
        return f"Power(a0={self.a0:g}, eta={self.eta:g})"

    def _eval(self, s):
        return self.a0 * s**self.eta

    def _d1(self, s):
        return self.a0 * self.eta * s ** (self.eta - 1.0)

    def _d2(self, s):
        return self.a0 * self.eta * (self.eta - 1.0) * s ** (self.eta - 2.0)

    def _inv(self, p):
        return (p / (self.a0 * self.eta)) ** (1.0 / (self.eta - 1.0))

    def to_dict(self):
        return {"family": "power", "a0": self.a0, "eta": self.eta}


class Tabulated(LearningTech):
    """Monotone cubic interpolation of ``(s, alpha(s))`` samples.

    Below the first positive sample the table is continued by the power law
    through the first two positive samples, so that ``alpha'(0+) = inf``.
    """

    family = "tabulated"

    def __init__(self, s, values):
        s = np.asarray(s, dtype=float)
        v = np.asarray(values, dtype=float)
        if s.shape != v.shape or s.ndim != 1:
            raise ConfigError("table needs two equal-length columns")
        keep = s > 0
        if np.any(s < 0) or np.any(s > 1) or not np.isclose(s.max(), 1.0):
            raise ConfigError("table abscissae must lie in [0, 1] and reach 1")
        if np.any(v[~keep] != 0):
            raise ConfigError("alpha(0) must be 0")
        s, v = s[keep], v[keep]
        if s.size < 3 or np.any(np.diff(s) <= 0):
            raise ConfigError("need at least 3 strictly increasing positive abscissae")
        if np.any(np.diff(v) <= 0) or np.any(v <= 0):
            raise ConfigError("tabulated alpha must be positive and increasing")
        self.s = s
        self.values = v
        self._pchip = PchipInterpolator(s, v, extrapolate=False)
        self._dp = self._pchip.derivative()
        self._ddp = self._pchip.derivative(2)
        self.eta_fit = math.log(v[1] / v[0]) / math.log(s[1] / s[0])
        if not 0 < self.eta_fit < 1:
            raise ConfigError("table is not concave near s = 0 (power-law exponent outside (0,1))")
        self.a_fit = v[0] / s[0] ** self.eta_fit

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        from .profiles import read_table_csv

        try:
            cols = read_table_csv(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read alpha table {path}: {exc}") from None
        names = list(cols)
        if len(names) != 2:
            raise ConfigError("alpha table must have two columns")
        return cls(cols[names[0]], cols[names[1]])

    def __repr__(self):
        return f"Tabulated({self.s.size} samples)"

    def _split(self, s):
        return s < self.s[0]

    def _eval(self, s):
        out = np.empty_like(s)
        lo = self._split(s)
        out[lo] = self.a_fit * s[lo] ** self.eta_fit
        out[~lo] = self._pchip(s[~lo])
        return out

    def _d1(self, s):
        out = np.empty_like(s)
        lo = self._split(s)
        with np.errstate(divide="ignore"):
            out[lo] = self.a_fit * self.eta_fit * s[lo] ** (self.eta_fit - 1.0)
        out[~lo] = self._dp(s[~lo])
        return out

    def _d2(self, s):
        out = np.empty_like(s)
        lo = self._split(s)
        out[lo] = self.a_fit * self.eta_fit * (self.eta_fit - 1.0) * s[lo] ** (self.eta_fit - 2.0)
        out[~lo] = self._ddp(s[~lo])
        return out

    def _inv(self, p):
        # bisection on log s; alpha' is decreasing for concave tables
        lo = np.full_like(p, -700.0)
        hi = np.zeros_like(p)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            above = self._d1(np.exp(mid)) > p
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        return np.exp(hi)

    def to_dict(self):
        return {"family": "tabulated", "s": self.s.tolist(), "values": self.values.tolist()}


def from_config(spec: dict) -> LearningTech:
    """Build a technology from the ``alpha`` block of a run configuration."""
    fam = str(spec.get("family", "power")).lower()
    if fam == "power":
        try:
            return Power(float(spec["a0"]), float(spec["eta"]))
        except KeyError as exc:
            raise ConfigError(f"alpha.{exc.args[0]} is required for the power family") from None
    if fam == "tabulated":
        if "table" not in spec:
            raise ConfigError("alpha.table is required for the tabulated family")
        return Tabulated.from_csv(Path(spec["table"]))
    raise ConfigError(f"unknown alpha family {fam!r}")
