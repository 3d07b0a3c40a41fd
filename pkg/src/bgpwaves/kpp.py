"""Forced-speed nonlocal KPP waves.

Solves ``w'' + c w' + w * int_{-inf}^x A (-w') = 0`` with ``w(-inf) = 1`` and
``w(+inf) = 0`` for a nonincreasing kernel ``A`` by shooting from the left
along the unstable manifold of ``w = 1``.  The one-parameter family of
trajectories is indexed by the left amplitude ``eps``; larger ``eps`` moves
the front left and lowers ``w(0)``.  Trajectories whose cumulated nonlocal
term exceeds ``c**2/4`` cross zero, so the critical wave is the boundary
between decaying and crossing trajectories.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import _shoot
from .config import NumericsConfig
from .errors import (BgpWavesError, ConfigError, DomainError, NoWave, NoWaveAtHeight,
                     NumericError, RangeError, ToleranceError, UnresolvedTail)
from .profiles import (Grid, LeftTail, Profile, RightTail, cumulative_integral,
                       fit_right_tail, make_grid, read_profile_csv, weighted_integral)

# a Decayed trajectory must have dropped below this at the right edge,
# otherwise the domain is too short to hold the front
RESOLVED_FLOOR = 1e-6
EPS_MAX = 1e-3


# --------------------------------------------------------------------------
# kernel


class Kernel:
    """Nonincreasing kernel ``A`` with limits ``abar = A(-inf)`` and ``aunderbar = A(+inf)``."""

    def __init__(self, profile: Profile, abar: Optional[float] = None,
                 aunderbar: Optional[float] = None, name: str = ""):
        v = profile.values
        if np.any(v < 0):
            raise ConfigError("kernel must be nonnegative")
        if np.any(np.diff(v) > 1e-12 * max(1.0, float(np.max(np.abs(v))))):
            i = int(np.argmax(np.diff(v) > 0))
            raise ConfigError(f"kernel is not nonincreasing near x={profile.grid.nodes[i]:.6g}")
        self.profile = profile
        self.abar = float(profile.left.limit if abar is None else abar)
        if aunderbar is None:
            aunderbar = 0.0 if profile.right.rate > 0 else float(v[-1])
        self.aunderbar = float(aunderbar)
        if not self.abar >= self.aunderbar >= 0:
            raise ConfigError("kernel limits must satisfy abar >= aunderbar >= 0")
        if self.abar <= 0:
            raise ConfigError("kernel must be positive at -inf")
        self.name = name
        self._packed = None
        self._on_grid = {}

    # construction ----------------------------------------------------------

    @classmethod
    def constant(cls, value: float, grid: Optional[Grid] = None) -> "Kernel":
        grid = grid or make_grid(-30.0, 30.0, 61)
        return cls(Profile.constant(grid, value), value, value, name=f"const({value:g})")

    @classmethod
    def from_function(cls, func: Callable, dfunc: Optional[Callable] = None,
                      grid: Optional[Grid] = None, abar: Optional[float] = None,
                      aunderbar: Optional[float] = None, name: str = "") -> "Kernel":
        """Sample an analytic kernel; exact slopes give a C1 Hermite interpolant."""
        grid = grid or make_grid(-40.0, 40.0, 3201)
        x = grid.nodes
        v = np.asarray(func(x), dtype=float)
        s = None if dfunc is None else np.asarray(dfunc(x), dtype=float)
        left, right = auto_tails(x, v, abar, aunderbar)
        prof = Profile(grid, v, left, right, slopes=s)
        return cls(prof, abar, aunderbar, name=name)

    @classmethod
    def from_samples(cls, grid: Grid, values, slopes=None, abar=None, aunderbar=None,
                     name: str = "") -> "Kernel":
        v = np.asarray(values, dtype=float)
        left, right = auto_tails(grid.nodes, v, abar, aunderbar)
        return cls(Profile(grid, v, left, right, slopes=slopes), abar, aunderbar, name=name)

    @classmethod
    def from_csv(cls, path) -> "Kernel":
        try:
            p = read_profile_csv(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read kernel {path}: {exc}") from None
        return cls.from_samples(p.grid, p.values, name=str(path))

    @classmethod
    def logistic(cls, top: float = 2.0, grid: Optional[Grid] = None) -> "Kernel":
        """``top / (1 + e^x)``: the standard smooth step from ``top`` to 0."""

        def f(x):
            return top * np.exp(-np.logaddexp(0.0, x))

        def df(x):
            return -top * 0.25 / np.cosh(0.5 * x) ** 2

        return cls.from_function(f, df, grid, top, 0.0, name=f"logistic({top:g})")

    # evaluation ------------------------------------------------------------

    def __call__(self, x):
        return self.profile.interp(x)

    def deriv(self, x):
        return self.profile.interp(x, 1)

    def packed(self):
        """Arrays consumed by the compiled integrator."""
        if self._packed is None:
            p = self.profile
            spl = p._spline
            left, right = p.left, p.right
            tail = np.array([left.limit, left.amplitude, left.rate,
                             float(p.values[-1]), right.rate, float(right.poly_degree)])
            self._packed = (np.ascontiguousarray(spl.x), np.ascontiguousarray(spl.c), tail)
        return self._packed

    def on_grid(self, grid: Grid) -> Profile:
        """The kernel resampled (values and slopes) on another grid."""
        if grid.same_as(self.profile.grid):
            return self.profile
        key = id(grid)
        hit = self._on_grid.get(key)
        if hit is not None and hit[0] is grid:
            return hit[1]
        x = grid.nodes
        v = np.minimum.accumulate(self.profile.interp(x))
        s = np.minimum(self.profile.interp(x, 1), 0.0)
        left, right = auto_tails(x, v, self.abar, self.aunderbar)
        prof = Profile(grid, v, left, right, slopes=s)
        self._on_grid = {key: (grid, prof)}
        return prof

    def scaled(self, factor: float) -> "Kernel":
        p = self.profile
        slopes = None if p.slopes is None else p.slopes * factor
        prof = Profile(p.grid, p.values * factor,
                       LeftTail(p.left.limit * factor, p.left.amplitude * factor, p.left.rate),
                       p.right, slopes=slopes)
        return Kernel(prof, self.abar * factor, self.aunderbar * factor, name=self.name)

    def point_where(self, level: float) -> float:
        """A point ``x`` with ``A(x) = level`` (bisection on the monotone kernel)."""
        g = self.profile.grid
        if not (self.profile.values[-1] <= level <= self.profile.values[0]):
            raise DomainError(f"kernel does not take the value {level:g} on its grid")
        if self.profile.values[0] == level:
            return g.xL
        return brentq(lambda x: float(self(x)) - level, g.xL, g.xR, xtol=1e-14, rtol=1e-15)


def auto_tails(x, v, abar=None, aunderbar=None):
    """Exponential tails matched to the two outermost samples of a kernel."""
    abar = float(v[0]) if abar is None else float(abar)
    gap = abar - v[0]
    rate_l = 0.0
    if gap > 0 and abar - v[1] > gap:
        rate_l = math.log((abar - v[1]) / gap) / (x[1] - x[0])
    left = LeftTail(abar, max(gap, 0.0), rate_l) if gap > 0 else LeftTail(abar)
    rate_r = 0.0
    if (aunderbar is None or aunderbar == 0.0) and v[-1] > 0 and v[-2] > v[-1]:
        rate_r = math.log(v[-2] / v[-1]) / (x[-1] - x[-2])
    return left, RightTail(rate_r)


# --------------------------------------------------------------------------
# waves


@dataclass(frozen=True, eq=False)
class WaveSolution:
    w: Profile
    c: float
    theta: float
    i_value: float
    lam: float
    critical: bool
    residual: float
    log_w: np.ndarray
    q: np.ndarray
    J: np.ndarray
    eps: float
    kernel: Kernel = field(repr=False)
    tail_degree: int = 0
    start: str = "left"

    @property
    def grid(self) -> Grid:
        return self.w.grid

    @property
    def one_minus_w(self) -> np.ndarray:
        return -np.expm1(self.log_w)

    @property
    def dw(self) -> np.ndarray:
        return np.array(self.w.slopes)

    @property
    def lambda_(self) -> float:
        return self.lam

    def summary(self) -> dict:
        return {"c": self.c, "theta": self.theta, "i_value": self.i_value,
                "lambda": self.lam, "residual": self.residual, "critical": self.critical}


@dataclass(frozen=True)
class ShootOutcome:
    kind: str  # Decayed | CrossedZero | TurnedUp | Diverged
    x: Optional[float] = None
    wave: Optional[WaveSolution] = None
    resolved: bool = True


@dataclass
class _Shot:
    status: int
    last: int
    x_stop: float
    states: np.ndarray


def wave_grid(cfg: NumericsConfig) -> Grid:
    return make_grid(cfg.x_left, cfg.x_right, cfg.n_core, cfg.stretch)


def _default_grids(cfg: NumericsConfig):
    """The configured grid, then copies with the right end doubled up to ``x_right_max``.

    Slowly decaying waves (heights near 1) need long right domains; the node
    count grows in proportion so the spacing stays put.
    """
    xr = cfg.x_right
    width = cfg.x_right - cfg.x_left
    while True:
        m = int(round((cfg.n_core - 1) * (xr - cfg.x_left) / width))
        yield make_grid(cfg.x_left, xr, m + 1, cfg.stretch)
        if xr >= cfg.x_right_max:
            return
        xr = min(2.0 * xr, cfg.x_right_max)


def _on_default_grids(cfg: NumericsConfig, grid: Optional[Grid], solve: Callable):
    if grid is not None:
        return solve(grid)
    for g in _default_grids(cfg):
        try:
            return solve(g)
        except UnresolvedTail as exc:
            last = exc
    raise last


def _mu(c: float, abar: float) -> float:
    return 0.5 * (-c + math.sqrt(c * c + 4.0 * abar))


class _Shooter:
    """Shared setup for repeated shots with one (kernel, c, grid)."""

    def __init__(self, kernel: Kernel, c: float, grid: Grid, cfg: NumericsConfig):
        if not c > 0:
            raise DomainError("speed must be positive")
        self.kernel, self.c, self.grid, self.cfg = kernel, float(c), grid, cfg
        self.kb, self.kc, self.ktail = kernel.packed()
        self.mu = _mu(c, kernel.abar)
        i0 = grid.index_of(0.0)
        if i0 is None:
            raise ConfigError("wave grid must contain x = 0 as a node")
        self.i0 = i0

    def check_left(self):
        gap = self.kernel.abar - float(self.kernel(self.grid.xL))
        if gap > self.cfg.tail_tol * max(1.0, self.kernel.abar):
            raise ConfigError(
                f"left end {self.grid.xL:g} is not in the flat region of the kernel "
                f"(abar - A(xL) = {gap:.3g})")

    def run(self, y0, atol_scale: float, start: int = 0) -> _Shot:
        out = np.full((len(self.grid), 3), np.nan)
        atol = np.full(3, self.cfg.ode_atol * atol_scale)
        st, last, xs = _shoot.integrate(self.grid.nodes, start, np.asarray(y0, dtype=float),
                                        self.c, self.kb, self.kc, self.ktail, atol,
                                        self.cfg.ode_rtol, out)
        return _Shot(int(st), int(last), float(xs), out)

    def shot_eps(self, log_eps: float) -> _Shot:
        eps = math.exp(log_eps)
        y0 = (math.log1p(-eps), self.mu * eps / (1.0 - eps), self.kernel.abar * eps)
        return self.run(y0, eps)

    def shot_gamma(self, log_gap: float) -> _Shot:
        """Start ``w(a) = 1 - e^log_gap``, ``w'(a) = 0`` at the left grid end."""
        a = self.grid.xL
        gap = math.exp(log_gap)
        y0 = (math.log1p(-gap), 0.0, float(self.kernel(a)) * gap)
        return self.run(y0, min(1.0, gap))

    def crossed(self, shot: _Shot) -> bool:
        return shot.status != _shoot.REACHED_END

    def theta_of(self, shot: _Shot) -> float:
        return math.exp(shot.states[self.i0, 0])

    def resolved(self, shot: _Shot) -> bool:
        return shot.status == _shoot.REACHED_END and shot.states[-1, 0] < math.log(RESOLVED_FLOOR)


_KIND = {_shoot.REACHED_END: "Decayed", _shoot.CROSSED: "CrossedZero",
         _shoot.TURNED_UP: "TurnedUp", _shoot.DIVERGED: "Diverged"}


def _build_wave(sh: _Shooter, shot: _Shot, eps: float, critical: bool,
                start: str = "left") -> WaveSolution:
    grid = sh.grid
    st = shot.states
    log_w, q, J = st[:, 0].copy(), st[:, 1].copy(), st[:, 2].copy()
    w = np.exp(log_w)
    dw = -q * w
    if start == "left":
        left = LeftTail(1.0, float(-np.expm1(log_w[0])), sh.mu)
    else:
        left = LeftTail(float(w[0]))
    provisional = Profile(grid, w, left, RightTail(), slopes=dw, monotone=True)
    window = sh.cfg.fit_window or max(8, len(grid) // 6)
    fit = fit_right_tail(provisional, window)
    if critical:
        fit_deg = 1
        rate = fit.rate if fit.poly_degree == 1 else 0.5 * sh.c
    else:
        fit_deg, rate = fit.poly_degree, fit.rate
    rate = max(rate, 0.0)
    prof = Profile(grid, w, left, RightTail(rate, fit_deg), slopes=dw, monotone=True,
                   name="w")
    a_right = float(sh.kernel(grid.xR))
    # the tail beyond xR adds int_{xR}^inf A (-w') ~ A(xR) w(xR)
    i_value = float(J[-1] + a_right * w[-1])
    ws = WaveSolution(prof, sh.c, float(w[sh.i0]), i_value, float(rate), critical, 0.0,
                      log_w, q, J, eps, sh.kernel, fit_deg, start)
    return _with_residual(ws)


def _with_residual(ws: WaveSolution) -> WaveSolution:
    r = residual(ws, ws.kernel)
    return WaveSolution(ws.w, ws.c, ws.theta, ws.i_value, ws.lam, ws.critical, r, ws.log_w,
                        ws.q, ws.J, ws.eps, ws.kernel, ws.tail_degree, ws.start)


def shoot(kernel: Kernel, c: float, eps: float, cfg: Optional[NumericsConfig] = None,
          grid: Optional[Grid] = None) -> ShootOutcome:
    """One forward trajectory from ``w = 1 - eps`` at the left end of the grid."""
    cfg = cfg or NumericsConfig()
    grid = grid or wave_grid(cfg)
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    sh = _Shooter(kernel, c, grid, cfg)
    sh.check_left()
    shot = sh.shot_eps(math.log(eps))
    kind = _KIND[shot.status]
    if shot.status != _shoot.REACHED_END:
        return ShootOutcome(kind, shot.x_stop)
    return ShootOutcome(kind, None, _build_wave(sh, shot, eps, False), sh.resolved(shot))


# --------------------------------------------------------------------------
# bisections


def _log_eps_bounds(cfg: NumericsConfig):
    return math.log(1e-300), math.log(EPS_MAX)


def _critical_log_eps(sh: _Shooter) -> tuple:
    """Bracket ``(s_ok, s_cross)`` of the decaying/crossing boundary in ``log eps``."""
    lo, hi = _log_eps_bounds(sh.cfg)
    if sh.crossed(sh.shot_eps(lo)):
        raise NumericError("even the smallest left amplitude crosses zero")
    shot_hi = sh.shot_eps(hi)
    if not sh.crossed(shot_hi):
        raise ConfigError(
            "no crossing trajectory found at the largest left amplitude; "
            "widen the domain to the left")
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if sh.crossed(sh.shot_eps(mid)):
            hi = mid
        else:
            lo = mid
    return lo, hi


def _critical_from_shooter(sh: _Shooter) -> WaveSolution:
    c, cfg = sh.c, sh.cfg
    s_ok, _ = _critical_log_eps(sh)
    shot = sh.shot_eps(s_ok)
    if not sh.resolved(shot):
        raise UnresolvedTail(
            f"critical wave at c={c:g} does not decay within x <= {sh.grid.xR:g} "
            f"(w(xR)={math.exp(shot.states[-1, 0]):.3g}); raise x_right_max")
    ws = _build_wave(sh, shot, math.exp(s_ok), True)
    target = 0.25 * c * c
    gap = abs(ws.i_value - target)
    if gap > cfg.crit_tol * target:
        raise ToleranceError(
            f"criticality identity fails at c={c:g}: |I - c^2/4| = {gap:.3g}", gap=gap)
    return ws


def _check_speed(kernel: Kernel, c: float):
    if not c > 2.0 * math.sqrt(kernel.aunderbar):
        raise NoWave(f"no wave: c={c:g} <= 2 sqrt(A(+inf)) = {2 * math.sqrt(kernel.aunderbar):g}")


def critical_wave(kernel: Kernel, c: float, cfg: Optional[NumericsConfig] = None,
                  grid: Optional[Grid] = None) -> WaveSolution:
    """The minimal-height wave, with ``I(w) = c**2/4``."""
    cfg = cfg or NumericsConfig()
    lo_c, hi_c = 2.0 * math.sqrt(kernel.aunderbar), 2.0 * math.sqrt(kernel.abar)
    if not lo_c < c < hi_c:
        raise RangeError(f"critical waves need {lo_c:g} < c < {hi_c:g}, got c={c:g}")

    def on(g):
        sh = _Shooter(kernel, c, g, cfg)
        sh.check_left()
        return _critical_from_shooter(sh)

    return _on_default_grids(cfg, grid, on)


def _solve_on(sh: _Shooter, theta: float, s_max: float, theta_c: Optional[float]) -> WaveSolution:
    cfg = sh.cfg
    lo, _ = _log_eps_bounds(cfg)
    cache = {}

    def f(s):
        shot = sh.shot_eps(s)
        if sh.crossed(shot):
            # only possible numerically right at the boundary
            return -1.0
        cache[s] = shot
        return sh.theta_of(shot) - theta

    f_hi = f(s_max)
    if f_hi > 0:
        if theta_c is None:
            raise DomainError(
                f"height {theta:g} needs a larger left amplitude than allowed; widen the domain")
        raise NoWaveAtHeight(f"theta={theta:g} below the minimal height {theta_c:.6g}",
                             theta_c=theta_c)
    if f(lo) < 0:
        raise DomainError(f"height {theta:g} is too close to 1 for this domain")
    s = brentq(f, lo, s_max, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    shot = cache.get(s) or sh.shot_eps(s)
    if abs(sh.theta_of(shot) - theta) > cfg.value_tol:
        raise NumericError(f"could not match w(0)={theta:g} (got {sh.theta_of(shot):.12g})")
    if not sh.resolved(shot):
        raise UnresolvedTail(
            f"wave with w(0)={theta:g} does not decay within x <= {sh.grid.xR:g}; "
            "raise x_right_max")
    return _build_wave(sh, shot, math.exp(s), False)


def solve_wave(kernel: Kernel, c: float, theta: float, cfg: Optional[NumericsConfig] = None,
               grid: Optional[Grid] = None) -> WaveSolution:
    """The wave with ``w(0) = theta``."""
    cfg = cfg or NumericsConfig()
    _check_speed(kernel, c)
    if not 0 < theta < 1:
        raise DomainError("theta must lie in (0, 1)")

    def on(g):
        sh = _Shooter(kernel, c, g, cfg)
        sh.check_left()
        if c < 2.0 * math.sqrt(kernel.abar):
            crit = _critical_from_shooter(sh)
            if theta < crit.theta:
                raise NoWaveAtHeight(f"theta={theta:g} below the minimal height {crit.theta:.6g}",
                                     theta_c=crit.theta)
            if theta == crit.theta:
                return crit
            return _solve_on(sh, theta, math.log(crit.eps), crit.theta)
        return _solve_on(sh, theta, _log_eps_bounds(cfg)[1], None)

    return _on_default_grids(cfg, grid, on)


def solve_wave_from_left_point(kernel: Kernel, c: float, x0: float, ell0: float,
                               cfg: Optional[NumericsConfig] = None,
                               grid: Optional[Grid] = None,
                               require_resolved: bool = True) -> WaveSolution:
    """Wave started at the left grid end with zero slope, matched to ``w(x0) = ell0``.

    The left end ``a`` carries ``w(a) = gamma``, ``w'(a) = 0`` and the
    nonlocal term starts from ``A(a) (1 - gamma)``; ``gamma`` is found by
    bisection, the map ``gamma -> w(x0)`` being increasing.  Needs
    ``c >= 2 sqrt(A(-inf))``.
    """
    cfg = cfg or NumericsConfig()
    grid = grid or wave_grid(cfg)
    if c < 2.0 * math.sqrt(kernel.abar) * (1 - 1e-12):
        raise RangeError(f"left-point waves need c >= 2 sqrt(A(-inf)) = {2 * math.sqrt(kernel.abar):g}")
    if not 0 < ell0 < 1:
        raise DomainError("ell0 must lie in (0, 1)")
    if not grid.xL < x0 < grid.xR:
        raise DomainError("x0 must lie inside the grid")
    sh = _Shooter(kernel, c, grid, cfg)

    def value_at(shot, x):
        p = Profile(grid, np.exp(shot.states[:, 0]), slopes=-shot.states[:, 1] * np.exp(shot.states[:, 0]))
        return float(p.interp(x))

    def f(u):
        shot = sh.shot_gamma(u)
        if sh.crossed(shot):
            raise NumericError(f"left-point shot with 1 - gamma = {math.exp(u):.6g} did not decay")
        return value_at(shot, x0) - ell0

    # parametrize gamma = 1 - e^u so gamma near 1 is resolved
    u_lo, u_hi = math.log(1.0 - ell0), -700.0
    if f(u_lo) > 0:
        raise NumericError("w(x0) exceeds ell0 already at gamma = ell0")
    if f(u_hi) < 0:
        raise NumericError("w(x0) stays below ell0 even for gamma -> 1; x0 too far right")
    u = brentq(f, u_hi, u_lo, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=300)
    shot = sh.shot_gamma(u)
    if require_resolved and not sh.resolved(shot):
        raise DomainError("left-point wave does not decay within the domain")
    return _build_wave(sh, shot, math.exp(u), False, start="point")


# --------------------------------------------------------------------------
# family


@dataclass
class FamilyResult:
    c: float
    thetas: list
    waves: list  # WaveSolution or None per theta
    errors: list  # exception or None per theta
    theta_c: Optional[float]
    i_values: list
    critical: Optional[WaveSolution] = None


def thread_count(cfg: Optional[NumericsConfig] = None) -> int:
    env = os.environ.get("BGPWAVES_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("BGPWAVES_THREADS must be an integer") from None
    if cfg is not None and cfg.threads > 0:
        return cfg.threads
    return max(1, min(8, os.cpu_count() or 1))


def parallel_map(func, items: Sequence, cfg: Optional[NumericsConfig] = None) -> list:
    """Map preserving input order; exceptions are returned in place of results."""

    def guarded(item):
        try:
            return func(item)
        except BgpWavesError as exc:
            return exc

    n = thread_count(cfg)
    if n == 1 or len(items) <= 1:
        return [guarded(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(guarded, items))


def _family_on(kernel: Kernel, c: float, thetas: list, cfg: NumericsConfig, grid: Grid):
    sh = _Shooter(kernel, c, grid, cfg)
    sh.check_left()
    crit = None
    s_max = _log_eps_bounds(cfg)[1]
    if c < 2.0 * math.sqrt(kernel.abar):
        crit = _critical_from_shooter(sh)
        s_max = math.log(crit.eps)
    theta_c = None if crit is None else crit.theta

    def one(theta):
        if not 0 < theta < 1:
            raise DomainError("theta must lie in (0, 1)")
        if crit is not None:
            if theta < crit.theta:
                raise NoWaveAtHeight(f"theta={theta:g} below the minimal height {crit.theta:.6g}",
                                     theta_c=crit.theta)
            if theta == crit.theta:
                return crit
        return _solve_on(sh, theta, s_max, theta_c)

    return crit, parallel_map(one, thetas, cfg)


def wave_family(kernel: Kernel, c: float, thetas: Sequence[float],
                cfg: Optional[NumericsConfig] = None, grid: Optional[Grid] = None) -> FamilyResult:
    """Waves at several heights; per-height failures are reported, not raised."""
    cfg = cfg or NumericsConfig()
    _check_speed(kernel, c)
    thetas = list(thetas)
    grids = [grid] if grid is not None else list(_default_grids(cfg))
    for k, g in enumerate(grids):
        crit, results = _family_on(kernel, c, thetas, cfg, g)
        # a member that needs a longer domain reruns the whole family, so all share one grid
        if k == len(grids) - 1 or not any(isinstance(r, UnresolvedTail) for r in results):
            break
    theta_c = None if crit is None else crit.theta
    waves = [r if isinstance(r, WaveSolution) else None for r in results]
    errors = [r if isinstance(r, BaseException) else None for r in results]
    ok = sorted(((ws.theta, ws) for ws in waves if ws is not None), key=lambda t: t[0])
    # I is constant along the family of a constant kernel
    strict_i = kernel.abar > kernel.aunderbar
    for (t1, w1), (t2, w2) in zip(ok, ok[1:]):
        if t1 < t2:
            if not np.all(w1.log_w < w2.log_w) or (strict_i and not w1.i_value > w2.i_value):
                raise NumericError(f"family members at theta={t1:g} and {t2:g} are not ordered")
    return FamilyResult(float(c), list(thetas), waves, errors, theta_c,
                        [None if ws is None else ws.i_value for ws in waves], crit)


# --------------------------------------------------------------------------
# diagnostics


def criticality_integral(ws: WaveSolution, kernel: Optional[Kernel] = None) -> float:
    """``I(w) = int A (-w')`` by quadrature."""
    kernel = kernel or ws.kernel
    a = kernel.on_grid(ws.grid)
    return weighted_integral(a, ws.w, weight="neg_derivative_of_q")


def criticality_integral_by_parts(ws: WaveSolution, kernel: Optional[Kernel] = None) -> float:
    """``I(w) = w(-inf) A(-inf) + int A' w`` (integration by parts)."""
    kernel = kernel or ws.kernel
    a = kernel.on_grid(ws.grid)
    return ws.w.left.limit * kernel.abar - weighted_integral(ws.w, a, weight="neg_derivative_of_q")


def residual(ws: WaveSolution, kernel: Optional[Kernel] = None) -> float:
    """Max over interior nodes of the integrated-form defect, divided by ``A(-inf)``.

    ``w''`` is the average of the two one-sided second derivatives of the
    Hermite interpolant at each node.
    """
    kernel = kernel or ws.kernel
    g = ws.grid
    x = g.nodes
    a = kernel.on_grid(g)
    w = ws.w.values
    dw = ws.w.node_derivative()
    h = np.diff(x)
    # one-sided second derivatives of the cubic Hermite pieces at their ends
    dv = np.diff(w) / h
    d2_left_end = (2 * dw[:-1] + 4 * dw[1:] - 6 * dv) / h  # at x_{i+1} from piece i
    d2_right_start = (6 * dv - 4 * dw[:-1] - 2 * dw[1:]) / h  # at x_i from piece i
    d2 = 0.5 * (d2_left_end[:-1] + d2_right_start[1:])
    # nonlocal term with the integration-by-parts form
    cum = cumulative_integral(ws.w, a, weight="neg_derivative_of_q")
    if ws.start == "left":
        nonlocal_term = kernel.abar - a.values * w - cum
    else:
        # started at the left grid end: the integral runs from there
        nonlocal_term = float(a.values[0]) - a.values * w - (cum - cum[0])
    defect = d2 + ws.c * dw[1:-1] + w[1:-1] * nonlocal_term[1:-1]
    return float(np.max(np.abs(defect)) / kernel.abar)


@dataclass
class DecayReport:
    gamma0: float
    gamma0_tilde: float
    left_rate: float
    right_rate: float
    right_degree: int
    q: np.ndarray
    psi: np.ndarray
    left_ok: bool
    right_ok: bool
    left_violations: int
    right_violations: int
    decay_K: Optional[float] = None
    critical_ok: Optional[bool] = None

    @property
    def ok(self) -> bool:
        return self.left_ok and self.right_ok and self.critical_ok is not False


def decay_diagnostics(ws: WaveSolution, kernel: Optional[Kernel] = None,
                      rel_tol: float = 1e-9) -> DecayReport:
    """Decay bounds at both ends with the explicit rates of the estimates."""
    kernel = kernel or ws.kernel
    x = ws.grid.nodes
    a0 = float(kernel(0.0))
    th, c = ws.theta, ws.c
    gamma0 = a0 * th / (math.sqrt(kernel.abar) + c)
    gamma0t = a0 * (1.0 - th) / c
    one_m = ws.one_minus_w
    left = x <= 0
    bound_l = (1.0 - th) * np.exp(gamma0 * x[left])
    viol_l = int(np.sum(one_m[left] > bound_l * (1 + rel_tol)))
    right = x > 0
    log_bound_r = math.log(th) + gamma0t * (1.0 / c - x[right])
    viol_r = int(np.sum(ws.log_w[right] > log_bound_r + rel_tol))
    # left rate from the decay of 1 - w on the leftmost tenth of the grid
    sel = np.where(left & (one_m > 1e-12))[0][: max(4, len(x) // 10)]
    left_rate = float("nan")
    if sel.size >= 4:
        left_rate = float(np.polyfit(x[sel], np.log(one_m[sel]), 1)[0])
    q = np.array(ws.q)
    with np.errstate(divide="ignore"):
        psi = -ws.dw / one_m
    K = None
    crit_ok = None
    if ws.critical:
        far = x >= 1.0
        ratio = np.exp(ws.log_w[far] + 0.5 * c * x[far]) / x[far]
        K = float(np.max(ratio))
        # bounded ratio: the tail must not outgrow the constant seen in the bulk
        crit_ok = bool(ratio[-1] <= K * (1 + 1e-9))
    return DecayReport(gamma0, gamma0t, left_rate, ws.lam, ws.tail_degree, q, psi,
                       viol_l == 0, viol_r == 0, viol_l, viol_r, K, crit_ok)


def critical_crossings(waves: Sequence[WaveSolution], kernel: Optional[Kernel] = None,
                       abs_tol: float = 1e-10) -> list:
    """Sign changes of ``w_c1 - w_c2`` for consecutive critical waves, where ``A < abar``.

    Recorded only; nothing is asserted about whether critical waves may intersect.
    Differences below ``abs_tol`` are treated as ties and skipped.
    """
    waves = sorted(waves, key=lambda ws: ws.c)
    rows = []
    for a, b in zip(waves, waves[1:]):
        k = kernel or a.kernel
        x = a.grid.nodes
        x = x[(x >= b.grid.nodes[0]) & (x <= b.grid.nodes[-1])]
        x = x[np.asarray(k(x)) < k.abar * (1.0 - 1e-12)]
        d = np.asarray(a.w.interp(x)) - np.asarray(b.w.interp(x))
        keep = np.abs(d) > abs_tol
        s, xs = np.sign(d[keep]), x[keep]
        flips = np.where(s[1:] != s[:-1])[0]
        rows.append({"c_low": a.c, "c_high": b.c, "crossings": int(flips.size),
                     "first_x": float(0.5 * (xs[flips[0]] + xs[flips[0] + 1])) if flips.size
                     else math.nan})
    return rows
