"""Balanced growth paths of the knowledge-diffusion mean-field game.

A growth path is a traveling wave ``w`` of the nonlocal KPP equation with
kernel ``A = alpha(sigma)`` coupled to the value slope ``z``::

    kappa^2 w'' + c w' + w int_{-inf}^x A (-w') = 0
    -kappa^2 z'' + (c - 2 kappa^2) z' + (rho - kappa^2) z + A w z = 1 - sigma
    sigma(x) = (alpha')^{-1}( e^x / int_x^inf z e^y w )      (1 where saturated)

The policy ``sigma`` is found by damped fixed-point iteration.  On the
critical branch the speed is selected by the normalization
``int_{-inf}^0 e^y min_{c' <= c} w_{c'} = 1/2``; on the supercritical branch
the speed is given and the wave is pinned by ``w(x0) = ell0``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from . import kpp
from .alpha import LearningTech, ValidationReport
from .config import NumericsConfig
from .errors import (BgpWavesError, BracketError, ConfigError, DivergenceError,
                     DomainError, FeasibilityError, NonConvergence, NumericError)
from .kpp import Kernel, WaveSolution
from .profiles import (Grid, LeftTail, Profile, RightTail, cumulative_integral,
                       make_grid, weighted_integral)

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# parameters and classification


@dataclass(frozen=True)
class ModelParams:
    kappa: float
    rho: float
    tech: LearningTech

    def validate(self) -> ValidationReport:
        return self.tech.validate(self.kappa, self.rho)

    @property
    def alpha1(self) -> float:
        return self.tech.alpha1

    @property
    def z_limit(self) -> float:
        return 1.0 / (self.rho - self.kappa**2)

    @property
    def critical_speed_cap(self) -> float:
        """``2 kappa sqrt(alpha(1))``, the top of the critical window."""
        return 2.0 * self.kappa * math.sqrt(self.alpha1)


class Classification(str, enum.Enum):
    SlowGrowthInfeasible = "SlowGrowthInfeasible"
    FastGrowthInfeasible = "FastGrowthInfeasible"
    DiscountInfeasible = "DiscountInfeasible"
    CriticalWindow = "CriticalWindow"
    SupercriticalWindow = "SupercriticalWindow"

    def __str__(self):
        return self.value


def feasibility(params: ModelParams, c: float) -> Classification:
    """Place ``c`` against the necessary window ``2 kappa^2 < c < alpha(1) + kappa^2``, ``c < rho``."""
    k2 = params.kappa**2
    if c <= 2.0 * k2:
        return Classification.SlowGrowthInfeasible
    if c >= params.alpha1 + k2:
        return Classification.FastGrowthInfeasible
    if c >= params.rho:
        return Classification.DiscountInfeasible
    if c < params.critical_speed_cap:
        return Classification.CriticalWindow
    return Classification.SupercriticalWindow


@dataclass(frozen=True)
class TruncationScheme:
    """Half-width ``n`` of the value-slope domain and the cutoff used in the policy integral.

    ``exp``: the integrand is damped by ``min(1, e^{-2(y-n)})`` beyond ``n``;
    ``additive``: the integral stops at ``n`` and ``1/n`` is added.
    """

    n: float
    chi: str = "exp"

    def __post_init__(self):
        if self.n < 4:
            raise ConfigError("truncation half-width n must be >= 4")
        if self.chi not in ("exp", "additive"):
            raise ConfigError("cutoff must be 'exp' or 'additive'")


def model_grid(n: float, cfg: NumericsConfig) -> Grid:
    return make_grid(-n, n, cfg.n_core, cfg.stretch)


# --------------------------------------------------------------------------
# policy


@dataclass(frozen=True, eq=False)
class PolicySolution:
    sigma: Profile
    kernel: Kernel
    x0: Optional[float]
    value_integral: Optional[np.ndarray] = None

    @property
    def grid(self) -> Grid:
        return self.sigma.grid


def policy_from_sigma(sigma_values: np.ndarray, grid: Grid, tech: LearningTech,
                      value_integral=None) -> PolicySolution:
    """Wrap node values of ``sigma`` into a policy with kernel ``alpha(sigma)``."""
    s = np.clip(np.minimum.accumulate(np.asarray(sigma_values, dtype=float)), 0.0, 1.0)
    a = tech.eval(s)
    sat = np.where(s >= 1.0)[0]
    x0 = float(grid.nodes[sat[-1]]) if sat.size else None
    sig = Profile(grid, s, LeftTail(float(s[0])), RightTail(0.0), name="sigma")
    kernel = Kernel.from_samples(grid, a, aunderbar=0.0, name="alpha(sigma)")
    return PolicySolution(sig, kernel, x0, value_integral)


def value_integral(z: Profile, wave: WaveSolution, trunc: TruncationScheme) -> np.ndarray:
    """Node values of ``M(x) = int_x^inf z e^y w chi`` (or ``int_x^n ... + 1/n``)."""
    g = z.grid
    if not g.same_as(wave.grid):
        raise ValueError("z and w must share a grid")
    if np.all(z.values == 0.0) and trunc.chi == "additive":
        return np.full(len(g), 1.0 / trunc.n)
    core = cumulative_integral(z, wave.w, weight="exp_y", direction="from_right", tails=False)
    if trunc.chi == "additive":
        # beyond the last node the additive scheme keeps only 1/n
        return core + 1.0 / trunc.n
    if g.xR < trunc.n - 1e-9:
        raise ValueError("exp cutoff needs the grid to reach n")
    # right tail with damping e^{-2 t}: z constant, w(xR)(1 + d t) e^{-lam t}
    lam, deg = wave.w.right.rate, wave.w.right.poly_degree
    k = 1.0 + lam  # e^{t} e^{-2t} e^{-lam t}
    tail = float(z.values[-1]) * math.exp(g.xR) * float(wave.w.values[-1]) * (1.0 / k + deg / k**2)
    return core + tail


def policy_from_value(z: Profile, wave: WaveSolution, params: ModelParams,
                      trunc: TruncationScheme) -> PolicySolution:
    """Argmax policy ``sigma = (alpha')^{-1}(e^x / M(x))``, saturated at 1."""
    M = value_integral(z, wave, trunc)
    if np.any(M <= 0) or not np.all(np.isfinite(M)):
        raise DivergenceError("policy integral is not positive and finite")
    x = z.grid.nodes
    price = np.exp(x) / M
    sigma = params.tech.inv_deriv(price)
    sigma = np.where(price <= params.tech.deriv1, 1.0, sigma)
    if np.any(np.diff(sigma) > 1e-12):
        raise NumericError("policy is not nonincreasing")
    return policy_from_sigma(sigma, z.grid, params.tech, M)


def initial_policy(grid: Grid, params: ModelParams) -> PolicySolution:
    """``sigma = 1`` for ``x <= 0`` and ``(alpha')^{-1}(e^x (rho - kappa^2))`` for ``x > 0``."""
    x = grid.nodes
    s = params.tech.inv_deriv(np.exp(x) * (params.rho - params.kappa**2))
    s = np.where(x <= 0, 1.0, s)
    return policy_from_sigma(s, grid, params.tech)


# --------------------------------------------------------------------------
# value slope


def solve_z(policy: PolicySolution, wave: WaveSolution, params: ModelParams, c: float,
            trunc: TruncationScheme) -> Profile:
    """Finite differences for the value-slope equation on the policy grid.

    Centered differences, switched to upwinding of the drift in cells whose
    Peclet number ``|c - 2 kappa^2| h / kappa^2`` exceeds 2.
    """
    g = policy.grid
    if not g.same_as(wave.grid):
        raise ValueError("policy and wave must share a grid")
    if not params.rho > params.kappa**2:
        raise DomainError("need rho > kappa^2")
    x = g.nodes
    k2 = params.kappa**2
    b = c - 2.0 * k2
    a = policy.kernel.profile.values
    w = wave.w.values
    react = (params.rho - k2) + a * w
    rhs_full = 1.0 - policy.sigma.values
    zl, zr = 0.0, params.z_limit
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    # diffusion: -k2 * 2/(hm+hp) * ((z+ - z)/hp - (z - z-)/hm)
    dm = -k2 * 2.0 / (hm * (hm + hp))
    dp = -k2 * 2.0 / (hp * (hm + hp))
    lower = dm.copy()
    upper = dp.copy()
    diag = -(dm + dp) + react[1:-1]
    peclet = abs(b) * np.maximum(hm, hp) / k2
    up = peclet > 2.0
    # centered drift
    cm = -b * hp / (hm * (hm + hp))
    cp = b * hm / (hp * (hm + hp))
    c0 = b * (hp - hm) / (hm * hp)
    # upwind drift
    if b >= 0:
        um, u0, upp = -b / hm, b / hm, 0.0 * hm
    else:
        um, u0, upp = 0.0 * hm, -b / hp, b / hp
    lower += np.where(up, um, cm)
    upper += np.where(up, upp, cp)
    diag += np.where(up, u0, c0)
    rhs = rhs_full[1:-1].copy()
    rhs[0] -= lower[0] * zl
    rhs[-1] -= upper[-1] * zr
    m = rhs.size
    ab = np.zeros((3, m))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    try:
        zi = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"value-slope system is singular: {exc}") from None
    z = np.concatenate([[zl], zi, [zr]])
    if not np.all(np.isfinite(z)):
        raise NumericError("value-slope solve produced non-finite values")
    return Profile(g, z, LeftTail(zl), RightTail(0.0), name="z")


# --------------------------------------------------------------------------
# speed selection


class _SpeedCache:
    """Critical waves of one kernel, keyed by speed (model units)."""

    def __init__(self, policy: PolicySolution, params: ModelParams, cfg: NumericsConfig):
        self.policy = policy
        self.params = params
        self.cfg = cfg
        self.k2 = params.kappa**2
        self.kernel = policy.kernel.scaled(1.0 / self.k2)
        self.waves = {}

    def wave(self, c: float) -> WaveSolution:
        hit = self.waves.get(c)
        if hit is None:
            try:
                hit = kpp.critical_wave(self.kernel, c / self.k2, self.cfg, self.policy.grid)
            except BgpWavesError as exc:
                hit = exc
            self.waves[c] = hit
        if isinstance(hit, BaseException):
            raise hit
        return hit


def envelope_speeds(c: float, params: ModelParams, points: int) -> list:
    """Fixed coarse speeds below ``c`` used for the lower envelope."""
    cap = params.critical_speed_cap
    return [cap * k / (points + 1) for k in range(1, points + 1) if cap * k / (points + 1) < c]


@dataclass
class NormalizationResult:
    G: float
    skipped: list
    envelope_gap: float


def _normalization(cache: _SpeedCache, c: float) -> NormalizationResult:
    wc = cache.wave(c)
    g = wc.grid
    env = wc.w.values.copy()
    left_member = wc
    skipped = []
    for cp in envelope_speeds(c, cache.params, cache.cfg.envelope_points):
        try:
            wp = cache.wave(cp)
        except BgpWavesError:
            skipped.append(cp)
            continue
        if wp.w.values[0] < env[0]:
            left_member = wp
        env = np.minimum(env, wp.w.values)
    flat = cache.policy.sigma.values >= 1.0
    gap = float(np.max(wc.w.values[flat] - env[flat])) if np.any(flat) else 0.0
    prof = Profile(g, env, left_member.w.left, RightTail(0.0))
    G = weighted_integral(prof, None, upper=0.0, weight="exp_y")
    return NormalizationResult(G, skipped, gap)


def speed_normalization(policy: PolicySolution, c: float, params: ModelParams,
                        c_grid: Optional[list] = None,
                        cfg: Optional[NumericsConfig] = None) -> float:
    """``G(c) = int_{-inf}^0 e^y min_{c' in c_grid, c' <= c} w_{c'}``; the default grid is the fixed coarse one."""
    cfg = cfg or NumericsConfig()
    cache = _SpeedCache(policy, params, cfg)
    if c_grid is None:
        return _normalization(cache, c).G
    wc = cache.wave(c)
    env = wc.w.values.copy()
    for cp in c_grid:
        if cp < c:
            env = np.minimum(env, cache.wave(cp).w.values)
    prof = Profile(wc.grid, env, wc.w.left, RightTail(0.0))
    return weighted_integral(prof, None, upper=0.0, weight="exp_y")


def select_speed(policy: PolicySolution, params: ModelParams, cfg: Optional[NumericsConfig] = None,
                 guess: Optional[float] = None, cache: Optional[_SpeedCache] = None) -> float:
    """Root of ``G(c) = 1/2`` on ``(0, 2 kappa sqrt(alpha(1)))``."""
    cfg = cfg or NumericsConfig()
    cache = cache or _SpeedCache(policy, params, cfg)
    cap = params.critical_speed_cap

    def f(c):
        return _normalization(cache, c).G - 0.5

    def safe(c):
        try:
            return f(c)
        except BgpWavesError:
            return None

    guess = 0.8 * cap if guess is None else min(max(guess, 0.02 * cap), 0.995 * cap)
    f0 = safe(guess)
    if f0 is None:
        raise BracketError(f"normalization could not be evaluated at c={guess:g}",
                           endpoints=(guess, None))
    step = 0.02 * cap
    a, fa = guess, f0
    while True:
        b = a + step if fa > 0 else a - step
        b = min(max(b, 0.01 * cap), 0.999 * cap)
        fb = safe(b)
        if fb is None or b == a:
            raise BracketError("G(c) - 1/2 does not change sign over the admissible interval",
                               endpoints=((a, fa), (b, fb)))
        if fa * fb <= 0:
            break
        a, fa = b, fb
        step *= 2.0
    lo, hi = (a, b) if a < b else (b, a)
    return brentq(f, lo, hi, xtol=cfg.g_tol * cap, rtol=4 * np.finfo(float).eps)


# --------------------------------------------------------------------------
# fixed point


@dataclass(frozen=True, eq=False)
class BgpSolution:
    c: float
    wave: WaveSolution
    z: Profile
    policy: PolicySolution
    K: float
    nu: Profile
    tail_inequality: float
    params: ModelParams
    trunc: TruncationScheme
    mode: str
    iterations: int
    history: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.wave.grid

    @property
    def i_value(self) -> float:
        """``int alpha(sigma) (-w')`` in model units."""
        return criticality_value(self)


def criticality_value(b) -> float:
    a = b.policy.kernel.on_grid(b.wave.grid)
    return weighted_integral(a, b.wave.w, weight="neg_derivative_of_q")


def _wave_for(policy: PolicySolution, params: ModelParams, cfg: NumericsConfig, mode: str,
              c: Optional[float], x0: float, ell0: float, guess: Optional[float]):
    k2 = params.kappa**2
    if mode == "critical":
        cache = _SpeedCache(policy, params, cfg)
        c_sel = select_speed(policy, params, cfg, guess, cache)
        return c_sel, cache.wave(c_sel)
    kern = policy.kernel.scaled(1.0 / k2)
    # intermediate iterates may decay too slowly to resolve; the final wave is checked
    ws = kpp.solve_wave_from_left_point(kern, c / k2, x0, ell0, cfg, policy.grid,
                                        require_resolved=False)
    return c, ws


def _iterate(params: ModelParams, trunc: TruncationScheme, cfg: NumericsConfig, mode: str,
             policy: PolicySolution, c_fixed: Optional[float], x0: float, ell0: float,
             c_guess: Optional[float], callback: Optional[Callable]):
    omega = cfg.damping
    history = []
    prev = math.inf
    c_cur = c_guess
    for it in range(1, cfg.max_iter + 1):
        c_cur, ws = _wave_for(policy, params, cfg, mode, c_fixed, x0, ell0, c_cur)
        z = solve_z(policy, ws, params, c_cur, trunc)
        new = policy_from_value(z, ws, params, trunc)
        delta = float(np.max(np.abs(new.sigma.values - policy.sigma.values)))
        history.append({"iteration": it, "c": c_cur, "delta": delta, "damping": omega})
        if callback is not None:
            callback(history[-1])
        log.debug("iteration %d: c=%.10g delta=%.3e damping=%.3g", it, c_cur, delta, omega)
        if delta < cfg.fp_tol:
            # keep the iterate that produced (c, w, z) so the triple is consistent
            return policy, c_cur, ws, z, it, history
        if delta > prev:
            omega = max(0.5 * omega, 0.05)
        prev = delta
        mixed = (1.0 - omega) * policy.sigma.values + omega * new.sigma.values
        policy = policy_from_sigma(mixed, policy.grid, params.tech)
    raise NonConvergence(
        f"fixed point did not converge in {cfg.max_iter} iterations "
        f"(last sup|delta sigma| = {history[-1]['delta']:.3g})", history=history)


def _transfer(policy: PolicySolution, grid: Grid, params: ModelParams) -> PolicySolution:
    x = grid.nodes
    s = policy.sigma.interp(np.clip(x, policy.grid.xL, policy.grid.xR))
    # beyond the old domain continue with the saturation value / decaying trend
    return policy_from_sigma(s, grid, params.tech)


def _finish(params, trunc, cfg, mode, policy, c, ws, z, iterations, history) -> BgpSolution:
    rec = reconstruct(c, ws, z, policy, params)
    b = BgpSolution(c, ws, z, policy, rec.K, rec.nu, 2.0 * params.kappa**2 / c, params, trunc,
                    mode, iterations, history, {})
    b.diagnostics.update({
        "criticality_gap": abs(c * c / (4 * params.kappa**2) - criticality_value(b)),
        "bellman_scaled": rec.bellman_scaled,
        "bellman_max": rec.bellman_residual,
        "mass": rec.mass,
        "cutoff": trunc.chi,
        "n": trunc.n,
        "nodes": len(ws.grid),
    })
    return b


def _check_structural(params: ModelParams, need_rho_cap: bool):
    rep = params.validate()
    fails = rep.failures()
    if not need_rho_cap:
        fails = [f for f in fails if f != "rho_ge_2kappa_sqrt_alpha1"]
    if fails:
        raise FeasibilityError(f"hypotheses fail: {', '.join(fails)}")


def bgp_critical(params: ModelParams, trunc: Optional[TruncationScheme] = None,
                 cfg: Optional[NumericsConfig] = None, policy: Optional[PolicySolution] = None,
                 c_guess: Optional[float] = None, callback: Optional[Callable] = None) -> BgpSolution:
    """Critical growth path by damped fixed-point iteration on the policy.

    With ``cfg.extend`` the converged solution is re-solved on ``[-2n, 2n]``
    with twice the nodes, starting from the interpolated policy; the speed
    difference between both levels is reported as ``extension_shift``.
    """
    cfg = cfg or NumericsConfig()
    trunc = trunc or TruncationScheme(cfg.n, "exp")
    _check_structural(params, True)
    grid = model_grid(trunc.n, cfg)
    policy = policy if policy is not None and policy.grid.same_as(grid) else (
        _transfer(policy, grid, params) if policy is not None else initial_policy(grid, params))
    pol, c, ws, z, its, hist = _iterate(params, trunc, cfg, "critical", policy, None, 0.0, 0.0,
                                        c_guess, callback)
    b = _finish(params, trunc, cfg, "critical", pol, c, ws, z, its, hist)
    if cfg.extend:
        cfg2 = replace(cfg, n_core=2 * cfg.n_core - 1, n=2 * trunc.n, extend=False)
        trunc2 = TruncationScheme(2 * trunc.n, trunc.chi)
        pol2 = _transfer(pol, model_grid(trunc2.n, cfg2), params)
        p2, c2, ws2, z2, its2, hist2 = _iterate(params, trunc2, cfg2, "critical", pol2, None,
                                                0.0, 0.0, c, callback)
        b2 = _finish(params, trunc2, cfg2, "critical", p2, c2, ws2, z2, its + its2, hist + hist2)
        b2.diagnostics["extension_shift"] = abs(c2 - c)
        b2.diagnostics["coarse_c"] = c
        b = b2
    gap = b.diagnostics["criticality_gap"]
    target = c * c / (4 * params.kappa**2)
    if gap > cfg.crit_tol * target:
        raise NonConvergence(f"criticality residual {gap:.3g} exceeds tolerance", history=b.history)
    return b


def bgp_supercritical(params: ModelParams, c: float, x0: float = 0.0, ell0: float = 0.5,
                      trunc: Optional[TruncationScheme] = None,
                      cfg: Optional[NumericsConfig] = None,
                      callback: Optional[Callable] = None) -> BgpSolution:
    """Supercritical growth path at prescribed ``c`` with ``w(x0) = ell0``."""
    cfg = cfg or NumericsConfig()
    trunc = trunc or TruncationScheme(cfg.n, "additive")
    _check_structural(params, False)
    cls = feasibility(params, c)
    if cls is not Classification.SupercriticalWindow:
        raise FeasibilityError(f"c={c:g} is not in the supercritical window ({cls})")
    if not -trunc.n < x0 < trunc.n:
        raise DomainError("x0 must lie inside (-n, n)")
    grid = model_grid(trunc.n, cfg)
    policy = initial_policy(grid, params)
    pol, c, ws, z, its, hist = _iterate(params, trunc, cfg, "supercritical", policy, c, x0, ell0,
                                        None, callback)
    if ws.log_w[-1] > math.log(kpp.RESOLVED_FLOOR):
        raise DomainError("converged wave does not decay within [-n, n]; increase n")
    b = _finish(params, trunc, cfg, "supercritical", pol, c, ws, z, its, hist)
    b.diagnostics["w_at_x0"] = float(ws.w.interp(x0))
    return b


# --------------------------------------------------------------------------
# reconstruction


@dataclass(frozen=True, eq=False)
class Reconstruction:
    f: Profile
    nu: Profile
    K: float
    bellman_residual: float
    bellman_scaled: float
    mass: float
    defect: np.ndarray


def reconstruct(c: float, wave: WaveSolution, z: Profile, policy: PolicySolution,
                params: ModelParams) -> Reconstruction:
    if not c < params.rho:
        raise FeasibilityError(f"no growth path with c={c:g} >= rho={params.rho:g}")
    g = wave.grid
    x = g.nodes
    w = wave.w
    mass = weighted_integral(Profile.constant(g, 1.0), w, weight="neg_derivative_of_q")
    f_vals = -w.node_derivative() / mass
    f = Profile(g, f_vals, LeftTail(0.0), RightTail(w.right.rate, w.right.poly_degree), name="f")
    total = weighted_integral(z, w, weight="exp_y")
    K = params.alpha1 / (params.rho - c) * total
    zint = cumulative_integral(z, None, weight="exp_y", direction="from_left")
    nu_vals = zint + K
    ex = np.exp(x)
    zd = z.node_derivative()
    nu = Profile(g, nu_vals, LeftTail(K), RightTail(0.0), slopes=z.values * ex, name="nu")
    # Hamiltonian max_s [(1 - s) e^x + alpha(s) M(x)] with the untruncated M
    M = cumulative_integral(z, w, weight="exp_y", direction="from_right")
    price = ex / M
    s = np.where(price <= params.tech.deriv1, 1.0, params.tech.inv_deriv(price))
    ham = (1.0 - s) * ex + params.tech.eval(s) * M
    k2 = params.kappa**2
    defect = (params.rho - c) * nu_vals + c * z.values * ex - k2 * (z.values + zd) * ex - ham
    inner = defect[1:-1]
    bell = float(np.max(np.abs(inner)))
    return Reconstruction(f, nu, K, bell, bell / math.exp(g.xR), mass, defect)


def reconstruct_bgp(b: BgpSolution, params: Optional[ModelParams] = None) -> Reconstruction:
    """Recover density ``f``, value profile ``nu`` and constant ``K``; report the Bellman defect."""
    params = params or b.params
    return reconstruct(b.c, b.wave, b.z, b.policy, params)
