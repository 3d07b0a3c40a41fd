"""Grid-sampled scalar functions with analytic exponential tails.

A :class:`Profile` stores node values on a :class:`Grid` and extends them
outside ``[xL, xR]`` with closed-form tails.  Integrals are split into a core
part (Gauss-Legendre on every grid interval, applied to the C1 cubic
interpolants) and tail parts integrated exactly from the tail descriptors.

Tail descriptors are turned into short lists of *terms* ``(coef, rate, deg)``
meaning ``coef * t**deg * exp(rate * t)`` with ``t`` measured from the grid
edge; products, derivatives and integrals of such lists are exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .errors import DivergenceError, FitError

Weight = Literal["one", "exp_y", "neg_derivative_of_q"]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(3)


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True, eq=False)
class Grid:
    nodes: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 16:
            raise ValueError("a grid needs at least 16 nodes")
        if not np.all(np.isfinite(x)) or np.any(np.diff(x) <= 0):
            raise ValueError("grid nodes must be finite and strictly increasing")
        if not (x[0] < 0.0 < x[-1]):
            raise ValueError("grid must straddle the origin (xL < 0 < xR)")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)

    @property
    def xL(self) -> float:
        return float(self.nodes[0])

    @property
    def xR(self) -> float:
        return float(self.nodes[-1])

    def __len__(self):
        return self.nodes.size

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    def index_of(self, x: float) -> Optional[int]:
        """Index of a node equal to ``x`` (within 1e-12), else None."""
        i = int(np.searchsorted(self.nodes, x))
        for j in (i - 1, i):
            if 0 <= j < self.nodes.size and abs(self.nodes[j] - x) <= 1e-12 * max(1.0, abs(x)):
                return j
        return None

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            len(self) == len(other) and np.array_equal(self.nodes, other.nodes)
        )


def make_grid(xL: float, xR: float, n_core: int, stretch: float = 1.0) -> Grid:
    """Graded grid on ``[xL, xR]``, densest at 0, with 0 as a node.

    Local spacing follows ``h(x) ~ 1 + (stretch - 1) (x/X)**2`` on each side
    (``X`` the half-width), so boundary spacing is about ``stretch`` times the
    spacing at the centre; ``stretch=1`` gives uniform spacing.
    """
    if not xL < xR:
        raise ValueError("need xL < xR")
    if not (xL < 0.0 < xR):
        raise ValueError("need xL < 0 < xR")
    if n_core < 16:
        raise ValueError("n_core must be at least 16")
    if stretch < 1.0:
        raise ValueError("stretch must be >= 1")
    k = stretch - 1.0

    def xi_len(X):
        return X if k == 0 else X * math.atan(math.sqrt(k)) / math.sqrt(k)

    def x_of_xi(xi, X):
        return xi if k == 0 else X * np.tan(xi * math.sqrt(k) / X) / math.sqrt(k)

    XLh, XRh = -xL, xR
    lenL, lenR = xi_len(XLh), xi_len(XRh)
    m = n_core - 1
    nL = int(round(m * lenL / (lenL + lenR)))
    nL = min(max(nL, 1), m - 1)
    nR = m - nL
    left = -x_of_xi(np.linspace(lenL, 0.0, nL + 1), XLh)
    right = x_of_xi(np.linspace(0.0, lenR, nR + 1), XRh)
    left[0], right[-1] = xL, xR
    nodes = np.concatenate([left[:-1], [0.0], right[1:]])
    return Grid(nodes)


# --------------------------------------------------------------------------
# exponential-polynomial tail terms

Term = tuple  # (coef, rate, deg)


def _terms_mul(a: Sequence[Term], b: Sequence[Term]) -> list:
    return [(ca * cb, ra + rb, da + db) for ca, ra, da in a for cb, rb, db in b]


def _terms_deriv(a: Sequence[Term]) -> list:
    out = []
    for c, r, d in a:
        if r != 0.0:
            out.append((c * r, r, d))
        if d > 0:
            out.append((c * d, r, d - 1))
    return out


def _antideriv(rate: float, deg: int, t: float) -> float:
    """Antiderivative of ``t**deg * exp(rate*t)``; supports t = +-inf."""
    if math.isinf(t):
        if rate == 0.0 or (t > 0) == (rate > 0):
            raise DivergenceError(
                f"tail term t^{deg} exp({rate:g} t) is not integrable at {t}"
            )
        return 0.0
    if rate == 0.0:
        return t ** (deg + 1) / (deg + 1)
    s = 0.0
    for j in range(deg + 1):
        s += (-1) ** j * math.factorial(deg) / math.factorial(deg - j) * t ** (deg - j) / rate ** (j + 1)
    return math.exp(rate * t) * s


def _terms_integral(terms: Iterable[Term], t0: float, t1: float) -> float:
    total = 0.0
    for c, r, d in terms:
        if c == 0.0:
            continue
        total += c * (_antideriv(r, d, t1) - _antideriv(r, d, t0))
    return total


def _terms_eval(terms: Iterable[Term], t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for c, r, d in terms:
        out += c * t**d * np.exp(r * t)
    return out


@dataclass(frozen=True)
class LeftTail:
    """``v(x) = limit - amplitude * exp(rate * (x - xL))`` for ``x < xL``."""

    limit: float
    amplitude: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("left tail rate must be nonnegative")

    def terms(self) -> list:
        out = [(self.limit, 0.0, 0)]
        if self.amplitude != 0.0:
            out.append((-self.amplitude, self.rate, 0))
        return out


@dataclass(frozen=True)
class RightTail:
    """``v(x) = v(xR) ((x - xR) [deg=1] + 1) exp(-rate (x - xR))`` for ``x > xR``."""

    rate: float = 0.0
    poly_degree: int = 0

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("right tail rate must be nonnegative")
        if self.poly_degree not in (0, 1):
            raise ValueError("poly_degree must be 0 or 1")

    def terms(self, edge_value: float) -> list:
        out = [(edge_value, -self.rate, 0)]
        if self.poly_degree == 1:
            out.append((edge_value, -self.rate, 1))
        return out


# --------------------------------------------------------------------------
# profiles


@dataclass(frozen=True, eq=False)
class Profile:
    grid: Grid
    values: np.ndarray
    left: LeftTail = None
    right: RightTail = field(default_factory=RightTail)
    slopes: Optional[np.ndarray] = None
    monotone: bool = False
    name: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise ValueError("one value per grid node is required")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        # ties are tolerated only where the values sit at float resolution of
        # the left limit (1 - eps rounds to a handful of doubles)
        d = np.diff(v)
        bad = (d > 0) | ((d == 0) & (np.abs(v[1:] - v[0]) > 1e-12 * max(1.0, abs(v[0]))))
        if self.monotone and np.any(bad):
            i = int(np.argmax(bad))
            raise ValueError(
                f"profile flagged decreasing is not strictly decreasing near x={self.grid.nodes[i]:.6g}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.slopes is not None:
            s = np.array(self.slopes, dtype=float)
            if s.shape != v.shape or not np.all(np.isfinite(s)):
                raise ValueError("slopes must be finite, one per node")
            s.setflags(write=False)
            object.__setattr__(self, "slopes", s)
        if self.left is None:
            object.__setattr__(self, "left", LeftTail(limit=float(v[0])))

    # -- construction helpers

    @classmethod
    def constant(cls, grid: Grid, value: float, name: str = "") -> "Profile":
        return cls(grid, np.full(len(grid), float(value)), LeftTail(float(value)),
                   RightTail(0.0), slopes=np.zeros(len(grid)), name=name)

    @classmethod
    def from_function(cls, grid: Grid, func, dfunc=None, left=None, right=None,
                      monotone=False, name="") -> "Profile":
        x = grid.nodes
        vals = np.asarray(func(x), dtype=float)
        slopes = None if dfunc is None else np.asarray(dfunc(x), dtype=float)
        return cls(grid, vals, left, right or RightTail(), slopes, monotone, name)

    def with_tails(self, left=None, right=None) -> "Profile":
        return Profile(self.grid, self.values, left or self.left, right or self.right,
                       self.slopes, self.monotone, self.name)

    # -- evaluation

    @cached_property
    def _spline(self):
        x = self.grid.nodes
        if self.slopes is not None:
            return CubicHermiteSpline(x, self.values, self.slopes, extrapolate=False)
        return PchipInterpolator(x, self.values, extrapolate=False)

    def _left_terms(self):
        return self.left.terms()

    def _right_terms(self):
        return self.right.terms(float(self.values[-1]))

    def __call__(self, x, nu: int = 0):
        return self.interp(x, nu)

    def interp(self, x, nu: int = 0):
        """Value (``nu=0``) or derivative (``nu=1,2``) at ``x``."""
        xa = np.asarray(x, dtype=float)
        scalar = xa.ndim == 0
        xa = np.atleast_1d(xa)
        out = np.empty_like(xa)
        g = self.grid
        lo, hi = xa < g.xL, xa > g.xR
        core = ~(lo | hi)
        if np.any(core):
            xc = xa[core]
            if nu == 0:
                # exact node hits return stored values bit-for-bit
                idx = np.searchsorted(g.nodes, xc)
                idx = np.clip(idx, 0, len(g) - 1)
                hit = g.nodes[idx] == xc
                vals = self._spline(xc, nu)
                vals[hit] = self.values[idx[hit]]
                out[core] = vals
            else:
                out[core] = self._spline(xc, nu)
        if np.any(lo):
            terms = self._left_terms()
            for _ in range(nu):
                terms = _terms_deriv(terms)
            out[lo] = _terms_eval(terms, xa[lo] - g.xL)
        if np.any(hi):
            terms = self._right_terms()
            for _ in range(nu):
                terms = _terms_deriv(terms)
            out[hi] = _terms_eval(terms, xa[hi] - g.xR)
        return float(out[0]) if scalar else out

    def derivative(self, x, nu: int = 1):
        return self.interp(x, nu)

    def node_derivative(self) -> np.ndarray:
        """First derivative at the nodes (stored slopes when available)."""
        if self.slopes is not None:
            return np.array(self.slopes)
        return self._spline(self.grid.nodes, 1)


# --------------------------------------------------------------------------
# quadrature


def _check_same_grid(p: Profile, q: Optional[Profile]):
    if q is not None and not p.grid.same_as(q.grid):
        raise ValueError("weighted integrals need both profiles on the same grid")


def _integrand(p: Profile, q: Optional[Profile], weight: Weight, x: np.ndarray) -> np.ndarray:
    f = p.interp(x)
    if weight == "neg_derivative_of_q":
        if q is None:
            raise ValueError("neg_derivative_of_q needs a q profile")
        return -f * q.interp(x, 1)
    if q is not None:
        f = f * q.interp(x)
    if weight == "exp_y":
        f = f * np.exp(x)
    elif weight != "one":
        raise ValueError(f"unknown weight {weight!r}")
    return f


def _tail_terms(p: Profile, q: Optional[Profile], weight: Weight, side: str) -> list:
    edge = p.grid.xL if side == "left" else p.grid.xR
    pt = p._left_terms() if side == "left" else p._right_terms()
    if q is None:
        gt = [(1.0, 0.0, 0)]
    else:
        gt = q._left_terms() if side == "left" else q._right_terms()
    if weight == "neg_derivative_of_q":
        gt = [(-c, r, d) for c, r, d in _terms_deriv(gt)]
    elif weight == "exp_y":
        gt = _terms_mul(gt, [(math.exp(edge), 1.0, 0)])
    return _terms_mul(pt, gt)


def _core_panels(a: float, b: float, nodes: np.ndarray):
    inner = nodes[(nodes > a) & (nodes < b)]
    brk = np.concatenate([[a], inner, [b]])
    mid = 0.5 * (brk[1:] + brk[:-1])
    half = 0.5 * (brk[1:] - brk[:-1])
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    return brk, pts, half


def weighted_integral(p: Profile, q: Optional[Profile] = None, lower: float = -np.inf,
                      upper: float = np.inf, weight: Weight = "one") -> float:
    """Integral of ``p * q``, ``p * q * e^y`` or ``p * (-q')`` over ``[lower, upper]``.

    ``q=None`` stands for the constant 1.  Raises :class:`DivergenceError` when
    a tail makes the integral infinite (e.g. ``exp_y`` against a right decay
    rate <= 1).
    """
    _check_same_grid(p, q)
    if not lower < upper:
        return 0.0
    g = p.grid
    total = 0.0
    a, b = max(lower, g.xL), min(upper, g.xR)
    if a < b:
        _, pts, half = _core_panels(a, b, g.nodes)
        vals = _integrand(p, q, weight, pts.ravel()).reshape(pts.shape)
        total += float(np.sum(half * (vals @ _GL_W)))
    if lower < g.xL:
        terms = _tail_terms(p, q, weight, "left")
        total += _terms_integral(terms, lower - g.xL, min(upper, g.xL) - g.xL)
    if upper > g.xR:
        terms = _tail_terms(p, q, weight, "right")
        total += _terms_integral(terms, max(lower, g.xR) - g.xR, upper - g.xR)
    return total


def cumulative_integral(p: Profile, q: Optional[Profile] = None, weight: Weight = "one",
                        direction: Literal["from_left", "from_right"] = "from_left",
                        tails: bool = True) -> np.ndarray:
    """Node values of ``int_{-inf}^{x_i}`` (from_left) or ``int_{x_i}^{+inf}`` (from_right).

    With ``tails=False`` the integrals start at the grid end instead of infinity.
    """
    _check_same_grid(p, q)
    g = p.grid
    _, pts, half = _core_panels(g.xL, g.xR, g.nodes)
    vals = _integrand(p, q, weight, pts.ravel()).reshape(pts.shape)
    pieces = half * (vals @ _GL_W)
    out = np.empty(len(g))
    if direction == "from_left":
        out[0] = _terms_integral(_tail_terms(p, q, weight, "left"), -np.inf, 0.0) if tails else 0.0
        out[1:] = out[0] + np.cumsum(pieces)
    elif direction == "from_right":
        out[-1] = _terms_integral(_tail_terms(p, q, weight, "right"), 0.0, np.inf) if tails else 0.0
        out[:-1] = out[-1] + np.cumsum(pieces[::-1])[::-1]
    else:
        raise ValueError(direction)
    return out


# --------------------------------------------------------------------------
# tail fitting


@dataclass(frozen=True)
class TailFit:
    rate: float
    poly_degree: int
    residual: float


def fit_right_tail(p: Profile, window: int = 0) -> TailFit:
    """Least-squares fit of ``log v`` on the rightmost ``window`` nodes.

    Two models are tried, ``log v = a - r x`` and ``log v = a + log x - r x``
    (the latter only when the window lies in ``x > 0``); the one with the
    smaller RMS residual wins.
    """
    n = len(p.grid)
    window = window or max(8, n // 6)
    window = min(window, n)
    x = p.grid.nodes[-window:]
    v = p.values[-window:]
    if np.any(v <= 0):
        raise FitError("tail fit needs positive values over the window")
    y = np.log(v)
    design = np.column_stack([np.ones_like(x), -x])
    best = None
    for deg in (0, 1):
        if deg == 1:
            if x[0] <= 0:
                continue
            yy = y - np.log(x)
        else:
            yy = y
        coef, *_ = np.linalg.lstsq(design, yy, rcond=None)
        res = float(np.sqrt(np.mean((design @ coef - yy) ** 2)))
        cand = TailFit(float(coef[1]), deg, res)
        # prefer the simpler model unless the polynomial factor clearly helps
        if best is None or res < 0.5 * best.residual:
            best = cand
    return best


# --------------------------------------------------------------------------
# CSV I/O


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_table_csv(path, columns: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    cols = [np.asarray(columns[k], dtype=float) for k in names]
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(names)
        for row in zip(*cols):
            wr.writerow([_fmt(v) for v in row])
    return path


def read_table_csv(path) -> dict:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    data = []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}:{ln}: expected {len(header)} fields, got {len(row)}")
        try:
            data.append([float(v) for v in row])
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: {exc}") from None
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {h: arr[:, i] for i, h in enumerate(header)}


def write_profile_csv(path, profile: Profile) -> Path:
    return write_table_csv(path, {"x": profile.grid.nodes, "value": profile.values})


def read_profile_csv(path, left: Optional[LeftTail] = None, right: Optional[RightTail] = None,
                     monotone: bool = False) -> Profile:
    cols = read_table_csv(path)
    if set(cols) != {"x", "value"}:
        raise ValueError(f"{path}: header must be 'x,value'")
    return Profile(Grid(cols["x"]), cols["value"], left, right or RightTail(), None, monotone)
