"""Compiled Dormand-Prince integrator for the localized wave system.

State ``(l, q, J)`` with ``l = log w``, ``q = -w'/w`` and ``J`` the cumulated
nonlocal term::

    l' = -q,   q' = q**2 - c q + J,   J' = A(x) q exp(l)

Working with ``log w`` keeps the far-right tail representable and turns the
zero crossing of ``w`` into a finite-x blow-up of ``q``.
"""

import numpy as np
from numba import njit

REACHED_END = 0
CROSSED = 1
TURNED_UP = 2
DIVERGED = 3

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1 = 71 / 57600
_E3 = -71 / 16695
_E4 = 71 / 1920
_E5 = -17253 / 339200
_E6 = 22 / 525
_E7 = -1 / 40


@njit(cache=True, nogil=True)
def kernel_eval(x, kb, kc, ktail):
    """Piecewise-cubic kernel with exponential tails (see ``Kernel.packed``)."""
    m = kb.size - 1
    if x < kb[0]:
        return ktail[0] - ktail[1] * np.exp(ktail[2] * (x - kb[0]))
    if x > kb[m]:
        t = x - kb[m]
        return ktail[3] * (1.0 + ktail[5] * t) * np.exp(-ktail[4] * t)
    i = np.searchsorted(kb, x, side="right") - 1
    if i > m - 1:
        i = m - 1
    if i < 0:
        i = 0
    d = x - kb[i]
    return ((kc[0, i] * d + kc[1, i]) * d + kc[2, i]) * d + kc[3, i]


@njit(cache=True, nogil=True)
def _rhs(x, l, q, J, c, kb, kc, ktail, out):
    out[0] = -q
    out[1] = q * q - c * q + J
    out[2] = kernel_eval(x, kb, kc, ktail) * q * np.exp(l)


@njit(cache=True, nogil=True)
def integrate(nodes, start, y0, c, kb, kc, ktail, atol, rtol, out):
    """Integrate from ``nodes[start]`` to the last node, storing states at nodes.

    Returns ``(status, last_index, x_stop)``.  ``out[i]`` is valid for
    ``start <= i <= last_index``.
    """
    n = nodes.size
    y = y0.copy()
    out[start, 0] = y[0]
    out[start, 1] = y[1]
    out[start, 2] = y[2]
    crit = 0.25 * c * c
    k1 = np.empty(3)
    k2 = np.empty(3)
    k3 = np.empty(3)
    k4 = np.empty(3)
    k5 = np.empty(3)
    k6 = np.empty(3)
    k7 = np.empty(3)
    yt = np.empty(3)
    y5 = np.empty(3)
    h = nodes[start + 1] - nodes[start] if start + 1 < n else 0.0
    for i in range(start, n - 1):
        x = nodes[i]
        xe = nodes[i + 1]
        span = xe - x
        if h > span:
            h = span
        steps = 0
        while x < xe:
            last = False
            h_prop = h
            if x + h >= xe or (xe - (x + h)) < 1e-12 * span:
                h = xe - x
                last = True
            _rhs(x, y[0], y[1], y[2], c, kb, kc, ktail, k1)
            for j in range(3):
                yt[j] = y[j] + h * _A21 * k1[j]
            _rhs(x + _C2 * h, yt[0], yt[1], yt[2], c, kb, kc, ktail, k2)
            for j in range(3):
                yt[j] = y[j] + h * (_A31 * k1[j] + _A32 * k2[j])
            _rhs(x + _C3 * h, yt[0], yt[1], yt[2], c, kb, kc, ktail, k3)
            for j in range(3):
                yt[j] = y[j] + h * (_A41 * k1[j] + _A42 * k2[j] + _A43 * k3[j])
            _rhs(x + _C4 * h, yt[0], yt[1], yt[2], c, kb, kc, ktail, k4)
            for j in range(3):
                yt[j] = y[j] + h * (_A51 * k1[j] + _A52 * k2[j] + _A53 * k3[j] + _A54 * k4[j])
            _rhs(x + _C5 * h, yt[0], yt[1], yt[2], c, kb, kc, ktail, k5)
            for j in range(3):
                yt[j] = y[j] + h * (_A61 * k1[j] + _A62 * k2[j] + _A63 * k3[j]
                                    + _A64 * k4[j] + _A65 * k5[j])
            _rhs(x + h, yt[0], yt[1], yt[2], c, kb, kc, ktail, k6)
            for j in range(3):
                y5[j] = y[j] + h * (_B1 * k1[j] + _B3 * k3[j] + _B4 * k4[j]
                                    + _B5 * k5[j] + _B6 * k6[j])
            _rhs(x + h, y5[0], y5[1], y5[2], c, kb, kc, ktail, k7)
            err = 0.0
            finite = True
            for j in range(3):
                if not np.isfinite(y5[j]):
                    finite = False
                e = h * (_E1 * k1[j] + _E3 * k3[j] + _E4 * k4[j] + _E5 * k5[j]
                         + _E6 * k6[j] + _E7 * k7[j])
                sc = atol[j] + rtol * max(abs(y[j]), abs(y5[j]))
                r = e / sc
                err += r * r
            err = np.sqrt(err / 3.0)
            if not finite or not np.isfinite(err):
                # a blow-up of q past the crossing criterion looks like this
                if y[1] > c or y[2] > crit:
                    return CROSSED, i, x
                h *= 0.25
                if h < 1e-14 * span:
                    return DIVERGED, i, x
                continue
            if err <= 1.0:
                x = xe if last else x + h
                for j in range(3):
                    y[j] = y5[j]
                if y[2] > crit or y[1] > c:
                    return CROSSED, i, x
                if y[1] < 0.0:
                    return TURNED_UP, i, x
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                h_next = h * fac
                if not last:
                    h = h_next
                else:
                    h = max(h_prop, h_next)
            else:
                h *= max(0.2, 0.9 * err ** -0.2)
                if h < 1e-14 * span:
                    return DIVERGED, i, x
            steps += 1
            if steps > 100000:
                return DIVERGED, i, x
        out[i + 1, 0] = y[0]
        out[i + 1, 1] = y[1]
        out[i + 1, 2] = y[2]
    return REACHED_END, n - 1, nodes[n - 1]
