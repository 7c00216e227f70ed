"""
Closed-form element integrals of the capped power weight

    w(r) = min(n, c * r**(-beta)),   r > 0,

against products of the two P1 hats living on an element [ra, rb].

Gauss points are useless next to the singularity, so every integral is
reduced to moments of r**(-beta) that are evaluated either from their
antiderivatives (log branch when the exponent hits -1) or, on elements
that are narrow relative to their distance from 0, from the binomial
series, which avoids the cancellation the antiderivative difference
suffers there.
"""
from __future__ import annotations

from math import comb

import numpy as np

_SERIES_MAX_RATIO = 0.5
_SERIES_TERMS = 64


def _unit_moments(rho: np.ndarray, beta: float, i: int) -> np.ndarray:
    """int_0^rho (1 + t)**(-beta) * t**i dt for rho > 0."""
    rho = np.asarray(rho, dtype=float)
    out = np.empty_like(rho)
    small = rho <= _SERIES_MAX_RATIO

    if np.any(small):
        rs = rho[small]
        coeff = 1.0
        acc = np.zeros_like(rs)
        power = rs ** (i + 1)
        for k in range(_SERIES_TERMS):
            acc += coeff * power / (k + i + 1)
            coeff *= -(beta + k) / (k + 1)
            power = power * rs
        out[small] = acc

    big = ~small
    if np.any(big):
        rb = rho[big]
        lx = np.log1p(rb)
        acc = np.zeros_like(rb)
        # (v - 1)**i expanded in powers of v, v = 1 + t
        for l in range(i + 1):
            sign = -1.0 if (i - l) % 2 else 1.0
            binom = float(comb(i, l))
            p1 = l - beta + 1.0
            if abs(p1) < 1e-13:
                term = lx
            else:
                term = np.expm1(p1 * lx) / p1
            acc += sign * binom * term
        out[big] = acc
    return out


def power_moments(ua, ub, ra, beta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Moments int_ua^ub r**(-beta) (r - ra)**j dr for j = 0, 1, 2.

    Requires 0 <= ra <= ua <= ub.  With ua == 0 the moments that diverge
    are returned as +inf.
    """
    ua = np.asarray(ua, dtype=float)
    ub = np.asarray(ub, dtype=float)
    ra = np.asarray(ra, dtype=float)
    ua, ub, ra = np.broadcast_arrays(ua, ub, ra)
    w = ub - ua
    d = ua - ra
    nu = [np.zeros(ua.shape) for _ in range(3)]

    at_zero = ua == 0.0
    pos = (~at_zero) & (w > 0)
    for i in range(3):
        e = i + 1.0 - beta
        if np.any(at_zero):
            wz = w[at_zero]
            if e > 0:
                nu[i][at_zero] = wz ** e / e
            else:
                nu[i][at_zero] = np.where(wz > 0, np.inf, 0.0)
        if np.any(pos):
            a = ua[pos]
            nu[i][pos] = a ** e * _unit_moments(w[pos] / a, beta, i)

    with np.errstate(invalid="ignore"):
        m0 = nu[0]
        m1 = nu[1] + np.where(d > 0, d * nu[0], 0.0)
        m2 = nu[2] + np.where(d > 0, 2.0 * d * nu[1] + d * d * nu[0], 0.0)
    return m0, m1, m2


def element_hat_integrals(ra, rb, coeff: float, beta: float, level: float):
    """Integrals of min(level, coeff*r**-beta) * phi_p * phi_q over [ra, rb].

    ``phi_a`` is the hat equal to 1 at ``ra`` and ``phi_b`` the one equal
    to 1 at ``rb``.  ``level = inf`` gives the uncapped weight.

    Returns
    -------
    aa, ab, bb : ndarray
        The local 2x2 matrix entries per element.  ``aa`` and ``ab`` are
        +inf on elements touching 0 when the uncapped integral diverges.
    """
    ra = np.atleast_1d(np.asarray(ra, dtype=float))
    rb = np.atleast_1d(np.asarray(rb, dtype=float))
    h = rb - ra
    m0 = np.zeros_like(ra)
    m1 = np.zeros_like(ra)
    m2 = np.zeros_like(ra)

    if coeff == 0.0 or level == 0.0:
        return m0.copy(), m1.copy(), m2.copy()

    if np.isfinite(level):
        rcut = (coeff / level) ** (1.0 / beta)
        top = np.clip(rcut, ra, rb)
        span = top - ra
        # saturated part [ra, top]: weight == level
        m0 = m0 + level * span
        m1 = m1 + level * span ** 2 / 2.0
        m2 = m2 + level * span ** 3 / 3.0
        ua = top
    else:
        ua = ra

    live = ua < rb
    if np.any(live):
        p0, p1, p2 = power_moments(ua[live], rb[live], ra[live], beta)
        m0[live] += coeff * p0
        m1[live] += coeff * p1
        m2[live] += coeff * p2

    with np.errstate(invalid="ignore"):
        bb = m2 / h ** 2
        ab = m1 / h - bb
        aa = m0 - 2.0 * m1 / h + bb
    # an infinite m0 poisons aa/ab through inf - inf
    div = ~np.isfinite(m0) | ~np.isfinite(m1)
    aa = np.where(div, np.inf, aa)
    ab = np.where(div, np.inf, ab)
    return aa, ab, bb
