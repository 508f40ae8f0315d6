"""Smooth cutoff machinery.

Everything here is built from the exponential smoothstep: the plateau
profile that caps the oscillator coefficient, the dyadic partition of
unity, and the band bump used to localize symbols to a weight shell.
All transitions are C-infinity with exactly matched boundary jets.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

PROFILE_DERIV_ORDERS = 6


def smoothstep(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1, strictly increasing between.

    Built from exp(-1/u) bump halves; all derivatives vanish at both ends.
    """
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    out = np.zeros_like(u)
    out[u >= 1.0] = 1.0
    mid = (u > 0.0) & (u < 1.0)
    if mid.any():
        v = u[mid]
        a = np.exp(-1.0 / v)
        b = np.exp(-1.0 / (1.0 - v))
        out[mid] = a / (a + b)
    return float(out[0]) if scalar else out


@lru_cache(maxsize=1)
def _bridge_table():
    # sympy builds the bridge integrand and its t-derivatives once; the
    # mixing weight gamma stays symbolic so one table serves every c'.
    import sympy as sy

    t = sy.Symbol("t", positive=True)
    u = (t - 2) / 2
    phi = sy.exp(-1 / u)
    phic = sy.exp(-1 / (1 - u))
    s = phi / (phi + phic)
    rho = 4 * s * (1 - s)
    gam = sy.Symbol("g", real=True)
    beta = 2 * t * (1 - s) * (1 + gam * rho)
    funcs = []
    expr = beta
    for _ in range(PROFILE_DERIV_ORDERS):
        funcs.append(sy.lambdify((t, gam), expr, "numpy"))
        expr = sy.diff(expr, t)
    return tuple(funcs)


_GLX, _GLW = np.polynomial.legendre.leggauss(64)


def _beta_eval(t, gamma, order=0):
    # clip keeps the lambdified exp(-1/u) away from the 0/0 endpoints;
    # the integrand is flat to all orders there so the clip is exact
    # to machine precision.
    tc = np.clip(np.asarray(t, dtype=float), 2 + 1e-9, 4 - 1e-9)
    return np.asarray(_bridge_table()[order](tc, gamma), dtype=float)


def _bridge_cumint(t, gamma):
    """int_2^t beta, Gauss-Legendre, vectorized over t in [2, 4]."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    half = (t - 2) / 2
    nodes = 2 + half[:, None] * (_GLX[None, :] + 1)
    vals = _beta_eval(nodes, gamma)
    return (vals * _GLW[None, :]).sum(axis=1) * half


@lru_cache(maxsize=1)
def _bridge_constants():
    i1 = float(_bridge_cumint(np.array([4.0]), 0.0)[0])
    irho = float(_bridge_cumint(np.array([4.0]), 1.0)[0]) - i1
    return i1, irho


class CutoffProfileSquared:
    """The squared coefficient profile: t^2 inside |t| <= 2, c'^2 outside
    |t| >= 4, C-infinity bridge in between.

    The bridge is F(t) = 4 + int_2^t beta with beta >= 0 exactly when
    c'^2 >= monotone_threshold(); F(4) = c'^2 holds exactly because the
    bump mixing weight is solved from the two bridge integrals in closed
    form.  Only the square is representable: the signed square root is
    not differentiable at the origin and nothing downstream needs it.
    """

    def __init__(self, c_prime: float = 3.0):
        if c_prime == 0:
            raise ValueError("c_prime must be nonzero")
        self.c_prime = float(c_prime)
        i1, irho = _bridge_constants()
        self.gamma = (self.c_prime**2 - 4.0 - i1) / irho

    @staticmethod
    def monotone_threshold() -> float:
        """Smallest c'^2 for which this bridge family is nondecreasing on t >= 0."""
        i1, irho = _bridge_constants()
        return 4.0 + i1 - irho

    @property
    def monotone(self) -> bool:
        return self.c_prime**2 >= self.monotone_threshold() - 1e-12

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        a = np.abs(t)
        out = np.where(a <= 2.0, t * t, self.c_prime**2)
        mask = (a > 2.0) & (a < 4.0)
        if mask.any():
            out = np.array(out, dtype=float)
            out[mask] = 4.0 + _bridge_cumint(a[mask], self.gamma)
        return float(out[0]) if scalar else out

    def derivative(self, t, order: int = 1):
        """Exact t-derivative of the squared profile, orders 1..6."""
        if not 1 <= order <= PROFILE_DERIV_ORDERS:
            raise ValueError(f"order must be in 1..{PROFILE_DERIV_ORDERS}")
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        a = np.abs(t)
        if order == 1:
            inner = 2.0 * t
        elif order == 2:
            inner = np.full_like(t, 2.0)
        else:
            inner = np.zeros_like(t)
        out = np.where(a <= 2.0, inner, 0.0)
        mask = (a > 2.0) & (a < 4.0)
        if mask.any():
            out = np.array(out, dtype=float)
            # F' = beta on the bridge; even extension picks up sgn^order
            sgn = np.sign(t[mask]) ** order
            out[mask] = sgn * _beta_eval(a[mask], self.gamma, order - 1)
        return float(out[0]) if scalar else out


def eta(t):
    """Dyadic mother cutoff: 0 for |t| <= 1, 1 for |t| >= 2, smooth between."""
    return smoothstep(np.abs(np.asarray(t, dtype=float)) - 1.0)


class DyadicPartition:
    """rho(t) = eta(t) - eta(t/2) and its dyadic dilates rho(2^j t).

    The telescoping identity eta(t) + sum_{j<=l} rho(2^j t) = eta(2^l t)
    holds exactly: it is a cancellation of identical terms, not an
    approximation, so tests can demand 1e-12.
    """

    def __init__(self, levels: int):
        if levels < 1:
            raise ValueError("levels must be >= 1")
        self.levels = int(levels)

    @staticmethod
    def rho(t):
        t = np.asarray(t, dtype=float)
        return eta(t) - eta(t / 2.0)

    def term(self, j: int, t):
        if not 1 <= j <= self.levels:
            raise ValueError("level out of range")
        return self.rho(np.asarray(t, dtype=float) * (2.0**j))

    def partial_sum(self, t):
        t = np.asarray(t, dtype=float)
        total = eta(t)
        for j in range(1, self.levels + 1):
            total = total + self.term(j, t)
        return total


def band_bump(v):
    """chi with support exactly [1, 3] and chi = 1 on [1.2, 2.5].

    Applied to m(X)/R this carves out the weight shell R <= m <= 3R.
    """
    v = np.asarray(v, dtype=float)
    up = smoothstep((v - 1.0) / 0.2)
    down = 1.0 - smoothstep((v - 2.5) / 0.5)
    return np.where((v <= 1.0) | (v >= 3.0), 0.0, up * down)
