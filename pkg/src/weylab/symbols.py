"""Symbol representations and symbol-class machinery.

Two layers: PolySymbol holds symbols polynomial in xi with jet-capable
x-coefficients (exact derivatives, exact transport between quantization
conventions, exact star products), and SymbolEvaluator wraps anything
pointwise-evaluable, with finite-difference jets as the fallback.

Seminorm estimation, class-membership gates, band restriction, dyadic
partitions and the squared-profile live here too.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial
from typing import Callable, Optional, Sequence

import numpy as np

from ._jets import (JProd, JPowerSum, JScale, JSum, JUni, JetExpr, JetSymbol,
                    UnsupportedOrderError, fd_deriv_eval)
from .profiles import (CutoffProfileSquared, DyadicPartition, band_bump, eta,
                       PROFILE_DERIV_ORDERS)

__all__ = [
    "SymbolEvaluator", "PolySymbol", "SeminormEstimate", "CutoffProfileSquared",
    "DyadicPartition", "cutoff_profile_squared", "daho_symbol", "harmonic_a2",
    "grushin_a2", "with_confinement", "quadratic_confinement",
    "weight_symbol_evaluator", "derivative", "smg_seminorm", "class_membership",
    "band_restrict", "check_prop32", "box_sample", "dyadic_partition",
]

MAX_DERIV_ORDER = 4


def cutoff_profile_squared(c_prime: float = 3.0) -> CutoffProfileSquared:
    return CutoffProfileSquared(c_prime)


def _profile_table(profile: CutoffProfileSquared):
    def table(order, t):
        if order == 0:
            return profile(t)
        if order > PROFILE_DERIV_ORDERS:
            raise UnsupportedOrderError(f"profile jets stop at order {PROFILE_DERIV_ORDERS}")
        return profile.derivative(t, order)

    return table


class SymbolEvaluator:
    """A symbol on R^n x R^n: vectorized value plus optional exact jets.

    value_fn maps Z of shape (m, 2n) to values; jet, when present, is a
    JetSymbol over the same 2n variables.  derivative() dispatches to the
    jet and falls back to scaled central differences otherwise.
    """

    def __init__(self, n: int, value_fn: Callable, jet: Optional[JetSymbol] = None,
                 name: str = "", max_order: int = MAX_DERIV_ORDER):
        self.n = n
        self.value_fn = value_fn
        self.jet = jet
        self.name = name
        self.max_order = max_order

    def eval(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return self.value_fn(Z)

    def at(self, x, xi):
        Z = np.concatenate([np.atleast_1d(x), np.atleast_1d(xi)])
        return complex(np.asarray(self.eval(Z[None, :]))[0])

    def derivative(self, beta, alpha, Z):
        """d_x^beta d_xi^alpha at the rows of Z; exact when a jet exists."""
        beta, alpha = tuple(beta), tuple(alpha)
        if len(beta) != self.n or len(alpha) != self.n:
            raise ValueError("multi-index length must equal the dimension")
        if sum(beta) + sum(alpha) > self.max_order:
            raise UnsupportedOrderError(
                f"derivative order {sum(beta) + sum(alpha)} beyond configured max {self.max_order}")
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        multi = beta + alpha
        if self.jet is not None:
            return self.jet.deriv_eval(multi, Z)
        return fd_deriv_eval(self.value_fn, multi, Z)


def _iter_multi(bound):
    return itertools.product(*(range(b + 1) for b in bound))


def _mfact(m):
    out = 1
    for v in m:
        out *= factorial(v)
    return out


def _falling(gamma, alpha):
    out = 1
    for g, a in zip(gamma, alpha):
        if a > g:
            return 0
        out *= factorial(g) // factorial(g - a)
    return out


def _flatten(expr: JetExpr) -> Optional[JPowerSum]:
    """Collapse a JetExpr tree into a single JPowerSum when possible.

    Returns None when the tree contains a univariate-table factor; those
    cannot be represented in closed monomial form.
    """
    if isinstance(expr, JPowerSum):
        return expr
    if isinstance(expr, JScale):
        inner = _flatten(expr.expr)
        if inner is None:
            return None
        return JPowerSum(inner.nvars, [(expr.c * c, e, p) for c, e, p in inner.terms])
    if isinstance(expr, JSum):
        terms = []
        nv = expr.nvars
        for p in expr.parts:
            f = _flatten(p)
            if f is None:
                return None
            nv = f.nvars
            terms.extend(f.terms)
        return JPowerSum(nv, terms)
    if isinstance(expr, JProd):
        acc = None
        for fct in expr.factors:
            f = _flatten(fct)
            if f is None:
                return None
            if acc is None:
                acc = f
            else:
                terms = [(c1 * c2, tuple(a + b for a, b in zip(e1, e2)), p1 + p2)
                         for c1, e1, p1 in acc.terms for c2, e2, p2 in f.terms]
                acc = JPowerSum(f.nvars, terms)
        return acc if acc is not None else None
    return None


class PolySymbol:
    """Symbol polynomial in xi: sum over multi-indices of c_alpha(x) xi^alpha.

    Coefficients are JetExpr over the full 2n phase variables but may
    only depend on x (their xi-derivatives must vanish; the constructors
    here guarantee that).  Everything downstream of this representation
    is exact: derivatives, quantization transport, star products.
    """

    def __init__(self, n: int, monomials: dict):
        self.n = n
        self.monomials = {tuple(a): c for a, c in monomials.items() if not c.is_zero}

    @property
    def xi_degree(self) -> int:
        return max((sum(a) for a in self.monomials), default=0)

    def copy_scaled(self, s):
        return PolySymbol(self.n, {a: JScale(s, c) for a, c in self.monomials.items()})

    def __add__(self, other):
        if not isinstance(other, PolySymbol):
            return NotImplemented
        out = dict(self.monomials)
        for a, c in other.monomials.items():
            out[a] = JSum([out[a], c]) if a in out else c
        return PolySymbol(self.n, out)

    def eval(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        acc = np.zeros(Z.shape[0], dtype=complex)
        xi = Z[:, self.n:]
        for a, c in self.monomials.items():
            mono = np.ones(Z.shape[0])
            for j, aj in enumerate(a):
                if aj:
                    mono = mono * xi[:, j] ** aj
            acc = acc + np.asarray(c.eval(Z)) * mono
        if np.allclose(acc.imag, 0.0):
            return acc.real
        return acc

    def at(self, x, xi):
        Z = np.concatenate([np.atleast_1d(np.asarray(x, float)),
                            np.atleast_1d(np.asarray(xi, float))])
        v = np.asarray(self.eval(Z[None, :]))[0]
        return complex(v)

    def derivative(self, beta, alpha, Z):
        beta, alpha = tuple(beta), tuple(alpha)
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        xi = Z[:, self.n:]
        acc = np.zeros(Z.shape[0], dtype=complex)
        for gamma, coeff in self.monomials.items():
            fall = _falling(gamma, alpha)
            if fall == 0:
                continue
            cexpr = coeff
            for axis, b in enumerate(beta):
                for _ in range(b):
                    cexpr = cexpr.diff(axis)
            if cexpr.is_zero:
                continue
            mono = np.ones(Z.shape[0])
            for j in range(self.n):
                e = gamma[j] - alpha[j]
                if e:
                    mono = mono * xi[:, j] ** e
            acc = acc + fall * np.asarray(cexpr.eval(Z)) * mono
        if np.allclose(acc.imag, 0.0):
            return acc.real
        return acc

    def as_evaluator(self, name: str = "") -> SymbolEvaluator:
        jet = JetSymbol(self.as_jet())
        return SymbolEvaluator(self.n, self.eval, jet=jet, name=name)

    def as_jet(self) -> JetExpr:
        parts = []
        nv = 2 * self.n
        for a, c in self.monomials.items():
            e = (0,) * self.n + tuple(a)
            parts.append(JProd([c, JPowerSum.monomial(nv, e)]))
        return JSum(parts)

    def coefficient_terms(self):
        """monomial -> flattened JPowerSum terms; None entries where a
        coefficient has no closed monomial form."""
        return {a: _flatten(c) for a, c in self.monomials.items()}

    # -- transport between quantization conventions ------------------------

    def jt(self, t: float) -> "PolySymbol":
        """J_t transport: exp(t (i/2pi) <d_x, d_xi>), a finite sum here.

        Normalization is pinned by J_t(x xi) = x xi + i t/(2 pi) in one
        dimension; the semigroup law J_t J_s = J_{t+s} is then exact on
        coefficients.
        """
        out: dict = {}
        cur = {a: c for a, c in self.monomials.items()}
        k = 0
        while cur:
            scale = (1j * t / (2.0 * np.pi)) ** k / factorial(k)
            for a, c in cur.items():
                sc = JScale(scale, c)
                out[a] = JSum([out[a], sc]) if a in out else sc
            nxt: dict = {}
            for a, c in cur.items():
                for j in range(self.n):
                    if a[j] == 0:
                        continue
                    dc = c.diff(j)  # x_j axis
                    if dc.is_zero:
                        continue
                    a1 = list(a)
                    a1[j] -= 1
                    key = tuple(a1)
                    term = JScale(a[j], dc)
                    nxt[key] = JSum([nxt[key], term]) if key in nxt else term
            cur = nxt
            k += 1
        simplified = {}
        for a, c in out.items():
            f = _flatten(c)
            simplified[a] = f if f is not None else c
        return PolySymbol(self.n, simplified)

    def sharp(self, other: "PolySymbol") -> "PolySymbol":
        """Star product: composition law of the symmetric quantization.

        Exact terminating expansion; the xi-degrees bound the derivative
        orders.  Sign/normalization fixed by xi # x - x # xi = 1/(2 pi i)
        in one dimension.
        """
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        out: dict = {}
        for ga, ca in self.monomials.items():
            for gb, cb in other.monomials.items():
                for gamma in _iter_multi(ga):      # xi-derivatives on self
                    fa = _falling(ga, gamma)
                    if fa == 0:
                        continue
                    for beta in _iter_multi(gb):   # xi-derivatives on other
                        fb = _falling(gb, beta)
                        if fb == 0:
                            continue
                        ka, kb = sum(gamma), sum(beta)
                        scalar = ((1j / (4.0 * np.pi)) ** (ka + kb)
                                  * (-1.0) ** ka * fa * fb
                                  / (_mfact(beta) * _mfact(gamma)))
                        cl = ca
                        for axis, b in enumerate(beta):
                            for _ in range(b):
                                cl = cl.diff(axis)
                        if cl.is_zero:
                            continue
                        cr = cb
                        for axis, g in enumerate(gamma):
                            for _ in range(g):
                                cr = cr.diff(axis)
                        if cr.is_zero:
                            continue
                        key = tuple(ga[j] - gamma[j] + gb[j] - beta[j] for j in range(self.n))
                        term = JScale(scalar, JProd([cl, cr]))
                        out[key] = JSum([out[key], term]) if key in out else term
        simplified = {}
        for a, c in out.items():
            f = _flatten(c)
            simplified[a] = f if f is not None else c
        return PolySymbol(self.n, simplified)


# -- concrete symbols -------------------------------------------------------

def daho_symbol(c_prime: float = 3.0, profile: Optional[CutoffProfileSquared] = None) -> PolySymbol:
    """Principal symbol xi_1^2 + profile(x_1) xi_2^2 on R^2 x R^2.

    The x_1-coefficient is the squared plateau profile; its jets come
    from the exact bridge derivative table.
    """
    profile = profile if profile is not None else CutoffProfileSquared(c_prime)
    nv = 4
    coeff = JUni(nv, 0, _profile_table(profile))
    return PolySymbol(2, {
        (2, 0): JPowerSum.constant(nv, 1.0),
        (0, 2): coeff,
    })


def harmonic_a2(n: int = 2) -> PolySymbol:
    """|xi|^2: principal symbol of the elliptic control."""
    nv = 2 * n
    mono = {}
    for j in range(n):
        a = [0] * n
        a[j] = 2
        mono[tuple(a)] = JPowerSum.constant(nv, 1.0)
    return PolySymbol(n, mono)


def grushin_a2() -> PolySymbol:
    """xi_1^2 + x_1^2 xi_2^2: the untruncated degenerate principal symbol."""
    nv = 4
    return PolySymbol(2, {
        (2, 0): JPowerSum.constant(nv, 1.0),
        (0, 2): JPowerSum.monomial(nv, (2, 0, 0, 0)),
    })


def quadratic_confinement(n: int) -> PolySymbol:
    """|x|^2 as a xi-degree-0 symbol."""
    nv = 2 * n
    terms = [(1.0, tuple(2 if i == j else 0 for i in range(nv)), 0.0) for j in range(n)]
    return PolySymbol(n, {(0,) * n: JPowerSum(nv, terms)})


def with_confinement(a2: PolySymbol) -> PolySymbol:
    """a = a2 + |x|^2."""
    return a2 + quadratic_confinement(a2.n)


def weight_symbol_evaluator(a2: PolySymbol, name: str = "m") -> SymbolEvaluator:
    """The order function a2 + |x|^2 + <X> as a symbol with exact jets.

    The bracket term makes this fall outside the polynomial layer, but
    its derivative algebra is still closed, so seminorms of the weight
    itself never touch finite differences.
    """
    n = a2.n
    nv = 2 * n
    conf = quadratic_confinement(n).monomials[(0,) * n]
    expr = JSum([a2.as_jet(), conf, JPowerSum.bracket_power(nv, 1)])
    jet = JetSymbol(expr)

    def value(Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        v = np.asarray(expr.eval(Z))
        return v.real if np.iscomplexobj(v) else v

    return SymbolEvaluator(n, value, jet=jet, name=name)


def derivative(s, beta, alpha, x, xi):
    """Single-point derivative convenience over either symbol layer."""
    Z = np.concatenate([np.atleast_1d(np.asarray(x, float)),
                        np.atleast_1d(np.asarray(xi, float))])[None, :]
    out = s.derivative(tuple(beta), tuple(alpha), Z)
    v = np.asarray(out)[0]
    return complex(v) if np.iscomplexobj(out) else float(v)


# -- sampling and seminorms -------------------------------------------------

def box_sample(n: int, half: float, n_grid: int = 7, n_random: int = 2000,
               seed: int = 0) -> np.ndarray:
    """Deterministic sample of the box [-half, half]^{2n}.

    Three layers: an axis-aligned coarse grid (odd count, so degenerate
    loci like x_1 = 0 are always present), two-axis sheets pairing a
    fine core along one axis with an edge ladder along another, and a
    uniform random fill.  The fine core is pinned to [-6, 6] regardless
    of the box, so features living at absolute coordinates (cutoff
    bridges) are hit at identical points in every nested box and sup
    comparisons across boxes measure tail behaviour, not sampling luck.
    """
    d = 2 * n
    axes = [np.linspace(-half, half, n_grid) for _ in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    core = np.linspace(-6.0, 6.0, 241)
    core = core[np.abs(core) <= half]
    frac = np.array([0.25, 0.5, 0.75, 1.0])
    ladder = np.concatenate([[0.0, 1.0, -1.0], half * frac, -half * frac])
    ladder = ladder[np.abs(ladder) <= half]
    sheets = []
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            uu, vv = np.meshgrid(core, ladder, indexing="ij")
            pts = np.zeros((uu.size, d))
            pts[:, i] = uu.ravel()
            pts[:, j] = vv.ravel()
            sheets.append(pts)
    rng = np.random.default_rng(seed)
    rand = rng.uniform(-half, half, size=(n_random, d))
    return np.concatenate([grid] + sheets + [rand], axis=0)


@dataclass
class SeminormEstimate:
    order: int
    value: float
    argmax: np.ndarray
    sample_size: int
    descriptor: str = ""


def _weight_fn(w):
    # accept a WeightEvaluator-like object or a plain callable on Z
    if hasattr(w, "m_values"):
        return w.m_values
    return w


def smg_seminorm(s, M, w, k: int, sample: np.ndarray, descriptor: str = "") -> SeminormEstimate:
    """Estimate the order-k class seminorm of s against weight M.

    Field maximized: |d_x^beta d_xi^alpha s| * m^{(|a|+|b|)/2}
    * (<xi>^2 + |x|^2)^{-|b|/2} / M, over the sample and all orders <= k.
    A sup over a finite sample only ever certifies growth, never a bound;
    callers gate on stability across nested boxes for that reason.
    """
    Z = np.atleast_2d(np.asarray(sample, dtype=float))
    n = getattr(s, "n")
    m_vals = np.asarray(_weight_fn(w)(Z), dtype=float)
    M_vals = np.asarray(_weight_fn(M)(Z), dtype=float)
    x, xi = Z[:, :n], Z[:, n:]
    bx2 = 1.0 + (xi * xi).sum(axis=1) + (x * x).sum(axis=1)  # <xi>^2 + |x|^2
    best, arg = -np.inf, Z[0]
    for total in range(k + 1):
        for beta in _iter_multi((total,) * n):
            nb = sum(beta)
            if nb > total:
                continue
            for alpha in _iter_multi((total - nb,) * n):
                na = sum(alpha)
                if na + nb != total:
                    continue
                d = np.abs(np.asarray(s.derivative(beta, alpha, Z)))
                field = d * m_vals ** (total / 2.0) * bx2 ** (-nb / 2.0) / M_vals
                i = int(np.argmax(field))
                if field[i] > best:
                    best, arg = float(field[i]), Z[i]
    return SeminormEstimate(order=k, value=best, argmax=np.asarray(arg),
                            sample_size=Z.shape[0], descriptor=descriptor)


@dataclass
class MembershipReport:
    passed: bool
    estimates: list
    growth: list
    gate: float


def class_membership(s, M, w, k: int, halves: Sequence[float], growth_factor: float = 1.05,
                     n_grid: int = 7, n_random: int = 2000, seed: int = 0) -> MembershipReport:
    """Seminorm growth across nested boxes; slow growth passes.

    halves lists the box half-extents, smallest first.  The pass gate is
    growth under growth_factor per step, the operational reading of
    'bounded' for a sampled sup.
    """
    if len(halves) < 2:
        raise ValueError("need at least two nested boxes")
    n = getattr(s, "n")
    ests = []
    for h in halves:
        sample = box_sample(n, h, n_grid=n_grid, n_random=n_random, seed=seed)
        ests.append(smg_seminorm(s, M, w, k, sample, descriptor=f"box[{-h},{h}]"))
    growth = [ests[i + 1].value / max(ests[i].value, 1e-300) for i in range(len(ests) - 1)]
    return MembershipReport(passed=all(g < growth_factor for g in growth),
                            estimates=ests, growth=growth, gate=growth_factor)


def band_restrict(s, w, R: float) -> SymbolEvaluator:
    """Multiply by the shell bump chi(m/R): support exactly R <= m <= 3R."""
    if R <= 1:
        raise ValueError("R must exceed 1")
    m_fn = _weight_fn(w)
    n = getattr(s, "n")

    def value(Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return np.asarray(s.eval(Z)) * band_bump(np.asarray(m_fn(Z)) / R)

    name = f"band[{getattr(s, 'name', '') or 'symbol'}, R={R}]"
    return SymbolEvaluator(n, value, jet=None, name=name)


def dyadic_partition(levels: int) -> DyadicPartition:
    return DyadicPartition(levels)


@dataclass
class Prop32Report:
    passed: bool
    constant: float
    second_deriv_sup: float
    violations: list
    checked: int


def check_prop32(f: Callable, sample, cover=None, constant: float = 2.0) -> Prop32Report:
    """Check (f')^2 <= constant * ||f''||_inf * f for nonnegative C^2 f.

    The printed inequality with constant 1 fails already on f(t) = t^2
    (4 t^2 against 2 t^2); the Taylor argument gives constant 2 and the
    quadratic then saturates it exactly.  Derivatives are one-variable
    central differences with a Richardson pass.
    """
    sample = np.atleast_1d(np.asarray(sample, dtype=float))
    cover = sample if cover is None else np.atleast_1d(np.asarray(cover, dtype=float))

    def d1(t):
        h = 1e-4 * np.maximum(1.0, np.abs(t))
        a = (f(t + h) - f(t - h)) / (2 * h)
        b = (f(t + h / 2) - f(t - h / 2)) / h
        return b + (b - a) / 3.0

    def d2(t):
        h = 1e-3 * np.maximum(1.0, np.abs(t))
        a = (f(t + h) - 2 * f(t) + f(t - h)) / h**2
        b = (f(t + h / 2) - 2 * f(t) + f(t - h / 2)) / (h / 2) ** 2
        return b + (b - a) / 3.0

    fv = np.asarray(f(sample), dtype=float)
    if np.any(fv < -1e-12):
        raise ValueError("f must be nonnegative on the sample")
    sup2 = float(np.max(np.abs(d2(cover))))
    lhs = np.asarray(d1(sample)) ** 2
    rhs = constant * sup2 * np.maximum(fv, 0.0)
    slack = 1e-6 * np.maximum(1.0, rhs)  # FD noise allowance
    bad = lhs > rhs + slack
    violations = [(float(sample[i]), float(lhs[i]), float(rhs[i])) for i in np.nonzero(bad)[0]]
    return Prop32Report(passed=not violations, constant=constant, second_deriv_sup=sup2,
                        violations=violations, checked=sample.size)
