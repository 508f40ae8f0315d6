"""Phase-space primitives and vector-field systems.

Points live in R^n x R^n.  Vector-field systems carry exact coefficient
derivatives so commutators and pointwise ranks are computed without any
finite differencing: rank decisions are threshold-sensitive and FD noise
would make them unstable under field rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

RANK_RTOL = 1e-10  # singular values below this fraction of the largest count as zero


@dataclass(frozen=True)
class PhasePoint:
    """A point X = (x, xi) of phase space."""

    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "xi", np.atleast_1d(np.asarray(self.xi, dtype=float)))
        if self.x.shape != self.xi.shape or self.x.ndim != 1 or self.x.size < 1:
            raise ValueError("x and xi must be equal-length vectors, length >= 1")

    @property
    def n(self) -> int:
        return self.x.size


def japanese_bracket(p: PhasePoint) -> float:
    """<X> = (1 + |x|^2 + |xi|^2)^(1/2); always >= 1."""
    return float(np.sqrt(1.0 + p.x @ p.x + p.xi @ p.xi))


def bracket_xi(p: PhasePoint) -> float:
    """<xi> = (1 + |xi|^2)^(1/2)."""
    return float(np.sqrt(1.0 + p.xi @ p.xi))


class VectorField:
    """First-order field sum_i c_i(x) d/dx_i with exact coefficient gradients.

    coeffs[i] maps an x-vector to the i-th coefficient; grads[i] maps it
    to the length-n gradient of that coefficient.  grads may be omitted
    for fields that are only ever evaluated (commutators need them).
    """

    def __init__(self, n: int, coeffs: Sequence[Callable], grads: Optional[Sequence[Callable]] = None,
                 name: str = ""):
        if len(coeffs) != n:
            raise ValueError("need one coefficient evaluator per dimension")
        if grads is not None and len(grads) != n:
            raise ValueError("need one gradient evaluator per coefficient")
        self.n = n
        self.coeffs = list(coeffs)
        self.grads = list(grads) if grads is not None else None
        self.name = name

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([float(c(x)) for c in self.coeffs])

    def jacobian(self, x) -> np.ndarray:
        """J[i, j] = d c_i / d x_j at x."""
        if self.grads is None:
            raise ValueError(f"field {self.name or '?'} has no derivative evaluators")
        x = np.asarray(x, dtype=float)
        return np.stack([np.asarray(g(x), dtype=float) for g in self.grads])


def constant_field(n: int, axis: int, scale: float = 1.0, name: str = "") -> VectorField:
    def coeff(i):
        return lambda x, v=(scale if i == axis else 0.0): v

    def grad(_i):
        return lambda x: np.zeros(n)

    return VectorField(n, [coeff(i) for i in range(n)],
                       [grad(i) for i in range(n)], name or f"d_x{axis + 1}")


def scaled_axis_field(n: int, axis: int, coeff: Callable, coeff_grad: Callable,
                      name: str = "") -> VectorField:
    """w(x) d/dx_axis with w and its exact gradient supplied."""

    def c(i):
        if i == axis:
            return lambda x: float(coeff(x))
        return lambda x: 0.0

    def g(i):
        if i == axis:
            return lambda x: np.asarray(coeff_grad(x), dtype=float)
        return lambda x: np.zeros(n)

    return VectorField(n, [c(i) for i in range(n)], [g(i) for i in range(n)], name)


@dataclass
class HormanderSystem:
    fields: list
    n: int

    def __post_init__(self):
        if not self.fields:
            raise ValueError("system needs at least one field")
        for f in self.fields:
            if f.n != self.n:
                raise ValueError("all fields must share the system dimension")

    def values_matrix(self, x) -> np.ndarray:
        """Rows are the field values at x."""
        return np.stack([f.value(x) for f in self.fields])


def commutator_value(f1: VectorField, f2: VectorField, x) -> np.ndarray:
    """[X, Y](x) as a coefficient vector: X(Y_k) - Y(X_k) componentwise."""
    v1, v2 = f1.value(x), f2.value(x)
    j1, j2 = f1.jacobian(x), f2.jacobian(x)
    # j[k, i] = d c_k / d x_i ; bracket_k = sum_i (v1_i d c2_k/dx_i - v2_i d c1_k/dx_i)
    return j2 @ v1 - j1 @ v2


def pointwise_rank(sys: HormanderSystem, x, rtol: float = RANK_RTOL) -> int:
    """Rank of span{X_j(x)} by singular-value thresholding.

    The threshold is relative to the largest singular value so rank is
    stable under rescaling all fields by a common factor.
    """
    sv = np.linalg.svd(sys.values_matrix(x), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


@dataclass
class RankReport:
    passed: bool
    violations: list = field(default_factory=list)  # (x, achieved rank)
    sample_size: int = 0


def check_hormander_order2(sys: HormanderSystem, sample: Sequence, rtol: float = RANK_RTOL) -> RankReport:
    """At every sampled x, fields plus first commutators must span R^n."""
    for f in sys.fields:
        if f.grads is None:
            raise ValueError("order-2 check needs derivative evaluators on every field")
    violations = []
    k = len(sys.fields)
    for x in sample:
        rows = [f.value(x) for f in sys.fields]
        for i in range(k):
            for j in range(i + 1, k):
                rows.append(commutator_value(sys.fields[i], sys.fields[j], x))
        sv = np.linalg.svd(np.stack(rows), compute_uv=False)
        rank = int(np.sum(sv > rtol * sv[0])) if sv[0] > 0 else 0
        if rank < sys.n:
            violations.append((np.asarray(x, dtype=float), rank))
    return RankReport(passed=not violations, violations=violations, sample_size=len(sample))


@dataclass
class NilpotentData:
    r0: int
    Q: int
    rank_map: list  # (x, rank) pairs over the sample
    degree_sum: Optional[int] = None


def nilpotent_data(sys: HormanderSystem, sample: Sequence) -> NilpotentData:
    """Minimal sampled rank r0 and homogeneous dimension Q = 2n - r0.

    The degree-count Q (one per first-order direction, two per commutator
    direction) is recorded alongside; it equals 2n - r0 exactly when the
    commutators fill the missing n - r0 directions, which the order-2
    check certifies on the sample.
    """
    if not len(sample):
        raise ValueError("empty sample")
    rank_map = [(np.asarray(x, dtype=float), pointwise_rank(sys, x)) for x in sample]
    r0 = min(r for _, r in rank_map)
    if r0 < 1:
        raise ValueError("system degenerates to rank 0 on the sample")
    n = sys.n
    order2 = check_hormander_order2(sys, sample)
    degree_sum = r0 + 2 * (n - r0) if order2.passed else None
    return NilpotentData(r0=r0, Q=2 * n - r0, rank_map=rank_map, degree_sum=degree_sum)


def dilate(a: float, v, r0: int) -> np.ndarray:
    """Anisotropic dilation: first r0 components scale by a, the rest by a^2."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not 1 <= r0 <= v.size:
        raise ValueError("r0 out of range")
    out = v.copy()
    out[:r0] *= a
    out[r0:] *= a * a
    return out


def homogeneous_norm(vbar, r0: int) -> float:
    """(sum_{j<=r0} v_j^4 + sum_{j>r0} v_j^2)^(1/4); exactly 1-homogeneous
    under the anisotropic dilation."""
    v = np.atleast_1d(np.asarray(vbar, dtype=float))
    if not 1 <= r0 <= v.size:
        raise ValueError("r0 out of range")
    return float((np.sum(v[:r0] ** 4) + np.sum(v[r0:] ** 2)) ** 0.25)


@dataclass
class PointwiseDiagonalization:
    theta: np.ndarray       # unit-determinant matrix; rows map xi -> xi_bar
    eigenvalues: np.ndarray  # positive values, one per retained direction
    rank: int


def pointwise_diagonalize(a2_matrix: Callable, x, rtol: float = RANK_RTOL,
                          psd_tol: float = 1e-9) -> PointwiseDiagonalization:
    """Diagonalize the quadratic form a2(x, xi) = xi^T A(x) xi.

    Returns theta with det(theta) = 1 and the positive eigenvalues so
    that a2 = sum_j lambda_j (theta xi)_j^2 over the retained j.
    """
    A = np.asarray(a2_matrix(np.asarray(x, dtype=float)), dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("a2_matrix must produce a square matrix")
    if np.max(np.abs(A - A.T)) > 1e-12 * max(1.0, np.max(np.abs(A))):
        raise ValueError("a2_matrix must be symmetric")
    w, V = np.linalg.eigh(A)
    scale = max(1.0, float(w.max(initial=0.0)))
    if w.min() < -psd_tol * scale:
        raise ValueError(f"form is not PSD at {x}: min eigenvalue {w.min():.3e}")
    # descending order puts the retained directions first
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    theta = V.T.copy()
    if np.linalg.det(theta) < 0:
        theta[-1, :] *= -1.0  # flip one row: det becomes +1, form unchanged
    rank = int(np.sum(w > rtol * scale))
    return PointwiseDiagonalization(theta=theta, eigenvalues=w[:rank].copy(), rank=rank)
