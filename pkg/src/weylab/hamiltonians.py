"""Finite-difference Hamiltonians on Dirichlet boxes.

Kinetic parts are sums of squares of axis-aligned vector fields.  Two
assembly routes, chosen per field:

* tensor stencils (order 6 default) when the field coefficient does not
  vary along its own differencing axis: the per-axis matrix is PSD and
  the Kronecker assembly keeps both symmetry and positivity exactly;
* staggered divergence form D^T M D (order 2) otherwise, PSD by
  construction without differentiating the coefficient.

Spectra here use the plain convention -Laplacian + |x|^2, whose 2D
harmonic reference spectrum is {2(k1+k2)+2}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .profiles import CutoffProfileSquared

__all__ = [
    "DirichletGrid", "HamiltonianMatrix", "Potential", "P2Report",
    "second_derivative", "periodic_mode_symbol", "staggered_divergence_form",
    "sum_of_squares_matrix", "harmonic_matrix", "daho_matrix",
    "grushin_kinetic", "single_field_kinetic", "quadratic_potential",
    "bounded_noise_potential", "step_potential", "table_potential",
    "validate_p2", "hamiltonian_with_potential", "constant_shift",
    "fractional_power", "P2ValidationError",
]

SYMMETRY_TOL = 1e-12
CONDITIONING_LIMIT = 50.0

# second-difference weights, interior rows, by order
_W2 = {
    2: [2.0, -1.0],
    4: [30.0 / 12.0, -16.0 / 12.0, 1.0 / 12.0],
    6: [49.0 / 18.0, -3.0 / 2.0, 3.0 / 20.0, -1.0 / 90.0],
}


@dataclass(frozen=True)
class DirichletGrid:
    """Interior nodes of [-L, L]^n: x_i = -L + (i+1) h, h = 2L/(N+1)."""
    n: int
    N: int
    L: float

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("only one or two dimensions")
        if self.N < 8:
            raise ValueError("N must be at least 8")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.N + 1)

    @property
    def points(self) -> np.ndarray:
        return -self.L + self.h * (1.0 + np.arange(self.N))

    def mesh(self) -> np.ndarray:
        """Flattened node coordinates, first axis major; shape (N^n, n)."""
        if self.n == 1:
            return self.points[:, None]
        p = self.points
        X1, X2 = np.meshgrid(p, p, indexing="ij")
        return np.stack([X1.ravel(), X2.ravel()], axis=1)

    def side(self) -> int:
        return self.N ** self.n


@dataclass
class HamiltonianMatrix:
    data: np.ndarray
    grid: DirichletGrid
    provenance: str
    potential: Optional[np.ndarray] = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        side = self.grid.side()
        if self.data.shape != (side, side):
            raise ValueError("matrix shape does not match the grid")

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.data - self.data.T)))

    def norm_estimate(self) -> float:
        return float(np.linalg.norm(self.data, ord=1))

    def min_ritz(self, trials: int = 1000, seed: int = 0) -> float:
        """Cheap PSD witness: smallest Rayleigh quotient over random vectors."""
        rng = np.random.default_rng(seed)
        v = rng.normal(size=(self.data.shape[0], trials))
        v /= np.linalg.norm(v, axis=0)
        return float(np.min(np.einsum("ij,ij->j", v, self.data @ v)))


def second_derivative(N: int, h: float, order: int = 6, bc: str = "dirichlet") -> np.ndarray:
    """Matrix for -d^2/dx^2, PSD.  Dirichlet rows truncate the stencil at
    the wall (zero extension); periodic rows wrap."""
    if order not in _W2:
        raise ValueError(f"order must be one of {sorted(_W2)}")
    w = _W2[order]
    A = np.zeros((N, N))
    idx = np.arange(N)
    A[idx, idx] = w[0]
    for k in range(1, len(w)):
        if bc == "dirichlet":
            A[idx[:-k], idx[k:]] = w[k]
            A[idx[k:], idx[:-k]] = w[k]
        elif bc == "periodic":
            A[idx, (idx + k) % N] += w[k]
            A[idx, (idx - k) % N] += w[k]
        else:
            raise ValueError("bc must be dirichlet or periodic")
    return A / h**2


def periodic_mode_symbol(N: int, h: float, order: int = 6) -> np.ndarray:
    """Eigenvalues of the periodic second-difference matrix, indexed by
    FFT mode: the Fourier multiplier of the stencil."""
    w = _W2[order]
    theta = 2.0 * np.pi * np.arange(N) / N
    vals = np.full(N, w[0])
    for k in range(1, len(w)):
        vals = vals + 2.0 * w[k] * np.cos(k * theta)
    return vals / h**2


def staggered_divergence_form(c_half: np.ndarray, h: float) -> np.ndarray:
    """Tridiagonal D^T M D for -d/dx (c(x) d/dx) with c given at the N+1
    half points; symmetric and PSD whenever c >= 0."""
    c_half = np.asarray(c_half, dtype=float)
    N = c_half.size - 1
    A = np.zeros((N, N))
    idx = np.arange(N)
    A[idx, idx] = (c_half[:-1] + c_half[1:]) / h**2
    A[idx[:-1], idx[1:]] = -c_half[1:-1] / h**2
    A[idx[1:], idx[:-1]] = -c_half[1:-1] / h**2
    return A


def _axis_matrix(grid: DirichletGrid, axis: int, line: np.ndarray) -> np.ndarray:
    """Embed a per-line operator acting along `axis` into the full space.
    line may be a single (N, N) matrix or a stack (lines, N, N)."""
    N = grid.N
    if grid.n == 1:
        return np.asarray(line) if line.ndim == 2 else line[0]
    full = np.zeros((N * N, N * N))
    if axis == 0:
        # lines indexed by i2; entries couple (i1, i2) to (j1, i2)
        for i2 in range(N):
            M = line if line.ndim == 2 else line[i2]
            full[i2::N, i2::N] = M
    else:
        for i1 in range(N):
            M = line if line.ndim == 2 else line[i1]
            s = slice(i1 * N, (i1 + 1) * N)
            full[s, s] = M
    return full


def sum_of_squares_matrix(fields, grid: DirichletGrid, order: int = 2) -> HamiltonianMatrix:
    """Kinetic part sum_j X_j^T X_j for axis-aligned fields b(x) d/dx_axis.

    Each field is assembled in staggered divergence form with b^2 sampled
    at the half points of its own axis, so the result is symmetric PSD
    regardless of how rough b is.  fields: sequence of (axis, coeff_fn)
    with coeff_fn mapping node-coordinate rows to values; coeff_fn None
    means the constant field d/dx_axis.
    """
    N, h = grid.N, grid.h
    pts = grid.points
    half = np.concatenate([[pts[0] - h / 2.0], pts + h / 2.0])  # N+1 half points
    total = np.zeros((grid.side(), grid.side()))
    for axis, coeff in fields:
        if coeff is None:
            line = staggered_divergence_form(np.ones(N + 1), h)
            total += _axis_matrix(grid, axis, line)
            continue
        if grid.n == 1:
            c2 = np.asarray(coeff(half[:, None]), dtype=float) ** 2
            total += staggered_divergence_form(c2, h)
            continue
        other = 1 - axis
        lines = np.empty((N, N, N))
        for io, xo in enumerate(pts):
            X = np.empty((N + 1, 2))
            X[:, axis] = half
            X[:, other] = xo
            c2 = np.asarray(coeff(X), dtype=float) ** 2
            lines[io] = staggered_divergence_form(c2, h)
        total += _axis_matrix(grid, axis, lines)
    return HamiltonianMatrix(total, grid, provenance=f"sum_of_squares[{len(list(fields))} fields]")


def _confinement(grid: DirichletGrid) -> np.ndarray:
    m = grid.mesh()
    return (m * m).sum(axis=1)


def harmonic_matrix(grid: DirichletGrid, order: int = 6) -> HamiltonianMatrix:
    D2 = second_derivative(grid.N, grid.h, order)
    if grid.n == 1:
        K = D2
    else:
        I = np.eye(grid.N)
        K = np.kron(D2, I) + np.kron(I, D2)
    V = _confinement(grid)
    return HamiltonianMatrix(K + np.diag(V), grid, provenance="harmonic", potential=V)


def daho_matrix(grid: DirichletGrid, c_prime: float = 3.0, order: int = 6) -> HamiltonianMatrix:
    """Degenerate oscillator: -d2/dx1^2 - profile^2(x1) d2/dx2^2 + |x|^2.

    The x2-coefficient is constant along x2, so the high-order tensor
    stencil keeps exact symmetry, and positivity follows from the PSD
    Kronecker factors.
    """
    if grid.n != 2:
        raise ValueError("defined on two dimensions")
    profile = CutoffProfileSquared(c_prime)
    D2 = second_derivative(grid.N, grid.h, order)
    I = np.eye(grid.N)
    P = np.diag(profile(grid.points))
    K = np.kron(D2, I) + np.kron(P, D2)
    V = _confinement(grid)
    return HamiltonianMatrix(K + np.diag(V), grid,
                             provenance=f"daho(c_prime={c_prime:g})", potential=V)


def grushin_kinetic(grid: DirichletGrid, order: int = 6) -> HamiltonianMatrix:
    """Kinetic-only untruncated model: coefficient x1^2 on the x2 axis."""
    if grid.n != 2:
        raise ValueError("defined on two dimensions")
    D2 = second_derivative(grid.N, grid.h, order)
    I = np.eye(grid.N)
    P = np.diag(grid.points**2)
    K = np.kron(D2, I) + np.kron(P, D2)
    return HamiltonianMatrix(K, grid, provenance="grushin_pure")


def single_field_kinetic(grid: DirichletGrid, order: int = 6) -> HamiltonianMatrix:
    """One field d/dx1 in two dimensions; deliberately non-spanning."""
    if grid.n != 2:
        raise ValueError("defined on two dimensions")
    D2 = second_derivative(grid.N, grid.h, order)
    K = np.kron(D2, np.eye(grid.N))
    return HamiltonianMatrix(K, grid, provenance="single_field")


# -- potentials -------------------------------------------------------------

@dataclass
class Potential:
    values: np.ndarray
    descriptor: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("potential must be finite on the grid")


def quadratic_potential(grid: DirichletGrid) -> Potential:
    return Potential(_confinement(grid), "quadratic")


def bounded_noise_potential(grid: DirichletGrid, amplitude: float = 1.0,
                            seed: int = 0) -> Potential:
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-amplitude, amplitude, size=grid.side())
    return Potential(vals, f"bounded_noise(amplitude={amplitude:g},seed={seed})")


def step_potential(grid: DirichletGrid, amplitude: float = 1.0,
                   base: float = 0.0) -> Potential:
    """base + amplitude * (floor(x1) mod 2): bounded, discontinuous."""
    x1 = grid.mesh()[:, 0]
    vals = base + amplitude * (np.floor(x1) % 2)
    return Potential(vals, f"step(amplitude={amplitude:g},base={base:g})")


def table_potential(grid: DirichletGrid, path) -> Potential:
    vals = np.loadtxt(path, delimiter=",").ravel()
    if vals.size != grid.side():
        raise ValueError(f"table has {vals.size} values, grid needs {grid.side()}")
    return Potential(vals, f"table({path})")


@dataclass
class P2Report:
    passed: bool
    v1_ok: bool
    v2_ok: bool
    C: float
    C2: float
    v1_growth: float
    v2_growth: float
    witnesses: list = field(default_factory=list)


def validate_p2(V, X, growth_gate: float = 1.5) -> P2Report:
    """Quadratic-growth and lower-bound gates, by radial stabilization.

    On a finite sample every constant is finite; what distinguishes an
    admissible potential is that the fitted constants stop growing with
    the sampled radius.  The sample is split at the median radius and
    the inner-ball constants compared with the full ones.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    vals = V.values if isinstance(V, Potential) else np.asarray(V, dtype=float)
    if vals.shape[0] != X.shape[0]:
        raise ValueError("value/sample length mismatch")
    r2 = (X * X).sum(axis=1)
    if np.sqrt(np.max(r2)) < 10.0:
        raise ValueError("sample must reach |x| >= 10")
    ratio = np.abs(vals) / np.maximum(r2, 1.0)
    neg = np.maximum(-vals, 0.0)
    rmed = np.median(r2)
    inner = r2 <= rmed
    C_inner = float(np.max(ratio[inner]))
    C_full = float(np.max(ratio))
    C2_inner = float(np.max(neg[inner]))
    C2_full = float(np.max(neg))
    v1_growth = C_full / max(C_inner, 1e-300)
    v2_growth = C2_full / max(C2_inner, 1e-12) if C2_full > 1e-12 else 1.0
    v1_ok = v1_growth <= growth_gate
    v2_ok = v2_growth <= growth_gate
    witnesses = []
    if not v1_ok:
        i = int(np.argmax(ratio))
        witnesses.append(("V1", X[i].tolist(), float(vals[i])))
    if not v2_ok:
        i = int(np.argmax(neg))
        witnesses.append(("V2", X[i].tolist(), float(vals[i])))
    return P2Report(passed=v1_ok and v2_ok, v1_ok=v1_ok, v2_ok=v2_ok,
                    C=C_full, C2=C2_full, v1_growth=v1_growth,
                    v2_growth=v2_growth, witnesses=witnesses)


class P2ValidationError(ValueError):
    pass


def hamiltonian_with_potential(kinetic: HamiltonianMatrix, V: Potential,
                               override: bool = False) -> HamiltonianMatrix:
    grid = kinetic.grid
    if not override:
        report = validate_p2(V, grid.mesh())
        if not report.passed:
            raise P2ValidationError(f"potential fails the class gates: {report.witnesses}")
    ratio = grid.h**2 * float(np.max(np.abs(V.values)))
    if ratio > CONDITIONING_LIMIT:
        raise ValueError(f"h^2 * max|V| = {ratio:.3g} exceeds conditioning limit")
    base = kinetic.potential if kinetic.potential is not None else 0.0
    return HamiltonianMatrix(kinetic.data + np.diag(V.values), grid,
                             provenance=f"{kinetic.provenance}+{V.descriptor}",
                             potential=np.asarray(base) + V.values)


def constant_shift(H: HamiltonianMatrix, c: float) -> HamiltonianMatrix:
    return HamiltonianMatrix(H.data + c * np.eye(H.data.shape[0]), H.grid,
                             provenance=f"{H.provenance}+({c:g})", potential=H.potential)


def fractional_power(H: HamiltonianMatrix, beta: float, shift: float = 0.0) -> HamiltonianMatrix:
    """(H + shift)^beta through the full eigendecomposition.

    Negative beta is allowed (resolvent powers); the shifted operator
    must be PD either way.
    """
    lam, Q = np.linalg.eigh(0.5 * (H.data + H.data.T))
    lam = lam + shift
    if np.min(lam) <= 0.0:
        raise ValueError(f"shift too small: min shifted eigenvalue {np.min(lam):.3e}")
    M = (Q * lam**beta) @ Q.T
    return HamiltonianMatrix(0.5 * (M + M.T), H.grid,
                             provenance=f"({H.provenance}+{shift:g})^{beta:g}")
