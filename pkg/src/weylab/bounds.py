"""Empirical norm probes: band-symbol sup bounds, p-norm windows,
subelliptic a-priori constants.

Everything here is an experiment, not a theorem: each probe returns the
full ladder of raw measurements next to its verdict so the verdict can
be recomputed.  Matrix p->p norms for p outside {1, 2, inf} are
bracketed (interpolated upper bound, randomized lower bound), never
reported as point values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .hamiltonians import (DirichletGrid, HamiltonianMatrix, fractional_power,
                           second_derivative)
from .metric import WeightEvaluator
from .profiles import smoothstep
from .quantize import Grid, kn_quantize, sobolev_norm
from .symbols import band_restrict, box_sample, smg_seminorm

__all__ = [
    "BandProbeResult", "linf_band_probe", "LpProbeResult", "lp_window_probe",
    "SubellipticityResult", "subellipticity_probe", "CalibrationError",
    "periodic_grushin", "periodic_single_field", "periodic_laplacian",
    "STABILITY_GATE",
]

STABILITY_GATE = 0.15   # relative change per refinement step counted stable


class CalibrationError(RuntimeError):
    pass


# -- sup-norm band probe ----------------------------------------------------

@dataclass
class BandProbeResult:
    R: float
    op_norm: float
    trial_ratio: float
    seminorm: float
    sup_band_weight: float
    quotient: float
    grid: str
    operator: str = ""

    def csv_row(self, epsilon):
        return (self.operator, self.grid, "", epsilon, self.R,
                self.trial_ratio, self.op_norm, f"{self.quotient:.6g}")


class _PowerWeightSymbol:
    def __init__(self, w: WeightEvaluator, power: float):
        self.w = w
        self.n = w.n
        self.power = power
        self.name = f"m^{power:g}"

    def eval(self, Z):
        return self.w.m_values(Z) ** self.power


def _band_sample(w: WeightEvaluator, R: float, count: int, seed: int) -> np.ndarray:
    """Rejection sample of the shell R <= m <= 3R.  The shell sits inside
    |x|, |xi| <= sqrt(3R) because m dominates |x|^2 + |xi|^2."""
    rng = np.random.default_rng(seed)
    half = np.sqrt(3.0 * R) * 1.05
    out = []
    got = 0
    for _ in range(200):
        Z = rng.uniform(-half, half, size=(4 * count, 2 * w.n))
        m = w.m_values(Z)
        keep = (m >= R) & (m <= 3.0 * R)
        Z = Z[keep]
        out.append(Z)
        got += Z.shape[0]
        if got >= count:
            break
    if got < count // 4:
        raise RuntimeError(f"band sampling starved at R={R}")
    return np.concatenate(out, axis=0)[:count]


def linf_band_probe(w: WeightEvaluator, epsilon: float, R_list: Sequence[float],
                    grid: Grid, trials: int = 64, seed: int = 0,
                    seminorm_order: int = 2, sample_count: int = 4000,
                    operator: str = "") -> list:
    """Probe the sup-norm bound for shell restrictions of m^{-(n/2) eps}.

    Per R: quantize the band piece, measure the max-abs-response ratio
    over trial vectors (including the phase-matched row maximizer, which
    attains the exact infinity-operator norm), estimate the class
    seminorm on shell samples, and form the quotient
    norm / (seminorm * sup of the class weight on the shell).  The bound
    being probed says exactly that this quotient stays bounded in R.
    """
    if not (0.0 <= epsilon < 1.0):
        raise ValueError("epsilon must lie in [0, 1)")
    if min(R_list) <= 1.0:
        raise ValueError("R values must exceed 1")
    n = w.n
    power = -(n / 2.0) * epsilon
    rng = np.random.default_rng(seed)
    results = []
    for R in R_list:
        xi_need = np.sqrt(3.0 * R)
        if not grid.resolves(xi_need, margin=1.0):
            raise ValueError(
                f"grid too coarse: shell at R={R} reaches |xi|~{xi_need:.2f} "
                f"but modes stop at {grid.xi_max:.2f}")
        q = band_restrict(_PowerWeightSymbol(w, power), w, R)
        A = kn_quantize(q, grid).data
        row_l1 = np.abs(A).sum(axis=1)
        op_norm = float(np.max(row_l1))
        i_star = int(np.argmax(row_l1))
        best = 0.0
        side = A.shape[0]
        for t in range(trials):
            if t == 0:
                row = A[i_star]
                f = np.where(np.abs(row) > 0, np.conj(row) / np.maximum(np.abs(row), 1e-300), 1.0)
            elif t % 2:
                f = rng.choice([-1.0, 1.0], size=side).astype(complex)
            else:
                f = np.exp(2j * np.pi * rng.uniform(size=side))
            ratio = float(np.max(np.abs(A @ f)) / np.max(np.abs(f)))
            best = max(best, ratio)
        sample = _band_sample(w, R, sample_count, seed + int(R))
        M = _PowerWeightSymbol(w, power)
        est = smg_seminorm(q, M.eval, w, seminorm_order, sample,
                           descriptor=f"shell R={R}")
        supM = float(np.max(M.eval(sample)))
        quotient = op_norm / max(est.value * supM, 1e-300)
        results.append(BandProbeResult(R=float(R), op_norm=op_norm, trial_ratio=best,
                                       seminorm=est.value, sup_band_weight=supM,
                                       quotient=quotient,
                                       grid=f"N={grid.N},L={grid.L:g}",
                                       operator=operator or w.name))
    return results


# -- Lp window probe --------------------------------------------------------

@dataclass
class LpProbeResult:
    p: float
    upper: float
    lower: float
    N: int
    beta_prime: float
    calibration_residual: float
    operator: str = ""

    def __post_init__(self):
        if self.lower > self.upper * (1.0 + 1e-9):
            raise ValueError("lower bound exceeded upper bound")

    def csv_row(self, beta):
        return (self.operator, self.N, "", beta, self.p,
                f"{self.lower:.12g}", f"{self.upper:.12g}", "")


def _interp_upper(A: np.ndarray, p: float) -> float:
    n1 = float(np.max(np.abs(A).sum(axis=0)))     # columns: 1 -> 1
    ninf = float(np.max(np.abs(A).sum(axis=1)))   # rows: inf -> inf
    n2 = float(np.linalg.norm(A, 2))
    if p == 2:
        return n2
    if p == 1:
        return n1
    if np.isinf(p):
        return ninf
    if p < 2:
        theta = 2.0 / p - 1.0          # 1/p = theta/1 + (1-theta)/2
        return n1**theta * n2 ** (1.0 - theta)
    theta = 2.0 / p                    # 1/p = theta/2 + (1-theta)/inf
    return n2**theta * ninf ** (1.0 - theta)


def _lp_lower(A: np.ndarray, p: float, trials: int, rng) -> float:
    side = A.shape[1]
    best = 0.0
    q = p / (p - 1.0) if p > 1 else np.inf
    for t in range(trials):
        if t == 0:
            f = np.ones(side)
        elif t % 3 == 0:
            f = np.zeros(side)
            f[rng.integers(side)] = 1.0
        elif t % 3 == 1:
            f = rng.choice([-1.0, 1.0], size=side)
        else:
            f = rng.normal(size=side)
        g = A @ f
        denom = np.linalg.norm(f, p)
        if denom > 0:
            best = max(best, float(np.linalg.norm(g, p) / denom))
        # one dual-matched refinement: |g|^{p-1} sign pattern back through A^T
        if p > 1 and np.any(g != 0):
            h = np.sign(g) * np.abs(g) ** (p - 1.0)
            f2 = A.T @ h
            if np.linalg.norm(f2, p) > 0:
                best = max(best, float(np.linalg.norm(A @ f2, p) / np.linalg.norm(f2, p)))
    return best


def _calibrate_beta_prime(H: HamiltonianMatrix, w: WeightEvaluator, beta: float,
                          shift: float, residual_gate: float) -> tuple:
    """Pick the spectral power whose diagonal decay tracks the symbol decay.

    Target profile: the frequency-averaged class weight m^{-(n/2) beta}
    along the grid diagonal.  Candidate powers are scanned and the
    log-log regression slope of diag((H+C)^{-b}) against the target is
    driven to 1; the winning residual must clear the gate or the
    experiment refuses to run.
    """
    grid = H.grid
    mesh = grid.mesh()
    n = grid.n
    rng = np.random.default_rng(7)
    xi = rng.normal(scale=2.0, size=(256, n))
    target = np.empty(mesh.shape[0])
    for i, x in enumerate(mesh):
        Z = np.concatenate([np.broadcast_to(x, (256, n)), xi], axis=1)
        target[i] = np.mean(w.m_values(Z) ** (-(n / 2.0) * beta))
    # restrict to a radial annulus: center rows are resolution-limited,
    # edge rows boundary-limited
    r = np.linalg.norm(mesh, axis=1)
    sel = (r > 0.15 * grid.L) & (r < 0.85 * grid.L)
    lt = np.log(target[sel])
    span = lt.max() - lt.min()
    if span < 0.5:
        raise CalibrationError("target profile too flat to calibrate against")
    best = (np.inf, None, None)
    for b in np.linspace(0.1, 2.0, 39) * max(beta, 0.5):
        T = fractional_power(H, -b, shift)
        ld = np.log(np.diag(T.data)[sel])
        slope = np.polyfit(lt, ld, 1)[0]
        resid = abs(slope - 1.0)
        if resid < best[0]:
            best = (resid, float(b), slope)
    if best[0] > residual_gate:
        raise CalibrationError(
            f"power calibration residual {best[0]:.3f} above gate {residual_gate}; "
            f"closest power {best[1]} (slope {best[2]:.3f})")
    return best[1], best[0]


def lp_window_probe(builder: Callable, grids: Sequence[DirichletGrid],
                    w: WeightEvaluator, beta: float, p_list: Sequence[float],
                    shift: float = 1.0, trials: int = 48, seed: int = 0,
                    calibration_gate: float = 0.35,
                    operator: str = "") -> list:
    """Bracket p->p norms of the calibrated negative power across a ladder.

    builder maps a grid to the Hamiltonian; the power applied is fixed by
    the mandatory calibration pre-step on the coarsest grid and reused
    up the ladder so all cells measure the same operator family.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    rng = np.random.default_rng(seed)
    H0 = builder(grids[0])
    beta_prime, resid = _calibrate_beta_prime(H0, w, beta, shift, calibration_gate)
    out = []
    for grid in grids:
        H = builder(grid)
        T = fractional_power(H, -beta_prime, shift).data
        for p in p_list:
            upper = _interp_upper(T, p)
            lower = _lp_lower(T, p, trials, rng) if p != 2 else upper
            out.append(LpProbeResult(p=float(p), upper=upper, lower=lower,
                                     N=grid.N, beta_prime=beta_prime,
                                     calibration_residual=resid,
                                     operator=operator))
    return out


# -- subellipticity ---------------------------------------------------------

def periodic_laplacian(grid: Grid, order: int = 6) -> np.ndarray:
    h = 2.0 * grid.L / grid.N
    D2 = second_derivative(grid.N, h, order, bc="periodic")
    I = np.eye(grid.N)
    return np.kron(D2, I) + np.kron(I, D2)


def periodic_grushin(grid: Grid, order: int = 6) -> np.ndarray:
    """Periodic companion of the degenerate model: coefficient x1^2 on
    the second axis, sampled on the periodic box."""
    h = 2.0 * grid.L / grid.N
    D2 = second_derivative(grid.N, h, order, bc="periodic")
    I = np.eye(grid.N)
    return np.kron(D2, I) + np.kron(np.diag(grid.points**2), D2)


def periodic_single_field(grid: Grid, order: int = 6) -> np.ndarray:
    h = 2.0 * grid.L / grid.N
    D2 = second_derivative(grid.N, h, order, bc="periodic")
    return np.kron(D2, np.eye(grid.N))


@dataclass
class SubellipticityResult:
    tau: float
    ladder: list                  # (N, fitted C1)
    rel_changes: list
    stable: bool
    operator: str = ""

    def csv_rows(self):
        return [(self.operator, N, "", "", self.tau, "", f"{c:.12g}",
                 "stable" if self.stable else "growing")
                for N, c in self.ladder]


def _bump1(t: np.ndarray, w: float) -> np.ndarray:
    """Smooth profile supported on |t| <= w."""
    u = np.clip(t / w, -1.0, 1.0)
    return smoothstep((u + 1.0) / 0.35) * smoothstep((1.0 - u) / 0.35)


def subellipticity_probe(op_builder: Callable, tau: float,
                         N_list: Sequence[int] = (32, 48, 64), L: float = 4.0,
                         trials: int = 24, seed: int = 0,
                         gate: float = STABILITY_GATE,
                         operator: str = "") -> SubellipticityResult:
    """Fit the smallest constant in ||v||_{H^tau} <= C (||Pv|| + ||v||).

    Trial states are smooth compactly supported bumps modulated by plane
    waves.  The mode set mixes a fixed low-frequency block (so the
    maximizing state of a genuinely subelliptic operator is present at
    every refinement), near-Nyquist single-axis probes scaling with N
    (these expose a control operator that is blind to one direction),
    and seeded random draws.  Where the second-axis frequency is high the
    envelope width is also shrunk to the matching oscillator scale, which
    is the near-extremal shape for the degenerate model.
    """
    if not (0.0 < tau <= 2.0):
        raise ValueError("tau must lie in (0, 2]")
    rng = np.random.default_rng(seed)
    ladder = []
    for N in N_list:
        grid = Grid(2, int(N), L)
        P = op_builder(grid)
        pts = grid.points
        h = grid.h
        ktop = N // 2 - 2
        kmid = N // 4
        modes = [(0, 1), (1, 0), (1, 1), (2, 0), (0, 2), (2, 2), (0, 4),
                 (0, kmid), (kmid, 0), (kmid // 2, kmid // 2),
                 (0, ktop), (ktop, 0)]
        modes += [tuple(rng.integers(-kmid, kmid + 1, size=2)) for _ in range(trials)]
        C1 = 0.0
        for k1, k2 in modes:
            freq2 = np.pi * abs(k2) / L
            widths = [0.9 * L]
            if freq2 > 0:
                widths.append(float(np.clip(freq2**-0.5, 4.0 * h, 0.5 * L)))
            for w in widths:
                env = np.outer(_bump1(pts, w), _bump1(pts, 0.9 * L))
                phase = np.exp(2j * np.pi * (k1 * pts[:, None] + k2 * pts[None, :]) / (2.0 * L))
                v = (env * phase).ravel()
                nv = np.linalg.norm(v)
                if nv == 0:
                    continue
                # sobolev_norm carries the continuum measure; the plain
                # vector norms need the cell factor h to match it
                ratio = sobolev_norm(v, grid, tau) / (h * (np.linalg.norm(P @ v) + nv))
                C1 = max(C1, float(ratio))
        ladder.append((int(N), C1))
    rel = [abs(ladder[i + 1][1] - ladder[i][1]) / max(ladder[i][1], 1e-300)
           for i in range(len(ladder) - 1)]
    return SubellipticityResult(tau=tau, ladder=ladder, rel_changes=rel,
                                stable=all(c < gate for c in rel),
                                operator=operator)
