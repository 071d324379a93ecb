"""Implicit stepping for du/dt = C d2u/dx2 with a modified second difference.

The spatial operator is (u_{j+1} - lam*u_j + u_{j-1}) / h^2: only the center
coefficient is parametrized, the off-diagonal weights stay 1.  At lam = 2 this
is the textbook backward-Euler discretization.  Each step solves

    u_j - rho*(u_{j+1} - lam*u_j + u_{j-1}) = u_j^prev,   rho = C*dt/h^2,

a constant tridiagonal system with identity boundary rows.  The Thomas
elimination is written once as plain recurrences and shared by the one-shot
solver and the cached factorization, so cached and uncached runs are
bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivisionNearZero, SingularOrIllConditioned
from .field import SimulationConfig, StateVector, apply_boundary, build_initial_field

PIVOT_FLOOR = 1e-14
RESIDUAL_TOL = 1e-10
_TINY = 1e-300


@dataclass
class TridiagonalSystem:
    """Tridiagonal system A x = rhs with sub/sup of length n-1."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        self.sub = np.asarray(self.sub, dtype=np.complex128)
        self.diag = np.asarray(self.diag, dtype=np.complex128)
        self.sup = np.asarray(self.sup, dtype=np.complex128)
        self.rhs = np.asarray(self.rhs, dtype=np.complex128)
        n = len(self.diag)
        if n < 1 or len(self.sub) != n - 1 or len(self.sup) != n - 1 or len(self.rhs) != n:
            raise ValueError("inconsistent tridiagonal lengths")

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[1:] += self.sub * x[:-1]
        y[:-1] += self.sup * x[1:]
        return y


def _thomas_factor(sub: list, diag: list, sup: list) -> tuple[list, list]:
    """Forward elimination without pivoting: multipliers and pivots.

    Raises SingularOrIllConditioned when any pivot magnitude drops below
    PIVOT_FLOOR.
    """
    n = len(diag)
    low = [0j] * n
    den = [0j] * n
    den[0] = diag[0]
    for i in range(1, n):
        p = den[i - 1]
        if abs(p) < PIVOT_FLOOR:
            raise SingularOrIllConditioned(f"pivot {abs(p):.3e} at row {i - 1}")
        low[i] = sub[i - 1] / p
        den[i] = diag[i] - low[i] * sup[i - 1]
    if abs(den[n - 1]) < PIVOT_FLOOR:
        raise SingularOrIllConditioned(f"pivot {abs(den[n - 1]):.3e} at row {n - 1}")
    return low, den


def _thomas_substitute(low: list, den: list, sup: list, rhs: list) -> list:
    n = len(den)
    y = [0j] * n
    y[0] = rhs[0]
    for i in range(1, n):
        y[i] = rhs[i] - low[i] * y[i - 1]
    x = [0j] * n
    x[n - 1] = y[n - 1] / den[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (y[i] - sup[i] * x[i + 1]) / den[i]
    return x


def _check_residual(sys: TridiagonalSystem, x: np.ndarray) -> None:
    r = sys.matvec(x) - sys.rhs
    rel = np.linalg.norm(r) / max(np.linalg.norm(sys.rhs), _TINY)
    if not rel <= RESIDUAL_TOL:
        raise SingularOrIllConditioned(f"residual {rel:.3e} exceeds {RESIDUAL_TOL:.0e}")


def solve_tridiagonal(sys: TridiagonalSystem) -> np.ndarray:
    """Solve A x = rhs by Thomas elimination; verify the residual.

    Raises SingularOrIllConditioned instead of returning garbage when a pivot
    is tiny or the relative residual exceeds RESIDUAL_TOL.
    """
    low, den = _thomas_factor(sys.sub.tolist(), sys.diag.tolist(), sys.sup.tolist())
    x = np.array(
        _thomas_substitute(low, den, sys.sup.tolist(), sys.rhs.tolist()),
        dtype=np.complex128,
    )
    _check_residual(sys, x)
    return x


def _scheme_bands(cfg: SimulationConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = cfg.grid.n_points
    rho = cfg.rho
    diag = np.full(n, 1.0 + cfg.lam * rho, dtype=np.complex128)
    sub = np.full(n - 1, -rho, dtype=np.complex128)
    sup = np.full(n - 1, -rho, dtype=np.complex128)
    # identity rows keep the zero Dirichlet boundaries
    diag[0] = 1.0
    diag[-1] = 1.0
    sup[0] = 0.0
    sub[-1] = 0.0
    return sub, diag, sup


def assemble_step_system(prev: StateVector, cfg: SimulationConfig) -> TridiagonalSystem:
    """Per-step system: interior rows couple with -rho off / 1+lam*rho center,
    boundary rows are identity with zero right-hand side."""
    sub, diag, sup = _scheme_bands(cfg)
    rhs = prev.values.astype(np.complex128).copy()
    rhs[0] = 0.0
    rhs[-1] = 0.0
    return TridiagonalSystem(sub, diag, sup, rhs)


class StepFactorization:
    """Thomas factorization of the constant per-step matrix, reused across a
    run.  Produces bit-identical solutions to solve_tridiagonal on the same
    system because both paths execute the same recurrences."""

    def __init__(self, cfg: SimulationConfig):
        sub, diag, sup = _scheme_bands(cfg)
        self._sys_template = TridiagonalSystem(sub, diag, sup, np.zeros(len(diag)))
        self._sup_list = sup.tolist()
        self._low, self._den = _thomas_factor(sub.tolist(), diag.tolist(), self._sup_list)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = np.array(
            _thomas_substitute(self._low, self._den, self._sup_list, rhs.tolist()),
            dtype=np.complex128,
        )
        sys = self._sys_template
        sys.rhs = rhs
        _check_residual(sys, x)
        return x


def step(prev: StateVector, cfg: SimulationConfig) -> StateVector:
    """Advance one time level: assemble, solve, re-apply boundaries."""
    x = solve_tridiagonal(assemble_step_system(prev, cfg))
    out = apply_boundary(StateVector(x, prev.time_index))
    out.time_index = prev.time_index + 1
    return out


def amplification_factor(k: int, cfg: SimulationConfig) -> complex:
    """Exact per-step multiplier of the k-th discrete sine mode.

    Mode sin(k*pi*x/L) is an eigenvector of the interior operator; one
    implicit step scales it by g_k = 1 / (1 - rho*(2cos(k*pi*h/L) - lam)).
    """
    n = cfg.grid.n_points
    if not 1 <= k <= n - 2:
        raise ValueError(f"mode index must be in [1, {n - 2}], got {k}")
    theta = k * math.pi * cfg.grid.h / cfg.grid.domain_length
    denom = 1.0 - cfg.rho * (2.0 * math.cos(theta) - cfg.lam)
    if abs(denom) < PIVOT_FLOOR:
        raise DivisionNearZero(f"amplification denominator {abs(denom):.3e}")
    return 1.0 / denom


def resonant_wavenumber(lam: float, grid) -> float:
    """Wavenumber kappa* (radians per unit x) where |g| = 1: the undamped band
    at 2cos(kappa*h) = lam.  Defined for lam in (0, 2)."""
    if not 0.0 < lam < 2.0:
        raise ValueError(f"resonant band requires lam in (0, 2), got {lam}")
    return math.acos(lam / 2.0) / grid.h


@dataclass
class Trajectory:
    """Snapshots of one run at stride positions plus the final step."""

    config: SimulationConfig
    snapshots: list[StateVector]

    def times(self) -> list[int]:
        return [s.time_index for s in self.snapshots]


def simulate(cfg: SimulationConfig) -> Trajectory:
    """Run the full implicit scheme; deterministic for identical configs.

    Solver failures propagate as SingularOrIllConditioned with the failing
    step index attached.
    """
    state = build_initial_field(cfg.ic, cfg.grid)
    fact = StepFactorization(cfg)
    wanted = set(cfg.snapshot_steps())
    snapshots = [state.copy()] if 0 in wanted else []
    for m in range(1, cfg.n_steps + 1):
        rhs = state.values.copy()
        rhs[0] = 0.0
        rhs[-1] = 0.0
        try:
            x = fact.solve(rhs)
        except SingularOrIllConditioned as exc:
            raise SingularOrIllConditioned(f"step {m}: {exc}", step_index=m) from exc
        state = StateVector(x, m)
        state.values[0] = 0.0
        state.values[-1] = 0.0
        if m in wanted:
            snapshots.append(state.copy())
    return Trajectory(cfg, snapshots)
