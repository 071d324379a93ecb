"""Fractional-time stepping with Grunwald-Letnikov backward-difference weights.

The hypothesis under test: the lambda-parametrized scheme may correspond to a
diffusion equation whose time derivative is fractional.  The stepper here is
the reference side of that comparison:

    (u^{m+1} - u^m)/dt = K * D_t^{1-gamma} [ (u_{j-1} - 2u_j + u_{j+1})/h^2 ]

with the fractional derivative read as the GL backward sum over the history of
Laplacian-applied fields, including the implicit m+1 term.  At gamma = 1 the
weights collapse to [1, 0, 0, ...] and the step is plain backward Euler, i.e.
the lam = 2 scheme with C = K.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch
from .field import SimulationConfig, StateVector, apply_boundary, build_initial_field
from .scheme import Trajectory, TridiagonalSystem, solve_tridiagonal


@dataclass(frozen=True)
class GLConfig:
    """Fractional order gamma in (0, 1], coefficient, and history truncation.

    memory_length None means unbounded history (exact GL sum)."""

    gamma: float
    k_gamma: complex
    memory_length: int | None = None

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.memory_length is not None and self.memory_length < 1:
            raise ValueError(f"memory_length must be >= 1, got {self.memory_length}")


def gl_weights(alpha: float, count: int) -> np.ndarray:
    """First ``count`` GL weights w_k = (-1)^k * binom(alpha, k).

    Computed by the stable recurrence w_0 = 1, w_k = w_{k-1}*(1 - (alpha+1)/k).
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    w = np.empty(count, dtype=np.float64)
    w[0] = 1.0
    for k in range(1, count):
        w[k] = w[k - 1] * (1.0 - (alpha + 1.0) / k)
    return w


class GLHistory:
    """Past Laplacian-applied fields, newest first, bounded by capacity."""

    def __init__(self, capacity: int | None = None):
        self._entries: deque[np.ndarray] = deque(maxlen=capacity)

    @property
    def capacity(self) -> int | None:
        return self._entries.maxlen

    def push(self, lap: np.ndarray) -> None:
        self._entries.appendleft(np.asarray(lap, dtype=np.complex128))

    def newest_first(self, count: int) -> list[np.ndarray]:
        out = []
        for i, e in enumerate(self._entries):
            if i >= count:
                break
            out.append(e)
        return out

    def __len__(self) -> int:
        return len(self._entries)


def laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """Standard 3-point second difference over h^2; zero on boundary rows."""
    lap = np.zeros_like(values, dtype=np.complex128)
    lap[1:-1] = (values[:-2] - 2.0 * values[1:-1] + values[2:]) / (h * h)
    return lap


def gl_step(
    history: GLHistory,
    prev: StateVector,
    cfg: SimulationConfig,
    gl: GLConfig,
) -> StateVector:
    """One implicit fractional step; pushes the new Laplacian into history.

    The caller keeps ``history`` consistent: its entries are L u^m, L u^{m-1},
    ... newest first (gl_simulate seeds it with L u^0).
    """
    n = cfg.grid.n_points
    h = cfg.grid.h
    m = prev.time_index
    alpha = 1.0 - gl.gamma
    beta = gl.k_gamma * cfg.dt**gl.gamma

    limit = m + 1 if gl.memory_length is None else min(m + 1, gl.memory_length)
    terms = history.newest_first(limit)
    rhs = prev.values.astype(np.complex128).copy()
    if terms:
        w = gl_weights(alpha, len(terms) + 1)
        rhs = rhs + beta * np.tensordot(w[1:], np.stack(terms), axes=1)
    rhs[0] = 0.0
    rhs[-1] = 0.0

    mu = beta / (h * h)
    diag = np.full(n, 1.0 + 2.0 * mu, dtype=np.complex128)
    sub = np.full(n - 1, -mu, dtype=np.complex128)
    sup = np.full(n - 1, -mu, dtype=np.complex128)
    diag[0] = 1.0
    diag[-1] = 1.0
    sup[0] = 0.0
    sub[-1] = 0.0

    x = solve_tridiagonal(TridiagonalSystem(sub, diag, sup, rhs))
    out = apply_boundary(StateVector(x, m))
    out.time_index = m + 1
    history.push(laplacian(out.values, h))
    return out


def gl_simulate(cfg: SimulationConfig, gl: GLConfig) -> Trajectory:
    """Run the fractional stepper with the same snapshot contract as simulate."""
    state = build_initial_field(cfg.ic, cfg.grid)
    history = GLHistory(gl.memory_length)
    history.push(laplacian(state.values, cfg.grid.h))
    wanted = set(cfg.snapshot_steps())
    snapshots = [state.copy()] if 0 in wanted else []
    for m in range(1, cfg.n_steps + 1):
        state = gl_step(history, state, cfg, gl)
        if m in wanted:
            snapshots.append(state.copy())
    return Trajectory(cfg, snapshots)


@dataclass
class DivergenceTable:
    """Per-snapshot distances between two trajectories plus summaries."""

    time_indices: list[int]
    l2: list[float]
    linf: list[float]

    @property
    def max_l2(self) -> float:
        return max(self.l2)

    @property
    def max_linf(self) -> float:
        return max(self.linf)

    @property
    def mean_l2(self) -> float:
        return sum(self.l2) / len(self.l2)

    @property
    def mean_linf(self) -> float:
        return sum(self.linf) / len(self.linf)


def trajectory_divergence(a: Trajectory, b: Trajectory) -> DivergenceTable:
    """Snapshot-wise L2 and max-norm distances; grids and times must match."""
    ga, gb = a.config.grid, b.config.grid
    if ga.n_points != gb.n_points or ga.domain_length != gb.domain_length:
        raise GridMismatch("trajectories use different grids")
    if a.times() != b.times():
        raise GridMismatch("trajectories sample different time levels")
    times, l2, linf = [], [], []
    for sa, sb in zip(a.snapshots, b.snapshots):
        d = sa.values - sb.values
        times.append(sa.time_index)
        l2.append(float(np.linalg.norm(d)))
        linf.append(float(np.max(np.abs(d))) if len(d) else 0.0)
    return DivergenceTable(times, l2, linf)


def compare_lambda_gl(cfg: SimulationConfig, gl: GLConfig) -> DivergenceTable:
    """Divergence between the lambda-scheme run of ``cfg`` and the fractional
    run sharing grid, dt, and initial condition."""
    from .scheme import simulate

    return trajectory_divergence(simulate(cfg), gl_simulate(cfg, gl))
