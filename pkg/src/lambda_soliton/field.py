"""Grid geometry, complex field state, and initial/boundary conditions.

The field is complex throughout: the diffusion coefficient is (usually pure)
imaginary, so even a real initial profile turns complex after one step.
Boundaries are zero Dirichlet; ``apply_boundary`` enforces them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import InvalidRamp, SamplesLengthMismatch


@dataclass(frozen=True)
class GridSpec:
    """Uniform 1-D grid with ``n_points`` nodes including both boundaries."""

    n_points: int
    domain_length: float = 1.0

    def __post_init__(self):
        if self.n_points < 5:
            raise ValueError(f"n_points must be >= 5, got {self.n_points}")
        if not self.domain_length > 0:
            raise ValueError(f"domain_length must be > 0, got {self.domain_length}")

    @property
    def h(self) -> float:
        """Node spacing, exactly domain_length / (n_points - 1)."""
        return self.domain_length / (self.n_points - 1)

    def node_positions(self) -> np.ndarray:
        return np.linspace(0.0, self.domain_length, self.n_points)


@dataclass
class StateVector:
    """Complex field samples at one time level.  Boundary nodes are zero."""

    values: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.time_index < 0:
            raise ValueError("time_index must be >= 0")

    def copy(self) -> "StateVector":
        return StateVector(self.values.copy(), self.time_index)


@dataclass(frozen=True)
class Uniform:
    """Constant interior level; the zero boundaries leave a jump at each edge."""

    level: float


@dataclass(frozen=True)
class UniformWithEdgeRamp:
    """Plateau at ``level`` descending linearly with slope ``gradient`` (per
    unit x) over ``ramp_width`` (fraction of the domain) toward each boundary."""

    level: float
    gradient: float
    ramp_width: float


@dataclass
class Samples:
    """Explicit complex node values; length must equal the grid size."""

    values: Sequence[complex]


InitialCondition = Union[Uniform, UniformWithEdgeRamp, Samples]


def apply_boundary(state: StateVector) -> StateVector:
    """Return a copy with both boundary nodes forced to zero."""
    out = state.copy()
    out.values[0] = 0.0
    out.values[-1] = 0.0
    return out


def build_initial_field(ic: InitialCondition, grid: GridSpec) -> StateVector:
    """Materialize an initial condition on the grid at time index 0.

    Raises:
        SamplesLengthMismatch: ``Samples`` sequence length != n_points.
        InvalidRamp: ramp width outside (0, 0.5].
    """
    n = grid.n_points
    if isinstance(ic, Uniform):
        values = np.full(n, complex(ic.level), dtype=np.complex128)
    elif isinstance(ic, UniformWithEdgeRamp):
        if not (0.0 < ic.ramp_width <= 0.5):
            raise InvalidRamp(f"ramp_width must be in (0, 0.5], got {ic.ramp_width}")
        w = ic.ramp_width * grid.domain_length
        x = grid.node_positions()
        values = np.full(n, complex(ic.level), dtype=np.complex128)
        left = x < w
        values[left] = ic.level - ic.gradient * (w - x[left])
        right = x > grid.domain_length - w
        values[right] = ic.level - ic.gradient * (x[right] - (grid.domain_length - w))
    elif isinstance(ic, Samples):
        if len(ic.values) != n:
            raise SamplesLengthMismatch(
                f"expected {n} samples, got {len(ic.values)}"
            )
        values = np.asarray(ic.values, dtype=np.complex128).copy()
    else:
        raise TypeError(f"unknown initial condition {type(ic).__name__}")
    return apply_boundary(StateVector(values, time_index=0))


@dataclass
class SimulationConfig:
    """Everything one run needs: grid, scheme parameter, coefficient, stepping.

    ``snapshot_stride`` selects which time levels a trajectory keeps: indices
    0, s, 2s, ... plus always the final step.
    """

    grid: GridSpec
    lam: float
    c_coef: complex
    dt: float
    n_steps: int
    snapshot_stride: int = 1
    ic: InitialCondition = field(default_factory=lambda: Uniform(1.0))

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.snapshot_stride < 1:
            raise ValueError(f"snapshot_stride must be >= 1, got {self.snapshot_stride}")

    @property
    def rho(self) -> complex:
        """Dimensionless step coupling c_coef * dt / h^2."""
        h = self.grid.h
        return complex(self.c_coef) * self.dt / (h * h)

    def snapshot_steps(self) -> list[int]:
        steps = list(range(0, self.n_steps + 1, self.snapshot_stride))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return steps
