import math

import numpy as np
import pytest

from lambda_soliton import (
    GridSpec,
    Samples,
    SimulationConfig,
    SingularOrIllConditioned,
    StateVector,
    TridiagonalSystem,
    Uniform,
    amplification_factor,
    assemble_step_system,
    build_initial_field,
    simulate,
    solve_tridiagonal,
    step,
)
from lambda_soliton.scheme import StepFactorization


def dense_matrix(sys: TridiagonalSystem) -> np.ndarray:
    n = len(sys.diag)
    A = np.zeros((n, n), dtype=complex)
    A[np.arange(n), np.arange(n)] = sys.diag
    A[np.arange(1, n), np.arange(n - 1)] = sys.sub
    A[np.arange(n - 1), np.arange(1, n)] = sys.sup
    return A


def dense_solve(sys: TridiagonalSystem) -> np.ndarray:
    # independent pivoted-elimination oracle (LAPACK through numpy)
    return np.linalg.solve(dense_matrix(sys), sys.rhs)


def random_system(rng, n) -> TridiagonalSystem:
    def carr(size):
        return rng.normal(size=size) + 1j * rng.normal(size=size)

    diag = carr(n) + 3.0  # keep comfortably nonsingular
    return TridiagonalSystem(carr(n - 1), diag, carr(n - 1), carr(n))


# --- solve_tridiagonal ------------------------------------------------------

def test_solve_identity():
    b = np.array([1 + 2j, -3.0, 0.5j, 4.0])
    sys = TridiagonalSystem(np.zeros(3), np.ones(4), np.zeros(3), b)
    assert np.array_equal(solve_tridiagonal(sys), b)


def test_solve_symmetric_2x2():
    sys = TridiagonalSystem([1.0], [2.0, 2.0], [1.0], [3.0, 3.0])
    x = solve_tridiagonal(sys)
    assert np.allclose(x, [1.0, 1.0], atol=1e-14)


def test_solve_matches_dense_oracle():
    rng = np.random.default_rng(7)
    for _ in range(200):
        sys = random_system(rng, 8)
        x = solve_tridiagonal(sys)
        assert np.max(np.abs(x - dense_solve(sys))) < 1e-12


def test_solve_singular_raises():
    sys = TridiagonalSystem([1.0], [0.0, 1.0], [1.0], [1.0, 1.0])
    with pytest.raises(SingularOrIllConditioned):
        solve_tridiagonal(sys)


# --- assemble_step_system ---------------------------------------------------

def _cfg(n=5, lam=1.0, c=1j, dt=None, steps=1, L=1.0):
    grid = GridSpec(n, L)
    return SimulationConfig(grid, lam, c, dt=dt if dt else grid.h**2, n_steps=steps)


def test_assemble_small_dt_is_near_identity():
    cfg = _cfg(dt=1e-300)
    prev = build_initial_field(Uniform(1.0), cfg.grid)
    sys = assemble_step_system(prev, cfg)
    assert np.allclose(sys.diag, 1.0, atol=1e-12)
    assert np.allclose(sys.sub, 0.0, atol=1e-12)
    assert np.array_equal(sys.rhs[1:-1], prev.values[1:-1])


def test_assemble_lam2_real_c_is_backward_euler():
    cfg = _cfg(n=7, lam=2.0, c=0.7, dt=2e-3)
    rho = cfg.rho
    prev = build_initial_field(Uniform(1.0), cfg.grid)
    sys = assemble_step_system(prev, cfg)
    assert np.all(sys.diag[1:-1] == 1.0 + 2.0 * rho)
    assert np.all(sys.sub[:-1] == -rho)
    assert np.all(sys.sup[1:] == -rho)
    assert sys.diag[0] == 1.0 and sys.diag[-1] == 1.0
    assert sys.sup[0] == 0.0 and sys.sub[-1] == 0.0


def test_assemble_hand_case_n5():
    # n=5, lam=1, C=i, dt=h^2 gives rho = i exactly
    cfg = _cfg(n=5, lam=1.0, c=1j)
    assert cfg.rho == 1j
    prev = StateVector(np.array([0, 2.0, -1.0, 0.5, 0], dtype=complex))
    sys = assemble_step_system(prev, cfg)
    assert np.array_equal(sys.diag, [1.0, 1 + 1j, 1 + 1j, 1 + 1j, 1.0])
    assert np.array_equal(sys.sub, [-1j, -1j, -1j, 0.0])
    assert np.array_equal(sys.sup, [0.0, -1j, -1j, -1j])
    assert np.array_equal(sys.rhs, [0.0, 2.0, -1.0, 0.5, 0.0])


# --- step -------------------------------------------------------------------

def test_step_zero_fixed_point():
    cfg = _cfg(n=9)
    out = step(StateVector(np.zeros(9)), cfg)
    assert np.all(out.values == 0)
    assert out.time_index == 1


def test_step_matches_dense_oracle():
    rng = np.random.default_rng(3)
    for n in (5, 8, 12):
        cfg = _cfg(n=n, lam=0.8, c=1.3j, dt=1e-3)
        vals = rng.normal(size=n) + 1j * rng.normal(size=n)
        vals[0] = vals[-1] = 0.0
        prev = StateVector(vals)
        got = step(prev, cfg)
        want = dense_solve(assemble_step_system(prev, cfg))
        assert np.max(np.abs(got.values - want)) < 1e-12


def test_step_sine_mode_eigenvector():
    cfg = _cfg(n=41, lam=2.0, c=1j, dt=1e-4)
    x = cfg.grid.node_positions()
    for k in (1, 3, 7):
        mode = np.sin(k * np.pi * x)
        out = step(StateVector(mode.astype(complex)), cfg)
        g = amplification_factor(k, cfg)
        assert np.max(np.abs(out.values - g * mode)) < 1e-10


def test_step_linearity():
    rng = np.random.default_rng(11)
    cfg = _cfg(n=17, lam=1.2, c=0.9j, dt=5e-4)
    for _ in range(5):
        u = rng.normal(size=17) + 1j * rng.normal(size=17)
        v = rng.normal(size=17) + 1j * rng.normal(size=17)
        u[0] = u[-1] = v[0] = v[-1] = 0.0
        a = complex(rng.normal(), rng.normal())
        b = complex(rng.normal(), rng.normal())
        combined = step(StateVector(a * u + b * v), cfg).values
        separate = a * step(StateVector(u), cfg).values + b * step(StateVector(v), cfg).values
        assert np.max(np.abs(combined - separate)) < 1e-10


# --- amplification_factor ---------------------------------------------------

def test_amplification_tiny_dt_limit():
    cfg = _cfg(n=21, dt=1e-300)
    for k in (1, 5, 19):
        assert abs(amplification_factor(k, cfg) - 1.0) < 1e-12


def test_amplification_bounded_for_imaginary_c():
    for lam in (0.1, 0.5, 1.0, 1.5, 1.9):
        for c_im in (0.5, 1.0, 2.8):
            cfg = _cfg(n=41, lam=lam, c=c_im * 1j, dt=3e-4)
            for k in range(1, 40):
                assert abs(amplification_factor(k, cfg)) <= 1.0 + 1e-15


def test_amplification_lam2_series_form():
    cfg = _cfg(n=101, lam=2.0, c=1j, dt=2e-4)
    rho = cfg.rho
    for k in (1, 2, 3):
        eps = 1.0 - math.cos(k * math.pi * cfg.grid.h)
        want = 1.0 / (1.0 + 2.0 * rho * eps)
        assert abs(amplification_factor(k, cfg) - want) < 1e-14


def test_amplification_mode_range_checked():
    cfg = _cfg(n=11)
    with pytest.raises(ValueError):
        amplification_factor(0, cfg)
    with pytest.raises(ValueError):
        amplification_factor(10, cfg)


# --- simulate ---------------------------------------------------------------

def test_simulate_single_step_snapshots():
    cfg = _cfg(n=11, dt=1e-4, steps=1)
    traj = simulate(cfg)
    assert traj.times() == [0, 1]


def test_simulate_zero_ic_stays_zero():
    grid = GridSpec(11)
    cfg = SimulationConfig(grid, 1.0, 1j, dt=1e-4, n_steps=20, snapshot_stride=5,
                           ic=Uniform(0.0))
    traj = simulate(cfg)
    for snap in traj.snapshots:
        assert np.all(snap.values == 0)


def test_simulate_mode_evolution():
    grid = GridSpec(41)
    x = grid.node_positions()
    cfg = SimulationConfig(grid, 2.0, 1j, dt=1e-4, n_steps=60, snapshot_stride=10,
                           ic=Samples(np.sin(np.pi * x)))
    traj = simulate(cfg)
    g1 = amplification_factor(1, cfg)
    for snap in traj.snapshots:
        want = g1 ** snap.time_index * np.sin(np.pi * x)
        assert np.max(np.abs(snap.values - want)) < 1e-8


def test_simulate_norm_never_increases():
    for lam in (0.5, 1.0, 1.7):
        grid = GridSpec(101)
        cfg = SimulationConfig(grid, lam, 1j, dt=2.5e-5, n_steps=300,
                               snapshot_stride=1, ic=Uniform(1.0))
        traj = simulate(cfg)
        norms = [np.linalg.norm(s.values) for s in traj.snapshots]
        for a, b in zip(norms, norms[1:]):
            assert b <= a * (1 + 1e-12)


def test_simulate_deterministic_bitwise():
    cfg = _cfg(n=31, lam=0.9, c=1j, dt=1e-4, steps=50)
    t1 = simulate(cfg)
    t2 = simulate(cfg)
    for a, b in zip(t1.snapshots, t2.snapshots):
        assert np.array_equal(a.values, b.values)


def test_simulate_cached_equals_stepwise_bitwise():
    # cached factorization inside simulate vs per-step factor+solve
    grid = GridSpec(41)
    cfg = SimulationConfig(grid, 1.3, 0.8j, dt=5e-5, n_steps=40, snapshot_stride=1,
                           ic=Uniform(1.0))
    traj = simulate(cfg)
    state = build_initial_field(cfg.ic, grid)
    for snap in traj.snapshots[1:]:
        state = step(state, cfg)
        assert np.array_equal(state.values, snap.values)


def test_factorization_reuse_is_bitwise_stable():
    cfg = _cfg(n=21, lam=0.7, c=1.1j, dt=3e-4)
    fact = StepFactorization(cfg)
    rhs = np.zeros(21, dtype=complex)
    rhs[10] = 1.0 + 0.5j
    x1 = fact.solve(rhs.copy())
    x2 = fact.solve(rhs.copy())
    assert np.array_equal(x1, x2)


def test_simulate_spectral_oracle():
    # independent route: diagonalize in the discrete sine basis
    scipy_fft = pytest.importorskip("scipy.fft")
    grid = GridSpec(41)
    cfg = SimulationConfig(grid, 0.8, 1j, dt=1e-4, n_steps=80, snapshot_stride=20,
                           ic=Uniform(1.0))
    traj = simulate(cfg)
    n = grid.n_points
    k = np.arange(1, n - 1)
    g = 1.0 / (1.0 - cfg.rho * (2.0 * np.cos(k * np.pi * grid.h) - cfg.lam))
    u0 = build_initial_field(cfg.ic, grid).values
    coeff = scipy_fft.dst(u0[1:-1], type=1)
    for snap in traj.snapshots:
        want = np.zeros(n, dtype=complex)
        want[1:-1] = scipy_fft.idst(coeff * g ** snap.time_index, type=1)
        assert np.max(np.abs(snap.values - want)) < 1e-9
