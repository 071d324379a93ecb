import numpy as np
import pytest

from lambda_soliton import (
    GLConfig,
    GLHistory,
    GridMismatch,
    GridSpec,
    Samples,
    SimulationConfig,
    StateVector,
    Uniform,
    build_initial_field,
    compare_lambda_gl,
    gl_simulate,
    gl_step,
    gl_weights,
    laplacian,
    simulate,
    trajectory_divergence,
)


def binom_weight(alpha: float, k: int) -> float:
    # falling-factorial form of (-1)^k * binom(alpha, k)
    out = 1.0
    for i in range(k):
        out *= (alpha - i) / (i + 1)
    return (-1) ** k * out


# --- weights ------------------------------------------------------------------

def test_weights_alpha_zero_is_identity():
    assert np.array_equal(gl_weights(0.0, 4), [1.0, 0.0, 0.0, 0.0])


def test_weights_alpha_half_known_values():
    w = gl_weights(0.5, 4)
    assert np.allclose(w, [1.0, -0.5, -0.125, -0.0625], atol=1e-15)
    want = [binom_weight(0.5, k) for k in range(4)]
    assert np.allclose(w, want, atol=1e-15)


def test_weights_match_binomial_oracle():
    for alpha in (0.1, 0.5, 0.9):
        w = gl_weights(alpha, 201)
        for k in range(201):
            want = binom_weight(alpha, k)
            assert abs(w[k] - want) <= 1e-13 * max(abs(want), 1e-30)


def test_weights_signs_and_decay():
    for alpha in (0.2, 0.5, 0.8):
        w = gl_weights(alpha, 50)
        assert w[0] == 1.0
        assert np.all(w[1:] < 0)
        assert np.all(np.abs(w[2:]) < np.abs(w[1:-1]))


def test_weight_partial_sums_decay_to_zero():
    # sums behave like K^(-alpha): positive, strictly decreasing, -> 0
    for alpha in (0.3, 0.5, 0.7):
        w = gl_weights(alpha, 100_001)
        sums = np.cumsum(w)
        assert np.all(sums > 0)
        assert np.all(np.diff(sums) < 0)
        assert sums[-1] <= 0.5 * sums[1000]
        assert sums[-1] < 0.05


def test_weights_validate_inputs():
    with pytest.raises(ValueError):
        gl_weights(1.0, 4)
    with pytest.raises(ValueError):
        gl_weights(-0.1, 4)
    with pytest.raises(ValueError):
        gl_weights(0.5, 0)


# --- stepping -----------------------------------------------------------------

def _cfg(n=7, lam=2.0, c=1j, dt=1e-3, steps=3, stride=1, ic=None):
    return SimulationConfig(GridSpec(n), lam, c, dt=dt, n_steps=steps,
                            snapshot_stride=stride,
                            ic=ic if ic is not None else Uniform(1.0))


def test_gl_step_zero_field_empty_history():
    cfg = _cfg(n=9)
    out = gl_step(GLHistory(), StateVector(np.zeros(9)), cfg, GLConfig(0.5, 1j))
    assert np.all(out.values == 0)
    assert out.time_index == 1


def test_gamma_one_reduces_to_lam2_step():
    from lambda_soliton import step

    cfg = _cfg(n=21, lam=2.0, c=0.7j, dt=4e-4)
    prev = build_initial_field(Uniform(1.0), cfg.grid)
    hist = GLHistory()
    hist.push(laplacian(prev.values, cfg.grid.h))
    got = gl_step(hist, prev, cfg, GLConfig(1.0, 0.7j))
    want = step(prev, cfg)
    assert np.max(np.abs(got.values - want.values)) < 1e-12


def dense_all_at_once(cfg, gl, n_levels):
    """Whole-history oracle: one linear system over all unknown time levels."""
    n = cfg.grid.n_points
    h = cfg.grid.h
    beta = gl.k_gamma * cfg.dt**gl.gamma
    w = gl_weights(1.0 - gl.gamma, n_levels + 1)

    L = np.zeros((n, n), dtype=complex)
    for j in range(1, n - 1):
        L[j, j - 1] = 1.0 / h**2
        L[j, j] = -2.0 / h**2
        L[j, j + 1] = 1.0 / h**2

    u0 = build_initial_field(cfg.ic, cfg.grid).values
    N = n_levels * n
    A = np.zeros((N, N), dtype=complex)
    b = np.zeros(N, dtype=complex)
    I = np.eye(n, dtype=complex)
    for s in range(n_levels):  # equation for level s+1
        rows = slice(s * n, (s + 1) * n)
        A[rows, rows] = I - beta * w[0] * L
        for k in range(1, s + 1):  # unknown levels s+1-k >= 1
            cols = slice((s - k) * n, (s - k + 1) * n)
            A[rows, cols] += -beta * w[k] * L
        if s >= 1:
            cols = slice((s - 1) * n, s * n)
            A[rows, cols] += -I
            b[rows] += beta * w[s + 1] * (L @ u0)
        else:
            b[rows] += u0 + beta * w[1] * (L @ u0)
        # boundary rows: identity, zero rhs
        for jb in (0, n - 1):
            A[s * n + jb, :] = 0.0
            A[s * n + jb, s * n + jb] = 1.0
            b[s * n + jb] = 0.0
    x = np.linalg.solve(A, b)
    return [x[s * n : (s + 1) * n] for s in range(n_levels)]


@pytest.mark.parametrize("gamma", [0.3, 0.5, 0.9])
def test_gl_step_matches_dense_all_at_once(gamma):
    cfg = _cfg(n=7, dt=2e-3, steps=3)
    gl = GLConfig(gamma, 0.8j)
    traj = gl_simulate(cfg, gl)
    oracle = dense_all_at_once(cfg, gl, 3)
    for snap, want in zip(traj.snapshots[1:], oracle):
        assert np.max(np.abs(snap.values - want)) < 1e-10


def test_gl_simulate_gamma_one_reduction():
    cfg = _cfg(n=41, lam=2.0, c=1j, dt=1e-4, steps=100, stride=10)
    lam_traj = simulate(cfg)
    gl_traj = gl_simulate(cfg, GLConfig(1.0, 1j))
    table = trajectory_divergence(lam_traj, gl_traj)
    assert table.max_linf <= 1e-12


def test_gl_simulate_zero_ic():
    cfg = _cfg(n=11, steps=10, ic=Uniform(0.0))
    traj = gl_simulate(cfg, GLConfig(0.6, 1j))
    for snap in traj.snapshots:
        assert np.all(snap.values == 0)


def test_memory_truncation_divergence_shrinks():
    cfg = _cfg(n=31, lam=2.0, c=0.5j, dt=5e-4, steps=200, stride=20)
    exact = gl_simulate(cfg, GLConfig(0.5, 0.5j))
    divergences = []
    for m in (10, 50, 100, 200):
        truncated = gl_simulate(cfg, GLConfig(0.5, 0.5j, memory_length=m))
        divergences.append(trajectory_divergence(exact, truncated).max_linf)
    assert divergences[-1] == 0.0  # capacity covers the whole run
    for a, b in zip(divergences, divergences[1:]):
        assert b <= a
    assert divergences[0] > divergences[-1]


def test_gl_config_validation():
    with pytest.raises(ValueError):
        GLConfig(0.0, 1j)
    with pytest.raises(ValueError):
        GLConfig(1.2, 1j)
    with pytest.raises(ValueError):
        GLConfig(0.5, 1j, memory_length=0)


# --- comparison harness ---------------------------------------------------------

def test_compare_lam2_vs_gamma1_all_small():
    cfg = _cfg(n=31, lam=2.0, c=1j, dt=2e-4, steps=50, stride=10)
    table = compare_lambda_gl(cfg, GLConfig(1.0, 1j))
    assert table.max_l2 <= 1e-12
    assert table.max_linf <= 1e-12


def test_divergence_self_is_zero():
    cfg = _cfg(n=21, lam=1.0, c=1j, dt=1e-4, steps=30, stride=10)
    traj = simulate(cfg)
    table = trajectory_divergence(traj, traj)
    assert table.max_l2 == 0.0 and table.max_linf == 0.0


def test_divergence_grid_mismatch():
    a = simulate(_cfg(n=21, steps=4))
    b = simulate(_cfg(n=31, steps=4))
    with pytest.raises(GridMismatch):
        trajectory_divergence(a, b)
    c = simulate(_cfg(n=21, steps=8))
    with pytest.raises(GridMismatch):
        trajectory_divergence(a, c)


def test_compare_exploratory_sweep_runs():
    # no asserted mapping between lam and gamma: just produce the table
    cfg = _cfg(n=31, lam=1.0, c=1j, dt=2e-4, steps=40, stride=10)
    summaries = {}
    for gamma in (0.5, 0.7, 0.9):
        table = compare_lambda_gl(cfg, GLConfig(gamma, 1j))
        summaries[gamma] = table.mean_l2
    assert all(v > 0 for v in summaries.values())
    best = min(summaries, key=summaries.get)
    assert best in (0.5, 0.7, 0.9)
