"""The three studies: formation threshold, velocity sweeps, height traces.

Protocols here are calibrated against the scheme's dispersion relation.  The
undamped band sits at 2cos(kappa*h) = lam, so structures travel at roughly
2*|C|*sin(kappa*h)/h while everything else decays like |1 - i*y|^{-m}.  The
defaults keep per-snapshot displacement inside the tracking gate and stop
velocity runs before the mirror packets meet at the center.
"""

from __future__ import annotations

import hashlib
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketInvalid, TooFewRows, TooFewSamples
from .field import GridSpec, Samples, SimulationConfig, Uniform, UniformWithEdgeRamp
from .peaks import (
    EventRecord,
    PeakTrack,
    TrackingParams,
    detect_collisions,
    detect_reflections,
    estimate_velocity,
    height_series,
    track_peaks,
)
from .scheme import resonant_wavenumber, simulate

DEFAULT_N_POINTS = 201
FORMATION_DT = 2.5e-5
FORMATION_STEPS = 800
FORMATION_STRIDE = 2
HEIGHT_DT = 1e-5
HEIGHT_STRIDE = 2
HEIGHT_CROSSINGS = 1.3
HEIGHT_SKIP_CROSSINGS = 0.25
RAMP_WIDTH = 0.1


@dataclass(frozen=True)
class FormationCriteria:
    """Operational definition of "a structure formed".

    A run forms a structure when some track survives at least
    ``min_lifetime_snapshots`` and its median height clears ``min_height``.
    The absolute floor is what gives the linear scheme an amplitude threshold
    at all: detection alone is scale-invariant.
    """

    min_lifetime_snapshots: int = 20
    prominence_frac: float = 0.05
    min_height: float = 2e-5


@dataclass(frozen=True)
class SweepRow:
    c_coef: complex
    lam: float
    velocity_abs: float | None
    velocity_rel: float | None
    n_tracks: int
    formation_step: int | None


@dataclass
class SweepResult:
    rows: list[SweepRow]
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ThresholdResult:
    lam: float
    c_coef: complex
    epsilon_lo: float
    epsilon_hi: float
    epsilon_star: float
    n_bisections: int


@dataclass
class HeightTrace:
    c_coef: complex
    series: list[tuple[int, float]]
    events: list[EventRecord]
    plateau_height: float


@dataclass
class HeightTraceBundle:
    lam: float
    traces: list[HeightTrace]
    metadata: dict = field(default_factory=dict)


def _worker_count() -> int:
    raw = os.environ.get("LAMBDA_SOLITON_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"LAMBDA_SOLITON_THREADS must be an integer >= 1, got {raw!r}")
    if n < 1:
        raise ValueError(f"LAMBDA_SOLITON_THREADS must be >= 1, got {n}")
    return n


def _ordered_map(fn, jobs):
    """Map preserving job order; worker pool capped by LAMBDA_SOLITON_THREADS."""
    workers = _worker_count()
    if workers == 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def config_digest(payload: str) -> str:
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def formation_config(
    lam: float,
    c_coef: complex,
    ic=None,
    n_points: int = DEFAULT_N_POINTS,
    dt: float = FORMATION_DT,
    n_steps: int = FORMATION_STEPS,
    stride: int = FORMATION_STRIDE,
) -> SimulationConfig:
    """Default protocol for formation and threshold runs."""
    return SimulationConfig(
        grid=GridSpec(n_points),
        lam=lam,
        c_coef=c_coef,
        dt=dt,
        n_steps=n_steps,
        snapshot_stride=stride,
        ic=ic if ic is not None else Uniform(1.0),
    )


def crossing_steps(lam: float, c_coef: complex, grid: GridSpec, dt: float) -> int:
    """Steps for one wall-to-wall transit of the resonant packet."""
    r = abs(c_coef) * dt / grid.h**2
    kappa = resonant_wavenumber(lam, grid)
    return math.ceil((grid.n_points - 1) / (2.0 * r * math.sin(kappa * grid.h)))


def height_config(lam: float, c_coef: complex) -> SimulationConfig:
    """Default protocol for height traces.

    The clock is slow enough that the fastest packets stay inside the tracking
    gate, and the run covers a fixed number of domain crossings (first central
    collision plus first wall reflection) so every C is observed over the same
    phase of its life.  Past the first reflection the counter-moving overlap
    freezes |u| into fringe combs and positional event detection goes blind.
    """
    grid = GridSpec(DEFAULT_N_POINTS)
    n_steps = min(4000, max(150, math.ceil(
        HEIGHT_CROSSINGS * crossing_steps(lam, c_coef, grid, HEIGHT_DT))))
    return SimulationConfig(
        grid=grid,
        lam=lam,
        c_coef=c_coef,
        dt=HEIGHT_DT,
        n_steps=n_steps,
        snapshot_stride=HEIGHT_STRIDE,
        ic=Uniform(1.0),
    )


def probe_wavepacket(grid: GridSpec, lam: float, center: float = 0.2, width_cells: float = 12.0) -> Samples:
    """Gaussian envelope on the resonant carrier exp(i*kappa*x): a directed
    packet that rides the undamped band, for clean velocimetry."""
    kappa = resonant_wavenumber(lam, grid)
    x = grid.node_positions()
    sigma = width_cells * grid.h
    env = np.exp(-(((x - center) / sigma) ** 2))
    return Samples(env * np.exp(1j * kappa * x))


def probe_config(lam: float, c_coef: complex, n_points: int = DEFAULT_N_POINTS) -> SimulationConfig:
    """Transit-sized run for one velocity measurement: the packet crosses from
    x=0.2 toward x=0.8 and the run stops before it reaches the far wall."""
    grid = GridSpec(n_points)
    c_mag = abs(c_coef)
    if c_mag == 0:
        raise ValueError("velocity probe needs a nonzero coefficient")
    r = 1.0
    dt = r * grid.h**2 / c_mag
    kappa = resonant_wavenumber(lam, grid)
    cells_per_step = 2.0 * r * math.sin(kappa * grid.h)
    n_steps = max(40, math.ceil(0.6 * (n_points - 1) / cells_per_step))
    return SimulationConfig(
        grid=grid,
        lam=lam,
        c_coef=c_coef,
        dt=dt,
        n_steps=n_steps,
        snapshot_stride=1,
        ic=probe_wavepacket(grid, lam),
    )


def dominant_track(tracks: list[PeakTrack]) -> PeakTrack | None:
    """Longest-lived track; ties broken by greater mean height, then lower id."""
    if not tracks:
        return None
    def key(tr: PeakTrack):
        heights = tr.heights()
        mean_h = sum(heights) / len(heights) if heights else 0.0
        return (-tr.lifetime_snapshots(), -mean_h, tr.track_id)
    return min(tracks, key=key)


def formed(cfg: SimulationConfig, criteria: FormationCriteria = FormationCriteria()) -> bool:
    """True when the run produces a long-enough track above the height floor."""
    traj = simulate(cfg)
    params = TrackingParams(prominence_frac=criteria.prominence_frac)
    for tr in track_peaks(traj, params=params):
        if tr.lifetime_snapshots() < criteria.min_lifetime_snapshots:
            continue
        if float(np.median(tr.heights())) >= criteria.min_height:
            return True
    return False


def threshold_ic(epsilon: float, mode: str):
    """Initial condition for the threshold knob.

    jump: uniform level epsilon (the edge jump is the gradient source).
    ramp: plateau epsilon*width with slope epsilon, continuous at the walls.
    """
    if mode == "jump":
        return Uniform(epsilon)
    if mode == "ramp":
        return UniformWithEdgeRamp(level=epsilon * RAMP_WIDTH, gradient=epsilon, ramp_width=RAMP_WIDTH)
    raise ValueError(f"unknown threshold mode {mode!r}")


def threshold_gradient(
    lam: float,
    c_coef: complex,
    bracket: tuple[float, float],
    tol: float,
    mode: str = "jump",
    criteria: FormationCriteria = FormationCriteria(),
    formed_fn=None,
) -> ThresholdResult:
    """Bisect the initial-condition amplitude knob until hi - lo <= tol.

    ``formed_fn`` (epsilon -> bool) replaces the simulation-backed predicate in
    tests.  Raises BracketInvalid unless formed(hi) and not formed(lo).
    """
    eps_lo, eps_hi = bracket
    if not (0 < eps_lo < eps_hi):
        raise BracketInvalid(f"bad bracket {bracket}")
    if not tol > 0:
        raise ValueError("tol must be > 0")

    if formed_fn is None:
        def formed_fn(eps: float) -> bool:
            return formed(formation_config(lam, c_coef, ic=threshold_ic(eps, mode)), criteria)

    if not formed_fn(eps_hi):
        raise BracketInvalid(f"not formed at bracket top {eps_hi}")
    if formed_fn(eps_lo):
        raise BracketInvalid(f"already formed at bracket bottom {eps_lo}")

    n_bisections = 0
    while eps_hi - eps_lo > tol:
        mid = 0.5 * (eps_lo + eps_hi)
        if formed_fn(mid):
            eps_hi = mid
        else:
            eps_lo = mid
        n_bisections += 1
    return ThresholdResult(lam, c_coef, eps_lo, eps_hi, 0.5 * (eps_lo + eps_hi), n_bisections)


def _measure_velocity_row(args) -> SweepRow:
    lam, c_coef, cfg, criteria = args
    traj = simulate(cfg)
    tracks = track_peaks(traj)
    dom = dominant_track(tracks)
    velocity = None
    formation_step = None
    if dom is not None:
        formation_step = dom.samples[0][0]
        try:
            velocity = abs(estimate_velocity(dom))
        except TooFewSamples:
            velocity = None
    return SweepRow(c_coef, lam, velocity, None, len(tracks), formation_step)


def velocity_vs_lambda(
    c_list: list[complex],
    lambda_grid: list[float],
    cfg_base: SimulationConfig | None = None,
    ic_mode: str = "probe",
    criteria: FormationCriteria = FormationCriteria(),
) -> SweepResult:
    """Velocity of the dominant structure per (C, lambda).

    ic_mode "probe" launches a resonant wavepacket sized to one transit (valid
    across the whole lambda range); "uniform" keeps the flat initial condition
    and reports whatever the dominant track does.  Rows sorted by (|C|, lam);
    velocity_rel normalizes by the lam = 1.0 row of the same C when present.
    Rows without a measurable track carry None, never fabricated zeros.
    """
    if ic_mode not in ("probe", "uniform"):
        raise ValueError(f"unknown ic_mode {ic_mode!r}")
    jobs = []
    for c_coef in sorted(c_list, key=lambda c: (abs(c), c.real, c.imag)):
        for lam in sorted(lambda_grid):
            if ic_mode == "probe":
                cfg = probe_config(lam, c_coef)
            elif cfg_base is not None:
                cfg = SimulationConfig(
                    grid=cfg_base.grid, lam=lam, c_coef=c_coef, dt=cfg_base.dt,
                    n_steps=cfg_base.n_steps, snapshot_stride=cfg_base.snapshot_stride,
                    ic=cfg_base.ic,
                )
            else:
                cfg = formation_config(lam, c_coef)
            jobs.append((lam, c_coef, cfg, criteria))

    rows = _ordered_map(_measure_velocity_row, jobs)

    by_c: dict[complex, float] = {}
    for row in rows:
        if abs(row.lam - 1.0) < 1e-12 and row.velocity_abs is not None:
            by_c[row.c_coef] = row.velocity_abs
    normalized = []
    for row in rows:
        rel = None
        ref = by_c.get(row.c_coef)
        if ref is not None and row.velocity_abs is not None and ref != 0:
            rel = row.velocity_abs / ref
        normalized.append(SweepRow(row.c_coef, row.lam, row.velocity_abs, rel,
                                   row.n_tracks, row.formation_step))

    payload = f"velocity|{ic_mode}|{[str(c) for c in c_list]}|{list(lambda_grid)}"
    meta = {
        "experiment": "velocity_vs_lambda",
        "ic_mode": ic_mode,
        "config_digest": config_digest(payload),
        "timestamp": time.time(),
    }
    return SweepResult(normalized, meta)


def _dedupe_events(events: list[EventRecord], time_window: int, radius: float) -> list[EventRecord]:
    """Collapse fringe-pair multiplicity: one representative (the tallest) per
    cluster of same-kind events close in both time and position.  Clusters at
    the two walls stay separate even when their events interleave in time."""
    clusters: list[list[EventRecord]] = []
    for ev in sorted(events, key=lambda e: (e.time_index, e.position, e.kind)):
        home = None
        for cl in clusters:
            if (cl[0].kind == ev.kind
                    and ev.time_index - cl[-1].time_index <= time_window
                    and abs(ev.position - cl[0].position) <= radius):
                home = cl
                break
        if home is None:
            clusters.append([ev])
        else:
            home.append(ev)
    out = [max(cl, key=lambda e: e.peak_height) for cl in clusters]
    out.sort(key=lambda e: (e.time_index, e.position))
    return out


def _series_pulses(heights: list[float]) -> list[int]:
    """Interior local maxima whose prominence over the immediately flanking
    minima is at least half the pulse height."""
    out = []
    n = len(heights)
    for i in range(1, n - 1):
        if not (heights[i] > heights[i - 1] and heights[i] > heights[i + 1]):
            continue
        j = i - 1
        while j > 0 and heights[j - 1] < heights[j]:
            j -= 1
        left = heights[j]
        j = i + 1
        while j < n - 1 and heights[j + 1] < heights[j]:
            j += 1
        right = heights[j]
        if heights[i] - max(left, right) >= 0.5 * heights[i]:
            out.append(i)
    return out


def _compression_pulses(
    tracks: list[PeakTrack],
    band: float,
    domain_length: float,
    start_step: int,
) -> list[EventRecord]:
    """Events invisible to positional kinematics: a quasi-static track whose
    height swells and relaxes marks an envelope passing over a locked fringe.
    Near a wall that is the packet compressing against the boundary
    (reflection); mid-domain it is two envelopes overlapping (collision)."""
    events = []
    for tr in tracks:
        samples = [s for s in tr.samples if s[0] >= start_step]
        if len(samples) < 7:
            continue
        pos = [s[1] for s in samples]
        if max(pos) - min(pos) > 0.015 * domain_length:
            continue
        heights = [s[2] for s in samples]
        for i in _series_pulses(heights):
            t, p, hgt = samples[i]
            kind = "reflection" if (p <= band or p >= domain_length - band) else "collision"
            events.append(EventRecord(kind, t, p, (tr.track_id,), hgt))
    return events


def height_vs_time(
    c_list: list[complex],
    lam: float = 1.0,
    cfg_base: SimulationConfig | None = None,
    proximity_cells: float = 8.0,
    band_cells: float = 5.0,
) -> HeightTraceBundle:
    """Dominant-track height series per C with collision/reflection markers.

    With the default protocol the reported window is [0.25, 1.3] domain
    crossings: the plateau transient is excluded and each C covers the same
    phase of its life (first central collision, first wall reflection).
    Events combine the kinematic detectors with compression pulses on locked
    fringes, deduplicated per episode.
    """
    def one(c_coef: complex) -> HeightTrace:
        if cfg_base is not None:
            cfg = SimulationConfig(grid=cfg_base.grid, lam=lam, c_coef=c_coef,
                                   dt=cfg_base.dt, n_steps=cfg_base.n_steps,
                                   snapshot_stride=cfg_base.snapshot_stride,
                                   ic=cfg_base.ic)
            start_step = 0
        else:
            cfg = height_config(lam, c_coef)
            start_step = math.ceil(
                HEIGHT_SKIP_CROSSINGS * crossing_steps(lam, c_coef, cfg.grid, cfg.dt))
        traj = simulate(cfg)
        tracks = track_peaks(traj)
        h = cfg.grid.h
        band = band_cells * h
        events = detect_collisions(tracks, proximity=proximity_cells * h)
        events += detect_reflections(tracks, boundary_band=band,
                                     domain_length=cfg.grid.domain_length)
        events += _compression_pulses(tracks, band, cfg.grid.domain_length, start_step)
        events = [e for e in events if e.time_index >= start_step]
        events = _dedupe_events(events, time_window=4 * cfg.snapshot_stride,
                                radius=0.1 * cfg.grid.domain_length)

        def in_window(tr: PeakTrack) -> int:
            return sum(1 for t, _, _ in tr.samples if t >= start_step)

        candidates = [tr for tr in tracks if in_window(tr) > 0]
        series: list[tuple[int, float]] = []
        if candidates:
            def key(tr: PeakTrack):
                hs = [hgt for t, _, hgt in tr.samples if t >= start_step]
                return (-len(hs), -(sum(hs) / len(hs)), tr.track_id)
            dom = min(candidates, key=key)
            series = [(t, hgt) for t, _, hgt in dom.samples if t >= start_step]
        plateau = float(np.median([hgt for _, hgt in series])) if series else 0.0
        return HeightTrace(c_coef, series, events, plateau)

    traces = _ordered_map(one, list(c_list))
    payload = f"height|{lam}|{[str(c) for c in c_list]}"
    meta = {
        "experiment": "height_vs_time",
        "lam": lam,
        "config_digest": config_digest(payload),
        "timestamp": time.time(),
    }
    return HeightTraceBundle(lam, traces, meta)


def monotonicity_check(sweep: SweepResult, per_c: complex) -> tuple[bool, int | None]:
    """Weak monotonicity (either direction) of velocity over ascending lambda.

    Returns (True, None) or (False, first violating index into the present
    velocity sequence).  Needs at least 3 present rows for the given C.
    """
    rows = [r for r in sweep.rows
            if abs(r.c_coef - per_c) < 1e-12 and r.velocity_abs is not None]
    rows.sort(key=lambda r: r.lam)
    vals = [r.velocity_abs for r in rows]
    if len(vals) < 3:
        raise TooFewRows(f"{len(vals)} present rows for C={per_c}, need >= 3")
    direction = 0
    for i in range(1, len(vals)):
        if vals[i] > vals[i - 1]:
            d = 1
        elif vals[i] < vals[i - 1]:
            d = -1
        else:
            continue
        if direction == 0:
            direction = d
        elif d != direction:
            return False, i
    return True, None
