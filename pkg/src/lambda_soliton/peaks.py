"""Peak detection, tracking, velocimetry, and collision/reflection events.

Structures are read from |u|: strict interior local maxima with enough
prominence (height above the higher of the two immediately flanking minima).
Positions are refined to sub-grid accuracy by a parabola through the three
magnitudes around the maximum.  Tracking is greedy nearest-neighbor between
consecutive snapshots with a displacement gate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewSamples
from .field import GridSpec, StateVector
from .scheme import Trajectory


@dataclass(frozen=True)
class Peak:
    node_index: int
    position: float
    height: float
    prominence: float


@dataclass(frozen=True)
class TrackingParams:
    """Grid-relative tracking knobs (distances in units of h)."""

    gate_cells: float = 10.0
    merge_cells: float = 3.0
    boundary_band_cells: float = 5.0
    prominence_frac: float = 0.05


@dataclass
class PeakTrack:
    """One structure's identity over time: (time_index, position, height)."""

    track_id: int
    samples: list[tuple[int, float, float]] = field(default_factory=list)
    status: str = "active"  # active | merged | exited
    dt: float = 1.0

    def times(self) -> list[int]:
        return [s[0] for s in self.samples]

    def positions(self) -> list[float]:
        return [s[1] for s in self.samples]

    def heights(self) -> list[float]:
        return [s[2] for s in self.samples]

    def lifetime_snapshots(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class EventRecord:
    kind: str  # collision | reflection
    time_index: int
    position: float
    track_ids: tuple[int, ...]
    peak_height: float


def _flanking_minimum(a: np.ndarray, j: int, direction: int) -> float:
    """Walk from node j while |u| keeps descending; value at the valley floor."""
    i = j + direction
    while 0 < i + direction < len(a) and a[i + direction] < a[i]:
        i += direction
    return float(a[i])


def _parabolic_refine(y0: float, y1: float, y2: float) -> tuple[float, float]:
    """Sub-grid offset in (-1/2, 1/2) and refined height from three samples."""
    denom = y0 - 2.0 * y1 + y2
    if denom == 0.0:
        return 0.0, y1
    delta = 0.5 * (y0 - y2) / denom
    delta = min(max(delta, -0.5), 0.5)
    return delta, y1 - 0.25 * (y0 - y2) * delta


def detect_peaks(state: StateVector, grid: GridSpec, min_prominence: float) -> list[Peak]:
    """All strict interior maxima of |u| with prominence >= min_prominence,
    sorted by position."""
    if not min_prominence > 0:
        raise ValueError("min_prominence must be > 0")
    a = np.abs(state.values)
    h = grid.h
    peaks = []
    for j in range(1, len(a) - 1):
        if not (a[j] > a[j - 1] and a[j] > a[j + 1]):
            continue
        left = _flanking_minimum(a, j, -1)
        right = _flanking_minimum(a, j, +1)
        prom = float(a[j]) - max(left, right)
        if prom < min_prominence:
            continue
        delta, height = _parabolic_refine(float(a[j - 1]), float(a[j]), float(a[j + 1]))
        peaks.append(Peak(j, (j + delta) * h, height, prom))
    return peaks


def _snapshot_peaks(state, grid, min_prominence, frac) -> list[Peak]:
    if min_prominence is not None:
        return detect_peaks(state, grid, min_prominence)
    top = float(np.max(np.abs(state.values)))
    if top <= 0.0:
        return []
    return detect_peaks(state, grid, frac * top)


def track_peaks(
    traj: Trajectory,
    min_prominence: float | None = None,
    params: TrackingParams = TrackingParams(),
) -> list[PeakTrack]:
    """Associate peaks across snapshots into tracks.

    min_prominence None means a per-snapshot relative floor of
    params.prominence_frac * max|u|.  Unmatched new peaks open tracks;
    an unmatched old track closes as 'exited' inside the boundary band,
    as 'merged' when a surviving track sits within the merge distance,
    and as 'exited' otherwise (the structure left the detectable set).
    """
    if len(traj.snapshots) < 2:
        raise ValueError("tracking needs at least 2 snapshots")
    grid = traj.config.grid
    h = grid.h
    gate = params.gate_cells * h
    merge_d = params.merge_cells * h
    band = params.boundary_band_cells * h
    L = grid.domain_length

    tracks: list[PeakTrack] = []
    open_tracks: dict[int, PeakTrack] = {}
    next_id = 0

    for snap in traj.snapshots:
        peaks = _snapshot_peaks(snap, grid, min_prominence, params.prominence_frac)
        t = snap.time_index

        pairs = []
        for tid, tr in open_tracks.items():
            last_pos = tr.samples[-1][1]
            for pi, pk in enumerate(peaks):
                d = abs(pk.position - last_pos)
                if d <= gate:
                    pairs.append((d, tid, pi))
        pairs.sort(key=lambda p: (p[0], p[1], p[2]))

        matched_tracks: set[int] = set()
        matched_peaks: set[int] = set()
        for d, tid, pi in pairs:
            if tid in matched_tracks or pi in matched_peaks:
                continue
            open_tracks[tid].samples.append((t, peaks[pi].position, peaks[pi].height))
            matched_tracks.add(tid)
            matched_peaks.add(pi)

        survivors = [open_tracks[tid].samples[-1][1] for tid in matched_tracks]
        for pi, pk in enumerate(peaks):
            if pi not in matched_peaks:
                tr = PeakTrack(next_id, [(t, pk.position, pk.height)], dt=traj.config.dt)
                next_id += 1
                open_tracks[tr.track_id] = tr
                tracks.append(tr)
                survivors.append(pk.position)

        for tid in list(open_tracks):
            if tid in matched_tracks or open_tracks[tid].samples[-1][0] == t:
                continue
            tr = open_tracks.pop(tid)
            pos = tr.samples[-1][1]
            if pos <= band or pos >= L - band:
                tr.status = "exited"
            elif survivors and min(abs(pos - s) for s in survivors) <= merge_d:
                tr.status = "merged"
            else:
                tr.status = "exited"

    for tr in open_tracks.values():
        tr.status = "active"
    tracks.sort(key=lambda tr: tr.track_id)
    for tr in tracks:
        tr.dt = traj.config.dt
    return tracks


def _least_squares_slope(ts: list[float], xs: list[float]) -> float:
    tbar = sum(ts) / len(ts)
    xbar = sum(xs) / len(xs)
    num = sum((t - tbar) * (x - xbar) for t, x in zip(ts, xs))
    den = sum((t - tbar) ** 2 for t in ts)
    if den == 0.0:
        raise TooFewSamples("degenerate time span")
    return num / den


def estimate_velocity(track: PeakTrack, window: tuple[float, float] = (0.2, 0.8)) -> float:
    """Least-squares slope of position vs physical time over a lifetime window.

    ``window`` is (start, end) as fractions of the track's life; at least 5
    samples must fall inside it.  Sign indicates direction.
    """
    lo, hi = window
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError(f"window must satisfy 0 <= start < end <= 1, got {window}")
    if not track.samples:
        raise TooFewSamples("empty track")
    t0 = track.samples[0][0]
    t1 = track.samples[-1][0]
    w_lo = t0 + lo * (t1 - t0)
    w_hi = t0 + hi * (t1 - t0)
    sel = [(t * track.dt, x) for t, x, _ in track.samples if w_lo <= t <= w_hi]
    if len(sel) < 5:
        raise TooFewSamples(f"{len(sel)} samples inside window, need >= 5")
    return _least_squares_slope([s[0] for s in sel], [s[1] for s in sel])


def height_series(track: PeakTrack) -> list[tuple[int, float]]:
    """Projection of the track onto (time_index, height)."""
    return [(t, hgt) for t, _, hgt in track.samples]


def _recent_velocity(track: PeakTrack, idx: int, span: int = 5) -> float | None:
    """Slope over at most ``span`` samples ending at sample index idx."""
    first = max(0, idx - span + 1)
    pts = track.samples[first : idx + 1]
    if len(pts) < 2:
        return None
    ts = [p[0] * track.dt for p in pts]
    xs = [p[1] for p in pts]
    try:
        return _least_squares_slope(ts, xs)
    except TooFewSamples:
        return None


def detect_collisions(
    tracks: list[PeakTrack],
    proximity: float,
    min_samples: int = 5,
) -> list[EventRecord]:
    """Counter-propagating pairs that come within ``proximity``.

    An event is emitted per contact episode at the pair's closest approach,
    positioned at the midpoint with the taller height.  Entry requires
    opposite-signed recent velocities.
    """
    if not proximity > 0:
        raise ValueError("proximity must be > 0")
    events = []
    usable = [tr for tr in tracks if len(tr.samples) >= min_samples]
    for i in range(len(usable)):
        for j in range(i + 1, len(usable)):
            a, b = usable[i], usable[j]
            amap = {t: k for k, (t, _, _) in enumerate(a.samples)}
            bmap = {t: k for k, (t, _, _) in enumerate(b.samples)}
            common = sorted(set(amap) & set(bmap))
            in_contact = False
            best = None  # (distance, time, mid, height)
            for t in common:
                ka, kb = amap[t], bmap[t]
                pa, pb = a.samples[ka][1], b.samples[kb][1]
                d = abs(pa - pb)
                if not in_contact:
                    if d <= proximity:
                        va = _recent_velocity(a, ka)
                        vb = _recent_velocity(b, kb)
                        if va is not None and vb is not None and va * vb < 0:
                            in_contact = True
                            best = (d, t, 0.5 * (pa + pb), max(a.samples[ka][2], b.samples[kb][2]))
                else:
                    if d <= proximity:
                        if d < best[0]:
                            best = (d, t, 0.5 * (pa + pb), max(a.samples[ka][2], b.samples[kb][2]))
                    else:
                        events.append(
                            EventRecord("collision", best[1], best[2], (a.track_id, b.track_id), best[3])
                        )
                        in_contact = False
                        best = None
            if in_contact and best is not None:
                events.append(
                    EventRecord("collision", best[1], best[2], (a.track_id, b.track_id), best[3])
                )
    events.sort(key=lambda e: (e.time_index, e.position))
    return events


def detect_reflections(
    tracks: list[PeakTrack],
    boundary_band: float,
    domain_length: float = 1.0,
    min_samples: int = 5,
) -> list[EventRecord]:
    """Boundary bounces: a track enters the band near either wall and its
    local velocity flips from toward-the-wall to away.  The event is placed at
    the track's closest approach to the wall."""
    if not 0 < boundary_band < domain_length / 4:
        raise ValueError("boundary_band must be in (0, domain_length/4)")
    events = []
    for tr in tracks:
        if len(tr.samples) < min_samples:
            continue
        positions = tr.positions()
        n = len(positions)
        k = 0
        while k < n:
            near_left = positions[k] <= boundary_band
            near_right = positions[k] >= domain_length - boundary_band
            if not (near_left or near_right):
                k += 1
                continue
            start = k
            while k < n and (
                (positions[k] <= boundary_band and near_left)
                or (positions[k] >= domain_length - boundary_band and near_right)
            ):
                k += 1
            end = k  # first sample index after the episode
            if start == 0 or end >= n:
                continue  # no approach or no retreat to compare
            pre = _recent_velocity(tr, start - 1)
            post_pts = tr.samples[end : end + 5]
            if pre is None or len(post_pts) < 2:
                continue
            post = _least_squares_slope(
                [p[0] * tr.dt for p in post_pts], [p[1] for p in post_pts]
            )
            toward = pre < 0 if near_left else pre > 0
            away = post > 0 if near_left else post < 0
            if toward and away:
                wall = 0.0 if near_left else domain_length
                closest = min(range(start, end), key=lambda q: abs(positions[q] - wall))
                t, pos, hgt = tr.samples[closest]
                events.append(EventRecord("reflection", t, pos, (tr.track_id,), hgt))
    events.sort(key=lambda e: (e.time_index, e.position))
    return events
