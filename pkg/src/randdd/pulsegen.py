"""Rectangular pulse trains, regular and randomized, and the control field.

A schedule is an ordered, non-overlapping train of rectangular pulses on
[0, horizon]. The control field is

    c(t) = area_i / width_i   for t in [start_i, start_i + width_i),
    c(t) = 0                  otherwise (half-open "on" intervals),

so each pulse contributes its area exactly. Randomized trains draw one
Uniform(-1, 1) triple per pulse, in the fixed order (gap, width, area):

    start_{i+1} = start_i + (tau + d_tau * u_i)
    width_i     = delta + d_delta * v_i
    area_i      = phi + d_phi * w_i

The triples come from a Philox 4x64 counter-based generator keyed by
(master_seed, stream_index), so every (seed, stream) pair reproduces the
same schedule on any platform and distinct streams are independent.
Pulses that would cross the horizon, or (when validation was relaxed)
the next pulse's start, are truncated with the area prorated so the
instantaneous strength is preserved.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import PulseParams

# Relative tolerance used when comparing times assembled from sums of
# products of user inputs.
_REL_TOL = 1e-12

# stream_index lanes; keeps schedule, bootstrap, and state-sampling draws
# on provably disjoint Philox keys for one master seed.
SCHEDULE_LANE = 0
BOOTSTRAP_LANE = 1
HAAR_LANE = 2
_LANE_STRIDE = 2**48


@dataclass(frozen=True)
class RandomStream:
    """Deterministic variate source: (master_seed, stream_index) -> stream.

    Backed by numpy's Philox 4x64 counter-based bit generator with
    key = [master_seed, stream_index]; the mapping from key to bit
    stream is fixed by numpy across platforms and versions.
    """

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(
            np.random.Philox(key=np.array([self.master_seed, self.stream_index], dtype=np.uint64))
        )

    @staticmethod
    def for_schedule(master_seed: int, sample_index: int) -> "RandomStream":
        return RandomStream(master_seed, SCHEDULE_LANE * _LANE_STRIDE + sample_index)

    @staticmethod
    def for_bootstrap(master_seed: int, point_index: int = 0) -> "RandomStream":
        return RandomStream(master_seed, BOOTSTRAP_LANE * _LANE_STRIDE + point_index)

    @staticmethod
    def for_state_sampling(master_seed: int) -> "RandomStream":
        return RandomStream(master_seed, HAAR_LANE * _LANE_STRIDE)


@dataclass(frozen=True)
class Pulse:
    start: float
    width: float
    area: float

    @property
    def strength(self) -> float:
        return self.area / self.width

    @property
    def end(self) -> float:
        return self.start + self.width


@dataclass(frozen=True)
class PulseSchedule:
    pulses: tuple[Pulse, ...]
    horizon: float
    _starts: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_starts", tuple(p.start for p in self.pulses))

    def __len__(self) -> int:
        return len(self.pulses)

    def check(self) -> "PulseSchedule":
        """Assert the schedule invariants; returns self."""
        prev_end = -np.inf
        for p in self.pulses:
            if not (p.width > 0 and np.isfinite(p.strength)):
                raise ValueError(f"degenerate pulse {p}")
            if p.start < prev_end - _REL_TOL * max(1.0, self.horizon):
                raise ValueError(f"overlapping pulse {p}")
            if p.start < -0.0 or p.end > self.horizon * (1 + _REL_TOL) + 1e-300:
                raise ValueError(f"pulse {p} outside [0, {self.horizon}]")
            prev_end = p.end
        return self


def generate_regular(params: PulseParams, horizon: float) -> PulseSchedule:
    """Evenly spaced train: starts i*tau, width delta, area phi."""
    pulses = []
    tol = _REL_TOL * max(1.0, horizon)
    i = 0
    while i * params.tau < horizon - tol:
        start = i * params.tau
        width = params.delta
        area = params.phi
        if start + width > horizon:  # truncate, keep strength
            frac = (horizon - start) / width
            width, area = horizon - start, area * frac
        pulses.append(Pulse(start, width, area))
        i += 1
    return PulseSchedule(tuple(pulses), horizon).check()


def generate_random(params: PulseParams, horizon: float, stream: RandomStream) -> PulseSchedule:
    """Randomized train per the per-pulse (gap, width, area) draws.

    With all deviation scales zero the output is bit-for-bit the regular
    schedule. A width that would reach past the next start (possible only
    when validation was relaxed) or past the horizon is clamped with its
    area prorated.
    """
    if params.d_tau == 0.0 and params.d_delta == 0.0 and params.d_phi == 0.0:
        return generate_regular(params, horizon)
    rng = stream.generator()
    pulses = []
    tol = _REL_TOL * max(1.0, horizon)
    start = 0.0
    while start < horizon - tol:
        u, v, w = rng.uniform(-1.0, 1.0, 3)
        gap = float(params.tau + params.d_tau * u)
        width = float(params.delta + params.d_delta * v)
        area = float(params.phi + params.d_phi * w)
        limit = min(gap, horizon - start)
        if width > limit:
            area *= limit / width
            width = limit
        pulses.append(Pulse(start, width, area))
        start += gap
    return PulseSchedule(tuple(pulses), horizon).check()


def field_at(schedule: PulseSchedule, t: float) -> float:
    """Control field c(t); raises for queries outside [0, horizon]."""
    if not (0.0 <= t <= schedule.horizon):
        raise ValueError(f"t = {t} outside schedule horizon [0, {schedule.horizon}]")
    i = bisect.bisect_right(schedule._starts, t) - 1
    if i >= 0:
        p = schedule.pulses[i]
        if p.start <= t < p.end:
            return p.strength
    return 0.0


def segment_edges(schedule: PulseSchedule) -> np.ndarray:
    """Sorted times where c(t) can jump: 0, every on/off edge, horizon.

    c(t) is constant on every open interval between consecutive edges.
    """
    edges = [0.0, schedule.horizon]
    for p in schedule.pulses:
        edges.append(p.start)
        if p.end < schedule.horizon:
            edges.append(p.end)
    return merge_times(np.array(edges), tol=_REL_TOL * max(1.0, schedule.horizon))


def merge_times(times: np.ndarray, tol: float) -> np.ndarray:
    """Sort and collapse near-duplicate times (keeps the first of a cluster)."""
    t = np.sort(np.asarray(times, dtype=float))
    if len(t) == 0:
        return t
    keep = np.empty(len(t), dtype=bool)
    keep[0] = True
    np.greater(np.diff(t), tol, out=keep[1:])
    return t[keep]


def control_integral(schedule: PulseSchedule, t) -> np.ndarray | float:
    """Exact running integral of c(s) over [0, t]; vectorizes over t.

    Piecewise linear: full areas of finished pulses plus the prorated
    area of a pulse in progress.
    """
    tq = np.atleast_1d(np.asarray(t, dtype=float))
    starts = np.array([p.start for p in schedule.pulses])
    ends = np.array([p.end for p in schedule.pulses])
    areas = np.array([p.area for p in schedule.pulses])
    cum = np.concatenate([[0.0], np.cumsum(areas)])
    idx = np.searchsorted(starts, tq, side="right")  # pulses started by time t
    out = cum[idx]
    if len(schedule.pulses):
        last = np.clip(idx - 1, 0, None)
        inside = (idx > 0) & (tq < ends[last])
        li = last[inside]
        out[inside] -= areas[li] * (ends[li] - tq[inside]) / (ends[li] - starts[li])
    return out if np.ndim(t) else float(out[0])


def segment_table(schedule: PulseSchedule, extra_times: Iterable[float] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Breakpoints covering [0, horizon] and the constant c on each interval.

    extra_times (for example output-grid points) are merged into the
    breakpoint set so integrators can land on them exactly.
    """
    tol = _REL_TOL * max(1.0, schedule.horizon)
    pts = merge_times(np.concatenate([segment_edges(schedule), np.asarray(list(extra_times), dtype=float)]), tol)
    pts = pts[(pts >= -tol) & (pts <= schedule.horizon * (1 + _REL_TOL))]
    mids = 0.5 * (pts[:-1] + pts[1:])
    c = np.zeros(len(mids))
    if schedule.pulses:
        starts = np.array(schedule._starts)
        idx = np.searchsorted(starts, mids, side="right") - 1
        ok = idx >= 0
        ii = np.clip(idx, 0, None)
        ends = np.array([p.end for p in schedule.pulses])[ii]
        strengths = np.array([p.strength for p in schedule.pulses])[ii]
        on = ok & (mids < ends)
        c[on] = strengths[on]
    return pts, c


# ---------------------------------------------------------------------------
# CSV serialization (inspection and replay)

def save_schedule(schedule: PulseSchedule, path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(f"# horizon={float(schedule.horizon)!r}\n")
        f.write("index,start,width,area\n")
        for i, p in enumerate(schedule.pulses):
            f.write(f"{i},{float(p.start)!r},{float(p.width)!r},{float(p.area)!r}\n")


def load_schedule(path, horizon: float | None = None) -> PulseSchedule:
    """Load a schedule written by save_schedule (replayable in place of generation)."""
    pulses = []
    file_horizon = None
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line.lstrip("# ").partition("=")
                if key.strip() == "horizon":
                    file_horizon = float(val)
                continue
            if line.startswith("index,"):
                continue
            _, start, width, area = line.split(",")
            pulses.append(Pulse(float(start), float(width), float(area)))
    h = horizon if horizon is not None else file_horizon
    if h is None:
        raise ValueError(f"{path}: no horizon header and none supplied")
    return PulseSchedule(tuple(pulses), h).check()


def empty_schedule(horizon: float) -> PulseSchedule:
    """No control: c(t) = 0 on [0, horizon]."""
    return PulseSchedule((), horizon)


def realized_stats(schedules: Sequence[PulseSchedule]) -> dict:
    """Sample means of realized (gap, width, area) pooled over schedules."""
    gaps, widths, areas = [], [], []
    for s in schedules:
        st = np.array([p.start for p in s.pulses])
        gaps.append(np.diff(st))
        widths.append([p.width for p in s.pulses])
        areas.append([p.area for p in s.pulses])
    gaps = np.concatenate(gaps) if gaps else np.array([])
    widths = np.concatenate([np.asarray(w) for w in widths]) if widths else np.array([])
    areas = np.concatenate([np.asarray(a) for a in areas]) if areas else np.array([])
    return {
        "n_pulses": int(widths.size),
        "n_gaps": int(gaps.size),
        "mean_gap": float(gaps.mean()) if gaps.size else float("nan"),
        "mean_width": float(widths.mean()) if widths.size else float("nan"),
        "mean_area": float(areas.mean()) if areas.size else float("nan"),
    }
