"""Parsing and windowing of pedestrian tracking logs."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, NamedTuple

import numpy as np
import yaml


@dataclass(frozen=True)
class TrackRecord:
    timestamp: float
    person_id: int
    x: float
    y: float
    velocity: float = 0.0
    motion_angle: float = 0.0
    z: float | None = None
    facing_angle: float | None = None


@dataclass(frozen=True)
class TimeWindow:
    start: float
    duration: float

    def __post_init__(self):
        if not (self.duration > 0):
            raise ValueError(f"window duration must be positive, got {self.duration}")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def contains(self, t: float) -> bool:
        return self.start <= t < self.end


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One pedestrian's track: ``times`` of shape (n,), ``xy`` of shape (n, 2)."""

    person_id: int
    times: np.ndarray
    xy: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        if times.shape[0] != xy.shape[0]:
            raise ValueError("times and xy lengths differ")
        if times.shape[0] < 2:
            raise ValueError("a trajectory needs at least 2 samples")
        if np.any(np.diff(times) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")
        times.setflags(write=False)
        xy.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "xy", xy)

    @property
    def samples(self) -> list[tuple[float, float, float]]:
        return [(float(t), float(x), float(y)) for t, (x, y) in zip(self.times, self.xy)]

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def position(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.xy[:, 0]), np.interp(t, self.times, self.xy[:, 1])])

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.person_id == other.person_id
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.xy, other.xy)
        )

    __hash__ = None


# column indices; None means "not present in the file"
@dataclass(frozen=True)
class FormatDescriptor:
    timestamp: int = 0
    person_id: int = 1
    x: int = 2
    y: int = 3
    velocity: int | None = None
    motion_angle: int | None = None
    z: int | None = None
    facing_angle: int | None = None
    delimiter: str = ","
    scale: float = 1.0  # positions and velocity are multiplied by this to get meters

    @classmethod
    def from_mapping(cls, data: dict) -> "FormatDescriptor":
        data = dict(data)
        columns = data.pop("columns", {})
        data.pop("version", None)
        unknown = set(data) - {"delimiter", "scale"} | (set(columns) - set(_COLUMN_FIELDS))
        if unknown:
            raise ValueError(f"unknown format keys: {sorted(unknown)}")
        return cls(**columns, **data)

    def to_mapping(self) -> dict:
        columns = {name: getattr(self, name) for name in _COLUMN_FIELDS if getattr(self, name) is not None}
        return {"version": 1, "delimiter": self.delimiter, "scale": self.scale, "columns": columns}


_COLUMN_FIELDS = ("timestamp", "person_id", "x", "y", "velocity", "motion_angle", "z", "facing_angle")

# ATC: time [s], person id, x [mm], y [mm], z [mm], velocity [mm/s], motion angle [rad], facing angle [rad]
ATC_FORMAT = FormatDescriptor(
    timestamp=0, person_id=1, x=2, y=3, z=4, velocity=5, motion_angle=6, facing_angle=7, scale=0.001
)
METRIC_FORMAT = FormatDescriptor(velocity=4, motion_angle=5)

PRESETS = {"atc": ATC_FORMAT, "metric": METRIC_FORMAT}


def load_format(name_or_path: str | Path) -> FormatDescriptor:
    """Resolve a preset name (``atc``, ``metric``) or a YAML/JSON format file."""
    if str(name_or_path) in PRESETS:
        return PRESETS[str(name_or_path)]
    with open(name_or_path) as f:
        return FormatDescriptor.from_mapping(yaml.safe_load(f) or {})


class Reject(NamedTuple):
    line_number: int
    line: str
    reason: str


@dataclass
class ParseResult:
    records: list[TrackRecord]
    rejects: list[Reject] = field(default_factory=list)

    def rejects_report(self) -> str:
        return "".join(f"{r.line_number}: {r.reason}: {r.line}\n" for r in self.rejects)


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _parse_row(fields: list[str], fmt: FormatDescriptor) -> TrackRecord:
    def col(idx):
        if idx is None:
            return None
        return float(fields[idx])

    ts = col(fmt.timestamp)
    pid_raw = float(fields[fmt.person_id])
    if not pid_raw.is_integer():
        raise ValueError(f"non-integer person id {pid_raw!r}")
    pid = int(pid_raw)
    x = col(fmt.x) * fmt.scale
    y = col(fmt.y) * fmt.scale
    vel = col(fmt.velocity)
    vel = 0.0 if vel is None else vel * fmt.scale
    angle = col(fmt.motion_angle)
    z = col(fmt.z)
    facing = col(fmt.facing_angle)
    if not math.isfinite(ts) or ts < 0:
        raise ValueError(f"bad timestamp {ts}")
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("non-finite position")
    if not vel >= 0:
        raise ValueError(f"negative velocity {vel}")
    return TrackRecord(
        timestamp=ts,
        person_id=pid,
        x=x,
        y=y,
        velocity=vel,
        motion_angle=0.0 if angle is None else angle,
        z=None if z is None else z * fmt.scale,
        facing_angle=facing,
    )


def parse_tracks(source: str | bytes | IO, fmt: FormatDescriptor = METRIC_FORMAT) -> ParseResult:
    """Parse delimiter-separated track rows; malformed rows go to ``rejects``.

    Blank lines and lines starting with ``#`` are skipped silently.
    """
    result = ParseResult(records=[])
    for lineno, raw in enumerate(_read_text(source).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(fmt.delimiter)
        try:
            result.records.append(_parse_row(fields, fmt))
        except (ValueError, IndexError) as exc:
            result.rejects.append(Reject(lineno, line, str(exc) or type(exc).__name__))
    return result


def read_tracks(path: str | Path, fmt: FormatDescriptor = METRIC_FORMAT) -> ParseResult:
    with open(path, "rb") as f:
        return parse_tracks(f, fmt)


def _num(v) -> str:
    return repr(float(v))


def format_tracks(records: Iterable[TrackRecord], fmt: FormatDescriptor = METRIC_FORMAT) -> str:
    """Inverse of :func:`parse_tracks` (exact for ``scale == 1``)."""
    ncols = max(v for v in (getattr(fmt, n) for n in _COLUMN_FIELDS) if v is not None) + 1
    out = io.StringIO()
    for r in records:
        row = [""] * ncols
        row[fmt.timestamp] = _num(r.timestamp)
        row[fmt.person_id] = str(int(r.person_id))
        row[fmt.x] = _num(r.x / fmt.scale)
        row[fmt.y] = _num(r.y / fmt.scale)
        if fmt.velocity is not None:
            row[fmt.velocity] = _num(r.velocity / fmt.scale)
        if fmt.motion_angle is not None:
            row[fmt.motion_angle] = _num(r.motion_angle)
        if fmt.z is not None:
            row[fmt.z] = _num(0.0 if r.z is None else r.z / fmt.scale)
        if fmt.facing_angle is not None:
            row[fmt.facing_angle] = _num(0.0 if r.facing_angle is None else r.facing_angle)
        out.write(fmt.delimiter.join(row) + "\n")
    return out.getvalue()


def group_trajectories(records: Iterable[TrackRecord]) -> tuple[list[Trajectory], int]:
    """Group records by person.

    Returns the trajectories ordered by person id and the number of persons
    dropped for having fewer than two distinct timestamps. For duplicate
    (person, timestamp) rows the last one wins.
    """
    per_person: dict[int, dict[float, tuple[float, float]]] = {}
    for r in records:
        per_person.setdefault(r.person_id, {})[r.timestamp] = (r.x, r.y)
    trajs = []
    dropped = 0
    for pid in sorted(per_person):
        samples = per_person[pid]
        if len(samples) < 2:
            dropped += 1
            continue
        times = np.array(sorted(samples))
        xy = np.array([samples[t] for t in times])
        trajs.append(Trajectory(pid, times, xy))
    return trajs, dropped


def clip_to_window(traj: Trajectory, window: TimeWindow) -> Trajectory | None:
    """Restrict ``traj`` to ``[start, end)`` with interpolated boundary samples.

    The closing sample at ``end`` is kept so the last in-window segment keeps
    its full duration. Returns ``None`` if less than a segment survives.
    """
    t0, t1 = window.start, window.end
    lo, hi = max(t0, traj.start), min(t1, traj.end)
    if hi <= lo:
        return None
    inner = (traj.times > lo) & (traj.times < hi)
    times = np.concatenate([[lo], traj.times[inner], [hi]])
    xy = np.column_stack(
        [np.interp(times, traj.times, traj.xy[:, 0]), np.interp(times, traj.times, traj.xy[:, 1])]
    )
    # keep the original samples bit-exact
    xy[1:-1] = traj.xy[inner]
    return Trajectory(traj.person_id, times, xy)


def dwell_time(traj: Trajectory, window: TimeWindow) -> float:
    """Time the track is observed inside ``window``."""
    return max(0.0, min(window.end, traj.end) - max(window.start, traj.start))
