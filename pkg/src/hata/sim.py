"""Discrete-time coordination of robots among replayed pedestrians.

Every agent moves along a fixed path sampled on a common time grid. Two
agents conflict wherever their sampled positions come closer than the sum of
their safety radii; each connected stretch of such close sample pairs is a
:class:`ConflictRegion`. Pedestrians never yield, so a robot only enters
a stretch of its path covered by pedestrian regions (a *span*) when it can
drive through the whole span without stopping: every pedestrian in the span
must be outside its part of the region for as long as the robot, at
free-flow speed, is inside its own part.

Between two robots the precedence policy names a leader per region. The
leader may move to any sample that is not too close to where the follower
currently stands. The follower may move to a sample only once the leader
has passed every leader sample too close to it, so it can trail the leader
through a shared corridor and stop anywhere behind it.

A robot that cannot move halts where it is and accumulates waiting time.
Halting robots that wait on each other in a cycle (or on a failed robot)
are flagged as deadlocked, as are all remaining robots when none of them
moves for ``watchdog`` seconds.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .grid import GridSpec
from .planner import GridPath
from .trajectories import Trajectory

ROBOT = "robot"
PEDESTRIAN = "pedestrian"

DEFAULT_DT = 0.1
DEFAULT_RADIUS = 0.3
DEFAULT_TIMEOUT = 600.0
DEFAULT_WATCHDOG = 30.0
V_MAX = 1.0
A_MAX = 1.0

AgentKey = tuple[str, int]


@dataclass(frozen=True, eq=False)
class AgentTrack:
    """Positions sampled at global steps ``step0, step0 + 1, ...`` of length ``dt``."""

    kind: str
    id: int
    xy: np.ndarray
    dt: float = DEFAULT_DT
    step0: int = 0
    safety_radius: float = DEFAULT_RADIUS

    def __post_init__(self):
        if self.kind not in (ROBOT, PEDESTRIAN):
            raise ValueError(f"unknown agent kind {self.kind!r}")
        xy = np.array(self.xy, dtype=float).reshape(-1, 2)
        if len(xy) == 0:
            raise ValueError("an agent track needs at least one sample")
        xy.setflags(write=False)
        object.__setattr__(self, "xy", xy)

    @property
    def key(self) -> AgentKey:
        return (self.kind, self.id)

    @property
    def times(self) -> np.ndarray:
        return (self.step0 + np.arange(len(self.xy))) * self.dt

    @property
    def duration(self) -> float:
        return (len(self.xy) - 1) * self.dt

    @property
    def last_step(self) -> int:
        return self.step0 + len(self.xy) - 1

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.kind, self.id, self.dt, self.step0, self.safety_radius)).encode())
        h.update(self.xy.tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class TrapezoidProfile:
    """Rest-to-rest motion over ``distance`` under speed and acceleration limits."""

    distance: float
    v_max: float = V_MAX
    a_max: float = A_MAX

    def __post_init__(self):
        if self.distance < 0 or self.v_max <= 0 or self.a_max <= 0:
            raise ValueError("need distance >= 0 and positive limits")

    @property
    def peak_speed(self) -> float:
        return min(self.v_max, math.sqrt(self.distance * self.a_max))

    @property
    def accel_time(self) -> float:
        return self.peak_speed / self.a_max

    @property
    def cruise_time(self) -> float:
        v = self.peak_speed
        if v == 0:
            return 0.0
        return max(0.0, (self.distance - v * v / self.a_max) / v)

    @property
    def duration(self) -> float:
        return 2 * self.accel_time + self.cruise_time

    @property
    def triangular(self) -> bool:
        return self.peak_speed < self.v_max

    def position(self, t):
        """Arc length travelled at time ``t``."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.duration)
        v, a = self.peak_speed, self.a_max
        ta, tc = self.accel_time, self.cruise_time
        d_acc = 0.5 * a * ta * ta
        s = np.where(
            t < ta,
            0.5 * a * t * t,
            np.where(
                t < ta + tc,
                d_acc + v * (t - ta),
                self.distance - 0.5 * a * np.square(self.duration - t),
            ),
        )
        return np.clip(s, 0.0, self.distance)


def _along(points: np.ndarray, s: np.ndarray) -> np.ndarray:
    seg = np.hypot(*np.diff(points, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    return np.column_stack([np.interp(s, cum, points[:, 0]), np.interp(s, cum, points[:, 1])])


def profile_robot(
    path: GridPath,
    spec: GridSpec,
    v_max: float = V_MAX,
    a_max: float = A_MAX,
    dt: float = DEFAULT_DT,
    robot_id: int = 0,
    safety_radius: float = DEFAULT_RADIUS,
) -> AgentTrack:
    """Sample a trapezoidal velocity profile along the path's cell centers.

    The last sample sits on the goal; its time is the profile duration rounded
    up to a whole step.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if len(path.cells) == 0:
        raise ValueError("path has no cells")
    pts = path.points(spec)
    prof = TrapezoidProfile(path.length, v_max, a_max)
    n = max(0, math.ceil(prof.duration / dt - 1e-9))
    s = prof.position(np.arange(n + 1) * dt)
    xy = _along(pts, s) if len(pts) > 1 else np.repeat(pts, n + 1, axis=0)
    xy[-1] = pts[-1]
    return AgentTrack(ROBOT, robot_id, xy, dt, 0, safety_radius)


def pedestrian_track(
    traj: Trajectory, dt: float = DEFAULT_DT, t_offset: float = 0.0, safety_radius: float = DEFAULT_RADIUS
) -> AgentTrack | None:
    """Resample a recorded track onto the simulation grid; ``t_offset`` maps to step 0."""
    first = math.ceil((traj.start - t_offset) / dt - 1e-9)
    last = math.floor((traj.end - t_offset) / dt + 1e-9)
    first = max(first, 0)
    if last < first:
        return None
    t = t_offset + np.arange(first, last + 1) * dt
    xy = np.column_stack([np.interp(t, traj.times, traj.xy[:, 0]), np.interp(t, traj.times, traj.xy[:, 1])])
    return AgentTrack(PEDESTRIAN, traj.person_id, xy, dt, first, safety_radius)


@dataclass(frozen=True)
class ConflictRegion:
    """Close-approach stretch between agents ``a`` and ``b``; spans are inclusive sample indices."""

    a: AgentKey
    b: AgentKey
    a_span: tuple[int, int]
    b_span: tuple[int, int]
    pairs: np.ndarray | None = field(default=None, compare=False, repr=False)

    def index_pairs(self) -> np.ndarray:
        """Close ``(a index, b index)`` pairs; the full span rectangle when not recorded."""
        if self.pairs is not None:
            return np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        i, j = np.meshgrid(
            np.arange(self.a_span[0], self.a_span[1] + 1), np.arange(self.b_span[0], self.b_span[1] + 1), indexing="ij"
        )
        return np.column_stack([i.ravel(), j.ravel()])


def _close_pairs(ta: AgentTrack, tb: AgentTrack) -> np.ndarray:
    r = ta.safety_radius + tb.safety_radius
    lo = np.maximum(ta.xy.min(0), tb.xy.min(0)) - r
    hi = np.minimum(ta.xy.max(0), tb.xy.max(0)) + r
    if np.any(lo > hi):
        return np.empty((0, 2), dtype=np.int64)
    tree = cKDTree(tb.xy)
    hits = tree.query_ball_point(ta.xy, r=r)
    pairs = [(i, j) for i, js in enumerate(hits) for j in js]
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _components(pairs: np.ndarray) -> list[np.ndarray]:
    """Group index pairs into 8-connected components of the (i, j) plane."""
    if len(pairs) == 0:
        return []
    index = {(int(i), int(j)): k for k, (i, j) in enumerate(pairs)}
    src, dst = [], []
    for k, (i, j) in enumerate(pairs):
        for di, dj in ((0, 1), (1, -1), (1, 0), (1, 1)):
            other = index.get((int(i) + di, int(j) + dj))
            if other is not None:
                src.append(k)
                dst.append(other)
    n = len(pairs)
    graph = coo_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return [pairs[labels == lab] for lab in np.unique(labels)]


def find_conflicts(tracks: list[AgentTrack]) -> list[ConflictRegion]:
    """All robot-robot and robot-pedestrian regions; pedestrians never conflict with each other."""
    robots = sorted((t for t in tracks if t.kind == ROBOT), key=lambda t: t.id)
    peds = [t for t in tracks if t.kind == PEDESTRIAN]
    regions = []
    for ia, ta in enumerate(robots):
        for tb in robots[ia + 1 :] + peds:
            comps = _components(_close_pairs(ta, tb))
            comps.sort(key=lambda c: (int(c[:, 0].min()), int(c[:, 1].min())))
            for comp in comps:
                regions.append(
                    ConflictRegion(
                        ta.key,
                        tb.key,
                        (int(comp[:, 0].min()), int(comp[:, 0].max())),
                        (int(comp[:, 1].min()), int(comp[:, 1].max())),
                        comp,
                    )
                )
    return regions


class FreeFlowPrecedence:
    """Robot-robot precedence: earlier free-flow arrival at the region, then lower id."""

    def first(self, region: ConflictRegion, tracks: dict[AgentKey, AgentTrack]) -> AgentKey:
        ta, tb = tracks[region.a], tracks[region.b]
        arrive_a = (ta.step0 + region.a_span[0]) * ta.dt
        arrive_b = (tb.step0 + region.b_span[0]) * tb.dt
        if arrive_a != arrive_b:
            return region.a if arrive_a < arrive_b else region.b
        return min(region.a, region.b, key=lambda k: k[1])


@dataclass
class RobotOutcome:
    robot_id: int
    travel_time: float
    waiting_time: float
    completed: bool
    failure_kind: str = "none"  # none | timeout | deadlock
    free_flow_time: float = 0.0
    halt_events: int = 0


@dataclass
class SimOutcome:
    robots: list[RobotOutcome]
    makespan: float
    steps: int
    dt: float
    trace_hash: str
    progress: np.ndarray = field(repr=False)  # (steps + 1, n_robots); -1 once a robot has left

    @property
    def failures(self) -> int:
        return sum(not r.completed for r in self.robots)

    @property
    def failure_rate(self) -> float:
        return self.failures / len(self.robots) if self.robots else 0.0

    @property
    def mean_waiting(self) -> float:
        return float(np.mean([r.waiting_time for r in self.robots])) if self.robots else 0.0

    @property
    def mean_travel(self) -> float:
        return float(np.mean([r.travel_time for r in self.robots])) if self.robots else 0.0

    def summary(self) -> dict:
        return {
            "robots": len(self.robots),
            "completed": len(self.robots) - self.failures,
            "failure_rate": self.failure_rate,
            "makespan": self.makespan,
            "mean_travel_time": self.mean_travel,
            "mean_waiting_time": self.mean_waiting,
            "steps": self.steps,
            "dt": self.dt,
            "trace_hash": self.trace_hash,
        }

    def to_csv(self) -> str:
        """Per-robot rows in a fixed column order."""
        lines = ["robot_id,travel_time,waiting_time,completed,failure_kind,free_flow_time,halt_events"]
        for r in self.robots:
            lines.append(
                f"{r.robot_id},{r.travel_time!r},{r.waiting_time!r},{int(r.completed)},{r.failure_kind},"
                f"{r.free_flow_time!r},{r.halt_events}"
            )
        return "\n".join(lines) + "\n"

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2) + "\n"


@dataclass
class _Local:
    """A pedestrian region seen from one robot."""

    lo: int
    hi: int
    other: AgentKey
    other_lo: int
    other_hi: int


@dataclass
class _Shared:
    """A robot-robot region seen from one robot.

    ``conf_lo[i - lo]`` and ``conf_hi[i - lo]`` bound the other robot's
    indices that are too close to own index ``i`` (-1 when none are).
    """

    lo: int
    hi: int
    other: AgentKey
    conf_lo: np.ndarray
    conf_hi: np.ndarray
    follower: bool

    def clear(self, i: int, other_k: int) -> bool:
        if i < self.lo or i > self.hi:
            return True
        lo, hi = self.conf_lo[i - self.lo], self.conf_hi[i - self.lo]
        if hi < 0:
            return True
        if self.follower:
            return other_k > hi
        return not lo <= other_k <= hi


def _bounds(own: np.ndarray, other: np.ndarray, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
    conf_lo = np.full(hi - lo + 1, np.iinfo(np.int64).max, dtype=np.int64)
    conf_hi = np.full(hi - lo + 1, -1, dtype=np.int64)
    np.minimum.at(conf_lo, own - lo, other)
    np.maximum.at(conf_hi, own - lo, other)
    conf_lo[conf_hi < 0] = -1
    return conf_lo, conf_hi


class _Robot:
    def __init__(self, track: AgentTrack):
        self.track = track
        self.k = 0
        self.last = len(track.xy) - 1
        self.status = "active"
        self.failure = "none"
        self.wait_steps = 0
        self.halts = 0
        self.halted = False
        self.travel = 0.0
        self.done_step = -1
        self.committed_until = -1
        self.peds: list[_Local] = []
        self.shared: list[_Shared] = []
        self.ped_mask = np.zeros(self.last + 2, dtype=bool)


def simulate(
    tracks: list[AgentTrack],
    conflicts: list[ConflictRegion] | None = None,
    policy=None,
    timeout: float = DEFAULT_TIMEOUT,
    watchdog: float = DEFAULT_WATCHDOG,
) -> SimOutcome:
    """Run until every robot has reached its goal or failed."""
    if conflicts is None:
        conflicts = find_conflicts(tracks)
    policy = policy or FreeFlowPrecedence()
    by_key = {t.key: t for t in tracks}
    dts = {t.dt for t in tracks}
    if len(dts) > 1:
        raise ValueError("all tracks must share one time step")
    dt = dts.pop() if dts else DEFAULT_DT
    robot_tracks = sorted((t for t in tracks if t.kind == ROBOT), key=lambda t: t.id)
    if any(t.step0 != 0 for t in robot_tracks):
        raise ValueError("robot tracks must start at step 0")
    robots = {t.key: _Robot(t) for t in robot_tracks}
    order = [robots[t.key] for t in robot_tracks]

    for reg in conflicts:
        pairs = reg.index_pairs()
        if reg.a[0] == ROBOT and reg.b[0] == ROBOT:
            first = policy.first(reg, by_key)
            for me, other, span, col in ((reg.a, reg.b, reg.a_span, 0), (reg.b, reg.a, reg.b_span, 1)):
                lo, hi = _bounds(pairs[:, col], pairs[:, 1 - col], *span)
                robots[me].shared.append(_Shared(span[0], span[1], other, lo, hi, follower=me != first))
            continue
        me, other, span, ospan = (reg.a, reg.b, reg.a_span, reg.b_span)
        if me[0] != ROBOT:
            me, other, span, ospan = other, me, ospan, span
        if me in robots:
            robots[me].peds.append(_Local(span[0], span[1], other, ospan[0], ospan[1]))
            robots[me].ped_mask[span[0] : span[1] + 1] = True

    hasher = hashlib.sha256()
    progress_rows = []
    max_steps = math.floor(timeout / dt + 1e-9)
    idle = 0
    watchdog_steps = max(1, math.ceil(watchdog / dt - 1e-9))

    def snapshot():
        row = np.array([r.k if r.status != "done" or r.done_step == n else -1 for r in order], dtype=np.int64)
        progress_rows.append(row)
        hasher.update(row.tobytes())
        hasher.update(bytes(ord(r.status[0]) for r in order))

    n = 0
    for r in order:
        if r.last == 0:
            r.status, r.done_step = "done", 0
    snapshot()

    def shared_clear(r: _Robot, lo: int, hi: int, waits: set[AgentKey]) -> bool:
        ok = True
        for sh in r.shared:
            if sh.hi < lo or sh.lo > hi:
                continue
            other = robots[sh.other]
            if other.status == "done":
                continue
            if not all(sh.clear(i, other.k) for i in range(max(lo, sh.lo), min(hi, sh.hi) + 1)):
                ok = False
                waits.add(sh.other)
        return ok

    def peds_clear(r: _Robot, lo: int, hi: int, step: int) -> bool:
        k = r.k
        for reg in r.peds:
            if reg.hi < lo or reg.lo > hi:
                continue
            ped = by_key[reg.other]
            r0 = step + max(reg.lo - k, 0)
            r1 = step + (reg.hi - k)
            if r0 <= ped.step0 + reg.other_hi and ped.step0 + reg.other_lo <= r1:
                return False
        return True

    def try_move(r: _Robot, step: int) -> tuple[bool, set[AgentKey]]:
        nxt = r.k + 1
        waits: set[AgentKey] = set()
        if r.committed_until >= nxt:
            return True, waits
        if not r.ped_mask[nxt]:
            return shared_clear(r, nxt, nxt, waits), waits
        lo = r.k if r.ped_mask[r.k] else nxt
        hi = nxt
        while hi + 1 <= r.last and r.ped_mask[hi + 1]:
            hi += 1
        ok = shared_clear(r, nxt, hi, waits)
        if ok and peds_clear(r, lo, hi, step):
            r.committed_until = hi
            return True, waits
        return False, waits

    while any(r.status == "active" for r in order):
        if n >= max_steps:
            for r in order:
                if r.status == "active":
                    r.status, r.failure, r.travel = "failed", "timeout", n * dt
            break
        moving = []
        waits_for: dict[AgentKey, set[AgentKey]] = {}
        for r in order:
            if r.status != "active":
                continue
            ok, waits = try_move(r, n)
            if ok:
                moving.append(r)
                r.halted = False
            else:
                if not r.halted:
                    r.halts += 1
                r.halted = True
                r.wait_steps += 1
                waits_for[r.track.key] = waits
        for r in moving:
            r.k += 1
        n += 1
        for r in order:
            if r.status == "active" and r.k == r.last:
                r.status, r.travel, r.done_step = "done", n * dt, n
        idle = 0 if moving else idle + 1
        _flag_deadlocks(robots, waits_for, n * dt)
        if idle >= watchdog_steps:
            for r in order:
                if r.status == "active":
                    r.status, r.failure, r.travel = "failed", "deadlock", n * dt
        snapshot()

    outcomes = []
    for r in order:
        outcomes.append(
            RobotOutcome(
                robot_id=r.track.id,
                travel_time=r.travel,
                waiting_time=r.wait_steps * dt,
                completed=r.status == "done",
                failure_kind=r.failure,
                free_flow_time=r.last * dt,
                halt_events=r.halts,
            )
        )
    done = [o.travel_time for o in outcomes if o.completed]
    return SimOutcome(
        robots=outcomes,
        makespan=max(done) if done else 0.0,
        steps=n,
        dt=dt,
        trace_hash=hasher.hexdigest(),
        progress=np.array(progress_rows),
    )


def _flag_deadlocks(robots: dict[AgentKey, _Robot], waits_for: dict[AgentKey, set[AgentKey]], now: float) -> None:
    """Fail halted robots on a wait-for cycle or waiting (transitively) on a failed robot."""
    g = nx.DiGraph()
    for a, bs in waits_for.items():
        for b in bs:
            g.add_edge(a, b)
    if g.number_of_edges() == 0:
        return
    stuck = set()
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1 or any(g.has_edge(v, v) for v in comp):
            stuck |= comp
    stuck |= {k for k in g.nodes if robots[k].status == "failed"}
    for k in list(stuck):
        stuck |= nx.ancestors(g, k)
    for k in sorted(stuck, key=lambda k: k[1]):
        r = robots[k]
        if r.status == "active":
            r.status, r.failure, r.travel = "failed", "deadlock", now


def safety_violations(tracks: list[AgentTrack], outcome: SimOutcome, slack: float = 0.0) -> list[tuple]:
    """Steps where two present agents (not both pedestrians) are closer than their radii sum minus ``slack``."""
    robots = sorted((t for t in tracks if t.kind == ROBOT), key=lambda t: t.id)
    peds = [t for t in tracks if t.kind == PEDESTRIAN]
    out = []
    for n, row in enumerate(outcome.progress):
        pos, rad, keys = [], [], []
        for t, k in zip(robots, row):
            if k >= 0:
                pos.append(t.xy[k])
                rad.append(t.safety_radius)
                keys.append(t.key)
        nrob = len(pos)
        if nrob == 0:
            continue
        for t in peds:
            j = n - t.step0
            if 0 <= j < len(t.xy):
                pos.append(t.xy[j])
                rad.append(t.safety_radius)
                keys.append(t.key)
        pos = np.array(pos)
        rad = np.array(rad)
        d = np.hypot(pos[:nrob, None, 0] - pos[None, :, 0], pos[:nrob, None, 1] - pos[None, :, 1])
        need = rad[:nrob, None] + rad[None, :] - slack
        for i in range(nrob):
            for j in range(len(pos)):
                if j > i and d[i, j] < need[i, j]:
                    out.append((n, keys[i], keys[j], float(d[i, j])))
    return out
