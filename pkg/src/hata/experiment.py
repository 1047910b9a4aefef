"""One allocation experiment: plan, bid, assign, profile, coordinate."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import sim
from .assignment import Assignment, InfeasibleAssignment, allocate
from .cost import TUNED_WEIGHTS, CostMatrix, Weights, cost_matrix, euclidean_costs, length_costs
from .grid import Cell
from .mod import MoDStack
from .planner import GridPath, OccupancyGrid, plan_matrix
from .trajectories import Trajectory

METHODS = ("hata", "path", "euclidean")


@dataclass(frozen=True, eq=False)
class Scenario:
    grid: OccupancyGrid
    robots: list[Cell]
    tasks: list[Cell]
    mods: MoDStack | None = None
    pedestrians: tuple[Trajectory, ...] = ()
    start_time: float = 0.0  # replay time that maps to simulation time 0
    mod_time: float | None = None  # MoD query time; defaults to start_time
    delta: float = 0.65
    weights: Weights = TUNED_WEIGHTS
    method: str = "hata"
    objective: str = "sum"
    seed: int = 0
    sample_encounters: bool = False
    v_max: float = sim.V_MAX
    a_max: float = sim.A_MAX
    dt: float = sim.DEFAULT_DT
    robot_radius: float = sim.DEFAULT_RADIUS
    pedestrian_radius: float = sim.DEFAULT_RADIUS
    timeout: float = sim.DEFAULT_TIMEOUT
    watchdog: float = sim.DEFAULT_WATCHDOG

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if len(self.robots) != len(self.tasks):
            raise ValueError("scenario needs as many tasks as robots")
        if self.mods is not None:
            self.grid.check_pairing(self.mods)

    @property
    def query_time(self) -> float:
        return self.start_time if self.mod_time is None else self.mod_time

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass
class ExperimentResult:
    status: str  # ok | infeasible
    assignment: Assignment | None
    outcome: sim.SimOutcome | None
    costs: CostMatrix
    paths: list[GridPath] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    message: str = ""
    tracks: list[sim.AgentTrack] = field(default_factory=list, repr=False)


def plan_for(sc: Scenario):
    if sc.method == "hata":
        if sc.mods is None:
            raise ValueError("method 'hata' needs a MoD stack")
        return plan_matrix(sc.grid, sc.mods, sc.robots, sc.tasks, sc.delta, sc.query_time)
    return plan_matrix(sc.grid, None, sc.robots, sc.tasks, 1.0, sc.query_time)


def bid(sc: Scenario, paths, rng: np.random.Generator | None = None) -> CostMatrix:
    if sc.method == "hata":
        return cost_matrix(paths, sc.mods, sc.query_time, sc.weights, rng)
    lengths = length_costs(paths)
    if sc.method == "path":
        return lengths
    euclid = euclidean_costs(sc.grid.spec, sc.robots, sc.tasks)
    return CostMatrix(euclid.values, lengths.unreachable)


def replay_tracks(sc: Scenario) -> list[sim.AgentTrack]:
    out = []
    for traj in sc.pedestrians:
        if traj.end < sc.start_time or traj.start > sc.start_time + sc.timeout:
            continue
        t = sim.pedestrian_track(traj, sc.dt, sc.start_time, sc.pedestrian_radius)
        if t is not None:
            out.append(t)
    return out


def run_experiment(sc: Scenario, timing_reps: int = 1) -> ExperimentResult:
    """Full pipeline for one scenario.

    ``timings`` holds wall-clock seconds for ``planning`` and for
    ``assignment`` (bidding plus solving, median over ``timing_reps`` runs).
    """
    t0 = time.perf_counter()
    paths = plan_for(sc)
    planning = time.perf_counter() - t0

    samples = []
    for _ in range(max(1, timing_reps)):
        rng = np.random.default_rng(sc.seed) if sc.sample_encounters else None
        t0 = time.perf_counter()
        costs = bid(sc, paths, rng)
        try:
            assignment = allocate(costs, sc.objective)
            error = None
        except InfeasibleAssignment as exc:
            assignment, error = None, exc
        samples.append(time.perf_counter() - t0)
    timings = {"planning": planning, "assignment": statistics.median(samples)}
    if assignment is None:
        return ExperimentResult("infeasible", None, None, costs, timings=timings, message=str(error))

    chosen = [paths[i][j] for i, j in assignment.pairs]
    tracks = [
        sim.profile_robot(p, sc.grid.spec, sc.v_max, sc.a_max, sc.dt, robot_id=i, safety_radius=sc.robot_radius)
        for i, p in enumerate(chosen)
    ]
    tracks += replay_tracks(sc)
    t0 = time.perf_counter()
    outcome = sim.simulate(tracks, sim.find_conflicts(tracks), timeout=sc.timeout, watchdog=sc.watchdog)
    timings["simulation"] = time.perf_counter() - t0
    return ExperimentResult("ok", assignment, outcome, costs, chosen, timings, tracks=tracks)


class MissionTimeError:
    """Tuning objective: mean |simulated travel time - bid / v_max| over all robots of all scenarios."""

    def __init__(self, scenarios: list[Scenario]):
        self.scenarios = list(scenarios)

    def __call__(self, w: Weights) -> float:
        errors = []
        for sc in self.scenarios:
            res = run_experiment(sc.with_(weights=w, method="hata"))
            if res.outcome is None:
                raise RuntimeError(f"allocation infeasible for seed {sc.seed}: {res.message}")
            for rob, (i, j) in zip(res.outcome.robots, res.assignment.pairs):
                predicted = res.costs.values[i, j] / sc.v_max
                errors.append(abs(rob.travel_time - predicted))
        return float(np.mean(errors))
