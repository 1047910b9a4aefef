"""Versioned YAML configuration for batches, scenario templates and tuning runs.

Every config file is a YAML mapping with ``version: 1`` at the top level.
JSON files are accepted too since JSON is a subset of YAML.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .bo import AcquisitionConfig, GPParams
from .cost import TUNED_WEIGHTS, Weights
from .experiment import METHODS, Scenario
from .mod import import_stack
from .planner import load_static_map
from .synthetic import corridor_mods, corridor_scenario, pick_cells, random_scenario
from .trajectories import group_trajectories, load_format, read_tracks

CONFIG_VERSION = 1
FAMILIES = ("corridor", "random", "map")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration; maps to the data-error exit code."""


def read_config(path: str | Path) -> tuple[dict, Path]:
    """Parse a config file and check its version; returns ``(mapping, directory)``."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    version = data.get("version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"{path}: unsupported config version {version!r} (expected {CONFIG_VERSION})")
    return data, path.parent


def _check_keys(data: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")


def _weights(data) -> Weights:
    if data is None:
        return TUNED_WEIGHTS
    try:
        if isinstance(data, dict):
            return Weights(float(data["w0"]), float(data["w1"]))
        w0, w1 = data
        return Weights(float(w0), float(w1))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad weights {data!r}: {exc}") from exc


@functools.lru_cache(maxsize=8)
def _map_resources(static_map: str, grid: str, mods: str, tracks: str, fmt: str, inflate: float):
    occ = load_static_map(static_map, grid).inflate(inflate)
    stack = import_stack(mods)
    trajs = ()
    if tracks:
        parsed = read_tracks(tracks, load_format(fmt))
        trajs = tuple(group_trajectories(parsed.records)[0])
    return occ, stack, trajs


@dataclass(frozen=True)
class ScenarioTemplate:
    """How to turn ``(seed, fleet size, window)`` into a :class:`Scenario`.

    ``corridor`` and ``random`` are the seeded synthetic families. ``map``
    loads a static map, a MoD stack and optionally a pedestrian log; robots
    and tasks are drawn from free cells and the log is replayed from the
    window start.
    """

    family: str
    params: dict = field(default_factory=dict)

    _KEYS = {
        "corridor": {"mods_seed"},
        "random": {"size", "n_pedestrians", "zero_crowd"},
        "map": {"static_map", "grid", "mods", "tracks", "format", "inflate", "spacing"},
    }

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown scenario family {self.family!r}; expected one of {FAMILIES}")
        _check_keys(self.params, self._KEYS[self.family], f"scenario ({self.family})")
        if self.family == "map":
            for key in ("static_map", "grid", "mods"):
                if key not in self.params:
                    raise ConfigError(f"scenario (map): missing {key!r}")

    @classmethod
    def from_mapping(cls, data: dict, base: Path = Path(".")) -> "ScenarioTemplate":
        if not isinstance(data, dict) or "family" not in data:
            raise ConfigError("scenario: expected a mapping with a 'family' key")
        params = {k: v for k, v in data.items() if k != "family"}
        if data["family"] == "map":
            for key in ("static_map", "grid", "mods", "tracks"):
                if params.get(key):
                    p = Path(params[key])
                    p = p if p.is_absolute() else base / p
                    if not p.exists():
                        raise ConfigError(f"scenario (map): {key} file {str(p)!r} does not exist")
                    params[key] = str(p)
        return cls(data["family"], params)

    def to_mapping(self) -> dict:
        return {"family": self.family, **self.params}

    def build(self, seed: int, n_robots: int, window_start: float = 0.0, **settings) -> Scenario:
        """Scenario for one run; ``settings`` are passed on as :class:`Scenario` fields."""
        if self.family == "corridor":
            mods = _corridor_stack(int(self.params.get("mods_seed", 12345)))
            return corridor_scenario(seed, n_robots, mods=mods, **settings)
        if self.family == "random":
            return random_scenario(
                seed,
                n_robots,
                self.params.get("n_pedestrians"),
                bool(self.params.get("zero_crowd", False)),
                int(self.params.get("size", 40)),
                **settings,
            )
        p = self.params
        occ, stack, trajs = _map_resources(
            p["static_map"], p["grid"], p["mods"], p.get("tracks", ""), p.get("format", "atc"), float(p.get("inflate", 0.0))
        )
        rng = np.random.default_rng(seed)
        spec = occ.spec
        box = ((spec.origin_x, spec.origin_x + spec.width * spec.resolution),
               (spec.origin_y, spec.origin_y + spec.height * spec.resolution))
        spacing = float(p.get("spacing", 1.0))
        robots = pick_cells(rng, occ, n_robots, box, spacing)
        tasks = pick_cells(rng, occ, n_robots, box, spacing)
        return Scenario(occ, robots, tasks, stack, trajs, start_time=window_start, seed=seed, **settings)


def load_scenario(path: str | Path) -> Scenario:
    """Single scenario from a file naming the map, MoDs, agents and settings.

    Robots and tasks are lists of ``[x, y]`` positions in meters.
    """
    data, base = read_config(path)
    allowed = {
        "version", "static_map", "grid", "mods", "tracks", "format", "inflate", "robots", "tasks", "delta",
        "weights", "method", "objective", "window", "seed", "timeout",
    }
    _check_keys(data, allowed, "scenario")
    template = ScenarioTemplate.from_mapping(
        {"family": "map", **{k: data[k] for k in ("static_map", "grid", "mods", "tracks", "format", "inflate") if k in data}},
        base,
    )
    p = template.params
    occ, stack, trajs = _map_resources(
        p["static_map"], p["grid"], p["mods"], p.get("tracks", ""), p.get("format", "atc"), float(p.get("inflate", 0.0))
    )

    def cells(key):
        out = []
        for xy in data.get(key, []):
            cell = occ.spec.cell_of(float(xy[0]), float(xy[1]))
            if not occ.spec.in_bounds(cell) or occ.blocked[cell]:
                raise ConfigError(f"scenario: {key} position {xy} is outside the map or blocked")
            out.append(cell)
        return out

    settings = {k: data[k] for k in ("delta", "method", "objective", "timeout") if k in data}
    try:
        return Scenario(
            occ, cells("robots"), cells("tasks"), stack, trajs,
            start_time=float(data.get("window", 0.0)), seed=int(data.get("seed", 0)),
            weights=_weights(data.get("weights")), **settings,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"scenario: {exc}") from exc


@functools.lru_cache(maxsize=4)
def _corridor_stack(seed: int):
    return corridor_mods(seed)


@dataclass(frozen=True)
class ExperimentBatch:
    """Cartesian product of methods, fleet sizes, thresholds and windows, ``runs`` seeds each.

    The threshold only affects ``hata``; the baselines get one cell per
    (fleet size, window) with ``delta`` left empty.
    """

    template: ScenarioTemplate
    fleet_sizes: tuple[int, ...]
    deltas: tuple[float, ...] = (0.65,)
    methods: tuple[str, ...] = ("hata", "path")
    windows: tuple[tuple[str, float], ...] = (("T0", 0.0),)
    runs: int = 1
    seed_base: int = 0
    objective: str = "sum"
    weights: Weights = TUNED_WEIGHTS
    timeout: float = 600.0
    timing_reps: int = 5
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.fleet_sizes or any(n < 1 for n in self.fleet_sizes):
            raise ConfigError("fleet_sizes must be a non-empty list of positive integers")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {bad}; expected a subset of {METHODS}")
        if any(not 0.0 <= d <= 1.0 for d in self.deltas) or not self.deltas:
            raise ConfigError("deltas must be a non-empty list of values in [0, 1]")
        if not self.windows:
            raise ConfigError("at least one window is required")
        if self.workers < 1 or self.timing_reps < 1:
            raise ConfigError("workers and timing_reps must be >= 1")

    @classmethod
    def from_mapping(cls, data: dict, base: Path = Path(".")) -> "ExperimentBatch":
        allowed = {
            "version", "scenario", "fleet_sizes", "deltas", "methods", "windows", "runs", "seed_base",
            "objective", "weights", "timeout", "timing_reps", "workers",
        }
        _check_keys(data, allowed, "batch")
        if "scenario" not in data or "fleet_sizes" not in data:
            raise ConfigError("batch: 'scenario' and 'fleet_sizes' are required")
        windows = data.get("windows", {"T0": 0.0})
        if isinstance(windows, dict):
            windows = tuple((str(k), float(v)) for k, v in windows.items())
        else:
            raise ConfigError("batch: 'windows' must map names to start times in seconds")
        try:
            return cls(
                template=ScenarioTemplate.from_mapping(data["scenario"], base),
                fleet_sizes=tuple(int(n) for n in data["fleet_sizes"]),
                deltas=tuple(float(d) for d in data.get("deltas", [0.65])),
                methods=tuple(str(m) for m in data.get("methods", ["hata", "path"])),
                windows=windows,
                runs=int(data.get("runs", 1)),
                seed_base=int(data.get("seed_base", 0)),
                objective=str(data.get("objective", "sum")),
                weights=_weights(data.get("weights")),
                timeout=float(data.get("timeout", 600.0)),
                timing_reps=int(data.get("timing_reps", 5)),
                workers=int(data.get("workers", 1)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"batch: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentBatch":
        data, base = read_config(path)
        return cls.from_mapping(data, base)

    def to_mapping(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "scenario": self.template.to_mapping(),
            "fleet_sizes": list(self.fleet_sizes),
            "deltas": list(self.deltas),
            "methods": list(self.methods),
            "windows": dict(self.windows),
            "runs": self.runs,
            "seed_base": self.seed_base,
            "objective": self.objective,
            "weights": {"w0": self.weights.w0, "w1": self.weights.w1},
            "timeout": self.timeout,
            "timing_reps": self.timing_reps,
            "workers": self.workers,
        }


@dataclass(frozen=True)
class TuneConfig:
    """Bayesian-optimisation run: initial weights, search settings and the error to minimise.

    ``evaluator`` is either ``{kind: quadratic, optimum: [a, b], scale: [sa, sb]}``
    (a known-optimum synthetic objective) or ``{kind: mission_time,
    scenario: {...}, fleet_size, delta, seeds, window}``.
    """

    initial: Weights = Weights(1.0, 1.0)
    max_iterations: int = 50
    acquisition: AcquisitionConfig = AcquisitionConfig()
    gp: GPParams = GPParams()
    evaluator: dict = field(default_factory=lambda: {"kind": "quadratic", "optimum": [1.15, 0.95]})

    @classmethod
    def from_mapping(cls, data: dict, base: Path = Path(".")) -> "TuneConfig":
        _check_keys(data, {"version", "initial", "max_iterations", "acquisition", "gp", "evaluator"}, "tune")
        try:
            acq = data.get("acquisition", {}) or {}
            _check_keys(acq, {"beta", "w0_bounds", "w1_bounds", "step", "stop_threshold"}, "tune.acquisition")
            acq = {k: tuple(v) if k.endswith("bounds") else float(v) for k, v in acq.items()}
            gp = data.get("gp", {}) or {}
            _check_keys(gp, {"length_scale", "nu", "noise", "signal_variance", "center"}, "tune.gp")
            ev = dict(data.get("evaluator", {"kind": "quadratic", "optimum": [1.15, 0.95]}))
            if ev.get("kind") not in ("quadratic", "mission_time"):
                raise ConfigError(f"tune.evaluator: unknown kind {ev.get('kind')!r}")
            if ev["kind"] == "mission_time":
                ev["scenario"] = ScenarioTemplate.from_mapping(ev.get("scenario", {}), base)
            return cls(
                initial=_weights(data.get("initial", [1.0, 1.0])),
                max_iterations=int(data.get("max_iterations", 50)),
                acquisition=AcquisitionConfig(**acq),
                gp=GPParams(**gp),
                evaluator=ev,
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"tune: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "TuneConfig":
        data, base = read_config(path)
        return cls.from_mapping(data, base)
