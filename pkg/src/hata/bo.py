"""Bayesian optimisation of the bid weights.

The objective is an error to minimise, so candidates are ranked by the lower
confidence bound ``mu - sqrt(beta) * sigma`` and the smallest wins; this is
the upper-confidence-bound rule applied to the negated error.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cost import Weights
from .gp import GPModel, gp_posterior


@dataclass(frozen=True)
class AcquisitionConfig:
    beta: float = 150.0
    w0_bounds: tuple[float, float] = (0.0, 3.0)
    w1_bounds: tuple[float, float] = (0.0, 3.0)
    step: float = 0.05
    stop_threshold: float = 0.08

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.stop_threshold > 0:
            raise ValueError("stop_threshold must be positive")
        if not self.step > 0:
            raise ValueError("step must be positive")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        def axis(lo, hi):
            n = int(math.floor((hi - lo) / self.step + 1e-9)) + 1
            return np.round(lo + self.step * np.arange(n), 12)

        return axis(*self.w0_bounds), axis(*self.w1_bounds)

    def candidates(self) -> np.ndarray:
        """Grid points in w0-major order, without the invalid ``(0, 0)``."""
        a0, a1 = self.axes()
        g0, g1 = np.meshgrid(a0, a1, indexing="ij")
        pts = np.column_stack([g0.ravel(), g1.ravel()])
        return pts[~((pts[:, 0] == 0) & (pts[:, 1] == 0))]


@dataclass(frozen=True)
class GPParams:
    length_scale: float = 0.08
    nu: float = 2.5
    noise: float = 1e-4
    signal_variance: float | None = None
    center: bool = True  # use the observation mean as the constant prior mean

    def model(self, X, y) -> GPModel:
        y = np.asarray(y, dtype=float)
        return GPModel(
            X=np.asarray(X, dtype=float).reshape(-1, 2),
            y=y,
            length_scale=self.length_scale,
            nu=self.nu,
            noise=self.noise,
            variance=self.signal_variance,
            mean=float(y.mean()) if self.center and len(y) else 0.0,
        )


def acquisition(model: GPModel, candidates: np.ndarray, beta: float) -> np.ndarray:
    mu, sd = gp_posterior(model, candidates)
    return mu - math.sqrt(beta) * sd


def ucb_next(model: GPModel, acq: AcquisitionConfig, candidates: np.ndarray | None = None) -> np.ndarray:
    """Candidate minimising the lower confidence bound; first in grid order on ties."""
    cands = acq.candidates() if candidates is None else np.asarray(candidates, dtype=float).reshape(-1, 2)
    if len(cands) == 0:
        raise ValueError("empty candidate set")
    return cands[int(np.argmin(acquisition(model, cands, acq.beta)))]


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    w0: float
    w1: float
    error: float
    max_std: float


@dataclass
class TuneResult:
    weights: Weights
    trace: list[TraceRow] = field(default_factory=list)
    model: GPModel | None = None
    stopped_early: bool = False

    def trace_csv(self) -> str:
        return trace_to_csv(self.trace)


class TuningAborted(RuntimeError):
    def __init__(self, message: str, trace: list[TraceRow]):
        super().__init__(message)
        self.trace = trace


def trace_to_csv(trace: list[TraceRow]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["iteration", "w0", "w1", "error", "max_posterior_std"])
    for row in trace:
        w.writerow([row.iteration, repr(row.w0), repr(row.w1), repr(row.error), repr(row.max_std)])
    return out.getvalue()


def posterior_surface(model: GPModel, acq: AcquisitionConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Posterior mean and variance on the full grid, shape ``(len(w0_axis), len(w1_axis))``."""
    a0, a1 = acq.axes()
    g0, g1 = np.meshgrid(a0, a1, indexing="ij")
    mu, sd = gp_posterior(model, np.column_stack([g0.ravel(), g1.ravel()]))
    return a0, a1, mu.reshape(g0.shape), (sd**2).reshape(g0.shape)


def surface_to_csv(w0_axis, w1_axis, values) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["w0\\w1"] + [repr(float(v)) for v in w1_axis])
    for a, row in zip(w0_axis, values):
        w.writerow([repr(float(a))] + [repr(float(v)) for v in row])
    return out.getvalue()


def tune_weights(
    initial: Weights,
    evaluate: Callable[[Weights], float],
    acq: AcquisitionConfig = AcquisitionConfig(),
    gp: GPParams = GPParams(),
    max_iterations: int = 50,
) -> TuneResult:
    """Evaluate, refit, pick the next candidate; repeat.

    Stops once the largest posterior std over the candidate grid drops below
    ``acq.stop_threshold`` or after ``max_iterations`` evaluations beyond the
    initial one. With ``max_iterations == 0`` nothing is evaluated.
    """
    if max_iterations < 0:
        raise ValueError("max_iterations must be >= 0")
    if max_iterations == 0:
        return TuneResult(initial, [])
    cands = acq.candidates()
    X: list[tuple[float, float]] = []
    y: list[float] = []
    trace: list[TraceRow] = []
    point = (initial.w0, initial.w1)
    model = None
    stopped = False
    for it in range(max_iterations + 1):
        try:
            err = float(evaluate(Weights(*point)))
        except Exception as exc:
            raise TuningAborted(f"evaluator failed at iteration {it} with weights {point}: {exc}", trace) from exc
        if not math.isfinite(err):
            raise TuningAborted(f"evaluator returned non-finite error at iteration {it}", trace)
        X.append(point)
        y.append(err)
        model = gp.model(X, y)
        _, sd = gp_posterior(model, cands)
        max_std = float(sd.max())
        trace.append(TraceRow(it, float(point[0]), float(point[1]), err, max_std))
        if max_std < acq.stop_threshold:
            stopped = True
            break
        if it == max_iterations:
            break
        point = tuple(float(v) for v in ucb_next(model, acq, cands))
    best = int(np.argmin(y))
    return TuneResult(Weights(*X[best]), trace, model, stopped)
