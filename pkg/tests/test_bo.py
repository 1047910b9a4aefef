import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hata.bo import (
    AcquisitionConfig,
    GPParams,
    TuningAborted,
    acquisition,
    posterior_surface,
    surface_to_csv,
    trace_to_csv,
    tune_weights,
    ucb_next,
)
from hata.cost import Weights
from hata.gp import GPModel, gp_posterior

ACQ = AcquisitionConfig()


def bowl(w):
    return (w.w0 - 1.15) ** 2 + (w.w1 - 0.95) ** 2


def test_default_grid():
    a0, a1 = ACQ.axes()
    assert len(a0) == len(a1) == 61
    assert a0[23] == 1.15 and a1[19] == 0.95
    c = ACQ.candidates()
    assert len(c) == 61 * 61 - 1
    assert tuple(c[0]) == (0.0, 0.05)


def test_config_validation():
    with pytest.raises(ValueError):
        AcquisitionConfig(beta=0.0)
    with pytest.raises(ValueError):
        AcquisitionConfig(stop_threshold=0.0)


def test_single_candidate():
    model = GPModel([[0.0, 0.0]], [1.0])
    assert ucb_next(model, ACQ, [[2.0, 1.0]]).tolist() == [2.0, 1.0]


def test_equal_mean_prefers_uncertain():
    # the candidates sit at distances giving std 0.1 and 0.5 from one observation at mean 0
    model = GPModel([[0.0, 0.0]], [0.0], length_scale=1.0, nu=0.5, noise=0.0, variance=1.0)
    r_small = -np.log(np.sqrt(1 - 0.1**2))
    r_big = -np.log(np.sqrt(1 - 0.5**2))
    cands = np.array([[r_small, 0.0], [0.0, r_big]])
    m, sd = gp_posterior(model, cands)
    assert np.allclose(m, 0.0) and np.allclose(sd, [0.1, 0.5])
    assert ucb_next(model, ACQ, cands).tolist() == cands[1].tolist()


def test_acquisition_matches_exhaustive_scan():
    rng = np.random.default_rng(7)
    X = rng.uniform(0, 1, (5, 2))
    y = rng.normal(size=5)
    acq = AcquisitionConfig(w0_bounds=(0.1, 1.0), w1_bounds=(0.1, 1.0), step=0.1)
    cands = acq.candidates()
    assert len(cands) == 100
    model = GPParams(length_scale=0.3).model(X, y)
    best, best_val = None, np.inf
    for c in cands:
        m, s = gp_posterior(model, c[None, :])
        v = m[0] - np.sqrt(acq.beta) * s[0]
        if v < best_val:
            best, best_val = c, v
    assert ucb_next(model, acq).tolist() == best.tolist()


@given(st.integers(0, 2**31), st.floats(-100, 100))
@settings(max_examples=30)
def test_shift_invariance(seed, c):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 3, (6, 2))
    y = rng.normal(size=6)
    gp = GPParams(length_scale=0.5)
    cands = AcquisitionConfig(step=0.25).candidates()
    a = acquisition(gp.model(X, y), cands, ACQ.beta)
    b = acquisition(gp.model(X, y + c), cands, ACQ.beta)
    assert np.allclose(b - c, a, atol=1e-7)
    pick = int(np.argmin(b))
    assert a[pick] <= a.min() + 1e-7


def test_recovers_bowl_minimum():
    res = tune_weights(Weights(1.0, 1.0), bowl, max_iterations=59)
    assert len(res.trace) <= 60
    assert abs(res.weights.w0 - 1.15) <= 0.05 + 1e-9
    assert abs(res.weights.w1 - 0.95) <= 0.05 + 1e-9


def test_cap_zero_and_one():
    calls = []
    res = tune_weights(Weights(1.0, 1.0), lambda w: calls.append(w) or bowl(w), max_iterations=0)
    assert res.trace == [] and calls == [] and res.weights == Weights(1.0, 1.0)
    res = tune_weights(Weights(1.0, 1.0), bowl, max_iterations=1)
    assert len(res.trace) == 2
    assert (res.trace[0].w0, res.trace[0].w1) == (1.0, 1.0)


def test_huge_threshold_stops_at_once():
    res = tune_weights(Weights(1.0, 1.0), bowl, AcquisitionConfig(stop_threshold=1e6), max_iterations=20)
    assert len(res.trace) == 1 and res.stopped_early


def test_trace_monotone_in_cap_and_deterministic():
    lengths = [len(tune_weights(Weights(1.0, 1.0), bowl, max_iterations=k).trace) for k in (1, 3, 6)]
    assert lengths == sorted(lengths)
    a = tune_weights(Weights(1.0, 1.0), bowl, max_iterations=6)
    b = tune_weights(Weights(1.0, 1.0), bowl, max_iterations=6)
    assert trace_to_csv(a.trace) == trace_to_csv(b.trace)
    # a longer run starts with the shorter run's trace
    c = tune_weights(Weights(1.0, 1.0), bowl, max_iterations=3)
    assert a.trace[: len(c.trace)] == c.trace


def test_abort_keeps_partial_trace():
    def flaky(w):
        if flaky.calls == 3:
            raise RuntimeError("simulator crashed")
        flaky.calls += 1
        return bowl(w)

    flaky.calls = 0
    with pytest.raises(TuningAborted) as exc:
        tune_weights(Weights(1.0, 1.0), flaky, max_iterations=10)
    assert len(exc.value.trace) == 3
    assert "iteration 3" in str(exc.value)
    with pytest.raises(TuningAborted):
        tune_weights(Weights(1.0, 1.0), lambda w: float("nan"), max_iterations=2)


def test_surface_export():
    res = tune_weights(Weights(1.0, 1.0), bowl, AcquisitionConfig(step=0.5), max_iterations=2)
    acq = AcquisitionConfig(step=0.5)
    a0, a1, mean, var = posterior_surface(res.model, acq)
    assert mean.shape == var.shape == (7, 7)
    assert np.all(var >= 0)
    lines = surface_to_csv(a0, a1, mean).splitlines()
    assert len(lines) == 8 and lines[0].startswith("w0\\w1,0.0,0.5")
    assert trace_to_csv(res.trace).splitlines()[0] == "iteration,w0,w1,error,max_posterior_std"
