"""Tests for the linear-EH-model baseline allocation."""

import numpy as np
import pytest

from swiptsec import sdp
from swiptsec.baseline import solve_baseline
from swiptsec.channel import ScenarioConfig, sample_channel
from swiptsec.inner import InfeasibleError, InnerProblemData, check_kkt
from swiptsec.metrics import (er_rate, harvested_report, received_powers,
                              secrecy_rate)
from swiptsec.outer import run


@pytest.fixture(scope="module")
def pair():
    """Baseline and proposed solutions of the same realization."""
    cfg = ScenarioConfig(seed=0)
    chan = sample_channel(cfg, np.random.default_rng(0))
    data = InnerProblemData.from_config(cfg, chan)
    base = solve_baseline(data)
    prop, state, _ = run(data)
    return cfg, chan, data, base, prop


def test_baseline_feasible_for_original_problem(pair):
    cfg, chan, data, base, _ = pair
    W = np.outer(base.w, base.w.conj())
    assert np.real(np.trace(W + base.V)) <= data.p_max * (1 + 1e-9)
    sig = np.real(chan.h.conj() @ W @ chan.h)
    interf = np.real(chan.h.conj() @ base.V @ chan.h)
    assert sig >= data.gamma_req * (interf + chan.sigma_sq) * (1 - 1e-12)
    for j in range(chan.n_ers):
        assert er_rate(base, chan, j) <= cfg.r_tol + 1e-9
    assert secrecy_rate(base, chan) >= np.log2(1 + cfg.gamma_req) - cfg.r_tol - 1e-9


def test_baseline_rank_one_with_passing_certificate(pair):
    _, _, data, base, _ = pair
    assert base.rank_ratio <= 1e-6
    assert check_kkt(base, data).passed()


def test_baseline_optimal_for_linear_metric(pair):
    # dominance in its own objective: eta * total received power
    cfg, chan, _, base, prop = pair
    eta = cfg.eh.eta
    lin_base = eta * np.sum(received_powers(base, chan))
    lin_prop = eta * np.sum(received_powers(prop, chan))
    assert lin_base >= lin_prop - 1e-5 * lin_prop
    assert base.objective == pytest.approx(lin_base, rel=1e-9)


def test_baseline_never_beats_proposed_nonlinear(pair):
    cfg, chan, _, base, prop = pair
    nb = harvested_report(base, chan, cfg.eh)["total_nonlinear"]
    np_ = harvested_report(prop, chan, cfg.eh)["total_nonlinear"]
    assert nb <= np_ + 1e-6


def test_zero_efficiency_degenerate_objective():
    cfg = ScenarioConfig(seed=2)
    chan = sample_channel(cfg, np.random.default_rng(2))
    data = InnerProblemData.from_config(cfg, chan)
    alloc = solve_baseline(data, eta=0.0)
    # any feasible point is acceptable; it must still satisfy the constraints
    assert np.real(np.trace(alloc.W + alloc.V)) <= data.p_max * (1 + 1e-7)
    assert alloc.objective == pytest.approx(0.0, abs=1e-15)


def test_negative_efficiency_rejected():
    cfg = ScenarioConfig(seed=0)
    chan = sample_channel(cfg, np.random.default_rng(0))
    data = InnerProblemData.from_config(cfg, chan)
    with pytest.raises(sdp.ValidationError):
        solve_baseline(data, eta=-0.5)


def test_baseline_infeasible_instance_raises():
    cfg = ScenarioConfig(gamma_req_db=200.0, seed=0)
    chan = sample_channel(cfg, np.random.default_rng(0))
    data = InnerProblemData.from_config(cfg, chan)
    with pytest.raises(InfeasibleError):
        solve_baseline(data)
