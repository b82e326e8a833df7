"""Tests for the fixed-parameter inner solver and rank-one recovery."""

import numpy as np
import pytest

from swiptsec import sdp
from swiptsec.channel import ScenarioConfig, sample_channel
from swiptsec.inner import (Allocation, InfeasibleError, InnerProblemData,
                            _extract_beamformer, _gradient, check_feasible,
                            check_kkt, recover_rank_one, solve_inner)
from swiptsec.metrics import er_rate, ir_rate, received_powers
from swiptsec.outer import initial_parameters


@pytest.fixture(scope="module")
def instance():
    cfg = ScenarioConfig(seed=0)
    chan = sample_channel(cfg, np.random.default_rng(0))
    data = InnerProblemData.from_config(cfg, chan)
    data.mu, data.beta = initial_parameters(data.eh)
    return cfg, chan, data


def feasibility_residuals(alloc, data):
    """Worst-case violations of the power, SINR, and leakage constraints."""
    chan = data.channel
    h = chan.h
    W = np.outer(alloc.w, alloc.w.conj()) if alloc.w is not None else alloc.W
    power = np.real(np.trace(W + alloc.V)) - data.p_max
    sig = np.real(h.conj() @ W @ h)
    interf = np.real(h.conj() @ alloc.V @ h)
    sinr = data.gamma_req * (interf + chan.sigma_sq) - sig
    lmi = -np.inf
    for G in chan.G:
        S = data.alpha_er * (G.conj().T @ alloc.V @ G
                             + chan.sigma_sq * np.eye(chan.n_r)) \
            - G.conj().T @ W @ G
        lmi = max(lmi, -np.linalg.eigvalsh(0.5 * (S + S.conj().T))[0])
    return power, sinr, lmi


def test_default_instance_is_feasible(instance):
    _, _, data = instance
    ok, relief = check_feasible(data)
    assert ok
    assert relief <= 1e-6


def test_unattainable_sinr_detected_infeasible(instance):
    cfg, chan, _ = instance
    hard = ScenarioConfig(gamma_req_db=200.0, seed=0)
    data = InnerProblemData.from_config(hard, chan)
    data.mu, data.beta = initial_parameters(data.eh)
    ok, relief = check_feasible(data)
    assert not ok
    assert relief > 1e-3
    with pytest.raises(InfeasibleError):
        solve_inner(data)


def test_gradient_positive_and_decreasing(instance):
    _, _, data = instance
    g0 = _gradient(np.zeros(3), data)
    g1 = _gradient(np.full(3, 0.01), data)
    assert np.all(g0 > 0)
    assert np.all(g1 < g0)   # sigmoid derivative falls beyond the threshold


def test_solve_inner_returns_feasible_relaxed_point(instance):
    _, chan, data = instance
    alloc = solve_inner(data)
    assert alloc.fw_gap <= 1e-7
    power, sinr, lmi = feasibility_residuals(alloc, data)
    assert power <= 1e-7
    assert sinr <= 1e-7 * data.gamma_req * chan.sigma_sq + 1e-12
    assert lmi <= 1e-9
    np.testing.assert_allclose(alloc.tau, received_powers(alloc, chan),
                               rtol=1e-9, atol=1e-15)


def test_solve_inner_warm_start_agrees(instance):
    _, _, data = instance
    cold = solve_inner(data)
    warm = solve_inner(data, warm=cold, check_feasibility=False)
    assert warm.objective == pytest.approx(cold.objective, abs=1e-8)


def test_recover_rank_one_certificate(instance):
    cfg, chan, data = instance
    relaxed = solve_inner(data)
    alloc = recover_rank_one(data, relaxed.tau)
    assert alloc.rank_ratio <= 1e-6
    assert alloc.w is not None
    # received powers reproduce the requested ones to polish tolerance
    np.testing.assert_allclose(alloc.tau, relaxed.tau, rtol=1e-4)
    report = check_kkt(alloc, data)
    assert report.passed()
    assert report.alpha > 0.0
    # exact feasibility of the secrecy-critical constraints
    power, sinr, lmi = feasibility_residuals(alloc, data)
    assert power <= 1e-9
    assert sinr <= 1e-15        # snapped onto the SINR floor
    assert lmi <= 1e-12
    assert ir_rate(alloc, chan) >= np.log2(1.0 + cfg.gamma_req) - 1e-9
    for j in range(chan.n_ers):
        assert er_rate(alloc, chan, j) <= cfg.r_tol + 1e-9


def test_recover_rank_one_infeasible_tau(instance):
    _, _, data = instance
    with pytest.raises(InfeasibleError):
        recover_rank_one(data, np.full(3, 10.0 * data.p_max))


def test_extract_beamformer_deterministic_phase():
    rng = np.random.default_rng(5)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    W = np.outer(v, v.conj())
    w, ratio = _extract_beamformer(W)
    assert ratio <= 1e-12
    np.testing.assert_allclose(np.outer(w, w.conj()), W, atol=1e-10)
    k = np.argmax(np.abs(w))
    assert abs(w[k].imag) < 1e-12 and w[k].real > 0


def test_problem_data_validation(instance):
    _, chan, _ = instance
    with pytest.raises(sdp.ValidationError):
        InnerProblemData(channel=chan, eh=[], p_max=1.0, gamma_req=10.0,
                         alpha_er=1.0, mu=np.zeros(3), beta=np.zeros(3))
    with pytest.raises(sdp.ValidationError):
        InnerProblemData(channel=chan, eh=[None] * 3, p_max=-1.0,
                         gamma_req=10.0, alpha_er=1.0,
                         mu=np.zeros(3), beta=np.zeros(3))
    with pytest.raises(sdp.ValidationError):
        InnerProblemData(channel=chan, eh=[None] * 3, p_max=1.0,
                         gamma_req=10.0, alpha_er=1.0,
                         mu=np.zeros(2), beta=np.zeros(3))


def test_check_kkt_requires_certificate(instance):
    _, _, data = instance
    bare = Allocation(W=np.eye(4), V=np.eye(4))
    with pytest.raises(ValueError):
        check_kkt(bare, data)
