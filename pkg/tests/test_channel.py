"""Tests for scenario configuration and random channel generation."""

import numpy as np
import pytest

from swiptsec.channel import (ChannelRealization, ConfigError, ScenarioConfig,
                              db_to_lin, dbm_to_watt, lin_to_db, path_loss,
                              sample_channel, watt_to_dbm)

# frozen against independent multiprecision evaluation of the free-space law
FRIIS_10M_915MHZ_2X10DBI = 6.797973850689421e-4
WAVELENGTH_915MHZ = 0.32764203060109290


def test_db_conversions_roundtrip():
    assert db_to_lin(10.0) == pytest.approx(10.0, rel=1e-15)
    assert db_to_lin(0.0) == 1.0
    assert lin_to_db(db_to_lin(7.3)) == pytest.approx(7.3, rel=1e-12)
    assert dbm_to_watt(30.0) == pytest.approx(1.0, rel=1e-15)
    assert dbm_to_watt(36.0) == pytest.approx(3.9810717055349722, rel=1e-14)
    assert watt_to_dbm(dbm_to_watt(-95.0)) == pytest.approx(-95.0, rel=1e-12)


def test_path_loss_frozen_value():
    cfg = ScenarioConfig()
    assert path_loss(10.0, cfg) == pytest.approx(FRIIS_10M_915MHZ_2X10DBI,
                                                 rel=1e-14)


def test_path_loss_inverse_square():
    cfg = ScenarioConfig()
    assert path_loss(20.0, cfg) == pytest.approx(path_loss(10.0, cfg) / 4.0,
                                                 rel=1e-12)


def test_wavelength_constant():
    assert 299792458.0 / ScenarioConfig().carrier_hz == pytest.approx(
        WAVELENGTH_915MHZ, rel=1e-15)


def test_default_config_matches_urban_iot_setup():
    cfg = ScenarioConfig()
    assert cfg.n_t == 4 and cfg.n_r == 2 and cfg.j_ers == 3
    assert cfg.gamma_req == pytest.approx(10.0)
    assert cfg.p_max == pytest.approx(dbm_to_watt(36.0))
    assert cfg.sigma_sq == pytest.approx(dbm_to_watt(-95.0))
    assert cfg.alpha_er == pytest.approx(1.0)  # 2^1 - 1
    assert cfg.eh.M == pytest.approx(0.02)


def test_sample_channel_shapes_and_determinism():
    cfg = ScenarioConfig(n_t=6, n_r=2, j_ers=4)
    a = sample_channel(cfg, np.random.default_rng(11))
    b = sample_channel(cfg, np.random.default_rng(11))
    assert a.h.shape == (6,)
    assert len(a.G) == 4 and a.G[0].shape == (6, 2)
    np.testing.assert_array_equal(a.h, b.h)
    for ga, gb in zip(a.G, b.G):
        np.testing.assert_array_equal(ga, gb)


def test_sample_channel_power_scales_with_path_loss():
    # E||h||^2 = n_t * PL(d_ir); check within Monte-Carlo tolerance
    cfg = ScenarioConfig()
    rng = np.random.default_rng(0)
    norms = [np.sum(np.abs(sample_channel(cfg, rng).h) ** 2)
             for _ in range(400)]
    expected = cfg.n_t * path_loss(cfg.d_ir, cfg)
    assert np.mean(norms) == pytest.approx(expected, rel=0.15)


def test_er_channel_rician_mean_power():
    # each entry of G has variance PL(d_er) regardless of the K-factor split
    cfg = ScenarioConfig(j_ers=1)
    rng = np.random.default_rng(1)
    p = [np.mean(np.abs(sample_channel(cfg, rng).G[0]) ** 2)
         for _ in range(400)]
    assert np.mean(p) == pytest.approx(path_loss(cfg.d_er, cfg), rel=0.15)


@pytest.mark.parametrize("kwargs", [
    dict(n_t=2, n_r=2),          # need n_t > n_r
    dict(n_r=0),
    dict(j_ers=0),
    dict(d_ir=0.0),
    dict(carrier_hz=-1.0),
    dict(r_tol=0.0),
    dict(gamma_req_db=0.0, r_tol=1.0),   # log2(1+1) = 1 is not > r_tol
])
def test_invalid_configs_rejected(kwargs):
    with pytest.raises(ConfigError):
        ScenarioConfig(**kwargs)


def test_channel_realization_validation():
    h = np.ones(4, dtype=complex)
    G = [np.ones((4, 2), dtype=complex)]
    with pytest.raises(ConfigError):
        ChannelRealization(h=h, G=G, sigma_sq=0.0)
    with pytest.raises(ConfigError):
        ChannelRealization(h=h, G=[np.ones((3, 2))], sigma_sq=1e-12)
    with pytest.raises(ConfigError):
        ChannelRealization(h=h, G=[], sigma_sq=1e-12)
    chan = ChannelRealization(h=h, G=G, sigma_sq=1e-12)
    assert chan.n_t == 4 and chan.n_r == 2 and chan.n_ers == 1
