"""Random channel generation: Rician fading with free-space path loss.

Conventions: the base station has n_t antennas, the information receiver (IR)
is single-antenna at distance d_ir, and each of the j_ers energy receivers
(ERs) has n_r antennas at distance d_er. All powers in watts; dB/dBm only in
the config fields.
"""

from dataclasses import dataclass, field

import numpy as np

from .eh import EhParams

SPEED_OF_LIGHT = 299792458.0


def db_to_lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x: float) -> float:
    return 10.0 * np.log10(x)


def dbm_to_watt(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watt_to_dbm(x_w: float) -> float:
    return 10.0 * np.log10(x_w) + 30.0


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass
class ScenarioConfig:
    """Scenario parameters; defaults follow the simulated urban IoT setup."""

    n_t: int = 4
    n_r: int = 2
    j_ers: int = 3
    d_ir: float = 50.0           # m
    d_er: float = 10.0           # m
    rician_k_db: float = 3.0     # dB
    carrier_hz: float = 915e6
    antenna_gain_db: float = 10.0  # dBi, applied at both ends
    noise_dbm: float = -95.0
    p_max_dbm: float = 36.0
    gamma_req_db: float = 10.0
    r_tol: float = 1.0           # bit/s/Hz cap on each ER's eavesdropping rate
    eh: EhParams = field(default_factory=lambda: EhParams(M=0.02, a=6400.0, b=0.003))
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_t <= self.n_r or self.n_r < 1:
            raise ConfigError(f"need n_t > n_r >= 1, got n_t={self.n_t}, n_r={self.n_r}")
        if self.j_ers < 1:
            raise ConfigError(f"need at least one ER, got j_ers={self.j_ers}")
        if self.d_ir <= 0 or self.d_er <= 0:
            raise ConfigError("distances must be positive")
        if self.carrier_hz <= 0:
            raise ConfigError("carrier frequency must be positive")
        if self.r_tol <= 0:
            raise ConfigError("r_tol must be positive")
        if np.log2(1.0 + self.gamma_req) <= self.r_tol:
            raise ConfigError(
                f"secrecy requires log2(1+gamma_req) > r_tol; got "
                f"gamma_req={self.gamma_req_db} dB, r_tol={self.r_tol}")

    @property
    def gamma_req(self) -> float:
        return db_to_lin(self.gamma_req_db)

    @property
    def p_max(self) -> float:
        return dbm_to_watt(self.p_max_dbm)

    @property
    def sigma_sq(self) -> float:
        return dbm_to_watt(self.noise_dbm)

    @property
    def alpha_er(self) -> float:
        return 2.0 ** self.r_tol - 1.0


@dataclass
class ChannelRealization:
    """One draw of the BS->IR vector h and the BS->ER matrices G[j]."""

    h: np.ndarray                 # (n_t,) complex
    G: list                       # J matrices, each (n_t, n_r) complex
    sigma_sq: float

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=complex)
        self.G = [np.asarray(g, dtype=complex) for g in self.G]
        if not np.all(np.isfinite(self.h)):
            raise ConfigError("non-finite IR channel")
        if self.sigma_sq <= 0:
            raise ConfigError("noise power must be positive")
        if len(self.G) < 1:
            raise ConfigError("need at least one ER channel")
        n_t = self.h.shape[0]
        for g in self.G:
            if g.shape[0] != n_t or not np.all(np.isfinite(g)):
                raise ConfigError("bad ER channel matrix")
            if g.shape[0] <= g.shape[1]:
                raise ConfigError("need n_t > n_r")

    @property
    def n_t(self) -> int:
        return self.h.shape[0]

    @property
    def n_r(self) -> int:
        return self.G[0].shape[1]

    @property
    def n_ers(self) -> int:
        return len(self.G)


def path_loss(distance: float, config: ScenarioConfig) -> float:
    """Free-space (Friis) power gain at the carrier frequency.

    Includes the transmit and receive antenna gains; returns a linear gain.
    """
    if distance <= 0:
        raise ConfigError("distance must be positive")
    lam = SPEED_OF_LIGHT / config.carrier_hz
    gains = db_to_lin(2.0 * config.antenna_gain_db)
    return (lam / (4.0 * np.pi * distance)) ** 2 * gains


def _los_matrix(n_t: int, n_r: int, angle: float) -> np.ndarray:
    """Deterministic rank-one line-of-sight component: outer product of
    unit-modulus steering vectors with linear phase progression."""
    a_t = np.exp(1j * np.pi * np.arange(n_t) * np.sin(angle))
    a_r = np.exp(1j * np.pi * np.arange(n_r) * np.sin(angle))
    return np.outer(a_t, a_r.conj())


def sample_channel(config: ScenarioConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw one channel realization.

    h is i.i.d. CSCG (Rayleigh) scaled by the IR path loss. Each G[j] is
    Rician: sqrt(PL) * (sqrt(K/(K+1)) * LOS + sqrt(1/(K+1)) * scatter) with
    unit-variance CSCG scatter entries and a per-ER LOS departure angle.
    """
    config.validate()
    n_t, n_r, J = config.n_t, config.n_r, config.j_ers

    pl_ir = path_loss(config.d_ir, config)
    h = np.sqrt(pl_ir / 2.0) * (rng.standard_normal(n_t) + 1j * rng.standard_normal(n_t))

    k_lin = db_to_lin(config.rician_k_db)
    pl_er = path_loss(config.d_er, config)
    # ER LOS angles spread over a sector, fixed given J
    angles = np.linspace(-np.pi / 3.0, np.pi / 3.0, J) if J > 1 else np.array([0.0])
    G = []
    for j in range(J):
        scatter = (rng.standard_normal((n_t, n_r))
                   + 1j * rng.standard_normal((n_t, n_r))) / np.sqrt(2.0)
        los = _los_matrix(n_t, n_r, angles[j])
        gj = np.sqrt(pl_er) * (np.sqrt(k_lin / (k_lin + 1.0)) * los
                               + np.sqrt(1.0 / (k_lin + 1.0)) * scatter)
        G.append(gj)

    return ChannelRealization(h=h, G=G, sigma_sq=config.sigma_sq)
