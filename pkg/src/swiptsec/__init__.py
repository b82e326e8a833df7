"""Secure SWIPT beamforming with a non-linear energy-harvesting model.

Globally optimal transmit-covariance design for a multi-antenna base
station serving one information receiver while wirelessly powering multiple
energy receivers that are treated as potential eavesdroppers. The harvested
power is modelled by a saturating rectifier sigmoid; the design problem is a
sum-of-sigmoids maximization solved to global optimality by a parametric
subtractive transform (outer damped-Newton loop) around an SDP-relaxed inner
problem (conditional-gradient over an interior-point SDP solver), with a
provably rank-one beamformer recovered at the end.
"""

from .baseline import solve_baseline
from .channel import (ChannelRealization, ConfigError, ScenarioConfig,
                      db_to_lin, dbm_to_watt, lin_to_db, path_loss,
                      sample_channel, watt_to_dbm)
from .eh import EhParams, omega, phi_linear, phi_nonlinear, psi, psi_derivative
from .inner import (Allocation, InfeasibleError, InnerProblemData, KktReport,
                    check_feasible, check_kkt, recover_rank_one, solve_inner)
from .metrics import (er_rate, harvested_report, ir_rate, max_er_rate,
                      received_powers, secrecy_rate)
from .outer import OuterState, StallError, initial_parameters, residual, run

__version__ = "0.1.0"

__all__ = [
    "Allocation", "ChannelRealization", "ConfigError", "EhParams",
    "InfeasibleError", "InnerProblemData", "KktReport", "OuterState",
    "ScenarioConfig", "StallError", "check_feasible", "check_kkt",
    "db_to_lin", "dbm_to_watt", "er_rate", "harvested_report",
    "initial_parameters", "ir_rate", "lin_to_db", "max_er_rate", "omega",
    "path_loss", "phi_linear", "phi_nonlinear", "psi", "psi_derivative",
    "received_powers", "recover_rank_one", "residual", "run",
    "sample_channel", "secrecy_rate", "solve_baseline", "solve_inner",
    "watt_to_dbm",
]
