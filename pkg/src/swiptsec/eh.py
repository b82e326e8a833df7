"""Linear and non-linear energy-harvesting transfer functions.

All powers are in watts. The non-linear model is a rectifier sigmoid with
saturation level M, steepness a, and turn-on threshold b; the linear model
is a constant conversion efficiency eta.
"""

from dataclasses import dataclass

import numpy as np

# exp argument clamp: keeps evaluation finite for steepness up to a ~ 1e4
# and input powers up to ~1e6 W
_EXP_CLAMP = 700.0


@dataclass(frozen=True)
class EhParams:
    """Per-receiver energy-harvesting circuit constants.

    M : saturation (maximum harvestable) power [W]
    a : steepness of the rectifier transfer curve [1/W]
    b : turn-on threshold [W]
    eta : conversion efficiency of the linear model, in [0, 1]
    """

    M: float
    a: float
    b: float
    eta: float = 0.8

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError(f"saturation power M must be > 0, got {self.M}")
        if not self.a > 0:
            raise ValueError(f"steepness a must be > 0, got {self.a}")
        if self.b < 0:
            raise ValueError(f"turn-on threshold b must be >= 0, got {self.b}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"efficiency eta must be in [0, 1], got {self.eta}")


def _sigmoid(z):
    """Numerically stable logistic function, elementwise."""
    z = np.clip(z, -_EXP_CLAMP, _EXP_CLAMP)
    out = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                   np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    return out


def omega(params: EhParams):
    """Zero-input offset of the rectifier sigmoid, in (0, 1/2]."""
    return float(_sigmoid(np.asarray(-params.a * params.b)))


def psi(p_rf, params: EhParams):
    """Rectifier sigmoid output M / (1 + exp(-a (p - b))) for received RF power p."""
    p_rf = np.asarray(p_rf, dtype=float)
    out = params.M * _sigmoid(params.a * (p_rf - params.b))
    return float(out) if out.ndim == 0 else out


def phi_nonlinear(p_rf, params: EhParams):
    """Harvested power under the non-linear model; 0 at zero input, saturates at M."""
    om = omega(params)
    out = (psi(p_rf, params) - params.M * om) / (1.0 - om)
    return out


def phi_linear(p_rf, params: EhParams):
    """Harvested power under the linear model: eta * p_rf."""
    p_rf = np.asarray(p_rf, dtype=float)
    out = params.eta * p_rf
    return float(out) if out.ndim == 0 else out


def psi_derivative(p_rf, params: EhParams):
    """Derivative of psi with respect to the received RF power; strictly positive."""
    p_rf = np.asarray(p_rf, dtype=float)
    s = _sigmoid(params.a * (p_rf - params.b))
    out = params.M * params.a * s * (1.0 - s)
    return float(out) if out.ndim == 0 else out
