"""Damped-Newton outer loop on the transform parameters (mu, beta).

The globally optimal allocation is the inner-problem maximizer at the unique
root of the residual system
    phi_j      = beta_j (1 + exp(-a_j (P_j - b_j))) - M_j,      j = 1..J
    phi_{J+j}  = mu_j   (1 + exp(-a_j (P_j - b_j))) - 1,
where P_j are the received powers at the current inner solution. With P held
fixed the system is affine with a positive diagonal Jacobian, so each Newton
step is closed-form; a backtracking line search enforces a norm decrease with
phi re-evaluated at the re-solved inner optimum.
"""

from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .inner import (Allocation, InnerProblemData, recover_rank_one,
                    solve_inner, _EXP_CLAMP)

EPSILON = 0.5       # line-search backoff factor
ETA = 0.1           # sufficient-decrease constant
L_MAX_LS = 30       # line-search trials per step
OUTER_TOL = 1e-8    # on the max-norm of phi
MAX_OUTER = 50


@dataclass
class OuterState:
    mu: np.ndarray
    beta: np.ndarray
    phi: np.ndarray
    iter: int
    p_er: np.ndarray
    converged: bool = False


class StallError(RuntimeError):
    """Line search exhausted without the required norm decrease."""

    def __init__(self, msg, phi_norm):
        super().__init__(msg)
        self.phi_norm = phi_norm


def _denominators(p_er, eh):
    """d_j = 1 + exp(-a_j (P_j - b_j)), the shared factor of both residual
    rows and the diagonal Jacobian; always >= 1."""
    a = np.array([p.a for p in eh])
    b = np.array([p.b for p in eh])
    z = np.clip(a * (np.asarray(p_er, dtype=float) - b), -_EXP_CLAMP, _EXP_CLAMP)
    return 1.0 + np.exp(-z)


def residual(mu, beta, p_er, eh) -> np.ndarray:
    d = _denominators(p_er, eh)
    M = np.array([p.M for p in eh])
    return np.concatenate([beta * d - M, mu * d - 1.0])


def newton_step(state: OuterState, eh, resolve):
    """One damped Newton update.

    `resolve(mu, beta)` must return (p_er, allocation) for the inner problem
    at the trial parameters. Returns (new_state, allocation, zeta); raises
    StallError if no trial step achieves the required decrease.
    """
    d = _denominators(state.p_er, eh)
    q_beta = -state.phi[: len(d)] / d
    q_mu = -state.phi[len(d):] / d
    norm0 = float(np.linalg.norm(state.phi))
    for l in range(L_MAX_LS + 1):
        zeta = EPSILON ** l
        mu_t = state.mu + zeta * q_mu
        beta_t = state.beta + zeta * q_beta
        p_t, alloc_t = resolve(mu_t, beta_t)
        phi_t = residual(mu_t, beta_t, p_t, eh)
        if float(np.linalg.norm(phi_t)) <= (1.0 - ETA * zeta) * norm0:
            new = OuterState(mu=mu_t, beta=beta_t, phi=phi_t,
                             iter=state.iter + 1, p_er=p_t)
            return new, alloc_t, zeta
    raise StallError(f"outer line search stalled at ||phi|| = {norm0:.3e}", norm0)


def initial_parameters(eh):
    """The zero-received-power fixed point: mu_j = Omega_j, beta_j = M_j Omega_j."""
    d0 = _denominators(np.zeros(len(eh)), eh)
    return 1.0 / d0, np.array([p.M for p in eh]) / d0


def run(data: InnerProblemData, opts: sdp.SolverOptions = None,
        outer_tol: float = OUTER_TOL, max_outer: int = MAX_OUTER):
    """Full two-loop solve of one instance.

    Returns (allocation, state, trace): a rank-one Allocation with its dual
    certificate attached, the converged OuterState, and one trace row per
    outer iteration (iter, phi max-norm, step size, inner objective, inner
    conditional-gradient iterations).
    """
    eh = data.eh
    data.mu, data.beta = initial_parameters(eh)

    alloc = solve_inner(data, opts, check_feasibility=True)
    state = OuterState(mu=data.mu, beta=data.beta,
                       phi=residual(data.mu, data.beta, alloc.tau, eh),
                       iter=0, p_er=alloc.tau)
    trace = []

    def resolve(mu, beta):
        data.mu, data.beta = mu, beta
        a = solve_inner(data, opts, warm=alloc, check_feasibility=False)
        return a.tau, a

    zeta = np.nan   # each row records the step that produced its state
    for _ in range(max_outer + 1):
        trace.append({"iter": state.iter,
                      "phi_norm": float(np.max(np.abs(state.phi))),
                      "zeta": zeta,
                      "objective": alloc.objective,
                      "fw_iters": alloc.fw_iters})
        if float(np.max(np.abs(state.phi))) <= outer_tol:
            state.converged = True
            break
        if state.iter >= max_outer:
            break
        state, alloc, zeta = newton_step(state, eh, resolve)

    data.mu, data.beta = state.mu, state.beta
    final = recover_rank_one(data, alloc.tau, opts)
    final.fw_gap, final.fw_iters = alloc.fw_gap, alloc.fw_iters
    return final, state, trace
