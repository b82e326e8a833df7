"""Baseline scheme: resource allocation designed under the linear EH model.

The baseline maximizes the weighted total received RF power
sum_j eta_j Tr((W+V) G_j G_j^H) over the same feasible set as the proposed
scheme, i.e. it optimizes the linear-model harvested power and ignores the
rectifier's non-linearity. The objective is linear, so a single SDP solve
replaces the whole two-loop procedure; the result is then evaluated under the
non-linear model for comparison. Sharing the feasible set means every
baseline allocation is feasible for the original problem and meets the same
secrecy guarantees.
"""

import numpy as np

from . import sdp
from .inner import (Allocation, InnerProblemData, InfeasibleError,
                    build_constraints, check_feasible, recover_rank_one)
from .metrics import received_powers


def solve_baseline(data: InnerProblemData, opts: sdp.SolverOptions = None,
                   eta=None, check_feasibility: bool = True) -> Allocation:
    """Solve the linear-EH-model allocation for one channel realization.

    eta is the linear conversion efficiency per ER (scalar or length-J array);
    by default it is taken from the per-ER EH parameters. Returns a rank-one
    Allocation (same recovery path as the proposed scheme: minimize Tr(W)
    with the achieved received powers pinned) whose `objective` field holds
    the baseline's own metric sum_j eta_j P_j.
    """
    J = data.channel.n_ers
    if eta is None:
        eta = np.array([p.eta for p in data.eh], dtype=float)
    else:
        eta = np.broadcast_to(np.asarray(eta, dtype=float), (J,)).copy()
    if np.any(eta < 0):
        raise sdp.ValidationError("conversion efficiencies must be >= 0")

    if check_feasibility:
        ok, relief = check_feasible(data, opts)
        if not ok:
            raise InfeasibleError(
                f"baseline problem infeasible: needs uniform constraint "
                f"relief {relief:.3e}", violation=relief)

    prob = build_constraints(data)
    prob.obj_blocks = {}
    prob.obj_scalars = {f"tau{j}": float(eta[j]) for j in range(J)}
    sol = sdp.solve(prob, opts)
    if sol.status == "infeasible":
        raise InfeasibleError("baseline problem infeasible")
    if sol.status != "optimal" and not (sol.pres <= 1e-7 and sol.dres <= 1e-7):
        raise RuntimeError(f"baseline solve ended with status {sol.status!r}")

    relaxed = Allocation(W=sol.primal_blocks["W"], V=sol.primal_blocks["V"])
    # with any eta_j = 0 the corresponding tau_j may sit below the received
    # power (the objective no longer pushes it up); pin the actual powers
    tau = received_powers(relaxed, data.channel)

    alloc = recover_rank_one(data, tau, opts)
    alloc.objective = float(eta @ alloc.tau)
    return alloc
