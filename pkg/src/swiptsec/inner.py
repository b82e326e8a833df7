"""Inner-loop solver for fixed transform parameters (mu, beta).

Maximizes the concave subtractive surrogate
    f(tau) = sum_j mu_j * (M_j - beta_j * (1 + exp(-a_j (tau_j - b_j))))
over the SDP-relaxed feasible set in (W, V, tau) by conditional gradient
(Frank-Wolfe): each iteration solves a *linear* SDP for the gradient
direction and takes an exact line-search step. Afterwards a rank-one W is
reconstructed by minimizing Tr(W) at the achieved received powers; the dual
certificate of that auxiliary solve feeds the KKT residual report.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, eigh, solve_triangular

from . import sdp
from .channel import ChannelRealization, ScenarioConfig
from .eh import EhParams, psi
from .metrics import received_powers

TOL_FW = 1e-7       # absolute Frank-Wolfe gap tolerance (watt scale)
RANK_TOL = 1e-6     # lambda_2 / lambda_1 bound for accepting rank-one W
KKT_TOL = 1e-6
MAX_FW_ITERS = 60
_EXP_CLAMP = 700.0


class InfeasibleError(RuntimeError):
    """No (W, V) satisfies the power, SINR, and leakage constraints."""

    def __init__(self, msg, violation=None):
        super().__init__(msg)
        self.violation = violation


@dataclass
class InnerProblemData:
    """Everything the inner problem needs for one channel realization."""

    channel: ChannelRealization
    eh: list                      # EhParams per ER
    p_max: float
    gamma_req: float
    alpha_er: float               # 2^r_tol - 1
    mu: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        J = self.channel.n_ers
        self.mu = np.asarray(self.mu, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if len(self.eh) != J:
            raise sdp.ValidationError(f"need {J} EH parameter sets, got {len(self.eh)}")
        if self.mu.shape != (J,) or self.beta.shape != (J,):
            raise sdp.ValidationError("mu and beta must have one entry per ER")
        if self.gamma_req <= 0 or self.alpha_er <= 0 or self.p_max <= 0:
            raise sdp.ValidationError("gamma_req, alpha_er, p_max must be positive")

    @classmethod
    def from_config(cls, config: ScenarioConfig, channel: ChannelRealization,
                    mu=None, beta=None):
        J = channel.n_ers
        return cls(channel=channel, eh=[config.eh] * J, p_max=config.p_max,
                   gamma_req=config.gamma_req, alpha_er=config.alpha_er,
                   mu=np.zeros(J) if mu is None else mu,
                   beta=np.zeros(J) if beta is None else beta)


@dataclass
class Allocation:
    """A (relaxed or rank-one) transmit strategy with its received powers."""

    W: np.ndarray
    V: np.ndarray
    w: np.ndarray = None          # extracted beamformer, rank-one solutions only
    tau: np.ndarray = None        # per-ER received RF power
    objective: float = np.nan     # inner surrogate value f(tau)
    fw_gap: float = np.nan
    fw_iters: int = 0
    rank_ratio: float = np.nan
    status: str = "ok"
    solution: sdp.SdpSolution = field(default=None, repr=False)


def _surrogate(tau, data):
    """f(tau); the constant sum mu_j M_j is kept so the value is reportable."""
    z = np.array([p.a for p in data.eh]) * (tau - np.array([p.b for p in data.eh]))
    e = np.exp(-np.clip(z, -_EXP_CLAMP, _EXP_CLAMP))
    M = np.array([p.M for p in data.eh])
    return float(np.sum(data.mu * (M - data.beta * (1.0 + e))))


def _gradient(tau, data):
    """df/dtau_j = mu_j beta_j a_j exp(-a_j (tau_j - b_j)) >= 0."""
    a = np.array([p.a for p in data.eh])
    b = np.array([p.b for p in data.eh])
    z = np.clip(a * (tau - b), -_EXP_CLAMP, _EXP_CLAMP)
    return data.mu * data.beta * a * np.exp(-z)


def build_constraints(data: InnerProblemData, w_scale: float = 1.0) -> sdp.SdpProblem:
    """SDP template shared by all conditional-gradient iterations.

    C1: Tr(W+V) <= p_max.
    C2: Tr(W H)/gamma_req - Tr(V H) >= sigma^2 (IR SINR target).
    C3_j: alpha_er (G_j^H V G_j + sigma^2 I) - G_j^H W G_j >= 0 (leakage LMI).
    C5_j: Tr((W+V) G_j G_j^H) - tau_j >= 0, tau_j >= 0.
    The objective is installed per-iteration via sdp.set_objective.

    w_scale substitutes W = w_scale * W' and poses the problem in W'; callers
    use it when the optimal W is orders of magnitude smaller than V, where
    the unit-scale problem cannot resolve W's structure.
    """
    chan = data.channel
    nt = chan.n_t
    H = np.outer(chan.h, chan.h.conj())
    cons = [
        sdp.LinearConstraint("C1", "<=", data.p_max,
                             {"W": w_scale * np.eye(nt), "V": np.eye(nt)}),
        sdp.LinearConstraint("C2", ">=", chan.sigma_sq,
                             {"W": w_scale * H / data.gamma_req, "V": -H}),
    ]
    scalars, lmis = [], []
    for j, G in enumerate(chan.G):
        GG = G @ G.conj().T
        scalars.append((f"tau{j}", False))
        cons.append(sdp.LinearConstraint(f"C5_{j}", ">=", 0.0,
                                         {"W": w_scale * GG, "V": GG},
                                         {f"tau{j}": -1.0}))
        lmis.append(sdp.LmiConstraint(
            f"C3_{j}", chan.n_r, data.alpha_er * chan.sigma_sq * np.eye(chan.n_r),
            [sdp.LmiTerm("V", G, data.alpha_er), sdp.LmiTerm("W", G, -w_scale)]))
    return sdp.SdpProblem(blocks=[("W", nt), ("V", nt)], scalars=scalars,
                          sense="max", constraints=cons, lmis=lmis)


def check_feasible(data: InnerProblemData, opts=None):
    """Phase-1 solve: minimize the uniform constraint relief t >= 0.

    Returns the optimal relief; the instance is feasible iff it is ~0.
    """
    chan = data.channel
    nt = chan.n_t
    H = np.outer(chan.h, chan.h.conj())
    cons = [
        sdp.LinearConstraint("C1", "<=", data.p_max,
                             {"W": np.eye(nt), "V": np.eye(nt)},
                             {"t": -data.p_max}),
        sdp.LinearConstraint("C2", ">=", chan.sigma_sq,
                             {"W": H / data.gamma_req, "V": -H},
                             {"t": chan.sigma_sq}),
    ]
    lmis = []
    for j, G in enumerate(chan.G):
        lmis.append(sdp.LmiConstraint(
            f"C3_{j}", chan.n_r, data.alpha_er * chan.sigma_sq * np.eye(chan.n_r),
            [sdp.LmiTerm("V", G, data.alpha_er), sdp.LmiTerm("W", G, -1.0)],
            [("t", data.alpha_er * chan.sigma_sq * np.eye(chan.n_r))]))
    prob = sdp.SdpProblem(blocks=[("W", nt), ("V", nt)], scalars=[("t", False)],
                          sense="min", obj_scalars={"t": 1.0},
                          constraints=cons, lmis=lmis)
    sol = sdp.solve(prob, opts)
    relief = sol.primal_scalars.get("t", np.inf)
    if not np.isfinite(relief) or relief > 1e-6:
        return False, relief

    # The SINR row's sigma^2 scale can sit below the solver's per-row
    # resolution, letting t collapse to zero on instances that are wildly
    # infeasible in *relative* terms; re-verify the returned point directly.
    W, V = sol.primal_blocks["W"], sol.primal_blocks["V"]
    rel = (float(np.real(np.trace(W + V))) - data.p_max) / data.p_max
    lhs = float(np.real(np.trace(W @ H))) / data.gamma_req
    rhs = float(np.real(chan.h.conj() @ V @ chan.h)) + chan.sigma_sq
    rel = max(rel, (rhs - lhs) / max(chan.sigma_sq, abs(lhs), abs(rhs)))
    for G in chan.G:
        S = data.alpha_er * (G.conj().T @ V @ G
                             + chan.sigma_sq * np.eye(chan.n_r)) \
            - G.conj().T @ W @ G
        lo = float(np.linalg.eigvalsh(0.5 * (S + S.conj().T))[0])
        scale = max(chan.sigma_sq, float(np.linalg.norm(S)))
        rel = max(rel, -lo / scale)
    if rel > 1e-6:
        return False, max(relief, rel)
    return True, relief


def _line_search(tau, delta, data):
    """Exact 1-D maximization of the concave surrogate along tau + theta delta
    for theta in [0, 1], by bisection on the directional derivative."""
    def dg(theta):
        return float(_gradient(tau + theta * delta, data) @ delta)

    if dg(1.0) >= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if dg(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_inner(data: InnerProblemData, opts: sdp.SolverOptions = None,
                warm: Allocation = None, check_feasibility: bool = True,
                tol_fw: float = TOL_FW, max_iters: int = MAX_FW_ITERS) -> Allocation:
    """Conditional-gradient maximization of the inner surrogate.

    Returns a relaxed Allocation (W possibly rank > 1) whose tau equals the
    achieved received powers; pass `warm` to start from a previous solution of
    the same channel (constraint set is identical, only (mu, beta) moved).
    """
    if check_feasibility:
        ok, relief = check_feasible(data, opts)
        if not ok:
            raise InfeasibleError(
                f"inner problem infeasible: needs uniform constraint relief {relief:.3e}",
                violation=relief)

    prob = build_constraints(data)
    cp = sdp.compile_problem(prob)
    J = data.channel.n_ers

    def lp_solve(c):
        sdp.set_objective(cp, obj_blocks={}, obj_scalars={f"tau{j}": c[j] for j in range(J)},
                          sense="max")
        sol = sdp.solve(prob, opts, compiled=cp)
        if sol.status == "infeasible":
            raise InfeasibleError("inner problem infeasible (direction solve)")
        if sol.status not in ("optimal",):
            raise RuntimeError(f"direction solve ended with status {sol.status!r}")
        tau_v = np.array([sol.primal_scalars[f"tau{j}"] for j in range(J)])
        return sol.primal_blocks["W"], sol.primal_blocks["V"], tau_v

    if warm is not None and warm.tau is not None:
        W, V, tau = warm.W, warm.V, np.asarray(warm.tau, dtype=float)
    else:
        c0 = _gradient(np.zeros(J), data)
        W, V, tau = lp_solve(c0)

    gap = np.inf
    iters = 0
    for iters in range(1, max_iters + 1):
        c = _gradient(tau, data)
        if not np.any(c > 0.0):
            gap = 0.0
            break
        Wv, Vv, tau_v = lp_solve(c)
        gap = float(c @ (tau_v - tau))
        if gap <= tol_fw:
            break
        theta = _line_search(tau, tau_v - tau, data)
        W = (1.0 - theta) * W + theta * Wv
        V = (1.0 - theta) * V + theta * Vv
        tau = (1.0 - theta) * tau + theta * tau_v

    alloc = Allocation(W=W, V=V, tau=tau, fw_gap=gap, fw_iters=iters)
    # C5 is tight at the optimum (the objective is increasing in tau); report
    # the powers actually received, which can only raise the objective.
    alloc.tau = np.maximum(tau, received_powers(alloc, data.channel))
    alloc.objective = _surrogate(alloc.tau, data)
    return alloc


def _clip_psd(M):
    lam, U = eigh(0.5 * (M + M.conj().T))
    return (U * np.clip(lam, 0.0, None)) @ U.conj().T


def _extract_beamformer(W):
    """Principal eigenpair of W with a deterministic global phase."""
    lam, U = eigh(W)
    ratio = float(max(lam[-2], 0.0) / lam[-1]) if lam[-1] > 0 else np.inf
    w = np.sqrt(max(lam[-1], 0.0)) * U[:, -1]
    k = int(np.argmax(np.abs(w)))
    if np.abs(w[k]) > 0:
        w = w * (np.conj(w[k]) / np.abs(w[k]))
    return w, ratio


def refine_beam_matrix(data: InnerProblemData, V, floors,
                       opts: sdp.SolverOptions = None):
    """Re-solve min Tr(W) with the AN covariance held at V.

    floors is a list of (F_k, r_k) pairs demanding Tr(W F_k) >= r_k, with the
    AN contribution already subtracted. When the AN can serve all power
    floors on its own, the minimal-trace W carries just enough signal for the
    SINR target; that W is orders of magnitude smaller than V (its trace is
    near gamma_req sigma^2 / ||h||^2), so its structure sits below the
    feasibility resolution of the joint solve and must be recomputed at its
    own scale.
    """
    chan = data.channel
    nt = chan.n_t
    h = chan.h
    hn2 = float(np.real(h.conj() @ h))
    H = np.outer(h, h.conj())
    s_req = data.gamma_req * (chan.sigma_sq + float(np.real(h.conj() @ V @ h)))
    p_left = data.p_max - float(np.real(np.trace(V)))
    B = [data.alpha_er * (G.conj().T @ V @ G + chan.sigma_sq * np.eye(chan.n_r))
         for G in chan.G]

    r_scale = max([abs(r) for _, r in floors] + [s_req])
    active = [(F, r) for F, r in floors if r > 1e-9 * r_scale]

    def verify(W):
        tol = 1e-7
        if np.real(np.trace(W)) > p_left * (1 + tol) + 1e-15:
            return False
        if np.real(np.trace(W @ H)) < s_req * (1 - tol):
            return False
        for (F, r) in floors:
            if np.real(np.trace(W @ F)) < r - tol * r_scale:
                return False
        for G, Bj in zip(chan.G, B):
            S = Bj - G.conj().T @ W @ G
            lo = eigh(0.5 * (S + S.conj().T), eigvals_only=True,
                      subset_by_index=(0, 0))[0]
            if lo < -1e-7 * max(np.trace(Bj).real, chan.sigma_sq):
                return False
        return True

    if not active:
        # only the SINR row can bind: minimal-trace W points straight at the IR
        W = (s_req / hn2 ** 2) * H
        if verify(W):
            return W
        # leakage-aware beam: when the straight-at-the-IR beam exceeds a
        # leakage cap, the optimal direction maximizes |h^H u|^2 per unit of
        # combined cap/budget usage. For rank-one W = p u u^H the cap
        # alpha Q_j >= p (G_j^H u)(G_j^H u)^H is exactly p u^H M_j u <= 1
        # with M_j = G_j (alpha Q_j)^{-1} G_j^H, so the best direction is the
        # top generalized eigenvector of (h h^H, sum_j M_j + I/p_left),
        # i.e. u proportional to (sum_j M_j + I/p_left)^{-1} h
        M = np.eye(nt) / max(p_left, 1e-30)
        for G, Bj in zip(chan.G, B):
            Q = 0.5 * (Bj + Bj.conj().T)
            M = M + G @ np.linalg.solve(Q, G.conj().T)
        M = 0.5 * (M + M.conj().T)
        u = np.linalg.solve(M, h)
        gain = float(np.abs(h.conj() @ u) ** 2) / float(np.real(u.conj() @ u))
        if gain > 0:
            u = u / np.linalg.norm(u)
            W = (s_req / gain) * np.outer(u, u.conj())
            if verify(W):
                return W

    # general case: scale W to its expected order and solve the W-only SDP
    theta = s_req / hn2
    for F, r in active:
        theta = max(theta, r / float(np.linalg.eigvalsh(F)[-1]))
    theta = max(theta, 1e-30)
    cons = [
        sdp.LinearConstraint("C1", "<=", p_left / theta, {"W": np.eye(nt)}),
        sdp.LinearConstraint("C2", ">=", s_req / theta, {"W": H}),
    ]
    for k, (F, r) in enumerate(floors):
        cons.append(sdp.LinearConstraint(f"C5_{k}", ">=", r / theta, {"W": F}))
    lmis = [sdp.LmiConstraint(f"C3_{j}", chan.n_r, Bj / theta,
                              [sdp.LmiTerm("W", G, -1.0)])
            for j, (G, Bj) in enumerate(zip(chan.G, B))]
    prob = sdp.SdpProblem(blocks=[("W", nt)], sense="min",
                          obj_blocks={"W": np.eye(nt)}, constraints=cons, lmis=lmis)
    sol = sdp.solve(prob, opts)
    if sol.status == "infeasible":
        raise InfeasibleError("beamformer refinement infeasible at the given floors")
    if sol.status != "optimal" and not (sol.pres <= 1e-7 and sol.dres <= 1e-7):
        raise RuntimeError(f"beamformer refinement ended with status {sol.status!r}")
    return theta * sol.primal_blocks["W"]


def _polish_power(w, V, data: InnerProblemData):
    """Snap the beamformer power onto the feasible interval for the SINR
    target, the leakage caps, and the power budget, holding its direction
    fixed; returns the polished (w, V) pair.

    The interior-point output satisfies the constraint families only to its
    convergence tolerance, which the ill-conditioned leakage quadratic forms
    can amplify. At an optimum where SINR, leakage, and budget are all tight,
    that error can leave no exactly feasible beam power for the returned AN
    covariance; in that case the AN component seen by the IR is shaved (by
    bisection on a one-sided shrink along the IR channel) just enough to
    reopen the interval, then the power is set on the SINR floor. All
    adjustments are O(solver tolerance) and leave the objective unchanged to
    far below every reported tolerance.
    """
    chan = data.channel
    h = chan.h
    p_w = float(np.real(w.conj() @ w))
    if p_w <= 0:
        return w, V
    u = w / np.sqrt(p_w)
    sig = float(np.abs(h.conj() @ u) ** 2)
    if sig <= 0:
        return w, V
    hn = h / np.linalg.norm(h)

    def interval(Vc):
        p_min = data.gamma_req * (float(np.real(h.conj() @ Vc @ h))
                                  + chan.sigma_sq) / sig
        p_cap = data.p_max - float(np.real(np.trace(Vc)))
        for G in chan.G:
            Q = G.conj().T @ Vc @ G + chan.sigma_sq * np.eye(chan.n_r)
            L = cholesky(0.5 * (Q + Q.conj().T), lower=True)
            x = solve_triangular(L, G.conj().T @ u, lower=True)
            q = float(np.real(x.conj() @ x))
            if q > 0:
                p_cap = min(p_cap, data.alpha_er / q)
        return p_min, p_cap

    def shaved(delta):
        C = np.eye(chan.n_t) - delta * np.outer(hn, hn.conj())
        Vc = C @ V @ C.conj().T
        return 0.5 * (Vc + Vc.conj().T)

    p_min, p_cap = interval(V)
    if p_min > p_cap:
        hi = 1e-8
        while hi < 1.0:
            pm, pc = interval(shaved(hi))
            if pm <= pc:
                break
            hi = min(hi * 4.0, 1.0)
        if hi < 1.0 or interval(shaved(hi))[0] <= interval(shaved(hi))[1]:
            lo = 0.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                pm, pc = interval(shaved(mid))
                if pm <= pc:
                    hi = mid
                else:
                    lo = mid
            V = shaved(hi)
            p_min, p_cap = interval(V)
            p = p_min
        else:
            # could not reopen the interval; split the violation evenly
            p = np.sqrt(p_min * p_cap)
    else:
        p = min(max(p_w, p_min), p_cap)
    return np.sqrt(p) * u, V


def _primal_violation(alloc: Allocation, data: InnerProblemData) -> float:
    """Worst relative violation of the budget, SINR, and leakage constraints.

    The received powers are free variables of the design problem, so no
    power floor enters. The leakage caps are evaluated in the whitened
    metric (p ||Q^{-1/2} G^H u||^2 <= alpha for a rank-one beam), which
    stays exact in the sigma^2-scale eigendirections of Q where an
    eigenvalue-slack test normalized by ||Q|| would be blind.
    """
    chan = data.channel
    W, V = alloc.W, alloc.V
    out = [(float(np.real(np.trace(W + V))) - data.p_max) / data.p_max]
    sig = float(np.real(chan.h.conj() @ W @ chan.h))
    need = data.gamma_req * (float(np.real(chan.h.conj() @ V @ chan.h))
                             + chan.sigma_sq)
    out.append((need - sig) / max(abs(sig), abs(need),
                                  data.gamma_req * chan.sigma_sq))
    for G in chan.G:
        Q = data.alpha_er * (G.conj().T @ V @ G
                             + chan.sigma_sq * np.eye(chan.n_r))
        Q = 0.5 * (Q + Q.conj().T)
        if alloc.w is not None:
            try:
                L = cholesky(Q, lower=True)
                x = solve_triangular(L, G.conj().T @ alloc.w, lower=True)
                out.append(float(np.real(x.conj() @ x)) - 1.0)
                continue
            except np.linalg.LinAlgError:
                pass
        S = Q - G.conj().T @ W @ G
        lo = eigh(0.5 * (S + S.conj().T), eigvals_only=True,
                  subset_by_index=(0, 0))[0]
        out.append(-lo / max(float(np.real(np.trace(Q))), chan.sigma_sq))
    return max(out)


FEAS_TOL = 1e-7


def recover_rank_one(data: InnerProblemData, tau_star,
                     opts: sdp.SolverOptions = None,
                     backoff: float = 1e-9) -> Allocation:
    """Minimize Tr(W) with the received powers pinned at tau_star.

    The minimizer is provably rank one; its principal eigenpair gives the
    beamformer. A rank ratio above RANK_TOL is reported in the returned
    status, never silently truncated away.

    tau_star is relaxed by the tiny relative `backoff` so the feasible set
    keeps an interior when the powers sit exactly on the boundary of what the
    power budget allows; the effect on the harvested powers is far below
    every reported tolerance. When the interior-point solve stalls or its
    dual certificate is sloppy at the requested backoff (the feasible set can
    degenerate to nearly a single point), the backoff is escalated by decades
    up to 1e-2 and the cleanest attempt is returned; the optimality report is
    recomputed at every rung, so a coarse rung is only ever adopted when the
    received powers sit on a flat stretch of the harvesting curves where the
    relaxation of tau_star does not move the objective.
    """
    best = None
    last_err = None
    for bo in sorted({backoff, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 3e-3,
                      1e-2}):
        if bo < backoff:
            continue
        try:
            alloc = _recover_at(data,
                                np.asarray(tau_star, dtype=float) * (1.0 - bo),
                                opts)
        except RuntimeError as err:
            # a feasible inner solution stays feasible under backoff, so a
            # failure here is a numerical stall: try the next rung
            last_err = err
            continue
        try:
            kkt = check_kkt(alloc, data)
            feas = _primal_violation(alloc, data)
            clean = (alloc.solution.status == "optimal"
                     and alloc.rank_ratio <= RANK_TOL and kkt.passed()
                     and feas <= FEAS_TOL)
            score = max(kkt.comp_w, kkt.comp_v, kkt.stationarity_w,
                        kkt.stationarity_v, feas)
        except Exception:
            clean, score = False, np.inf
        if clean:
            return alloc
        if best is None or score < best[0]:
            best = (score, alloc)
    if best is None:
        raise last_err
    return best[1]


def _recover_at(data: InnerProblemData, tau_star,
                opts: sdp.SolverOptions = None) -> Allocation:
    """One trace-minimization attempt at a fixed (already backed-off) tau."""
    chan = data.channel

    def solve_pinned(w_scale):
        # pin tau: C5_j becomes Tr((W+V) G_j G_j^H) >= tau_star_j, no scalar
        prob = build_constraints(data, w_scale=w_scale)
        prob.scalars = []
        prob.sense = "min"
        prob.obj_blocks = {"W": w_scale * np.eye(chan.n_t)}
        prob.obj_scalars = {}
        for con in prob.constraints:
            if con.name.startswith("C5_"):
                j = int(con.name[3:])
                con.scalar_coeffs = {}
                con.rhs = float(tau_star[j])
        sol = sdp.solve(prob, opts)
        if w_scale != 1.0 and "W" in sol.primal_blocks:
            # undo the substitution W = w_scale * W' in primal and dual slack
            sol.primal_blocks["W"] = w_scale * sol.primal_blocks["W"]
            if "W" in sol.dual_matrices:
                sol.dual_matrices["W"] = sol.dual_matrices["W"] / w_scale
        return sol

    sol = solve_pinned(1.0)
    if sol.status == "infeasible":
        raise InfeasibleError("rank-one recovery infeasible at the given tau")
    if sol.status != "optimal" and not (sol.pres <= 1e-8 and sol.dres <= 1e-8):
        raise RuntimeError(f"rank-one recovery ended with status {sol.status!r}")

    W, V = sol.primal_blocks["W"], sol.primal_blocks["V"]
    _, ratio = _extract_beamformer(W)
    if (sol.status != "optimal" or ratio > RANK_TOL
            or np.real(np.trace(W)) < 1e-6 * np.real(np.trace(W + V))):
        # the AN covariance is well resolved, but the signal matrix can be
        # orders of magnitude smaller than V; recompute it at its own scale
        V0 = _clip_psd(V)
        fixed = False
        if np.real(np.trace(W)) < 1e-3 * np.real(np.trace(W + V)):
            # AN-only service: if the AN projected off the IR direction still
            # covers every power floor, the minimal-trace W is the closed
            # form aiming straight at the IR with zero AN interference
            hn = chan.h / np.linalg.norm(chan.h)
            hn2 = float(np.real(chan.h.conj() @ chan.h))
            P = np.eye(chan.n_t) - np.outer(hn, hn.conj())
            Vp = P @ V0 @ P.conj().T
            Vp = 0.5 * (Vp + Vp.conj().T)
            p0 = data.gamma_req * chan.sigma_sq / hn2
            covered = all(
                float(tau_star[j]) <= float(np.real(np.trace(G.conj().T @ Vp @ G)))
                for j, G in enumerate(chan.G))
            if covered and p0 + float(np.real(np.trace(Vp))) <= data.p_max:
                caps_ok = True
                for G in chan.G:
                    Q = G.conj().T @ Vp @ G + chan.sigma_sq * np.eye(chan.n_r)
                    L = cholesky(0.5 * (Q + Q.conj().T), lower=True)
                    x = solve_triangular(L, G.conj().T @ hn, lower=True)
                    if p0 * float(np.real(x.conj() @ x)) > data.alpha_er:
                        caps_ok = False
                        break
                if caps_ok:
                    V = Vp
                    W = p0 * np.outer(hn, hn.conj())
                    fixed = True
        if not fixed:
            def floors_at(Vc):
                return [(G @ G.conj().T,
                         float(tau_star[j])
                         - float(np.real(np.trace(G.conj().T @ Vc @ G))))
                        for j, G in enumerate(chan.G)]
            try:
                W = refine_beam_matrix(data, V0, floors_at(V0), opts)
                V = V0
            except InfeasibleError:
                # a spurious IR-channel component in the joint AN covariance
                # both inflates the SINR floor and exhausts the leakage caps;
                # retry with the AN projected off the IR direction
                hn = chan.h / np.linalg.norm(chan.h)
                P = np.eye(chan.n_t) - np.outer(hn, hn.conj())
                Vp = P @ V0 @ P.conj().T
                Vp = 0.5 * (Vp + Vp.conj().T)
                W = refine_beam_matrix(data, Vp, floors_at(Vp), opts)
                V = Vp

    w, ratio = _extract_beamformer(W)
    if ratio <= RANK_TOL:
        w, V = _polish_power(w, V, data)
        W = np.outer(w, w.conj())
    alloc = Allocation(W=W, V=V, w=w, tau=received_powers(Allocation(W, V), chan),
                       rank_ratio=ratio,
                       status="ok" if ratio <= RANK_TOL else "rank-violation",
                       solution=sol)
    alloc.objective = _surrogate(alloc.tau, data)
    _polish_duals(alloc, data)
    _align_beamformer(alloc, data)
    return alloc


def _align_beamformer(alloc: Allocation, data: InnerProblemData):
    """Realign the primal matrices onto the null spaces of their dual slacks.

    At an exact optimum the beam direction spans the one-dimensional null
    space of the dual slack R, and the AN covariance lives in the null space
    of Z, so complementarity can be restored from the primal side: replace
    the beam direction by R's bottom eigenvector and project V onto the span
    of Z's bottom eigenvectors, re-snapping the power onto the feasible
    interval after each change. Each change is adopted only when the full
    optimality report improves; the received powers move by O(solver
    tolerance).
    """
    sol = alloc.solution
    if sol is None or alloc.w is None:
        return
    try:
        report = check_kkt(alloc, data)
    except Exception:
        return
    if report.passed():
        return

    def score(r):
        return max(r.comp_w, r.comp_v, r.stationarity_w, r.stationarity_v)

    feas0 = _primal_violation(alloc, data)

    def try_adopt(w_new, V_new):
        nonlocal report, feas0
        w2, V2 = _polish_power(w_new, V_new, data)
        trial = Allocation(W=np.outer(w2, w2.conj()), V=V2, w=w2, solution=sol)
        trial.tau = received_powers(trial, data.channel)
        try:
            report1 = check_kkt(trial, data)
            feas1 = _primal_violation(trial, data)
        except Exception:
            return
        if feas1 > max(feas0, 1e-9):
            return
        if report1.passed() or score(report1) < score(report):
            feas0 = feas1
            alloc.W, alloc.V, alloc.w, alloc.tau = trial.W, trial.V, trial.w, trial.tau
            alloc.objective = _surrogate(alloc.tau, data)
            report = report1

    lam_r, U = eigh(0.5 * (sol.dual_matrices["W"]
                           + sol.dual_matrices["W"].conj().T))
    w_new = float(np.linalg.norm(alloc.w)) * U[:, 0]
    k = int(np.argmax(np.abs(w_new)))
    if np.abs(w_new[k]) > 0.0:
        w_new = w_new * (np.conj(w_new[k]) / np.abs(w_new[k]))
        try_adopt(w_new, alloc.V)
    if report.passed():
        return

    lam_v = np.linalg.eigvalsh(0.5 * (alloc.V + alloc.V.conj().T))
    d = int(np.sum(lam_v > 1e-8 * max(lam_v[-1], 0.0)))
    if 0 < d < data.channel.n_t:
        lam_z, UZ = eigh(0.5 * (sol.dual_matrices["V"]
                                + sol.dual_matrices["V"].conj().T))
        P = UZ[:, :d] @ UZ[:, :d].conj().T
        try_adopt(alloc.w, _clip_psd(P @ alloc.V @ P.conj().T))


def _polish_duals(alloc: Allocation, data: InnerProblemData):
    """Tighten the dual certificate of a recovered allocation in place.

    The interior-point multipliers can carry large complementarity error when
    the optimal face is degenerate, even though better multipliers exist for
    the same primal point. Both dual slacks are affine in the multipliers
    (lam, alpha, rho_j, D_j), so minimizing ||R w||^2 + ||Z V||_F^2 is a
    small linear least-squares problem. The refit is adopted only when the
    full optimality report (including dual feasibility and sign checks)
    improves; otherwise the solver's certificate is kept.
    """
    sol = alloc.solution
    if sol is None or alloc.w is None:
        return
    chan = data.channel
    nt, m, J = chan.n_t, chan.n_r, chan.n_ers
    w, V = alloc.w, alloc.V
    H = np.outer(chan.h, chan.h.conj())
    n_x = 2 + J + J * m * m

    def unpack(x):
        lam, alpha = x[0], x[1]
        rho = x[2:2 + J]
        Ds, k = [], 2 + J
        for _ in range(J):
            D = np.zeros((m, m), dtype=complex)
            for a in range(m):
                D[a, a] = x[k]
                k += 1
            for a in range(m):
                for b in range(a + 1, m):
                    D[a, b] = x[k] + 1j * x[k + 1]
                    D[b, a] = x[k] - 1j * x[k + 1]
                    k += 2
            Ds.append(D)
        return lam, alpha, rho, Ds

    def slacks(x):
        lam, alpha, rho, Ds = unpack(x)
        GDg = sum(G @ D @ G.conj().T for G, D in zip(chan.G, Ds))
        GGr = sum(r * G @ G.conj().T for r, G in zip(rho, chan.G))
        R = (1.0 + lam) * np.eye(nt) - GGr + GDg - (alpha / data.gamma_req) * H
        Z = lam * np.eye(nt) + alpha * H - GGr - data.alpha_er * GDg
        return R, Z

    try:
        report0 = check_kkt(alloc, data)
    except Exception:
        return
    score0 = max(report0.comp_w, report0.comp_v,
                 report0.stationarity_w, report0.stationarity_v)
    R0, Z0 = sol.dual_matrices["W"], sol.dual_matrices["V"]
    w_wt = np.linalg.norm(w) / (1.0 + np.linalg.norm(R0) * np.linalg.norm(alloc.W))
    v_wt = 1.0 / (1.0 + np.linalg.norm(Z0) * np.linalg.norm(V))

    def resid(x):
        R, Z = slacks(x)
        r1 = (R @ w) * w_wt
        r2 = (Z @ V).ravel() * v_wt
        return np.concatenate([r1.real, r1.imag, r2.real, r2.imag])

    b0 = resid(np.zeros(n_x))
    cols = []
    for i in range(n_x):
        e = np.zeros(n_x)
        e[i] = 1.0
        cols.append(resid(e) - b0)
    A = np.column_stack(cols)
    # equilibrate columns: the multipliers differ by many orders of magnitude
    col_n = np.linalg.norm(A, axis=0)
    col_n[col_n == 0.0] = 1.0
    x, *_ = np.linalg.lstsq(A / col_n, -b0, rcond=None)
    x /= col_n

    # near-null directions of the fit can leave tiny sign violations on the
    # inequality multipliers; clip them onto their cones (the slacks are
    # rebuilt from the clipped values, so stationarity stays exact)
    lam, alpha, rho, Ds = unpack(x)
    lam = max(lam, 0.0)
    rho = np.clip(rho, 0.0, None)
    Ds = [_clip_psd(D) for D in Ds]
    x = np.empty(n_x)
    x[0], x[1] = lam, alpha
    x[2:2 + J] = rho
    k = 2 + J
    for D in Ds:
        for a in range(m):
            x[k] = D[a, a].real
            k += 1
        for a in range(m):
            for b in range(a + 1, m):
                x[k], x[k + 1] = D[a, b].real, D[a, b].imag
                k += 2
    R, Z = slacks(x)
    trial = {"C1": float(lam), "C2": float(alpha)}
    trial.update({f"C5_{j}": float(rho[j]) for j in range(J)})
    saved_vals = {k: sol.dual_values[k] for k in trial}
    saved_mats = {k: sol.dual_matrices[k]
                  for k in ["W", "V"] + [f"C3_{j}" for j in range(J)]}
    sol.dual_values.update(trial)
    sol.dual_matrices["W"] = R
    sol.dual_matrices["V"] = Z
    for j in range(J):
        sol.dual_matrices[f"C3_{j}"] = Ds[j]
    try:
        report1 = check_kkt(alloc, data)
        score1 = max(report1.comp_w, report1.comp_v,
                     report1.stationarity_w, report1.stationarity_v)
        better = (report1.passed() or
                  (not report0.passed() and score1 < score0
                   and report1.lam >= -KKT_TOL and report1.alpha >= -KKT_TOL
                   and np.all(report1.rho >= -KKT_TOL)
                   and report1.dual_psd_min >= -KKT_TOL
                   and report1.rank_r >= nt - 1))
    except Exception:
        better = False
    if not better:
        sol.dual_values.update(saved_vals)
        sol.dual_matrices.update(saved_mats)


@dataclass
class KktReport:
    """Residuals of the optimality system of the trace-minimization solve."""

    stationarity_w: float
    stationarity_v: float
    comp_w: float                 # ||R W||_F, normalized
    comp_v: float                 # ||Z V||_F, normalized
    lam: float                    # power-budget multiplier
    alpha: float                  # SINR-target multiplier
    rho: np.ndarray               # received-power multipliers
    dual_psd_min: float           # most negative eigenvalue among R, Z, D_j
    rank_r: int
    n_t: int

    def passed(self, tol: float = KKT_TOL) -> bool:
        return (max(self.stationarity_w, self.stationarity_v,
                    self.comp_w, self.comp_v) <= tol
                and self.lam >= -tol and self.alpha >= -tol
                and np.all(self.rho >= -tol)
                and self.dual_psd_min >= -tol
                and self.rank_r >= self.n_t - 1)


def check_kkt(alloc: Allocation, data: InnerProblemData,
              solution: sdp.SdpSolution = None) -> KktReport:
    """Rebuild the stationarity identities from the reported multipliers.

    With lam, alpha, rho_j, D_j the multipliers of the power budget, SINR
    target, received-power floors, and leakage LMIs, the dual slacks must be
        R = (1 + lam) I - sum_j rho_j G_j G_j^H + sum_j G_j D_j G_j^H
            - (alpha/gamma_req) h h^H
        Z = lam I + alpha h h^H - sum_j rho_j G_j G_j^H
            - alpha_er sum_j G_j D_j G_j^H
    with R W = 0, Z V = 0, and rank(R) >= n_t - 1.
    """
    sol = solution if solution is not None else alloc.solution
    if sol is None:
        raise ValueError("no dual certificate attached to this allocation")
    chan = data.channel
    nt = chan.n_t
    H = np.outer(chan.h, chan.h.conj())
    lam = sol.dual_values["C1"]
    alpha = sol.dual_values["C2"]
    rho = np.array([sol.dual_values[f"C5_{j}"] for j in range(chan.n_ers)])
    D = [sol.dual_matrices[f"C3_{j}"] for j in range(chan.n_ers)]
    R = sol.dual_matrices["W"]
    Z = sol.dual_matrices["V"]

    GDg = sum(G @ Dj @ G.conj().T for G, Dj in zip(chan.G, D))
    GG = sum(rho_j * G @ G.conj().T for rho_j, G in zip(rho, chan.G))
    R_f = (1.0 + lam) * np.eye(nt) - GG + GDg - (alpha / data.gamma_req) * H
    Z_f = lam * np.eye(nt) + alpha * H - GG - data.alpha_er * GDg

    def rel(A, B):
        return float(np.linalg.norm(A - B) / max(1.0, np.linalg.norm(B)))

    def comp(Md, Mp):
        return float(np.linalg.norm(Md @ Mp)
                     / (1.0 + np.linalg.norm(Md) * np.linalg.norm(Mp)))

    eig_r = np.linalg.eigvalsh(0.5 * (R + R.conj().T))
    rank_r = int(np.sum(eig_r > 1e-6 * max(eig_r[-1], 1.0)))
    psd_min = min(min(np.linalg.eigvalsh(0.5 * (M + M.conj().T)).min() for M in D),
                  eig_r[0], np.linalg.eigvalsh(0.5 * (Z + Z.conj().T)).min())
    return KktReport(stationarity_w=rel(R_f, R), stationarity_v=rel(Z_f, Z),
                     comp_w=comp(R, alloc.W), comp_v=comp(Z, alloc.V),
                     lam=lam, alpha=alpha, rho=rho, dual_psd_min=float(psd_min),
                     rank_r=rank_r, n_t=nt)
