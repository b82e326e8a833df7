"""Dense semidefinite programming over complex Hermitian blocks.

Problems are stated with Hermitian PSD matrix blocks, nonnegative (or free)
scalars, linear trace constraints, and affine linear-matrix-inequality (LMI)
constraints. Internally everything is embedded into real symmetric blocks
([[Re, -Im], [Im, Re]]) and solved with an infeasible-start primal-dual
path-following method with Nesterov-Todd scaling and a Mehrotra-style
corrector. Problems here are tiny (block side <= 32), so all factorizations
are dense.

Dual convention: multipliers are reported for the equivalent minimization
problem (the objective is negated internally when sense == "max") with the
Lagrangian

    L = obj + sum_k m_k * viol_k - sum_lmi Tr(D * expr) - sum_blk Tr(S_X * X)

where viol_k = lhs - rhs for "<=" rows and rhs - lhs for ">=" rows, m_k >= 0
for inequalities, and D, S_X >= 0.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import cho_factor, cho_solve, cholesky, eigh, solve_triangular


class ValidationError(ValueError):
    """Malformed problem data."""


# ---------------------------------------------------------------------------
# symmetric vectorization and complex<->real embedding
# ---------------------------------------------------------------------------

_SVEC_CACHE = {}


def _svec_indices(m: int):
    """Cached (rows, cols, weights, vec-index pairs) for svec of an m x m block."""
    if m not in _SVEC_CACHE:
        iu, ju = np.triu_indices(m)
        w = np.where(iu == ju, 1.0, np.sqrt(2.0))
        idx1 = iu * m + ju
        idx2 = ju * m + iu
        # row-combination coefficients: 0.5 on the diagonal so idx1 + idx2 sums to 1
        cc = np.where(iu == ju, 0.5, 0.5 * np.sqrt(2.0))
        _SVEC_CACHE[m] = (iu, ju, w, idx1, idx2, cc)
    return _SVEC_CACHE[m]


def svec_dim(m: int) -> int:
    return m * (m + 1) // 2


def svec(X: np.ndarray) -> np.ndarray:
    """Symmetric vectorization with sqrt(2) off-diagonal weights, so that
    svec(X) @ svec(Y) == Tr(X Y)."""
    m = X.shape[0]
    iu, ju, w, _, _, _ = _svec_indices(m)
    return X[iu, ju] * w


def smat(x: np.ndarray) -> np.ndarray:
    """Inverse of svec."""
    d = x.shape[0]
    m = int(round((np.sqrt(8 * d + 1) - 1) / 2))
    iu, ju, w, _, _, _ = _svec_indices(m)
    X = np.zeros((m, m))
    X[iu, ju] = x / w
    X[ju, iu] = x / w
    return X


def symkron(W: np.ndarray) -> np.ndarray:
    """Matrix of the map Z -> W Z W on svec coordinates (W symmetric)."""
    m = W.shape[0]
    _, _, _, idx1, idx2, cc = _svec_indices(m)
    K = np.kron(W, W)
    TK = K[idx1] * cc[:, None] + K[idx2] * cc[:, None]
    return TK[:, idx1] * cc[None, :] + TK[:, idx2] * cc[None, :]


def embed_complex(A: np.ndarray) -> np.ndarray:
    """Real embedding [[Re A, -Im A], [Im A, Re A]] of any complex matrix.

    The embedding is a *-homomorphism: products and Hermitian transposes
    carry over, and PSD-ness is preserved for Hermitian inputs.
    """
    A = np.asarray(A, dtype=complex)
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def embed_hermitian(H: np.ndarray) -> np.ndarray:
    """Real symmetric embedding of a Hermitian matrix.

    Eigenvalues are duplicated and the trace doubles: Tr(out) = 2 Tr(H).
    Raises ValidationError if H is not Hermitian within 1e-12 (relative).
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {H.shape}")
    scale = max(1.0, float(np.max(np.abs(H))) if H.size else 1.0)
    if np.max(np.abs(H - H.conj().T)) > 1e-12 * scale:
        raise ValidationError("matrix is not Hermitian within tolerance 1e-12")
    return embed_complex(H)


def recover_hermitian(X: np.ndarray) -> np.ndarray:
    """Project a real symmetric 2n x 2n matrix back to complex Hermitian n x n.

    For X = embed_hermitian(H) this returns H exactly; in general it is the
    structure-preserving group average, which preserves PSD-ness, traces
    against embedded coefficient matrices, and objective values.
    """
    n = X.shape[0] // 2
    A = 0.5 * (X[:n, :n] + X[n:, n:])
    B = 0.5 * (X[n:, :n] - X[:n, n:])
    H = A + 1j * B
    return 0.5 * (H + H.conj().T)


# ---------------------------------------------------------------------------
# problem description
# ---------------------------------------------------------------------------

@dataclass
class LinearConstraint:
    """sum_b Tr(F_b X_b) + sum_i q_i t_i  <sense>  rhs."""

    name: str
    sense: str                       # "<=", ">=", "=="
    rhs: float
    block_coeffs: dict = field(default_factory=dict)   # name -> Hermitian matrix
    scalar_coeffs: dict = field(default_factory=dict)  # name -> float


@dataclass
class LmiTerm:
    """coeff * P^H X_b P contribution to an LMI left-hand side."""

    block: str
    P: np.ndarray
    coeff: float = 1.0


@dataclass
class LmiConstraint:
    """sum terms + sum_i t_i * Q_i + const >= 0 (PSD), all m x m Hermitian."""

    name: str
    m: int
    const: np.ndarray
    block_terms: list = field(default_factory=list)    # list of LmiTerm
    scalar_terms: list = field(default_factory=list)   # (scalar_name, Hermitian)


@dataclass
class SdpProblem:
    """Linear objective over Hermitian PSD blocks and nonnegative scalars."""

    blocks: list                      # (name, complex side length)
    scalars: list = field(default_factory=list)   # (name, free: bool)
    sense: str = "min"
    obj_blocks: dict = field(default_factory=dict)
    obj_scalars: dict = field(default_factory=dict)
    obj_const: float = 0.0
    constraints: list = field(default_factory=list)
    lmis: list = field(default_factory=list)

    def validate(self):
        if self.sense not in ("min", "max"):
            raise ValidationError(f"bad sense {self.sense!r}")
        if not self.constraints and not self.lmis:
            raise ValidationError("constraint list is empty")
        sides = dict(self.blocks)
        for name, F in self.obj_blocks.items():
            _check_coeff(name, F, sides)
        for con in self.constraints:
            if con.sense not in ("<=", ">=", "=="):
                raise ValidationError(f"bad sense {con.sense!r} in {con.name}")
            for name, F in con.block_coeffs.items():
                _check_coeff(name, F, sides)
        for lmi in self.lmis:
            for term in lmi.block_terms:
                if term.block not in sides:
                    raise ValidationError(f"unknown block {term.block!r} in {lmi.name}")
                P = np.asarray(term.P)
                if P.shape != (sides[term.block], lmi.m):
                    raise ValidationError(
                        f"LMI {lmi.name}: P shape {P.shape} does not match "
                        f"({sides[term.block]}, {lmi.m})")


def _check_coeff(name, F, sides):
    if name not in sides:
        raise ValidationError(f"unknown block {name!r}")
    F = np.asarray(F)
    if F.shape != (sides[name], sides[name]):
        raise ValidationError(
            f"coefficient for block {name!r} has shape {F.shape}, "
            f"expected ({sides[name]}, {sides[name]})")


@dataclass
class SolverOptions:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    tol_psd: float = 1e-9
    max_iter: int = 200
    refine_gap: float = 1e-12   # keep polishing down to this relative gap
    step_frac: float = 0.99
    verbose: bool = False


@dataclass
class SdpSolution:
    status: str
    obj: float = np.nan
    primal_blocks: dict = field(default_factory=dict)
    primal_scalars: dict = field(default_factory=dict)
    dual_values: dict = field(default_factory=dict)
    dual_matrices: dict = field(default_factory=dict)
    gap: float = np.nan
    pres: float = np.nan
    dres: float = np.nan
    iterations: int = 0


# ---------------------------------------------------------------------------
# compilation to the real standard form  min c.x  s.t.  A x = b,  x in K
# ---------------------------------------------------------------------------

class _Compiled:
    __slots__ = ("problem", "block_sizes", "block_cols", "n_sdp_cols", "n_lin",
                 "A", "b", "c", "obj_sign", "obj_scale", "row_scale",
                 "con_rows", "lmi_info", "user_blocks", "scalar_cols",
                 "slack_cols", "lin_names")

    def __init__(self):
        self.block_sizes = []
        self.block_cols = []


def compile_problem(problem: SdpProblem) -> _Compiled:
    problem.validate()
    cp = _Compiled()
    cp.problem = problem

    # real PSD cone blocks: user blocks (embedded), then one slack block per LMI
    cp.user_blocks = {}
    col = 0
    for name, n in problem.blocks:
        m = 2 * n
        cp.user_blocks[name] = len(cp.block_sizes)
        cp.block_cols.append(slice(col, col + svec_dim(m)))
        cp.block_sizes.append(m)
        col += svec_dim(m)
    lmi_slack_block = {}
    for lmi in problem.lmis:
        m = 2 * lmi.m
        lmi_slack_block[lmi.name] = len(cp.block_sizes)
        cp.block_cols.append(slice(col, col + svec_dim(m)))
        cp.block_sizes.append(m)
        col += svec_dim(m)
    cp.n_sdp_cols = col

    # linear (nonnegative) columns: user scalars, free splits, then row slacks
    cp.scalar_cols = {}
    lin_names = []
    n_lin = 0
    for name, free in problem.scalars:
        if free:
            cp.scalar_cols[name] = (cp.n_sdp_cols + n_lin, cp.n_sdp_cols + n_lin + 1)
            lin_names += [name + "+", name + "-"]
            n_lin += 2
        else:
            cp.scalar_cols[name] = (cp.n_sdp_cols + n_lin, None)
            lin_names.append(name)
            n_lin += 1

    # row and column counts are known up front, so A can be filled in one pass
    n_ineq = sum(1 for con in problem.constraints if con.sense in ("<=", ">="))
    n_lmi_rows = sum(svec_dim(2 * lmi.m) for lmi in problem.lmis)
    n_rows = len(problem.constraints) + n_lmi_rows
    n_cols = cp.n_sdp_cols + n_lin + n_ineq
    A = np.zeros((n_rows, n_cols))
    b = np.zeros(n_rows)

    next_slack = cp.n_sdp_cols + n_lin
    n_lin += n_ineq
    cp.con_rows = []     # (name, row index, sense)
    r = 0
    for con in problem.constraints:
        sgn = -1.0 if con.sense == ">=" else 1.0
        for bname, F in con.block_coeffs.items():
            sl = cp.block_cols[cp.user_blocks[bname]]
            A[r, sl] += sgn * svec(embed_hermitian(F)) * 0.5
        for sname, q in con.scalar_coeffs.items():
            cpos, cneg = cp.scalar_cols[sname]
            A[r, cpos] += sgn * q
            if cneg is not None:
                A[r, cneg] -= sgn * q
        if con.sense in ("<=", ">="):
            A[r, next_slack] = 1.0
            lin_names.append("_slack:" + con.name)
            next_slack += 1
        cp.con_rows.append((con.name, r, con.sense))
        b[r] = sgn * con.rhs
        r += 1

    cp.lmi_info = {}
    for lmi in problem.lmis:
        m2 = 2 * lmi.m
        d = svec_dim(m2)
        iu, ju, w, _, _, _ = _svec_indices(m2)
        start = r
        terms = [(cp.block_cols[cp.user_blocks[t.block]],
                  embed_complex(np.asarray(t.P, dtype=complex)), t.coeff)
                 for t in lmi.block_terms]
        sterms = [(cp.scalar_cols[sname], svec(embed_hermitian(Q)))
                  for sname, Q in lmi.scalar_terms]
        c_emb = svec(embed_hermitian(lmi.const))
        slack_sl = cp.block_cols[lmi_slack_block[lmi.name]]
        for k in range(d):
            i, j = iu[k], ju[k]
            A[r, slack_sl.start + k] = 1.0
            for sl, Pe, coeff in terms:
                B = np.outer(Pe[:, i], Pe[:, j])
                B = 0.5 * (B + B.T)
                A[r, sl] += -coeff * w[k] * svec(B)
            for (cpos, cneg), qsv in sterms:
                A[r, cpos] -= qsv[k]
                if cneg is not None:
                    A[r, cneg] += qsv[k]
            b[r] = c_emb[k]
            r += 1
        cp.lmi_info[lmi.name] = (slice(start, start + d), lmi_slack_block[lmi.name], lmi.m)

    # row equilibration; remembered so multipliers can be mapped back
    row_scale = np.ones(n_rows)
    for r in range(n_rows):
        mx = np.max(np.abs(A[r]))
        if mx > 0:
            row_scale[r] = 1.0 / mx
    A *= row_scale[:, None]
    b *= row_scale
    cp.row_scale = row_scale

    # objective
    c = np.zeros(n_cols)
    obj_sign = 1.0 if problem.sense == "min" else -1.0
    for bname, F in problem.obj_blocks.items():
        sl = cp.block_cols[cp.user_blocks[bname]]
        c[sl] += obj_sign * svec(embed_hermitian(F)) * 0.5
    for sname, q in problem.obj_scalars.items():
        cpos, cneg = cp.scalar_cols[sname]
        c[cpos] += obj_sign * q
        if cneg is not None:
            c[cneg] -= obj_sign * q
    obj_scale = max(1.0, float(np.max(np.abs(c))))
    c /= obj_scale
    cp.obj_sign = obj_sign
    cp.obj_scale = obj_scale

    cp.A = A
    cp.b = b
    cp.c = c
    cp.n_lin = n_lin
    cp.lin_names = lin_names
    return cp


# ---------------------------------------------------------------------------
# interior-point core on the real standard form
# ---------------------------------------------------------------------------

def _block_views(v, cp):
    return [smat(v[sl]) for sl in cp.block_cols], v[cp.n_sdp_cols:]


def _max_step_block(X, L, D):
    """sup {alpha : X + alpha D >= 0} given L = chol(X)."""
    R = solve_triangular(L, D, lower=True)
    R = solve_triangular(L, R.T, lower=True)
    lam_min = eigh(0.5 * (R + R.T), eigvals_only=True, subset_by_index=(0, 0))[0]
    if lam_min >= -1e-14:
        return np.inf
    return -1.0 / lam_min


def _max_step_lin(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


class _IpmState:
    pass


def ipm_solve(cp: _Compiled, opts: SolverOptions):
    """Infeasible-start NT-scaled path-following on the compiled problem.

    Runs the interior-point iteration from the standard cold start; if it
    terminates short of tolerance (typically a scaling breakdown once the
    iterates hug a degenerate optimal face), it restarts from the best
    iterate seen, pushed back into the cone interior. The restart approaches
    the same face from a better-centred point and usually gains the last
    couple of orders of magnitude in the gap.
    """
    res = _ipm_run(cp, opts)
    for _ in range(2):
        if res.status != "max-iter" or not hasattr(res, "x"):
            break
        start = _recentred(res, cp)
        if start is None:
            break
        res2 = _ipm_run(cp, opts, start=start)
        res2.iterations += res.iterations
        if hasattr(res2, "x") and res2.score < res.score:
            res = res2
        else:
            break
    return res


def _recentred(res, cp: _Compiled, floor_frac: float = 1e-8):
    """Shift an iterate strictly inside the cones for a warm restart.

    Eigenvalues of each semidefinite block (and each linear entry) are
    floored at floor_frac times the block's mean eigenvalue, which restores
    enough centrality for the Nesterov-Todd scaling to exist while keeping
    the iterate close to the face it had reached.
    """
    x, s = res.x.copy(), res.s.copy()
    lin = slice(cp.n_sdp_cols, len(x))

    def lift(v):
        for k, sl in enumerate(cp.block_cols):
            M = smat(v[sl])
            lam, U = np.linalg.eigh(0.5 * (M + M.T))
            mean = max(float(np.mean(np.abs(lam))), 1e-300)
            lam = np.maximum(lam, floor_frac * mean)
            v[sl] = svec((U * lam) @ U.T)
        if v[lin].size:
            mean = max(float(np.mean(np.abs(v[lin]))), 1e-300)
            v[lin] = np.maximum(v[lin], floor_frac * mean)
        return v

    try:
        return lift(x), res.y.copy(), lift(s)
    except np.linalg.LinAlgError:
        return None


def _ipm_run(cp: _Compiled, opts: SolverOptions, start=None):
    A, b, c = cp.A, cp.b, cp.c
    n_rows, n_cols = A.shape
    nb = len(cp.block_sizes)
    lin = slice(cp.n_sdp_cols, n_cols)
    nu = sum(cp.block_sizes) + cp.n_lin   # barrier parameter count

    if start is not None:
        x, y, s = start
        x, y, s = x.copy(), y.copy(), s.copy()
    else:
        x = np.zeros(n_cols)
        s = np.zeros(n_cols)
        rho_p = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
        rho_d = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
        for k, sl in enumerate(cp.block_cols):
            eye = svec(np.eye(cp.block_sizes[k]))
            x[sl] = rho_p * eye
            s[sl] = rho_d * eye
        x[lin] = rho_p
        s[lin] = rho_d
        y = np.zeros(n_rows)

    b_norm = 1.0 + float(np.max(np.abs(b))) if b.size else 1.0
    c_norm = 1.0 + float(np.max(np.abs(c)))

    best = _IpmState()
    best.score = np.inf
    status = "max-iter"
    it = 0
    converged_at = None
    prev_relgap = np.inf
    stall = 0

    for it in range(1, opts.max_iter + 1):
        r_p = b - A @ x
        r_d = c - A.T @ y - s
        gap = float(x @ s)
        mu = gap / nu
        pobj = float(c @ x)
        dobj = float(b @ y)
        relgap = gap / max(1.0, abs(pobj), abs(dobj))
        pres = float(np.max(np.abs(r_p))) / b_norm if n_rows else 0.0
        dres = float(np.max(np.abs(r_d))) / c_norm

        score = max(pres, dres, relgap)
        if score < best.score:
            best.score = score
            best.x, best.y, best.s = x.copy(), y.copy(), s.copy()
            best.pres, best.dres, best.relgap = pres, dres, relgap
            best.it = it

        if opts.verbose:
            print(f"  it {it:3d}  pres {pres:9.2e}  dres {dres:9.2e}  "
                  f"relgap {relgap:9.2e}  pobj {pobj: .9e}")

        done = pres <= opts.tol_feas and dres <= opts.tol_feas and relgap <= opts.tol_gap
        if done and converged_at is None:
            converged_at = it
        if converged_at is not None:
            # polish a few more iterations for tighter complementarity
            if (relgap <= opts.refine_gap or it - converged_at >= 20
                    or relgap > 0.7 * prev_relgap):
                status = "optimal"
                break
        prev_relgap = relgap

        # divergence heuristics
        if np.max(np.abs(y)) > 1e12 and pres > 1e-6:
            status = "infeasible"
            break
        if np.max(np.abs(x)) > 1e12 and dres > 1e-6:
            status = "unbounded"
            break

        # NT scaling per block

        try:
            Ls, Ps, Sinv_sv, Gs = [], [], [], []
            X_blocks, x_lin = _block_views(x, cp)
            S_blocks, s_lin = _block_views(s, cp)
            for k in range(nb):
                Xk = X_blocks[k]
                Sk = S_blocks[k]
                L = cholesky(Xk, lower=True)
                M = L.T @ Sk @ L
                lam, U = eigh(0.5 * (M + M.T))
                if lam[0] <= 0:
                    raise LinAlgError("cone violation")
                # NT scaling point: G X^-1 G^T = G^T S G = diag(lam)^(1/2)
                G = L @ (U * lam ** -0.25)
                Ginv = (lam[:, None] ** 0.25) * (U.T @ solve_triangular(
                    L, np.eye(L.shape[0]), lower=True))
                W = G @ G.T
                Ls.append(L)
                Gs.append((G, Ginv, np.sqrt(lam)))
                Ps.append(symkron(W))
                Sinv_sv.append(svec(G @ (G.T / lam[:, None] ** 0.5)))
            p_lin = x_lin / s_lin
        except LinAlgError:
            status = "max-iter"
            break

        def apply_P(v):
            out = np.empty_like(v)
            for k, sl in enumerate(cp.block_cols):
                out[sl] = Ps[k] @ v[sl]
            out[lin] = p_lin * v[lin]
            return out

        # Schur complement A P A^T
        Msc = (A[:, lin] * p_lin) @ A[:, lin].T
        for k, sl in enumerate(cp.block_cols):
            Ab = A[:, sl]
            Msc += (Ab @ Ps[k]) @ Ab.T
        jitter = 0.0
        for attempt in range(4):
            try:
                F = cho_factor(Msc + jitter * np.eye(n_rows), lower=True)
                break
            except LinAlgError:
                jitter = max(1e-14 * np.trace(Msc) / max(n_rows, 1), 10.0 * jitter,
                             1e-14) * 10.0 ** attempt
        else:
            status = "max-iter"
            break

        def solve_dirs(r_c):
            rhs = r_p - A @ r_c + A @ apply_P(r_d)
            dy = cho_solve(F, rhs)
            # one round of iterative refinement keeps the directions usable
            # when the Schur complement is ill-conditioned near degenerate
            # optimal faces
            dy += cho_solve(F, rhs - Msc @ dy)
            ds = r_d - A.T @ dy
            dx = r_c - apply_P(ds)
            return dx, dy, ds

        # predictor (affine scaling) direction
        dx_a, dy_a, ds_a = solve_dirs(-x)
        ap = _step_len(x, dx_a, cp, Ls, lin)
        ad = _step_len_dual(s, ds_a, cp, lin)
        mu_aff = float((x + min(1.0, ap) * dx_a) @ (s + min(1.0, ad) * ds_a)) / nu
        sigma = min(0.999, max(1e-8, (max(mu_aff, 0.0) / mu) ** 3))

        # Mehrotra corrector in the Nesterov-Todd scaled space, where both
        # X and S map to the same diagonal d; the second-order term is
        # G * Lyap_d^-1(sym(dXhat dShat)) * G^T
        r_c = np.empty_like(x)
        dXa, dxa_lin = _block_views(dx_a, cp)
        dSa, dsa_lin = _block_views(ds_a, cp)
        for k, sl in enumerate(cp.block_cols):
            G, Ginv, d = Gs[k]
            dXh = Ginv @ dXa[k] @ Ginv.T
            dSh = G.T @ dSa[k] @ G
            Msym = dXh @ dSh
            Msym = 0.5 * (Msym + Msym.T)
            Z = 2.0 * Msym / (d[:, None] + d[None, :])
            r_c[sl] = sigma * mu * Sinv_sv[k] - x[sl] - svec(G @ Z @ G.T)
        r_c[lin] = sigma * mu / s_lin - x_lin - dxa_lin * dsa_lin / s_lin

        dx, dy, ds = solve_dirs(r_c)
        ap = min(1.0, opts.step_frac * _step_len(x, dx, cp, Ls, lin))
        ad = min(1.0, opts.step_frac * _step_len_dual(s, ds, cp, lin))
        if min(ap, ad) < 1e-10:
            # corrector failed; fall back to a damped centering step
            r_c2 = np.empty_like(x)
            for k, sl in enumerate(cp.block_cols):
                r_c2[sl] = 0.8 * mu * Sinv_sv[k] - x[sl]
            r_c2[lin] = 0.8 * mu / s_lin - x_lin
            dx, dy, ds = solve_dirs(r_c2)
            ap = min(1.0, opts.step_frac * _step_len(x, dx, cp, Ls, lin))
            ad = min(1.0, opts.step_frac * _step_len_dual(s, ds, cp, lin))
            if min(ap, ad) < 1e-12:
                stall += 1
                if stall >= 3:
                    status = "max-iter"
                    break
                continue
        stall = 0

        x = x + ap * dx
        y = y + ad * dy
        s = s + ad * ds

    else:
        it = opts.max_iter

    if status != "optimal" and best.score < np.inf:
        if (best.pres <= opts.tol_feas and best.dres <= opts.tol_feas
                and best.relgap <= opts.tol_gap):
            status = "optimal"
    if not hasattr(best, "x"):
        best.x, best.y, best.s = x, y, s
        best.pres, best.dres, best.relgap = np.inf, np.inf, np.inf
    best.status = status
    best.iterations = it
    return best


def _step_len(x, dx, cp, Ls, lin):
    alpha = np.inf
    Xs, xl = _block_views(x, cp)
    Ds, dl = _block_views(dx, cp)
    for k in range(len(cp.block_sizes)):
        alpha = min(alpha, _max_step_block(Xs[k], Ls[k], Ds[k]))
    alpha = min(alpha, _max_step_lin(xl, dl))
    return alpha


def _step_len_dual(s, ds, cp, lin):
    alpha = np.inf
    Ss, sl_ = _block_views(s, cp)
    Ds, dl = _block_views(ds, cp)
    for k in range(len(cp.block_sizes)):
        Sk = Ss[k]
        jitter = 1e-14 * max(1.0, np.trace(Sk) / Sk.shape[0])
        for _ in range(8):
            try:
                Lk = cholesky(Sk + jitter * np.eye(Sk.shape[0]), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter *= 100.0
        else:
            return 0.0
        alpha = min(alpha, _max_step_block(Sk, Lk, Ds[k]))
    alpha = min(alpha, _max_step_lin(sl_, dl))
    return alpha


# ---------------------------------------------------------------------------
# public solve
# ---------------------------------------------------------------------------

def solve(problem: SdpProblem, opts: SolverOptions = None,
          compiled: _Compiled = None) -> SdpSolution:
    """Solve the problem; pass `compiled` to reuse a compiled template whose
    objective has been overwritten (see `set_objective`)."""
    if opts is None:
        opts = SolverOptions()
    cp = compiled if compiled is not None else compile_problem(problem)
    res = ipm_solve(cp, opts)

    sol = SdpSolution(status=res.status, iterations=res.iterations)
    sol.pres, sol.dres, sol.gap = res.pres, res.dres, res.relgap

    x, y, s = res.x, res.y, res.s
    # primal recovery
    for name, n in problem.blocks:
        sl = cp.block_cols[cp.user_blocks[name]]
        sol.primal_blocks[name] = recover_hermitian(smat(x[sl]))
    for name, free in problem.scalars:
        cpos, cneg = cp.scalar_cols[name]
        val = x[cpos] - (x[cneg] if cneg is not None else 0.0)
        sol.primal_scalars[name] = float(val)

    # objective in the user's sense (solver minimized obj_sign * obj / obj_scale)
    pobj = float(cp.c @ x) * cp.obj_scale * cp.obj_sign
    sol.obj = pobj + problem.obj_const

    # duals: y is for the scaled minimization; undo scalings
    y_user = y * cp.obj_scale
    s_user = s * cp.obj_scale
    for name, r, sense in cp.con_rows:
        sol.dual_values[name] = float(-cp.row_scale[r] * y_user[r])
    for name, n in problem.blocks:
        sl = cp.block_cols[cp.user_blocks[name]]
        sol.dual_matrices[name] = 2.0 * recover_hermitian(smat(s_user[sl]))
    for lmi in problem.lmis:
        rsl, blk, m = cp.lmi_info[lmi.name]
        d_real = smat(-y_user[rsl] * cp.row_scale[rsl])
        sol.dual_matrices[lmi.name] = 2.0 * recover_hermitian(d_real)
    return sol


def set_objective(cp: _Compiled, obj_blocks=None, obj_scalars=None, sense=None):
    """Overwrite the objective of a compiled template in place (cheap; used by
    the conditional-gradient loop, which re-solves with new linear objectives
    over a fixed constraint set)."""
    problem = cp.problem
    if sense is not None:
        problem.sense = sense
    if obj_blocks is not None:
        problem.obj_blocks = obj_blocks
    if obj_scalars is not None:
        problem.obj_scalars = obj_scalars
    c = np.zeros(cp.A.shape[1])
    obj_sign = 1.0 if problem.sense == "min" else -1.0
    for bname, F in problem.obj_blocks.items():
        sl = cp.block_cols[cp.user_blocks[bname]]
        c[sl] += obj_sign * svec(embed_hermitian(F)) * 0.5
    for sname, q in problem.obj_scalars.items():
        cpos, cneg = cp.scalar_cols[sname]
        c[cpos] += obj_sign * q
        if cneg is not None:
            c[cneg] -= obj_sign * q
    obj_scale = max(1.0, float(np.max(np.abs(c))))
    cp.c = c / obj_scale
    cp.obj_sign = obj_sign
    cp.obj_scale = obj_scale
    return cp


def dump_problem(cp: _Compiled, path):
    """Write the compiled real standard form as plain-text sparse triplets.

    Lines: `c <block> <row> <col> <value>` for objective entries,
    `A <constraint> <block> <row> <col> <value>` for constraint entries
    (block -1 denotes the linear part, col is then the linear index), and
    `b <constraint> <value>` for right-hand sides.
    """
    with open(path, "w") as f:
        def emit_vec(prefix, vec):
            for k, sl in enumerate(cp.block_cols):
                M = smat(vec[sl])
                m = M.shape[0]
                for i in range(m):
                    for j in range(i, m):
                        if M[i, j] != 0.0:
                            f.write(f"{prefix} {k} {i} {j} {M[i, j]:.17g}\n")
            for i, v in enumerate(vec[cp.n_sdp_cols:]):
                if v != 0.0:
                    f.write(f"{prefix} -1 0 {i} {v:.17g}\n")

        emit_vec("c", cp.c * cp.obj_scale * cp.obj_sign)
        for r in range(cp.A.shape[0]):
            emit_vec(f"A {r}", cp.A[r] / cp.row_scale[r])
            f.write(f"b {r} {cp.b[r] / cp.row_scale[r]:.17g}\n")
