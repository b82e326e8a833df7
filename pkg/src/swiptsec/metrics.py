"""Rate, secrecy, and harvested-power metrics for a candidate allocation.

An "allocation" here is anything exposing .W (Hermitian beamforming matrix),
.V (Hermitian AN covariance) and optionally .w (extracted beamforming vector);
channels are ChannelRealization instances. All rates in bit/s/Hz, powers in
watts.
"""

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .eh import phi_linear, phi_nonlinear, psi


def _w_outer(alloc):
    """Rank-one matrix for the information signal: w w^H when an extracted
    beamformer is present, otherwise the (possibly higher-rank) W."""
    if getattr(alloc, "w", None) is not None:
        w = np.asarray(alloc.w)
        return np.outer(w, w.conj())
    return np.asarray(alloc.W)


def ir_rate(alloc, chan) -> float:
    """Information receiver rate log2(1 + SINR) with the AN treated as noise."""
    h = chan.h
    Ww = _w_outer(alloc)
    sig = float(np.real(h.conj() @ Ww @ h))
    interf = float(np.real(h.conj() @ alloc.V @ h))
    return float(np.log2(1.0 + sig / (interf + chan.sigma_sq)))


def er_rate(alloc, chan, j: int) -> float:
    """Eavesdropping rate of ER j: log2 det(I + Q^-1 G^H w w^H G) with
    Q = G^H V G + sigma^2 I, evaluated through Cholesky factors (no explicit
    inverse)."""
    G = chan.G[j]
    n_r = G.shape[1]
    Q = G.conj().T @ alloc.V @ G + chan.sigma_sq * np.eye(n_r)
    Q = 0.5 * (Q + Q.conj().T)
    L = cholesky(Q, lower=True)
    if getattr(alloc, "w", None) is not None:
        # rank-one case: matrix determinant lemma gives a scalar form
        x = solve_triangular(L, G.conj().T @ alloc.w, lower=True)
        return float(np.log2(1.0 + float(np.real(x.conj() @ x))))
    S = G.conj().T @ alloc.W @ G
    A = Q + 0.5 * (S + S.conj().T)
    La = cholesky(A, lower=True)
    logdet_a = 2.0 * np.sum(np.log(np.real(np.diag(La))))
    logdet_q = 2.0 * np.sum(np.log(np.real(np.diag(L))))
    return float((logdet_a - logdet_q) / np.log(2.0))


def max_er_rate(alloc, chan) -> float:
    return max(er_rate(alloc, chan, j) for j in range(chan.n_ers))


def secrecy_rate(alloc, chan) -> float:
    """[IR rate - best eavesdropper rate]^+."""
    return max(0.0, ir_rate(alloc, chan) - max_er_rate(alloc, chan))


def received_powers(alloc, chan) -> np.ndarray:
    """Per-ER received RF power Tr((W+V) G_j G_j^H)."""
    T = np.asarray(alloc.W) + np.asarray(alloc.V)
    out = np.empty(chan.n_ers)
    for j, G in enumerate(chan.G):
        out[j] = float(np.real(np.trace(G.conj().T @ T @ G)))
    return out


def harvested_report(alloc, chan, eh) -> dict:
    """Received and harvested powers per ER and in total, under both the
    non-linear (sigmoid rectifier) and linear models.

    eh may be a single EhParams (shared by all ERs) or a list per ER.
    """
    params = eh if isinstance(eh, (list, tuple)) else [eh] * chan.n_ers
    if len(params) != chan.n_ers:
        raise ValueError(f"expected {chan.n_ers} EH parameter sets, got {len(params)}")
    p_er = received_powers(alloc, chan)
    nl = np.array([phi_nonlinear(p, prm) for p, prm in zip(p_er, params)])
    lin = np.array([phi_linear(p, prm) for p, prm in zip(p_er, params)])
    ps = np.array([psi(p, prm) for p, prm in zip(p_er, params)])
    return {
        "p_er": p_er,
        "nonlinear": nl,
        "linear": lin,
        "psi": ps,
        "total_nonlinear": float(nl.sum()),
        "total_linear": float(lin.sum()),
        "total_psi": float(ps.sum()),
    }
