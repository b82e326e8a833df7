"""Tests for the dense SDP solver and its complex-to-real embedding."""

import numpy as np
import pytest

from swiptsec import sdp


def rand_hermitian(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (A + A.conj().T)


def test_svec_inner_product_identity():
    rng = np.random.default_rng(0)
    for m in (1, 2, 5):
        X = rng.standard_normal((m, m))
        X = X + X.T
        Y = rng.standard_normal((m, m))
        Y = Y + Y.T
        assert sdp.svec(X) @ sdp.svec(Y) == pytest.approx(np.trace(X @ Y),
                                                          rel=1e-12)
        np.testing.assert_allclose(sdp.smat(sdp.svec(X)), X, atol=1e-14)


def test_symkron_implements_congruence():
    rng = np.random.default_rng(1)
    m = 4
    W = rng.standard_normal((m, m))
    W = W + W.T
    Z = rng.standard_normal((m, m))
    Z = Z + Z.T
    out = sdp.smat(sdp.symkron(W) @ sdp.svec(Z))
    np.testing.assert_allclose(out, W @ Z @ W, atol=1e-10)


def test_embedding_is_star_homomorphism():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    np.testing.assert_allclose(sdp.embed_complex(A @ B),
                               sdp.embed_complex(A) @ sdp.embed_complex(B),
                               atol=1e-12)
    H = 0.5 * (A + A.conj().T)
    E = sdp.embed_hermitian(H)
    np.testing.assert_allclose(E, E.T, atol=1e-14)
    # eigenvalues duplicate, trace doubles
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(E)),
                               np.sort(np.repeat(np.linalg.eigvalsh(H), 2)),
                               atol=1e-10)
    np.testing.assert_allclose(sdp.recover_hermitian(E), H, atol=1e-14)


def test_embed_hermitian_rejects_non_hermitian():
    with pytest.raises(sdp.ValidationError):
        sdp.embed_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def min_eig_problem(C):
    """min Tr(C X) s.t. Tr(X) = 1, X >= 0 — optimum is lambda_min(C)."""
    n = C.shape[0]
    return sdp.SdpProblem(
        blocks=[("X", n)], sense="min", obj_blocks={"X": C},
        constraints=[sdp.LinearConstraint("trace", "==", 1.0,
                                          {"X": np.eye(n)})])


def test_min_eigenvalue_oracle_small():
    rng = np.random.default_rng(3)
    for n in (2, 3, 6):
        C = rand_hermitian(rng, n)
        sol = sdp.solve(min_eig_problem(C))
        assert sol.status == "optimal"
        lam = np.linalg.eigvalsh(C)[0]
        assert sol.obj == pytest.approx(lam, abs=1e-7)
        X = sol.primal_blocks["X"]
        assert np.trace(X).real == pytest.approx(1.0, abs=1e-7)
        assert np.linalg.eigvalsh(X)[0] >= -1e-8


def test_max_sense_gives_max_eigenvalue():
    rng = np.random.default_rng(4)
    C = rand_hermitian(rng, 4)
    prob = min_eig_problem(C)
    prob.sense = "max"
    sol = sdp.solve(prob)
    assert sol.obj == pytest.approx(np.linalg.eigvalsh(C)[-1], abs=1e-7)


def test_scalar_lp_with_free_and_nonneg_variables():
    # min t subject to t >= 3 (t free); u >= 0 enters a slack row
    prob = sdp.SdpProblem(
        blocks=[("X", 1)], scalars=[("t", True), ("u", False)], sense="min",
        obj_scalars={"t": 1.0},
        constraints=[
            sdp.LinearConstraint("lb", ">=", 3.0, {}, {"t": 1.0}),
            sdp.LinearConstraint("cap", "<=", 5.0, {"X": np.eye(1)}, {"u": 1.0}),
        ])
    sol = sdp.solve(prob)
    assert sol.status == "optimal"
    assert sol.primal_scalars["t"] == pytest.approx(3.0, abs=1e-7)


def test_lmi_constraint_caps_quadratic_form():
    # max Tr(X) with c I - P^H X P >= 0 forces the compressed X below c
    rng = np.random.default_rng(5)
    P = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    c = 2.0
    prob = sdp.SdpProblem(
        blocks=[("X", 3)], sense="max", obj_blocks={"X": np.eye(3)},
        constraints=[sdp.LinearConstraint("pw", "<=", 10.0, {"X": np.eye(3)})],
        lmis=[sdp.LmiConstraint("cap", 2, c * np.eye(2),
                                [sdp.LmiTerm("X", P, -1.0)])])
    sol = sdp.solve(prob)
    assert sol.status == "optimal"
    X = sol.primal_blocks["X"]
    S = c * np.eye(2) - P.conj().T @ X @ P
    assert np.linalg.eigvalsh(0.5 * (S + S.conj().T))[0] >= -1e-6


def test_infeasible_detected():
    prob = sdp.SdpProblem(
        blocks=[("X", 2)], sense="min", obj_blocks={"X": np.eye(2)},
        constraints=[
            sdp.LinearConstraint("a", "<=", 1.0, {"X": np.eye(2)}),
            sdp.LinearConstraint("b", ">=", 5.0, {"X": np.eye(2)}),
        ])
    sol = sdp.solve(prob)
    assert sol.status == "infeasible"


def test_unbounded_detected():
    prob = sdp.SdpProblem(
        blocks=[("X", 2)], sense="max", obj_blocks={"X": np.eye(2)},
        constraints=[sdp.LinearConstraint("lb", ">=", 1.0, {"X": np.eye(2)})])
    sol = sdp.solve(prob)
    assert sol.status in ("unbounded", "max-iter")
    assert sol.status != "optimal"


def test_compiled_template_objective_reuse():
    rng = np.random.default_rng(6)
    C1 = rand_hermitian(rng, 3)
    C2 = rand_hermitian(rng, 3)
    prob = min_eig_problem(C1)
    cp = sdp.compile_problem(prob)
    s1 = sdp.solve(prob, compiled=cp)
    sdp.set_objective(cp, obj_blocks={"X": C2}, sense="min")
    s2 = sdp.solve(prob, compiled=cp)
    assert s1.obj == pytest.approx(np.linalg.eigvalsh(C1)[0], abs=1e-7)
    assert s2.obj == pytest.approx(np.linalg.eigvalsh(C2)[0], abs=1e-7)


def test_dual_values_satisfy_eigenvector_certificate():
    # for min Tr(CX), Tr(X)=1 the dual of the trace row is -lambda_min and
    # the slack S = C - y I is PSD with S X = 0
    rng = np.random.default_rng(7)
    C = rand_hermitian(rng, 4)
    sol = sdp.solve(min_eig_problem(C))
    y = sol.dual_values["trace"]
    lam = np.linalg.eigvalsh(C)[0]
    assert abs(abs(y) - abs(lam)) < 1e-6
    # the dual slack must match C - lambda_min I up to solver tolerance
    S = sol.dual_matrices["X"]
    assert np.linalg.norm(S - (C - lam * np.eye(4))) < 1e-5


def test_dump_problem_triplet_format(tmp_path):
    prob = min_eig_problem(np.eye(2))
    cp = sdp.compile_problem(prob)
    path = tmp_path / "prob.txt"
    sdp.dump_problem(cp, path)
    lines = path.read_text().strip().splitlines()
    assert lines
    kinds = {ln.split()[0] for ln in lines}
    assert kinds <= {"A", "b", "c"}
    assert any(ln.startswith("b ") for ln in lines)


def test_validation_rejects_malformed_problems():
    with pytest.raises(sdp.ValidationError):
        sdp.SdpProblem(blocks=[("X", 2)], sense="sideways",
                       constraints=[sdp.LinearConstraint(
                           "a", "<=", 1.0, {"X": np.eye(2)})]).validate()
    with pytest.raises(sdp.ValidationError):
        sdp.SdpProblem(blocks=[("X", 2)]).validate()   # no constraints
    with pytest.raises(sdp.ValidationError):
        sdp.SdpProblem(blocks=[("X", 2)],
                       constraints=[sdp.LinearConstraint(
                           "a", "<=", 1.0, {"X": np.eye(3)})]).validate()
