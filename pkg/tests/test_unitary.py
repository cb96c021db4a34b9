import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ktinv.unitary import (
    Monomial, SpectrumNearMinusOne, StepTooLarge, UnitaryLoop, UnitaryPath, WindingBlock,
    bott, bott_homotopy_scan, bott_loop, check_unitary, conjugation_sandwich,
    conjugation_tail, eigenphases, exp_path, haar_unitary, make_winding_pair, path_product,
    phase_deformation, projection_loop, rotation_number, rotation_report, winding_norm_check,
    zeta_path,
)

from oracles import bott_eig, rotation_eig


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (a + a.conj().T) / 2


def expm_h(h, t=1.0):
    lam, V = np.linalg.eigh(h)
    return (V * np.exp(2j * np.pi * t * lam)) @ V.conj().T


# --- eigenphases and monomials ---------------------------------------------------

def test_eigenphases_match_numpy():
    rng = np.random.default_rng(1)
    for n in (1, 3, 7):
        U = haar_unitary(n, rng)
        got = np.sort(eigenphases(U))
        ref = np.sort(np.angle(np.linalg.eigvals(U)))
        assert np.allclose(got, ref, atol=1e-10)


def test_eigenphases_stack_and_diagonal():
    rng = np.random.default_rng(2)
    stack = np.stack([haar_unitary(4, rng) for _ in range(5)] + [np.diag(np.exp(1j * np.arange(4)))])
    ph = eigenphases(stack)
    assert ph.shape == (6, 4)
    assert np.allclose(ph[-1], np.angle(np.exp(1j * np.arange(4))))


def test_eigenphases_gap():
    W = np.diag([1.0, np.exp(1j * 3.1)])
    with pytest.raises(SpectrumNearMinusOne) as exc:
        eigenphases(W, gap=0.1)
    assert exc.value.gap < 0.1
    eigenphases(W, gap=0.01)


def test_exact_minus_one_is_reported():
    W = np.array([[0, 1], [1, 0]], dtype=complex)  # eigenvalues +1, -1
    with pytest.raises(SpectrumNearMinusOne):
        eigenphases(W, gap=1e-3)


def test_check_unitary():
    check_unitary(np.eye(3))
    with pytest.raises(ValueError):
        check_unitary(2 * np.eye(2))
    with pytest.raises(ValueError):
        check_unitary(np.ones((2, 3)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_monomial_algebra_matches_dense(n, seed):
    rng = np.random.default_rng(seed)
    def rand_mono():
        return Monomial(rng.permutation(n), np.exp(1j * rng.uniform(-np.pi, np.pi, n)))
    a, b = rand_mono(), rand_mono()
    assert np.allclose((a @ b).dense(), a.dense() @ b.dense())
    assert np.allclose(a.adjoint().dense(), a.dense().conj().T)
    got = np.sort(a.eigenphases())
    ref = np.sort(np.angle(np.linalg.eigvals(a.dense())))
    # phases at exactly +-pi may land on either end
    got = np.where(got > np.pi - 1e-9, got - 2 * np.pi, got)
    ref = np.where(ref > np.pi - 1e-9, ref - 2 * np.pi, ref)
    assert np.allclose(np.sort(got), np.sort(ref), atol=1e-8)
    back = Monomial.from_dense(a.dense())
    assert np.allclose(back.dense(), a.dense())


def test_from_dense_rejects_full_matrix():
    assert Monomial.from_dense(np.ones((2, 2))) is None


# --- Bott element ----------------------------------------------------------------

def test_commuting_pair_is_zero():
    rng = np.random.default_rng(3)
    Q = haar_unitary(5, rng)
    u = Q @ np.diag(np.exp(1j * rng.uniform(-3, 3, 5))) @ Q.conj().T
    v = Q @ np.diag(np.exp(1j * rng.uniform(-3, 3, 5))) @ Q.conj().T
    b = bott(u, v)
    assert b.rounded == 0 and b.residual < 1e-10


@pytest.mark.parametrize("blocks,expected", [
    ([{"M": 8, "N": 1, "L": 1}], 1),
    ([{"M": 8, "N": 0}], 0),
    ([{"M": 8, "N": -1, "L": -1}], -1),
    ([{"M": 16, "N": 2, "L": 1}, {"M": 16, "N": 1, "L": -1}], 3),
    ([{"M": 64, "N": 16}], 16),
])
def test_winding_pair_values(blocks, expected):
    w, z = make_winding_pair(blocks, grid=256)
    res = bott_loop(w, z)
    assert np.all(res.rounded == expected)
    assert res.max_residual < 1e-9
    # one sample through the plain matrix route
    b = bott(w, z.frame(37))
    assert b.rounded == expected


def test_swap_negates():
    w, z = make_winding_pair([{"M": 12, "N": 2}], grid=64)
    v = z.frame(5)
    assert bott(v, w).rounded == -bott(w, v).rounded == -2


def test_dense_route_matches_monomial_and_oracle():
    rng = np.random.default_rng(4)
    w, z = make_winding_pair([{"M": 10, "N": 2}, {"M": 6, "N": -1, "L": -1}], grid=32)
    Q = haar_unitary(16, rng)
    for k in (0, 7, 19):
        v = z.frame(k)
        u2, v2 = Q @ w @ Q.conj().T, Q @ v @ Q.conj().T
        mono = bott(w, v)
        dense = bott(u2, v2)
        assert Monomial.from_dense(u2, 1e-12) is None
        assert dense.rounded == mono.rounded == 1
        assert abs(dense.raw - mono.raw) < 1e-8
        assert abs(dense.raw - bott_eig(u2, v2)) < 1e-8


def test_dense_loop_matches_monomial_loop():
    rng = np.random.default_rng(5)
    w, z = make_winding_pair([{"M": 8, "N": 1}], grid=16)
    Q = haar_unitary(8, rng)
    frames = Q[None] @ z.frames(np.arange(17)) @ Q.conj().T[None]
    dense = UnitaryLoop.from_frames(frames)
    assert dense.check()[0]
    res = bott_loop(Q @ w @ Q.conj().T, dense)
    assert np.all(res.rounded == 1)
    assert np.allclose(res.raw, bott_loop(w, z).raw, atol=1e-8)


def test_bott_gap_failure():
    u = np.diag([1, np.exp(1j * 3.13)])
    v = np.array([[0, 1], [1, 0]], dtype=complex)
    with pytest.raises(SpectrumNearMinusOne):
        bott(u, v, gap=0.1)


def test_bott_shape_mismatch():
    with pytest.raises(ValueError):
        bott(np.eye(2), np.eye(3))


def test_winding_block_validation():
    with pytest.raises(ValueError):
        WindingBlock(1, 0)
    with pytest.raises(ValueError):
        WindingBlock(4, 5)
    with pytest.raises(ValueError):
        WindingBlock(4, 1, 2)
    assert WindingBlock(4, 1).to_json() == {"M": 4, "N": 1, "L": 1}


def test_loop_is_closed_and_unitary():
    _, z = make_winding_pair([{"M": 6, "N": 1, "L": -1}], grid=100)
    ok, worst, closure = z.check()
    assert ok and worst < 1e-12 and closure < 1e-12


def test_norm_check():
    assert winding_norm_check([{"M": 8, "N": 0}]).lhs == 0.0
    for M in (8, 64):
        chk = winding_norm_check([{"M": M, "N": 1}], grid=512)
        assert chk.passed
        assert abs(chk.lhs - abs(np.exp(2j * np.pi / M) - 1)) < 1e-12


def test_norm_check_dense_path_agrees():
    # mixed block sizes still share one permutation; compare against a direct evaluation
    blocks = [{"M": 8, "N": 2}, {"M": 12, "N": -1}]
    chk = winding_norm_check(blocks, grid=64)
    w, z = make_winding_pair(blocks, grid=64)
    F = z.frames()
    direct = max(np.linalg.norm(w @ f @ w.conj().T - f, 2) for f in F)
    assert abs(chk.lhs - direct) < 1e-10
    assert chk.passed


# --- rotation numbers --------------------------------------------------------------

def test_projection_loop_gives_normalized_trace():
    rng = np.random.default_rng(6)
    Q = haar_unitary(5, rng)
    p = Q[:, :2] @ Q[:, :2].conj().T
    assert abs(rotation_number(projection_loop(p, 512)) - 2 / 5) < 1e-10


def test_constant_path_is_zero():
    rng = np.random.default_rng(7)
    U = haar_unitary(4, rng)
    assert abs(rotation_number(UnitaryPath(np.stack([U] * 10)))) < 1e-15


def test_exp_path_gives_trace():
    rng = np.random.default_rng(8)
    h = random_hermitian(rng, 4, 0.7)
    path = exp_path(h, 2048, start=haar_unitary(4, rng))
    assert abs(rotation_number(path) - np.trace(h).real / 4) < 1e-10


def test_integer_spectrum_loop():
    rng = np.random.default_rng(9)
    Q = haar_unitary(3, rng)
    h = Q @ np.diag([1.0, -2.0, 4.0]) @ Q.conj().T
    path = exp_path(h, 4096)
    assert np.allclose(path.start, path.end, atol=1e-9)
    assert abs(rotation_number(path) - 1.0) < 1e-10


def test_small_contractible_loop():
    rng = np.random.default_rng(10)
    U = haar_unitary(4, rng)
    a, b = random_hermitian(rng, 4, 0.05), random_hermitian(rng, 4, 0.05)
    t = np.linspace(0, 1, 401)
    frames = np.stack([expm_h(np.cos(2 * np.pi * s) * a + np.sin(2 * np.pi * s) * b) @ U for s in t])
    frames[-1] = frames[0]
    assert abs(rotation_number(UnitaryPath(frames, tol=1e-9))) < 1e-10


def test_concatenation_product_and_adjoint():
    rng = np.random.default_rng(11)
    h1, h2 = random_hermitian(rng, 3, 0.5), random_hermitian(rng, 3, 0.5)
    p = exp_path(h1, 1024)
    q = exp_path(h2, 1024, start=p.end)
    r1, r2 = rotation_number(p), rotation_number(q)
    assert abs(rotation_number(p.then(q)) - (r1 + r2)) < 1e-10
    q0 = exp_path(h2, 1024)
    assert abs(rotation_number(path_product(p, q0)) - (r1 + r2)) < 1e-9
    assert abs(rotation_number(p.adjoint()) + r1) < 1e-10
    assert abs(rotation_number(p.reversed()) + r1) < 1e-10
    with pytest.raises(ValueError):
        p.then(exp_path(h2, 1024, start=haar_unitary(3, rng)))
    with pytest.raises(ValueError):
        path_product(p, exp_path(h2, 512))


def test_matches_eigenvalue_oracle():
    rng = np.random.default_rng(12)
    a, b = random_hermitian(rng, 4, 0.4), random_hermitian(rng, 4, 0.4)
    V = haar_unitary(4, rng)
    t = np.linspace(0, 1, 801)
    frames = np.stack([expm_h(a, s) @ V @ expm_h(b, s * s) for s in t])
    path = UnitaryPath(frames, tol=1e-9)
    assert abs(rotation_number(path) - rotation_eig(frames)) < 1e-9
    assert abs(rotation_number(path) - (np.trace(a) + np.trace(b)).real / 4) < 1e-9


def test_grid_refinement_is_stable():
    rng = np.random.default_rng(13)
    a, b = random_hermitian(rng, 3, 0.6), random_hermitian(rng, 3, 0.6)
    def path(n):
        t = np.linspace(0, 1, n + 1)
        return UnitaryPath(np.stack([expm_h(a, np.sin(s)) @ expm_h(b, s) for s in t]), tol=1e-9)
    coarse, fine = rotation_report(path(256)), rotation_report(path(4096))
    assert abs(coarse.value - fine.value) < coarse.step_bound
    assert fine.max_step_angle < coarse.max_step_angle


def test_step_too_large():
    frames = np.stack([np.eye(2), -np.eye(2)]).astype(complex)
    with pytest.raises(StepTooLarge):
        UnitaryPath(frames)
    path = UnitaryPath(frames, step_tol=10)
    with pytest.raises(StepTooLarge):
        rotation_report(path)
    quarter = np.stack([np.eye(1), np.exp(1j * 1.8) * np.eye(1)])
    with pytest.raises(StepTooLarge) as exc:
        rotation_report(UnitaryPath(quarter, step_tol=10))
    assert exc.value.angle == pytest.approx(1.8)


def test_path_validation():
    with pytest.raises(ValueError):
        UnitaryPath(np.eye(2)[None])
    with pytest.raises(ValueError):
        UnitaryPath(np.stack([np.eye(2), 2 * np.eye(2)]))
    with pytest.raises(ValueError):
        exp_path(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        projection_loop(np.diag([0.5, 1.0]))


# --- amplified paths ---------------------------------------------------------------

def test_conjugation_sandwich_has_no_rotation():
    rng = np.random.default_rng(14)
    for n in (1, 3, 6):
        u, W = haar_unitary(n, rng), haar_unitary(n, rng)
        path = conjugation_sandwich(u, W, 4096)
        assert path.base_dim == n
        assert np.allclose(path.start[:n, :n], u) and np.allclose(path.start[n:, n:], np.eye(n))
        assert np.allclose(path.end[:n, :n], W @ u @ W.conj().T, atol=1e-10)
        assert abs(rotation_number(path)) <= 1e-6


def test_zeta_path():
    rng = np.random.default_rng(15)
    n = 3
    u_n, z = haar_unitary(n, rng), haar_unitary(n, rng)
    h = random_hermitian(rng, n, 0.8)
    path = zeta_path(u_n, z, h, 4096)
    assert np.allclose(path.start[:n, :n], z, atol=1e-10)
    assert np.allclose(path.end[:n, :n], expm_h(h) @ u_n @ z @ u_n.conj().T, atol=1e-9)
    assert abs(rotation_number(path) - np.trace(h).real / n) < 1e-8
    flat = zeta_path(u_n, z, np.zeros((n, n)), 1024)
    assert abs(rotation_number(flat)) < 1e-8
    ident = zeta_path(np.eye(n), z, h, 1024)
    assert abs(rotation_number(ident) - np.trace(h).real / n) < 1e-8


def test_conjugation_tail_with_twist():
    rng = np.random.default_rng(16)
    n = 3
    u = haar_unitary(n, rng)
    v = exp_path(random_hermitian(rng, n, 0.5), 2048)
    tail = conjugation_tail(u, v.frames)
    assert abs(rotation_number(tail)) < 1e-9
    v1 = np.eye(2 * n, dtype=complex)
    v1[:n, :n] = v.end
    twisted = tail.with_twist(v1)
    assert twisted.boundary["twist"] is v1 or np.allclose(twisted.boundary["twist"], v1)
    with pytest.raises(ValueError):
        tail.with_twist(np.eye(2 * n))


# --- homotopy scans ----------------------------------------------------------------

def test_phase_deformation_keeps_value():
    rng = np.random.default_rng(17)
    w, z = make_winding_pair([{"M": 12, "N": 2}], grid=64)
    pairs = phase_deformation(w, z.frame(9), 25, rng, turns=2.0)
    assert bott_homotopy_scan(pairs) == [2] * 25


def test_scan_through_minus_one():
    v = np.array([[0, 1], [1, 0]], dtype=complex)
    pairs = [(np.diag([1, np.exp(1j * a)]), v) for a in np.linspace(0, np.pi, 11)]
    with pytest.raises(SpectrumNearMinusOne) as exc:
        bott_homotopy_scan(pairs, gap=0.1)
    assert exc.value.index == 10


def test_scan_detects_jump():
    w0, z0 = make_winding_pair([{"M": 8, "N": 0}], grid=8)
    w1, z1 = make_winding_pair([{"M": 8, "N": 1}], grid=8)
    pairs = [(w0, z0.frame(0)), (w1, z1.frame(0))]
    with pytest.raises(ValueError, match="changes at pair 1"):
        bott_homotopy_scan(pairs)
    assert bott_homotopy_scan(pairs, require_constant=False) == [0, 1]
