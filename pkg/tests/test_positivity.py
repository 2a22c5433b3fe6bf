import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from vbma import positivity as P
from vbma.errors import GridMismatch, RankNotTwo


# -- brute-force Grassmann oracle ------------------------------------------------
# 1-forms on a surface: 0 = dz1, 1 = dz2, 2 = dzb1, 3 = dzb2.  A form is a
# dict {tuple of generator indices (unsorted allowed): r x r matrix}.


def _canon(word):
    if len(set(word)) < len(word):
        return 0, None
    inversions = sum(1 for i, j in itertools.combinations(range(len(word)), 2) if word[i] > word[j])
    return (-1) ** inversions, tuple(sorted(word))


def _mul(X, Y):
    out = {}
    for kx, cx in X.items():
        for ky, cy in Y.items():
            sign, key = _canon(kx + ky)
            if sign:
                out[key] = out.get(key, 0) + sign * (cx @ cy)
    return out


def _curvature_form(F):
    # i Theta = sum M_kl i dz_k ^ dzb_l with M_11 = A, M_12 = B, M_21 = B^H, M_22 = C
    M = {(0, 0): F.A, (0, 1): F.B, (1, 0): F.B.conj().T, (1, 1): F.C}
    return {(k, 2 + l): 1j * X for (k, l), X in M.items()}


def _vol_coefficient(X, r):
    # vol = (i dz1 ^ dzb1) ^ (i dz2 ^ dzb2) = -dz1 dzb1 dz2 dzb2 ; in sorted order (0,1,2,3)
    sign, key = _canon((0, 2, 1, 3))
    return X.get(key, np.zeros((r, r))) / (-sign)


def oracle_wedge_square(F):
    X = _curvature_form(F)
    return _vol_coefficient(_mul(X, X), F.r)


def oracle_ma_value(F, alpha, beta):
    """i tr(a^H ^ a ^ i Theta + a^H ^ i Theta ^ a) / vol for a = alpha dzb1 + beta dzb2."""
    a = {(2,): alpha, (3,): beta}
    ah = {(0,): alpha.conj().T, (1,): beta.conj().T}
    X = _curvature_form(F)
    top = _mul(_mul(ah, a), X)
    for k, v in _mul(_mul(ah, X), a).items():
        top[k] = top.get(k, 0) + v
    return 1j * np.trace(_vol_coefficient(top, F.r))


def oracle_ma_matrix(F):
    r = F.r
    nvar = 2 * r * r

    def unpack(z):
        return z[: r * r].reshape(r, r), z[r * r:].reshape(r, r)

    def q(z):
        return oracle_ma_value(F, *unpack(z))

    basis = np.eye(nvar)
    S = np.zeros((nvar, nvar), dtype=complex)
    for i in range(nvar):
        for j in range(nvar):
            # polarisation of the Hermitian form
            e, f = basis[i], basis[j]
            S[i, j] = (q(e + f) - q(e - f) - 1j * q(e + 1j * f) + 1j * q(e - 1j * f)) / 4
    return S


# -- random instances -------------------------------------------------------------


def random_hermitian(rng, r, scale=1.0):
    X = rng.normal(size=(r, r)) + 1j * rng.normal(size=(r, r))
    return scale * (X + X.conj().T) / 2


def random_form(rng, r=2, shift=0.0):
    A = random_hermitian(rng, r) + shift * np.eye(r)
    C = random_hermitian(rng, r) + shift * np.eye(r)
    B = rng.normal(size=(r, r)) + 1j * rng.normal(size=(r, r))
    return P.EndoForm11(A, B, C)


def random_nakano_positive(rng, r=2):
    X = rng.normal(size=(2 * r, 2 * r)) + 1j * rng.normal(size=(2 * r, 2 * r))
    T = X @ X.conj().T + 1e-3 * np.eye(2 * r)
    return P.EndoForm11(T[:r, :r], T[r:, :r], T[r:, r:])


def cp2_blocks():
    eye = np.eye(2)
    E = lambda i, j: np.outer(eye[i], eye[j])
    # K[a,b,k,l] = delta_kl delta_ab + delta_ak delta_bl at the origin
    return P.EndoForm11(eye + E(0, 0), E(0, 1), eye + E(1, 1))


# -- tests --------------------------------------------------------------------------


def test_wedge_square_matches_oracle(rng):
    for r in (1, 2, 3):
        for _ in range(10):
            F = random_form(rng, r)
            assert np.max(np.abs(P.wedge_square(F) - oracle_wedge_square(F))) < 1e-12


@pytest.mark.parametrize("r", [1, 2, 3])
def test_ma_form_matches_oracle_spectrum(r, rng):
    for _ in range(3):
        F = random_form(rng, r, shift=0.5)
        S = oracle_ma_matrix(F)
        assert np.allclose(S, S.conj().T, atol=1e-12)
        ours = np.linalg.eigvalsh(P.ma_form(F))
        ref = np.linalg.eigvalsh(S)
        assert np.allclose(ours, ref, atol=1e-11)


def test_scalar_forms():
    F = P.EndoForm11.scalar(2.0, 3.0, r=2)
    assert np.allclose(P.wedge_square(F), 12 * np.eye(2))
    assert P.nakano_check(F).margin == pytest.approx(2.0)
    assert P.griffiths_check(F).margin == pytest.approx(2.0)
    assert P.ma_check(F).positive


def test_line_bundle_ma_is_twice_nakano():
    # rank one: T' = T^T, so the MA form is 2 z^H T z with z = (beta, -alpha)
    F = P.EndoForm11(np.array([[2.0]]), np.array([[0.5 + 0.5j]]), np.array([[3.0]]))
    w = np.linalg.eigvalsh(P.ma_form(F))
    assert np.allclose(w, 2 * np.linalg.eigvalsh(P.nakano_matrix(F)))


def test_ma_value_matches_trace_expansion(rng):
    # expansion in terms of a^H = alpha dz1 + beta dz2
    for _ in range(10):
        F = random_form(rng, 2)
        A, B, C = F.A, F.B, F.C
        al = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        be = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        H = lambda X: X.conj().T
        expansion = np.trace(al @ C @ H(al) + al @ H(al) @ C + be @ A @ H(be) + be @ H(be) @ A
                             - al @ H(B) @ H(be) - al @ H(be) @ H(B) - be @ B @ H(al) - be @ H(al) @ B)
        assert oracle_ma_value(F, H(al), H(be)) == pytest.approx(expansion, abs=1e-10)


def test_cp2_verdicts():
    F = cp2_blocks()
    assert np.allclose(P.wedge_square(F), 3 * np.eye(2), atol=1e-15)
    assert P.ma_check(F).positive
    assert P.ma_check(F).margin == pytest.approx(3 - np.sqrt(3), abs=1e-12)
    nak = P.nakano_check(F)
    assert not nak.positive
    assert abs(nak.margin) < 1e-15
    assert P.griffiths_check(F).margin == pytest.approx(1.0, abs=1e-9)


def partial_transpose_matrix(F):
    return np.block([[F.A, F.B], [F.B.conj().T, F.C]])


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(seed=st.integers(0, 2**32 - 1))
def test_nakano_and_dual_imply_ma(seed):
    # the MA form is x^H T x + y T' y^H, so positivity of both T and T' suffices
    F = random_nakano_positive(np.random.default_rng(seed))
    assume(np.linalg.eigvalsh(partial_transpose_matrix(F))[0] > 0)
    assert P.ma_check(F).positive


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(0.0, 3.0))
def test_ma_implies_griffiths(seed, shift):
    F = random_form(np.random.default_rng(seed), 2, shift=shift)
    if P.ma_check(F).positive:
        assert P.griffiths_check(F, samples=64).margin > 0


def test_nakano_alone_does_not_imply_ma():
    # T is positive definite, T' is not; the MA form goes negative
    F = P.EndoForm11(np.diag([0.1, 1.0]), np.array([[0, 0.5], [0, 0]]), np.diag([1.0, 0.1]))
    assert P.nakano_check(F).margin == pytest.approx(0.1)
    assert np.linalg.eigvalsh(partial_transpose_matrix(F))[0] < 0
    ma = P.ma_check(F)
    assert not ma.positive
    assert np.linalg.eigvalsh(oracle_ma_matrix(F))[0] == pytest.approx(ma.margin, abs=1e-12)
    assert P.griffiths_check(F).positive


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_verdicts_unitarily_invariant(seed):
    rng = np.random.default_rng(seed)
    F = random_form(rng, 2, shift=1.0)
    g, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    G = F.conjugated(g)
    assert P.ma_check(G).margin == pytest.approx(P.ma_check(F).margin, abs=1e-10)
    assert P.nakano_check(G).margin == pytest.approx(P.nakano_check(F).margin, abs=1e-10)
    assert P.chern_gap(G) == pytest.approx(P.chern_gap(F), abs=1e-9)
    assert np.allclose(P.wedge_square(G), g @ P.wedge_square(F) @ g.conj().T, atol=1e-10)


def test_griffiths_witness_and_sign(rng):
    F = P.EndoForm11(np.diag([1.0, -0.5]), np.zeros((2, 2)), np.eye(2))
    v = P.griffiths_check(F)
    assert not v.positive and v.margin == pytest.approx(-0.5, abs=1e-8)
    assert abs(abs(v.witness[1]) - 1) < 1e-4
    with pytest.raises(ValueError):
        P.griffiths_check(F, samples=10)


def test_griffiths_inconclusive_near_zero():
    F = P.EndoForm11(np.diag([1.0, 0.0]), np.zeros((2, 2)), np.eye(2))
    v = P.griffiths_check(F)
    assert not v.conclusive
    assert v.to_json()["inconclusive"] is True


def test_chern_gap_examples():
    # projectively flat: scalar blocks
    assert P.chern_gap(P.EndoForm11.scalar(1.3, 0.7, r=2)) == pytest.approx(0.0, abs=1e-14)
    # split F = diag(a, b) omega with omega = i dz1 dzb1 + i dz2 dzb2: 2 (a - b)^2 in vol units
    a, b = 2.0, 0.0
    F = P.EndoForm11(np.diag([a, b]), np.zeros((2, 2)), np.diag([a, b]))
    assert P.chern_gap(F) == pytest.approx(2 * (a - b) ** 2)
    # tangent bundle of CP^2: c1^2 - 4 c2 = 9 - 12 per unit of omega^2/2
    assert P.chern_gap(cp2_blocks()) == pytest.approx(-6.0)
    with pytest.raises(RankNotTwo):
        P.chern_gap(P.EndoForm11.scalar(1.0, r=3))


def test_chern_gap_matches_characteristic_forms(rng):
    # c1 = tr F, c2 = det-type term; 2 tr(F^2) - (tr F)^2 via the Grassmann oracle
    for _ in range(20):
        F = random_form(rng, 2)
        tr2 = np.trace(oracle_wedge_square(F)).real
        trF = P.EndoForm11(np.array([[np.trace(F.A)]]), np.array([[np.trace(F.B)]]),
                           np.array([[np.trace(F.C)]]))
        sq = oracle_wedge_square(trF)[0, 0].real
        assert P.chern_gap(F) == pytest.approx(2 * tr2 - sq, abs=1e-10)


def test_vbma_residual():
    F = cp2_blocks()
    assert P.vbma_residual(F, 3.0) < 1e-15
    assert P.vbma_residual(F, 2.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        P.vbma_residual(F, 0.0)


def test_endo_form_validation_and_json(rng):
    with pytest.raises(ValueError):
        P.EndoForm11(np.array([[1, 1j], [0, 1]]), np.zeros((2, 2)), np.eye(2))
    with pytest.raises(ValueError):
        P.EndoForm11(np.eye(2), np.zeros((3, 3)), np.eye(2))
    F = random_form(rng, 2)
    G = P.EndoForm11.from_json(F.to_json())
    assert np.array_equal(F.A, G.A) and np.array_equal(F.B, G.B) and np.array_equal(F.C, G.C)


def test_wedge_square_field_batches(rng):
    forms = [random_form(rng, 2) for _ in range(5)]
    A = np.stack([f.A for f in forms])
    B = np.stack([f.B for f in forms])
    C = np.stack([f.C for f in forms])
    batched = P.wedge_square_field(A, B, C)
    for f, M in zip(forms, batched):
        assert np.allclose(M, P.wedge_square(f))


def test_moment_map_shape_checks(rng):
    H = np.zeros((4, 2, 2))
    with pytest.raises(GridMismatch):
        P.moment_map_value(H, H, H, np.zeros((3, 2, 2)), np.ones(4), np.ones(4))
    with pytest.raises(GridMismatch):
        P.moment_map_value(H, H, H, H, np.ones(3), np.ones(4))
    with pytest.raises(ValueError):
        P.moment_map_value(H, H, H, H, np.ones(4), np.ones(4), W=0)
