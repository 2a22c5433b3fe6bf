from fractions import Fraction

import numpy as np
import pytest

from vbma import positivity as P
from vbma import vortex


def sup(x):
    return float(np.max(np.abs(x)))


def test_reduced_residuals_vanish(sol32):
    r1, r2 = vortex.reduced_system_residuals(sol32)
    assert sup(r1.values) < 1e-6 and sup(r2.values) < 1e-6
    # the f2 relation is their difference
    cfg, p = sol32.cfg, sol32.phi2
    diff = 2 * (sol32.F_f2 + cfg.r1 * sol32.omega) * (1 - p) - sol32.F_h * (2 * cfg.r2 + p)
    assert sup(diff - (r2.values - r1.values) / 2) < 1e-12
    assert sup(diff) < 2e-6


def test_perturbed_f2_breaks_second_equation(sol32):
    _, y = sol32.grid.xy
    _, r2 = vortex.reduced_system_residuals(sol32.perturbed(0.1 * np.cos(2 * np.pi * y)))
    assert sup(r2.values) > 1e-3


def test_griffiths_margins_positive(sol32):
    for w in vortex.cp1_samples():
        m = vortex.griffiths_margins(sol32, w)
        assert m.min_margin > 0
        assert np.all(m.fs_gap >= 2 * sol32.cfg.r2 + 1)


def test_mixed_margin_lower_bound(sol32):
    # the |v1 v2|^2 coefficient is at least 2 G (1-p)^2 / (I II)
    m = vortex.griffiths_margins(sol32)
    cfg, p = sol32.cfg, sol32.phi2
    bound = 2 * sol32.G * (1 - p) ** 2 / ((2 * cfg.r2 + p) * (2 * cfg.r2 + 2 - p))
    assert np.all(m.mixed >= bound - 1e-9)


def test_margins_at_theta_zero(sol32):
    # grid node (32, 32) is the zero of the section for tau = i, n = 64
    k = (32, 32)
    cfg = sol32.cfg
    assert sol32.phi2[k] < 1e-20
    m = vortex.griffiths_margins(sol32)
    expected_lower = (cfg.mu * sol32.omega[k] + sol32.G[k]) / (2 * (2 * cfg.r2 + 2))
    assert m.lower[k] == pytest.approx(expected_lower, rel=1e-8)
    assert m.upper[k] == pytest.approx((cfg.mu * sol32.omega[k] + sol32.G[k]) / (4 * cfg.r2), rel=1e-8)


def test_chern_gap_nonpositive(sol32):
    for w in vortex.cp1_samples():
        assert np.max(vortex.vortex_chern_gap(sol32, w)) <= 1e-8


def test_chern_gap_special_blocks():
    # projectively flat: equal diagonal blocks, no off-diagonal
    assert vortex.split_chern_gap(0.0, 0.0, 0.0) == 0.0
    # split: F11 = 2 omega, F22 = 0 with omega = omega_Sigma + omega_FS
    assert vortex.split_chern_gap(2.0, 2.0, 0.0) > 0


def test_assembled_blocks_agree_with_reduction(sol32, rng):
    # a second route: build the curvature blocks and use the generic algebra
    cfg = sol32.cfg
    for _ in range(6):
        idx = tuple(rng.integers(0, 64, size=2))
        w = complex(*rng.normal(size=2))
        F = vortex.curvature_blocks(sol32, idx, w)
        eta = cfg.mu * sol32.omega[idx] * vortex.fs_density(w)
        assert P.vbma_residual(F, eta) < 1e-10
        assert P.chern_gap(F) == pytest.approx(vortex.vortex_chern_gap(sol32, w)[idx], abs=1e-10)
        assert P.griffiths_check(F, samples=64).positive
        assert P.ma_check(F).positive


def test_sampled_griffiths_matches_closed_form_sign(sol32):
    F = vortex.curvature_blocks(sol32, (5, 7))
    margin = P.griffiths_check(F).margin
    m = vortex.griffiths_margins(sol32)
    assert margin > 0 and m.min_margin > 0


def test_verify_report(sol32):
    rep = vortex.verify(sol32)
    assert set(rep) >= {"reduced_res", "griffiths_min_margin", "chern_gap_max", "slopes"}
    assert vortex.verification_passed(rep)
    assert rep["f2_roundtrip"] < 1e-8


@pytest.mark.parametrize("r, sub, total, stable, gap", [
    ((3, 2), 8, Fraction(17, 2), True, -2),
    ((2, 2), 6, 6, False, 0),
    ((2, 3), 9, Fraction(17, 2), False, 2),
    ((5, 2), 12, Fraction(27, 2), True, -6),
])
def test_slopes(r, sub, total, stable, gap):
    rec = vortex.ma_slopes(*r)
    assert rec.mu_ma_sub == sub and rec.mu_ma_total == total
    assert rec.ma_stable is stable
    assert rec.mumford_gap == gap == vortex.mumford_gap(*r)


def test_slopes_exhaustive():
    for r1 in range(1, 13):
        for r2 in range(1, 13):
            rec = vortex.ma_slopes(r1, r2)
            assert rec.mu_ma_sub == (r1 + 1) * r2
            assert rec.mu_ma_total == Fraction((r1 + 1) * r2 + r1 * (r2 + 1), 2)
            assert rec.ma_stable == (r1 > r2)
            assert rec.mumford_gap == -2 * r1 + 2 * r2


def test_slopes_json_and_validation():
    assert vortex.ma_slopes(3, 2).to_json() == {
        "mu_ma_sub": "8", "mu_ma_total": "17/2", "ma_stable": True, "mumford_gap": -2}
    with pytest.raises(ValueError):
        vortex.ma_slopes(0, 2)
    with pytest.raises(ValueError):
        vortex.mumford_gap(2, 1.5)
