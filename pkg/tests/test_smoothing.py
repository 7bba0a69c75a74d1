"""Smoothed friction densities.

Frozen expected values are derived by hand from the uniform-density
smoothing of the plus function: the middle branch of P is
(x + eps/2)^2 / (2 eps), so P(1, 0) = 1/8 with slope 1/2, and the
two-branch gap at a kink is exactly eps/8.
"""

import numpy as np
import pytest

from hvibem.smoothing import (
    KAPPA_ZANG,
    SmoothingParams,
    clarke_dirderiv,
    estimate_onesided_constant,
    linear,
    nonconvex,
    plus_smooth,
    plus_smooth_curvature,
    smoothing_error_bound_check,
    superpotential_by_name,
    superpotential_curvature,
    superpotential_slope,
    superpotential_value,
    tresca,
    unsmoothed_value,
    validate_superpotential,
)


def test_plus_smooth_three_branches():
    val, slope = plus_smooth(1.0, np.array([-2.0, -0.5, 0.0, 0.5, 2.0]))
    np.testing.assert_allclose(val, [0.0, 0.0, 0.125, 0.5, 2.0], atol=1e-15)
    np.testing.assert_allclose(slope, [0.0, 0.0, 0.5, 1.0, 1.0], atol=1e-15)


def test_plus_smooth_is_c1_at_the_seams():
    eps = 0.37
    for x0 in (-eps / 2, eps / 2):
        below = plus_smooth(eps, x0 - 1e-12)
        above = plus_smooth(eps, x0 + 1e-12)
        assert below[0] == pytest.approx(above[0], abs=1e-11)
        assert below[1] == pytest.approx(above[1], abs=1e-11)


def test_plus_smooth_rejects_bad_eps():
    with pytest.raises(ValueError):
        plus_smooth(0.0, 1.0)
    with pytest.raises(ValueError):
        plus_smooth(-1.0, 1.0)


def test_plus_curvature_support():
    eps = 0.2
    x = np.array([-0.11, -0.1, 0.0, 0.1, 0.11])
    np.testing.assert_allclose(
        plus_smooth_curvature(eps, x), [0.0, 5.0, 5.0, 5.0, 0.0], atol=1e-15
    )


def test_error_bound_formula():
    params = SmoothingParams(0.01)
    assert params.kappa == KAPPA_ZANG == 0.25
    assert params.error_bound(1) == 0.0
    assert params.error_bound(3) == pytest.approx(2 * 0.25 * 0.01)


def test_tresca_gap_is_eighth_of_eps():
    spec = tresca(2.0)
    for eps in (1.0, 0.1, 0.01):
        params = SmoothingParams(eps)
        x = np.linspace(-5, 5, 10001)
        gap = np.abs(
            superpotential_value(spec, params, 0.0, x)
            - unsmoothed_value(spec, 0.0, x)
        )
        assert gap.max() == pytest.approx(eps / 8, rel=1e-12)
        assert gap.max() <= params.error_bound(spec.m)


def test_gap_check_passes_catalog_and_raises_on_violation():
    grid = np.linspace(-5, 5, 2001)
    rep = smoothing_error_bound_check(tresca(1.0), SmoothingParams(0.1), grid)
    assert rep.ok and rep.bound == pytest.approx(0.025)

    # a density violating its own declared branch count: force m=1 bound 0
    bad = linear(1.0)
    rep = smoothing_error_bound_check(bad, SmoothingParams(0.5), grid)
    assert rep.max_gap == 0.0  # single branch: no smoothing at all


def test_slope_weights_are_convex():
    spec = nonconvex(1.0, 0.5)
    params = SmoothingParams(0.05)
    x = np.linspace(-3, 3, 1001)
    slope, lam = superpotential_slope(spec, params, 0.0, x)
    assert lam.shape == (2, 1001)
    assert lam.min() >= 0.0 and lam.max() <= 1.0
    np.testing.assert_allclose(lam.sum(axis=0), 1.0, atol=1e-12)
    # slope really is the weighted branch-derivative combination
    g0 = 1.0 - 0.5 * x
    g1 = -1.0 - 0.5 * x
    np.testing.assert_allclose(slope, lam[0] * g0 + lam[1] * g1, atol=1e-12)


def test_slope_matches_central_differences_off_the_kinks():
    spec = tresca(1.5)
    eps = 0.02
    params = SmoothingParams(eps)
    x = np.linspace(-1, 1, 4001)
    # P kinks sit where the nested argument is +-eps/2
    z = unsmoothed_value(spec, 0.0, x)  # not needed, just keep x generic
    margin = 1e-3 * eps
    kink = np.abs(np.abs(-2 * 1.5 * x) - eps / 2) < margin
    x = x[~kink]
    h = 1e-7
    fd = (
        superpotential_value(spec, params, 0.0, x + h)
        - superpotential_value(spec, params, 0.0, x - h)
    ) / (2 * h)
    slope, _ = superpotential_slope(spec, params, 0.0, x)
    np.testing.assert_allclose(slope, fd, atol=1e-6)


def test_curvature_frozen_value_at_kink():
    # tresca(1), eps = 0.1: P'' = 1/eps and the nested argument has slope -2
    spec = tresca(1.0)
    val = superpotential_curvature(spec, SmoothingParams(0.1), 0.0, 0.0)
    assert float(val) == pytest.approx(4.0 / 0.1)


def test_tresca_slope_stays_within_bound():
    spec = tresca(0.7)
    slope, _ = superpotential_slope(
        spec, SmoothingParams(0.05), 0.0, np.linspace(-2, 2, 2001)
    )
    assert np.max(np.abs(slope)) <= 0.7 + 1e-14


def test_clarke_interval_at_tresca_kink():
    spec = tresca(2.0)
    d_pos = clarke_dirderiv(spec, 0.0, 0.0, 1.0)
    d_neg = clarke_dirderiv(spec, 0.0, 0.0, -1.0)
    assert float(d_pos) == pytest.approx(2.0)
    assert float(d_neg) == pytest.approx(2.0)
    # away from the kink the derivative is classical
    assert float(clarke_dirderiv(spec, 0.0, 1.0, 1.0)) == pytest.approx(2.0)
    assert float(clarke_dirderiv(spec, 0.0, -1.0, 1.0)) == pytest.approx(-2.0)


def test_onesided_constant_matches_beta():
    params = SmoothingParams(1e-3)
    assert estimate_onesided_constant(
        tresca(1.0), params, (-2, 2), 801
    ) == pytest.approx(0.0, abs=1e-12)
    for beta in (0.25, 1.0):
        got = estimate_onesided_constant(
            nonconvex(1.0, beta), params, (-2, 2), 1601
        )
        assert got == pytest.approx(beta, rel=1e-6)


def test_growth_validator_measures_linear_growth():
    rep = validate_superpotential(
        tresca(2.0), np.zeros(1), np.linspace(-5, 5, 401)
    )
    assert rep.ok
    assert max(rep.measured_c) == pytest.approx(2.0, rel=1e-9)
    assert rep.fd_max_err < 1e-6


def test_growth_validator_flags_overdeclared_bound():
    spec = tresca(1.0)
    tight = type(spec)(
        name=spec.name,
        params=spec.params,
        branches=spec.branches,
        declared_c=(0.5, 0.5),  # declares less growth than measured
        declared_d=spec.declared_d,
    )
    rep = validate_superpotential(tight, np.zeros(1), np.linspace(-5, 5, 401))
    assert not rep.ok
    assert any("exceeds declared" in m for m in rep.messages)


def test_catalog_by_name():
    spec = superpotential_by_name("nonconvex", (1.0, 0.5))
    assert spec.m == 2
    with pytest.raises(ValueError):
        superpotential_by_name("unknown", ())
    with pytest.raises(ValueError):
        superpotential_by_name("tresca", (1.0, 2.0))
    with pytest.raises(ValueError):
        tresca(-1.0)
    with pytest.raises(ValueError):
        nonconvex(1.0, -0.5)


def test_linear_accepts_arc_dependent_slope():
    spec = linear(lambda s: np.sin(s))
    s = np.array([0.0, np.pi / 2])
    slope, _ = superpotential_slope(spec, SmoothingParams(1.0), s, np.zeros(2))
    np.testing.assert_allclose(slope, [0.0, 1.0], atol=1e-15)
    # single branch: value independent of eps
    v1 = superpotential_value(spec, SmoothingParams(1.0), s, np.ones(2))
    v2 = superpotential_value(spec, SmoothingParams(1e-8), s, np.ones(2))
    np.testing.assert_allclose(v1, v2, atol=1e-15)
