import math
import random

import mpmath
import pytest

from pcrpp.ratiocheck import (
    RatioParams,
    alpha_components,
    curve_value,
    density,
    derivative_cap,
    h_value,
    length_factor,
    phi,
    skip_factor,
    sweep_curve,
    fixed_threshold_terms,
    verify_bound,
)

PAPER = RatioParams()


def test_param_validation():
    with pytest.raises(ValueError):
        RatioParams(0.5, 0.4, 1.0)
    with pytest.raises(ValueError):
        RatioParams(0.1, 0.9, -1.0)


def test_length_factor_below_reported_bound():
    assert length_factor(PAPER) < 1.59862255


def test_skip_factor_below_reported_bound():
    assert skip_factor(PAPER) < 1.57780982


def test_curve_grid_maximum_location():
    comp = alpha_components(PAPER, step=1e-6)
    assert comp.curve_max == pytest.approx(1.59862256, abs=2e-6)
    assert abs(comp.curve_argmax - 0.94817979) < 1e-3
    assert comp.alpha < 1.6


def test_golden_ratio_identity():
    delta = (3.0 - math.sqrt(5.0)) / 2.0
    gold = (1.0 + math.sqrt(5.0)) / 2.0
    for term in fixed_threshold_terms(delta, 1.0):
        assert abs(term - gold) <= 1e-12


def test_h_at_upper_end_is_one_minus_kappa():
    assert abs(h_value(PAPER, PAPER.kappa) - (1.0 - PAPER.kappa)) <= 1e-12
    other = RatioParams(0.2, 0.8, 1.5)
    assert abs(h_value(other, other.kappa) - (1.0 - other.kappa)) <= 1e-12


def test_density_normalizes():
    mpmath.mp.dps = 40
    val = mpmath.quad(
        lambda d: density(PAPER, float(d)), [PAPER.kappa0, PAPER.kappa]
    )
    assert abs(float(val) - 1.0) <= 1e-12


def test_nu_matches_integral_identity():
    # nu is one over the integral of (3 - d) (kappa - d)^beta over the window
    mpmath.mp.dps = 40
    k0, k, b = (mpmath.mpf(repr(v)) for v in (PAPER.kappa0, PAPER.kappa, PAPER.beta))
    val = mpmath.quad(lambda d: (3 - d) * (k - d) ** b, [k0, k])
    assert abs(PAPER.nu - float(1 / val)) <= 1e-12 * PAPER.nu


def test_phi_concavity_sampled():
    rng = random.Random(13)
    k0, k = PAPER.kappa0, PAPER.kappa
    for _ in range(1000):
        xi = rng.uniform(k0, k)
        d = rng.uniform(k0, k)
        lam = (k - d) / (k - k0)
        chord = lam * phi(PAPER, xi, k0) + (1.0 - lam) * phi(PAPER, xi, k)
        assert phi(PAPER, xi, d) >= chord - 1e-12


def test_curve_finite_differences_bounded():
    cap = derivative_cap(PAPER)
    rng = random.Random(17)
    for _ in range(300):
        step = 10 ** rng.uniform(-6, -3)
        xi = rng.uniform(PAPER.kappa0, PAPER.kappa - step)
        diff = (curve_value(PAPER, xi + step) - curve_value(PAPER, xi)) / step
        assert abs(diff) <= cap


def test_interval_constants_sampled():
    # the constants inside the slope bound, checked by sampling the window
    k0, k, b = PAPER.kappa0, PAPER.kappa, PAPER.beta
    span = k - k0
    assert 0.63 < span < 0.631
    xs = [k0 + i * (span / 2000.0) for i in range(2001)]
    for xi in xs:
        t = k - xi
        assert abs(phi(PAPER, xi, k0) - phi(PAPER, xi, k)) < 4.65
        assert 0.0 <= phi(PAPER, xi, k) < 2.01
        assert 0.0 <= (span ** (b + 2) - t ** (b + 2)) / (b + 2) < 0.07
        assert 0.0 <= t ** (b + 1) < 0.399
        assert 0.0 <= (span ** (b + 1) - t ** (b + 1)) / (b + 1) < 0.138
        assert 0.0 <= t ** b < 0.631
    # slope of the two kernel endpoints, by central differences
    for xi in xs[1:-1]:
        h = span / 20000.0
        d_diff = (
            (phi(PAPER, xi + h, k0) - phi(PAPER, xi + h, k))
            - (phi(PAPER, xi - h, k0) - phi(PAPER, xi - h, k))
        ) / (2 * h)
        assert abs(d_diff) < 4.0
        d_hi = (phi(PAPER, xi + h, k) - phi(PAPER, xi - h, k)) / (2 * h)
        assert 0.0 <= d_hi < 2.0


def _curve_mpmath(p: RatioParams, xi):
    mpmath.mp.dps = 50
    k0, k, b = mpmath.mpf(repr(p.kappa0)), mpmath.mpf(repr(p.kappa)), mpmath.mpf(repr(p.beta))
    x = mpmath.mpf(repr(xi))
    span = k - k0
    nu = 1 / ((3 - k) * span ** (b + 1) / (b + 1) + span ** (b + 2) / (b + 2))
    t = k - x

    def kernel(d):
        return (3 - d - k) * (3 - d) / (3 - d - x)

    a_term = (span ** (b + 2) - t ** (b + 2)) / (b + 2)
    b_term = span * (span ** (b + 1) - t ** (b + 1)) / (b + 1)
    h = 1 - (x * nu / span) * ((kernel(k0) - kernel(k)) * a_term + kernel(k) * b_term)
    return float(h / (1 - x))


def test_roundoff_budget_against_mpmath():
    # the sweep arithmetic agrees with 50-digit decimals far below 1e-9
    rng = random.Random(19)
    worst = 0.0
    for _ in range(20):
        xi = rng.uniform(PAPER.kappa0, PAPER.kappa - 1e-6)
        worst = max(worst, abs(curve_value(PAPER, xi) - _curve_mpmath(PAPER, xi)))
    assert worst <= 1e-12


def test_verify_bound_coarse_is_inconclusive():
    cert = verify_bound(PAPER, 1e-2)
    assert cert.slack == pytest.approx(32.0 / (1.0 - PAPER.kappa) * 1e-2)
    assert cert.certified > 1.6
    assert not cert.conclusive


def test_verify_bound_degenerate_step_uses_endpoints():
    cert = verify_bound(PAPER, 1.0)
    assert cert.points == 2
    assert cert.grid_max == pytest.approx(
        max(curve_value(PAPER, PAPER.kappa0), curve_value(PAPER, PAPER.kappa))
    )
    assert not cert.conclusive


def test_verify_bound_fine_is_conclusive():
    cert = verify_bound(PAPER, 1e-7)
    assert cert.conclusive
    assert cert.certified < 1.6
    assert abs(cert.argmax - 0.94817979) < 1e-4


def test_window_ending_at_one_stays_finite():
    # at kappa = 1 the curve has a removable point at xi = 1 (h vanishes);
    # the sweep must evaluate one-sided instead of dividing by zero
    p = RatioParams(0.38, 1.0, 2.0)
    top, arg = sweep_curve(p, 1e-4)
    assert math.isfinite(top)
    assert math.isfinite(curve_value(p, 1.0))


def test_sweep_parallel_matches_serial():
    serial = sweep_curve(PAPER, 1e-5, jobs=1, chunk=1 << 14)
    parallel = sweep_curve(PAPER, 1e-5, jobs=2, chunk=1 << 14)
    assert serial == parallel
