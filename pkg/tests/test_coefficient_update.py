import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdlambda.coefficient_update import (
    ALPHA_BOUNDS,
    BETA_BOUNDS,
    DECAY_FACTOR,
    UpdateObservation,
    UpdateStrengths,
    lms_gradient,
    lms_update,
    log_error,
    scene_change_reset,
    squared_error,
)
from rdlambda.gop_hierarchy import init_coefficients
from rdlambda.model_core import DomainError, ModelCoefficients, bpp_from_lambda, lambda_from_bpp

getcontext().prec = 50
CENTER = ModelCoefficients(4.4, -1.35, 0.005)


def decimal_update_oracle():
    """Independent evaluation of the worked update example in Decimal."""
    alpha, beta, gamma = Decimal("4.4"), Decimal("-1.35"), Decimal("0.005")
    lam0, bpp1 = Decimal("92.2"), Decimal("0.2")
    ln_lam1 = alpha.ln() + beta * (bpp1 + gamma).ln()
    err = lam0.ln() - ln_lam1
    return float(ln_lam1.exp()), float(err), float(alpha + Decimal("0.05") * err / alpha)


LAM1, ERR, ALPHA_NEXT = decimal_update_oracle()


def random_case(rng):
    c = ModelCoefficients(rng.uniform(0.5, 50), rng.uniform(-2.5, -0.5), rng.uniform(0, 0.05))
    lam0 = lambda_from_bpp(c, rng.uniform(0.01, 1.0))
    return c, lam0, rng.uniform(0.01, 1.0)


class TestStrengths:
    def test_default_reading(self):
        s = UpdateStrengths.for_target(0.2)
        assert (s.sigma_alpha, s.sigma_beta) == (0.05, 0.2)
        assert s.sigma_gamma == pytest.approx(2e-7)

    def test_scale_all_reading(self):
        s = UpdateStrengths.for_target(0.2, scale_all=True)
        assert (s.sigma_alpha, s.sigma_beta, s.sigma_gamma) == pytest.approx((0.01, 0.04, 2e-7))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            UpdateStrengths(-1, 0, 0)

    def test_observation_must_be_positive(self):
        with pytest.raises(ValueError):
            UpdateObservation(0.1, 0.0, 0.1)


class TestUpdate:
    def test_fixed_point(self):
        lam = lambda_from_bpp(CENTER, 0.1)
        out = lms_update(CENTER, UpdateObservation(0.1, lam, 0.1), UpdateStrengths.for_target(0.1))
        assert (out.alpha, out.beta) == pytest.approx((CENTER.alpha, CENTER.beta), abs=1e-12)
        assert out.gamma == pytest.approx(CENTER.gamma, abs=1e-15)
        assert out.decay == pytest.approx(0.99)

    def test_worked_example(self):
        assert lambda_from_bpp(CENTER, 0.2) == pytest.approx(LAM1, rel=1e-12)
        assert LAM1 == pytest.approx(37.37, abs=0.01)
        assert log_error(CENTER, 92.2, 0.2) == pytest.approx(ERR, rel=1e-12)
        assert ERR == pytest.approx(0.903, abs=1e-3)
        out = lms_update(CENTER, UpdateObservation(0.1, 92.2, 0.2), UpdateStrengths(0.05, 0.0, 0.0))
        assert out.alpha == pytest.approx(ALPHA_NEXT, rel=1e-12)
        assert out.alpha == pytest.approx(4.4103, abs=1e-4)

    def test_update_formulas(self):
        s = UpdateStrengths(0.05, 0.2, 1e-3)
        c = ModelCoefficients(4.4, -1.35, 0.005, decay=0.5)
        out = lms_update(c, UpdateObservation(0.1, 60.0, 0.15), s, gamma_max=1.0)
        err = math.log(60.0) - math.log(4.4) + 1.35 * math.log(0.155)
        assert out.alpha == pytest.approx(4.4 + 0.05 * 0.5 * err / 4.4, rel=1e-12)
        assert out.beta == pytest.approx(-1.35 + 0.2 * 0.5 * err * math.log(0.155), rel=1e-12)
        assert out.gamma == pytest.approx(0.005 + 1e-3 * 0.5 * err * -1.35 / 0.155, rel=1e-12)
        assert out.decay == pytest.approx(0.495)

    def test_clamps(self):
        s = UpdateStrengths(1e4, 1e4, 1e4)
        hi = lms_update(CENTER, UpdateObservation(0.1, 1e6, 0.1), s)
        lo = lms_update(CENTER, UpdateObservation(0.1, 1e-6, 0.1), s)
        for out in (hi, lo):
            assert ALPHA_BOUNDS[0] <= out.alpha <= ALPHA_BOUNDS[1]
            assert BETA_BOUNDS[0] <= out.beta <= BETA_BOUNDS[1]
            assert 0.0 <= out.gamma <= 0.1 * 0.1

    def test_domain_error(self):
        with pytest.raises(DomainError):
            log_error(ModelCoefficients(1, -1, 0), 1.0, 0.0)

    def test_decay_power_law(self):
        c = CENTER
        s = UpdateStrengths.for_target(0.1)
        rng = np.random.default_rng(2)
        for n in range(1, 60):
            c = lms_update(c, UpdateObservation(0.1, rng.uniform(20, 200), rng.uniform(0.05, 0.2)), s)
            assert c.decay == DECAY_FACTOR ** n or c.decay == pytest.approx(0.99 ** n, rel=1e-15)

    @given(st.integers(0, 2 ** 32 - 1))
    def test_clamps_hold_for_any_observation(self, seed):
        rng = np.random.default_rng(seed)
        c, lam0, bpp1 = random_case(rng)
        out = lms_update(c, UpdateObservation(0.1, lam0 * rng.uniform(0.01, 100), bpp1),
                         UpdateStrengths.for_target(0.1))
        assert ALPHA_BOUNDS[0] <= out.alpha <= ALPHA_BOUNDS[1]
        assert BETA_BOUNDS[0] <= out.beta <= BETA_BOUNDS[1]
        assert 0 <= out.gamma <= 0.1 * 0.1

    def test_descent_at_small_strength(self):
        rng = np.random.default_rng(17)
        small = UpdateStrengths.for_target(0.1).scaled(0.1)
        for _ in range(1000):
            c, lam0, bpp1 = random_case(rng)
            before = squared_error(c, lam0, bpp1)
            if before == 0:
                continue
            out = lms_update(c, UpdateObservation(0.1, lam0, bpp1), small, gamma_max=1.0)
            assert squared_error(out, lam0, bpp1) < before


class TestGradient:
    def test_matches_central_differences(self):
        rng = np.random.default_rng(23)
        for _ in range(1000):
            c, lam0, bpp1 = random_case(rng)
            c = ModelCoefficients(c.alpha, c.beta, max(c.gamma, 1e-3))
            grad = lms_gradient(c, lam0, bpp1)
            for i, name in enumerate(("alpha", "beta", "gamma")):
                x = getattr(c, name)
                h = 1e-6 * abs(x)
                up = dict(alpha=c.alpha, beta=c.beta, gamma=c.gamma)
                dn = dict(up)
                up[name], dn[name] = x + h, x - h
                fd = (squared_error(ModelCoefficients(**up), lam0, bpp1)
                      - squared_error(ModelCoefficients(**dn), lam0, bpp1)) / (2 * h)
                assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-9)


def drive(true, spread_rng, steps=400):
    c = ModelCoefficients(2.4, -1.35, 0.005)
    s = UpdateStrengths.for_target(0.1)
    errors = []
    for _ in range(steps):
        b0 = spread_rng.uniform(0.02, 0.5)
        lam0 = lambda_from_bpp(c, b0)
        b1 = max(bpp_from_lambda(true, lam0), 1e-6)
        errors.append(abs(log_error(c, lam0, b1)))
        c = lms_update(c, UpdateObservation(b0, lam0, b1), s, gamma_max=0.01)
    return np.array(errors)


class TestConvergence:
    def test_stationary_target_near_init(self):
        # true model within 5% (alpha) and 0.05 (beta) of the initial coefficients
        good = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            true = ModelCoefficients(2.4 * math.exp(rng.uniform(-0.05, 0.05)),
                                     -1.35 + rng.uniform(-0.05, 0.05), 0.005)
            good += drive(true, rng)[200:].max() < 0.05
        assert good >= 95

    def test_error_shrinks_for_larger_mismatch(self):
        first, late = [], []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            true = ModelCoefficients(2.4 * math.exp(rng.uniform(-0.2, 0.2)),
                                     -1.35 + rng.uniform(-0.2, 0.2), 0.005)
            e = drive(true, rng)
            first.append(e[0])
            late.append(np.median(e[200:]))
        assert np.median(late) < 0.5 * np.median(first)


class TestReset:
    def test_reset_restores_init(self):
        table = init_coefficients("RA", 0.1)
        fresh = init_coefficients("RA", 0.1)
        s = UpdateStrengths.for_target(0.1)
        for level in table.coefficients:
            table[level] = lms_update(table[level], UpdateObservation(0.1, 300.0, 0.05), s)
        assert table.coefficients != fresh.coefficients
        scene_change_reset(table, "RA", 0.1)
        assert table.coefficients == fresh.coefficients
        scene_change_reset(table, "RA", 0.1)
        assert table.coefficients == fresh.coefficients
        assert all(c.decay == 1.0 for c in table.coefficients.values())

    def test_post_reset_estimate_equals_cold_start(self):
        table = init_coefficients("LDP", 0.1)
        s = UpdateStrengths.for_target(0.1)
        table[1] = lms_update(table[1], UpdateObservation(0.1, 500.0, 0.3), s)
        scene_change_reset(table, "LDP", 0.1)
        cold = init_coefficients("LDP", 0.1)
        assert lambda_from_bpp(table[1], 0.08) == lambda_from_bpp(cold[1], 0.08)
