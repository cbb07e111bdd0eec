"""Closed-form transform, support, and density checks for the four models."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from freesde import cauchy as ca
from freesde import models as md
from freesde.errors import (
    InvalidConfig,
    OnSupportReal,
    PastBlowup,
)

SQRT2 = math.sqrt(2.0)


class TestModelSpecJson:
    def test_roundtrip(self):
        for spec in (md.OrnsteinUhlenbeck(-1.0, 2.0), md.GeometricBrownian1(0.5),
                     md.GeometricBrownian2(1.0), md.Explosive(0.5, 2.0)):
            assert md.model_from_json(md.model_to_json(spec)) == spec

    def test_unknown_field_rejected(self):
        with pytest.raises(InvalidConfig):
            md.model_from_json({"model": "ou", "theta": 1.0, "sigma": 1.0, "zap": 3})

    def test_missing_field_rejected(self):
        with pytest.raises(InvalidConfig):
            md.model_from_json({"model": "explosive", "k": 1.0})

    def test_unknown_model_rejected(self):
        with pytest.raises(InvalidConfig):
            md.model_from_json({"model": "wishart"})

    def test_parameter_validation(self):
        with pytest.raises(InvalidConfig):
            md.Explosive(k=-1.0, a=1.0)
        with pytest.raises(InvalidConfig):
            md.OrnsteinUhlenbeck(theta=0.0, sigma=-1.0)


class TestOrnsteinUhlenbeck:
    def test_flat_drift_is_semicircle_radius_two(self):
        # theta = 0, sigma = 1, t = 1: variance 1, radius 2
        got = md.ou_cauchy(0.0, 1.0, 1.0, 2.0j)
        want = complex(ca.semicircle_cauchy(2.0j, 1.0))
        assert abs(got - want) == 0.0
        z = 2.0j
        assert abs(got - (-z + np.sqrt(z * z - 4.0)) / 2.0) < 1e-14

    def test_stationary_value_off_support(self):
        got = md.ou_cauchy(-1.0, 1.0, 30.0, 3.0)
        assert abs(got - (-3.0 + math.sqrt(7.0))) < 1e-10

    def test_decay_normalization(self):
        for theta, sigma, t in ((0.7, 0.5, 1.2), (-2.0, 1.0, 0.3), (0.0, 2.0, 2.0)):
            g = md.ou_cauchy(theta, sigma, t, 1e6j)
            assert abs(1e6j * g + 1.0) < 1e-4

    def test_on_support_real_refused(self):
        with pytest.raises(OnSupportReal):
            md.ou_cauchy(0.0, 1.0, 1.0, 0.5)

    def test_herglotz_sampling(self):
        rng = np.random.default_rng(42)
        z = rng.uniform(-4, 4, 100) + 1j * rng.uniform(1e-3, 10, 100)
        g = md.ou_cauchy(-1.0, 1.0, 2.0, z)
        assert np.all(np.asarray(g).imag > 0)

    def test_support_three_cases(self):
        sup = md.ou_support(0.0, 1.0, 1.0)
        assert abs(sup.lo + 2.0) < 1e-14 and abs(sup.hi - 2.0) < 1e-14
        sup = md.ou_support(-1.0, 1.0, 30.0)
        assert abs(sup.lo + SQRT2) < 1e-6 and abs(sup.hi - SQRT2) < 1e-6
        sup = md.ou_support(1.0, 1.0, 0.0)
        assert sup.lo == sup.hi == 0.0
        # growing regime stays above the flat-drift radius
        assert md.ou_support(1.0, 1.0, 1.0).hi > 2.0

    def test_support_continuous_in_theta(self):
        base = md.ou_support(0.0, 1.0, 1.0).hi
        for theta in (1e-8, -1e-8):
            assert abs(md.ou_support(theta, 1.0, 1.0).hi - base) < 1e-6

    @pytest.mark.parametrize("theta,sigma,t", [(-1.0, 1.0, 1.0), (0.5, 0.7, 0.8),
                                               (0.0, 1.5, 2.0)])
    def test_inverted_density_matches_proposition_radius(self, theta, sigma, t):
        ev = md.cauchy_evaluator(md.OrnsteinUhlenbeck(theta, sigma))
        sup = md.ou_support(theta, sigma, t)
        xs = np.linspace(sup.lo * 1.06, sup.hi * 1.06, 901)
        curve = ca.stieltjes_invert(ev, t, xs, eps0=1e-5)
        ref = ca.semicircle_density(xs, (sup.hi / 2.0) ** 2)
        assert np.max(np.abs(curve.ps - ref)) < 1e-4

    def test_variance_against_support_radius(self):
        for theta, sigma, t in ((-1.3, 0.8, 0.7), (0.9, 1.1, 1.4), (0.0, 1.0, 3.0)):
            v = md.ou_variance(theta, sigma, t)
            r = md.ou_support(theta, sigma, t).hi
            assert abs(v - (r / 2.0) ** 2) <= 1e-12 * max(1.0, v)


class TestGeometricBrownian1:
    def test_initial_transform_exact(self):
        for z in (2.0 + 0.5j, -1.0 + 0.1j, 5.0):
            assert md.gbm_cauchy(0.7, 0.0, z) == 1.0 / (1.0 - z)

    def test_residual_certificate(self):
        z = 5.0 + 0.01j
        g = md.gbm_cauchy(0.0, 1.0, z)
        res = abs(z + 1.0 / g - np.exp((-1.0 - z * g) * 1.0))
        assert res < 1e-12
        assert g.imag > 0

    @pytest.mark.parametrize("theta", [-1.0, 0.0, 0.5, 2.0])
    def test_residual_and_branch_across_parameters(self, theta):
        alpha = theta - 1.0
        for t in (0.5, 1.0, 2.0):
            sup = md.gbm_support(theta, t)
            z = np.array([sup.hi * 1.1 + 0.01j,
                          0.5 * (sup.lo + sup.hi) + 1e-5j,
                          2.0 + 3.0j,
                          sup.lo + 1e-9j])
            g = md.gbm_cauchy(theta, t, z)
            res = np.abs(z + 1.0 / g - np.exp((alpha - z * g) * t))
            assert np.max(res) < 1e-12
            assert np.all(g.imag > 0)

    def test_decay_normalization(self):
        g = md.gbm_cauchy(0.5, 1.0, 1e6j)
        assert abs(1e6j * g + 1.0) < 1e-4

    def test_herglotz_sampling(self):
        rng = np.random.default_rng(5)
        z = rng.uniform(-2, 6, 100) + 1j * rng.uniform(1e-3, 10, 100)
        g = md.gbm_cauchy(0.5, 1.0, z)
        assert np.all(np.asarray(g).imag > 0)

    def test_mean_of_recovered_density(self):
        # E(X_t) = e^{theta t}; flat-drift case at t = 1
        ev = md.cauchy_evaluator(md.GeometricBrownian1(0.0))
        sup = md.gbm_support(0.0, 1.0)
        phi = np.linspace(0.0, math.pi, 2049)
        xs = 0.5 * (sup.lo + sup.hi) - 0.5 * (sup.hi - sup.lo) * np.cos(phi)
        curve = ca.stieltjes_invert(ev, 1.0, xs, eps0=1e-5)
        assert abs(ca.density_moment(curve, 1) - 1.0) < 5e-3
        assert abs(curve.mass - 1.0) < 1e-3

    def test_branch_point_products(self):
        # t = 4/3 gives branch-point products 1/2 and -3/2
        t = 4.0 / 3.0
        s = math.sqrt(1.0 + 4.0 / t)
        assert abs((-1.0 + s) / 2.0 - 0.5) < 1e-15
        assert abs((-1.0 - s) / 2.0 + 1.5) < 1e-15

    def test_support_at_four_thirds(self):
        sup = md.gbm_support(1.0, 4.0 / 3.0)
        assert abs(sup.lo - (1.0 / 3.0) * math.exp(-2.0 / 3.0)) < 1e-12
        assert abs(sup.hi - 3.0 * math.exp(2.0)) < 1e-12
        assert abs(sup.lo - 0.17114) < 1e-5
        assert abs(sup.hi - 22.1672) < 1e-4

    def test_support_asymptotics(self):
        theta, t = 0.5, 50.0
        sup = md.gbm_support(theta, t)
        lo_ref = math.exp((theta - 1.0) * t) / (math.e * t)
        hi_ref = math.e * t * math.exp(theta * t)
        assert 0.9 < sup.lo / lo_ref < 1.1
        assert 0.9 < sup.hi / hi_ref < 1.1

    def test_support_positive(self):
        for theta in (-2.0, 0.0, 1.0, 3.0):
            for t in (0.1, 1.0, 10.0):
                assert md.gbm_support(theta, t).lo > 0.0

    def test_support_shrinks_for_negative_drift(self):
        # contracting case: upper edge falls toward zero at large times
        his = [md.gbm_support(-1.0, t).hi for t in (4.0, 6.0, 9.0)]
        assert his[0] > his[1] > his[2]
        assert his[2] < 0.01

    def test_transition_period_for_strong_positive_drift(self):
        # early on a sizable mass fraction still sits below 1 even though
        # the law eventually runs off to infinity
        ev = md.cauchy_evaluator(md.GeometricBrownian1(2.0))
        fractions = []
        for t in (0.25, 2.0):
            sup = md.gbm_support(2.0, t)
            phi = np.linspace(0.0, math.pi, 2049)
            xs = 0.5 * (sup.lo + sup.hi) - 0.5 * (sup.hi - sup.lo) * np.cos(phi)
            curve = ca.stieltjes_invert(ev, t, xs, eps0=1e-5)
            fractions.append(np.trapezoid(np.where(xs <= 1.0, curve.ps, 0.0), xs))
        assert fractions[0] > 0.2
        assert fractions[1] < 0.01


class TestGeometricBrownian2:
    def test_initial_moments(self):
        assert md.gbm2_moments(0.3, 0.0) == (1.0, 1.0)

    def test_flat_drift_second_moment(self):
        mean, second = md.gbm2_moments(0.0, 1.0)
        assert mean == 1.0
        assert abs(second - (2.0 * math.e ** 2 - 1.0)) < 1e-12
        assert abs(second - 13.7781) < 1e-4

    def test_dispersion_ratio(self):
        assert abs(md.gbm2_std_over_mean(1.0)
                   - math.sqrt(2.0 * (math.e ** 2 - 1.0))) < 1e-12
        assert abs(md.gbm2_std_over_mean(1.0) - 3.5746) < 1e-4

    def test_no_transform_available(self):
        with pytest.raises(InvalidConfig):
            md.cauchy_evaluator(md.GeometricBrownian2(0.0))


class TestExplosive:
    def test_initial_transform(self):
        for z in (2.0 + 1.0j, 0.3, -5.0):
            assert md.explosive_cauchy(1.0, 1.0, 0.0, z) == 1.0 / (1.0 - z)

    def test_decay_and_branch(self):
        # a mean-one law has |z g + 1| ~ E(X)/|z|, so the decay bound needs
        # large |z|; the moderate point checks the branch and leading term
        g = md.explosive_cauchy(1.0, 1.0, 0.25, 1e6j)
        assert abs(1e6j * g + 1.0) < 1e-4
        g10 = md.explosive_cauchy(1.0, 1.0, 0.25, 10.0j)
        assert g10.imag > 0
        assert abs(10.0j * g10 + 1.0) < 0.15

    def test_herglotz_sampling(self):
        rng = np.random.default_rng(9)
        z = rng.uniform(-3, 6, 100) + 1j * rng.uniform(1e-3, 10, 100)
        g = md.explosive_cauchy(1.0, 1.0, 0.25, z)
        assert np.all(np.asarray(g).imag > 0)

    def test_boundary_values_reproduce_density(self):
        # same quadratic, two independent code paths
        sup = md.explosive_support(1.0, 1.0, 0.25)
        xs = np.linspace(sup.lo + 1e-9, sup.hi - 1e-9, 1501)
        g = md.explosive_cauchy(1.0, 1.0, 0.25, xs + 0j)
        dens = md.explosive_density(1.0, 1.0, 0.25, xs)
        assert np.max(np.abs(np.asarray(g).imag / math.pi - dens)) < 1e-8

    def test_support_quarter(self):
        sup = md.explosive_support(1.0, 1.0, 0.25)
        assert abs(sup.lo - 4.0 / 9.0) < 1e-15
        assert abs(sup.hi - 4.0) < 1e-14

    def test_lower_edge_limit(self):
        sup = md.explosive_support(1.0, 1.0, 1.0 - 1e-4)
        assert abs(sup.lo - 0.25) < 1e-3

    def test_support_collapses_at_zero_time(self):
        sup = md.explosive_support(1.0, 1.0, 1e-12)
        assert abs(sup.lo - 1.0) < 1e-5 and abs(sup.hi - 1.0) < 1e-5

    def test_upper_edge_divergence(self):
        assert md.explosive_support(1.0, 1.0, 0.97).hi > 1e3

    def test_limit_density_value(self):
        # tau -> 1 profile sqrt(4 xi - 1)/(2 pi xi^3) at xi = 1/2 is 4/pi
        val = md.explosive_density(1.0, 1.0, 1.0 - 1e-9, 0.5)
        assert abs(val - 4.0 / math.pi) < 1e-4

    def test_density_outside_support_zero(self):
        assert md.explosive_density(1.0, 1.0, 0.25, 0.3) == 0.0
        assert md.explosive_density(1.0, 1.0, 0.25, 4.5) == 0.0

    def test_density_normalization_quadrature(self):
        sup = md.explosive_support(1.0, 1.0, 0.25)
        mass, _ = quad(lambda x: md.explosive_density(1.0, 1.0, 0.25, x),
                       sup.lo, sup.hi, limit=200)
        assert abs(mass - 1.0) < 1e-6

    def test_mean_constant(self):
        sup = md.explosive_support(1.0, 1.0, 0.5)
        mean, _ = quad(lambda x: x * md.explosive_density(1.0, 1.0, 0.5, x),
                       sup.lo, sup.hi, limit=200)
        assert abs(mean - 1.0) < 1e-6

    def test_blowup_time(self):
        assert md.blowup_time(1.0, 1.0) == 1.0
        assert md.blowup_time(1.0, 2.0) == 0.25
        ts = [md.blowup_time(k, 1.0) for k in (1.0, 2.0, 10.0, 100.0)]
        assert all(a > b for a, b in zip(ts, ts[1:]))
        assert ts[-1] < 1e-3

    def test_past_blowup_refused(self):
        with pytest.raises(PastBlowup):
            md.explosive_cauchy(1.0, 1.0, 1.0, 2.0j)
        with pytest.raises(PastBlowup):
            md.explosive_support(1.0, 2.0, 0.3)
        with pytest.raises(PastBlowup):
            md.explosive_density(2.0, 1.0, 0.26, 1.0)

    def test_scale_covariance(self):
        # density of X/a at time (ak)^{-2} tau depends on tau alone
        xi = np.linspace(0.46, 3.9, 400)
        f11 = md.explosive_density(1.0, 1.0, 0.25, xi)
        f2h = md.explosive_density(0.5, 2.0, 0.25, 2.0 * xi) * 2.0
        assert np.max(np.abs(f11 - f2h)) < 1e-10


class TestEvaluatorDispatch:
    def test_support_of(self):
        assert md.support_of(md.OrnsteinUhlenbeck(0.0, 1.0), 0.0).hi == 0.0
        assert md.support_of(md.GeometricBrownian1(0.0), 0.0).lo == 1.0
        assert md.support_of(md.Explosive(1.0, 2.0), 0.0).lo == 2.0
        with pytest.raises(InvalidConfig):
            md.support_of(md.GeometricBrownian2(0.0), 1.0)

    def test_evaluators_vectorized(self):
        for spec in (md.OrnsteinUhlenbeck(-1.0, 1.0), md.GeometricBrownian1(0.5),
                     md.Explosive(1.0, 1.0)):
            ev = md.cauchy_evaluator(spec)
            z = np.array([1.0 + 1.0j, 2.0 + 0.5j])
            out = ev(0.3, z)
            assert out.shape == z.shape
            assert isinstance(ev(0.3, 1.0 + 1.0j), complex)

    def test_initial_values(self):
        assert md.initial_value(md.OrnsteinUhlenbeck(0.0, 1.0)) == 0.0
        assert md.initial_value(md.GeometricBrownian1(1.0)) == 1.0
        assert md.initial_value(md.Explosive(1.0, 3.0)) == 3.0
