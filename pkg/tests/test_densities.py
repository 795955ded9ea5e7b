"""Density families: frozen oracle values, invariants, and error paths."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from sip_lab import (
    GaussianParams,
    MixtureWeights,
    NotPositiveDefiniteError,
    draw,
    fit_kde,
    make_beta,
    make_gaussian,
    make_mixture,
    make_truncated_gaussian,
    make_uniform,
)
from sip_lab.densities import scott_bandwidth
from sip_lab.verification import ks_test_1d

RNG = lambda s: np.random.default_rng(s)


class TestGaussian:
    def test_standard_normal_mode(self):
        dens = make_gaussian(GaussianParams([0.0], [[1.0]]))
        assert dens.pdf(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-12)

    def test_mvn_value_at_mean(self):
        # hand oracle: (2 pi)^(-d/2) det(Sigma)^(-1/2) at the mean
        dens = make_gaussian(GaussianParams([0.0, 1.0], 0.5 * np.eye(2)))
        expected = (2 * math.pi) ** -1 * np.linalg.det(0.5 * np.eye(2)) ** -0.5
        assert expected == pytest.approx(1.0 / math.pi, rel=1e-15)
        assert dens.pdf([0.0, 1.0]) == pytest.approx(expected, rel=1e-12)

    def test_indefinite_covariance_names_eigenvalue(self):
        with pytest.raises(NotPositiveDefiniteError, match="-1"):
            make_gaussian(GaussianParams([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]]))

    def test_asymmetric_covariance_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            GaussianParams([0.0, 0.0], [[1.0, 0.5], [0.2, 1.0]])

    def test_log_pdf_matches_pdf(self):
        dens = make_gaussian(GaussianParams([1.0, -2.0], [[2.0, 0.3], [0.3, 0.5]]))
        pts = RNG(0).normal(size=(200, 2)) * 3
        np.testing.assert_allclose(np.exp(dens.log_pdf(pts)), dens.pdf(pts), rtol=1e-12)


class TestTruncatedGaussian:
    def test_unit_mass(self):
        dens = make_truncated_gaussian(0.5, 0.25, 0.0, 1.0)
        mass, _ = quad(lambda x: dens.pdf(x), 0.0, 1.0, limit=200)
        assert mass == pytest.approx(1.0, abs=1e-10)

    def test_no_truncation_matches_gaussian(self):
        trunc = make_truncated_gaussian(0.0, 1.0, -np.inf, np.inf)
        full = make_gaussian(GaussianParams([0.0], [[1.0]]))
        assert trunc.pdf(0.0) == pytest.approx(full.pdf(0.0), rel=1e-14)

    def test_center_value_against_error_function(self):
        # oracle: phi(0) / (sigma * (Phi(2) - Phi(-2))), with Phi(2)-Phi(-2) = erf(sqrt(2))
        dens = make_truncated_gaussian(0.5, 0.25, 0.0, 1.0)
        expected = (1.0 / math.sqrt(2 * math.pi)) / (0.25 * math.erf(math.sqrt(2.0)))
        assert dens.pdf(0.5) == pytest.approx(expected, rel=1e-12)

    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            make_truncated_gaussian(0.0, 1.0, 1.0, 1.0)

    def test_zero_outside_interval(self):
        dens = make_truncated_gaussian(0.5, 0.25, 0.0, 1.0)
        assert dens.pdf(-0.2) == 0.0
        assert dens.log_pdf(1.3) == -np.inf


class TestBeta:
    def test_uniform_case(self):
        dens = make_beta(1.0, 1.0)
        pts = np.linspace(0.01, 0.99, 23)
        np.testing.assert_allclose(dens.pdf(pts), 1.0, rtol=1e-12)

    def test_mode_by_numeric_maximization(self):
        # oracle: maximize the log-density numerically; compare to (a-1)/(a+b-2)
        dens = make_beta(8.0, 12.0)
        res = minimize_scalar(lambda x: -dens.log_pdf(x), bounds=(1e-6, 1 - 1e-6),
                              method="bounded", options={"xatol": 1e-12})
        assert res.x == pytest.approx(7.0 / 18.0, abs=1e-8)

    def test_unit_mass(self):
        dens = make_beta(8.0, 12.0)
        mass, _ = quad(lambda x: dens.pdf(x), 0.0, 1.0, limit=200)
        assert mass == pytest.approx(1.0, abs=1e-10)

    def test_nonpositive_shape_rejected(self):
        with pytest.raises(ValueError):
            make_beta(0.0, 2.0)
        with pytest.raises(ValueError):
            make_beta(2.0, -1.0)


class TestMixture:
    def test_single_component_identity(self):
        comp = make_beta(8.0, 12.0)
        mix = make_mixture([comp], MixtureWeights([1.0]))
        pts = np.linspace(0.05, 0.95, 31)
        np.testing.assert_allclose(mix.pdf(pts), comp.pdf(pts), rtol=1e-14)

    def test_disjoint_mass_split(self):
        mix = make_mixture(
            [make_uniform([0.0], [1.0]), make_uniform([2.0], [3.0])],
            MixtureWeights([0.3, 0.7]),
        )
        data = mix.sample(RNG(11), 100_000)
        frac = float(np.mean(data[:, 0] <= 1.0))
        se = math.sqrt(0.3 * 0.7 / 100_000)
        assert abs(frac - 0.3) < 3 * se

    def test_bad_weights_rejected(self):
        with pytest.raises(ValueError, match="sum"):
            MixtureWeights([0.5, 0.6])

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dimension"):
            make_mixture(
                [make_uniform([0.0], [1.0]), make_uniform([0.0, 0.0], [1.0, 1.0])],
                MixtureWeights([0.5, 0.5]),
            )

    def test_pointwise_linearity(self):
        comps = [make_beta(8.0, 12.0), make_uniform([0.0], [1.0]),
                 make_truncated_gaussian(0.5, 0.2, 0.0, 1.0)]
        weights = np.array([0.2, 0.5, 0.3])
        mix = make_mixture(comps, MixtureWeights(weights))
        pts = RNG(3).random(500)
        expected = sum(w * c.pdf(pts) for w, c in zip(weights, comps))
        np.testing.assert_allclose(mix.pdf(pts), expected, rtol=1e-14, atol=1e-300)


class TestKde:
    def test_mass_on_box(self):
        data = RNG(5).standard_normal((10_000, 1))
        dens = fit_kde(data)
        xs = np.linspace(-5.0, 5.0, 2001)
        mass = np.trapezoid(dens.pdf(xs), xs)
        assert mass == pytest.approx(1.0, abs=0.01)

    def test_value_at_origin(self):
        data = RNG(5).standard_normal((10_000, 1))
        dens = fit_kde(data)
        assert dens.pdf(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi), abs=0.05)

    def test_mass_on_five_bandwidth_box(self):
        data = RNG(9).standard_normal((4000, 2))
        dens = fit_kde(data)
        h = scott_bandwidth(data)
        lo = data.min(axis=0) - 5 * h
        hi = data.max(axis=0) + 5 * h
        axes = [np.linspace(lo[j], hi[j], 201) for j in range(2)]
        mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1)
        vals = dens.pdf(mesh).reshape(201, 201)
        mass = np.trapezoid(np.trapezoid(vals, axes[1], axis=1), axes[0])
        assert mass == pytest.approx(1.0, abs=1e-2)

    def test_single_sample_rejected(self):
        with pytest.raises(ValueError, match="2 samples"):
            fit_kde(np.array([[0.5]]))

    def test_degenerate_spread_advises_jitter(self):
        with pytest.raises(ValueError, match="jitter"):
            fit_kde(np.zeros((50, 1)))

    def test_scott_rule(self):
        data = RNG(2).standard_normal((500, 3)) * np.array([1.0, 2.0, 0.5])
        h = scott_bandwidth(data)
        expected = data.std(axis=0, ddof=1) * 500 ** (-1.0 / 7.0)
        np.testing.assert_allclose(h, expected, rtol=1e-14)


def _family_cases():
    gauss2 = make_gaussian(GaussianParams([0.5, -1.0], [[1.0, 0.4], [0.4, 2.0]]))
    mix = make_mixture(
        [make_uniform([0.0], [1.0]), make_uniform([2.0], [3.0])],
        MixtureWeights([0.3, 0.7]),
    )
    kde = fit_kde(np.random.default_rng(17).standard_normal((2000, 1)))
    return [
        ("gaussian2d", gauss2),
        ("truncnorm", make_truncated_gaussian(0.5, 0.25, 0.0, 1.0)),
        ("beta", make_beta(8.0, 12.0)),
        ("uniform", make_uniform([-1.0, 2.0], [1.0, 5.0])),
        ("mixture", mix),
        ("kde", kde),
    ]


@pytest.mark.parametrize("name,dens", _family_cases())
def test_sampler_matches_cdf_per_marginal(name, dens):
    """Seed-fixed KS check of every family's sampler against its own CDF."""
    batch = draw(dens, 10_000, seed=101)
    for j in range(dens.dim):
        _, p_value = ks_test_1d(batch.data[:, j], lambda v, j=j: dens.marginal_cdf(j, v))
        assert p_value >= 0.01, f"{name} marginal {j}: p={p_value}"


@pytest.mark.parametrize("name,dens", _family_cases())
def test_samples_lie_in_support(name, dens):
    batch = draw(dens, 5000, seed=7)
    assert dens.support.contains(batch.data).all()


@pytest.mark.parametrize("name,dens", _family_cases())
def test_exp_log_pdf_identity(name, dens):
    batch = draw(dens, 500, seed=3)
    pdf_vals = dens.pdf(batch.data)
    log_vals = dens.log_pdf(batch.data)
    pos = pdf_vals > 0
    np.testing.assert_allclose(np.exp(log_vals[pos]), pdf_vals[pos], rtol=1e-12)
