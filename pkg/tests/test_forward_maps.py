"""Forward maps: evaluation, Jacobians, augmentation, null spaces."""

import dataclasses

import numpy as np
import pytest

from sip_lab import (
    DomainError,
    RankDeficiencyError,
    augment_identity,
    evaluate,
    identity_map,
    jacobian_at,
    linear_map,
    null_space_rows,
    polar_quadratic_map,
    square_map,
)
from sip_lab.densities import Support
from sip_lab.forward_maps import ForwardMap, domain_probe_points, row_rank


class TestEvaluate:
    def test_linear_slab_instance(self):
        fmap = linear_map([[-1.0 / 3.0, 4.0 / 3.0]])
        assert evaluate(fmap, [1.0, 1.0])[0] == pytest.approx(1.0, abs=1e-15)

    def test_polar_at_corner(self):
        assert evaluate(polar_quadratic_map(), [1.0, 1.0])[0] == pytest.approx(1.0)

    def test_identity(self):
        np.testing.assert_array_equal(
            evaluate(identity_map(2), [0.3, 0.7]), [0.3, 0.7]
        )

    def test_outside_domain_raises(self):
        with pytest.raises(DomainError):
            evaluate(square_map(0.0, 1.0), [1.5])

    def test_repeated_calls_identical(self):
        fmap = polar_quadratic_map()
        theta = np.array([0.4, 0.9])
        assert evaluate(fmap, theta)[0] == evaluate(fmap, theta)[0]


class TestJacobian:
    def test_linear_constant(self):
        A = np.array([[-1.0 / 3.0, 4.0 / 3.0]])
        fmap = linear_map(A)
        for theta in ([0.0, 0.0], [3.0, -2.0]):
            np.testing.assert_array_equal(jacobian_at(fmap, theta), A)

    def test_polar_hand_derivative(self):
        # d/dtheta of (t1^2+t2^2)/2 is (t1, t2)
        fmap = polar_quadratic_map()
        np.testing.assert_allclose(jacobian_at(fmap, [1.0, 1.0]), [[1.0, 1.0]])

    def test_finite_difference_matches_analytic(self):
        fmap = polar_quadratic_map()
        fd_map = dataclasses.replace(fmap, jac=None)
        theta = np.array([0.5, 0.2])
        np.testing.assert_allclose(jacobian_at(fd_map, theta),
                                   jacobian_at(fmap, theta), rtol=1e-6)

    @pytest.mark.parametrize("builder", [polar_quadratic_map,
                                         lambda: square_map(-2.0, 2.0),
                                         lambda: linear_map([[0.7, -1.2], [0.1, 2.0]])])
    def test_fd_agreement_at_random_points(self, builder):
        fmap = builder()
        fd_map = dataclasses.replace(fmap, jac=None)
        rng = np.random.default_rng(42)
        lo = np.maximum(fmap.domain.lower, -2.0)
        hi = np.minimum(fmap.domain.upper, 2.0)
        pts = lo + rng.random((100, fmap.p)) * (hi - lo)
        for theta in pts:
            analytic = jacobian_at(fmap, theta)
            numeric = jacobian_at(fd_map, theta)
            np.testing.assert_allclose(numeric, analytic, rtol=1e-6,
                                       atol=1e-6 * max(1.0, np.abs(analytic).max()))


def _random_quadratic_map(rng, p, q):
    """Map with linear + quadratic parts and an exact Jacobian."""
    A = rng.normal(size=(q, p))
    B = rng.normal(size=(q, p, p)) * 0.3

    def func(theta):
        theta = np.asarray(theta)
        return A @ theta + 0.5 * np.einsum("kij,i,j->k", B, theta, theta)

    def jac(theta):
        theta = np.asarray(theta)
        return A + 0.5 * np.einsum("kij,i->kj", B + B.transpose(0, 2, 1), theta)

    return ForwardMap(p=p, q=q, func=func, jac=jac,
                      domain=Support(np.full(p, -np.inf), np.full(p, np.inf)))


class TestAugmentIdentity:
    def test_square_map_unchanged(self):
        fmap = linear_map(np.array([[2.0, 1.0], [0.0, 1.0]]))
        aug = augment_identity(fmap)
        assert aug.full is fmap
        assert aug.n_aux == 0

    def test_sum_map(self):
        fmap = linear_map([[1.0, 1.0]])
        aug = augment_identity(fmap)
        np.testing.assert_allclose(evaluate(aug.full, [0.3, 0.5]), [0.8, 0.5])
        # hand determinant of [[1, 1], [0, 1]]
        det = np.linalg.det(jacobian_at(aug.full, [0.3, 0.5]))
        assert det == pytest.approx(1.0, abs=1e-14)

    def test_singular_left_block_suggests_permutation(self):
        fmap = linear_map([[0.0, 1.0]])
        with pytest.raises(RankDeficiencyError, match="permute"):
            augment_identity(fmap)

    def test_rank_deficient_map_rejected(self):
        fmap = linear_map([[0.0, 0.0]])
        with pytest.raises(RankDeficiencyError):
            augment_identity(fmap)

    @pytest.mark.parametrize("trial", range(12))
    def test_block_determinant_identity(self, trial):
        """det of the augmented Jacobian equals det of the left q x q block."""
        rng = np.random.default_rng(1000 + trial)
        p = int(rng.integers(1, 7))
        q = int(rng.integers(1, p + 1))
        fmap = _random_quadratic_map(rng, p, q)
        try:
            aug = augment_identity(fmap)
        except RankDeficiencyError:
            return  # randomly singular left block: rejected, nothing to verify
        for theta in rng.normal(size=(20, p)):
            det_full = np.linalg.det(jacobian_at(aug.full, theta))
            det_left = np.linalg.det(jacobian_at(fmap, theta)[:, :q])
            assert det_full == pytest.approx(det_left, abs=1e-10 * max(1, abs(det_left)))


class TestNullSpaceRows:
    def test_reference_slab_matrix(self):
        A = np.array([[-1.0 / 3.0, 4.0 / 3.0]])
        perp = null_space_rows(A)
        assert perp.shape == (1, 2)
        assert abs(A @ perp.T).max() < 1e-12
        assert np.linalg.norm(perp[0]) == pytest.approx(1.0, rel=1e-12)
        # direction proportional to (4/3, 1/3)
        direction = np.array([4.0 / 3.0, 1.0 / 3.0])
        cosine = perp[0] @ direction / np.linalg.norm(direction)
        assert abs(abs(cosine) - 1.0) < 1e-12

    def test_square_matrix_empty(self):
        perp = null_space_rows(np.eye(2))
        assert perp.shape == (0, 2)

    def test_all_ones_row(self):
        perp = null_space_rows([[1.0, 1.0, 1.0]])
        assert perp.shape == (2, 3)
        np.testing.assert_allclose(perp @ perp.T, np.eye(2), atol=1e-12)
        assert np.abs(perp.sum(axis=1)).max() < 1e-12

    def test_rank_deficient_rejected(self):
        with pytest.raises(RankDeficiencyError):
            null_space_rows([[1.0, 0.0], [2.0, 0.0]])

    @pytest.mark.parametrize("trial", range(10))
    def test_random_stacks_invertible(self, trial):
        rng = np.random.default_rng(500 + trial)
        p = int(rng.integers(2, 13))
        q = int(rng.integers(1, min(p, 8) + 1))
        A = rng.normal(size=(q, p))
        perp = null_space_rows(A)
        assert abs(A @ perp.T).max() < 1e-12
        np.testing.assert_allclose(perp @ perp.T, np.eye(p - q), atol=1e-12)
        stack = np.vstack([A, perp])
        assert np.isfinite(np.linalg.cond(stack))
        assert abs(np.linalg.det(stack)) > 1e-12


class TestHelpers:
    def test_row_rank_threshold(self):
        assert row_rank(np.eye(3)) == 3
        assert row_rank([[1.0, 0.0], [1.0, 1e-12]]) == 1

    @pytest.mark.parametrize("builder", [polar_quadratic_map,
                                         lambda: identity_map(2),
                                         lambda: linear_map([[-1 / 3, 4 / 3]])])
    def test_full_row_rank_at_probe_points(self, builder):
        fmap = builder()
        for theta in domain_probe_points(fmap):
            assert row_rank(jacobian_at(fmap, theta)) == fmap.q

    def test_probe_points_respect_domain(self):
        fmap = square_map(0.25, 1.0)
        pts = domain_probe_points(fmap)
        assert fmap.domain.contains(pts).all()

    def test_p_less_than_q_rejected(self):
        with pytest.raises(ValueError):
            linear_map(np.ones((3, 2)))
