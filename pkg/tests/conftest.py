"""Shared helpers for the test suite."""

import numpy as np


def orthogonal(rng, n):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return q


def random_spd(rng, n, lo=0.5, hi=2.5):
    q = orthogonal(rng, n)
    return q @ np.diag(rng.uniform(lo, hi, size=n)) @ q.T


def random_update_instance(rng, p_max=12):
    """Random well-conditioned (A, mu_y, Sigma_y, mu_theta, Sigma_theta).

    Singular values of A lie in [0.5, 2] and covariance eigenvalues in
    [0.5, 2.5], so identity checks at 1e-10 measure the algebra rather
    than floating-point cancellation.
    """
    p = int(rng.integers(1, p_max + 1))
    q = int(rng.integers(1, p + 1))
    A = orthogonal(rng, q) @ np.hstack([
        np.diag(rng.uniform(0.5, 2.0, size=q)), np.zeros((q, p - q))
    ]) @ orthogonal(rng, p)
    return A, rng.normal(size=q), random_spd(rng, q), rng.normal(size=p), \
        random_spd(rng, p)
