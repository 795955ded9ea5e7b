"""Backend equivalence: the numba kernels and the numpy fallbacks must agree."""

import math

import numpy as np
import pytest

from sip_lab import _kernels


def _dumb_kde_log_pdf(points, data, bw):
    """Independent oracle: direct per-point Python loop."""
    out = np.empty(points.shape[0])
    m, d = data.shape
    norm = (2 * math.pi) ** (-d / 2) / (m * np.prod(bw))
    for i, x in enumerate(points):
        total = 0.0
        for row in data:
            z = (x - row) / bw
            total += math.exp(-0.5 * float(z @ z))
        out[i] = math.log(norm * total) if total > 0 else -math.inf
    return out


@pytest.fixture
def kde_case():
    rng = np.random.default_rng(7)
    data = rng.standard_normal((300, 2))
    points = rng.standard_normal((50, 2)) * 2
    bw = np.array([0.3, 0.4])
    return points, data, bw


def test_numpy_kde_matches_oracle(kde_case):
    points, data, bw = kde_case
    expected = _dumb_kde_log_pdf(points, data, bw)
    np.testing.assert_allclose(_kernels.kde_log_pdf_numpy(points, data, bw),
                               expected, rtol=1e-12)


@pytest.mark.skipif(not _kernels.NUMBA_AVAILABLE, reason="numba not installed")
def test_numba_kde_matches_numpy(kde_case):
    points, data, bw = kde_case
    np.testing.assert_allclose(
        _kernels.kde_log_pdf_numba(points, data, bw),
        _kernels.kde_log_pdf_numpy(points, data, bw),
        rtol=1e-12,
    )


def test_pairwise_dists_backends_agree():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((80, 3))
    numpy_d = _kernels.pairwise_dists_numpy(x)
    # oracle: direct norm computation
    oracle = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=-1)
    np.testing.assert_allclose(numpy_d, oracle, atol=1e-12)
    if _kernels.NUMBA_AVAILABLE:
        original = _kernels.backend()
        _kernels.set_backend("numba")
        try:
            np.testing.assert_allclose(_kernels.pairwise_dists(x), oracle, atol=1e-12)
        finally:
            _kernels.set_backend(original)


def test_energy_stats_backends_agree():
    rng = np.random.default_rng(13)
    pooled = rng.standard_normal((60, 2))
    dists = _kernels.pairwise_dists_numpy(pooled)
    groupings = np.vstack([np.arange(60)] +
                          [rng.permutation(60) for _ in range(20)]).astype(np.int64)
    via_numpy = _kernels.energy_stats_numpy(dists, groupings, 25)
    if _kernels.NUMBA_AVAILABLE:
        via_numba = _kernels._energy_stats_nb(
            np.ascontiguousarray(dists), np.ascontiguousarray(groupings), 25
        )
        np.testing.assert_allclose(via_numba, via_numpy, rtol=1e-12)


def test_energy_statistic_oracle_two_points():
    # two singleton groups at distance 2: statistic = (1*1/2) * (2*2) = 2
    dists = _kernels.pairwise_dists_numpy(np.array([[0.0], [2.0]]))
    stats = _kernels.energy_stats_numpy(dists, np.array([[0, 1]]), 1)
    assert stats[0] == pytest.approx(2.0)


def test_backend_switching():
    original = _kernels.backend()
    try:
        _kernels.set_backend("numpy")
        assert _kernels.backend() == "numpy"
        if _kernels.NUMBA_AVAILABLE:
            _kernels.set_backend("numba")
            assert _kernels.backend() == "numba"
        with pytest.raises(ValueError):
            _kernels.set_backend("cython")
    finally:
        _kernels.set_backend(original)


def test_env_flag_parsing(monkeypatch):
    monkeypatch.setenv("SIP_LAB_NUMBA", "0")
    assert not _kernels._env_wants_numba()
    monkeypatch.setenv("SIP_LAB_NUMBA", "off")
    assert not _kernels._env_wants_numba()
    monkeypatch.setenv("SIP_LAB_NUMBA", "1")
    assert _kernels._env_wants_numba()
    monkeypatch.delenv("SIP_LAB_NUMBA")
    assert _kernels._env_wants_numba()
