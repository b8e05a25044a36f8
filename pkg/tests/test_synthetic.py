import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eccar.exceptions import InvalidConfig
from eccar.linalg import empirical_covariances
from eccar.metrics import sin_theta_distance
from eccar.synthetic import (SIGNAL_PRESETS, SyntheticSpec, build_model, condition_bounds,
                             sample_dataset)
from oracles import classical_cca


def _spec(**kw):
    base = dict(p=12, q=10, r=2, s_u=4, s_v=3, signal=0.9, seed=5)
    base.update(kw)
    return SyntheticSpec(**base)


def test_presets():
    assert SIGNAL_PRESETS == {"high": 0.9, "medium": 0.7, "weak": 0.5}


def test_zero_signal_has_no_coupling():
    truth = build_model(_spec(signal=0.0))
    assert not truth.sigma_xy.any()
    assert not truth.b_star.any()


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(2, 30), st.integers(1, 2),
       st.sampled_from([0.3, 0.5, 0.7, 0.9]), st.integers(0, 2 ** 64 - 1))
def test_structural_invariants(p, q, r, signal, seed):
    s_u, s_v = max(r, p // 3), max(r, q // 3)
    spec = SyntheticSpec(p=p, q=q, r=r, s_u=s_u, s_v=s_v, signal=signal, seed=seed,
                         r_pca=min(2, p, q))
    t = build_model(spec)
    assert np.linalg.norm(t.u_star.T @ t.sigma_x @ t.u_star - np.eye(r)) <= 1e-10
    assert np.linalg.norm(t.v_star.T @ t.sigma_y @ t.v_star - np.eye(r)) <= 1e-10
    np.testing.assert_array_equal(
        t.sigma_xy, ((t.sigma_x @ t.u_star) * t.lambda_star) @ (t.sigma_y @ t.v_star).T)
    assert len(t.support_u) == s_u and len(t.support_v) == s_v
    off_u = np.setdiff1d(np.arange(p), t.support_u)
    assert not t.u_star[off_u].any()
    assert np.count_nonzero(np.any(t.b_star != 0, axis=1)) == s_u
    assert np.count_nonzero(np.any(t.b_star != 0, axis=0)) == s_v
    np.testing.assert_allclose(t.joint_chol @ t.joint_chol.T, t.joint_covariance(), atol=1e-12)
    lo, hi = condition_bounds(t)
    assert lo >= (1 - signal) - 1e-10 and hi <= 2 * (1 + signal) + 1e-10


def test_deterministic():
    a, b = build_model(_spec()), build_model(_spec())
    for name in ("u_star", "v_star", "sigma_x", "sigma_xy", "joint_chol"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = build_model(_spec(seed=6))
    assert not np.array_equal(a.u_star, c.u_star)


def test_block_eigenstructure():
    truth = build_model(SyntheticSpec(p=200, q=200, r=2, s_u=5, s_v=5, signal=0.9, seed=0,
                                      p1=20, q1=20, r_pca=5))
    for sigma in (truth.sigma_x, truth.sigma_y):
        block = np.linalg.eigvalsh(sigma[:20, :20])[::-1]
        np.testing.assert_allclose(block[:5], 2.0, atol=1e-12)
        np.testing.assert_allclose(block[5:], 1.0, atol=1e-12)
        np.testing.assert_array_equal(sigma[20:, 20:], np.eye(180))
        assert not sigma[:20, 20:].any()


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_population_cca_recovers_truth(seed):
    t = build_model(SyntheticSpec(p=8, q=10, r=2, s_u=3, s_v=4, signal=0.7, seed=seed, r_pca=3))
    u, v, s = classical_cca(t.sigma_x, t.sigma_y, t.sigma_xy, 2)
    assert sin_theta_distance(u, t.u_star) < 1e-8
    assert sin_theta_distance(v, t.v_star) < 1e-8
    np.testing.assert_allclose(s, [0.7, 0.7], atol=1e-10)


def test_fixed_support():
    t = build_model(_spec(support_u=(7, 1, 3, 2), support_v=(0, 9, 4)))
    assert t.support_u.tolist() == [1, 2, 3, 7]
    assert t.support_v.tolist() == [0, 4, 9]


@pytest.mark.parametrize("kw", [dict(r=5), dict(s_u=20), dict(signal=1.0), dict(signal=-0.1),
                                dict(seed=-1), dict(r_pca=30), dict(support_u=(0, 0, 1, 2))])
def test_invalid_specs(kw):
    with pytest.raises(InvalidConfig):
        _spec(**kw)


def test_sampling_reproducible():
    t = build_model(_spec())
    a, b = sample_dataset(t, 50, seed=3), sample_dataset(t, 50, seed=3)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.x, sample_dataset(t, 50, seed=4).x)


def test_law_of_large_numbers():
    t = build_model(SyntheticSpec(p=10, q=10, r=2, s_u=3, s_v=3, signal=0.9, seed=1))
    cov = empirical_covariances(sample_dataset(t, 50000, seed=2))
    assert np.linalg.norm(cov.sigma_x - t.sigma_x) / np.linalg.norm(t.sigma_x) < 0.05
    assert np.linalg.norm(cov.sigma_xy - t.sigma_xy) / np.linalg.norm(t.sigma_xy) < 0.05


def test_null_signal_correlation():
    t = build_model(_spec(signal=0.0))
    n = 4000
    d = sample_dataset(t, n, seed=8)
    c = np.corrcoef(d.x @ t.u_star[:, 0], d.y @ t.v_star[:, 0])[0, 1]
    assert abs(c) <= 3 / np.sqrt(n)


def test_small_sample_rejected():
    with pytest.raises(InvalidConfig):
        sample_dataset(build_model(_spec()), 1, seed=0)
