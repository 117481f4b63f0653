import numpy as np
import pytest
from hypothesis import given, strategies as st

from cellfree import geometry
from cellfree.errors import InvalidConfigError

coord = st.tuples(st.floats(0, 1000), st.floats(0, 1000))


def test_single_ap_single_ue_in_bounds():
    drop = geometry.drop_network(1, 1, 1000.0, 7)
    assert drop.ap_positions.shape == (1, 2) and drop.ue_positions.shape == (1, 2)
    for pos in (drop.ap_positions, drop.ue_positions):
        assert np.all((pos >= 0) & (pos <= 1000))


def test_default_counts():
    drop = geometry.drop_network(40, 20, 1000.0, 1)
    assert (drop.m_count, drop.k_count) == (40, 20)
    assert drop.ap_ue_distances().shape == (40, 20)


def test_drop_is_deterministic():
    a = geometry.drop_network(5, 3, 1000.0, 42)
    b = geometry.drop_network(5, 3, 1000.0, 42)
    np.testing.assert_array_equal(a.ap_positions, b.ap_positions)
    np.testing.assert_array_equal(a.ue_positions, b.ue_positions)


@pytest.mark.parametrize("args", [(0, 1, 1000.0), (1, 0, 1000.0), (1, 1, 0.0), (1, 1, -5.0)])
def test_drop_rejects_bad_config(args):
    with pytest.raises(InvalidConfigError):
        geometry.drop_network(*args, 0)


def test_wrapped_distance_examples():
    assert geometry.wrapped_distance((3, 4), (3, 4), 1000, 11) == pytest.approx(11.0)
    assert geometry.wrapped_distance((0, 0), (999, 0), 1000, 0) == pytest.approx(1.0)
    assert geometry.wrapped_distance((0, 0), (500, 500), 1000, 11) == pytest.approx(
        np.sqrt(500**2 + 500**2 + 11**2))


@given(coord, coord)
def test_wrapped_distance_symmetric_and_shorter(p, q):
    d_pq = geometry.wrapped_distance(p, q, 1000.0)
    assert d_pq == pytest.approx(geometry.wrapped_distance(q, p, 1000.0))
    plain = np.hypot(p[0] - q[0], p[1] - q[1])
    assert d_pq <= plain + 1e-9
    if abs(p[0] - q[0]) <= 500 and abs(p[1] - q[1]) <= 500:
        assert d_pq == pytest.approx(plain)


def test_pathloss_examples():
    assert geometry.pathloss_db(1.0) == pytest.approx(-30.18)
    assert geometry.pathloss_db(10.0) == pytest.approx(-56.18)
    assert geometry.pathloss_db(11.0) == pytest.approx(-30.18 - 26 * np.log10(11.0))
    assert geometry.pathloss_db(11.0) == pytest.approx(-57.265, abs=0.01)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_pathloss_domain(d):
    with pytest.raises(InvalidConfigError):
        geometry.pathloss_db(d)


def test_large_scale_map_consistent():
    drop = geometry.drop_network(4, 3, 1000.0, 2)
    shadow = geometry.sample_shadowing(drop, rng_seed=3)
    lsm = geometry.large_scale_map(drop, shadow)
    np.testing.assert_allclose(lsm.beta, 10 ** ((lsm.pathloss_db + lsm.shadow_db) / 10))
    assert np.all(lsm.beta > 0)


def test_shadowing_single_link_variance():
    drop = geometry.drop_network(1, 1, 1000.0, 0)
    F = geometry.sample_shadowing(drop, 0.5, 8.0, 100.0, rng_seed=1, size=100_000)
    assert F.var() == pytest.approx(64.0, rel=0.03)


def test_shadowing_variance_every_link():
    drop = geometry.drop_network(3, 4, 1000.0, 5)
    F = geometry.sample_shadowing(drop, 0.5, 8.0, 100.0, rng_seed=2, size=100_000)
    np.testing.assert_allclose(F.var(axis=0), 64.0, rtol=0.03)


def test_colocated_aps_share_shadowing():
    drop = geometry.NetworkDrop(np.array([[100.0, 200.0], [100.0, 200.0]]), np.array([[700.0, 50.0]]),
                                1000.0)
    F = geometry.sample_shadowing(drop, 1.0, 8.0, 100.0, rng_seed=4, size=100_000)
    corr = np.corrcoef(F[:, 0, 0], F[:, 1, 0])[0, 1]
    assert corr == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(F[:, 0, 0], F[:, 1, 0], atol=1e-6)


def test_ap_process_covariance_matches_kernel():
    drop = geometry.drop_network(4, 1, 1000.0, 9)
    # delta_f = 1 exposes the AP process a_m directly
    F = geometry.sample_shadowing(drop, 1.0, 8.0, 100.0, rng_seed=6, size=100_000)[:, :, 0]
    emp = np.cov(F, rowvar=False)
    d = geometry.wrapped_distance(drop.ap_positions[:, None], drop.ap_positions[None], 1000.0)
    target = 64.0 * 2.0 ** (-d / 100.0)
    assert np.linalg.norm(emp - target) / np.linalg.norm(target) < 0.05


@pytest.mark.parametrize("kwargs", [{"delta_f": 1.5}, {"delta_f": -0.1}, {"d_dc": 0.0}])
def test_shadowing_rejects_bad_parameters(kwargs):
    drop = geometry.drop_network(2, 2, 1000.0, 0)
    with pytest.raises(InvalidConfigError):
        geometry.sample_shadowing(drop, rng_seed=0, **kwargs)
