import itertools
import math

import numpy as np
import pytest

from core import channel as ch
from core.errors import ChannelDimensionError, ConfigurationError
from core.protocol import CoefficientMatrices, Protocol, StarConfig, build_matrices
from core.scenario import AngleSet, ScenarioConfig, init_world


def test_phase_sets():
    np.testing.assert_allclose(ch.phase_set(1).values, [0.0, math.pi])
    np.testing.assert_allclose(ch.phase_set(2).values, [0.0, math.pi / 2, math.pi, 3 * math.pi / 2])
    for b in range(1, 6):
        values = ch.phase_set(b).values
        assert len(values) == 2 ** b
        assert np.all(values < 2 * math.pi)
    with pytest.raises(ConfigurationError):
        ch.phase_set(0)


def test_expand_groups():
    np.testing.assert_array_equal(ch.expand_groups(["a", "b"], 4), ["a", "a", "b", "b"])
    np.testing.assert_array_equal(ch.expand_groups([1, 2, 3], 3), [1, 2, 3])
    expanded = ch.expand_groups(np.arange(10), 100)
    np.testing.assert_array_equal(expanded, np.repeat(np.arange(10), 10))
    with pytest.raises(ConfigurationError):
        ch.expand_groups([1, 2, 3], 10)


def test_pure_los_magnitude():
    rng = np.random.default_rng(0)
    d = 4.0
    h = ch.rician_link(d, np.full(32, d), 1e-3, 2.0, math.inf, 0.125, rng)
    np.testing.assert_allclose(np.abs(h), math.sqrt(1e-3 / d ** 2))
    h1 = ch.rician_link(1.0, np.ones(8), 1e-3, 2.0, math.inf, 0.125, rng)
    np.testing.assert_allclose(np.abs(h1), math.sqrt(1e-3))


def test_rayleigh_variance_matches_path_gain():
    rng = np.random.default_rng(1)
    d, rho0 = 3.0, 1e-3
    h = ch.rician_link(d, np.full(100_000, d), rho0, 2.0, 0.0, 0.125, rng)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(rho0 / d ** 2, rel=0.02)


def test_draw_channels_shapes_and_determinism():
    world = init_world(ScenarioConfig(K=3, N=16, N_bar=4), 4)
    a = ch.draw_channels(world, np.random.default_rng(5))
    b = ch.draw_channels(world, np.random.default_rng(5))
    assert a.h_ud_ris.shape == (3, 16)
    assert a.v_ris_bs.shape == (16,)
    assert a.h_ud_bs.shape == (3,)
    np.testing.assert_array_equal(a.h_ud_ris, b.h_ud_ris)


def angle_set(theta, phi, theta_bs=math.pi / 2, phi_bs=0.0):
    return AngleSet(theta=np.atleast_1d(theta), phi=np.atleast_1d(phi), theta_bs=theta_bs, phi_bs=phi_bs)


def test_star_gain_values():
    assert ch.star_gain_scalar(angle_set(0.0, 0.0), 0, 2.0, 6.0) == pytest.approx(0.0)
    assert ch.star_gain_scalar(angle_set(math.pi / 2, 0.0), 0, 2.0, 6.0) == pytest.approx(36.0)
    theta = np.array([0.3, 1.1, 2.0])
    phi = np.array([0.2, 0.1, 0.4])
    g = ch.star_gains(angle_set(theta, phi, 1.2, 0.17), 2.0, 6.0)
    g_mirror = ch.star_gains(angle_set(math.pi - theta, phi, 1.2, 0.17), 2.0, 6.0)
    np.testing.assert_allclose(g, g_mirror)
    for k in range(3):
        assert g[k] == pytest.approx(ch.star_gain_scalar(angle_set(theta, phi, 1.2, 0.17), k, 2.0, 6.0))


def unit_realization(n, direct=0.0 + 0.0j):
    return ch.ChannelRealization(h_ud_ris=np.ones((1, n), dtype=complex), v_ris_bs=np.ones(n, dtype=complex),
                                 h_ud_bs=np.array([direct]), q=1)


def test_zero_amplitude_leaves_direct_link():
    real = unit_realization(4, 0.3 - 0.1j)
    coeffs = CoefficientMatrices(phi_r=np.zeros(4, dtype=complex), phi_t=np.ones(4, dtype=complex))
    assert ch.effective_channel(real, coeffs, 5.0, 0, zone=1) == pytest.approx(0.3 - 0.1j)


def test_scalar_effective_channel():
    phi, beta, g, direct = 0.7, 0.4, 2.5, 0.1 + 0.2j
    real = unit_realization(1, direct)
    coeffs = CoefficientMatrices(phi_r=np.array([math.sqrt(beta) * np.exp(1j * phi)]),
                                 phi_t=np.array([0j]))
    expected = g * math.sqrt(beta) * np.exp(1j * phi) + direct
    assert ch.effective_channel(real, coeffs, g, 0, zone=1) == pytest.approx(expected)


def test_dimension_mismatch():
    real = unit_realization(4)
    coeffs = CoefficientMatrices(phi_r=np.ones(3, dtype=complex), phi_t=np.ones(3, dtype=complex))
    with pytest.raises(ChannelDimensionError):
        ch.effective_channel(real, coeffs, 1.0, 0, zone=1)


def test_aligned_phases_maximize_gain():
    rng = np.random.default_rng(3)
    n_bar, N, b = 3, 6, 2
    pset = ch.phase_set(b)
    real = ch.ChannelRealization(
        h_ud_ris=(rng.standard_normal((1, N)) + 1j * rng.standard_normal((1, N))),
        v_ris_bs=(rng.standard_normal(N) + 1j * rng.standard_normal(N)),
        h_ud_bs=np.zeros(1, dtype=complex), q=1,
    )
    best = 0.0
    for idx in itertools.product(range(len(pset)), repeat=n_bar):
        cfg = StarConfig(kind=Protocol.ES, phase_idx_r=np.array(idx))
        h = ch.effective_channel(real, build_matrices(cfg, pset, N), 1.0, 0, zone=1)
        best = max(best, abs(h))
    # continuous co-phasing of the group sums upper-bounds every discrete tuple;
    # 2-bit phases land within pi/4 of it
    group_sums = (np.conj(real.v_ris_bs) * real.h_ud_ris[0]).reshape(n_bar, -1).sum(axis=1)
    bound = np.sum(np.abs(group_sums))
    assert best <= bound + 1e-12
    assert best >= bound * math.cos(math.pi / 4) - 1e-12


def test_rates():
    assert ch.achievable_rate(1 + 0j, 0.0, 5e6, 1e-14) == 0.0
    assert ch.achievable_rate(math.sqrt(3.0), 1.0, 1.0, 1.0) == pytest.approx(2.0)


def test_channel_trace_csv(tmp_path):
    path = tmp_path / "channel.csv"
    ch.write_channel_trace(path, [(1, 0, 0.5 - 0.25j, 3.0)])
    lines = path.read_text().splitlines()
    assert lines[0] == "q,k,re_h,im_h,g_k"
    assert lines[1] == "1,0,0.5,-0.25,3.0"
