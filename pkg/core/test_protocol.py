
import numpy as np
import pytest

from core.channel import phase_set
from core.env import ActionVector, decode_action
from core.errors import ProtocolConstraintError
from core.protocol import Protocol, StarConfig, build_matrices, ts_serving_indicator, validate
from core.scenario import ScenarioConfig, init_world

PSET = phase_set(2)


def test_es_full_reflection_has_no_transmission():
    cfg = StarConfig(kind=Protocol.ES, phase_idx_r=[0, 1], amplitudes_r=[1.0, 1.0])
    m = build_matrices(cfg, PSET, 4)
    np.testing.assert_array_equal(m.phi_t, np.zeros(4))


def test_ms_construction():
    cfg = StarConfig(kind=Protocol.MS, phase_idx_r=[0, 1], phase_idx_t=[0, 1], amplitudes_r=[1.0, 0.0])
    m = build_matrices(cfg, PSET, 2)
    np.testing.assert_allclose(m.phi_r, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(m.phi_t, [0.0, 1j], atol=1e-15)


def test_ts_reflect_mode():
    cfg = StarConfig(kind=Protocol.TS, phase_idx_r=[0, 1, 2, 3], lambda_r=1)
    m = build_matrices(cfg, PSET, 8)
    np.testing.assert_array_equal(m.phi_t, np.zeros(8))
    np.testing.assert_allclose(np.abs(m.phi_r), 1.0)


@pytest.mark.parametrize("lam, zone, served", [(1, 1, 1), (1, 0, 0), (0, 0, 1), (0, 1, 0)])
def test_ts_serving_indicator(lam, zone, served):
    assert ts_serving_indicator(lam, zone) == served


def test_validate_examples():
    assert validate(StarConfig(kind=Protocol.ES, phase_idx_r=[0], amplitudes_r=[0.4], amplitudes_t=[0.6])) == []
    ms = validate(StarConfig(kind=Protocol.MS, phase_idx_r=[0], amplitudes_r=[0.4]))
    assert any(v.message == "amplitude not binary" for v in ms)
    ts = validate(StarConfig(kind=Protocol.TS, phase_idx_r=[0], lambda_r=1, lambda_t=1))
    assert any(v.constraint == "mode_sum" for v in ts)


def test_build_rejects_violations():
    with pytest.raises(ProtocolConstraintError) as exc:
        build_matrices(StarConfig(kind=Protocol.ES, phase_idx_r=[0, 9], amplitudes_r=[0.5, 1.5]), PSET, 4)
    assert len(exc.value.violations) >= 2


def check_fuzzed_actions(protocol, count, seed):
    cfg = ScenarioConfig(K=3, N=16, N_bar=4)
    world = init_world(cfg, 0)
    rng = np.random.default_rng(seed)
    dim = 3 * cfg.N_bar + cfg.K + 1 if protocol is not Protocol.TS else cfg.N_bar + cfg.K + 2
    allowed = set(np.round(PSET.values, 12))
    for _ in range(count):
        raw = rng.uniform(-1.0, 1.0, size=dim)
        decoded = decode_action(ActionVector(raw), protocol, PSET, world.orientation, world.alpha_cu)
        assert validate(decoded.star, PSET) == []
        m = build_matrices(decoded.star, PSET, cfg.N)
        if protocol is Protocol.ES:
            np.testing.assert_allclose(np.abs(m.phi_r) ** 2 + np.abs(m.phi_t) ** 2, 1.0, rtol=0, atol=1e-12)
        if protocol is Protocol.TS:
            assert (np.abs(m.phi_r) > 0).all() != (np.abs(m.phi_t) > 0).all()
        phases = PSET.values[np.concatenate([decoded.star.phase_idx_r, decoded.star.phase_idx_t])]
        assert set(np.round(phases, 12)) <= allowed
        lo, hi = world.orientation.bounds
        assert lo <= decoded.delta <= hi


@pytest.mark.parametrize("protocol", list(Protocol))
def test_fuzzed_decoded_actions_are_valid(protocol):
    check_fuzzed_actions(protocol, 20_000, seed=42)


@pytest.mark.slow
@pytest.mark.parametrize("protocol", list(Protocol))
def test_fuzzed_decoded_actions_are_valid_full_scale(protocol):
    check_fuzzed_actions(protocol, 100_000, seed=7)
