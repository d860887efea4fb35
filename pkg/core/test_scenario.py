import math

import numpy as np
import pytest

from core.errors import ConfigurationError, GeometryError
from core.scenario import (
    ScenarioConfig,
    angles,
    clamp_rotation,
    fixed_orientation_delta,
    init_world,
    rotate,
    step_mobility,
    wrap_angle,
    zone_indicator,
)


def horizontal_distance(world):
    center = np.asarray(world.config.ud_center)
    return np.linalg.norm(world.positions[:, :2] - center[:2], axis=1)


def test_same_seed_gives_identical_worlds():
    cfg = ScenarioConfig()
    a, b = init_world(cfg, 7), init_world(cfg, 7)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.headings, b.headings)
    np.testing.assert_array_equal(a.speeds, b.speeds)
    np.testing.assert_array_equal(step_mobility(a).positions, step_mobility(b).positions)


def test_placement_stays_in_annulus():
    cfg = ScenarioConfig()
    for seed in range(2000):
        d = horizontal_distance(init_world(cfg, seed))
        assert d.min() >= 2.0 - 1e-12
        assert d.max() <= 7.0 + 1e-12


def test_config_validation_names_field():
    with pytest.raises(ConfigurationError) as exc:
        ScenarioConfig(N=64, N_bar=7).validate()
    assert exc.value.field in ("N", "N_bar")
    with pytest.raises(ConfigurationError) as exc:
        ScenarioConfig.from_dict({"not_a_key": 1})
    assert exc.value.field == "not_a_key"


def test_directivity_defaults_to_two_z_plus_one():
    assert ScenarioConfig(z=2.0).directivity == pytest.approx(6.0)
    assert ScenarioConfig(z=2.0, D_m=3.0).directivity == pytest.approx(3.0)


def test_zero_speed_keeps_position():
    world = init_world(ScenarioConfig(), 1)
    world.speeds[:] = 0.0
    nxt = step_mobility(world)
    np.testing.assert_array_equal(nxt.positions, world.positions)
    assert nxt.q == world.q + 1


def test_heading_zero_moves_along_x():
    world = init_world(ScenarioConfig(), 1)
    world.headings[:] = 0.0
    world.speeds[:] = 1.5
    nxt = step_mobility(world)
    np.testing.assert_allclose(nxt.positions[:, 0] - world.positions[:, 0], 3.0)
    np.testing.assert_allclose(nxt.positions[:, 1], world.positions[:, 1])
    np.testing.assert_array_equal(nxt.positions[:, 2], world.positions[:, 2])


def test_step_displacement_bounded_by_speed_range():
    world = init_world(ScenarioConfig(), 3)
    for _ in range(2000):
        nxt = step_mobility(world)
        step = np.linalg.norm(nxt.positions - world.positions, axis=1)
        assert np.all(step >= 2.2 - 1e-9) and np.all(step <= 3.0 + 1e-9)
        world = nxt


def test_zero_rotation_keeps_initial_azimuths():
    world = init_world(ScenarioConfig(), 11)
    ang = angles(world)
    np.testing.assert_allclose(ang.theta, world.orientation.theta0_ud)
    assert ang.theta_bs == pytest.approx(math.pi / 2)


def test_bs_elevation():
    ang = angles(init_world(ScenarioConfig(), 0))
    assert ang.phi_bs == pytest.approx(math.asin(9.0 / math.sqrt(50.0 ** 2 + 9.0 ** 2)))
    assert ang.phi_bs == pytest.approx(0.17809, abs=1e-5)


def test_full_turn_wraps_to_zero():
    world = init_world(ScenarioConfig(), 5)
    world.orientation.delta = float(world.orientation.theta0_ud[0]) + 2.0 * math.pi
    theta = angles(world).theta[0]
    assert min(theta, 2.0 * math.pi - theta) == pytest.approx(0.0, abs=1e-9)


def test_colocated_ud_is_geometry_error():
    world = init_world(ScenarioConfig(), 0)
    world.positions[0] = world.ris_pos
    with pytest.raises(GeometryError):
        angles(world)


@pytest.mark.parametrize("theta, zone", [(math.pi / 2, 1), (3 * math.pi / 2, 0), (math.pi, 1), (0.0, 1)])
def test_zone_indicator(theta, zone):
    assert zone_indicator(theta) == zone


def test_clamp_rotation_bounds():
    orient = init_world(ScenarioConfig(), 0).orientation
    tb = orient.theta0_bs
    assert clamp_rotation(tb, orient) == pytest.approx(tb)
    assert clamp_rotation(tb + 1.0, orient) == pytest.approx(tb)
    assert clamp_rotation(tb - 4.0, orient) == pytest.approx(tb - math.pi)


def test_bs_stays_in_reflection_area_under_random_rotations():
    world = init_world(ScenarioConfig(), 9)
    rng = np.random.default_rng(0)
    for delta in rng.uniform(-10.0, 10.0, size=10000):
        rotated = rotate(world, float(delta))
        theta_bs = wrap_angle(rotated.orientation.theta0_bs - rotated.orientation.delta + 2 * math.pi)
        assert zone_indicator(theta_bs) == 1


def test_fixed_orientation_faces_bs():
    world = init_world(ScenarioConfig(), 2)
    fixed = rotate(world, fixed_orientation_delta(world.orientation))
    assert angles(fixed).theta_bs == pytest.approx(math.pi / 2)
