import numpy as np
import pytest

from agents.nn import (
    AdamState,
    DenseNet,
    SquashedGaussianPolicy,
    adam_step,
    load_networks,
    log_prob_of,
    save_networks,
)
from core.errors import NetworkShapeError

trapezoid = getattr(np, "trapezoid", None) or np.trapz


def numerical_grads(net, x, loss_fn, h=1e-5):
    grads = []
    for p in net.params():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + h
            up = loss_fn(net.forward(x))
            p[i] = old - h
            down = loss_fn(net.forward(x))
            p[i] = old
            g[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def rel_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(1e-4, np.abs(a) + np.abs(b)))


def test_zero_net_outputs_zero():
    net = DenseNet([3, 4, 2])
    for p in net.params():
        p[...] = 0.0
    np.testing.assert_array_equal(net.forward(np.ones(3)), np.zeros(2))


def test_affine_net():
    net = DenseNet([1, 1])
    net.weights[0][...] = 2.0
    net.biases[0][...] = 1.0
    np.testing.assert_allclose(net.forward(np.array([[0.5], [-3.0]]))[:, 0], [2.0, -5.0])


def test_batch_matches_single_rows():
    net = DenseNet([4, 8, 3], np.random.default_rng(0))
    x = np.random.default_rng(1).standard_normal((5, 4))
    batch = net.forward(x)
    for i in range(5):
        np.testing.assert_allclose(net.forward(x[i]), batch[i])


def test_input_width_checked():
    with pytest.raises(NetworkShapeError):
        DenseNet([4, 2]).forward(np.ones(3))


def check_gradients(seed):
    rng = np.random.default_rng(seed)
    sizes = [int(rng.integers(1, 6)), int(rng.integers(1, 8)), int(rng.integers(1, 8)), int(rng.integers(1, 4))]
    net = DenseNet(sizes, rng)
    x = rng.standard_normal((3, sizes[0]))
    target = rng.standard_normal((3, sizes[-1]))

    def loss(y):
        return 0.5 * np.sum((y - target) ** 2)

    out = net.forward(x)
    grads, grad_in = net.backward(out - target)
    for analytic, numeric in zip(grads, numerical_grads(net, x, loss)):
        assert rel_error(analytic, numeric) <= 1e-4

    # input gradient
    num_in = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[i] += 1e-5
        xm[i] -= 1e-5
        num_in[i] = (loss(net.forward(xp)) - loss(net.forward(xm))) / 2e-5
    assert rel_error(grad_in, num_in) <= 1e-4


@pytest.mark.parametrize("seed", range(40))
def test_backward_matches_finite_differences(seed):
    check_gradients(seed)


@pytest.mark.slow
def test_backward_matches_finite_differences_on_many_nets():
    for seed in range(1000):
        check_gradients(seed)


def test_constant_loss_gives_zero_gradients():
    net = DenseNet([3, 5, 2], np.random.default_rng(0))
    net.forward(np.ones((4, 3)))
    grads, _ = net.backward(np.zeros((4, 2)))
    for g in grads:
        np.testing.assert_array_equal(g, 0.0)


def test_batch_gradient_is_sum_of_sample_gradients():
    net = DenseNet([3, 5, 2], np.random.default_rng(0))
    x = np.random.default_rng(2).standard_normal((4, 3))
    net.forward(x)
    batch_grads, _ = net.backward(np.ones((4, 2)))
    summed = None
    for row in x:
        net.forward(row)
        g, _ = net.backward(np.ones(2))
        summed = g if summed is None else [a + b for a, b in zip(summed, g)]
    for a, b in zip(batch_grads, summed):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_adam_zero_gradient_keeps_params():
    p = [np.array([1.0, -2.0])]
    state = AdamState.for_params(p)
    for _ in range(10):
        adam_step(state, p, [np.zeros(2)])
    np.testing.assert_array_equal(p[0], [1.0, -2.0])


def test_adam_constant_gradient_step_size():
    p = [np.zeros(3)]
    state = AdamState.for_params(p, lr=1e-3)
    before = p[0].copy()
    for _ in range(200):
        before = p[0].copy()
        adam_step(state, p, [np.array([0.5, -2.0, 10.0])])
    np.testing.assert_allclose(p[0] - before, [-1e-3, 1e-3, -1e-3], rtol=1e-3)


def test_adam_is_deterministic():
    def run():
        net = DenseNet([2, 4, 1], np.random.default_rng(3))
        state = AdamState.for_params(net.params())
        x = np.random.default_rng(4).standard_normal((8, 2))
        for _ in range(20):
            out = net.forward(x)
            grads, _ = net.backward(out)
            adam_step(state, net.params(), grads)
        return net.get_flat()
    np.testing.assert_array_equal(run(), run())


def test_checkpoint_round_trip(tmp_path):
    net = DenseNet([3, 7, 2], np.random.default_rng(0))
    path = save_networks(tmp_path / "ckpt.json", {"q": net}, {"log_alpha": -1.25})
    loaded, extra = load_networks(path)
    np.testing.assert_array_equal(loaded["q"].get_flat(), net.get_flat())
    assert loaded["q"].sizes == [3, 7, 2]
    assert extra["log_alpha"] == -1.25


def test_soft_update_limits():
    a = DenseNet([2, 3, 1], np.random.default_rng(0))
    b = DenseNet([2, 3, 1], np.random.default_rng(1))
    before = a.get_flat()
    a.soft_update_from(b, 0.0)
    np.testing.assert_array_equal(a.get_flat(), before)
    a.soft_update_from(b, 1.0)
    np.testing.assert_array_equal(a.get_flat(), b.get_flat())


def test_policy_samples_in_open_box():
    policy = SquashedGaussianPolicy(4, 3, (16, 16), np.random.default_rng(0))
    s = policy.sample(np.random.default_rng(1).standard_normal((1000, 4)), np.random.default_rng(2))
    assert np.all(np.abs(s.action) < 1.0)
    assert np.all(np.isfinite(s.log_prob))


def test_degenerate_std_returns_squashed_mean():
    policy = SquashedGaussianPolicy(2, 2, (8,), np.random.default_rng(0))
    policy.net.weights[-1][:, 2:] = 0.0
    policy.net.biases[-1][2:] = -50.0           # clipped to log_std = -20
    obs = np.array([0.3, -0.2])
    stochastic = policy.sample(obs, np.random.default_rng(5))
    deterministic = policy.sample(obs, deterministic=True)
    np.testing.assert_allclose(stochastic.action, deterministic.action, atol=1e-7)
    np.testing.assert_allclose(deterministic.action, np.tanh(deterministic.mean))


def test_squashed_density_integrates_to_one():
    mean, log_std = np.array([0.4]), np.array([-0.3])
    grid = np.linspace(-1 + 1e-9, 1 - 1e-9, 1_000_001)
    density = np.exp(log_prob_of(grid[:, None], mean, log_std))
    assert trapezoid(density, grid) == pytest.approx(1.0, abs=0.02)

    rng = np.random.default_rng(0)
    samples = np.tanh(mean + np.exp(log_std) * rng.standard_normal((1_000_000, 1)))
    hist, edges = np.histogram(samples[:, 0], bins=50, range=(-1, 1), density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])
    predicted = np.exp(log_prob_of(centers[:, None], mean, log_std))
    mask = predicted > 0.2
    np.testing.assert_allclose(hist[mask], predicted[mask], rtol=0.1)


def test_sample_log_prob_matches_density():
    policy = SquashedGaussianPolicy(3, 2, (8,), np.random.default_rng(0))
    obs = np.random.default_rng(1).standard_normal((10, 3))
    s = policy.sample(obs, np.random.default_rng(2))
    np.testing.assert_allclose(s.log_prob, log_prob_of(s.action, s.mean, s.log_std), rtol=1e-6, atol=1e-6)


def test_policy_backward_matches_finite_differences():
    rng = np.random.default_rng(7)
    policy = SquashedGaussianPolicy(3, 2, (6, 5), rng)
    obs = rng.standard_normal((4, 3))
    noise_seed = 11
    w_a = rng.standard_normal((4, 2))
    w_lp = rng.standard_normal(4)

    def loss():
        s = policy.sample(obs, np.random.default_rng(noise_seed))
        return float(np.sum(w_a * s.action) + np.sum(w_lp * s.log_prob)), s

    _, sample = loss()
    grads = policy.backward(sample, w_a, w_lp)
    for p, g in zip(policy.params(), grads):
        num = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + 1e-5
            up, _ = loss()
            p[i] = old - 1e-5
            down, _ = loss()
            p[i] = old
            num[i] = (up - down) / 2e-5
        assert rel_error(g, num) <= 1e-4
