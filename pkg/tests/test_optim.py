import numpy as np
import pytest

from lace.optim import SgdConfig, SgdState, sgd_step, step_lr


def test_defaults():
    cfg = SgdConfig()
    assert (cfg.lr0, cfg.momentum, cfg.weight_decay, cfg.step_size, cfg.gamma) == (0.1, 0.9, 5e-4, 50, 0.1)


@pytest.mark.parametrize("epoch,lr", [(0, 0.1), (49, 0.1), (50, 0.01), (99, 0.01), (100, 0.001), (150, 0.0001), (199, 0.0001)])
def test_step_lr(epoch, lr):
    assert step_lr(SgdConfig(), epoch) == lr


def test_step_lr_drop_count():
    lrs = [step_lr(SgdConfig(), e) for e in range(200)]
    assert sum(a != b for a, b in zip(lrs, lrs[1:])) == 200 // 50 - 1
    assert len(set(lrs)) == 4


def test_step_lr_negative_epoch():
    with pytest.raises(ValueError):
        step_lr(SgdConfig(), -1)


@pytest.mark.parametrize("kwargs", [
    {"lr0": 0.0}, {"momentum": 1.0}, {"momentum": -0.1}, {"weight_decay": -1e-4},
    {"step_size": 0}, {"gamma": 1.0}, {"gamma": 0.0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SgdConfig(**kwargs)


def test_vanilla_sgd():
    cfg = SgdConfig(momentum=0.0, weight_decay=0.0)
    p = [np.array([1.0, -2.0]), np.array([[0.5]])]
    g = [np.array([0.3, 0.1]), np.array([[-1.0]])]
    expected = [p[0] - 0.05 * g[0], p[1] - 0.05 * g[1]]
    sgd_step(p, g, SgdState(p), cfg, 0.05)
    for a, b in zip(p, expected):
        np.testing.assert_array_equal(a, b)


def test_momentum_two_steps():
    cfg = SgdConfig(momentum=0.9, weight_decay=0.0)
    p = [np.array([0.0])]
    g = [np.array([1.0])]
    state = SgdState(p)
    sgd_step(p, g, state, cfg, 0.1)
    sgd_step(p, g, state, cfg, 0.1)
    # v1 = g, v2 = 0.9 g + g, displacement lr (g + 1.9 g)
    assert p[0][0] == pytest.approx(-0.1 * 2.9, abs=1e-15)


def test_decay_only_first_step():
    cfg = SgdConfig()
    p = [np.array([2.0, -4.0])]
    sgd_step(p, [np.zeros(2)], SgdState(p), cfg, 0.1)
    np.testing.assert_allclose(p[0], np.array([2.0, -4.0]) * (1 - 0.1 * 5e-4), rtol=1e-15)


def test_bias_decay_flag():
    cfg = SgdConfig(momentum=0.0, decay_biases=False)
    w, b = np.ones((2, 2)), np.ones(2)
    sgd_step([w, b], [np.zeros((2, 2)), np.zeros(2)], SgdState([w, b]), cfg, 0.1)
    assert np.all(b == 1.0) and np.all(w < 1.0)


def test_shape_mismatch():
    p = [np.zeros(3)]
    with pytest.raises(ValueError):
        sgd_step(p, [np.zeros(4)], SgdState(p), SgdConfig(), 0.1)
    with pytest.raises(ValueError):
        sgd_step(p, [], SgdState(p), SgdConfig(), 0.1)


def run_quadratic(steps=300, lr=0.01):
    x = [np.array([3.0, -4.0, 1.5])]
    state, cfg = SgdState(x), SgdConfig()
    norms = []
    for _ in range(steps):
        sgd_step(x, [x[0].copy()], state, cfg, lr)  # grad of 0.5 |x|^2
        norms.append(np.linalg.norm(x[0]))
    return np.array(norms)


def test_converges_on_quadratic():
    norms = run_quadratic()
    x0 = np.linalg.norm([3.0, -4.0, 1.5])
    assert norms[-1] < 1e-6 * x0
    # heavy-ball root modulus is sqrt(momentum); the norm stays under that envelope
    t = np.arange(1, len(norms) + 1)
    assert np.all(norms <= 2 * x0 * np.sqrt(0.9) ** t)


@pytest.mark.xfail(strict=True, reason=(
    "momentum 0.9 with lr 0.01 on curvature ~1 is underdamped "
    "(1.89^2 < 4 * 0.9), so |x| oscillates while converging"))
def test_norm_monotone_after_five_steps():
    tail = run_quadratic()[5:]
    assert all(b < a for a, b in zip(tail, tail[1:]))
