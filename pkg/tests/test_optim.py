import numpy as np
import pytest

from nfetc.autodiff import ParamSet
from nfetc.optim import AdamState, adam_step, dropout_mask, make_rng


def adam_by_hand(grad_sequence, lr, beta1=0.9, beta2=0.999, eps=1e-8, x0=0.0):
    """Scalar Adam oracle written straight from the update equations."""
    x, m, v = x0, 0.0, 0.0
    for t, g in enumerate(grad_sequence, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        x = x - lr * m_hat / (v_hat ** 0.5 + eps)
    return x


def single_param(value=0.0):
    ps = ParamSet()
    ps.add("x", np.array([value]))
    return ps


def test_make_rng_is_deterministic_per_seed():
    assert make_rng(11).random(4) == pytest.approx(make_rng(11).random(4))
    assert not np.allclose(make_rng(11).random(4), make_rng(12).random(4))


def test_zero_gradient_is_identity():
    ps = single_param(3.5)
    state = AdamState(ps)
    adam_step(ps, {"x": np.zeros(1)}, state, lr=0.1)
    assert ps["x"].data == pytest.approx([3.5])


def test_first_step_magnitude_equals_lr():
    # bias correction makes m_hat / sqrt(v_hat) exactly 1 for a unit gradient
    ps = single_param(0.0)
    adam_step(ps, {"x": np.ones(1)}, AdamState(ps), lr=0.0002)
    assert ps["x"].data[0] == pytest.approx(-0.0002, rel=1e-6)


def test_two_steps_match_hand_oracle():
    ps = single_param(1.0)
    state = AdamState(ps)
    adam_step(ps, {"x": np.array([1.0])}, state, lr=0.01)
    adam_step(ps, {"x": np.array([-2.0])}, state, lr=0.01)
    assert ps["x"].data[0] == pytest.approx(adam_by_hand([1.0, -2.0], 0.01, x0=1.0),
                                            abs=1e-15)
    assert state.step == 2


def test_frozen_parameters_are_bit_identical_after_steps():
    ps = ParamSet()
    ps.add("w", np.ones(3))
    frozen = ps.add("emb", np.arange(6.0).reshape(2, 3), trainable=False)
    before = frozen.data.tobytes()
    state = AdamState(ps)
    assert set(state.m) == {"w"}
    for _ in range(5):
        adam_step(ps, {"w": np.ones(3)}, state, lr=0.1)
    assert frozen.data.tobytes() == before


def test_rejects_nonpositive_lr():
    ps = single_param()
    with pytest.raises(ValueError, match="positive"):
        adam_step(ps, {"x": np.zeros(1)}, AdamState(ps), lr=0.0)


def test_rejects_gradient_shape_mismatch():
    ps = single_param()
    with pytest.raises(ValueError, match="shape"):
        adam_step(ps, {"x": np.zeros(2)}, AdamState(ps), lr=0.1)


def test_converges_on_quadratic():
    ps = single_param(10.0)
    state = AdamState(ps)
    for _ in range(800):
        g = 2.0 * (ps["x"].data - 3.0)
        adam_step(ps, {"x": g}, state, lr=0.05)
    assert ps["x"].data[0] == pytest.approx(3.0, abs=1e-2)


def test_dropout_mask_identity_without_consuming_rng():
    rng = make_rng(5)
    mask = dropout_mask((4, 4), 1.0, rng)
    assert np.array_equal(mask, np.ones((4, 4)))
    # the stream was not advanced
    assert rng.random() == make_rng(5).random()


def test_dropout_mask_values_and_mean():
    rng = make_rng(3)
    mask = dropout_mask((100000,), 0.5, rng)
    assert set(np.unique(mask)) <= {0.0, 2.0}
    assert abs(mask.mean() - 1.0) < 0.02


@pytest.mark.parametrize("keep", [0.7, 0.9])
def test_dropout_mask_keep_rate(keep):
    mask = dropout_mask((50000,), keep, make_rng(9))
    assert (mask > 0).mean() == pytest.approx(keep, abs=0.01)
    assert abs(mask.mean() - 1.0) < 0.02


@pytest.mark.parametrize("bad", [0.0, -0.1, 1.2])
def test_dropout_mask_rejects_bad_keep_prob(bad):
    with pytest.raises(ValueError, match="keep_prob"):
        dropout_mask((2,), bad, make_rng(0))


def test_dropout_mask_deterministic_per_seed():
    a = dropout_mask((32, 8), 0.5, make_rng(42))
    b = dropout_mask((32, 8), 0.5, make_rng(42))
    assert np.array_equal(a, b)
