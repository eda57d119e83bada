import numpy as np
import pytest

from csiauth.nn import (conv1d_forward, dense_forward, maxpool_forward,
                        pooled_length, recurrent_forward)


# ---------------------------------------------------------------------------
# conv
# ---------------------------------------------------------------------------

def test_conv_hand_example():
    # cross-correlation of [1,2,3] with [1,0,-1], zero pad 1:
    # pre-activation [-2,-2,2] -> ReLU [0,0,2]
    out = conv1d_forward(np.array([[1.0, 2.0, 3.0]]),
                         np.array([[[1.0, 0.0, -1.0]]]),
                         np.zeros(1))
    assert np.allclose(out, [[0.0, 0.0, 2.0]], atol=1e-15)


def test_conv_zero_filters_zero_output():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 10))
    out = conv1d_forward(x, np.zeros((4, 3, 3)), np.zeros(4))
    assert np.array_equal(out, np.zeros((4, 10)))


def _conv_bruteforce(x, filters, bias):
    c_out, c_in, k = filters.shape
    length = x.shape[1]
    xp = np.zeros((c_in, length + 2))
    xp[:, 1:-1] = x
    out = np.zeros((c_out, length))
    for o in range(c_out):
        for pos in range(length):
            acc = bias[o]
            for c in range(c_in):
                for t in range(k):
                    acc += filters[o, c, t] * xp[c, pos + t]
            out[o, pos] = max(acc, 0.0)
    return out


def test_conv_matches_bruteforce_oracle():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(2, 8))
    filters = rng.normal(size=(5, 2, 3))
    bias = rng.normal(size=5)
    fast = conv1d_forward(x, filters, bias)
    slow = _conv_bruteforce(x, filters, bias)
    assert np.allclose(fast, slow, atol=1e-12)


def test_conv_shape_errors():
    with pytest.raises(ValueError, match="channels"):
        conv1d_forward(np.zeros((2, 4)), np.zeros((1, 3, 3)), np.zeros(1))
    with pytest.raises(ValueError, match="bias"):
        conv1d_forward(np.zeros((2, 4)), np.zeros((1, 2, 3)), np.zeros(2))
    with pytest.raises(ValueError, match="filters"):
        conv1d_forward(np.zeros((2, 4)), np.zeros((1, 2, 5)), np.zeros(1))


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

def test_maxpool_hand_example():
    out = maxpool_forward(np.array([[1.0, 5.0, 2.0, 4.0, 3.0, 0.0, 1.0, 2.0]]))
    assert np.array_equal(out, [[5.0, 5.0, 4.0, 2.0]])


def test_maxpool_constant_input():
    out = maxpool_forward(np.full((3, 9), 2.5))
    assert np.array_equal(out, np.full((3, pooled_length(9)), 2.5))


def test_maxpool_lengths_match_network_tables():
    assert pooled_length(128) == 64
    assert pooled_length(64) == 32
    x = np.random.default_rng(0).normal(size=(1, 128))
    once = maxpool_forward(x)
    assert once.shape == (1, 64)
    assert maxpool_forward(once).shape == (1, 32)


def test_maxpool_length_one():
    assert np.array_equal(maxpool_forward(np.array([[3.0]])), [[3.0]])


# ---------------------------------------------------------------------------
# recurrence
# ---------------------------------------------------------------------------

def test_recurrent_scalar_oracle():
    # h1 = tanh(1) = 0.761594155956; h2 = tanh(0.5*h1 - 1) = -0.550572812918
    h = recurrent_forward(np.array([[1.0], [-1.0]]),
                          np.array([[1.0]]), np.array([[0.5]]))
    assert abs(h[0, 0] - 0.761594155956) < 1e-6
    assert abs(h[1, 0] - (-0.550572812918)) < 1e-6


def test_recurrent_zero_weights():
    h = recurrent_forward(np.ones((4, 3)), np.zeros((5, 3)), np.zeros((5, 5)))
    assert np.array_equal(h, np.zeros((4, 5)))


def test_recurrent_matches_loop_oracle():
    rng = np.random.default_rng(3)
    inputs = rng.normal(size=(5, 3))
    w_yh = rng.normal(size=(4, 3))
    w_hh = rng.normal(size=(4, 4))
    fast = recurrent_forward(inputs, w_yh, w_hh)
    h = np.zeros(4)
    slow = []
    for l in range(5):
        h = np.tanh(w_hh @ h + w_yh @ inputs[l])
        slow.append(h)
    assert np.allclose(fast, np.array(slow), atol=1e-12)


def test_recurrent_shape_errors():
    with pytest.raises(ValueError, match="square"):
        recurrent_forward(np.zeros((2, 3)), np.zeros((4, 3)), np.zeros((4, 5)))
    with pytest.raises(ValueError, match="w_yh"):
        recurrent_forward(np.zeros((2, 3)), np.zeros((4, 2)), np.zeros((4, 4)))


# ---------------------------------------------------------------------------
# dense
# ---------------------------------------------------------------------------

def test_dense_identity():
    x = np.array([1.0, -2.0, 3.0])
    out = dense_forward(x, np.eye(3), np.zeros(3), "identity")
    assert np.array_equal(out, x)


def test_dense_zero_weights_sigmoid_half():
    out = dense_forward(np.array([5.0, -7.0]), np.zeros((3, 2)), np.zeros(3),
                        "sigmoid")
    assert np.allclose(out, 0.5)


def test_dense_relu_hand_example():
    out = dense_forward(np.array([2.0, 1.0]), np.array([[1.0, -1.0]]),
                        np.array([0.5]), "relu")
    assert np.allclose(out, [1.5])


def test_dense_sigmoid_open_interval():
    rng = np.random.default_rng(5)
    x = rng.normal(size=10)
    w = rng.normal(size=(20, 10))
    out = dense_forward(x, w, rng.normal(size=20), "sigmoid")
    assert np.all(out > 0.0) and np.all(out < 1.0)


def test_dense_shape_errors():
    with pytest.raises(ValueError, match="weight"):
        dense_forward(np.zeros(3), np.zeros((2, 4)), np.zeros(2))
    with pytest.raises(ValueError, match="activation"):
        dense_forward(np.zeros(2), np.zeros((1, 2)), np.zeros(1), "softmax")
