import math

import numpy as np
import pytest

from loglens.errors import NumericError, ShapeError
from loglens.matrix import layer_norm, matmul, relu, softmax_rows


def test_matmul_identity():
    a = [[1.0, 2.0], [3.0, 4.0]]
    assert np.array_equal(matmul(a, np.eye(2)), np.array(a))


def test_matmul_hand_case():
    # [1,2] . [3,4] = 1*3 + 2*4 = 11
    assert matmul([[1.0, 2.0]], [[3.0], [4.0]]).tolist() == [[11.0]]


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError) as exc:
        matmul(np.zeros((2, 3)), np.zeros((2, 3)))
    assert "(2, 3)" in str(exc.value)


def test_matmul_associative_on_random_chains():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = rng.normal(size=(4, 6))
        b = rng.normal(size=(6, 3))
        c = rng.normal(size=(3, 5))
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        assert np.allclose(left, right, rtol=1e-8, atol=1e-10)


def test_matmul_rejects_nonfinite_result():
    big = np.full((1, 2), 1e308)
    with pytest.raises(NumericError):
        matmul(big, np.full((2, 1), 10.0))


def test_softmax_symmetric_rows():
    out = softmax_rows([[0.0, 0.0]])
    assert np.allclose(out, [[0.5, 0.5]])


def test_softmax_large_values_no_overflow():
    out = softmax_rows([[1000.0, 1000.0]])
    assert np.allclose(out, [[0.5, 0.5]])
    assert np.isfinite(out).all()


def test_softmax_hand_ratio():
    # exp(ln 2) : exp(0) = 2 : 1
    out = softmax_rows([[math.log(2.0), 0.0]])
    assert np.allclose(out, [[2.0 / 3.0, 1.0 / 3.0]], atol=1e-12)


def test_softmax_rows_sum_to_one_at_scale():
    rng = np.random.default_rng(3)
    x = rng.uniform(-1e4, 1e4, size=(40, 17))
    out = softmax_rows(x)
    assert np.abs(out.sum(axis=1) - 1.0).max() < 1e-6


def test_softmax_shift_invariance():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(10, 9))
    for c in (-123.4, 0.5, 7e3):
        assert np.abs(softmax_rows(x + c) - softmax_rows(x)).max() < 1e-9


def test_layer_norm_constant_row_is_zero():
    gamma = np.ones((1, 4))
    beta = np.zeros((1, 4))
    out = layer_norm(np.full((2, 4), 3.5), gamma, beta)
    assert np.allclose(out, 0.0)


def test_layer_norm_zero_gamma_gives_beta():
    rng = np.random.default_rng(1)
    beta = rng.normal(size=(1, 6))
    out = layer_norm(rng.normal(size=(3, 6)), np.zeros((1, 6)), beta)
    assert np.allclose(out, np.broadcast_to(beta, (3, 6)))


def test_layer_norm_standardizes_rows():
    rng = np.random.default_rng(2)
    x = rng.normal(2.0, 5.0, size=(8, 32))
    out = layer_norm(x, np.ones((1, 32)), np.zeros((1, 32)))
    assert np.abs(out.mean(axis=1)).max() < 1e-10
    assert np.abs(out.var(axis=1) - 1.0).max() < 1e-4  # eps shifts variance slightly


def test_layer_norm_shape_mismatch():
    with pytest.raises(ShapeError):
        layer_norm(np.zeros((2, 4)), np.ones((1, 3)), np.zeros((1, 4)))


def test_relu_cases():
    assert relu([[-1.0, 0.0, 2.0]]).tolist() == [[0.0, 0.0, 2.0]]
    assert np.array_equal(relu(-np.ones((2, 3))), np.zeros((2, 3)))
    x = np.array([[0.5, 1.0], [2.0, 0.0]])
    assert np.array_equal(relu(x), x)
