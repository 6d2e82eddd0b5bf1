"""Autodiff primitives: forward values, analytic gradients, harness behavior."""

import math

import numpy as np
import pytest

from rumornet import autodiff as ad
from rumornet import gradsuite


def test_kmax_preserves_original_order():
    out = ad.kmax_pool(ad.constant([3.0, 1.0, 5.0, 2.0]), 2)
    assert out.values.tolist() == [3.0, 5.0]


def test_kmax_k1_is_max_pool():
    v = [0.5, -1.0, 2.5, 2.0]
    out = ad.kmax_pool(ad.constant(v), 1)
    assert out.values.tolist() == [max(v)]


def test_kmax_ties_take_earliest_index():
    x = ad.parameter([2.0, 2.0, 2.0, 1.0])
    out = ad.kmax_pool(x, 2)
    ad.backward(out.sum())
    assert x.grad.tolist() == [1.0, 1.0, 0.0, 0.0]


def test_kmax_gradient_routes_one_to_selected():
    x = ad.parameter([3.0, 1.0, 5.0, 2.0])
    ad.backward(ad.kmax_pool(x, 2).sum())
    assert x.grad.tolist() == [1.0, 0.0, 1.0, 0.0]


def test_kmax_k_out_of_range():
    with pytest.raises(ValueError):
        ad.kmax_pool(ad.constant([1.0, 2.0]), 3)


def test_sigmoid_matches_logistic_formula():
    x = np.linspace(-30.0, 30.0, 2001)
    out = ad.sigmoid(ad.constant(x)).values
    np.testing.assert_allclose(out, 1.0 / (1.0 + np.exp(-x)), atol=1e-15)
    assert ad.sigmoid(ad.constant(1e6)).values == 1.0  # saturates, no overflow
    assert ad.sigmoid(ad.constant(-1e6)).values == 0.0


def test_softmax_masked_equal_logits():
    out = ad.softmax_masked(ad.constant([0.3, 0.3]), np.array([True, True]))
    assert out.values.tolist() == [0.5, 0.5]


def test_softmax_masked_zero_at_masked_and_sums_to_one():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 8))
        mask = rng.random(n) < 0.6
        if not mask.any():
            mask[0] = True
        out = ad.softmax_masked(ad.constant(rng.normal(size=n)), mask).values
        assert np.all(out[~mask] == 0.0)
        assert math.isclose(out.sum(), 1.0, abs_tol=1e-12)


def test_softmax_masked_all_masked_raises():
    with pytest.raises(ValueError):
        ad.softmax_masked(ad.constant([1.0, 2.0]), np.array([False, False]))


def test_softmax_shift_invariance():
    rng = np.random.default_rng(3)
    logits = rng.normal(size=6)
    mask = np.array([True, True, False, True, True, True])
    a = ad.softmax_masked(ad.constant(logits), mask).values
    b = ad.softmax_masked(ad.constant(logits + 11.25), mask).values
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_conv1d_valid_output_length():
    out = ad.conv1d_valid(ad.constant(np.ones((6, 3))), ad.constant(np.ones((5, 3))))
    assert out.shape == (2,)


def test_conv1d_valid_is_frobenius_per_window():
    x = np.arange(12.0).reshape(4, 3)
    f = np.array([[1.0, 0.0, -1.0], [0.5, 0.5, 0.5]])
    out = ad.conv1d_valid(ad.constant(x), ad.constant(f)).values
    expect = [float((x[i : i + 2] * f).sum()) for i in range(3)]
    assert out.tolist() == expect


def test_conv1d_filter_taller_than_input():
    with pytest.raises(ad.ShapeError):
        ad.conv1d_valid(ad.constant(np.ones((3, 2))), ad.constant(np.ones((5, 2))))


def test_backward_square_example():
    w = ad.parameter([1.0, 2.0])
    ad.backward(ad.mul(w, w).sum())
    assert w.grad.tolist() == [2.0, 4.0]


def test_backward_sigmoid_at_zero():
    x = ad.parameter(0.0)
    ad.backward(ad.sigmoid(x))
    assert math.isclose(float(x.grad), 0.25, abs_tol=1e-15)


def test_backward_constant_loss_is_noop():
    loss = ad.constant(3.0)
    ad.backward(loss)  # nothing to populate, must not raise
    assert loss.grad is None


def test_backward_rejects_nonscalar():
    w = ad.parameter([1.0, 2.0])
    with pytest.raises(ValueError):
        ad.backward(ad.mul(w, w))


def test_backward_accumulates_across_calls():
    w = ad.parameter([1.0, 2.0])
    ad.backward(ad.mul(w, w).sum())
    ad.backward(ad.mul(w, w).sum())
    assert w.grad.tolist() == [4.0, 8.0]


def test_shared_node_gradient_accumulates():
    w = ad.parameter([2.0])
    y = ad.mul(w, w)  # w used twice through one node
    z = (y + y).sum()
    ad.backward(z)
    assert w.grad.tolist() == [8.0]


def test_shape_mismatch_reports_both_shapes():
    with pytest.raises(ad.ShapeError, match=r"\(2,\).*\(3,\)"):
        ad.add(ad.constant([1.0, 2.0]), ad.constant([1.0, 2.0, 3.0]))


def test_bias_broadcast_over_rows():
    m = ad.parameter(np.zeros((3, 2)))
    b = ad.parameter(np.array([1.0, 2.0]))
    out = m + b
    ad.backward(out.sum())
    assert b.grad.tolist() == [3.0, 3.0]
    assert m.grad.tolist() == np.ones((3, 2)).tolist()


def test_matmul_vector_cases():
    m = np.arange(6.0).reshape(2, 3)
    v = np.array([1.0, 2.0])
    u = np.array([1.0, 0.0, -1.0])
    assert (ad.constant(v) @ ad.constant(m)).values.tolist() == (v @ m).tolist()
    assert (ad.constant(m) @ ad.constant(u)).values.tolist() == (m @ u).tolist()
    assert float((ad.constant(v) @ ad.constant(v)).values) == 5.0


def test_dropout_eval_is_identity():
    x = ad.constant([1.0, -2.0, 3.0])
    assert ad.dropout(x, 0.5, train=False) is x


def test_dropout_train_expectation_and_scaling():
    rng = np.random.default_rng(11)
    x = ad.constant(np.ones(20000))
    out = ad.dropout(x, 0.3, train=True, rng=rng).values
    kept = out != 0.0
    np.testing.assert_allclose(out[kept], 1.0 / 0.7, atol=1e-12)
    assert abs(out.mean() - 1.0) < 0.02


def test_dropout_bad_rate():
    with pytest.raises(ValueError):
        ad.dropout(ad.constant([1.0]), 1.0, train=True, rng=np.random.default_rng(0))


def test_grad_check_linear_is_machine_precision():
    w = ad.parameter([0.3, -0.7, 1.1])
    c = ad.constant([2.0, -1.0, 0.5])
    report = ad.grad_check(lambda: ad.mul(w, c).sum(), [w])
    assert report.passed
    assert report.max_rel_error < 1e-9


def test_grad_check_tanh_network():
    rng = np.random.default_rng(0)
    W = ad.parameter(rng.normal(0, 0.4, size=(4, 3)))
    x = ad.parameter(rng.normal(0, 0.4, size=4))
    report = ad.grad_check(lambda: ad.tanh(x @ W).sum(), [W, x], epsilon=1e-5)
    assert report.passed
    assert report.max_rel_error < 1e-4


def test_grad_check_detects_nondeterminism():
    rng = np.random.default_rng(5)
    x = ad.parameter([1.0, 2.0])
    with pytest.raises(ad.NondeterminismError):
        ad.grad_check(lambda: ad.dropout(x, 0.5, train=True, rng=rng).sum(), [x])


def test_grad_check_epsilon_bounds():
    x = ad.parameter([1.0])
    with pytest.raises(ValueError):
        ad.grad_check(lambda: x.sum(), [x], epsilon=0.5)


def test_primitive_suite_all_pass():
    entries = gradsuite.primitive_suite(trials=25, seed=123)
    names = {e.name for e in entries}
    assert {"matmul", "conv1d_valid", "kmax_pool", "softmax_masked", "dropout"} <= names
    for entry in entries:
        assert entry.report.passed, f"{entry.name}: {entry.report}"
