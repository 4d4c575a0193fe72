import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from microseg.core import (
    AdamWHyper,
    NonFiniteError,
    Parameter,
    Tensor,
    adamw_step,
    concat,
    cross_entropy,
    dropout,
    finite_diff_gradient,
    gelu,
    layer_lr,
    layer_norm,
    log_softmax,
    max_relative_error,
    scaled_dot_attention,
    softmax,
    take,
)


def check_grad(build, *shapes, rng, tol=1e-6):
    """Backprop of sum(build(*xs) * probe) against central differences, for every input."""
    xs = [rng.normal(size=s) for s in shapes]
    probe = rng.normal(size=build(*[Tensor(x) for x in xs]).shape)
    params = [Parameter(x.copy()) for x in xs]
    (build(*params) * probe).sum().backward()
    for p, x in zip(params, xs):
        def f(arr, p=p):
            args = [Tensor(q.data) if q is not p else Tensor(arr) for q in params]
            return float((build(*args).data * probe).sum())
        num = finite_diff_gradient(f, p.data.copy())
        assert max_relative_error(p.gradient, num, floor=1e-6) < tol


def test_elementwise_and_matmul_gradients(rng):
    check_grad(lambda a, b: a * b + a, (3, 4), (3, 4), rng=rng)
    check_grad(lambda a, b: a @ b, (2, 3, 4), (4, 5), rng=rng)
    check_grad(lambda a, b: a - b, (3, 1), (1, 4), rng=rng)  # broadcast both ways


def test_shape_op_gradients(rng):
    check_grad(lambda a: a.reshape(6, 2).transpose(1, 0), (3, 4), rng=rng)
    check_grad(lambda a: take(a, (slice(None), [0, 2, 2])), (3, 4), rng=rng)
    check_grad(lambda a, b: concat([a, b], axis=1), (2, 3), (2, 2), rng=rng)
    check_grad(lambda a: a.mean(axis=0, keepdims=True) + a.sum(), (3, 4), rng=rng)


def test_nonlinearity_gradients(rng):
    check_grad(lambda a: softmax(a, axis=-1), (3, 5), rng=rng)
    check_grad(lambda a: log_softmax(a, axis=0), (4, 2), rng=rng)
    check_grad(lambda a: gelu(a), (10,), rng=rng)
    check_grad(lambda a, g, b: layer_norm(a, g, b), (3, 6), (6,), (6,), rng=rng)


def test_attention_gradients(rng):
    check_grad(lambda q, k, v: scaled_dot_attention(q, k, v), (2, 3, 4), (2, 5, 4), (2, 5, 4), rng=rng)


def test_cross_entropy_matches_manual(rng):
    logits = rng.normal(size=(4, 3))
    y = np.array([0, 2, 1, 2])
    manual = -np.mean([logits[i, y[i]] - np.log(np.exp(logits[i]).sum()) for i in range(4)])
    assert cross_entropy(Tensor(logits), y).data == pytest.approx(manual, abs=1e-12)
    check_grad(lambda a: cross_entropy(a, y), (4, 3), rng=rng)


@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(-700, 700)))
def test_softmax_is_a_distribution_even_for_large_inputs(x):
    p = softmax(Tensor(x)).data
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_softmax_rejects_empty_axis():
    with pytest.raises(ValueError):
        softmax(Tensor(np.zeros((2, 0))))


def test_layer_norm_output_statistics(rng):
    x = rng.normal(3.0, 5.0, size=(4, 16))
    y = layer_norm(Tensor(x), Tensor(np.ones(16)), Tensor(np.zeros(16))).data
    assert np.allclose(y.mean(axis=-1), 0.0, atol=1e-12)
    assert np.allclose(y.var(axis=-1), 1.0, atol=1e-4)


def test_non_finite_values_raise():
    with pytest.raises(NonFiniteError):
        Tensor([1.0, np.nan])
    with pytest.raises(NonFiniteError):
        Tensor([1e300]) * Tensor([1e300])


def test_dropout_identity_at_eval_and_scaled_in_training(rng):
    x = Tensor(np.ones(10000))
    assert dropout(x, 0.5, rng, training=False) is x
    y = dropout(x, 0.5, rng, training=True).data
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.05


def test_attention_rejects_mismatched_dims(rng):
    with pytest.raises(ValueError):
        scaled_dot_attention(Tensor(rng.normal(size=(2, 4))), Tensor(rng.normal(size=(3, 5))),
                             Tensor(rng.normal(size=(3, 4))))


def test_gradient_accumulates_over_shared_use():
    p = Parameter([2.0])
    (p * p + p).sum().backward()
    assert p.gradient[0] == pytest.approx(5.0)


def test_layer_lr_decays_towards_input():
    assert layer_lr(1.0, 0.5, 3, 3) == 1.0
    assert layer_lr(1.0, 0.5, 3, 0) == 0.125


def test_adamw_first_step_matches_closed_form():
    # first Adam step has m_hat = g and v_hat = g**2, so the update is lr * sign(g)
    p = Parameter([1.0, -2.0], layer_index=1)
    q = Parameter([3.0], layer_index=0)
    p.grad = np.array([0.5, -4.0])
    q.grad = np.array([2.0])
    adamw_step([p, q], base_lr=0.1, decay_factor=0.5, hyper=AdamWHyper(weight_decay=0.0))
    assert np.allclose(p.data, [0.9, -1.9], atol=1e-7)
    assert np.allclose(q.data, [2.95], atol=1e-7)


def test_adamw_decoupled_weight_decay_with_zero_gradient():
    p = Parameter([2.0])
    p.grad = np.zeros(1)
    adamw_step([p], base_lr=0.1, hyper=AdamWHyper(weight_decay=0.5))
    assert p.data[0] == pytest.approx(2.0 * (1 - 0.05))


def test_adamw_validates_inputs():
    p = Parameter([1.0])
    p.grad = np.array([np.inf])
    with pytest.raises(NonFiniteError):
        adamw_step([p], 0.1)
    with pytest.raises(ValueError):
        adamw_step([Parameter([1.0])], 0.1, decay_factor=0.0)


def test_parameter_layer_index_is_read_only():
    p = Parameter([1.0], layer_index=2)
    with pytest.raises(AttributeError):
        p.layer_index = 3
    with pytest.raises(ValueError):
        Parameter([1.0], layer_index=-1)


def test_finite_diff_requires_float_array():
    with pytest.raises(TypeError):
        finite_diff_gradient(lambda x: x.sum(), np.arange(3))
