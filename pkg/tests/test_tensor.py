import numpy as np
import pytest

from core.errors import EmptyRowError, GraphConsumedError, ShapeError
from core.tensor import (
    Adam,
    AdamState,
    Tensor,
    adam_step,
    add,
    clip_grad_norm,
    concat_last_dim,
    cross_entropy,
    dropout,
    embedding_lookup,
    finite_diff_check,
    gather_last,
    layer_norm,
    masked_softmax,
    matmul,
    mul,
    no_grad,
    relu,
    reshape,
    sum_all,
    transpose,
)


def param(shape, seed=0):
    return Tensor(np.random.default_rng(seed).normal(size=shape), requires_grad=True)


def weighted_sum(x, seed=99):
    # A fixed random projection so every output coordinate matters
    weights = Tensor(np.random.default_rng(seed).normal(size=x.shape))
    return sum_all(mul(x, weights))


def test_matmul_gradient_matches_hand_result():
    a = Tensor([[1.0, 2.0]], requires_grad=True)
    b = Tensor([[3.0], [4.0]], requires_grad=True)
    sum_all(matmul(a, b)).backward()
    np.testing.assert_allclose(a.grad, [[3.0, 4.0]])
    np.testing.assert_allclose(b.grad, [[1.0], [2.0]])


def test_shared_input_accumulates():
    x = Tensor(3.0, requires_grad=True)
    y = mul(x, x)
    z = mul(y, y)
    z.backward()
    assert x.grad == pytest.approx(4 * 27.0)


def test_backward_twice_raises():
    x = param((2, 2))
    loss = sum_all(matmul(x, x))
    loss.backward()
    with pytest.raises(GraphConsumedError):
        loss.backward()


def test_backward_needs_a_scalar():
    with pytest.raises(ShapeError):
        add(param((2,)), param((2,))).backward()


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        matmul(param((2, 3)), param((2, 3)))


def test_no_grad_records_nothing():
    x = param((2, 2))
    with no_grad():
        y = matmul(x, x)
    assert not y.requires_grad


@pytest.mark.parametrize("build", [
    lambda: (lambda a, b: weighted_sum(matmul(a, b)), [param((2, 3, 4), 1), param((4, 5), 2)]),
    lambda: (lambda a, b: weighted_sum(add(a, b)), [param((3, 4), 3), param((4,), 4)]),
    lambda: (lambda a, b: weighted_sum(mul(a, b)), [param((3, 4), 5), param((1, 4), 6)]),
    lambda: (lambda a, b: weighted_sum(concat_last_dim([a, b])), [param((2, 3), 7), param((2, 2), 8)]),
    lambda: (lambda a: weighted_sum(relu(a)), [param((4, 5), 9)]),
    lambda: (lambda a: weighted_sum(reshape(a, (6, 2))), [param((3, 4), 10)]),
    lambda: (lambda a: weighted_sum(transpose(a, (1, 2, 0))), [param((2, 3, 4), 11)]),
    lambda: (lambda x, g, b: weighted_sum(layer_norm(x, g, b)), [param((3, 6), 12), param((6,), 13),
                                                                  param((6,), 14)]),
])
def test_primitive_gradients(build):
    fn, params = build()
    assert finite_diff_check(lambda: fn(*params), params) < 1e-6


def test_embedding_gradient_with_repeated_ids():
    table = param((5, 3), 15)
    ids = np.array([[0, 2, 2], [4, 0, 1]])
    assert finite_diff_check(lambda: weighted_sum(embedding_lookup(table, ids)), [table]) < 1e-6


def test_gather_last_gradient():
    x = param((2, 3, 4), 16)
    index = np.array([[0, 3, 3], [1, 2, 0], [2, 2, 2]])
    assert finite_diff_check(lambda: weighted_sum(gather_last(x, index)), [x]) < 1e-6


def test_masked_softmax_gradient():
    scores = param((2, 3, 4), 17)
    mask = np.array([[True, False, True, True], [False, True, False, False], [True, True, True, True]])
    assert finite_diff_check(lambda: weighted_sum(masked_softmax(scores, mask)), [scores]) < 1e-6


def test_cross_entropy_gradient_with_ignore_index():
    logits = param((2, 3, 6), 18)
    targets = np.array([[1, 0, 5], [2, 2, 0]])
    assert finite_diff_check(lambda: cross_entropy(logits, targets, ignore_index=0), [logits]) < 1e-6


def test_masked_softmax_rows():
    scores = Tensor(np.random.default_rng(0).normal(size=(3, 5)) * 50)
    mask = np.array([[1, 0, 1, 0, 1], [0, 0, 0, 1, 0], [1, 1, 1, 1, 1]], dtype=bool)
    probs = masked_softmax(scores, mask).data
    assert np.all(probs[~mask] == 0.0)
    np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-12)
    assert probs[1, 3] == 1.0


def test_masked_softmax_empty_row():
    with pytest.raises(EmptyRowError):
        masked_softmax(Tensor(np.zeros((2, 3))), np.array([[True, False, False], [False, False, False]]))


def test_cross_entropy_of_uniform_logits():
    loss = cross_entropy(Tensor(np.zeros((1, 4, 10))), np.array([[3, 4, 5, 0]]), ignore_index=0)
    assert loss.item() == pytest.approx(np.log(10))


def test_dropout_is_identity_without_rng():
    x = param((3, 3))
    assert dropout(x, 0.5, None) is x


def test_dropout_keeps_expectation():
    x = Tensor(np.ones((200, 200)))
    out = dropout(x, 0.25, np.random.default_rng(0)).data
    assert set(np.unique(out)) <= {0.0, 1.0 / 0.75}
    assert out.mean() == pytest.approx(1.0, abs=0.02)


def test_clip_grad_norm_scales_down():
    x = Tensor(np.zeros(2), requires_grad=True)
    x.grad = np.array([3.0, 4.0])
    assert clip_grad_norm([x], 1.0) == pytest.approx(5.0)
    np.testing.assert_allclose(x.grad, [0.6, 0.8])


def test_adam_first_step_moves_by_lr():
    x = Tensor(np.array([1.0, -1.0]), requires_grad=True)
    state = AdamState.for_params([x])
    adam_step([x], [np.array([0.5, -2.0])], state, lr=0.1)
    np.testing.assert_allclose(x.data, [0.9, -0.9], atol=1e-6)
    assert state.step == 1


def test_adam_step_with_zero_gradient_leaves_params_unchanged():
    start = np.array([[0.25, -1.5], [3.0, 0.0]])
    x = Tensor(start.copy(), requires_grad=True)
    y = Tensor(np.array([2.0]), requires_grad=True)
    optimizer = Adam([x, y], lr=0.5)
    x.grad = np.zeros_like(x.data)
    for _ in range(3):
        optimizer.step()
    assert np.array_equal(x.data, start)
    # A parameter that never received a gradient counts as zero
    assert y.data.tolist() == [2.0]
    assert optimizer.state.step == 3


def test_adam_minimizes_a_quadratic():
    x = Tensor(np.array([3.0, -2.0]), requires_grad=True)
    optimizer = Adam([x], lr=0.1)
    for _ in range(300):
        optimizer.zero_grad()
        sum_all(mul(x, x)).backward()
        optimizer.step()
    assert np.abs(x.data).max() < 0.05
