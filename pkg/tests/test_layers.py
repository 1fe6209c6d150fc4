import numpy as np
import pytest

from lccrl import layers
from lccrl import tensor as T
from lccrl.errors import DomainError, EmbeddingIndexError, ShapeError
from lccrl.parameters import ModelParams


@pytest.fixture()
def params():
    rng = np.random.default_rng(5)
    params = ModelParams()
    layers.make_embedding(params, 'words', 6, 3, rng)
    layers.make_lstm(params, 'cell', 3, 4, rng)
    layers.make_lstm(params, 'back', 3, 4, rng)
    layers.make_attention(params, 'pool', 8, 5, rng)
    layers.make_linear(params, 'head', 8, 3, rng)
    return params


def test_embedding_lookup_and_bounds(params):
    """
    Test that lookups return table rows and reject indices outside the table.
    """
    table = layers.embedding_table(params, 'words')
    assert np.array_equal(layers.embed(table, 2).data, params['words.weight'].data[2])
    assert layers.embed_many(table, [0, 5, 5]).shape == (3, 3)
    with pytest.raises(EmbeddingIndexError):
        layers.embed(table, 6)
    with pytest.raises(IndexError):
        layers.embed_many(table, [-1])


def test_embedding_gradient_touches_only_used_rows(params):
    """
    Test that only looked-up rows receive a gradient.
    """
    table = layers.embedding_table(params, 'words')
    with T.Tape() as tape:
        tape.backward(T.sum(layers.embed(table, 4)))
    grad = params['words.weight'].grad
    assert np.array_equal(grad[4], np.ones(3))
    assert not np.any(np.delete(grad, 4, axis=0))


def test_lstm_initialisation(params):
    """
    Test the gate layout sizes and the forget-gate bias of one.
    """
    cell = layers.lstm_params(params, 'cell')
    assert cell.w_ih.shape == (16, 3)
    assert cell.w_hh.shape == (16, 4)
    assert np.array_equal(cell.bias.data[4:8], np.ones(4))
    assert np.all(np.abs(cell.w_ih.data) <= 1.0 / np.sqrt(3))


def test_lstm_step_against_reference(params):
    """
    Test one LSTM step against a direct numpy computation with gate order input, forget, cell, output.
    """
    cell = layers.lstm_params(params, 'cell')
    rng = np.random.default_rng(1)
    x, h, c = rng.normal(size=3), rng.normal(size=4), rng.normal(size=4)
    h_next, c_next = layers.lstm_step(cell, T.Tensor(x), T.Tensor(h), T.Tensor(c))

    gates = cell.w_ih.data @ x + cell.w_hh.data @ h + cell.bias.data
    sigmoid = lambda v: 1.0 / (1.0 + np.exp(-v))  # noqa: E731
    i, f, g, o = sigmoid(gates[:4]), sigmoid(gates[4:8]), np.tanh(gates[8:12]), sigmoid(gates[12:])
    expected_c = f * c + i * g
    assert np.allclose(c_next.data, expected_c)
    assert np.allclose(h_next.data, o * np.tanh(expected_c))


def test_lstm_step_shape_mismatch(params):
    """
    Test that an input of the wrong width is a shape error.
    """
    cell = layers.lstm_params(params, 'cell')
    h, c = layers.zero_state(cell)
    with pytest.raises(ShapeError):
        layers.lstm_step(cell, T.zeros(5), h, c)


def test_lstm_sequence_matches_repeated_steps(params):
    """
    Test that the sequence runner equals stepping the cell by hand, in both directions.
    """
    cell = layers.lstm_params(params, 'cell')
    inputs = np.random.default_rng(2).normal(size=(4, 3))
    for reverse in (False, True):
        states = layers.lstm_sequence(cell, T.Tensor(inputs), reverse=reverse)
        h, c = layers.zero_state(cell)
        order = range(3, -1, -1) if reverse else range(4)
        for n in order:
            h, c = layers.lstm_step(cell, T.Tensor(inputs[n]), h, c)
            assert np.allclose(states[n].data, h.data)


def test_lstm_sequence_rejects_empty_input(params):
    """
    Test that an empty sequence is a domain error.
    """
    with pytest.raises(DomainError):
        layers.lstm_sequence(layers.lstm_params(params, 'cell'), T.Tensor(np.zeros((0, 3))))


def test_blstm_concatenates_directions(params):
    """
    Test that each BLSTM output is the forward state followed by the backward state.
    """
    fwd, bwd = layers.lstm_params(params, 'cell'), layers.lstm_params(params, 'back')
    inputs = T.Tensor(np.random.default_rng(3).normal(size=(3, 3)))
    outputs = layers.blstm_sequence(fwd, bwd, inputs)
    forward = layers.lstm_sequence(fwd, inputs)
    backward = layers.lstm_sequence(bwd, inputs, reverse=True)
    assert len(outputs) == 3
    for n in range(3):
        assert np.allclose(outputs[n].data, np.concatenate([forward[n].data, backward[n].data]))


def test_attention_pool_single_element_is_identity(params):
    """
    Test that pooling one vector returns that vector with weight one.
    """
    pool = layers.attention_params(params, 'pool')
    vector = T.Tensor(np.random.default_rng(4).normal(size=8))
    assert np.allclose(layers.attention_weights(pool, [vector]).data, [1.0])
    assert np.allclose(layers.self_attention_pool(pool, [vector]).data, vector.data)


def test_attention_weights_are_a_distribution(params):
    """
    Test that attention weights are positive and sum to one, and the pool is their weighted sum.
    """
    pool = layers.attention_params(params, 'pool')
    seq = np.random.default_rng(6).normal(size=(5, 8))
    weights = layers.attention_weights(pool, T.Tensor(seq)).data
    assert np.all(weights > 0)
    assert weights.sum() == pytest.approx(1.0)
    assert np.allclose(layers.self_attention_pool(pool, T.Tensor(seq)).data, seq.T @ weights)


def test_linear_softmax_heads(params):
    """
    Test the single-vector and row-wise heads against each other.
    """
    head = layers.linear_params(params, 'head')
    rows = np.random.default_rng(7).normal(size=(2, 8))
    log_probs = layers.linear_log_softmax_rows(head.weight, head.bias, T.Tensor(rows)).data
    for n in range(2):
        probs = layers.linear_softmax(head.weight, head.bias, T.Tensor(rows[n])).data
        assert np.allclose(np.exp(log_probs[n]), probs)


def test_dropout_modes():
    """
    Test identity at inference, inverted scaling while training and the rate checks.
    """
    x = T.Tensor(np.ones(1000))
    assert layers.dropout(x, 0.5, training=False) is x
    dropped = layers.dropout(x, 0.5, training=True, rng=np.random.default_rng(0)).data
    assert set(np.unique(dropped)) <= {0.0, 2.0}
    assert 0.4 < np.mean(dropped == 0.0) < 0.6
    with pytest.raises(DomainError):
        layers.dropout(x, 1.0, training=True, rng=np.random.default_rng(0))
    with pytest.raises(DomainError):
        layers.dropout(x, 0.3, training=True)


def test_identity_table_is_one_hot():
    """
    Test that an identity embedding table returns one-hot rows and doubles the gradient of a repeated row.
    """
    params = ModelParams()
    params.add('eye.weight', np.eye(3))
    table = layers.embedding_table(params, 'eye')
    assert np.array_equal(layers.embed(table, 2).data, [0.0, 0.0, 1.0])
    with T.Tape() as tape:
        tape.backward(T.sum(layers.embed(table, 1)) + T.sum(layers.embed(table, 1)))
    assert np.array_equal(params['eye.weight'].grad[1], [2.0, 2.0, 2.0])


def test_frozen_table_is_not_updated():
    """
    Test that the optimiser leaves a frozen embedding table untouched.
    """
    from lccrl.optimizer import Adam

    params = ModelParams()
    params.add('words.weight', np.ones((2, 2)))
    params.freeze('words.')
    table = layers.embedding_table(params, 'words')
    assert table.frozen
    with T.Tape() as tape:
        tape.backward(T.sum(layers.embed(table, 0)))
    Adam().step(params)
    assert np.array_equal(params['words.weight'].data, np.ones((2, 2)))


def test_zero_lstm_step():
    """
    Test the zero-weight step: gates at one half, so c' = c / 2 and h' = tanh(c') / 2.
    """
    params = ModelParams()
    layers.make_lstm(params, 'cell', 1, 1, np.random.default_rng(0))
    for name in ('cell.w_ih', 'cell.w_hh', 'cell.bias'):
        params[name].data[...] = 0.0
    cell = layers.lstm_params(params, 'cell')
    h, c = layers.lstm_step(cell, T.zeros(1), T.zeros(1), T.zeros(1))
    assert np.array_equal(h.data, [0.0]) and np.array_equal(c.data, [0.0])
    h, c = layers.lstm_step(cell, T.zeros(1), T.zeros(1), T.Tensor([1.0]))
    assert np.allclose(c.data, [0.5])
    assert np.allclose(h.data, [0.5 * np.tanh(0.5)])


def test_blstm_reversal_swaps_directions(params):
    """
    Test that the forward half on the reversed input equals the reversed backward half when the parameters swap.
    """
    fwd, bwd = layers.lstm_params(params, 'cell'), layers.lstm_params(params, 'back')
    inputs = np.random.default_rng(8).normal(size=(4, 3))
    original = layers.blstm_sequence(fwd, bwd, T.Tensor(inputs))
    reversed_outputs = layers.blstm_sequence(bwd, fwd, T.Tensor(inputs[::-1].copy()))
    for n in range(4):
        assert np.allclose(reversed_outputs[n].data[:4], original[3 - n].data[4:])
        assert np.allclose(reversed_outputs[n].data[4:], original[3 - n].data[:4])


def test_stacked_blstm_output_sizes(params):
    """
    Test that a two-layer stack keeps the sequence length and emits 2h-dimensional vectors.
    """
    rng = np.random.default_rng(9)
    layers.make_lstm(params, 'up.fwd', 8, 4, rng)
    layers.make_lstm(params, 'up.bwd', 8, 4, rng)
    stack = [(layers.lstm_params(params, 'cell'), layers.lstm_params(params, 'back')),
             (layers.lstm_params(params, 'up.fwd'), layers.lstm_params(params, 'up.bwd'))]
    outputs = layers.stacked_blstm(stack, T.Tensor(rng.normal(size=(5, 3))))
    assert len(outputs) == 5
    assert all(output.shape == (8,) for output in outputs)


def test_attention_is_permutation_invariant_and_convex(params):
    """
    Test that permuting the inputs permutes the weights and keeps the pooled vector inside the inputs' range.
    """
    pool = layers.attention_params(params, 'pool')
    seq = np.random.default_rng(10).normal(size=(4, 8))
    order = [2, 0, 3, 1]
    weights = layers.attention_weights(pool, T.Tensor(seq)).data
    permuted = layers.attention_weights(pool, T.Tensor(seq[order])).data
    assert np.allclose(permuted, weights[order])
    pooled = layers.self_attention_pool(pool, T.Tensor(seq)).data
    assert np.allclose(layers.self_attention_pool(pool, T.Tensor(seq[order])).data, pooled)
    assert np.all(pooled >= seq.min(axis=0) - 1e-12) and np.all(pooled <= seq.max(axis=0) + 1e-12)


def test_zero_attention_is_the_mean(params):
    """
    Test that zero attention parameters average the inputs.
    """
    params['pool.projection'].data[...] = 0.0
    params['pool.score'].data[...] = 0.0
    seq = np.random.default_rng(11).normal(size=(3, 8))
    assert np.allclose(layers.self_attention_pool(layers.attention_params(params, 'pool'), T.Tensor(seq)).data,
                       seq.mean(axis=0))


def test_linear_softmax_analytic():
    """
    Test the uniform output of a zero head and a ln 3 logit gap giving [0.75, 0.25].
    """
    x = T.Tensor([1.0, -1.0])
    uniform = layers.linear_softmax(T.zeros((3, 2)), T.zeros(3), x).data
    assert np.allclose(uniform, [1 / 3] * 3)
    weights = T.Tensor([[np.log(3.0), 0.0], [0.0, 0.0]])
    assert np.allclose(layers.linear_softmax(weights, T.zeros(2), x).data, [0.75, 0.25])


def test_dropout_statistics():
    """
    Test the survivor fraction and the preserved mean at rate 0.2.
    """
    x = T.Tensor(np.full(100000, 3.0))
    assert layers.dropout(x, 0.0, training=True, rng=np.random.default_rng(0)) is x
    dropped = layers.dropout(x, 0.2, training=True, rng=np.random.default_rng(1)).data
    assert 0.79 <= np.mean(dropped != 0.0) <= 0.81
    assert abs(dropped.mean() - 3.0) < 0.06
