"""Layers

Neural building blocks of both models: embedding tables, LSTM and bidirectional LSTM recurrences, additive
self-attention pooling, linear softmax heads and inverted dropout. Layers keep no state besides their parameter
tensors; everything is expressed through lccrl.tensor operations.

LSTM gate blocks are laid out in the order input, forget, cell, output.
"""
import collections
import logging

import numpy as np

from lccrl import tensor as T
from lccrl.errors import DomainError, EmbeddingIndexError, ShapeError
from lccrl.parameters import ModelParams


log = logging.getLogger(__name__)

LstmParams = collections.namedtuple('LstmParams', 'w_ih w_hh bias')
AttentionParams = collections.namedtuple('AttentionParams', 'projection score')
LinearParams = collections.namedtuple('LinearParams', 'weight bias')


class EmbeddingTable:
    """
    A lookup table whose rows embed symbols. Frozen tables are skipped by the optimiser.
    """

    def __init__(self, matrix: T.Tensor, frozen: bool = False):
        self.matrix = matrix
        self.frozen = frozen

    @property
    def vocab_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def check_index(self, index: int) -> None:
        if not 0 <= index < self.vocab_size:
            raise EmbeddingIndexError("index {0} outside embedding table of {1} rows".format(index, self.vocab_size))


def uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def make_embedding(params: ModelParams, name: str, vocab_size: int, dim: int, rng: np.random.Generator) -> None:
    params.add(name + '.weight', uniform_init(rng, (vocab_size, dim), dim))


def make_lstm(params: ModelParams, name: str, input_dim: int, hidden: int, rng: np.random.Generator) -> None:
    params.add(name + '.w_ih', uniform_init(rng, (4 * hidden, input_dim), input_dim))
    params.add(name + '.w_hh', uniform_init(rng, (4 * hidden, hidden), hidden))
    bias = uniform_init(rng, (4 * hidden,), hidden)
    bias[hidden:2 * hidden] = 1.0
    params.add(name + '.bias', bias)


def make_attention(params: ModelParams, name: str, input_dim: int, attention_dim: int,
                   rng: np.random.Generator) -> None:
    params.add(name + '.projection', uniform_init(rng, (attention_dim, input_dim), input_dim))
    params.add(name + '.score', uniform_init(rng, (attention_dim,), attention_dim))


def make_linear(params: ModelParams, name: str, input_dim: int, output_dim: int, rng: np.random.Generator) -> None:
    params.add(name + '.weight', uniform_init(rng, (output_dim, input_dim), input_dim))
    params.add(name + '.bias', uniform_init(rng, (output_dim,), input_dim))


def embedding_table(params: ModelParams, name: str) -> EmbeddingTable:
    name = name + '.weight'
    return EmbeddingTable(params[name], frozen=params.is_frozen(name))


def lstm_params(params: ModelParams, name: str) -> LstmParams:
    return LstmParams(params[name + '.w_ih'], params[name + '.w_hh'], params[name + '.bias'])


def attention_params(params: ModelParams, name: str) -> AttentionParams:
    return AttentionParams(params[name + '.projection'], params[name + '.score'])


def linear_params(params: ModelParams, name: str) -> LinearParams:
    return LinearParams(params[name + '.weight'], params[name + '.bias'])


def embed(table: EmbeddingTable, index: int) -> T.Tensor:
    """
    Return row `index` of the table; its gradient flows into that row only.

    :raises EmbeddingIndexError: If the index is outside the table
    """
    table.check_index(index)
    return T.select(table.matrix, int(index))


def embed_many(table: EmbeddingTable, indices) -> T.Tensor:
    """
    Look up several rows at once, returning a (len(indices) x dim) matrix.
    """
    for index in indices:
        table.check_index(index)
    return T.select(table.matrix, np.asarray(indices, dtype=np.int64))


def _hidden_size(params: LstmParams) -> int:
    return params.w_hh.shape[1]


def _lstm_cell(gates: T.Tensor, c: T.Tensor, hidden: int) -> tuple:
    i = T.sigmoid(T.select(gates, slice(0, hidden)))
    f = T.sigmoid(T.select(gates, slice(hidden, 2 * hidden)))
    g = T.tanh(T.select(gates, slice(2 * hidden, 3 * hidden)))
    o = T.sigmoid(T.select(gates, slice(3 * hidden, 4 * hidden)))
    c_next = f * c + i * g
    h_next = o * T.tanh(c_next)
    return h_next, c_next


def lstm_step(params: LstmParams, x: T.Tensor, h: T.Tensor, c: T.Tensor) -> tuple:
    """
    One LSTM step: c' = f*c + i*g, h' = o*tanh(c').

    :return: The pair (h', c')
    :raises ShapeError: If x, h or c do not fit the parameters
    """
    hidden = _hidden_size(params)
    if x.shape != (params.w_ih.shape[1],) or h.shape != (hidden,) or c.shape != (hidden,):
        raise ShapeError("lstm_step: input {0}, h {1}, c {2} do not fit w_ih {3}".format(
            x.shape, h.shape, c.shape, params.w_ih.shape))
    gates = T.matmul(params.w_ih, x) + T.matmul(params.w_hh, h) + params.bias
    return _lstm_cell(gates, c, hidden)


def zero_state(params: LstmParams) -> tuple:
    hidden = _hidden_size(params)
    return T.zeros(hidden, dtype=params.w_hh.dtype), T.zeros(hidden, dtype=params.w_hh.dtype)


def lstm_sequence(params: LstmParams, inputs: T.Tensor, reverse: bool = False) -> list:
    """
    Run an LSTM over the rows of an (N x d_in) matrix from zero initial states. The input projection of the whole
    sequence is a single matrix product.

    :param inputs: Input matrix, one row per position
    :param reverse: Consume the rows from last to first
    :return: Hidden states aligned with the input rows
    """
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise DomainError("lstm_sequence needs a non-empty (N x d) input, got shape {0}".format(inputs.shape))
    if inputs.shape[1] != params.w_ih.shape[1]:
        raise ShapeError("lstm_sequence: input width {0} does not fit w_ih {1}".format(
            inputs.shape[1], params.w_ih.shape))
    hidden = _hidden_size(params)
    projected = T.matmul(inputs, T.transpose(params.w_ih))
    h, c = zero_state(params)
    positions = range(inputs.shape[0] - 1, -1, -1) if reverse else range(inputs.shape[0])
    outputs = [None] * inputs.shape[0]
    for n in positions:
        gates = T.select(projected, n) + T.matmul(params.w_hh, h) + params.bias
        h, c = _lstm_cell(gates, c, hidden)
        outputs[n] = h
    return outputs


def _as_matrix(inputs) -> T.Tensor:
    if isinstance(inputs, T.Tensor):
        return inputs
    if not inputs:
        raise DomainError("empty input sequence")
    return T.stack(inputs)


def blstm_sequence(params_fwd: LstmParams, params_bwd: LstmParams, inputs) -> list:
    """
    Bidirectional LSTM: each output is the forward state at n concatenated with the backward state at n.

    :param inputs: List of input vectors, or an (N x d_in) matrix
    :return: One vector of size 2h per position
    :raises DomainError: For an empty sequence
    """
    matrix = _as_matrix(inputs)
    forward = lstm_sequence(params_fwd, matrix)
    backward = lstm_sequence(params_bwd, matrix, reverse=True)
    return [T.concat([f, b]) for f, b in zip(forward, backward)]


def stacked_blstm(layers: list, inputs, dropout_rate: float = 0.0, training: bool = False, rng=None) -> list:
    """
    Stack of BLSTM layers; layer k consumes the outputs of layer k-1. Dropout applies to each layer's input.

    :param layers: (forward, backward) LstmParams pairs, bottom first
    """
    matrix = _as_matrix(inputs)
    outputs = None
    for params_fwd, params_bwd in layers:
        matrix = dropout(matrix, dropout_rate, training, rng)
        outputs = blstm_sequence(params_fwd, params_bwd, matrix)
        matrix = T.stack(outputs)
    return outputs


def stacked_lstm(layers: list, inputs, reverse: bool = False, dropout_rate: float = 0.0, training: bool = False,
                 rng=None) -> list:
    """
    Stack of unidirectional LSTM layers, returning the top layer's states aligned with the inputs.
    """
    matrix = _as_matrix(inputs)
    outputs = None
    for params in layers:
        matrix = dropout(matrix, dropout_rate, training, rng)
        outputs = lstm_sequence(params, matrix, reverse=reverse)
        matrix = T.stack(outputs)
    return outputs


def attention_weights(params: AttentionParams, seq) -> T.Tensor:
    """
    softmax over n of score . tanh(projection . c_n)
    """
    matrix = _as_matrix(seq)
    hidden = T.tanh(T.matmul(matrix, T.transpose(params.projection)))
    return T.softmax(T.matmul(hidden, params.score))


def self_attention_pool(params: AttentionParams, seq) -> T.Tensor:
    """
    Summarise a sequence of vectors as their attention-weighted sum.

    :raises DomainError: For an empty sequence
    """
    matrix = _as_matrix(seq)
    return T.matmul(T.transpose(matrix), attention_weights(params, matrix))


def linear(weights: T.Tensor, bias: T.Tensor, x: T.Tensor) -> T.Tensor:
    return T.matmul(weights, x) + bias


def linear_softmax(weights: T.Tensor, bias: T.Tensor, x: T.Tensor) -> T.Tensor:
    return T.softmax(linear(weights, bias, x))


def linear_log_softmax_rows(weights: T.Tensor, bias: T.Tensor, rows: T.Tensor) -> T.Tensor:
    """
    Log-probabilities for every row of an (N x d) matrix under the same linear head.
    """
    logits = T.matmul(rows, T.transpose(weights)) + T.repeat(bias, rows.shape[0])
    return T.log_softmax(logits)


def dropout(x: T.Tensor, rate: float, training: bool, rng: np.random.Generator = None) -> T.Tensor:
    """
    Inverted dropout: while training, zero each element with probability `rate` and scale survivors by
    1 / (1 - rate). Identity at inference or for rate 0.

    :raises DomainError: If the rate is outside [0, 1)
    """
    if not 0.0 <= rate < 1.0:
        raise DomainError("dropout rate must be in [0, 1), got {0}".format(rate))
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise DomainError("dropout in training mode needs a random generator")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * T.Tensor(mask, dtype=x.dtype)
