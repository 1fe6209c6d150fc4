"""Gradient Check

Compares tape gradients with central finite differences, and builds the small models the `gradcheck` command
checks: each layer on its own, the full pre-training loss and the full labeller loss.
"""
import collections
import logging

import numpy as np

from lccrl import crf
from lccrl import layers
from lccrl import tensor as T
from lccrl.configuration import ModelConfiguration
from lccrl.errors import ContractError, DomainError
from lccrl.label_set import LabelSet
from lccrl.labeler import SceneLabeler
from lccrl.lccrl_model import LcCrlModel
from lccrl.parameters import ModelParams
from lccrl.vocabulary import IndexedConversation, Vocabulary


log = logging.getLogger(__name__)

TOLERANCE = 1e-4
# Below this magnitude round-off in f swamps the difference quotient, so the error turns absolute.
GRADIENT_FLOOR = 1e-5


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), GRADIENT_FLOOR)


def _coordinates(size: int, num_coordinates, rng: np.random.Generator) -> np.ndarray:
    if num_coordinates is None or num_coordinates >= size:
        return np.arange(size)
    return np.sort(rng.choice(size, size=num_coordinates, replace=False))


def finite_difference_check(f, params: ModelParams, epsilon: float = 1e-5, num_coordinates: int = None,
                            seed: int = 0, groups=None) -> float:
    """
    Largest relative error between the analytic gradient of `f` and its central-difference estimate.

    :param f: Callable with no arguments returning a scalar Tensor computed from `params`
    :param params: The parameters to perturb
    :param epsilon: Perturbation size, in [1e-6, 1e-3]
    :param num_coordinates: Coordinates sampled per parameter tensor; all when None
    :param seed: Seed of the coordinate sampling
    :param groups: Restrict the check to these parameter groups
    :raises DomainError: If epsilon is out of range
    :raises ContractError: If two evaluations of f at the same point differ (dropout left on)
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise DomainError("epsilon must lie in [1e-6, 1e-3], got {0}".format(epsilon))
    if params.dtype != np.float64:
        log.warning("Gradient check at {0}; tolerances assume float64".format(params.dtype))
    first, second = f().item(), f().item()
    if first != second:
        log.error("Function under gradient check returned {0} and then {1}".format(first, second))
        raise ContractError("function under gradient check is not deterministic; disable dropout")

    params.zero_grad()
    with T.Tape() as tape:
        tape.backward(f())
    analytic = {name: (tensor.grad.copy() if tensor.grad is not None else np.zeros_like(tensor.data))
                for name, tensor in params.items()}
    params.zero_grad()

    rng = np.random.default_rng(seed)
    worst, worst_name = 0.0, None
    for name in params.names(groups):
        data = params[name].data
        flat = data.reshape(-1)
        gradient = analytic[name].reshape(-1)
        for index in _coordinates(flat.size, num_coordinates, rng):
            original = flat[index]
            flat[index] = original + epsilon
            plus = f().item()
            flat[index] = original - epsilon
            minus = f().item()
            flat[index] = original
            error = relative_error(float(gradient[index]), (plus - minus) / (2.0 * epsilon))
            if error > worst:
                worst, worst_name = error, "{0}[{1}]".format(name, index)
    log.debug("Worst relative error {0:.3e} at {1}".format(worst, worst_name))
    return worst


def _random_tensor(rng: np.random.Generator, shape) -> T.Tensor:
    return T.Tensor(rng.uniform(-1.0, 1.0, size=shape))


def layer_checks(seed: int = 0, epsilon: float = 1e-5) -> collections.OrderedDict:
    """
    Check every layer type on random parameters and inputs.

    :return: Layer name -> max relative error
    """
    rng = np.random.default_rng(seed)
    params = ModelParams()
    layers.make_embedding(params, 'embedding', 5, 3, rng)
    layers.make_lstm(params, 'cell', 3, 2, rng)
    layers.make_lstm(params, 'fwd0', 3, 2, rng)
    layers.make_lstm(params, 'bwd0', 3, 2, rng)
    layers.make_lstm(params, 'fwd1', 4, 2, rng)
    layers.make_lstm(params, 'bwd1', 4, 2, rng)
    layers.make_attention(params, 'attention', 4, 3, rng)
    layers.make_linear(params, 'head', 4, 3, rng)
    crf.make_crf(params, 'crf', 4, 3, rng)
    params['crf.transition'].data[...] = rng.uniform(-1.0, 1.0, size=(4, 3))

    x = _random_tensor(rng, 3)
    h = _random_tensor(rng, 2)
    c = _random_tensor(rng, 2)
    sequence = _random_tensor(rng, (4, 3))
    feats = [_random_tensor(rng, 4) for _ in range(3)]
    stack = [(layers.lstm_params(params, 'fwd0'), layers.lstm_params(params, 'bwd0')),
             (layers.lstm_params(params, 'fwd1'), layers.lstm_params(params, 'bwd1'))]

    def _embedding():
        rows = layers.embed_many(layers.embedding_table(params, 'embedding'), [1, 3, 3])
        return T.sum(rows * rows)

    def _lstm_step():
        h_next, c_next = layers.lstm_step(layers.lstm_params(params, 'cell'), x, h, c)
        return T.sum(h_next * h_next) + T.sum(c_next)

    def _blstm():
        states = layers.stacked_blstm(stack, sequence)
        return T.sum(T.stack(states) * T.stack(states))

    def _attention():
        pooled = layers.self_attention_pool(layers.attention_params(params, 'attention'), T.stack(feats))
        return T.sum(pooled * pooled)

    def _linear_softmax():
        head = layers.linear_params(params, 'head')
        return T.select(T.log_softmax(layers.linear(head.weight, head.bias, feats[0])), 1)

    def _crf():
        return crf.crf_nll(crf.crf_params(params, 'crf'), feats, [2, 0, 1])

    checks = collections.OrderedDict([
        ('embedding', (_embedding, ['embedding'])),
        ('lstm_step', (_lstm_step, ['cell'])),
        ('stacked_blstm', (_blstm, ['fwd0', 'bwd0', 'fwd1', 'bwd1'])),
        ('self_attention', (_attention, ['attention'])),
        ('linear_softmax', (_linear_softmax, ['head'])),
        ('crf', (_crf, ['crf'])),
    ])
    return collections.OrderedDict((name, finite_difference_check(f, params, epsilon, groups=groups, seed=seed))
                                   for name, (f, groups) in checks.items())


def toy_vocabulary() -> Vocabulary:
    return Vocabulary(['a', 'b', 'c'], ['A', 'B'], min_count=1)


def toy_config() -> ModelConfiguration:
    return ModelConfiguration(word_dim=3, speaker_dim=2, hidden=4, encoder_layers=1, context_layers=1,
                              dropout=0.0, precision='float64')


def _spread(params: ModelParams, seed: int, scale: float = 0.8) -> None:
    # Wider than the fan-in init so that no gradient of the toy models vanishes.
    rng = np.random.default_rng(seed)
    for _, tensor in params.items():
        tensor.data[...] = rng.uniform(-scale, scale, size=tensor.data.shape)


def lccrl_check(seed: int = 0, epsilon: float = 1e-5, num_coordinates: int = 6) -> float:
    """
    Check the pre-training loss of a two-utterance conversation.
    """
    model = LcCrlModel.create(toy_config(), toy_vocabulary(), seed)
    _spread(model.params, seed)
    conversation = IndexedConversation(speakers=[0, 1], words=[[3, 4, 5], [5, 3]], labels=None)
    return finite_difference_check(lambda: model.conversation_nll(conversation), model.params, epsilon,
                                   num_coordinates, seed)


def labeler_check(seed: int = 0, epsilon: float = 1e-5, num_coordinates: int = 6) -> float:
    """
    Check the labeller loss of a three-utterance conversation with three labels.
    """
    model = SceneLabeler.create(toy_config(), toy_vocabulary(), LabelSet(['C1', 'C2', 'C3']), seed)
    _spread(model.params, seed)
    conversation = IndexedConversation(speakers=[0, 1, 0], words=[[3, 4], [5], [4, 4, 3]], labels=[0, 1, 1])
    return finite_difference_check(lambda: model.nll(conversation), model.params, epsilon, num_coordinates, seed)


CHECKS = ('layers', 'lccrl', 'labeler')


def run_checks(model: str, seed: int = 0, epsilon: float = 1e-5) -> collections.OrderedDict:
    """
    :param model: One of CHECKS
    :return: Check name -> max relative error
    """
    if model == 'layers':
        return layer_checks(seed, epsilon)
    if model == 'lccrl':
        return collections.OrderedDict([('lccrl', lccrl_check(seed, epsilon))])
    if model == 'labeler':
        return collections.OrderedDict([('labeler', labeler_check(seed, epsilon))])
    raise DomainError("unknown gradient check '{0}', expected one of {1}".format(model, CHECKS))
