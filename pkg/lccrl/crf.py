"""CRF

Linear-chain conditional random field over utterance labels. The potential of moving from label i to label j at
step t is transition[i, j] + (emission . y_t + bias)[j]; the extra last row of the transition matrix is the START
state, used only at the first step. There is no STOP state.

Scoring, the partition function and the loss are differentiable tape computations; Viterbi decoding and
posterior marginals work on plain arrays.
"""
import collections
import logging

import numpy as np

from lccrl import tensor as T
from lccrl.errors import DomainError, ShapeError
from lccrl.layers import uniform_init
from lccrl.parameters import ModelParams


log = logging.getLogger(__name__)

CrfParams = collections.namedtuple('CrfParams', 'emission bias transition')


def make_crf(params: ModelParams, name: str, feat_dim: int, num_labels: int, rng: np.random.Generator) -> None:
    params.add(name + '.emission', uniform_init(rng, (num_labels, feat_dim), feat_dim))
    params.add(name + '.bias', np.zeros(num_labels))
    params.add(name + '.transition', np.zeros((num_labels + 1, num_labels)))


def crf_params(params: ModelParams, name: str) -> CrfParams:
    return CrfParams(params[name + '.emission'], params[name + '.bias'], params[name + '.transition'])


def num_labels(params: CrfParams) -> int:
    return params.transition.shape[1]


def emission_scores(params: CrfParams, feats: list) -> T.Tensor:
    """
    Per-step label scores as a (T x L) matrix.

    :raises DomainError: For an empty feature list
    """
    if not feats:
        raise DomainError("CRF needs at least one step")
    matrix = T.stack(feats)
    return T.matmul(matrix, T.transpose(params.emission)) + T.repeat(params.bias, len(feats))


def _check_labels(labels: list, steps: int, count: int) -> None:
    if len(labels) != steps:
        raise ShapeError("{0} labels for {1} steps".format(len(labels), steps))
    for label in labels:
        if not 0 <= label < count:
            raise DomainError("label {0} outside 0..{1}".format(label, count - 1))


def path_score(emissions: T.Tensor, transition: T.Tensor, labels: list) -> T.Tensor:
    """
    Score of one labelling given emission scores and the transition matrix.
    """
    steps, count = emissions.shape
    _check_labels(labels, steps, count)
    labels = np.asarray(labels, dtype=np.int64)
    previous = np.concatenate([[count], labels[:-1]])
    emitted = T.sum(T.select(emissions, (np.arange(steps), labels)))
    moved = T.sum(T.select(transition, (previous, labels)))
    return emitted + moved


def forward_log_partition(emissions: T.Tensor, transition: T.Tensor) -> T.Tensor:
    """
    log of the sum over all labellings of exp(score), by the forward recursion in log space.
    """
    steps, count = emissions.shape
    between = T.select(transition, slice(0, count))
    alpha = T.select(transition, count) + T.select(emissions, 0)
    for t in range(1, steps):
        # scores[i, j] = alpha[i] + transition[i, j]
        scores = T.transpose(T.repeat(alpha, count)) + between
        alpha = T.logsumexp(scores, axis=0) + T.select(emissions, t)
    return T.logsumexp(alpha)


def score_sequence(params: CrfParams, feats: list, labels: list) -> T.Tensor:
    """
    Sum over steps of transition(previous, label) + emission(label), with START before the first step.

    :raises ShapeError: If the lengths differ
    :raises DomainError: If a label is out of range
    """
    if len(feats) != len(labels):
        raise ShapeError("{0} labels for {1} steps".format(len(labels), len(feats)))
    return path_score(emission_scores(params, feats), params.transition, labels)


def log_partition(params: CrfParams, feats: list) -> T.Tensor:
    """
    :raises DomainError: For an empty feature list
    """
    return forward_log_partition(emission_scores(params, feats), params.transition)


def crf_nll(params: CrfParams, feats: list, labels: list) -> T.Tensor:
    """
    Negative log-likelihood of the gold labelling: log_partition - score_sequence.
    """
    if len(feats) != len(labels):
        raise ShapeError("{0} labels for {1} steps".format(len(labels), len(feats)))
    emissions = emission_scores(params, feats)
    return forward_log_partition(emissions, params.transition) - path_score(emissions, params.transition, labels)


def viterbi(emissions: np.ndarray, transition: np.ndarray) -> tuple:
    """
    Best labelling of an emission array. The best completion scores are computed from the end, then the labels are
    chosen from the first step on; np.argmax keeps the first maximum, so among equally scoring labellings the one
    with the lowest label at the earliest differing step wins.

    :return: (labels, score)
    """
    steps, count = emissions.shape
    completion = np.zeros((steps, count))
    for t in range(steps - 2, -1, -1):
        completion[t] = np.max(transition[:count] + (emissions[t + 1] + completion[t + 1])[None, :], axis=1)
    scores = transition[count] + emissions[0] + completion[0]
    best = int(np.argmax(scores))
    total = float(scores[best])
    labels = [best]
    for t in range(1, steps):
        best = int(np.argmax(transition[best] + emissions[t] + completion[t]))
        labels.append(best)
    return labels, total


def viterbi_decode(params: CrfParams, feats: list) -> tuple:
    """
    The highest-scoring labelling and its score.

    :raises DomainError: For an empty feature list
    """
    emissions = emission_scores(params, feats)
    return viterbi(emissions.data, params.transition.data)


def _logsumexp(values: np.ndarray, axis: int) -> np.ndarray:
    peak = np.max(values, axis=axis, keepdims=True)
    return np.squeeze(peak, axis=axis) + np.log(np.sum(np.exp(values - peak), axis=axis))


def marginals(params: CrfParams, feats: list) -> np.ndarray:
    """
    Posterior probability of every label at every step, by forward-backward in log space.

    :return: (T x L) array whose rows sum to one
    """
    emissions = emission_scores(params, feats).data
    transition = params.transition.data
    steps, count = emissions.shape
    alpha = np.zeros((steps, count))
    beta = np.zeros((steps, count))
    alpha[0] = transition[count] + emissions[0]
    for t in range(1, steps):
        alpha[t] = _logsumexp(alpha[t - 1][:, None] + transition[:count], axis=0) + emissions[t]
    for t in range(steps - 2, -1, -1):
        beta[t] = _logsumexp(transition[:count] + (emissions[t + 1] + beta[t + 1])[None, :], axis=1)
    log_z = _logsumexp(alpha[-1], axis=0)
    return np.exp(alpha + beta - log_z)
