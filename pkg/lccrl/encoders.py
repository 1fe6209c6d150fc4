"""Encoders

The three encoders shared by the pre-training model and the labeller:

* utterance encoder: S^t = SelfAttention(BLSTM([q; w_1], ..., [q; w_N]))
* past-context encoder: L^t, a forward LSTM over S^1..S^(t-1)
* future-context encoder: R^t, a backward LSTM over S^(t+1)..S^T

Their parameters live under the shared groups theta_w, theta_q, theta_c, theta_s, theta_l and theta_r, so a model
of either kind can load them from the other's checkpoint.
"""
import logging

import numpy as np

from lccrl import configuration
from lccrl import layers
from lccrl import tensor as T
from lccrl.errors import DomainError
from lccrl.parameters import ModelParams


log = logging.getLogger(__name__)


class EncodedConversation:
    """
    Utterance vectors S^1..S^T with the past contexts L^1..L^(T+1) and future contexts R^0..R^T. Indices follow
    the 1-based utterance numbering: L^1 and R^T are zero states, L^(T+1) and R^0 cover the whole conversation.
    """

    def __init__(self, utterances: list, past: list, future: list):
        self.utterances = utterances
        self._past = past
        self._future = future

    def __len__(self) -> int:
        return len(self.utterances)

    def utterance(self, t: int) -> T.Tensor:
        return self.utterances[t - 1]

    def past_context(self, t: int) -> T.Tensor:
        """L^t for t in 1..T+1."""
        return self._past[t - 1]

    def future_context(self, t: int) -> T.Tensor:
        """R^t for t in 0..T."""
        return self._future[t]


def make_shared_parameters(params: ModelParams, config: configuration.ModelConfiguration, num_words: int,
                           num_speakers: int, rng: np.random.Generator) -> None:
    """
    Register the shared encoder parameters with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initial values.
    """
    hidden = config.hidden
    layers.make_embedding(params, 'theta_w', num_words, config.word_dim, rng)
    layers.make_embedding(params, 'theta_q', num_speakers, config.speaker_dim, rng)
    input_dim = config.speaker_dim + config.word_dim
    for k in range(config.encoder_layers):
        layers.make_lstm(params, 'theta_c.{0}.fwd'.format(k), input_dim, hidden, rng)
        layers.make_lstm(params, 'theta_c.{0}.bwd'.format(k), input_dim, hidden, rng)
        input_dim = 2 * hidden
    layers.make_attention(params, 'theta_s', 2 * hidden, configuration.attention_dim(config), rng)
    for group in ('theta_l', 'theta_r'):
        input_dim = 2 * hidden
        for k in range(config.context_layers):
            layers.make_lstm(params, '{0}.{1}'.format(group, k), input_dim, hidden, rng)
            input_dim = hidden


class ConversationEncoder:
    """
    Runs the utterance, past-context and future-context encoders over one conversation.
    """

    def __init__(self, params: ModelParams, config: configuration.ModelConfiguration):
        self._params = params
        self._config = config
        self.speaker_blind = config.speaker_blind

    @property
    def context_dim(self) -> int:
        return self._config.hidden

    @property
    def utterance_dim(self) -> int:
        return 2 * self._config.hidden

    def word_table(self) -> layers.EmbeddingTable:
        return layers.embedding_table(self._params, 'theta_w')

    def speaker_table(self) -> layers.EmbeddingTable:
        return layers.embedding_table(self._params, 'theta_q')

    def speaker_vector(self, speaker: int) -> T.Tensor:
        """
        q^t, or a zero vector when the encoder is speaker-blind.
        """
        table = self.speaker_table()
        table.check_index(speaker)
        if self.speaker_blind:
            return T.zeros(table.dim, dtype=table.matrix.dtype)
        return layers.embed(table, speaker)

    def _utterance_layers(self) -> list:
        return [(layers.lstm_params(self._params, 'theta_c.{0}.fwd'.format(k)),
                 layers.lstm_params(self._params, 'theta_c.{0}.bwd'.format(k)))
                for k in range(self._config.encoder_layers)]

    def _context_layers(self, group: str) -> list:
        return [layers.lstm_params(self._params, '{0}.{1}'.format(group, k))
                for k in range(self._config.context_layers)]

    def encode_utterance(self, speaker: int, words: list, training: bool = False, rng=None) -> T.Tensor:
        """
        Embed one utterance. The speaker vector is concatenated to every word vector before the BLSTM.

        :param speaker: Speaker index
        :param words: Word indices, at least one
        :return: S^t of size 2h
        :raises DomainError: For an empty word list
        """
        if not words:
            raise DomainError("cannot encode an utterance without words")
        word_vectors = layers.embed_many(self.word_table(), words)
        speaker_vectors = T.repeat(self.speaker_vector(speaker), len(words))
        inputs = T.concat([speaker_vectors, word_vectors], axis=1)
        states = layers.stacked_blstm(self._utterance_layers(), inputs, self._config.dropout, training, rng)
        return layers.self_attention_pool(layers.attention_params(self._params, 'theta_s'), states)

    def encode_contexts(self, utterances: list, training: bool = False, rng=None) -> tuple:
        """
        Past and future contexts of every utterance.

        :param utterances: S^1..S^T
        :return: (past, future) where past[t-1] = L^t for t in 1..T+1 and future[t] = R^t for t in 0..T
        :raises DomainError: For an empty conversation
        """
        if not utterances:
            raise DomainError("cannot encode an empty conversation")
        dtype = utterances[0].dtype
        empty = T.zeros(self.context_dim, dtype=dtype)
        forward = layers.stacked_lstm(self._context_layers('theta_l'), utterances,
                                      dropout_rate=self._config.dropout, training=training, rng=rng)
        backward = layers.stacked_lstm(self._context_layers('theta_r'), utterances, reverse=True,
                                       dropout_rate=self._config.dropout, training=training, rng=rng)
        past = [empty] + forward
        future = backward + [empty]
        return past, future

    def encode(self, conversation, training: bool = False, rng=None) -> EncodedConversation:
        """
        :param conversation: An IndexedConversation
        """
        if not conversation.speakers:
            raise DomainError("cannot encode an empty conversation")
        utterances = [self.encode_utterance(speaker, words, training, rng)
                      for speaker, words in zip(conversation.speakers, conversation.words)]
        past, future = self.encode_contexts(utterances, training, rng)
        return EncodedConversation(utterances, past, future)
