"""LC-CRL Model

Large-context conversational representation learning: every utterance of a conversation is predicted from all
past and all future utterances. The speaker label comes from softmax([L^t; R^t]) and the words from an
auto-regressive decoder whose step n reads [w_(n-1); q^t; L^t; R^t]. Training minimises the summed negative
log-likelihood of all utterances, EOS included, over unlabeled conversations.
"""
import collections
import logging
import math

import numpy as np

from lccrl import checkpoint
from lccrl import configuration
from lccrl import layers
from lccrl import tensor as T
from lccrl import trainer
from lccrl.encoders import ConversationEncoder, make_shared_parameters
from lccrl.errors import ContractError, DomainError
from lccrl.parameters import ModelParams
from lccrl.vocabulary import Vocabulary


log = logging.getLogger(__name__)

MODEL_KIND = 'lccrl'

UtteranceTerms = collections.namedtuple('UtteranceTerms', 'speaker_nll word_nll word_count')
PretrainResult = collections.namedtuple('PretrainResult', 'model curve best_heldout_nll')


class LcCrlModel:
    """
    The self-supervised pre-training model: shared encoders plus the speaker head (theta_y), the decoder LSTM
    (theta_v) and the word head (theta_d).
    """

    def __init__(self, params: ModelParams, config: configuration.ModelConfiguration, vocab: Vocabulary):
        self.params = params
        self.config = config
        self.vocab = vocab
        self.encoder = ConversationEncoder(params, config)

    @classmethod
    def create(cls, config: configuration.ModelConfiguration, vocab: Vocabulary, seed: int = 0) -> 'LcCrlModel':
        """
        Build a model with freshly initialised parameters.
        """
        configuration.validate_model_config(config)
        rng = np.random.default_rng(seed)
        params = ModelParams(dtype=config.precision)
        make_shared_parameters(params, config, vocab.num_words, vocab.num_speakers, rng)
        hidden = config.hidden
        layers.make_linear(params, 'theta_y', 2 * hidden, vocab.num_speakers, rng)
        layers.make_lstm(params, 'theta_v', config.word_dim + config.speaker_dim + 2 * hidden, hidden, rng)
        layers.make_linear(params, 'theta_d', hidden, vocab.num_words, rng)
        log.debug("Created LC-CRL model with {0} parameter tensors".format(len(params)))
        return cls(params, config, vocab)

    def index(self, conversation):
        return self.vocab.index_conversation(conversation)

    def decode_speaker(self, past: T.Tensor, future: T.Tensor) -> T.Tensor:
        """
        P(q^t | other utterances) = softmax(theta_y [L^t; R^t]).
        """
        head = layers.linear_params(self.params, 'theta_y')
        return layers.linear_softmax(head.weight, head.bias, T.concat([past, future]))

    def _speaker_log_probs(self, past: T.Tensor, future: T.Tensor) -> T.Tensor:
        head = layers.linear_params(self.params, 'theta_y')
        return T.log_softmax(layers.linear(head.weight, head.bias, T.concat([past, future])))

    def _word_log_probs(self, speaker: int, past: T.Tensor, future: T.Tensor, target_words: list,
                        training: bool = False, rng=None) -> T.Tensor:
        if not target_words or target_words[-1] != self.vocab.eos:
            raise ContractError("decoder targets must end with EOS")
        inputs = [self.vocab.bos] + list(target_words[:-1])
        previous = layers.embed_many(self.encoder.word_table(), inputs)
        context = T.concat([self.encoder.speaker_vector(speaker), past, future])
        steps = T.concat([previous, T.repeat(context, len(inputs))], axis=1)
        steps = layers.dropout(steps, self.config.dropout, training, rng)
        states = layers.lstm_sequence(layers.lstm_params(self.params, 'theta_v'), steps)
        head = layers.linear_params(self.params, 'theta_d')
        return layers.linear_log_softmax_rows(head.weight, head.bias, T.stack(states))

    def decode_words(self, speaker: int, past: T.Tensor, future: T.Tensor, target_words: list) -> list:
        """
        Word distributions of a teacher-forced decoding: step n reads the gold word n-1 (BOS first).

        :param target_words: Gold word indices ending with EOS
        :return: One probability vector over the word vocabulary per target position
        :raises ContractError: If the targets do not end with EOS
        """
        log_probs = self._word_log_probs(speaker, past, future, target_words)
        return [T.Tensor(np.exp(row)) for row in log_probs.data]

    def utterance_terms(self, encoded, t: int, speaker: int, words: list, training: bool = False,
                        rng=None) -> UtteranceTerms:
        """
        Negative log-likelihood of utterance t given cached contexts, split into speaker and word parts.
        """
        past = encoded.past_context(t)
        future = encoded.future_context(t)
        speaker_nll = T.select(self._speaker_log_probs(past, future), speaker) * -1.0
        targets = list(words) + [self.vocab.eos]
        log_probs = self._word_log_probs(speaker, past, future, targets, training, rng)
        word_nll = T.sum(T.select(log_probs, (np.arange(len(targets)), np.asarray(targets)))) * -1.0
        return UtteranceTerms(speaker_nll, word_nll, len(targets))

    def utterance_nll(self, encoded, t: int, speaker: int, words: list, training: bool = False,
                      rng=None) -> T.Tensor:
        terms = self.utterance_terms(encoded, t, speaker, words, training, rng)
        return terms.speaker_nll + terms.word_nll

    def conversation_terms(self, conversation, training: bool = False, rng=None) -> list:
        encoded = self.encoder.encode(conversation, training, rng)
        return [self.utterance_terms(encoded, t, speaker, words, training, rng)
                for t, (speaker, words) in enumerate(zip(conversation.speakers, conversation.words), start=1)]

    def conversation_nll(self, conversation, training: bool = False, rng=None) -> T.Tensor:
        """
        -sum_t [log P(q^t | context) + sum_n log P(w_n^t | history, q^t, context)].

        :param conversation: An IndexedConversation with at least one utterance
        """
        total = None
        for terms in self.conversation_terms(conversation, training, rng):
            term = terms.speaker_nll + terms.word_nll
            total = term if total is None else total + term
        return total

    def loss(self, conversation, training: bool = False, rng=None) -> T.Tensor:
        return self.conversation_nll(conversation, training, rng)

    def perplexity(self, conversations: list) -> float:
        """
        Per-word perplexity over indexed conversations, EOS included.
        """
        total = 0.0
        count = 0
        for conversation in conversations:
            for terms in self.conversation_terms(conversation):
                total += terms.word_nll.item()
                count += terms.word_count
        if count == 0:
            raise DomainError("perplexity of an empty corpus")
        return math.exp(total / count)

    def save(self, path: str) -> None:
        checkpoint.save_checkpoint(self.params, path, checkpoint.model_metadata(MODEL_KIND, self.config, self.vocab))

    @classmethod
    def load(cls, path: str) -> 'LcCrlModel':
        saved = checkpoint.load_checkpoint(path)
        config, vocab = checkpoint.read_model_metadata(saved, MODEL_KIND)
        model = cls.create(config, vocab)
        checkpoint.restore_all(model.params, saved)
        return model


def pretrain(model: LcCrlModel, corpus: list, config, word_vectors=None) -> PretrainResult:
    """
    Pre-train on unlabeled conversations with held-out early stopping.

    :param model: Model to train in place (the first restart when config.num_restarts > 1)
    :param corpus: Conversation records
    :param config: TrainingConfiguration
    :param word_vectors: Optional WordVectorInit applied to theta_w of every restart
    :return: The best model and its loss curve
    """
    configuration.validate_training_config(config)
    if not corpus:
        raise DomainError("cannot pre-train on an empty corpus")
    items, heldout = trainer.split_heldout([model.index(c) for c in corpus], config.heldout_fraction)
    log.info("Pre-training on {0} conversations, {1} held out".format(len(items), len(heldout)))

    def _build(seed):
        fresh = model if seed == config.seed else LcCrlModel.create(model.config, model.vocab, seed)
        if word_vectors is not None:
            word_vectors.apply(fresh.params, 'theta_w.weight')
        if config.freeze_word_vectors:
            fresh.params.freeze('theta_w.')
        return fresh

    def _train(candidate):
        return trainer.Trainer(config).fit(candidate, items, heldout)

    result = trainer.best_of_restarts(_build, _train, config.num_restarts, config.seed)
    return PretrainResult(result.model, result.curve, result.best_heldout_nll)
