"""Labeler

Speaker-aware hierarchical BLSTM-CRF scene labeller. It reuses the shared encoders of the pre-training model,
forms the feature of utterance t as y^t = [L^(t+1); R^(t-1)] (so every feature covers the whole conversation,
utterance t included) and puts a linear-chain CRF (theta_o) on top. With `speaker_blind` set, speaker lookups are
replaced by a zero vector, which gives the plain H-BLSTM-CRF.
"""
import collections
import logging

import numpy as np

from lccrl import checkpoint
from lccrl import configuration
from lccrl import crf
from lccrl import tensor as T
from lccrl import trainer
from lccrl.encoders import ConversationEncoder, make_shared_parameters
from lccrl.errors import DomainError, ValidationError
from lccrl.label_set import LabelSet
from lccrl.parameters import SHARED_GROUPS, ModelParams
from lccrl.vocabulary import Vocabulary


log = logging.getLogger(__name__)

MODEL_KIND = 'labeler'

FinetuneResult = collections.namedtuple('FinetuneResult', 'model curve best_heldout_nll transfer')


class SceneLabeler:
    """
    Shared encoders plus the CRF classifier theta_o.
    """

    def __init__(self, params: ModelParams, config: configuration.ModelConfiguration, vocab: Vocabulary,
                 label_set: LabelSet):
        self.params = params
        self.config = config
        self.vocab = vocab
        self.label_set = label_set
        self.encoder = ConversationEncoder(params, config)
        self.transfer = None

    @classmethod
    def create(cls, config: configuration.ModelConfiguration, vocab: Vocabulary, label_set: LabelSet = None,
               seed: int = 0) -> 'SceneLabeler':
        configuration.validate_model_config(config)
        label_set = label_set or LabelSet()
        rng = np.random.default_rng(seed)
        params = ModelParams(dtype=config.precision)
        make_shared_parameters(params, config, vocab.num_words, vocab.num_speakers, rng)
        crf.make_crf(params, 'theta_o', 2 * config.hidden, len(label_set), rng)
        return cls(params, config, vocab, label_set)

    @property
    def classifier(self) -> crf.CrfParams:
        return crf.crf_params(self.params, 'theta_o')

    def index(self, conversation):
        return self.vocab.index_conversation(conversation, self.label_set)

    def build_context_features(self, conversation, training: bool = False, rng=None) -> list:
        """
        y^t = [L^(t+1); R^(t-1)] for t = 1..T.

        :param conversation: An IndexedConversation
        :raises DomainError: For an empty conversation
        """
        if not conversation.speakers:
            raise DomainError("cannot label an empty conversation")
        encoded = self.encoder.encode(conversation, training, rng)
        return [T.concat([encoded.past_context(t + 1), encoded.future_context(t - 1)])
                for t in range(1, len(encoded) + 1)]

    def nll(self, conversation, training: bool = False, rng=None) -> T.Tensor:
        if conversation.labels is None:
            raise ValidationError("conversation has no labels to train on")
        features = self.build_context_features(conversation, training, rng)
        return crf.crf_nll(self.classifier, features, conversation.labels)

    def loss(self, conversation, training: bool = False, rng=None) -> T.Tensor:
        return self.nll(conversation, training, rng)

    def predict(self, conversation) -> list:
        """
        Viterbi label indices of an IndexedConversation.
        """
        labels, _ = crf.viterbi_decode(self.classifier, self.build_context_features(conversation))
        return labels

    def label(self, conversation) -> list:
        """
        Label names for every utterance of a conversation record.
        """
        return [self.label_set.name(index) for index in self.predict(self.vocab.index_conversation(conversation))]

    def posteriors(self, conversation) -> np.ndarray:
        features = self.build_context_features(self.vocab.index_conversation(conversation))
        return crf.marginals(self.classifier, features)

    def shared_fingerprint(self) -> str:
        return self.params.fingerprint(SHARED_GROUPS)

    def save(self, path: str) -> None:
        metadata = checkpoint.model_metadata(MODEL_KIND, self.config, self.vocab, self.label_set.names)
        checkpoint.save_checkpoint(self.params, path, metadata)

    @classmethod
    def load(cls, path: str) -> 'SceneLabeler':
        saved = checkpoint.load_checkpoint(path)
        config, vocab = checkpoint.read_model_metadata(saved, MODEL_KIND)
        model = cls.create(config, vocab, LabelSet(saved.metadata.get('labels', LabelSet().names)))
        checkpoint.restore_all(model.params, saved)
        return model


def transfer_pretrained(model: SceneLabeler, saved: checkpoint.Checkpoint,
                        allow_vocab_mismatch: bool = False) -> checkpoint.TransferReport:
    """
    Copy the shared encoder groups from a pre-trained checkpoint; theta_o keeps its fresh values.

    :raises TransferError: If a shared parameter has a different shape
    """
    checkpoint.check_vocabulary(saved, model.vocab, allow_vocab_mismatch)
    return checkpoint.load_into(model.params, saved, SHARED_GROUPS)


def finetune(model: SceneLabeler, corpus: list, config, init: checkpoint.Checkpoint = None,
             allow_vocab_mismatch: bool = False) -> FinetuneResult:
    """
    Train the labeller on labeled conversations, optionally starting from pre-trained encoders.

    :param model: Labeller to train in place
    :param corpus: Conversation records with labels
    :param config: TrainingConfiguration
    :param init: Optional pre-trained checkpoint
    :return: The trained model, its loss curve and the transfer report
    :raises ValidationError: If a conversation is unlabeled or uses a label outside the label set
    """
    configuration.validate_training_config(config)
    if not corpus:
        raise DomainError("cannot fine-tune on an empty corpus")
    indexed = []
    for conversation in corpus:
        if conversation.labels is None:
            raise ValidationError("conversation '{0}' has no labels".format(conversation.id))
        indexed.append(model.index(conversation))
    items, heldout = trainer.split_heldout(indexed, config.heldout_fraction)
    log.info("Fine-tuning on {0} conversations, {1} held out".format(len(items), len(heldout)))

    def _build(seed):
        candidate = model if seed == config.seed else SceneLabeler.create(model.config, model.vocab,
                                                                          model.label_set, seed)
        report = transfer_pretrained(candidate, init, allow_vocab_mismatch) if init is not None else None
        if config.freeze_shared:
            for group in SHARED_GROUPS:
                candidate.params.freeze(group + '.')
        elif config.freeze_word_vectors:
            candidate.params.freeze('theta_w.')
        candidate.transfer = report
        return candidate

    def _train(candidate):
        return trainer.Trainer(config).fit(candidate, items, heldout)

    result = trainer.best_of_restarts(_build, _train, config.num_restarts, config.seed)
    return FinetuneResult(result.model, result.curve, result.best_heldout_nll, result.model.transfer)
