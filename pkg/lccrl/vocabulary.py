"""Vocabulary

Word and speaker index maps. Words seen fewer than `min_count` times in the training data map to <unk>; speakers
are an open set read from the data and are never mapped to unknown. Indices are dense from 0 with the special
symbols first.
"""
import collections
import hashlib
import json
import logging

from lccrl.errors import DomainError, ValidationError


log = logging.getLogger(__name__)

UNK = '<unk>'
BOS = '<bos>'
EOS = '<eos>'
SPECIALS = (UNK, BOS, EOS)

IndexedConversation = collections.namedtuple('IndexedConversation', 'speakers words labels')


class Vocabulary:
    """
    Bidirectional word and speaker maps.
    """

    def __init__(self, words, speakers, min_count: int = 2):
        """
        :param words: Regular words; special symbols are prepended
        :param speakers: Speaker names
        :param min_count: The threshold the vocabulary was built with
        """
        self.words = list(SPECIALS) + [word for word in words if word not in SPECIALS]
        self.speakers = list(speakers)
        self.min_count = min_count
        self._word_index = {word: index for index, word in enumerate(self.words)}
        self._speaker_index = {speaker: index for index, speaker in enumerate(self.speakers)}

    @property
    def unk(self) -> int:
        return self._word_index[UNK]

    @property
    def bos(self) -> int:
        return self._word_index[BOS]

    @property
    def eos(self) -> int:
        return self._word_index[EOS]

    @property
    def num_words(self) -> int:
        return len(self.words)

    @property
    def num_speakers(self) -> int:
        return len(self.speakers)

    def word_id(self, word: str) -> int:
        return self._word_index.get(word, self.unk)

    def speaker_id(self, speaker: str) -> int:
        if speaker not in self._speaker_index:
            raise ValidationError("speaker '{0}' is not in the vocabulary {1}".format(speaker, self.speakers))
        return self._speaker_index[speaker]

    def index_conversation(self, conversation, label_set=None) -> IndexedConversation:
        """
        Map a conversation to indices. Labels are indexed only when a label set is given.
        """
        labels = None
        if label_set is not None and conversation.labels is not None:
            labels = [label_set.index(label) for label in conversation.labels]
        return IndexedConversation(speakers=[self.speaker_id(u.speaker) for u in conversation.utterances],
                                   words=[[self.word_id(w) for w in u.words] for u in conversation.utterances],
                                   labels=labels)

    def to_dict(self) -> dict:
        return {'words': self.words[len(SPECIALS):], 'speakers': self.speakers, 'min_count': self.min_count}

    @classmethod
    def from_dict(cls, record: dict) -> 'Vocabulary':
        return cls(record['words'], record['speakers'], record.get('min_count', 2))

    def fingerprint(self) -> str:
        payload = json.dumps({'words': self.words, 'speakers': self.speakers}, sort_keys=True)
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.words == other.words and self.speakers == other.speakers


def build_vocab(corpus: list, min_count: int = 2) -> Vocabulary:
    """
    Build a vocabulary from training conversations.

    :param corpus: The training conversations
    :param min_count: Words seen fewer times map to <unk>
    :return: The vocabulary, identical for any ordering of the corpus
    :raises DomainError: For an empty corpus
    """
    if not corpus:
        raise DomainError("cannot build a vocabulary from an empty corpus")
    word_counts = collections.Counter()
    speakers = set()
    for conversation in corpus:
        for utterance in conversation.utterances:
            word_counts.update(utterance.words)
            speakers.add(utterance.speaker)
    words = sorted(word for word, count in word_counts.items() if count >= min_count and word not in SPECIALS)
    vocab = Vocabulary(words, sorted(speakers), min_count)
    log.info("Vocabulary: {0} words ({1} below min count {2}), {3} speakers".format(
        vocab.num_words, len(word_counts) - len(words), min_count, vocab.num_speakers))
    return vocab
