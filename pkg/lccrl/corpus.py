"""Corpus

Conversations and their JSON-lines storage. Each line holds one conversation:

    {"id": "c1", "domain": "finance",
     "utterances": [{"speaker": "Operator", "text": "thank you for calling"}, ...],
     "labels": ["C1", ...]}

`words` may replace `text`; text is lower-cased and split on whitespace, so filler markers such as {um} stay single
tokens. A line without `utterances` is a plain sentence and becomes a one-utterance conversation spoken by
SENTENCE_SPEAKER.
"""
import codecs
import collections
import json
import logging
from pathlib import Path

from lccrl.errors import FormatError, ValidationError


log = logging.getLogger(__name__)

SENTENCE_SPEAKER = '<none>'

Utterance = collections.namedtuple('Utterance', 'speaker words')
Conversation = collections.namedtuple('Conversation', 'id utterances labels domain', defaults=(None, None))


def tokenize(text: str) -> list:
    return text.lower().split()


def validate_conversation(conversation: Conversation) -> Conversation:
    """
    :raises ValidationError: If the conversation is empty, has an empty utterance or a wrong number of labels
    """
    if not conversation.utterances:
        raise ValidationError("conversation '{0}' has no utterances".format(conversation.id))
    for position, utterance in enumerate(conversation.utterances):
        if not utterance.words:
            raise ValidationError("conversation '{0}' utterance {1} has no words".format(conversation.id,
                                                                                         position + 1))
    if conversation.labels is not None and len(conversation.labels) != len(conversation.utterances):
        raise ValidationError("conversation '{0}' has {1} labels for {2} utterances".format(
            conversation.id, len(conversation.labels), len(conversation.utterances)))
    return conversation


def _words_of(record: dict) -> list:
    if 'words' in record:
        return [str(word) for word in record['words']]
    return tokenize(str(record.get('text', '')))


def conversation_from_dict(record: dict, default_id: str) -> Conversation:
    if 'utterances' not in record:
        utterances = [Utterance(SENTENCE_SPEAKER, _words_of(record))]
    else:
        utterances = [Utterance(str(item['speaker']), _words_of(item)) for item in record['utterances']]
    labels = record.get('labels')
    return validate_conversation(Conversation(id=str(record.get('id', default_id)),
                                              utterances=utterances,
                                              labels=[str(label) for label in labels] if labels is not None else None,
                                              domain=record.get('domain')))


def conversation_to_dict(conversation: Conversation) -> dict:
    record = {'id': conversation.id,
              'utterances': [{'speaker': u.speaker, 'words': list(u.words)} for u in conversation.utterances]}
    if conversation.labels is not None:
        record['labels'] = list(conversation.labels)
    if conversation.domain is not None:
        record['domain'] = conversation.domain
    return record


def parse_jsonl(path: str) -> list:
    """
    Read a corpus file.

    :param path: JSON-lines file, one conversation or sentence per line
    :return: Validated conversations
    :raises FormatError: For a malformed line, naming its line number
    """
    corpus = []
    stem = Path(path).stem
    with open(path, 'rb') as corpus_file:
        for line_number, raw in enumerate(corpus_file, start=1):
            try:
                line = raw.decode('utf-8')
            except UnicodeDecodeError as error:
                raise FormatError("invalid UTF-8 at byte {0}".format(error.start), path, line_number)
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as error:
                raise FormatError("malformed JSON ({0})".format(error.msg), path, line_number)
            if not isinstance(record, dict):
                raise FormatError("expected a JSON object", path, line_number)
            try:
                corpus.append(conversation_from_dict(record, "{0}-{1}".format(stem, line_number)))
            except (KeyError, TypeError) as error:
                raise FormatError("missing or invalid field {0}".format(error), path, line_number)
            except ValidationError as error:
                raise ValidationError("{0}:{1}: {2}".format(path, line_number, error))
    if not corpus:
        log.warning("Corpus file {0} contains no conversations".format(path))
    log.info("Read {0} conversations from {1}".format(len(corpus), path))
    return corpus


def write_jsonl(corpus: list, path: str) -> None:
    with codecs.open(path, 'w', 'utf-8') as corpus_file:
        for conversation in corpus:
            corpus_file.write(json.dumps(conversation_to_dict(conversation), ensure_ascii=False) + '\n')


def strip_labels(corpus: list) -> list:
    return [conversation._replace(labels=None) for conversation in corpus]


def require_labels(corpus: list) -> list:
    for conversation in corpus:
        if conversation.labels is None:
            raise ValidationError("conversation '{0}' has no labels".format(conversation.id))
    return corpus
