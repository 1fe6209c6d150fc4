"""Word Vectors

Pre-trained, context-independent word vectors in the text format "word v1 v2 ... vd", one word per line. A
word2vec-style "count dim" header line is skipped. Vectors initialise the matching rows of the word embedding
table; words without a vector keep their random initial values.
"""
import codecs
import logging

import numpy as np

from lccrl.errors import FormatError, ShapeError
from lccrl.parameters import ModelParams
from lccrl.vocabulary import SPECIALS, Vocabulary


log = logging.getLogger(__name__)


class WordVectorInit:
    """
    Rows read from a vector file, keyed by vocabulary index.
    """

    def __init__(self, rows: dict, dim: int, coverage: float):
        self.rows = rows
        self.dim = dim
        self.coverage = coverage

    def apply(self, params: ModelParams, name: str) -> None:
        """
        Overwrite the covered rows of the embedding matrix `name`.

        :raises ShapeError: If the vector size differs from the embedding size
        """
        matrix = params[name].data
        if self.rows and matrix.shape[1] != self.dim:
            raise ShapeError("word vectors have {0} dimensions, embedding table {1} has {2}".format(
                self.dim, name, matrix.shape[1]))
        for index, vector in self.rows.items():
            matrix[index] = vector


def _is_header(fields: list) -> bool:
    return len(fields) == 2 and all(field.isdigit() for field in fields)


def load_word_vectors(path: str, vocab: Vocabulary) -> WordVectorInit:
    """
    Read vectors for the words of a vocabulary.

    :return: The rows to initialise and the fraction of regular vocabulary words covered
    :raises FormatError: If a line has a different dimension from the first vector, naming the line
    """
    rows = {}
    dim = None
    with codecs.open(path, 'r', 'utf-8') as vector_file:
        for line_number, line in enumerate(vector_file, start=1):
            fields = line.split()
            if not line.strip() or (line_number == 1 and _is_header(fields)):
                continue
            word, values = fields[0], fields[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim or dim == 0:
                raise FormatError("expected {0} values, found {1}".format(dim, len(values)), path, line_number)
            try:
                vector = np.array([float(value) for value in values])
            except ValueError:
                raise FormatError("non-numeric vector value", path, line_number)
            index = vocab.word_id(word)
            if index != vocab.unk or word == vocab.words[vocab.unk]:
                rows[index] = vector
    regular = [index for index in range(vocab.num_words) if vocab.words[index] not in SPECIALS]
    covered = sum(1 for index in regular if index in rows)
    coverage = covered / len(regular) if regular else 0.0
    log.info("Word vectors from {0} cover {1:.1%} of the vocabulary".format(path, coverage))
    return WordVectorInit(rows, dim or 0, coverage)
