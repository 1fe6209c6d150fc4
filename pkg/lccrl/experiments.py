"""Experiments

Labeled-data-size sweep (random versus pre-trained initialisation of the shared encoders) and leave-one-business-
type-out cross-validation.
"""
import codecs
import collections
import csv
import logging
import math

import numpy as np

from lccrl.errors import ValidationError
from lccrl.label_set import LabelSet
from lccrl.labeler import SceneLabeler, finetune
from lccrl.metrics import evaluate
from lccrl.vocabulary import build_vocab


log = logging.getLogger(__name__)

RANDOM_INIT = 'random'
PRETRAINED_INIT = 'pretrained'

SweepRow = collections.namedtuple('SweepRow', 'fraction num_conversations variant seed accuracy')
SweepSummary = collections.namedtuple('SweepSummary', 'fraction variant mean_accuracy runs')
CrossValidationResult = collections.namedtuple('CrossValidationResult', 'per_domain pooled')


def subsample(corpus: list, fraction: float, seed: int) -> list:
    """
    floor(n * fraction) conversations chosen with a seeded generator, kept in corpus order.
    """
    count = int(math.floor(len(corpus) * fraction))
    chosen = np.sort(np.random.default_rng(seed).permutation(len(corpus))[:count])
    return [corpus[i] for i in chosen]


def predict_corpus(model: SceneLabeler, corpus: list) -> list:
    return [model.label(conversation) for conversation in corpus]


def corpus_accuracy(model: SceneLabeler, test: list) -> float:
    return evaluate(predict_corpus(model, test), [c.labels for c in test], model.label_set).accuracy


def data_size_sweep(train: list, test: list, fractions: list, model_config, train_config, vocab,
                    init=None, seeds=(0,), label_set: LabelSet = None) -> list:
    """
    Fine-tune on growing subsets of the labeled training data and score each run on the test data.

    :param train: Labeled training conversations
    :param test: Labeled test conversations
    :param fractions: Subset sizes as fractions of the training data, each in (0, 1]
    :param model_config: ModelConfiguration of the labeller
    :param train_config: TrainingConfiguration; its seed is replaced by each sweep seed
    :param vocab: Vocabulary shared by every run (the checkpoint's when `init` is given)
    :param init: Optional pre-trained Checkpoint; without it only the random variant runs
    :param seeds: Seeds for subsampling, initialisation and training
    :return: One SweepRow per fraction, variant and seed
    :raises ValidationError: If a fraction lies outside (0, 1]
    """
    for fraction in fractions:
        if not 0.0 < fraction <= 1.0:
            raise ValidationError("sweep fractions must lie in (0, 1], got {0}".format(fraction))
    if not test:
        raise ValidationError("the sweep needs labeled test conversations")
    variants = [(RANDOM_INIT, None)] + ([(PRETRAINED_INIT, init)] if init is not None else [])
    rows = []
    for seed in seeds:
        for fraction in fractions:
            subset = subsample(train, fraction, seed)
            if not subset:
                log.warning("Fraction {0} of {1} conversations selects none; skipped".format(fraction, len(train)))
                continue
            for variant, checkpoint in variants:
                model = SceneLabeler.create(model_config, vocab, label_set, seed)
                result = finetune(model, subset, train_config._replace(seed=seed), init=checkpoint)
                accuracy = corpus_accuracy(result.model, test)
                log.info("Sweep fraction {0} ({1} conversations), {2} init, seed {3}: accuracy {4:.1f}".format(
                    fraction, len(subset), variant, seed, accuracy))
                rows.append(SweepRow(fraction, len(subset), variant, seed, accuracy))
    return rows


def summarize_sweep(rows: list) -> list:
    """
    Mean accuracy per fraction and variant, ordered by fraction.
    """
    grouped = collections.OrderedDict()
    for row in sorted(rows, key=lambda r: (r.fraction, r.variant)):
        grouped.setdefault((row.fraction, row.variant), []).append(row.accuracy)
    return [SweepSummary(fraction, variant, float(np.mean(accuracies)), len(accuracies))
            for (fraction, variant), accuracies in grouped.items()]


def write_sweep_csv(rows: list, path: str) -> None:
    with codecs.open(path, 'w', 'utf-8') as sweep_file:
        writer = csv.writer(sweep_file, lineterminator='\n')
        writer.writerow(SweepRow._fields)
        for row in rows:
            writer.writerow([row.fraction, row.num_conversations, row.variant, row.seed,
                             '{0:.4f}'.format(row.accuracy)])


def domain_cross_validation(corpus: list, model_config, train_config, vocab=None, init=None,
                            label_set: LabelSet = None, min_count: int = 2) -> CrossValidationResult:
    """
    Hold out each business type in turn, train on the others and score the held-out conversations.

    :param corpus: Labeled conversations carrying a `domain`
    :param vocab: Vocabulary for every fold; built from each fold's training part when None
    :param init: Optional pre-trained Checkpoint for every fold
    :return: Metrics per held-out business type and over all folds pooled
    :raises ValidationError: If fewer than two business types are present
    """
    domains = sorted({c.domain for c in corpus if c.domain is not None})
    if len(domains) < 2:
        raise ValidationError("cross-validation needs at least two business types, found {0}".format(domains))
    label_set = label_set or LabelSet()
    per_domain = collections.OrderedDict()
    all_predictions, all_gold = [], []
    for domain in domains:
        held_out = [c for c in corpus if c.domain == domain]
        training = [c for c in corpus if c.domain != domain]
        fold_vocab = vocab or build_vocab(training, min_count)
        model = SceneLabeler.create(model_config, fold_vocab, label_set, train_config.seed)
        result = finetune(model, training, train_config, init=init)
        predictions = predict_corpus(result.model, held_out)
        gold = [c.labels for c in held_out]
        per_domain[domain] = evaluate(predictions, gold, label_set)
        log.info("Held-out business type '{0}': accuracy {1:.1f}".format(domain, per_domain[domain].accuracy))
        all_predictions.extend(predictions)
        all_gold.extend(gold)
    return CrossValidationResult(per_domain, evaluate(all_predictions, all_gold, label_set))
