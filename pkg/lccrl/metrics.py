"""Metrics

Utterance-level accuracy and per-label precision, recall and F-measure, all in percent. Labels are reported in
label-set order. A label absent from both the gold and the predicted labels gets F = 0, is flagged `absent`
and is left out of the macro average.
"""
import codecs
import collections
import csv
import json
import logging

from lccrl.errors import ShapeError
from lccrl.label_set import LabelSet


log = logging.getLogger(__name__)

LabelScore = collections.namedtuple('LabelScore', 'label precision recall f_measure support absent')
MetricsReport = collections.namedtuple('MetricsReport', 'accuracy labels macro_f total')


def _percent(numerator: float, denominator: float) -> float:
    return 100.0 * numerator / denominator if denominator else 0.0


def evaluate(predictions: list, gold: list, label_set: LabelSet) -> MetricsReport:
    """
    Score predicted label sequences against gold ones.

    :param predictions: One label-name sequence per conversation
    :param gold: Gold sequences in the same order
    :param label_set: Labels to report, in order
    :raises ShapeError: If the number of conversations or a conversation's length differs
    """
    if len(predictions) != len(gold):
        raise ShapeError("{0} predicted conversations for {1} gold ones".format(len(predictions), len(gold)))
    pairs = []
    for position, (predicted, expected) in enumerate(zip(predictions, gold)):
        if len(predicted) != len(expected):
            raise ShapeError("conversation {0}: {1} predicted labels for {2} gold".format(
                position, len(predicted), len(expected)))
        pairs.extend(zip(predicted, expected))
    correct = sum(1 for predicted, expected in pairs if predicted == expected)
    scores = []
    for label in label_set:
        true_positive = sum(1 for predicted, expected in pairs if predicted == label and expected == label)
        predicted_count = sum(1 for predicted, _ in pairs if predicted == label)
        gold_count = sum(1 for _, expected in pairs if expected == label)
        precision = _percent(true_positive, predicted_count)
        recall = _percent(true_positive, gold_count)
        f_measure = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        scores.append(LabelScore(label, precision, recall, f_measure, gold_count,
                                 predicted_count == 0 and gold_count == 0))
    present = [score.f_measure for score in scores if not score.absent]
    macro_f = sum(present) / len(present) if present else 0.0
    return MetricsReport(_percent(correct, len(pairs)), scores, macro_f, len(pairs))


def write_metrics_csv(report: MetricsReport, path: str) -> None:
    with codecs.open(path, 'w', 'utf-8') as metrics_file:
        writer = csv.writer(metrics_file, lineterminator='\n')
        writer.writerow(['label', 'precision', 'recall', 'f_measure', 'support', 'absent'])
        for score in report.labels:
            writer.writerow([score.label, '{0:.4f}'.format(score.precision), '{0:.4f}'.format(score.recall),
                             '{0:.4f}'.format(score.f_measure), score.support, int(score.absent)])
        writer.writerow(['macro', '', '', '{0:.4f}'.format(report.macro_f), report.total, 0])
        writer.writerow(['accuracy', '', '', '{0:.4f}'.format(report.accuracy), report.total, 0])


def report_to_dict(report: MetricsReport) -> dict:
    return {'accuracy': report.accuracy,
            'macro_f': report.macro_f,
            'total': report.total,
            'labels': [score._asdict() for score in report.labels]}


def write_metrics_json(report: MetricsReport, path: str) -> None:
    with codecs.open(path, 'w', 'utf-8') as metrics_file:
        json.dump(report_to_dict(report), metrics_file, indent=2, sort_keys=True)
