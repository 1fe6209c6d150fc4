"""Trainer

The conversation-level mini-batch training loop shared by pre-training and fine-tuning: seeded shuffling, one tape
and one backward pass per batch, Adam updates, held-out early stopping and a loss curve.
"""
import codecs
import collections
import csv
import logging
import math

import numpy as np

from lccrl.configuration import TrainingConfiguration
from lccrl.errors import DomainError
from lccrl.optimizer import Adam
from lccrl.tensor import Tape


log = logging.getLogger(__name__)

LossPoint = collections.namedtuple('LossPoint', 'epoch train_nll heldout_nll')
TrainingResult = collections.namedtuple('TrainingResult', 'model curve best_heldout_nll epochs_run')


def split_heldout(items: list, fraction: float) -> tuple:
    """
    Keep the last floor(n * fraction) items for early stopping.

    :return: (training items, held-out items)
    """
    count = int(math.floor(len(items) * fraction))
    if count == 0:
        return list(items), []
    return list(items[:-count]), list(items[-count:])


def mean_loss(model, items: list) -> float:
    """
    Mean per-conversation loss without dropout and without recording a tape.
    """
    if not items:
        return float('nan')
    return float(np.mean([model.loss(item).item() for item in items]))


class Trainer:
    """
    Trains any model exposing `params` (ModelParams) and `loss(item, training, rng)`.
    """

    def __init__(self, config: TrainingConfiguration):
        self._config = config

    def fit(self, model, items: list, heldout: list = None) -> TrainingResult:
        """
        Minimise the summed loss over conversation-level mini-batches.

        :param model: The model to train in place
        :param items: Training conversations (already indexed for the model)
        :param heldout: Conversations for early stopping; when empty the final parameters are kept
        :return: The model restored to its best snapshot and the loss curve
        :raises DomainError: For an empty training set
        """
        if not items:
            raise DomainError("cannot train on an empty corpus")
        config = self._config
        heldout = heldout or []
        rng = np.random.default_rng(config.seed)
        optimizer = Adam(config.learning_rate, config.beta1, config.beta2, config.epsilon)
        params = model.params
        curve = []
        best_loss = mean_loss(model, heldout) if heldout else float('inf')
        best_state = params.state()
        stale_epochs = 0
        epochs_run = 0
        for epoch in range(1, config.max_epochs + 1):
            order = rng.permutation(len(items))
            total = 0.0
            for start in range(0, len(order), config.batch_size):
                batch = [items[i] for i in order[start:start + config.batch_size]]
                total += self._train_batch(model, batch, optimizer, rng)
            epochs_run = epoch
            train_nll = total / len(items)
            heldout_nll = mean_loss(model, heldout) if heldout else float('nan')
            curve.append(LossPoint(epoch, train_nll, heldout_nll))
            log.info("Epoch {0}: train NLL {1:.4f}, held-out NLL {2:.4f}".format(epoch, train_nll, heldout_nll))
            if not heldout:
                continue
            if heldout_nll < best_loss:
                best_loss = heldout_nll
                best_state = params.state()
                stale_epochs = 0
            else:
                stale_epochs += 1
                if stale_epochs >= config.patience:
                    log.info("Early stopping after epoch {0}; best held-out NLL {1:.4f}".format(epoch, best_loss))
                    break
        if heldout:
            params.load_state(best_state)
        return TrainingResult(model, curve, best_loss if heldout else float('nan'), epochs_run)

    @staticmethod
    def _train_batch(model, batch: list, optimizer: Adam, rng: np.random.Generator) -> float:
        params = model.params
        params.zero_grad()
        with Tape() as tape:
            loss = None
            for item in batch:
                term = model.loss(item, training=True, rng=rng)
                loss = term if loss is None else loss + term
            tape.backward(loss)
        optimizer.step(params)
        params.zero_grad()
        log.debug("Batch of {0}: loss {1:.4f}".format(len(batch), loss.item()))
        return loss.item()


def best_of_restarts(build, train, count: int, seed: int) -> TrainingResult:
    """
    Train `count` models from different initial parameters and keep the one with the lowest held-out loss.

    :param build: Callable seed -> fresh model
    :param train: Callable model -> TrainingResult
    """
    best = None
    for restart in range(count):
        result = train(build(seed + restart))
        log.info("Restart {0}: best held-out NLL {1:.4f}".format(restart, result.best_heldout_nll))
        if best is None or _better(result.best_heldout_nll, best.best_heldout_nll):
            best = result
    return best


def _better(candidate: float, incumbent: float) -> bool:
    if math.isnan(candidate):
        return False
    return math.isnan(incumbent) or candidate < incumbent


def write_curve_csv(curve: list, path: str) -> None:
    with codecs.open(path, 'w', 'utf-8') as curve_file:
        writer = csv.writer(curve_file, lineterminator='\n')
        writer.writerow(LossPoint._fields)
        for point in curve:
            writer.writerow([point.epoch, repr(point.train_nll), repr(point.heldout_nll)])
