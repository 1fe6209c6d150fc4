"""Optimizer

Adam with bias-corrected first and second moment estimates kept per parameter name.
"""
import logging

import numpy as np

from lccrl.parameters import ModelParams


log = logging.getLogger(__name__)


class Adam:
    """
    Adam update over the trainable tensors of a ModelParams.
    """

    def __init__(self, learning_rate: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.steps = 0
        self._first = {}
        self._second = {}

    def step(self, params: ModelParams) -> None:
        """
        Apply one update from the gradients currently stored on the parameters. Frozen parameters and parameters
        without a gradient are left untouched.
        """
        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        step_size = self.learning_rate / correction1
        for name, tensor in params.trainable():
            grad = tensor.grad
            if grad is None:
                continue
            if name not in self._first:
                self._first[name] = np.zeros_like(tensor.data)
                self._second[name] = np.zeros_like(tensor.data)
            first = self._first[name]
            second = self._second[name]
            first *= self.beta1
            first += (1.0 - self.beta1) * grad
            second *= self.beta2
            second += (1.0 - self.beta2) * (grad * grad)
            tensor.data -= step_size * first / (np.sqrt(second / correction2) + self.epsilon)
