"""Parameters

ModelParams is the named collection of trainable tensors of a model. Names are dotted paths whose first component
is the parameter group (theta_w, theta_c, ...); the groups listed in SHARED_GROUPS are common to the pre-training
model and the labeller and are what gets transferred between them.
"""
import collections
import hashlib
import logging

import numpy as np

from lccrl.errors import ContractError
from lccrl.tensor import Tensor


log = logging.getLogger(__name__)

SHARED_GROUPS = ('theta_s', 'theta_c', 'theta_w', 'theta_q', 'theta_l', 'theta_r')


def group_of(name: str) -> str:
    return name.split('.', 1)[0]


def in_groups(name: str, groups) -> bool:
    return groups is None or group_of(name) in groups


class ModelParams:
    """
    Ordered registry of named parameter tensors with a set of frozen names.
    """

    def __init__(self, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self._tensors = collections.OrderedDict()
        self._frozen = set()

    def add(self, name: str, values) -> Tensor:
        """
        Register a new parameter.

        :param name: Unique dotted name
        :param values: Initial values
        :return: The created tensor
        """
        if name in self._tensors:
            raise ContractError("parameter '{0}' registered twice".format(name))
        tensor = Tensor(np.array(values, dtype=self.dtype), requires_grad=True)
        self._tensors[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def names(self, groups=None) -> list:
        return [name for name in self._tensors if in_groups(name, groups)]

    def freeze(self, prefix: str) -> None:
        """
        Exclude every parameter whose name starts with the prefix from optimiser updates.
        """
        matched = [name for name in self._tensors if name.startswith(prefix)]
        log.debug("Freezing {0} parameters under '{1}'".format(len(matched), prefix))
        self._frozen.update(matched)

    def unfreeze(self, prefix: str) -> None:
        self._frozen = {name for name in self._frozen if not name.startswith(prefix)}

    def is_frozen(self, name: str) -> bool:
        return name in self._frozen

    def trainable(self):
        return [(name, tensor) for name, tensor in self._tensors.items() if name not in self._frozen]

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.grad = None

    def state(self, groups=None) -> dict:
        return collections.OrderedDict((name, tensor.data.copy()) for name, tensor in self._tensors.items()
                                       if in_groups(name, groups))

    def load_state(self, state: dict) -> None:
        """
        Copy values into the existing tensors in place, so views held by models stay valid.
        """
        for name, values in state.items():
            self._tensors[name].data[...] = values

    def fingerprint(self, groups=None) -> str:
        """
        SHA-256 over names, shapes and the 32-bit little-endian values of the selected groups.
        """
        return fingerprint_arrays((name, tensor.data) for name, tensor in self._tensors.items()
                                  if in_groups(name, groups))


def fingerprint_arrays(named_arrays) -> str:
    digest = hashlib.sha256()
    for name, values in sorted(named_arrays, key=lambda item: item[0]):
        digest.update(name.encode('utf-8'))
        digest.update(str(tuple(values.shape)).encode('utf-8'))
        digest.update(np.asarray(values, dtype='<f4').tobytes())
    return digest.hexdigest()
