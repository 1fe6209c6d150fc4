"""Label Set

The ordered scene labels of the labelling task. The default names the five call scenes: C1 opening, C2 requirement
confirmation, C3 response, C4 customer confirmation and C5 closing.
"""
import logging

from lccrl.errors import ValidationError


log = logging.getLogger(__name__)

DEFAULT_LABELS = ('C1', 'C2', 'C3', 'C4', 'C5')

SCENE_DESCRIPTIONS = {
    'C1': 'opening',
    'C2': 'requirement confirmation',
    'C3': 'response',
    'C4': 'customer confirmation',
    'C5': 'closing',
}


class LabelSet:
    """
    Ordered, unique label names.
    """

    def __init__(self, names=DEFAULT_LABELS):
        names = list(names)
        if not names:
            raise ValidationError("a label set needs at least one label")
        if len(set(names)) != len(names):
            raise ValidationError("label names must be unique: {0}".format(names))
        self.names = names
        self._index = {name: index for index, name in enumerate(names)}

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __contains__(self, name) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        if name not in self._index:
            raise ValidationError("label '{0}' is not one of {1}".format(name, self.names))
        return self._index[name]

    def name(self, index: int) -> str:
        return self.names[index]

    @classmethod
    def parse(cls, text: str) -> 'LabelSet':
        return cls([name.strip() for name in text.split(',') if name.strip()])
