"""Checkpoint

Binary parameter files. Layout, all integers little-endian:

    magic b'LCCRLCKP' | version u32 | metadata length u32 | metadata (UTF-8 JSON) | entry count u32
    per entry: name length u16 | name (UTF-8) | ndim u8 | dims u32 * ndim | payload float32 * product(dims)

Metadata records the model kind, its configuration, label names and the vocabulary with its hash.
"""
import collections
import json
import logging
import struct

import numpy as np

from lccrl import configuration
from lccrl.errors import (CheckpointError, CheckpointVersionError, DomainError, TransferError,
                          TruncatedCheckpointError)
from lccrl.parameters import ModelParams, fingerprint_arrays, group_of, in_groups
from lccrl.vocabulary import Vocabulary


log = logging.getLogger(__name__)

MAGIC = b'LCCRLCKP'
FORMAT_VERSION = 1

Checkpoint = collections.namedtuple('Checkpoint', 'version entries metadata')
TransferReport = collections.namedtuple('TransferReport', 'loaded ignored missing')


def save_checkpoint(params: ModelParams, path: str, metadata: dict = None) -> None:
    """
    Write every parameter as 32-bit floats.

    :raises DomainError: If a parameter holds non-finite values
    """
    meta = json.dumps(metadata or {}, sort_keys=True).encode('utf-8')
    chunks = [MAGIC, struct.pack('<II', FORMAT_VERSION, len(meta)), meta, struct.pack('<I', len(params))]
    for name, tensor in params.items():
        if not np.all(np.isfinite(tensor.data)):
            log.error("Parameter {0} holds non-finite values; checkpoint not written".format(name))
            raise DomainError("parameter '{0}' holds non-finite values".format(name))
        encoded = name.encode('utf-8')
        shape = tensor.shape
        chunks.append(struct.pack('<H', len(encoded)) + encoded)
        chunks.append(struct.pack('<B', len(shape)) + struct.pack('<{0}I'.format(len(shape)), *shape))
        chunks.append(np.ascontiguousarray(tensor.data, dtype='<f4').tobytes())
    with open(path, 'wb') as checkpoint_file:
        checkpoint_file.write(b''.join(chunks))
    log.info("Wrote checkpoint {0} with {1} entries".format(path, len(params)))


class _Reader:

    def __init__(self, payload: bytes, path: str):
        self._payload = payload
        self._offset = 0
        self._path = path

    def take(self, count: int) -> bytes:
        if self._offset + count > len(self._payload):
            raise TruncatedCheckpointError("checkpoint {0} is truncated at byte {1}".format(self._path,
                                                                                           len(self._payload)))
        chunk = self._payload[self._offset:self._offset + count]
        self._offset += count
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    @property
    def exhausted(self) -> bool:
        return self._offset == len(self._payload)


def load_checkpoint(path: str) -> Checkpoint:
    """
    Read a checkpoint file.

    :raises CheckpointError: On a bad header or duplicate names
    :raises CheckpointVersionError: On an unsupported format version
    :raises TruncatedCheckpointError: If the payload is shorter than declared
    """
    with open(path, 'rb') as checkpoint_file:
        reader = _Reader(checkpoint_file.read(), path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("{0} is not a checkpoint file".format(path))
    version, meta_length = reader.unpack('<II')
    if version != FORMAT_VERSION:
        raise CheckpointVersionError("checkpoint {0} has format version {1}, expected {2}".format(
            path, version, FORMAT_VERSION))
    metadata = json.loads(reader.take(meta_length).decode('utf-8'))
    entries = collections.OrderedDict()
    (count,) = reader.unpack('<I')
    for _ in range(count):
        (name_length,) = reader.unpack('<H')
        name = reader.take(name_length).decode('utf-8')
        (ndim,) = reader.unpack('<B')
        shape = reader.unpack('<{0}I'.format(ndim))
        size = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.take(4 * size), dtype='<f4').reshape(shape).copy()
        if name in entries:
            raise CheckpointError("checkpoint {0} repeats entry '{1}'".format(path, name))
        entries[name] = values
    if not reader.exhausted:
        raise CheckpointError("checkpoint {0} has trailing bytes".format(path))
    log.debug("Read checkpoint {0} with {1} entries".format(path, len(entries)))
    return Checkpoint(version, entries, metadata)


def checkpoint_fingerprint(saved: Checkpoint, groups=None) -> str:
    return fingerprint_arrays((name, values) for name, values in saved.entries.items() if in_groups(name, groups))


def load_into(params: ModelParams, saved: Checkpoint, groups=None) -> TransferReport:
    """
    Copy checkpoint entries into matching parameters.

    :param groups: Restrict loading to these parameter groups; other entries are reported as ignored
    :return: Names loaded, checkpoint entries ignored, and parameters left at their initial values
    :raises TransferError: If a matching entry has a different shape, naming the entry
    """
    loaded, ignored = [], []
    for name, values in saved.entries.items():
        if not in_groups(name, groups) or name not in params:
            ignored.append(name)
            continue
        if tuple(params[name].shape) != tuple(values.shape):
            log.error("Shape conflict for {0}: checkpoint {1}, model {2}".format(name, values.shape,
                                                                                 params[name].shape))
            raise TransferError("shape conflict for parameter '{0}': checkpoint {1}, model {2}".format(
                name, tuple(values.shape), tuple(params[name].shape)), parameter=name)
        params[name].data[...] = values
        loaded.append(name)
    missing = [name for name in params if name not in set(loaded)]
    report = TransferReport(loaded, ignored, missing)
    log.info("Transferred {0} entries; ignored groups {1}; fresh groups {2}".format(
        len(loaded), groups_of(ignored), groups_of(missing)))
    return report


def groups_of(names: list) -> list:
    return sorted({group_of(name) for name in names})


def restore_all(params: ModelParams, saved: Checkpoint) -> None:
    report = load_into(params, saved)
    if report.missing or report.ignored:
        raise CheckpointError("checkpoint does not match the model: missing {0}, unexpected {1}".format(
            report.missing, report.ignored))


def model_metadata(kind: str, config: configuration.ModelConfiguration, vocab: Vocabulary,
                   labels: list = None) -> dict:
    metadata = {'model': kind,
                'config': config._asdict(),
                'vocab': vocab.to_dict(),
                'vocab_hash': vocab.fingerprint()}
    if labels is not None:
        metadata['labels'] = list(labels)
    return metadata


def read_model_metadata(saved: Checkpoint, kind: str = None) -> tuple:
    """
    :return: (ModelConfiguration, Vocabulary) stored in the checkpoint
    :raises CheckpointError: If the checkpoint holds another kind of model or lacks metadata
    """
    metadata = saved.metadata
    if 'config' not in metadata or 'vocab' not in metadata:
        raise CheckpointError("checkpoint has no model metadata")
    if kind is not None and metadata.get('model') != kind:
        raise CheckpointError("checkpoint holds a '{0}' model, expected '{1}'".format(metadata.get('model'), kind))
    vocab = Vocabulary.from_dict(metadata['vocab'])
    if metadata.get('vocab_hash') not in (None, vocab.fingerprint()):
        raise CheckpointError("checkpoint vocabulary does not match its recorded hash")
    return configuration.ModelConfiguration(**metadata['config']), vocab


def check_vocabulary(saved: Checkpoint, vocab: Vocabulary, allow_mismatch: bool = False) -> None:
    """
    :raises CheckpointError: If the checkpoint was trained with another vocabulary and mismatches are not allowed
    """
    recorded = saved.metadata.get('vocab_hash')
    if recorded is None or recorded == vocab.fingerprint():
        return
    if allow_mismatch:
        log.warning("Checkpoint vocabulary differs from the model vocabulary; continuing as requested")
        return
    raise CheckpointError("checkpoint vocabulary does not match the model vocabulary")
