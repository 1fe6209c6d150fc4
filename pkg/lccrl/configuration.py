"""Configuration

ModelConfiguration and TrainingConfiguration wrap every user-tunable setting. Values come from the defaults below,
then an optional JSON configuration file, then command-line flags.
"""
import codecs
import collections
import json
import logging

from lccrl.errors import ValidationError


log = logging.getLogger(__name__)

ModelConfiguration = collections.namedtuple(
    'ModelConfiguration',
    'word_dim speaker_dim hidden encoder_layers context_layers attention_dim dropout speaker_blind precision',
    defaults=(32, 8, 32, 2, 2, None, 0.2, False, 'float64'))

TrainingConfiguration = collections.namedtuple(
    'TrainingConfiguration',
    'batch_size max_epochs patience heldout_fraction learning_rate beta1 beta2 epsilon seed num_restarts '
    'freeze_shared freeze_word_vectors',
    defaults=(5, 30, 3, 0.1, 0.001, 0.9, 0.999, 1e-8, 0, 1, False, False))

PRESETS = {
    'desk': ModelConfiguration(),
    'full': ModelConfiguration(word_dim=512, speaker_dim=32, hidden=512, encoder_layers=2, context_layers=2),
}


def attention_dim(config: ModelConfiguration) -> int:
    return config.attention_dim or config.hidden


def validate_model_config(config: ModelConfiguration) -> ModelConfiguration:
    for field in ('word_dim', 'speaker_dim', 'hidden', 'encoder_layers', 'context_layers'):
        if getattr(config, field) < 1:
            raise ValidationError("model setting '{0}' must be positive, got {1}".format(field,
                                                                                      getattr(config, field)))
    if config.attention_dim is not None and config.attention_dim < 1:
        raise ValidationError("attention_dim must be positive")
    if not 0.0 <= config.dropout < 1.0:
        raise ValidationError("dropout must be in [0, 1), got {0}".format(config.dropout))
    if config.precision not in ('float64', 'float32'):
        raise ValidationError("precision must be float64 or float32, got {0}".format(config.precision))
    return config


def validate_training_config(config: TrainingConfiguration) -> TrainingConfiguration:
    if config.batch_size < 1:
        raise ValidationError("batch size must be at least 1, got {0}".format(config.batch_size))
    if config.max_epochs < 0:
        raise ValidationError("max_epochs must not be negative")
    if config.patience < 1:
        raise ValidationError("patience must be at least 1")
    if not 0.0 <= config.heldout_fraction < 1.0:
        raise ValidationError("heldout_fraction must be in [0, 1), got {0}".format(config.heldout_fraction))
    if config.num_restarts < 1:
        raise ValidationError("num_restarts must be at least 1")
    if config.learning_rate <= 0:
        raise ValidationError("learning_rate must be positive")
    return config


def load_config_file(path: str) -> dict:
    """
    Read a JSON configuration file with optional 'model' and 'training' sections.

    :param path: The file to read
    :return: Mapping with 'model' and 'training' dictionaries
    """
    with codecs.open(path, 'r', 'utf-8') as config_file:
        try:
            raw = json.load(config_file)
        except json.JSONDecodeError as error:
            raise ValidationError("configuration file {0} is not valid JSON: {1}".format(path, error))
    unknown_sections = set(raw) - {'model', 'training'}
    if unknown_sections:
        raise ValidationError("unknown configuration sections: {0}".format(sorted(unknown_sections)))
    log.debug("Loaded configuration file {0}".format(path))
    return {'model': raw.get('model', {}), 'training': raw.get('training', {})}


def _merge(record_type, base, *layers):
    values = base._asdict()
    for layer in layers:
        for key, value in layer.items():
            if key not in values:
                raise ValidationError("unknown {0} setting '{1}'".format(record_type.__name__, key))
            if value is not None:
                values[key] = value
    return record_type(**values)


def build_model_config(preset: str = 'desk', file_values: dict = None, overrides: dict = None,
                       base: ModelConfiguration = None) -> ModelConfiguration:
    """
    Preset (or `base`, such as the configuration stored in a checkpoint), then file values, then overrides.
    """
    if preset not in PRESETS:
        raise ValidationError("unknown preset '{0}', expected one of {1}".format(preset, sorted(PRESETS)))
    config = _merge(ModelConfiguration, base or PRESETS[preset], file_values or {}, overrides or {})
    return validate_model_config(config)


def build_training_config(file_values: dict = None, overrides: dict = None) -> TrainingConfiguration:
    config = _merge(TrainingConfiguration, TrainingConfiguration(), file_values or {}, overrides or {})
    return validate_training_config(config)
