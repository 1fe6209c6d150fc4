"""Synthetic

Generator of labeled contact-centre style dialogues. A conversation walks through its scenes left to right; each
scene draws a number of utterances, the speaker either keeps the floor (with a scene- and speaker-dependent
probability) or hands it to the other party, and words come from the scene's word distribution, occasionally
replaced by words of the conversation's business type.
"""
import collections
import logging

import numpy as np

from lccrl.corpus import Conversation, Utterance
from lccrl.errors import ValidationError


log = logging.getLogger(__name__)

OPERATOR = 'Operator'
CUSTOMER = 'Customer'

SceneSpec = collections.namedtuple(
    'SceneSpec', 'name words probabilities min_utterances max_utterances min_words max_words hold_prob domain_rate',
    defaults=(2, 6, {}, 0.0))

SyntheticConfiguration = collections.namedtuple(
    'SyntheticConfiguration', 'num_conversations seed scene_spec speakers domains',
    defaults=(0, None, (OPERATOR, CUSTOMER), None))

COMMON_WORDS = ('yeah', 'okay', 'so', 'the', 'a', 'and', 'i', 'you', '{um}', '{uh}', 'please', 'right')

SCENE_WORDS = collections.OrderedDict([
    ('C1', ('thank', 'calling', 'bank', 'name', 'help', 'hello', 'hi', 'today', 'speaking', 'welcome')),
    ('C2', ('lost', 'need', 'want', 'problem', 'card', 'wallet', 'question', 'account', 'deactivate', 'issue')),
    ('C3', ('check', 'system', 'number', 'address', 'moment', 'second', 'information', 'details', 'processing',
            'confirm')),
    ('C4', ('understand', 'correct', 'fine', 'anything', 'else', 'sure', 'done', 'confirm', "that's", 'okay')),
    ('C5', ('thanks', 'bye', 'goodbye', 'great', 'day', 'welcome', 'care', 'appreciate', 'have', 'nice')),
])

DOMAIN_WORDS = collections.OrderedDict([
    ('finance', ('loan', 'transfer', 'balance', 'interest')),
    ('internet provider', ('router', 'connection', 'bandwidth', 'modem')),
    ('government unit', ('permit', 'form', 'registration', 'office')),
    ('mail-order', ('parcel', 'delivery', 'order', 'catalogue')),
    ('pc repair', ('laptop', 'screen', 'keyboard', 'warranty')),
    ('mobile phone', ('handset', 'sim', 'roaming', 'contract')),
])


def _mixture(own: tuple, borrowed: tuple, common: tuple) -> tuple:
    words, probabilities = [], []
    for group, mass in ((own, 0.5), (borrowed, 0.15), (common, 0.35)):
        for word in group:
            words.append(word)
            probabilities.append(mass / len(group))
    return tuple(words), tuple(probabilities)


def default_scene_spec() -> tuple:
    """
    Five scenes whose vocabularies overlap with their neighbours'.
    """
    names = list(SCENE_WORDS)
    lengths = {'C1': (1, 3), 'C2': (2, 5), 'C3': (3, 8), 'C4': (2, 4), 'C5': (1, 3)}
    holds = {'C1': {OPERATOR: 0.3, CUSTOMER: 0.2},
             'C2': {OPERATOR: 0.2, CUSTOMER: 0.5},
             'C3': {OPERATOR: 0.5, CUSTOMER: 0.3},
             'C4': {OPERATOR: 0.3, CUSTOMER: 0.3},
             'C5': {OPERATOR: 0.2, CUSTOMER: 0.2}}
    scenes = []
    for position, name in enumerate(names):
        neighbour = names[position + 1] if position + 1 < len(names) else names[position - 1]
        words, probabilities = _mixture(SCENE_WORDS[name], SCENE_WORDS[neighbour][:3], COMMON_WORDS)
        scenes.append(SceneSpec(name, words, probabilities, lengths[name][0], lengths[name][1],
                                hold_prob=holds[name], domain_rate=0.15 if name in ('C2', 'C3') else 0.0))
    return tuple(scenes)


def speaker_pattern_scene_spec() -> tuple:
    """
    Scenes C2, C3 and C4 share one vocabulary and differ only in turn taking: the customer holds the floor in C2,
    the parties alternate in C3 and the operator holds the floor in C4.
    """
    middle_words, middle_probabilities = _mixture(SCENE_WORDS['C2'] + SCENE_WORDS['C3'], SCENE_WORDS['C4'],
                                                  COMMON_WORDS)
    scenes = []
    for scene in default_scene_spec():
        if scene.name == 'C2':
            scene = scene._replace(words=middle_words, probabilities=middle_probabilities, min_utterances=3,
                                   max_utterances=6, hold_prob={OPERATOR: 0.05, CUSTOMER: 0.85})
        elif scene.name == 'C3':
            scene = scene._replace(words=middle_words, probabilities=middle_probabilities, min_utterances=3,
                                   max_utterances=6, hold_prob={OPERATOR: 0.0, CUSTOMER: 0.0})
        elif scene.name == 'C4':
            scene = scene._replace(words=middle_words, probabilities=middle_probabilities, min_utterances=3,
                                   max_utterances=6, hold_prob={OPERATOR: 0.85, CUSTOMER: 0.05})
        scenes.append(scene._replace(domain_rate=0.0))
    return tuple(scenes)


SCENE_SPECS = {
    'default': default_scene_spec,
    'speaker-pattern': speaker_pattern_scene_spec,
}


def validate_scene_spec(scene_spec: tuple) -> tuple:
    """
    :raises ValidationError: If a word distribution does not sum to one or a range is empty
    """
    if not scene_spec:
        raise ValidationError("a scene specification needs at least one scene")
    for scene in scene_spec:
        if len(scene.words) != len(scene.probabilities) or not scene.words:
            raise ValidationError("scene {0}: words and probabilities differ in length".format(scene.name))
        if any(p < 0 for p in scene.probabilities) or abs(sum(scene.probabilities) - 1.0) > 1e-6:
            raise ValidationError("scene {0}: word probabilities must be non-negative and sum to 1, got {1}".format(
                scene.name, sum(scene.probabilities)))
        if not 1 <= scene.min_utterances <= scene.max_utterances:
            raise ValidationError("scene {0}: invalid utterance range".format(scene.name))
        if not 1 <= scene.min_words <= scene.max_words:
            raise ValidationError("scene {0}: invalid words-per-utterance range".format(scene.name))
        if any(not 0.0 <= p <= 1.0 for p in scene.hold_prob.values()) or not 0.0 <= scene.domain_rate <= 1.0:
            raise ValidationError("scene {0}: probabilities must lie in [0, 1]".format(scene.name))
    return scene_spec


def generate_synthetic(config: SyntheticConfiguration) -> list:
    """
    Generate labeled conversations, deterministic for a given seed.

    :param config: Number of conversations, seed, scenes (default_scene_spec when None), speakers and business
        types (DOMAIN_WORDS when None)
    :return: Conversations whose label sequences never move back to an earlier scene
    """
    scene_spec = validate_scene_spec(config.scene_spec or default_scene_spec())
    domains = config.domains if config.domains is not None else DOMAIN_WORDS
    speakers = list(config.speakers)
    rng = np.random.default_rng(config.seed)
    corpus = []
    for number in range(config.num_conversations):
        domain = list(domains)[rng.integers(len(domains))] if domains else None
        speaker = 0
        utterances, labels = [], []
        for scene in scene_spec:
            for _ in range(int(rng.integers(scene.min_utterances, scene.max_utterances + 1))):
                if utterances and rng.random() >= scene.hold_prob.get(speakers[speaker], 0.0):
                    speaker = (speaker + 1) % len(speakers)
                utterances.append(Utterance(speakers[speaker], _draw_words(scene, domains.get(domain), rng)))
                labels.append(scene.name)
        corpus.append(Conversation(id='synth-{0}-{1:04d}'.format(config.seed, number), utterances=utterances,
                                   labels=labels, domain=domain))
    log.info("Generated {0} synthetic conversations with seed {1}".format(len(corpus), config.seed))
    return corpus


def _draw_words(scene: SceneSpec, domain_words, rng: np.random.Generator) -> list:
    count = int(rng.integers(scene.min_words, scene.max_words + 1))
    words = []
    for _ in range(count):
        if domain_words and rng.random() < scene.domain_rate:
            words.append(domain_words[rng.integers(len(domain_words))])
        else:
            words.append(scene.words[rng.choice(len(scene.words), p=scene.probabilities)])
    return words
