import collections

import pytest

from lccrl import synthetic
from lccrl.corpus import write_jsonl
from lccrl.errors import ValidationError
from lccrl.label_set import DEFAULT_LABELS
from lccrl.synthetic import SceneSpec, SyntheticConfiguration, generate_synthetic


@pytest.fixture()
def uut():
    """
    The unit under test: fifty default conversations from seed 7.
    """
    return generate_synthetic(SyntheticConfiguration(num_conversations=50, seed=7))


def test_same_seed_same_file(tmp_path):
    """
    Test that two runs with one seed write byte-identical files and another seed differs.
    """
    paths = []
    for name, seed in (('a', 3), ('b', 3), ('c', 4)):
        path = tmp_path / '{0}.jsonl'.format(name)
        write_jsonl(generate_synthetic(SyntheticConfiguration(num_conversations=10, seed=seed)), str(path))
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].read_bytes() != paths[2].read_bytes()


def test_scenes_never_move_back(uut):
    """
    Test that every conversation walks through all five scenes in order.
    """
    for conversation in uut:
        positions = [DEFAULT_LABELS.index(label) for label in conversation.labels]
        assert positions == sorted(positions)
        assert set(conversation.labels) == set(DEFAULT_LABELS)
        assert len(conversation.labels) == len(conversation.utterances)


def test_operator_opens_and_speakers_are_known(uut):
    """
    Test that the operator speaks first and only the two parties appear.
    """
    for conversation in uut:
        assert conversation.utterances[0].speaker == synthetic.OPERATOR
        assert {u.speaker for u in conversation.utterances} <= {synthetic.OPERATOR, synthetic.CUSTOMER}
        assert all(1 <= len(u.words) <= 6 for u in conversation.utterances)


def test_majority_baseline_is_weak(uut):
    """
    Test that always guessing the most frequent scene is right for less than 60% of utterances.
    """
    counts = collections.Counter(label for conversation in uut for label in conversation.labels)
    assert max(counts.values()) / sum(counts.values()) < 0.6


def test_ids_and_domains(uut):
    """
    Test the conversation ids and that every conversation has a known business type.
    """
    assert uut[0].id == 'synth-7-0000'
    assert uut[49].id == 'synth-7-0049'
    assert {c.domain for c in uut} <= set(synthetic.DOMAIN_WORDS)


def test_no_domains():
    """
    Test that an empty business-type table gives conversations without a domain.
    """
    corpus = generate_synthetic(SyntheticConfiguration(num_conversations=3, seed=1, domains={}))
    assert all(c.domain is None for c in corpus)


def test_speaker_pattern_alternates_in_the_middle_scene():
    """
    Test that the parties strictly alternate inside C3 of the speaker-pattern scenes.
    """
    corpus = generate_synthetic(SyntheticConfiguration(num_conversations=20, seed=2,
                                                       scene_spec=synthetic.speaker_pattern_scene_spec()))
    for conversation in corpus:
        speakers = [u.speaker for u, label in zip(conversation.utterances, conversation.labels) if label == 'C3']
        assert all(left != right for left, right in zip(speakers, speakers[1:]))


def test_scene_spec_validation():
    """
    Test that malformed scene specifications are refused.
    """
    good = SceneSpec('C1', ('a', 'b'), (0.5, 0.5), 1, 2)
    assert synthetic.validate_scene_spec((good,)) == (good,)
    with pytest.raises(ValidationError):
        synthetic.validate_scene_spec(())
    with pytest.raises(ValidationError):
        synthetic.validate_scene_spec((good._replace(probabilities=(0.5, 0.6)),))
    with pytest.raises(ValidationError):
        synthetic.validate_scene_spec((good._replace(min_utterances=3),))
    with pytest.raises(ValidationError):
        synthetic.validate_scene_spec((good._replace(hold_prob={'A': 1.5}),))
    for name in synthetic.SCENE_SPECS:
        synthetic.validate_scene_spec(synthetic.SCENE_SPECS[name]())
