import numpy as np
import pytest

from lccrl import checkpoint
from lccrl.configuration import ModelConfiguration, TrainingConfiguration
from lccrl.corpus import Conversation, Utterance, strip_labels
from lccrl.errors import CheckpointError, DomainError, TransferError, ValidationError
from lccrl.experiments import corpus_accuracy
from lccrl.label_set import LabelSet
from lccrl.labeler import SceneLabeler, finetune, transfer_pretrained
from lccrl.lccrl_model import LcCrlModel, pretrain
from lccrl.parameters import SHARED_GROUPS
from lccrl.synthetic import SyntheticConfiguration, generate_synthetic, speaker_pattern_scene_spec
from lccrl.vocabulary import IndexedConversation, Vocabulary, build_vocab


@pytest.fixture()
def call():
    return Conversation(id='call-1', utterances=[
        Utterance('Operator', ['hello', 'bank']),
        Utterance('Customer', ['need', 'card']),
        Utterance('Operator', ['check', 'number']),
        Utterance('Customer', ['fine', 'done']),
        Utterance('Operator', ['bye'])], labels=['C1', 'C2', 'C3', 'C4', 'C5'])


@pytest.fixture()
def call_vocab(call):
    return build_vocab([call], min_count=1)


@pytest.fixture()
def uut(small_config, call_vocab):
    """
    The unit under test: an untrained labeller over the five default scenes.
    """
    return SceneLabeler.create(small_config, call_vocab, seed=2)


@pytest.fixture()
def pretrained_path(small_config, call_vocab, tmp_path):
    path = str(tmp_path / 'pretrained.bin')
    LcCrlModel.create(small_config, call_vocab, seed=9).save(path)
    return path


def _features(model, conversation):
    return [feature.data for feature in model.build_context_features(model.index(conversation))]


def test_parameter_groups(uut):
    """
    Test that the labeller owns the shared groups and the CRF, and nothing of the pre-training heads.
    """
    groups = {name.split('.')[0] for name in uut.params}
    assert groups == set(SHARED_GROUPS) | {'theta_o'}
    assert uut.params['theta_o.transition'].shape == (6, 5)
    assert uut.params['theta_o.emission'].shape == (5, 6)


def test_labels_cover_every_utterance(uut, call):
    """
    Test that label() returns one known label name per utterance.
    """
    labels = uut.label(call)
    assert len(labels) == 5
    assert set(labels) <= set(uut.label_set.names)


def test_posteriors_are_distributions(uut, call):
    """
    Test that each posterior row sums to one.
    """
    posteriors = uut.posteriors(call)
    assert posteriors.shape == (5, 5)
    assert np.allclose(posteriors.sum(axis=1), 1.0)


def test_features_cover_the_whole_conversation(uut, call):
    """
    Test y^t = [L^(t+1); R^(t-1)]: editing utterance 3 changes every feature, but not the past halves of y^1 and y^2.
    """
    edited = call._replace(utterances=call.utterances[:2] + [Utterance('Operator', ['bye', 'bye'])]
                           + call.utterances[3:])
    hidden = uut.config.hidden
    original, changed = _features(uut, call), _features(uut, edited)
    for t in range(5):
        assert not np.allclose(original[t], changed[t])
    for t in range(2):
        assert np.array_equal(original[t][:hidden], changed[t][:hidden])


def test_single_utterance_features(uut, call):
    """
    Test that a one-utterance conversation gets a full-size feature built from both directions.
    """
    single = call._replace(utterances=call.utterances[:1], labels=['C1'])
    features = _features(uut, single)
    assert len(features) == 1
    assert features[0].shape == (2 * uut.config.hidden,)
    assert np.any(features[0][:uut.config.hidden]) and np.any(features[0][uut.config.hidden:])
    assert len(uut.label(single)) == 1


def test_empty_conversation_is_refused(uut):
    """
    Test that there is nothing to label in an empty conversation.
    """
    with pytest.raises(DomainError):
        uut.build_context_features(IndexedConversation([], [], None))


def test_speaker_blind_ignores_speakers(small_config, call_vocab, call):
    """
    Test that swapping speakers changes the features of the speaker-aware model only.
    """
    swapped = call._replace(utterances=[Utterance('Customer' if u.speaker == 'Operator' else 'Operator', u.words)
                                        for u in call.utterances])
    aware = SceneLabeler.create(small_config, call_vocab, seed=1)
    blind = SceneLabeler.create(small_config._replace(speaker_blind=True), call_vocab, seed=1)
    assert not np.allclose(_features(aware, call)[0], _features(aware, swapped)[0])
    for left, right in zip(_features(blind, call), _features(blind, swapped)):
        assert np.array_equal(left, right)


def test_transitions_can_force_a_label(uut, call):
    """
    Test that strongly negative transitions into every label but one collapse the output to that label.
    """
    transition = uut.params['theta_o.transition'].data
    transition[...] = -1000.0
    transition[:, 2] = 0.0
    assert uut.label(call) == ['C3'] * 5


def test_training_overfits_one_conversation(uut, call):
    """
    Test that the labeller reaches full training accuracy on a single conversation.
    """
    config = TrainingConfiguration(batch_size=1, max_epochs=150, heldout_fraction=0.0, learning_rate=0.05)
    result = finetune(uut, [call], config)
    assert result.model.label(call) == call.labels
    assert result.curve[-1].train_nll < result.curve[0].train_nll


def test_finetune_needs_labels(uut, call):
    """
    Test that unlabeled conversations and empty corpora are refused.
    """
    config = TrainingConfiguration(max_epochs=1, heldout_fraction=0.0)
    with pytest.raises(ValidationError):
        finetune(uut, strip_labels([call]), config)
    with pytest.raises(DomainError):
        finetune(uut, [], config)
    with pytest.raises(ValidationError):
        finetune(uut, [call._replace(labels=['C1', 'C2', 'C3', 'C4', 'C9'])], config)


def test_transfer_copies_the_shared_encoders(uut, pretrained_path):
    """
    Test that transfer copies exactly the shared groups and reports the rest.
    """
    saved = checkpoint.load_checkpoint(pretrained_path)
    report = transfer_pretrained(uut, saved)
    assert uut.shared_fingerprint() == checkpoint.checkpoint_fingerprint(saved, SHARED_GROUPS)
    assert checkpoint.groups_of(report.ignored) == ['theta_d', 'theta_v', 'theta_y']
    assert checkpoint.groups_of(report.missing) == ['theta_o']


def test_transfer_shape_conflict_names_the_parameter(small_config, call_vocab, pretrained_path):
    """
    Test that a different word dimension is a transfer error naming the word table.
    """
    labeler = SceneLabeler.create(small_config._replace(word_dim=5), call_vocab)
    with pytest.raises(TransferError) as error:
        transfer_pretrained(labeler, checkpoint.load_checkpoint(pretrained_path))
    assert error.value.parameter == 'theta_w.weight'
    assert 'theta_w.weight' in str(error.value)


def test_transfer_vocabulary_mismatch(small_config, pretrained_path):
    """
    Test that another vocabulary is refused unless explicitly allowed.
    """
    other = Vocabulary(['hello', 'bank', 'need', 'card', 'check', 'number', 'fine', 'done', 'byebye'],
                       ['Customer', 'Operator'], min_count=1)
    labeler = SceneLabeler.create(small_config, other)
    saved = checkpoint.load_checkpoint(pretrained_path)
    with pytest.raises(CheckpointError):
        transfer_pretrained(labeler, saved)
    assert transfer_pretrained(labeler, saved, allow_vocab_mismatch=True).loaded


def test_freeze_shared_trains_only_the_crf(uut, call, pretrained_path):
    """
    Test that frozen shared groups keep their pre-trained values while theta_o moves.
    """
    saved = checkpoint.load_checkpoint(pretrained_path)
    before = uut.params.fingerprint(['theta_o'])
    config = TrainingConfiguration(batch_size=1, max_epochs=2, heldout_fraction=0.0, freeze_shared=True)
    result = finetune(uut, [call], config, init=saved)
    assert result.model.shared_fingerprint() == checkpoint.checkpoint_fingerprint(saved, SHARED_GROUPS)
    assert result.model.params.fingerprint(['theta_o']) != before
    assert result.transfer.loaded


def test_restarts_build_fresh_models(uut, call, mocker):
    """
    Test that every restart after the first builds a new labeller from the next seed.
    """
    create = mocker.spy(SceneLabeler, 'create')
    config = TrainingConfiguration(batch_size=1, max_epochs=1, heldout_fraction=0.0, num_restarts=3, seed=4)
    result = finetune(uut, [call, call], config)
    assert create.call_count == 2
    assert create.call_args_list[-1].args[-1] == 6
    assert isinstance(result.model, SceneLabeler)


def test_save_and_load(uut, call, tmp_path):
    """
    Test that a saved labeller reloads with its labels and predicts the same scenes.
    """
    labeler = SceneLabeler.create(uut.config, uut.vocab, LabelSet(['open', 'middle', 'close']), seed=3)
    path = str(tmp_path / 'labeler.bin')
    labeler.save(path)
    loaded = SceneLabeler.load(path)
    assert loaded.label_set.names == ['open', 'middle', 'close']
    assert loaded.label(call) == labeler.label(call)
    assert np.allclose(loaded.posteriors(call), labeler.posteriors(call), atol=1e-5)


def _mean_gain(train, test, runs, vocab, model_config, init, labeled=4, **training):
    gains = []
    for seed in runs:
        subset = train[seed * labeled:(seed + 1) * labeled]
        config = TrainingConfiguration(batch_size=2, max_epochs=30, heldout_fraction=0.0, learning_rate=0.01,
                                       seed=seed, **training)
        scores = []
        for checkpoint_init in (None, init):
            model = SceneLabeler.create(model_config, vocab, seed=seed)
            scores.append(corpus_accuracy(finetune(model, subset, config, init=checkpoint_init).model, test))
        gains.append(scores[1] - scores[0])
    return float(np.mean(gains))


@pytest.mark.slow
def test_pretraining_helps_with_few_labels(small_config, tmp_path):
    """
    Test that pre-trained encoders beat random ones by at least 5 points with 4 labeled conversations.
    """
    unlabeled = strip_labels(generate_synthetic(SyntheticConfiguration(num_conversations=64, seed=100)))
    labeled = generate_synthetic(SyntheticConfiguration(num_conversations=20, seed=200))
    test = generate_synthetic(SyntheticConfiguration(num_conversations=20, seed=300))
    config = small_config._replace(word_dim=8, hidden=8)
    vocab = build_vocab(unlabeled + labeled, min_count=1)
    training = TrainingConfiguration(batch_size=8, max_epochs=20, heldout_fraction=0.1, learning_rate=0.01)
    path = str(tmp_path / 'pretrained.bin')
    pretrain(LcCrlModel.create(config, vocab), unlabeled, training).model.save(path)
    gain = _mean_gain(labeled, test, range(5), vocab, config, checkpoint.load_checkpoint(path))
    assert gain >= 5.0


@pytest.mark.slow
def test_speaker_information_helps_when_scenes_share_words(small_config):
    """
    Test that, averaged over 5 seeds, the speaker-aware labeller beats the speaker-blind one by at least 2 points
    when only the speaker pattern tells the middle scenes apart.
    """
    spec = speaker_pattern_scene_spec()
    differences = []
    for seed in range(5):
        train = generate_synthetic(SyntheticConfiguration(num_conversations=40, seed=10 + seed, scene_spec=spec))
        test = generate_synthetic(SyntheticConfiguration(num_conversations=20, seed=50 + seed, scene_spec=spec))
        vocab = build_vocab(train, min_count=1)
        config = TrainingConfiguration(batch_size=4, max_epochs=25, heldout_fraction=0.1, learning_rate=0.01,
                                       seed=seed)
        accuracies = []
        for blind in (False, True):
            model = SceneLabeler.create(small_config._replace(hidden=8, speaker_blind=blind), vocab, seed=seed)
            accuracies.append(corpus_accuracy(finetune(model, train, config).model, test))
        differences.append(accuracies[0] - accuracies[1])
    assert np.mean(differences) >= 2.0


@pytest.mark.slow
def test_desk_model_overfits_one_synthetic_conversation():
    """
    Test that the default desk-scale labeller reaches 100% training accuracy on one synthetic conversation.
    """
    conversation = generate_synthetic(SyntheticConfiguration(num_conversations=1, seed=5))
    model = SceneLabeler.create(ModelConfiguration(), build_vocab(conversation, min_count=1), seed=0)
    config = TrainingConfiguration(batch_size=1, max_epochs=300, heldout_fraction=0.0, learning_rate=0.005)
    trained = finetune(model, conversation, config).model
    assert corpus_accuracy(trained, conversation) == pytest.approx(100.0)
