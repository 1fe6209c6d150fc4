import numpy as np
import pytest

from lccrl import tensor as T
from lccrl.encoders import ConversationEncoder, make_shared_parameters
from lccrl.errors import DomainError
from lccrl.parameters import SHARED_GROUPS, ModelParams
from lccrl.vocabulary import IndexedConversation


@pytest.fixture()
def uut(small_config):
    """
    The unit under test: an encoder over six words and two speakers.
    """
    params = ModelParams()
    make_shared_parameters(params, small_config, 6, 2, np.random.default_rng(0))
    return ConversationEncoder(params, small_config)


@pytest.fixture()
def conversation():
    return IndexedConversation(speakers=[0, 1, 0, 1], words=[[3, 4], [5], [3, 3, 4], [4]], labels=None)


def test_only_shared_groups(uut):
    """
    Test that the encoder registers exactly the shared groups.
    """
    assert {name.split('.')[0] for name in uut._params} == set(SHARED_GROUPS)


def test_zero_parameters_give_a_zero_utterance_vector(uut):
    """
    Test that with all parameters zero the utterance vector is zero.
    """
    for _, tensor in uut._params.items():
        tensor.data[...] = 0.0
    assert not np.any(uut.encode_utterance(0, [3, 4]).data)


def test_speaker_changes_the_utterance_vector(uut):
    """
    Test that the same words from another speaker encode differently.
    """
    assert uut.encode_utterance(0, [3, 4]).shape == (uut.utterance_dim,)
    assert not np.allclose(uut.encode_utterance(0, [3, 4]).data, uut.encode_utterance(1, [3, 4]).data)


def test_empty_inputs(uut):
    """
    Test that empty utterances and conversations are refused.
    """
    with pytest.raises(DomainError):
        uut.encode_utterance(0, [])
    with pytest.raises(DomainError):
        uut.encode_contexts([])


def test_context_boundaries(uut, conversation):
    """
    Test that L^1 and R^T are zero states and that there are T + 1 of each.
    """
    encoded = uut.encode(conversation)
    assert len(encoded) == 4
    assert not np.any(encoded.past_context(1).data)
    assert not np.any(encoded.future_context(4).data)
    assert np.any(encoded.past_context(5).data)
    assert np.any(encoded.future_context(0).data)


def test_contexts_are_causal(uut, conversation):
    """
    Test that changing S^3 leaves L^1..L^3 and R^3, R^4 alone but changes L^4 and R^2.
    """
    utterances = [uut.encode_utterance(s, w) for s, w in zip(conversation.speakers, conversation.words)]
    past, future = uut.encode_contexts(utterances)
    utterances[2] = T.Tensor(utterances[2].data + 0.5)
    changed_past, changed_future = uut.encode_contexts(utterances)
    for t in range(3):
        assert np.array_equal(past[t].data, changed_past[t].data)
    for t in (3, 4):
        assert np.array_equal(future[t].data, changed_future[t].data)
    assert not np.allclose(past[3].data, changed_past[3].data)
    assert not np.allclose(future[2].data, changed_future[2].data)


def test_single_utterance(uut):
    """
    Test the contexts of a one-utterance conversation.
    """
    encoded = uut.encode(IndexedConversation([1], [[5]], None))
    assert not np.any(encoded.past_context(1).data)
    assert not np.any(encoded.future_context(1).data)
    assert encoded.past_context(2).shape == (uut.context_dim,)
