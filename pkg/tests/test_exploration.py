import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from src.exc import ConfigurationError, DegenerateCandidateError
from src.models import Context, LangTag, SelectionStrategy
from src.services.exploration import lookahead_fragment, lookahead_reward, score_candidates, select_candidates
from src.services.policy import PolicyTable
from tests.conftest import make_vocab


def ranked_policy(vocab4, probs):
    return PolicyTable(vocab4, rows={(0,): np.log(probs)})


def test_ranked_top_two(vocab4):
    cands = select_candidates(ranked_policy(vocab4, [0.4, 0.3, 0.2, 0.1]), Context(window=(0,)), 2)
    assert list(cands.tokens) == [0, 1]
    assert np.allclose(cands.probs, [0.4, 0.3])
    assert cands.strategy is SelectionStrategy.RANKED


def test_ranked_ties_break_by_id(vocab4):
    cands = select_candidates(PolicyTable(vocab4), Context(window=(0,)), 4)
    assert list(cands.tokens) == [0, 1, 2, 3]


def test_near_tie_keeps_order(vocab4):
    policy = ranked_policy(vocab4, [0.5, 0.5 - 1e-15, 1e-20, 1e-20])
    with pytest.raises(ConfigurationError):
        select_candidates(policy, Context(window=(0,)), 1)
    assert list(select_candidates(policy, Context(window=(0,)), 2).tokens) == [0, 1]


def test_too_many_candidates(vocab4):
    with pytest.raises(ConfigurationError):
        select_candidates(PolicyTable(vocab4), Context(window=(0,)), 5)


def test_zero_probability_tokens_are_dropped(vocab4):
    policy = PolicyTable(vocab4, rows={(0,): [0.0, 0.0, -1000.0, -1000.0]})
    assert list(select_candidates(policy, Context(window=(0,)), 4).tokens) == [0, 1]
    single = PolicyTable(vocab4, rows={(0,): [0.0, -1000.0, -1000.0, -1000.0]})
    with pytest.raises(DegenerateCandidateError):
        select_candidates(single, Context(window=(0,)), 3)


@given(st.integers(min_value=2, max_value=64), st.integers(min_value=0, max_value=2**32 - 1), st.data())
def test_ranked_equals_full_sort(size, seed, data):
    vocab = make_vocab(*[(f' {chr(0xAC00 + i)}', LangTag.TARGET) for i in range(size)])
    rng = np.random.default_rng(seed)
    # грубые логиты дают равенства вероятностей
    row = rng.integers(-3, 3, size=size).astype(float)
    policy = PolicyTable(vocab, rows={(0,): row})
    n = data.draw(st.integers(min_value=2, max_value=size))
    probs = policy.next_token_dist([0])
    expected = sorted(range(size), key=lambda t: (-probs[t], t))[:n]
    assert list(select_candidates(policy, Context(window=(0,)), n).tokens) == expected


def test_multinomial_is_seeded_and_distinct(small_corpus):
    ctx = Context(window=(1,))
    first = select_candidates(small_corpus.policy, ctx, 16, SelectionStrategy.MULTINOMIAL, seed=[1, 3, 0, 0])
    second = select_candidates(small_corpus.policy, ctx, 16, SelectionStrategy.MULTINOMIAL, seed=[1, 3, 0, 0])
    assert first == second
    assert len(set(first.tokens.tolist())) == 16
    assert first.strategy is SelectionStrategy.MULTINOMIAL


@pytest.fixture
def fragment_vocab():
    return make_vocab(
        ('</s>', LangTag.NEUTRAL),
        (' 가나', LangTag.TARGET),
        (' 다라', LangTag.TARGET),
        (' мир', LangTag.CONFUSED),
        (' ', LangTag.NEUTRAL),
        ('вет', LangTag.CONFUSED),
        eos_id=0,
    )


def test_target_token_with_target_continuations_is_rewarded(fragment_vocab, neutral_detector):
    policy = PolicyTable(fragment_vocab, rows={(): [-50.0, 0.0, 0.0, -50.0, -50.0, -50.0]})
    reward = lookahead_reward(policy, Context(window=(1,)), 2, 3, neutral_detector, seed=0, greedy=False)
    assert reward == 1.0


def test_confused_token_is_penalized_regardless_of_lookahead(fragment_vocab, neutral_detector):
    policy = PolicyTable(fragment_vocab, rows={(): [-50.0, 0.0, 0.0, -50.0, -50.0, -50.0]})
    for k in (0, 3):
        assert lookahead_reward(policy, Context(window=(1,)), 3, k, neutral_detector) == -1.0


def test_word_initial_token_with_confused_completion(fragment_vocab, neutral_detector):
    rows = {
        (): [0.0, 0.0, 0.0, -50.0, -50.0, -50.0],
        (4,): [-50.0, -50.0, -50.0, -50.0, -50.0, 0.0],
    }
    policy = PolicyTable(fragment_vocab, rows=rows)
    ctx = Context(window=(1,))
    assert lookahead_fragment(policy, ctx, 4, 3)[:2] == [4, 5]
    assert lookahead_reward(policy, ctx, 4, 3, neutral_detector) == -1.0
    assert lookahead_reward(policy, ctx, 4, 0, neutral_detector) == 1.0


def test_lookahead_stops_at_eos(fragment_vocab):
    policy = PolicyTable(fragment_vocab)
    assert lookahead_fragment(policy, Context(window=(1,)), 0, 3) == [0]
    with pytest.raises(ConfigurationError):
        lookahead_fragment(policy, Context(window=(1,)), 1, -1)


def test_score_candidates_is_deterministic(small_corpus, neutral_detector):
    ctx = Context(window=(1,))
    cands = select_candidates(small_corpus.policy, ctx, 8)
    seeds = [[0, 4, 0, 0, i] for i in range(cands.n)]
    first = score_candidates(small_corpus.policy, cands, 3, neutral_detector, seeds, greedy=False)
    second = score_candidates(small_corpus.policy, cands, 3, neutral_detector, seeds, greedy=False)
    assert first.rewards.tolist() == second.rewards.tolist()
    assert first.scored
    with pytest.raises(ValueError):
        score_candidates(small_corpus.policy, cands, 3, neutral_detector, seeds[:-1])


def test_generated_confusion_token_gets_negative_reward(small_corpus, neutral_detector):
    policy = small_corpus.policy
    vocab = policy.vocab
    for j, prompt in enumerate(small_corpus.prompts):
        response = policy.sample_sequence(prompt, 6, seed=[0, 2, 0, j])
        point = neutral_detector.detect_confusion_point(response.tokens, vocab)
        if point is None:
            continue
        ctx = response.context_at(point, policy.m)
        assert lookahead_reward(policy, ctx, response.tokens[point], 0, neutral_detector) == -1.0
