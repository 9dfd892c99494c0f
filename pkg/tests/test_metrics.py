import random

import pytest
from hypothesis import given
import hypothesis.strategies as st

from src.exc import DomainError, UndefinedMetricError
from src.models import ConfusionReport, Mode, WordClass, WordRecord
from src.services.metrics import compute_metrics, summary_table

P, C, E = WordClass.PASS, WordClass.CONFUSED, WordClass.EXCLUDED


def report(classes, mode=Mode.ENGLISH_NEUTRAL) -> ConfusionReport:
    words = [WordRecord(surface=f'w{i}', word_class=c, start=3 * i) for i, c in enumerate(classes)]
    point = next((w.start for w in words if w.word_class is C), None)
    return ConfusionReport(words=words, confusion_point=point, mode=mode)


def test_single_response_with_one_confused_word():
    result = compute_metrics([report([P] * 9 + [C])])
    assert result.wpr == pytest.approx(0.9)
    assert result.rpr == 0.0


def test_all_clean():
    result = compute_metrics([report([P, P]), report([P])])
    assert (result.wpr, result.rpr) == (1.0, 1.0)


def test_pooled_word_pass_rate():
    result = compute_metrics([report([P, P]), report([P, C]), report([P, P, P])])
    assert result.wpr == pytest.approx(6 / 7)
    assert result.rpr == pytest.approx(2 / 3)
    assert result.counts == (6, 7, 2, 3)


def test_excluded_words_are_not_counted():
    result = compute_metrics([report([P, E, E, C])])
    assert result.counts == (1, 2, 0, 1)


def test_all_excluded_response_is_flagged_and_passes():
    result = compute_metrics([report([E, E]), report([P, C])])
    assert result.empty_responses == [0]
    assert result.responses[0].passed
    assert result.rpr == 0.5


def test_empty_input_is_undefined():
    with pytest.raises(UndefinedMetricError):
        compute_metrics([])


def test_no_countable_words_is_undefined():
    with pytest.raises(UndefinedMetricError):
        compute_metrics([report([E]), report([])])


def test_mixed_modes_are_rejected():
    with pytest.raises(DomainError):
        compute_metrics([report([P]), report([P], Mode.ENGLISH_STRICT)])


def test_hand_counted_sets():
    rng = random.Random(17)
    for _ in range(50):
        responses = [[rng.choice([P, P, P, C, E]) for _ in range(rng.randint(1, 8))] for _ in range(rng.randint(1, 10))]
        if not any(c in (P, C) for r in responses for c in r):
            continue
        words_pass = sum(r.count(P) for r in responses)
        words_total = sum(r.count(P) + r.count(C) for r in responses)
        responses_pass = sum(C not in r for r in responses)
        result = compute_metrics([report(r) for r in responses])
        assert result.counts == (words_pass, words_total, responses_pass, len(responses))
        assert result.wpr == words_pass / words_total


responses_strategy = st.lists(
    st.lists(st.sampled_from([P, C, E]), min_size=1, max_size=6).filter(lambda r: P in r or C in r),
    min_size=1, max_size=12,
)


@given(responses_strategy, st.randoms())
def test_permutation_invariance(responses, rnd):
    shuffled = responses[:]
    rnd.shuffle(shuffled)
    a = compute_metrics([report(r) for r in responses])
    b = compute_metrics([report(r) for r in shuffled])
    assert a.counts == b.counts


@given(responses_strategy)
def test_appending_a_clean_response_never_lowers_rpr(responses):
    before = compute_metrics([report(r) for r in responses])
    after = compute_metrics([report(r) for r in responses + [[P]]])
    assert after.rpr >= before.rpr
    assert (before.rpr == 1.0) == (before.wpr == 1.0)


def test_summary_table_lists_runs():
    table = summary_table({'baseline': compute_metrics([report([P, C])]), 'final': compute_metrics([report([P])])})
    lines = table.splitlines()
    assert lines[2].startswith('baseline')
    assert lines[3].startswith('final')
    assert '1.0000' in lines[3]
