import unicodedata

import pytest
from hypothesis import given
import hypothesis.strategies as st

from src.models import ExclusionRule, LangTag, Mode, ScriptRules, WordClass
from src.services.detector import (
    LanguageDetector, analyze_text, classify_word, detect_confusion_point, explain_word, script_of, segment,
)
from tests.conftest import make_vocab
from tests.oracles.detector_fixtures import generate


@pytest.mark.parametrize('text, words', [
    ('안녕 세계', ['안녕', '세계']),
    ('', []),
    ('   ', []),
    ('你好world你好', ['你好', 'world', '你好']),
    ('こんにちは世界', ['こんにちは', '世界']),
    ('你好，世界', ['你好，世界']),
    ('漢字ひらがな', ['漢字', 'ひらがな']),
])
def test_segment(text, words):
    assert segment(text) == words


@pytest.mark.parametrize('word, target, expected', [
    ('https://a.b', 'ko', WordClass.EXCLUDED),
    ('https://a.b', 'zh', WordClass.EXCLUDED),
    ('Paris', 'ko', WordClass.EXCLUDED),
    ('привет', 'ko', WordClass.CONFUSED),
    ('안녕', 'ko', WordClass.PASS),
    ('안녕.', 'ko', WordClass.PASS),
    ('中国', 'zh', WordClass.PASS),
    ('中国', 'ko', WordClass.CONFUSED),
    ('مرحبا', 'ar', WordClass.PASS),
    ('ひらがな', 'ja', WordClass.PASS),
])
def test_classify_word(word, target, expected):
    assert classify_word(word, ScriptRules.for_target(target), Mode.ENGLISH_NEUTRAL) is expected


def test_english_depends_on_mode(ko_rules):
    assert classify_word('hello', ko_rules, Mode.ENGLISH_NEUTRAL) is WordClass.PASS
    assert classify_word('hello', ko_rules, Mode.ENGLISH_STRICT) is WordClass.CONFUSED


@pytest.mark.parametrize('word, rule', [
    ('user@mail.com', ExclusionRule.EMAIL),
    ('www.naver.com', ExclusionRule.URL),
    ('get_value', ExclusionRule.CODE),
    ('print(x)', ExclusionRule.CODE),
    ('camelCase', ExclusionRule.CODE),
    ('Seoul', ExclusionRule.CAPITAL),
    ('5km', ExclusionRule.UNIT),
    ('3.5GHz', ExclusionRule.UNIT),
    ('nǐ', ExclusionRule.TONE),
    ('ˈhɛloʊ', ExclusionRule.PHONETIC),
    ('2024', ExclusionRule.NO_SCRIPT),
    ('→', ExclusionRule.NO_SCRIPT),
    ('€100', ExclusionRule.NO_SCRIPT),
    ('🙂', ExclusionRule.NO_SCRIPT),
    ('∑', ExclusionRule.NO_SCRIPT),
])
def test_exclusion_rules(ko_rules, word, rule):
    assert explain_word(word, ko_rules, Mode.ENGLISH_STRICT) == (WordClass.EXCLUDED, rule)


def test_units_need_a_number_for_single_letters(ko_rules):
    assert classify_word('5m', ko_rules, Mode.ENGLISH_STRICT) is WordClass.EXCLUDED
    assert classify_word('m', ko_rules, Mode.ENGLISH_STRICT) is WordClass.CONFUSED
    assert classify_word('in', ko_rules, Mode.ENGLISH_STRICT) is WordClass.CONFUSED


def test_extra_patterns():
    rules = ScriptRules.for_target('ko', extra_patterns=[r'^#\w+$'])
    assert explain_word('#tag', rules, Mode.ENGLISH_STRICT) == (WordClass.EXCLUDED, ExclusionRule.PATTERN)


def test_script_of_ignores_common_and_inherited():
    assert script_of('1') is None
    assert script_of('\u0301') is None
    assert script_of('가') == 'Hangul'
    assert script_of('д') == 'Cyrillic'


def test_fixture_corpus_has_no_misclassifications():
    cases = generate(500, seed=0)
    seen = set()
    for case in cases:
        rules = ScriptRules.for_target(case['target'])
        for mode in ('neutral', 'strict'):
            report = analyze_text(case['text'], rules, Mode(mode))
            assert [w.surface for w in report.words] == case['words']
            assert [w.word_class.value for w in report.words] == case['labels'][mode], case['text']
            assert report.confusion_point == case['confusion_offset'][mode]
            seen.update((mode, w.word_class) for w in report.words)
            seen.update(w.rule for w in report.words if w.rule is not None)
    assert set(ExclusionRule) - {ExclusionRule.PATTERN} <= seen
    assert {(m, c) for m in ('neutral', 'strict') for c in WordClass} <= seen


words_strategy = st.lists(
    st.sampled_from(['안녕', '세계', 'hello', 'world', 'привет', 'Paris', '2024', '5km', '你好', 'x_y']),
    min_size=0, max_size=8,
)


@given(words_strategy)
def test_neutral_never_flags_more_than_strict(words):
    text = ' '.join(words)
    rules = ScriptRules.for_target('ko')
    neutral = analyze_text(text, rules, Mode.ENGLISH_NEUTRAL)
    strict = analyze_text(text, rules, Mode.ENGLISH_STRICT)
    assert neutral.n_confused <= strict.n_confused
    assert (neutral.confusion_point is None) == (neutral.n_confused == 0)


@given(words_strategy)
def test_analysis_is_deterministic(words):
    text = ' '.join(words)
    rules = ScriptRules.for_target('ko')
    assert analyze_text(text, rules, Mode.ENGLISH_STRICT) == analyze_text(text, rules, Mode.ENGLISH_STRICT)


@pytest.fixture
def token_vocab():
    return make_vocab(
        ('</s>', LangTag.NEUTRAL),
        (' 가나', LangTag.TARGET),
        (' 다라', LangTag.TARGET),
        (' при', LangTag.CONFUSED),
        ('вет', LangTag.CONFUSED),
        (' cat', LangTag.ENGLISH),
        ('.', LangTag.NEUTRAL),
        eos_id=0,
    )


def test_confusion_point_absent_for_clean_tokens(token_vocab, ko_rules):
    assert detect_confusion_point([1, 2, 1, 6, 2], token_vocab, ko_rules, Mode.ENGLISH_STRICT) is None


def test_confusion_point_at_first_confused_token(token_vocab, ko_rules):
    tokens = [1, 2, 1, 3, 2]
    assert detect_confusion_point(tokens, token_vocab, ko_rules, Mode.ENGLISH_NEUTRAL) == 3


def test_confusion_point_is_first_of_several(token_vocab, ko_rules):
    tokens = [1, 2, 1, 2, 1, 3, 1, 2, 1, 3, 2]
    assert detect_confusion_point(tokens, token_vocab, ko_rules, Mode.ENGLISH_NEUTRAL) == 5


def test_confusion_point_is_first_token_of_the_word(token_vocab, ko_rules):
    # " при" + "вет" decode to one word; c points at its first token
    assert detect_confusion_point([1, 3, 4, 2], token_vocab, ko_rules, Mode.ENGLISH_NEUTRAL) == 1


def test_english_token_is_confusion_only_in_strict_mode(token_vocab, ko_rules):
    tokens = [1, 5, 2]
    assert detect_confusion_point(tokens, token_vocab, ko_rules, Mode.ENGLISH_NEUTRAL) is None
    assert detect_confusion_point(tokens, token_vocab, ko_rules, Mode.ENGLISH_STRICT) == 1


def test_detector_records_unicode_version(neutral_detector):
    report = neutral_detector.analyze_text('안녕 мир')
    assert report.unicode_version == unicodedata.unidata_version
    assert report.is_confused
    assert neutral_detector.with_mode(Mode.ENGLISH_STRICT).mode is Mode.ENGLISH_STRICT


def test_detector_wrapper_matches_functions(ko_rules):
    detector = LanguageDetector(ko_rules, Mode.ENGLISH_STRICT)
    assert detector.segment('안녕 hello') == ['안녕', 'hello']
    assert detector.is_confused('안녕 hello')
    assert not detector.with_mode(Mode.ENGLISH_NEUTRAL).is_confused('안녕 hello')
