import unicodedata
from functools import lru_cache
from typing import Callable, Optional, Sequence

import regex

from src.logconf import opt_logger as log
from src.models import ConfusionReport, ExclusionRule, Mode, ScriptRules, Vocab, WordClass, WordRecord

logger = log.setup_logger('detector')

# Письменности, которые различаются по имени; остальные несущие письменность символы -> 'Other'
KNOWN_SCRIPTS = (
    'Latin', 'Cyrillic', 'Greek', 'Armenian', 'Georgian', 'Hebrew', 'Arabic',
    'Devanagari', 'Bengali', 'Tamil', 'Thai', 'Lao', 'Khmer', 'Myanmar', 'Ethiopic',
    'Hangul', 'Han', 'Hiragana', 'Katakana', 'Bopomofo',
)
# Письменности без пробелов между словами: слово = максимальный отрезок одной письменности
CONTINUA_SCRIPTS = frozenset({'Han', 'Hiragana', 'Katakana', 'Thai', 'Lao', 'Khmer', 'Myanmar'})

_SCRIPT_PATTERNS = {name: regex.compile(rf'\p{{Script={name}}}') for name in KNOWN_SCRIPTS}
_NON_SCRIPT = regex.compile(r'[\p{Script=Common}\p{Script=Inherited}]')
_BASIC_LATIN_LETTER = regex.compile(r'[A-Za-z]')

_EDGE_PUNCT = regex.compile(r'^\p{P}+|\p{P}+$')
_URL = regex.compile(r'(?i)^(?:(?:https?|ftp)://|www\.)\S+$')
_EMAIL = regex.compile(r'^[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)+$')
_CODE = (
    regex.compile(r'^[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*\([^()\s]*\)$'),  # вызов f(x)
    regex.compile(r'^_*[A-Za-z0-9]+(?:_+[A-Za-z0-9]+)+_*$'),                             # snake_case
    regex.compile(r'^_{2}[A-Za-z0-9]+_{2}$'),                                              # __dunder__
    regex.compile(r'^[a-z]+[0-9]*(?:[A-Z][a-z0-9]+)+$'),                                   # camelCase
    regex.compile(r'^[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)+$'),              # a.b.c
)
_UNITS = (
    'km', 'cm', 'mm', 'nm', 'µm', 'kg', 'mg', 'ml', 'mL', 'dl', 'kWh', 'Wh', 'kW', 'MW',
    'mA', 'mV', 'kV', 'Hz', 'kHz', 'MHz', 'GHz', 'ms', 'ns', 'µs', 'mph', 'kph', 'km/h',
    'm/s', 'lb', 'lbs', 'oz', 'ft', 'yd', 'sq', 'gal', 'qt', 'KB', 'MB', 'GB', 'TB', 'kB',
    'kbps', 'Mbps', 'mol', 'cal', 'kcal', 'psi', 'rpm', 'dB',
)
_NUMBER = r'\d+(?:[.,]\d+)?'
_UNIT = regex.compile(
    rf'^(?:{_NUMBER})?(?:{"|".join(regex.escape(u) for u in sorted(_UNITS, key=len, reverse=True))})$'
    rf'|^{_NUMBER}(?:in|[mgslhkAVWKL])$'
)
_TONE_MARKS = frozenset('\u0300\u0301\u0304\u030c')  # гравис, акут, макрон, гачек
_PHONETIC_MARKS = frozenset('ˈˌː')


@lru_cache(maxsize=65536)
def script_of(ch: str) -> Optional[str]:
    """ Unicode Script символа; None для Common/Inherited и неназначенных символов """
    if unicodedata.category(ch) in ('Cn', 'Co', 'Cs', 'Cc') or _NON_SCRIPT.match(ch):
        return None
    for name, pattern in _SCRIPT_PATTERNS.items():
        if pattern.match(ch):
            return name
    return 'Other'


@lru_cache(maxsize=256)
def _compiled(pattern: str):
    return regex.compile(pattern)


def segment_spans(text: str) -> list[tuple[int, int]]:
    """ Границы слов: пробелы, а внутри CJK-фрагментов отрезки одной письменности """
    spans = []
    for match in regex.finditer(r'\S+', text):
        chunk, offset = match.group(), match.start()
        scripts = [script_of(ch) for ch in chunk]
        if not CONTINUA_SCRIPTS.intersection(scripts):
            spans.append((offset, match.end()))
            continue

        runs: list[list] = []
        for i, script in enumerate(scripts):
            if script is None:
                # Нейтральные символы присоединяются к текущему отрезку
                if runs:
                    runs[-1][1] = i + 1
                continue
            if runs and runs[-1][2] == script:
                runs[-1][1] = i + 1
            else:
                runs.append([0 if not runs else i, i + 1, script])
        spans.extend((offset + start, offset + end) for start, end, _ in runs)
    return spans


def segment(text: str, rules: Optional[ScriptRules] = None) -> list[str]:
    """ Разбивает текст на слова """
    return [text[start:end] for start, end in segment_spans(text)]


def _strip_light(word: str) -> str:
    return word.strip('"\'«»“”‘’').rstrip('.,;:!?')


def _is_url(word: str, core: str, rules: ScriptRules) -> bool:
    return bool(_URL.match(_strip_light(word)))


def _is_email(word: str, core: str, rules: ScriptRules) -> bool:
    return bool(_EMAIL.match(_strip_light(word)))


def _is_code(word: str, core: str, rules: ScriptRules) -> bool:
    light = _strip_light(word)
    return any(pattern.match(light) for pattern in _CODE)


def _is_capitalized(word: str, core: str, rules: ScriptRules) -> bool:
    return bool(core) and core[0].isupper()


def _is_unit(word: str, core: str, rules: ScriptRules) -> bool:
    return bool(_UNIT.match(core))


def _has_tone_marks(word: str, core: str, rules: ScriptRules) -> bool:
    scripts = {script_of(ch) for ch in core} - {None}
    if scripts != {'Latin'}:
        return False
    return any(ch in _TONE_MARKS for ch in unicodedata.normalize('NFD', core))


def _is_phonetic(word: str, core: str, rules: ScriptRules) -> bool:
    return any(
        0x0250 <= ord(ch) <= 0x02AF or 0x1D00 <= ord(ch) <= 0x1DBF or ch in _PHONETIC_MARKS
        for ch in core
    )


def _matches_extra(word: str, core: str, rules: ScriptRules) -> bool:
    return any(_compiled(pattern).search(word) for pattern in rules.extra_patterns)


_RULES: dict[ExclusionRule, Callable[[str, str, ScriptRules], bool]] = {
    ExclusionRule.URL: _is_url,
    ExclusionRule.EMAIL: _is_email,
    ExclusionRule.CODE: _is_code,
    ExclusionRule.CAPITAL: _is_capitalized,
    ExclusionRule.UNIT: _is_unit,
    ExclusionRule.TONE: _has_tone_marks,
    ExclusionRule.PHONETIC: _is_phonetic,
    ExclusionRule.PATTERN: _matches_extra,
}


def is_allowed(ch: str, rules: ScriptRules, mode: Mode) -> bool:
    if script_of(ch) in rules.allowed_scripts:
        return True
    return mode == Mode.ENGLISH_NEUTRAL and bool(_BASIC_LATIN_LETTER.match(ch))


def explain_word(word: str, rules: ScriptRules, mode: Mode) -> tuple[WordClass, Optional[ExclusionRule]]:
    """ Класс слова и правило исключения, если оно сработало """
    core = _EDGE_PUNCT.sub('', word)
    for rule in rules.rule_order:
        if _RULES[rule](word, core, rules):
            return WordClass.EXCLUDED, rule

    bearing = [ch for ch in word if script_of(ch) is not None]
    if not bearing:
        return WordClass.EXCLUDED, ExclusionRule.NO_SCRIPT
    if all(is_allowed(ch, rules, mode) for ch in bearing):
        return WordClass.PASS, None
    return WordClass.CONFUSED, None


def classify_word(word: str, rules: ScriptRules, mode: Mode) -> WordClass:
    return explain_word(word, rules, mode)[0]


def _word_records(text: str, rules: ScriptRules, mode: Mode) -> list[WordRecord]:
    records = []
    for start, end in segment_spans(text):
        word_class, rule = explain_word(text[start:end], rules, mode)
        records.append(WordRecord(surface=text[start:end], word_class=word_class, start=start, rule=rule))
    return records


def analyze_text(text: str, rules: ScriptRules, mode: Mode) -> ConfusionReport:
    """ Отчёт по тексту; точка смешения - смещение первого символа первого смешанного слова """
    words = _word_records(text, rules, mode)
    confused = next((w for w in words if w.word_class is WordClass.CONFUSED), None)
    return ConfusionReport(words=words, confusion_point=confused.start if confused else None, mode=mode)


def analyze_tokens(tokens: Sequence[int], vocab: Vocab, rules: ScriptRules, mode: Mode) -> ConfusionReport:
    """ Отчёт по ответу; точка смешения - первый токен первого смешанного слова """
    text, spans = vocab.spans(tokens)
    words = _word_records(text, rules, mode)
    confused = next((w for w in words if w.word_class is WordClass.CONFUSED), None)
    point = None
    if confused is not None:
        point = next(i for i, (start, end) in enumerate(spans) if start <= confused.start < end)
    return ConfusionReport(words=words, confusion_point=point, mode=mode)


def detect_confusion_point(tokens: Sequence[int], vocab: Vocab, rules: ScriptRules, mode: Mode) -> Optional[int]:
    return analyze_tokens(tokens, vocab, rules, mode).confusion_point


class LanguageDetector:
    """ Правила и режим в одном объекте; неизменяем, безопасен для потоков """

    def __init__(self, rules: ScriptRules, mode: Mode = Mode.ENGLISH_NEUTRAL):
        self.rules = rules
        self.mode = Mode(mode)
        logger.debug(f"Detector ready: target={rules.target.value}, mode={self.mode.value}")

    def with_mode(self, mode: Mode) -> "LanguageDetector":
        return LanguageDetector(self.rules, mode)

    def segment(self, text: str) -> list[str]:
        return segment(text, self.rules)

    def classify_word(self, word: str) -> WordClass:
        return classify_word(word, self.rules, self.mode)

    def analyze_text(self, text: str) -> ConfusionReport:
        return analyze_text(text, self.rules, self.mode)

    def analyze_tokens(self, tokens: Sequence[int], vocab: Vocab) -> ConfusionReport:
        return analyze_tokens(tokens, vocab, self.rules, self.mode)

    def detect_confusion_point(self, tokens: Sequence[int], vocab: Vocab) -> Optional[int]:
        return detect_confusion_point(tokens, vocab, self.rules, self.mode)

    def is_confused(self, text: str) -> bool:
        return any(w.word_class is WordClass.CONFUSED for w in _word_records(text, self.rules, self.mode))
