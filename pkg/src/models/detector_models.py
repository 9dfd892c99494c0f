import unicodedata
from enum import Enum
from typing import Optional

import regex
from pydantic import BaseModel, ConfigDict, Field, field_validator


class TargetLanguage(str, Enum):
    KO = 'ko'
    ZH = 'zh'
    JA = 'ja'
    AR = 'ar'


class Mode(str, Enum):
    """ Трактовка английских слов при оценке """
    ENGLISH_NEUTRAL = 'neutral'
    ENGLISH_STRICT = 'strict'


class WordClass(str, Enum):
    PASS = 'pass'
    CONFUSED = 'confused'
    EXCLUDED = 'excluded'


class ExclusionRule(str, Enum):
    URL = 'url'
    EMAIL = 'email'
    CODE = 'code'
    CAPITAL = 'capital'
    UNIT = 'unit'
    TONE = 'tone'
    PHONETIC = 'phonetic'
    PATTERN = 'pattern'
    NO_SCRIPT = 'no-script'


# Порядок применения правил исключения слова
RULE_ORDER: tuple[ExclusionRule, ...] = (
    ExclusionRule.URL,
    ExclusionRule.EMAIL,
    ExclusionRule.CODE,
    ExclusionRule.CAPITAL,
    ExclusionRule.UNIT,
    ExclusionRule.TONE,
    ExclusionRule.PHONETIC,
    ExclusionRule.PATTERN,
)

TARGET_SCRIPTS: dict[TargetLanguage, frozenset[str]] = {
    TargetLanguage.KO: frozenset({'Hangul'}),
    TargetLanguage.ZH: frozenset({'Han'}),
    TargetLanguage.JA: frozenset({'Hiragana', 'Katakana', 'Han'}),
    TargetLanguage.AR: frozenset({'Arabic'}),
}


class ScriptRules(BaseModel):
    """
    Набор правил детектора для одного целевого языка.
    Разрешённые письменности задаются именами Unicode Script
    """
    model_config = ConfigDict(frozen=True)

    target: TargetLanguage = Field(..., description="Целевой язык ответа")
    allowed_scripts: frozenset[str] = Field(..., description="Письменности целевого языка")
    extra_patterns: tuple[str, ...] = Field((), description="Дополнительные шаблоны исключения")
    rule_order: tuple[ExclusionRule, ...] = Field(RULE_ORDER, description="Порядок правил")

    @field_validator('allowed_scripts')
    @classmethod
    def check_scripts(cls, value: frozenset[str]) -> frozenset[str]:
        if not value:
            raise ValueError('allowed script set is empty')
        for name in value:
            try:
                regex.compile(rf'\p{{Script={name}}}')
            except regex.error as e:
                raise ValueError(f'unknown script {name!r}') from e
        return value

    @field_validator('extra_patterns')
    @classmethod
    def check_patterns(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        for pattern in value:
            try:
                regex.compile(pattern)
            except regex.error as e:
                raise ValueError(f'bad exclusion pattern {pattern!r}: {e}') from e
        return value

    @classmethod
    def for_target(cls, target: TargetLanguage | str, extra_patterns=()) -> "ScriptRules":
        target = TargetLanguage(target)
        return cls(
            target=target,
            allowed_scripts=TARGET_SCRIPTS[target],
            extra_patterns=tuple(extra_patterns),
        )


class WordRecord(BaseModel):
    surface: str
    word_class: WordClass
    start: int = Field(..., description="Смещение первого символа слова в тексте")
    rule: Optional[ExclusionRule] = Field(None, description="Сработавшее правило исключения")


class ConfusionReport(BaseModel):
    """
    Разбор одного ответа по словам.
    confusion_point индексирует единицы, из которых строился отчёт:
    токены ответа, либо символы, если отчёт построен по готовому тексту
    """
    words: list[WordRecord] = Field(default_factory=list)
    confusion_point: Optional[int] = None
    mode: Mode
    unicode_version: str = unicodedata.unidata_version

    @property
    def n_pass(self) -> int:
        return sum(1 for w in self.words if w.word_class is WordClass.PASS)

    @property
    def n_confused(self) -> int:
        return sum(1 for w in self.words if w.word_class is WordClass.CONFUSED)

    @property
    def n_excluded(self) -> int:
        return sum(1 for w in self.words if w.word_class is WordClass.EXCLUDED)

    @property
    def is_confused(self) -> bool:
        return self.n_confused > 0
