from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.config import config
from src.exc import ConfigurationError
from src.models.detector_models import TargetLanguage
from src.models.policy_models import PromptRecord

_defaults = config.corpus


class CorpusSpec(BaseModel):
    """
    Параметры синтетического корпуса.
    Строки после целевых токенов несут массу смешения confusion_rate
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    target: TargetLanguage = TargetLanguage(config.detector.target)
    n_target: int = Field(_defaults.n_target, ge=1, description="Слов целевого языка")
    n_confused: int = Field(_defaults.n_confused, ge=1, description="Слов языка смешения (кириллица)")
    n_english: int = Field(_defaults.n_english, ge=1, description="Английских слов")
    n_neutral: int = Field(_defaults.n_neutral, ge=1, le=6, description="Знаков препинания, без учёта конца последовательности")
    n_prompts: int = Field(_defaults.n_prompts, ge=1)
    n_heldout: int = Field(_defaults.n_heldout, ge=0)
    confusion_rate: float = Field(_defaults.confusion_rate, ge=0.0, le=1.0)
    switch_rate: float = Field(_defaults.switch_rate, ge=0.0, le=1.0, description="Масса смешения после токена смешения")
    english_rate: float = Field(_defaults.english_rate, ge=0.0, le=1.0)
    neutral_rate: float = Field(_defaults.neutral_rate, ge=0.0, le=1.0)
    head_size: int = Field(_defaults.head_size, ge=1)
    head_share: float = Field(_defaults.head_share, gt=0.0, le=1.0)
    salient_confusion: int = Field(_defaults.salient_confusion, ge=1)
    salient_share: float = Field(_defaults.salient_share, gt=0.0, le=1.0)
    lang_scale: float = Field(_defaults.lang_scale, ge=0.0)
    offscript_rate: float = Field(_defaults.offscript_rate, ge=0.0, le=1.0)
    min_words: int = Field(_defaults.min_words, ge=1)
    max_words: int = Field(_defaults.max_words, ge=1)
    window: int = Field(_defaults.window, ge=1, le=3, description="m, длина окна контекста")
    clean_non_target_rows: bool = Field(True, description="Строки после неязыковых токенов без смешения")
    seed: int = config.seed

    @classmethod
    def build(cls, **values) -> 'CorpusSpec':
        try:
            return cls(**{k: v for k, v in values.items() if v is not None})
        except ValidationError as e:
            raise ConfigurationError(f'invalid corpus spec: {e}') from e


class FilterResult(BaseModel):
    kept: list[PromptRecord]
    dropped_ids: list[int] = Field(default_factory=list)

    @property
    def dropped(self) -> int:
        return len(self.dropped_ids)
