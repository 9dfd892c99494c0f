from functools import lru_cache
from typing import TYPE_CHECKING, Optional

from src.config import config
from src.models import Mode, ScriptRules, TargetLanguage
from src.services.detector import LanguageDetector
from src.services.storage import storage_service

if TYPE_CHECKING:
    from src.services.storage import StorageService


@lru_cache(maxsize=32)
def get_rules(target: str = config.detector.target, extra_patterns: tuple[str, ...] = ()) -> ScriptRules:
    return ScriptRules.for_target(TargetLanguage(target), extra_patterns)


@lru_cache(maxsize=32)
def get_detector(
        target: str = config.detector.target,
        mode: str = config.detector.mode,
        extra_patterns: tuple[str, ...] = (),
) -> LanguageDetector:
    """ Детекторы неизменяемы, поэтому один экземпляр на (язык, режим, шаблоны) """
    return LanguageDetector(get_rules(target, extra_patterns), Mode(mode))


def detector_from_rules(rules: ScriptRules, mode: Optional[Mode]) -> LanguageDetector:
    return get_detector(rules.target.value, (mode or Mode(config.detector.mode)).value, tuple(rules.extra_patterns))


def get_storage() -> "StorageService":
    return storage_service
