import hashlib
import json
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from src.exc import DomainError
from src.models.detector_models import TargetLanguage


class LangTag(str, Enum):
    TARGET = 'target'
    CONFUSED = 'confused'
    ENGLISH = 'english'
    NEUTRAL = 'neutral'


# Порядок тегов задаёт индекс в общем векторе языковых смещений
TAG_ORDER: tuple[LangTag, ...] = tuple(LangTag)


class VocabEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=0)
    surface: str = Field(..., min_length=1)
    tag: LangTag


class Vocab(BaseModel):
    """
    Словарь игрушечной политики.
    Токен eos_id завершает ответ и при декодировании пропускается
    """
    entries: list[VocabEntry]
    eos_id: Optional[int] = Field(0, description="Токен конца последовательности")

    _tag_index: np.ndarray = PrivateAttr()
    _by_surface: dict[str, int] = PrivateAttr()
    _max_surface: int = PrivateAttr()

    @model_validator(mode='after')
    def check_entries(self) -> 'Vocab':
        if not self.entries:
            raise ValueError('vocabulary is empty')
        ids = [e.id for e in self.entries]
        if ids != list(range(len(ids))):
            raise ValueError('token ids must be contiguous 0..|V|-1 in order')
        surfaces = [e.surface for e in self.entries]
        if len(set(surfaces)) != len(surfaces):
            raise ValueError('token surfaces must be unique')
        if self.eos_id is not None and not 0 <= self.eos_id < len(ids):
            raise ValueError(f'eos id {self.eos_id} outside vocabulary')
        return self

    def model_post_init(self, __context) -> None:
        self._tag_index = np.array([TAG_ORDER.index(e.tag) for e in self.entries], dtype=np.intp)
        self._by_surface = {e.surface: e.id for e in self.entries}
        self._max_surface = max(len(e.surface) for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def tag_index(self) -> np.ndarray:
        return self._tag_index

    def tag_of(self, token: int) -> LangTag:
        return self.entries[token].tag

    def ids_with_tag(self, *tags: LangTag) -> np.ndarray:
        wanted = [TAG_ORDER.index(t) for t in tags]
        return np.flatnonzero(np.isin(self._tag_index, wanted))

    def check_token(self, token: int) -> int:
        if not 0 <= int(token) < self.size:
            raise DomainError(f'token {token} outside vocabulary of size {self.size}')
        return int(token)

    def spans(self, tokens) -> tuple[str, list[tuple[int, int]]]:
        """ Декодирует токены и возвращает символьные границы каждого токена """
        parts, spans, pos = [], [], 0
        for token in tokens:
            token = self.check_token(token)
            surface = '' if token == self.eos_id else self.entries[token].surface
            spans.append((pos, pos + len(surface)))
            parts.append(surface)
            pos += len(surface)
        return ''.join(parts), spans

    def decode(self, tokens) -> str:
        return self.spans(tokens)[0]

    def encode(self, text: str) -> list[int]:
        """
        Жадное сопоставление по самой длинной поверхности.
        Перед текстом ставится пробел: словарные слова начинаются с него
        """
        text = ' ' + text.strip()
        tokens, pos = [], 0
        while pos < len(text):
            for length in range(min(self._max_surface, len(text) - pos), 0, -1):
                token = self._by_surface.get(text[pos:pos + length])
                if token is not None and token != self.eos_id:
                    tokens.append(token)
                    pos += length
                    break
            else:
                raise DomainError(f'cannot encode {text[pos:pos + 10]!r}: no matching token')
        return tokens

    def digest(self) -> str:
        payload = json.dumps(
            [[e.id, e.surface, e.tag.value] for e in self.entries] + [self.eos_id],
            ensure_ascii=False, separators=(',', ':'),
        )
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()


class Context(BaseModel):
    """
    Условие следующего токена: окно из последних m токенов.
    prompt_id хранится для учёта, ключом строки служит только окно
    """
    model_config = ConfigDict(frozen=True)

    prompt_id: int = -1
    window: tuple[int, ...]

    @property
    def key(self) -> tuple[int, ...]:
        return self.window


class PromptRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int = Field(..., description="Идентификатор промпта")
    text: str = Field(..., description="Текст промпта")
    lang: TargetLanguage = Field(..., description="Целевой язык ответа")

    @field_validator('text')
    @classmethod
    def check_text(cls, value: str) -> str:
        if not value.strip():
            raise ValueError('prompt text is empty')
        return value


class TokenSequence(BaseModel):
    """ Ответ политики на промпт; prompt_tokens задают начальное окно """
    prompt_id: int
    prompt_tokens: tuple[int, ...]
    tokens: list[int] = Field(default_factory=list)

    def context_at(self, position: int, m: int) -> Context:
        """ Контекст перед токеном ответа с индексом position """
        history = self.prompt_tokens + tuple(self.tokens[:position])
        return Context(prompt_id=self.prompt_id, window=history[-m:])
