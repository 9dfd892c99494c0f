import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import numpy.typing as npt

from src.exc import DomainError, UpdateRejectedError
from src.logconf import opt_logger as log
from src.models import TAG_ORDER, Context, PromptRecord, TokenSequence, Vocab

logger = log.setup_logger('policy')

Distribution = npt.NDArray[np.float64]
Key = tuple[int, ...]
SeedLike = int | Sequence[int]


def softmax(z: np.ndarray) -> Distribution:
    """ Softmax с вычитанием максимума """
    shifted = np.exp(z - np.max(z))
    return shifted / shifted.sum()


@dataclass
class SparseGradient:
    """
    Градиент по логитам: строки по ключу окна плюс общий вектор языковых смещений.
    Порядок строк в словаре фиксирован порядком добавления
    """
    rows: dict[Key, np.ndarray] = field(default_factory=dict)
    lang_bias: Optional[np.ndarray] = None

    def add_row(self, key: Key, values: np.ndarray, scale: float = 1.0) -> None:
        if key in self.rows:
            self.rows[key] = self.rows[key] + scale * values
        else:
            self.rows[key] = scale * np.asarray(values, dtype=np.float64)

    def add_bias(self, values: np.ndarray, scale: float = 1.0) -> None:
        values = scale * np.asarray(values, dtype=np.float64)
        self.lang_bias = values if self.lang_bias is None else self.lang_bias + values

    def accumulate(self, other: "SparseGradient", scale: float = 1.0) -> "SparseGradient":
        for key, values in other.rows.items():
            self.add_row(key, values, scale)
        if other.lang_bias is not None:
            self.add_bias(other.lang_bias, scale)
        return self

    def scaled(self, scale: float) -> "SparseGradient":
        return SparseGradient().accumulate(self, scale)

    def is_finite(self) -> bool:
        if self.lang_bias is not None and not np.all(np.isfinite(self.lang_bias)):
            return False
        return all(np.all(np.isfinite(v)) for v in self.rows.values())

    def is_zero(self) -> bool:
        if self.lang_bias is not None and np.any(self.lang_bias):
            return False
        return not any(np.any(v) for v in self.rows.values())

    def norm(self) -> float:
        total = sum(float(np.dot(v, v)) for v in self.rows.values())
        if self.lang_bias is not None:
            total += float(np.dot(self.lang_bias, self.lang_bias))
        return float(np.sqrt(total))


class PolicyTable:
    """
    Табличная авторегрессионная softmax-политика.

    Эффективный логит токена j в окне w:
        W[key(w)][j] + lang_scale * lang_bias[tag(j)]
    key(w) - самый длинный сохранённый суффикс окна; если его нет,
    строка нулевая (равномерное распределение при lang_scale = 0).
    """

    def __init__(
            self,
            vocab: Vocab,
            m: int = 1,
            rows: Optional[dict[Key, np.ndarray]] = None,
            lang_bias: Optional[np.ndarray] = None,
            lang_scale: float = 0.0,
    ):
        if not 1 <= m <= 3:
            raise DomainError(f'context window must be 1..3, got {m}')
        self.vocab = vocab
        self.m = m
        self.lang_scale = float(lang_scale)
        self.lang_bias = (np.zeros(len(TAG_ORDER)) if lang_bias is None
                          else np.array(lang_bias, dtype=np.float64))
        self.rows: dict[Key, np.ndarray] = {}
        self.frozen = False
        self._lock = threading.RLock()
        for key, values in (rows or {}).items():
            self.set_row(key, values)

    # = ЧТЕНИЕ =
    def _window(self, ctx: Context | Iterable[int]) -> Key:
        window = ctx.window if isinstance(ctx, Context) else tuple(int(t) for t in ctx)
        for token in window:
            self.vocab.check_token(token)
        return window[-self.m:] if window else ()

    def backoff_key(self, ctx: Context | Iterable[int]) -> Optional[Key]:
        """ Самый длинный сохранённый суффикс окна """
        window = self._window(ctx)
        for length in range(len(window), -1, -1):
            key = window[len(window) - length:]
            if key in self.rows:
                return key
        return None

    def row_logits(self, ctx: Context | Iterable[int]) -> np.ndarray:
        key = self.backoff_key(ctx)
        return self.rows[key].copy() if key is not None else np.zeros(self.vocab.size)

    def logits(self, ctx: Context | Iterable[int]) -> np.ndarray:
        return self.row_logits(ctx) + self.lang_scale * self.lang_bias[self.vocab.tag_index]

    def next_token_dist(self, ctx: Context | Iterable[int], temperature: float = 1.0) -> Distribution:
        return softmax(self.logits(ctx) / temperature)

    def logprob_grad(self, ctx: Context | Iterable[int], token: int) -> SparseGradient:
        """ Градиент log π(token|ctx): δ_tj - π(j|ctx) по строке, плюс часть общих смещений """
        token = self.vocab.check_token(token)
        window = self._window(ctx)
        row = -self.next_token_dist(window)
        row[token] += 1.0
        grad = SparseGradient()
        grad.add_row(window, row)
        grad.add_bias(self.lang_scale * np.bincount(self.vocab.tag_index, weights=row, minlength=len(TAG_ORDER)))
        return grad

    def sample_sequence(
            self,
            prompt: PromptRecord | Sequence[int],
            max_len: int,
            seed: SeedLike,
            temperature: float = 1.0,
            greedy: bool = False,
    ) -> TokenSequence:
        """
        Авторегрессионная выборка до конца последовательности или max_len.
        Результат зависит только от (политики, промпта, seed)
        """
        if max_len < 1:
            raise DomainError(f'max_len must be >= 1, got {max_len}')
        if isinstance(prompt, PromptRecord):
            prompt_id, history = prompt.id, tuple(self.vocab.encode(prompt.text))
        else:
            prompt_id, history = -1, tuple(int(t) for t in prompt)

        rng = np.random.default_rng(seed)
        tokens: list[int] = []
        while len(tokens) < max_len:
            probs = self.next_token_dist(history[-self.m:], temperature)
            if greedy:
                token = int(np.argmax(probs))
            else:
                cdf = np.cumsum(probs)
                token = int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side='right'), len(probs) - 1))
            tokens.append(token)
            history += (token,)
            if token == self.vocab.eos_id:
                break
        return TokenSequence(prompt_id=prompt_id, prompt_tokens=history[:len(history) - len(tokens)], tokens=tokens)

    # = ЗАПИСЬ =
    def set_row(self, key: Iterable[int], values) -> None:
        key = tuple(int(t) for t in key)
        if len(key) > self.m:
            raise DomainError(f'row key {key} longer than window {self.m}')
        for token in key:
            self.vocab.check_token(token)
        values = np.array(values, dtype=np.float64)
        if values.shape != (self.vocab.size,) or not np.all(np.isfinite(values)):
            raise DomainError(f'row {key} must be {self.vocab.size} finite logits')
        with self._lock:
            self.rows[key] = values

    def apply_update(self, grad: SparseGradient, step: float) -> "PolicyTable":
        """
        logits += step * grad. Строка для ещё не сохранённого окна
        сначала копируется из строки отката
        """
        if self.frozen:
            raise UpdateRejectedError('policy snapshot is read-only')
        if not np.isfinite(step):
            raise UpdateRejectedError(f'non-finite step size {step}')
        if not grad.is_finite():
            logger.warning('Rejected update with non-finite gradient entries')
            raise UpdateRejectedError('gradient has non-finite entries')
        if step == 0.0:
            return self

        with self._lock:
            updated: dict[Key, np.ndarray] = {}
            for key, values in grad.rows.items():
                if not np.any(values):
                    continue
                base = updated.get(key)
                if base is None:
                    base = self.row_logits(key)
                updated[key] = base + step * values
            bias = self.lang_bias
            if grad.lang_bias is not None and np.any(grad.lang_bias):
                bias = self.lang_bias + step * grad.lang_bias

            if not all(np.all(np.isfinite(v)) for v in updated.values()) or not np.all(np.isfinite(bias)):
                raise UpdateRejectedError('update would produce non-finite logits')
            self.rows.update(updated)
            self.lang_bias = bias
        return self

    # = СНИМКИ =
    def copy(self) -> "PolicyTable":
        with self._lock:
            clone = PolicyTable(self.vocab, self.m, lang_scale=self.lang_scale, lang_bias=self.lang_bias)
            clone.rows = {key: values.copy() for key, values in self.rows.items()}
        return clone

    def snapshot(self) -> "PolicyTable":
        """ Неизменяемая копия, её можно читать из нескольких потоков """
        clone = self.copy()
        for values in clone.rows.values():
            values.setflags(write=False)
        clone.lang_bias.setflags(write=False)
        clone.frozen = True
        return clone

    def stored_keys(self) -> list[Key]:
        return sorted(self.rows)

    def equals(self, other: "PolicyTable") -> bool:
        """ Побитовое совпадение параметров """
        if self.m != other.m or self.lang_scale != other.lang_scale:
            return False
        if self.vocab.digest() != other.vocab.digest() or self.stored_keys() != other.stored_keys():
            return False
        if not np.array_equal(self.lang_bias, other.lang_bias):
            return False
        return all(np.array_equal(self.rows[k], other.rows[k]) for k in self.rows)

    # = ЗАПИСЬ В ЧЕКПОИНТ =
    def to_record(self) -> dict:
        return {
            'm': self.m,
            'vocab': self.vocab.model_dump(mode='json'),
            'vocab_digest': self.vocab.digest(),
            'lang_scale': self.lang_scale,
            'lang_bias': self.lang_bias.tolist(),
            'rows': [[list(key), self.rows[key].tolist()] for key in self.stored_keys()],
        }

    @classmethod
    def from_record(cls, record: dict) -> "PolicyTable":
        vocab = Vocab.model_validate(record['vocab'])
        if vocab.digest() != record['vocab_digest']:
            raise DomainError('vocabulary digest does not match checkpoint')
        return cls(
            vocab,
            m=record['m'],
            rows={tuple(key): values for key, values in record['rows']},
            lang_bias=record['lang_bias'],
            lang_scale=record['lang_scale'],
        )