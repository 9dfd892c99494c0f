from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.config import config
from src.exc import ConfigurationError
from src.models.detector_models import Mode, TargetLanguage
from src.models.policy_models import Context


class SelectionStrategy(str, Enum):
    RANKED = 'ranked'
    MULTINOMIAL = 'multinomial'


class AdvantageVariant(str, Enum):
    TLPO_WEIGHTED = 'tlpo_weighted'
    UNWEIGHTED = 'unweighted'
    GRPO_STYLE = 'grpo_style'


class Candidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    token: int = Field(..., ge=0)
    p_old: float = Field(..., gt=0.0, le=1.0, description="Вероятность под старой политикой")
    reward: Optional[float] = Field(None, description="Награда за просмотр вперёд, ±1")

    @field_validator('reward')
    @classmethod
    def check_reward(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and value not in (1.0, -1.0):
            raise ValueError(f'reward must be +1 or -1, got {value}')
        return value


class CandidateSet(BaseModel):
    """
    Кандидаты в точке смешения языков.
    confusion_token: токен, который политика фактически сгенерировала в этой точке
    """
    model_config = ConfigDict(frozen=True)

    context: Context
    candidates: list[Candidate]
    strategy: SelectionStrategy
    confusion_token: Optional[int] = None

    @model_validator(mode='after')
    def check_candidates(self) -> 'CandidateSet':
        if len(self.candidates) < 2:
            raise ValueError('a candidate set needs at least two tokens')
        tokens = [c.token for c in self.candidates]
        if len(set(tokens)) != len(tokens):
            raise ValueError('candidate tokens must be distinct')
        if self.strategy is SelectionStrategy.RANKED:
            probs = [c.p_old for c in self.candidates]
            if any(a < b for a, b in zip(probs, probs[1:])):
                raise ValueError('ranked candidates must have non-increasing probabilities')
        return self

    @property
    def n(self) -> int:
        return len(self.candidates)

    @property
    def tokens(self) -> np.ndarray:
        return np.array([c.token for c in self.candidates], dtype=np.intp)

    @property
    def probs(self) -> np.ndarray:
        return np.array([c.p_old for c in self.candidates], dtype=np.float64)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([c.reward for c in self.candidates], dtype=np.float64)

    @property
    def scored(self) -> bool:
        return all(c.reward is not None for c in self.candidates)

    def with_rewards(self, rewards) -> 'CandidateSet':
        rewards = list(rewards)
        if len(rewards) != self.n:
            raise ValueError(f'expected {self.n} rewards, got {len(rewards)}')
        candidates = [
            Candidate(token=c.token, p_old=c.p_old, reward=float(r))
            for c, r in zip(self.candidates, rewards)
        ]
        return self.model_copy(update={'candidates': candidates})


class AdvantageVector(BaseModel):
    values: list[float]
    mu: float = Field(..., description="Средняя награда (взвешенная для TLPO_WEIGHTED)")
    z: float = Field(..., ge=0.0, description="Нормирующий делитель: сумма модулей или σ")
    variant: AdvantageVariant
    degenerate: bool = Field(False, description="Все награды равны, набор пропускается")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


class CandidateTerm(BaseModel):
    """ Отладочная запись по одному кандидату """
    token: int
    p_old: float
    p_theta: float
    p_ref: float
    reward: float
    advantage: float
    ratio: float
    clipped: bool
    surrogate: float
    kl: float


class ObjectiveValue(BaseModel):
    surrogate: float = 0.0
    kl: float = Field(0.0, ge=0.0)
    total: float = 0.0
    terms: list[CandidateTerm] = Field(default_factory=list)
    degenerate: bool = False


class TrainConfig(BaseModel):
    """
    Гиперпараметры одного запуска.
    Значения по умолчанию берутся из src.config
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    n_candidates: int = Field(config.exploration.n_candidates, ge=2, description="N, размер набора кандидатов")
    lookahead: int = Field(config.exploration.lookahead, ge=0, description="k, длина просмотра вперёд")
    policy_iters: int = Field(config.trainer.policy_iters, ge=1, description="p, внутренние итерации")
    steps: int = Field(config.trainer.steps, ge=0, description="M, внешние шаги")
    batch_size: int = Field(config.trainer.batch_size, ge=1)
    lr: float = Field(config.trainer.lr, gt=0.0, description="α, начальный шаг")
    warmup_fraction: float = Field(config.schedule.warmup_fraction, ge=0.0, lt=1.0)
    floor_fraction: float = Field(config.schedule.floor_fraction, ge=0.0, le=1.0)
    eps: float = Field(config.objective.eps, gt=0.0, lt=1.0, description="ε, ширина клипа")
    beta: float = Field(config.objective.beta, ge=0.0, description="β, вес KL")
    advantage: AdvantageVariant = AdvantageVariant(config.objective.advantage)
    selection: SelectionStrategy = SelectionStrategy(config.exploration.selection)
    greedy_lookahead: bool = config.exploration.greedy_lookahead
    temperature: float = Field(1.0, gt=0.0)
    mode: Mode = Mode(config.detector.mode)
    target: TargetLanguage = TargetLanguage(config.detector.target)
    max_len: int = Field(config.trainer.max_len, ge=1)
    seed: int = config.seed
    eval_seed: Optional[int] = Field(None, description="Зерно выборки ответов при оценке, по умолчанию seed + 1")
    incident_limit: int = Field(config.trainer.incident_limit, ge=0)
    checkpoint_every: int = Field(config.trainer.checkpoint_every, ge=0)
    refill_batches: bool = False
    workers: int = Field(config.trainer.workers, ge=1)

    @model_validator(mode='before')
    @classmethod
    def default_eval_seed(cls, values):
        if isinstance(values, dict) and values.get('eval_seed') is None and isinstance(values.get('seed', config.seed), int):
            values = {**values, 'eval_seed': values.get('seed', config.seed) + 1}
        return values

    @classmethod
    def build(cls, **values) -> 'TrainConfig':
        """ Собирает конфиг, None-значения пропускаются; ошибки -> ConfigurationError """
        try:
            return cls(**{k: v for k, v in values.items() if v is not None})
        except ValidationError as e:
            raise ConfigurationError(f'invalid training config: {e}') from e

    def replace(self, **values) -> 'TrainConfig':
        """ Производное eval_seed (seed + 1) пересчитывается при смене seed, явно заданное сохраняется """
        current = self.model_dump()
        if 'seed' in values and 'eval_seed' not in values and self.eval_seed == self.seed + 1:
            current.pop('eval_seed')
        return self.build(**{**current, **values})


class RunningStats(BaseModel):
    prompts_seen: int = 0
    clean_responses: int = 0
    confusion_hits: int = 0
    candidate_sets: int = 0
    degenerate_sets: int = 0
    skipped_contexts: int = 0
    updates: int = 0


class Incident(BaseModel):
    step: int
    kind: str
    message: str


class StepRecord(BaseModel):
    """ Скаляры одного внешнего шага """
    step: int
    lr: float
    prompts: int
    candidate_sets: int
    degenerate_sets: int
    objective: Optional[float] = None
    kl_to_ref: float = Field(..., ge=0.0)
    confusion_mass: float
    clean_kl: float = Field(..., ge=0.0)
