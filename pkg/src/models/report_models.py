from typing import Optional

from pydantic import BaseModel, Field, model_validator

from src.models.detector_models import Mode
from src.models.train_models import AdvantageVariant, Incident, RunningStats, SelectionStrategy, StepRecord


class ResponseDetail(BaseModel):
    index: int
    n_pass: int
    n_confused: int
    n_excluded: int
    passed: bool
    empty: bool = Field(False, description="Ни одного учитываемого слова, засчитан как чистый")


class MetricResult(BaseModel):
    """
    WPR и RPR по набору ответов.
    WPR считается по всем словам сразу, а не как среднее по ответам
    """
    mode: Mode
    wpr: float = Field(..., ge=0.0, le=1.0)
    rpr: float = Field(..., ge=0.0, le=1.0)
    words_pass: int = Field(..., ge=0)
    words_total: int = Field(..., ge=0)
    responses_pass: int = Field(..., ge=0)
    responses_total: int = Field(..., ge=0)
    empty_responses: list[int] = Field(default_factory=list)
    responses: list[ResponseDetail] = Field(default_factory=list)

    @model_validator(mode='after')
    def check_counts(self) -> 'MetricResult':
        if self.words_pass > self.words_total or self.responses_pass > self.responses_total:
            raise ValueError('pass counts exceed totals')
        return self

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return self.words_pass, self.words_total, self.responses_pass, self.responses_total


class TrainingReport(BaseModel):
    config: dict
    vocab_digest: str
    baseline: MetricResult
    final: Optional[MetricResult] = Field(None, description="Нет при M = 0")
    steps: list[StepRecord] = Field(default_factory=list)
    stats: RunningStats = Field(default_factory=RunningStats)
    incidents: list[Incident] = Field(default_factory=list)
    capability_kl: float = Field(0.0, ge=0.0, description="Средний KL к исходной политике на чистых контекстах")
    confusion_contexts: list[list[int]] = Field(default_factory=list, description="Окна, где встретилась точка смешения")


class TokenShift(BaseModel):
    token: int
    surface: str
    before: float
    after: float


class ContextShift(BaseModel):
    window: list[int]
    explored_confusion: tuple[float, float] = Field(..., description="(до, после), смешение внутри top-N")
    outside_confusion: tuple[float, float] = Field(..., description="(до, после), смешение вне top-N")
    outside_clean: tuple[float, float] = Field(..., description="(до, после), прочие токены вне top-N")
    tokens: list[TokenShift] = Field(default_factory=list)


class ShiftReport(BaseModel):
    n_candidates: int
    mode: Mode
    contexts: list[ContextShift] = Field(default_factory=list)
    outside_confusion_decreased: float = Field(0.0, description="Доля контекстов, где смешение вне top-N упало")
    mean_delta_explored_confusion: float = 0.0
    mean_delta_outside_confusion: float = 0.0
    mean_delta_outside_clean: float = 0.0


class AblationRow(BaseModel):
    advantage: AdvantageVariant
    selection: SelectionStrategy
    rpr: float
    wpr: float
    capability_kl: float
    candidate_sets: int


class AblationReport(BaseModel):
    baseline_rpr: float
    baseline_wpr: float
    rows: list[AblationRow] = Field(default_factory=list, description="По возрастанию capability_kl")


class SweepRow(BaseModel):
    n_candidates: int
    rpr: float
    wpr: float
    capability_kl: float
    candidate_sets: int
    degenerate_sets: int


class SweepReport(BaseModel):
    baseline_rpr: float
    baseline_wpr: float
    rows: list[SweepRow] = Field(default_factory=list)


class FileDigest(BaseModel):
    file: str
    sha256: str


class RunManifest(BaseModel):
    """ Всё, что нужно для повторения запуска; без отметок времени """
    command: str
    config: dict
    seeds: dict[str, int]
    inputs: dict[str, FileDigest] = Field(default_factory=dict)
    outputs: list[str] = Field(default_factory=list)
    extra: dict = Field(default_factory=dict)
    run_id: str = ''
